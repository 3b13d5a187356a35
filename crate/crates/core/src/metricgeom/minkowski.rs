use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use super::cloud::{sq, PointCloud};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinkowskiEstimate {
    pub log_volume: f64,
    /// Wilson 95% interval on the log scale.
    pub log_lower: f64,
    pub log_upper: f64,
    pub hits: usize,
    pub trials: usize,
    pub log_box_volume: f64,
}

const CHUNKS: usize = 64;
const Z: f64 = 1.96;

/// Monte Carlo `log vol(N_eps(cloud))` from hit-testing in the `eps`-padded bounding box.
/// `log_normalization` is added to every reported log value.
pub fn minkowski_log_volume(
    cloud: &PointCloud,
    eps: f64,
    ambient_dim: usize,
    trials: usize,
    seed: u64,
    log_normalization: f64,
) -> Result<MinkowskiEstimate> {
    cloud.require_nonempty()?;
    if ambient_dim != cloud.dim() {
        return Err(Error::ShapeMismatch(format!("ambient dimension {ambient_dim} but points have {}", cloud.dim())));
    }
    if !(eps > 0.0) || trials == 0 {
        return Err(Error::InvalidArgument("eps and trials must be positive".into()));
    }
    let d = cloud.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..cloud.len() {
        for (c, &v) in cloud.point(i).iter().enumerate() {
            lo[c] = lo[c].min(v - eps);
            hi[c] = hi[c].max(v + eps);
        }
    }
    let log_box_volume: f64 = lo.iter().zip(&hi).map(|(a, b)| (b - a).ln()).sum();
    let e2 = eps * eps;
    let hits: usize = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let n = trials / CHUNKS + usize::from(c < trials % CHUNKS);
            let mut r = rng::stream(seed, rng::stream_id(&[0x6d69_6e6b, c as u64]));
            let mut x = vec![0.0; d];
            let mut h = 0;
            for _ in 0..n {
                for (j, xj) in x.iter_mut().enumerate() {
                    *xj = lo[j] + (hi[j] - lo[j]) * r.random::<f64>();
                }
                if (0..cloud.len()).any(|i| sq(&x, cloud.point(i)) < e2) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    if hits == 0 {
        return Err(Error::ZeroHits { trials });
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = Z * Z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let base = log_box_volume + log_normalization;
    Ok(MinkowskiEstimate {
        log_volume: base + p.ln(),
        log_lower: base + (center - half).max(f64::MIN_POSITIVE).ln(),
        log_upper: base + (center + half).min(1.0).ln(),
        hits,
        trials,
        log_box_volume,
    })
}
