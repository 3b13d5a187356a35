use serde::Serialize;

use crate::error::{Error, Result};

/// A constant `C` with `P_eps >= C eps^-alpha` on every tested scale below `eps0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PackingCertificate {
    pub c: f64,
    pub alpha: f64,
    pub eps0: f64,
    pub tested: usize,
}

/// Largest `C` certified by the `(eps, packing count)` scan.
pub fn certify_packing_constant(scan: &[(f64, f64)], alpha: f64, eps0: f64) -> Result<PackingCertificate> {
    if !(eps0 > 0.0 && eps0 < 1.0) {
        return Err(Error::InvalidArgument(format!("eps0={eps0} must lie in (0, 1)")));
    }
    let below: Vec<&(f64, f64)> = scan.iter().filter(|(e, _)| *e > 0.0 && *e < eps0).collect();
    if below.is_empty() {
        return Err(Error::PackingPremiseUnverified { eps: eps0 });
    }
    let mut c = f64::INFINITY;
    let mut worst = eps0;
    for &&(e, p) in &below {
        let v = p * e.powf(alpha);
        if v < c {
            c = v;
            worst = e;
        }
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::PackingPremiseUnverified { eps: worst });
    }
    Ok(PackingCertificate { c, alpha, eps0, tested: below.len() })
}

/// `C * H^g(E) / H^g(X)`, a lower bound for `H^alpha_{eps0}(E)` on a homogeneous space.
pub fn lemma61_transfer(cert: &PackingCertificate, measure_ratio: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&measure_ratio) {
        return Err(Error::InvalidArgument(format!("measure ratio {measure_ratio} outside [0, 1]")));
    }
    if !(cert.c > 0.0) || cert.tested == 0 {
        return Err(Error::PackingPremiseUnverified { eps: cert.eps0 });
    }
    Ok(cert.c * measure_ratio)
}
