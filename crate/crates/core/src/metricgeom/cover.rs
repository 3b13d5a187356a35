use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::cloud::{sq, PointCloud};
use super::entropy::log_sum_exp;
use crate::error::{Error, Result};
use crate::rng;

/// Relative slack on the separation test, absorbing rounding in grid coordinates.
const SEPARATION_SLACK: f64 = 1e-12;

/// Greedy `2 eps`-separated subset visiting points in `order`.
pub fn greedy_packing(cloud: &PointCloud, eps: f64, order: &[usize]) -> Vec<usize> {
    let sep2 = 4.0 * eps * eps * (1.0 - SEPARATION_SLACK);
    let mut centers: Vec<usize> = Vec::new();
    for &i in order {
        let p = cloud.point(i);
        if centers.iter().all(|&c| sq(p, cloud.point(c)) >= sep2) {
            centers.push(i);
        }
    }
    centers
}

/// Size of the greedy `2 eps`-separated subset in natural order; a lower bound for `P_eps`.
pub fn packing_number(cloud: &PointCloud, eps: f64) -> Result<usize> {
    cloud.require_nonempty()?;
    check_eps(eps)?;
    let order: Vec<usize> = (0..cloud.len()).collect();
    Ok(greedy_packing(cloud, eps, &order).len())
}

/// Max over natural order and `restarts` seeded shuffles.
pub fn packing_number_best(cloud: &PointCloud, eps: f64, restarts: usize, seed: u64) -> Result<usize> {
    let base = packing_number(cloud, eps)?;
    let best = (0..restarts as u64)
        .into_par_iter()
        .map(|r| greedy_packing(cloud, eps, &shuffled(cloud.len(), seed, r)).len())
        .max()
        .unwrap_or(0);
    Ok(base.max(best))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("eps={eps} must be positive")))
    }
}

fn shuffled(n: usize, seed: u64, r: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, rng::stream_id(&[0x636f_7665, r])));
    order
}

/// Cells of a cover with their realized diameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub centers: Vec<usize>,
    pub cells: Vec<Vec<usize>>,
    pub diameters: Vec<f64>,
}

impl Cover {
    fn from_cells(cloud: &PointCloud, centers: Vec<usize>, cells: Vec<Vec<usize>>) -> Self {
        let diameters = cells
            .iter()
            .map(|cell| {
                let mut d2: f64 = 0.0;
                for (a, &i) in cell.iter().enumerate() {
                    for &j in &cell[a + 1..] {
                        d2 = d2.max(cloud.dist_sq(i, j));
                    }
                }
                d2.sqrt()
            })
            .collect();
        Cover { centers, cells, diameters }
    }

    pub fn count(&self) -> usize {
        self.cells.len()
    }

    /// `log sum_j |theta_j|^s`, with `0^0 = 1`.
    pub fn log_sum(&self, s: f64) -> f64 {
        let terms: Vec<f64> = self.diameters.iter().map(|&d| term_log(d, s)).collect();
        log_sum_exp(&terms)
    }

    pub fn sum(&self, s: f64) -> f64 {
        self.diameters.iter().map(|&d| if s == 0.0 { 1.0 } else { d.powf(s) }).sum()
    }

    /// As `log_sum` with every diameter raised to at least `delta`.
    pub fn log_inflated_sum(&self, delta: f64, s: f64) -> f64 {
        let terms: Vec<f64> = self.diameters.iter().map(|&d| term_log(d.max(delta), s)).collect();
        log_sum_exp(&terms)
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }
}

fn term_log(d: f64, s: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else if d == 0.0 {
        f64::NEG_INFINITY
    } else {
        s * d.ln()
    }
}

/// Visits `order`; an uncovered point opens a cell holding all uncovered points within `radius`.
pub fn greedy_cover(cloud: &PointCloud, radius: f64, order: &[usize]) -> Cover {
    let r2 = radius * radius;
    let mut covered = vec![false; cloud.len()];
    let mut centers = Vec::new();
    let mut cells = Vec::new();
    for &c in order {
        if covered[c] {
            continue;
        }
        let pc = cloud.point(c);
        let mut cell = Vec::new();
        for &j in order {
            if !covered[j] && sq(pc, cloud.point(j)) <= r2 {
                covered[j] = true;
                cell.push(j);
            }
        }
        centers.push(c);
        cells.push(cell);
    }
    Cover::from_cells(cloud, centers, cells)
}

/// Cover around a greedy `packing_eps` packing, each point assigned to its nearest center.
fn packing_cover(cloud: &PointCloud, packing_eps: f64) -> Cover {
    let order: Vec<usize> = (0..cloud.len()).collect();
    let centers = greedy_packing(cloud, packing_eps, &order);
    let mut cells = vec![Vec::new(); centers.len()];
    for i in 0..cloud.len() {
        let p = cloud.point(i);
        let (best, _) = centers
            .iter()
            .enumerate()
            .map(|(a, &c)| (a, sq(p, cloud.point(c))))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        cells[best].push(i);
    }
    Cover::from_cells(cloud, centers, cells)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverOptions {
    pub restarts: usize,
    pub seed: u64,
}

impl Default for CoverOptions {
    fn default() -> Self {
        CoverOptions { restarts: 16, seed: 0 }
    }
}

/// Candidate covers with cells of diameter at most `2 eps`: natural order, seeded restarts,
/// and the covers induced by greedy `eps/2` and `eps/4` packings.
pub fn cover_candidates(cloud: &PointCloud, eps: f64, opts: &CoverOptions) -> Result<Vec<Cover>> {
    cloud.require_nonempty()?;
    check_eps(eps)?;
    let natural: Vec<usize> = (0..cloud.len()).collect();
    let mut out = vec![
        greedy_cover(cloud, eps, &natural),
        packing_cover(cloud, 0.5 * eps),
        packing_cover(cloud, 0.25 * eps),
    ];
    let restarts: Vec<Cover> = (0..opts.restarts as u64)
        .into_par_iter()
        .map(|r| greedy_cover(cloud, eps, &shuffled(cloud.len(), opts.seed, r)))
        .collect();
    out.extend(restarts);
    Ok(out)
}

fn best_by<F: Fn(&Cover) -> f64>(covers: &[Cover], f: F) -> (usize, f64) {
    covers.iter().enumerate().map(|(i, c)| (i, f(c))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

pub fn log_cover_sum_with(cloud: &PointCloud, eps: f64, s: f64, opts: &CoverOptions) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument("s must be nonnegative".into()));
    }
    Ok(best_by(&cover_candidates(cloud, eps, opts)?, |c| c.log_sum(s)).1)
}

/// `log` of the best greedy `sum_j |theta_j|^s` over covers by `eps`-balls.
pub fn log_cover_sum(cloud: &PointCloud, eps: f64, s: f64) -> Result<f64> {
    log_cover_sum_with(cloud, eps, s, &CoverOptions::default())
}

pub fn cover_sum_with(cloud: &PointCloud, eps: f64, s: f64, opts: &CoverOptions) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument("s must be nonnegative".into()));
    }
    Ok(best_by(&cover_candidates(cloud, eps, opts)?, |c| c.sum(s)).1)
}

/// Best greedy `sum_j |theta_j|^s`, an upper bound for `H^s_{2 eps}` of the sample.
pub fn cover_sum(cloud: &PointCloud, eps: f64, s: f64) -> Result<f64> {
    cover_sum_with(cloud, eps, s, &CoverOptions::default())
}

/// Cover sum with every cell diameter raised to at least `delta`.
pub fn constrained_cover_sum(cloud: &PointCloud, delta: f64, eps: f64, s: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidArgument(format!("need 0 < delta < eps, got delta={delta}, eps={eps}")));
    }
    let covers = cover_candidates(cloud, eps, &CoverOptions::default())?;
    Ok(best_by(&covers, |c| c.log_inflated_sum(delta, s)).1.exp())
}

/// `log H^s_eps` estimates on an ascending grid, each the min over all grid scales at or below it.
pub fn hausdorff_profile(cloud: &PointCloud, eps_grid: &[f64], s: f64, opts: &CoverOptions) -> Result<Vec<f64>> {
    let mut idx: Vec<usize> = (0..eps_grid.len()).collect();
    idx.sort_by(|&a, &b| eps_grid[a].total_cmp(&eps_grid[b]));
    let raw: Vec<f64> = eps_grid.iter().map(|&e| log_cover_sum_with(cloud, e, s, opts)).collect::<Result<_>>()?;
    let mut out = vec![0.0; eps_grid.len()];
    let mut running = f64::INFINITY;
    for &i in &idx {
        running = running.min(raw[i]);
        out[i] = running;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, h: f64) -> PointCloud {
        PointCloud::from_points(&(0..n).map(|i| vec![i as f64 * h]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn packing_examples() {
        let c = line(5, 1.0);
        assert_eq!(packing_number(&c, 0.4).unwrap(), 5);
        assert_eq!(packing_number(&c, 0.6).unwrap(), 3);
        let grid: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 10) as f64 * 0.1, (i / 10) as f64 * 0.1]).collect();
        let g = PointCloud::from_points(&grid).unwrap();
        let n = packing_number(&g, 0.05).unwrap();
        assert_eq!(n, 100);
        assert!(matches!(packing_number(&PointCloud::from_points(&[]).unwrap(), 0.1), Err(Error::EmptyCloud)));
    }

    #[test]
    fn cover_examples() {
        let c = line(1001, 0.001);
        let v = cover_sum(&c, 0.05, 1.0).unwrap();
        assert!((0.9..=1.2).contains(&v), "{v}");
        // Realized diameters skip the gaps between cells: a partition of a
        // spacing-h line into c runs has diameter sum 1 - (c - 1) h.
        let coarse = line(101, 0.01);
        let best = cover_candidates(&coarse, 0.05, &CoverOptions::default())
            .unwrap()
            .into_iter()
            .min_by(|a, b| a.sum(1.0).total_cmp(&b.sum(1.0)))
            .unwrap();
        let v = cover_sum(&coarse, 0.05, 1.0).unwrap();
        assert!((v - (1.0 - (best.count() - 1) as f64 * 0.01)).abs() < 1e-9, "{v}");
        let count = cover_sum(&c, 0.05, 0.0).unwrap();
        assert!(count >= 10.0 && count == count.round());
        let single = PointCloud::from_points(&[vec![0.3, 0.1]]).unwrap();
        assert_eq!(cover_sum(&single, 0.2, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn constrained_examples() {
        let single = PointCloud::from_points(&[vec![0.0]]).unwrap();
        assert!((constrained_cover_sum(&single, 0.1, 0.2, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let two = PointCloud::from_points(&[vec![0.0], vec![1.0]]).unwrap();
        assert!((constrained_cover_sum(&two, 0.1, 0.2, 1.0).unwrap() - 0.2).abs() < 1e-15);
        let c = line(57, 0.013);
        let a = constrained_cover_sum(&c, 1e-15, 0.05, 1.0).unwrap();
        let b = cover_sum(&c, 0.05, 1.0).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(constrained_cover_sum(&c, 0.2, 0.1, 1.0).is_err());
    }

    #[test]
    fn profile_is_monotone() {
        let pts: Vec<Vec<f64>> = (0..200).map(|i| {
            let t = i as f64 * 0.0314159;
            vec![t.cos(), t.sin()]
        }).collect();
        let c = PointCloud::from_points(&pts).unwrap();
        let grid = [0.02, 0.05, 0.1, 0.2, 0.4];
        let prof = hausdorff_profile(&c, &grid, 1.0, &CoverOptions::default()).unwrap();
        for w in prof.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
