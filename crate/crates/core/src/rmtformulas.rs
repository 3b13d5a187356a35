//! Closed-form random-matrix and geometric constants, all in log-space.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::spectral::{near_pair_count, rect_combination, QuantilePlan, SpectralMeasure};

pub fn log_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// `sum_{j=1}^n log j!`.
pub fn log_superfactorial(n: usize) -> f64 {
    (1..=n).map(log_factorial).sum()
}

/// `sum_{i<j} 2 log|t_i - t_j|`.
pub fn vandermonde_sq_log(t: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, &x) in t.iter().enumerate() {
        for &y in &t[i + 1..] {
            let d = (x - y).abs();
            if d == 0.0 {
                return f64::NEG_INFINITY;
            }
            s += 2.0 * d.ln();
        }
    }
    s
}

/// `log D_k = (k(k-1)/2) log pi - sum_{j=1}^k log j!`.
pub fn mehta_constant_log(k: usize) -> f64 {
    let kf = k as f64;
    0.5 * kf * (kf - 1.0) * PI.ln() - log_superfactorial(k)
}

/// Log of the constant `c_k` with `vol{X : eig(X) in S} = c_k int_S Delta(t)^2 dt`
/// for sorted-eigenvalue regions `S`, volume taken in coordinates orthonormal for `|.|_2`.
/// Equals `mehta_constant_log(2)` at `k = 2`.
pub fn weyl_volume_constant_log(k: usize) -> f64 {
    let kf = k as f64;
    let pairs = 0.5 * kf * (kf - 1.0);
    pairs * PI.ln() - log_superfactorial(k.saturating_sub(1)) - 0.5 * kf * kf.ln() + pairs * (2.0 / kf).ln()
}

/// `log int_{[-eps,eps]^p} prod_{i<j} (t_i - t_j)^2 dt`
/// `= p^2 log(2 eps) + sum_{j=1}^p [2 log G(j) + log G(j+1) - log G(p+j)]`.
pub fn selberg_box_log(p: usize, eps: f64) -> f64 {
    let pf = p as f64;
    let mut s = pf * pf * (2.0 * eps).ln();
    for j in 1..=p {
        let jf = j as f64;
        s += 2.0 * ln_gamma(jf) + ln_gamma(jf + 1.0) - ln_gamma(pf + jf);
    }
    s
}

/// `sum_{j=1}^p [log G(j+2) + 2 log G(j+1) - log G(p+j+1)]`.
pub fn selberg_tail_log(p: usize) -> f64 {
    let pf = p as f64;
    (1..=p)
        .map(|j| {
            let jf = j as f64;
            ln_gamma(jf + 2.0) + 2.0 * ln_gamma(jf + 1.0) - ln_gamma(pf + jf + 1.0)
        })
        .sum()
}

/// `log(2^d G(d/2 + 1)) - (d/2) log pi`.
pub fn isodiametric_log_ratio(d: usize) -> f64 {
    let df = d as f64;
    df * 2f64.ln() + ln_gamma(0.5 * df + 1.0) - 0.5 * df * PI.ln()
}

/// `K(n) = (n/2) log(2n / (pi e))`.
pub fn hausdorff_entropy_constant(n: usize) -> f64 {
    let nf = n as f64;
    0.5 * nf * (2.0 * nf / (PI * std::f64::consts::E)).ln()
}

/// `int int log|s - t| dnu dnu` of the diffuse part, exact over pairs of linear pieces.
pub fn log_energy(mu: &SpectralMeasure) -> f64 {
    let segs: Vec<_> = mu.segments().collect();
    let f = |u: f64| if u == 0.0 { 0.0 } else { 0.5 * u * u * u.abs().ln() - 0.75 * u * u };
    let mut total = 0.0;
    for &(x0, x1, mx) in &segs {
        for &(y0, y1, my) in &segs {
            let dens = mx / (x1 - x0) * my / (y1 - y0);
            total += dens * rect_combination(x0, x1, y0, y1, f);
        }
    }
    total
}

/// `chi(mu) = int int log|s-t| + 3/4 + (1/2) log 2pi`; `-inf` when `mu` has an atom.
pub fn chi_single(mu: &SpectralMeasure) -> f64 {
    if !mu.atoms().is_empty() {
        return f64::NEG_INFINITY;
    }
    log_energy(mu) + 0.75 + 0.5 * (2.0 * PI).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitVolumeBound {
    pub k: usize,
    pub p_k: usize,
    pub beta: f64,
    pub log_l_k: f64,
    pub eps0: f64,
    pub near_pairs: usize,
    pub near_pair_bound_holds: bool,
    pub degenerate: bool,
}

impl OrbitVolumeBound {
    /// `log L_k + beta k^2 log eps`, meaningful for `eps < eps0`.
    pub fn log_bound(&self, eps: f64) -> f64 {
        self.log_l_k + self.beta * (self.k * self.k) as f64 * eps.ln()
    }

    /// `k^-2 (log L_k + log G(p^2/2 + 1) - (p^2/2) log(pi k))`.
    pub fn closing_chain_value(&self) -> f64 {
        let p2 = (self.p_k * self.p_k) as f64;
        let k2 = (self.k * self.k) as f64;
        (self.log_l_k + ln_gamma(0.5 * p2 + 1.0) - 0.5 * p2 * (PI * self.k as f64).ln()) / k2
    }
}

/// `log L_k = log D_p + k^2 log eps0 - log p! - k^2 log 2 + sum_{j=1}^p [...]` with `p = p_k`.
pub fn orbit_volume_lower_bound(plan: &QuantilePlan, a_eigenvalues: &[f64], eps0: f64) -> OrbitVolumeBound {
    let p = plan.p_k;
    let k2 = (plan.k * plan.k) as f64;
    let log_l_k =
        mehta_constant_log(p) + k2 * eps0.ln() - log_factorial(p) - k2 * 2f64.ln() + selberg_tail_log(p);
    let near = near_pair_count(eps0, a_eigenvalues);
    OrbitVolumeBound {
        k: plan.k,
        p_k: p,
        beta: plan.beta,
        log_l_k,
        eps0,
        near_pairs: near,
        near_pair_bound_holds: plan.near_pair_bound_holds(near),
        degenerate: plan.degenerate,
    }
}

/// `k^-2 sum_{j=1}^{p} [log G(j+2) + 2 log G(j+1) - log G(p+j+1)]`.
pub fn normalized_tail(p: usize, k: usize) -> f64 {
    selberg_tail_log(p) / (k * k) as f64
}

/// `-k^-2 sum_{j=1}^p log j! + (p^2 / 2k^2) log p`.
pub fn normalized_superfactorial_gap(p: usize, k: usize) -> f64 {
    let k2 = (k * k) as f64;
    let pf = p as f64;
    -log_superfactorial(p) / k2 + pf * pf / (2.0 * k2) * pf.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::log_ball_volume;
    use crate::spectral::build_quantile_plan;

    #[test]
    fn vandermonde_examples() {
        assert_eq!(vandermonde_sq_log(&[0.0, 1.0]), 0.0);
        assert!((vandermonde_sq_log(&[0.0, 1.0, 2.0]) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(vandermonde_sq_log(&[1.0, 1.0]), f64::NEG_INFINITY);
        assert_eq!(vandermonde_sq_log(&[0.0, -0.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn mehta_examples() {
        assert!(mehta_constant_log(1).abs() < 1e-15);
        assert!((mehta_constant_log(2) - (PI / 2.0).ln()).abs() < 1e-14);
        assert!((mehta_constant_log(3) - (PI.powi(3) / 12.0).ln()).abs() < 1e-13);
        assert!((weyl_volume_constant_log(2) - mehta_constant_log(2)).abs() < 1e-14);
    }

    #[test]
    fn selberg_examples() {
        assert!((selberg_box_log(1, 0.3) - 0.6f64.ln()).abs() < 1e-15);
        assert!((selberg_box_log(2, 1.0) - (8.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((selberg_box_log(2, 0.5) - ((8.0f64 / 3.0).ln() + 4.0 * 0.5f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn isodiametric_examples() {
        let d1 = 2f64.ln() - 0.5 * PI.ln() + ln_gamma(1.5);
        assert!((isodiametric_log_ratio(1) - d1).abs() < 1e-15);
        assert!((isodiametric_log_ratio(2) - (4.0 / PI).ln()).abs() < 1e-15);
        for d in [1usize, 5, 100, 1000] {
            let s = 0.7f64;
            let lhs = isodiametric_log_ratio(d) + log_ball_volume(d, s / 2.0);
            assert!((lhs - d as f64 * s.ln()).abs() <= 1e-10);
        }
        assert!(isodiametric_log_ratio(1_000_000).is_finite());
    }

    #[test]
    fn k_constant() {
        assert!((hausdorff_entropy_constant(1) - 0.5 * (2.0 / (PI * std::f64::consts::E)).ln()).abs() < 1e-15);
        assert!((hausdorff_entropy_constant(2) - (4.0 / (PI * std::f64::consts::E)).ln()).abs() < 1e-15);
        for n in 1..50 {
            let d = hausdorff_entropy_constant(2 * n) - 2.0 * hausdorff_entropy_constant(n);
            assert!((d - n as f64 * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_examples() {
        let u = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        assert!((log_energy(&u) + 1.5).abs() < 1e-14);
        assert!((chi_single(&u) - (-0.75 + 0.5 * (2.0 * PI).ln())).abs() < 1e-14);
        let a = SpectralMeasure::new((0.0, 1.0), vec![crate::spectral::Atom { location: 0.5, mass: 0.1 }], vec![(0.0, 0.0), (1.0, 0.9)])
            .unwrap();
        assert_eq!(chi_single(&a), f64::NEG_INFINITY);
        let c = 3.7;
        let scaled = u.affine_image(c, -1.0).unwrap();
        assert!((chi_single(&scaled) - chi_single(&u) - c.ln()).abs() < 1e-12);
    }

    #[test]
    fn orbit_bound_closing_chain() {
        let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let plan = build_quantile_plan(&mu, 30, 0.4).unwrap();
        let a: Vec<f64> = plan.kept_indices.iter().map(|&i| plan.lambdas[i]).collect();
        let b = orbit_volume_lower_bound(&plan, &a, plan.eps0);
        assert!(b.log_l_k.is_finite());
        assert!(b.near_pair_bound_holds);
        assert!(b.closing_chain_value() > plan.eps0.ln() - 17.0 * PI);
        assert!(b.log_bound(0.01) <= b.log_bound(0.02));
        let point = build_quantile_plan(&SpectralMeasure::atomic(&[(0.2, 1.0)]).unwrap(), 10, 0.3).unwrap();
        let pb = orbit_volume_lower_bound(&point, &[0.2; 10], point.eps0);
        assert!(pb.degenerate);
        assert_eq!(pb.p_k, 10);
    }

    #[test]
    fn tail_limits_on_grid() {
        let uniform = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let atoms = SpectralMeasure::atomic(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        for k in 8..=50 {
            let mut ps = vec![k];
            for mu in [&uniform, &atoms] {
                if let Ok(plan) = build_quantile_plan(mu, k, 0.45) {
                    ps.push(plan.p_k);
                }
            }
            for p in ps {
                assert!(normalized_tail(p, k) > -1.25, "tail at p={p} k={k}");
                assert!(normalized_superfactorial_gap(p, k) > 0.25, "gap at p={p} k={k}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn selberg_scaling_law(p in 1usize..40, eps in 1e-3f64..10.0) {
                let d = selberg_box_log(p, eps) - selberg_box_log(p, 1.0);
                prop_assert!((d - (p * p) as f64 * eps.ln()).abs() <= 1e-12 * (p * p) as f64 * eps.ln().abs().max(1.0));
            }

            #[test]
            fn orbit_bound_monotone(k in 10usize..60, e1 in 1e-4f64..0.05, f in 1.0f64..3.0) {
                let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
                let Ok(plan) = build_quantile_plan(&mu, k, 0.45) else { return Ok(()); };
                let a: Vec<f64> = plan.kept_indices.iter().map(|&i| plan.lambdas[i]).collect();
                let b = orbit_volume_lower_bound(&plan, &a, plan.eps0);
                prop_assert!(b.log_bound(e1) <= b.log_bound(e1 * f));
            }
        }
    }
}
