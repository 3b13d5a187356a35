//! Independent numerical oracles: adaptive Gauss-Kronrod quadrature and Monte Carlo
//! hit-testing. They share no code path with the closed forms they check.

use rand::Rng as _;

use crate::rng;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, g * h)
}

fn adapt(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, g) = gk15(f, a, b);
    // Below a few ulps of the estimate the Gauss-Kronrod difference is rounding noise.
    if (k - g).abs() <= tol.max(64.0 * f64::EPSILON * k.abs()) || depth == 0 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive 7/15-point Gauss-Kronrod with absolute tolerance `tol`. Endpoints are never evaluated.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adapt(&mut f, a, b, tol, 40)
}

/// `int_{[-eps, eps]^p} prod_{i<j} (t_i - t_j)^2` by nested quadrature.
pub fn vandermonde_box_quadrature(p: usize, eps: f64) -> f64 {
    fn rec(prefix: &mut Vec<f64>, p: usize, eps: f64) -> f64 {
        if prefix.len() == p {
            let mut v = 1.0;
            for i in 0..p {
                for j in (i + 1)..p {
                    let d = prefix[i] - prefix[j];
                    v *= d * d;
                }
            }
            return v;
        }
        integrate(
            |t| {
                prefix.push(t);
                let r = rec(prefix, p, eps);
                prefix.pop();
                r
            },
            -eps,
            eps,
            1e-13,
        )
    }
    rec(&mut Vec::with_capacity(p), p, eps)
}

/// `int int log|s - t| rho(s) rho(t) ds dt` on `[a, b]`, splitting the inner integral at `s`.
pub fn log_energy_quadrature(rho: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate(
        |s| {
            // t = s -+ w^2 turns the log singularity into the bounded 4 w ln w.
            let left = integrate(|w| 4.0 * w * w.ln() * rho(s - w * w), 0.0, (s - a).sqrt(), 1e-13);
            let right = integrate(|w| 4.0 * w * w.ln() * rho(s + w * w), 0.0, (b - s).sqrt(), 1e-13);
            rho(s) * (left + right)
        },
        a,
        b,
        1e-11,
    )
}

#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub hits: usize,
    pub trials: usize,
}

/// Volume of `{X in M_2^sa : both eigenvalues in [0,1]}` in `|.|_2`-orthonormal coordinates
/// `(a/sqrt2, d/sqrt2, Re b, Im b)`, by hit-testing in the box `a, d in [0,1]`, `|Re b|, |Im b| <= 1/2`.
pub fn mehta_k2_volume_mc(trials: usize, seed: u64) -> McEstimate {
    let mut r = rng::stream(seed, 0x6d65_6874);
    let mut hits = 0usize;
    for _ in 0..trials {
        let a: f64 = r.random();
        let d: f64 = r.random();
        let br: f64 = r.random::<f64>() - 0.5;
        let bi: f64 = r.random::<f64>() - 0.5;
        let half_tr = 0.5 * (a + d);
        let disc = (0.25 * (a - d) * (a - d) + br * br + bi * bi).sqrt();
        if half_tr - disc >= 0.0 && half_tr + disc <= 1.0 {
            hits += 1;
        }
    }
    let box_volume = 0.5;
    let p = hits as f64 / trials as f64;
    McEstimate {
        value: box_volume * p,
        stderr: box_volume * (p * (1.0 - p) / trials as f64).sqrt(),
        hits,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_basics() {
        assert!((integrate(|x| x * x, 0.0, 1.0, 1e-14) - 1.0 / 3.0).abs() < 1e-15);
        assert!((integrate(|x| x.ln(), 0.0, 1.0, 1e-12) + 1.0).abs() < 1e-10);
        assert!((vandermonde_box_quadrature(2, 1.0) - 8.0 / 3.0).abs() < 1e-12);
    }
}
