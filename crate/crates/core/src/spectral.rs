//! Spectral measures of a single selfadjoint, quantiles and the quantile plan.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;
const CDF_TOL: f64 = 1e-12;
const EPS0_BITS: u32 = 30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// A compactly supported probability law `mu = sigma + nu` on `[a, b]`:
/// finitely many atoms plus a diffuse part with piecewise-linear CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralMeasure {
    support: (f64, f64),
    atoms: Vec<Atom>,
    cdf: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct MeasureDoc {
    support: [f64; 2],
    atoms: Vec<[f64; 2]>,
    diffuse_cdf: Vec<[f64; 2]>,
}

impl Serialize for SpectralMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MeasureDoc {
            support: [self.support.0, self.support.1],
            atoms: self.atoms.iter().map(|a| [a.location, a.mass]).collect(),
            diffuse_cdf: self.cdf.iter().map(|&(x, f)| [x, f]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = MeasureDoc::deserialize(d)?;
        SpectralMeasure::new(
            (doc.support[0], doc.support[1]),
            doc.atoms.iter().map(|p| Atom { location: p[0], mass: p[1] }).collect(),
            doc.diffuse_cdf.iter().map(|p| (p[0], p[1])).collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

impl SpectralMeasure {
    /// Validates and normalizes: atoms are sorted by mass, ties by location.
    pub fn new(support: (f64, f64), mut atoms: Vec<Atom>, cdf: Vec<(f64, f64)>) -> Result<Self> {
        let (a, b) = support;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::InvalidMeasure(format!("bad support [{a}, {b}]")));
        }
        for at in &atoms {
            if !(at.location >= a && at.location <= b) {
                return Err(Error::InvalidMeasure(format!("atom at {} outside support", at.location)));
            }
            if !(at.mass > 0.0 && at.mass <= 1.0) {
                return Err(Error::InvalidMeasure(format!("atom mass {} not in (0,1]", at.mass)));
            }
        }
        atoms.sort_by(|x, y| y.mass.total_cmp(&x.mass).then(x.location.total_cmp(&y.location)));
        let mut locs: Vec<f64> = atoms.iter().map(|x| x.location).collect();
        locs.sort_by(|x, y| x.total_cmp(y));
        if locs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidMeasure("atom locations must be distinct".into()));
        }
        let mut c = 0.0;
        if !cdf.is_empty() {
            if cdf.len() < 2 {
                return Err(Error::InvalidMeasure("diffuse CDF needs at least two breakpoints".into()));
            }
            if cdf[0] != (a, 0.0) {
                return Err(Error::InvalidMeasure("diffuse CDF must start at (a, 0)".into()));
            }
            if cdf[cdf.len() - 1].0 != b {
                return Err(Error::InvalidMeasure("diffuse CDF must end at b".into()));
            }
            for w in cdf.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::InvalidMeasure("CDF breakpoints must increase strictly".into()));
                }
                if !(w[1].1 >= w[0].1) || !w[1].1.is_finite() {
                    return Err(Error::InvalidMeasure("CDF must be non-decreasing".into()));
                }
            }
            c = cdf[cdf.len() - 1].1;
        }
        let total: f64 = atoms.iter().map(|x| x.mass).sum::<f64>() + c;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!("total mass {total} != 1")));
        }
        Ok(SpectralMeasure { support, atoms, cdf })
    }

    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        Self::new((a, b), vec![], vec![(a, 0.0), (b, 1.0)])
    }

    pub fn atomic(points: &[(f64, f64)]) -> Result<Self> {
        let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        Self::new((lo, hi), points.iter().map(|&(r, c)| Atom { location: r, mass: c }).collect(), vec![])
    }

    /// Diffuse law with density proportional to a positive function, discretized to `n` linear pieces.
    pub fn from_density(a: f64, b: f64, n: usize, density: impl Fn(f64) -> f64) -> Result<Self> {
        let h = (b - a) / n as f64;
        let mut cum = vec![0.0];
        for i in 0..n {
            let x0 = a + i as f64 * h;
            // Simpson on each piece.
            let m = h / 6.0 * (density(x0) + 4.0 * density(x0 + 0.5 * h) + density(x0 + h));
            cum.push(cum[i] + m.max(0.0));
        }
        let total = cum[n];
        let cdf = (0..=n)
            .map(|i| (if i == n { b } else { a + i as f64 * h }, if i == n { 1.0 } else { cum[i] / total }))
            .collect();
        Self::new((a, b), vec![], cdf)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn diffuse_cdf(&self) -> &[(f64, f64)] {
        &self.cdf
    }

    /// `c = nu([a, b])`.
    pub fn diffuse_mass(&self) -> f64 {
        self.cdf.last().map(|p| p.1).unwrap_or(0.0)
    }

    /// Diffuse pieces as `(x0, x1, mass)`, skipping massless ones.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.cdf.windows(2).filter(|w| w[1].1 > w[0].1).map(|w| (w[0].0, w[1].0, w[1].1 - w[0].1))
    }

    /// `nu([a, x])`.
    pub fn diffuse_cdf_at(&self, x: f64) -> f64 {
        let Some(&(x_first, _)) = self.cdf.first() else { return 0.0 };
        if x <= x_first {
            return 0.0;
        }
        for w in self.cdf.windows(2) {
            let ((x0, f0), (x1, f1)) = (w[0], w[1]);
            if x <= x1 {
                return f0 + (f1 - f0) * (x - x0) / (x1 - x0);
            }
        }
        self.diffuse_mass()
    }

    /// `nu([lo, hi])`.
    pub fn diffuse_interval_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.diffuse_cdf_at(hi) - self.diffuse_cdf_at(lo)
    }

    /// `int t^j dmu`, exact over atoms and linear pieces.
    pub fn moment(&self, j: u32) -> f64 {
        let mut s: f64 = self.atoms.iter().map(|a| a.mass * a.location.powi(j as i32)).sum();
        for (x0, x1, m) in self.segments() {
            let d = m / (x1 - x0);
            s += d * (x1.powi(j as i32 + 1) - x0.powi(j as i32 + 1)) / (j as f64 + 1.0);
        }
        s
    }

    /// Full CDF of `mu` at `x` (right-continuous).
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.diffuse_cdf_at(x) + self.atoms.iter().filter(|a| a.location <= x).map(|a| a.mass).sum::<f64>()
    }

    /// Push-forward under an affine map `t -> s t + shift` with `s > 0`.
    pub fn affine_image(&self, s: f64, shift: f64) -> Result<Self> {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument("affine scale must be positive".into()));
        }
        let f = |t: f64| s * t + shift;
        Self::new(
            (f(self.support.0), f(self.support.1)),
            self.atoms.iter().map(|a| Atom { location: f(a.location), mass: a.mass }).collect(),
            self.cdf.iter().map(|&(x, c)| (f(x), c)).collect(),
        )
    }

    /// `(nu x nu)({(s,t) : |s - t| < delta})`, exact for piecewise-uniform densities.
    pub fn diffuse_near_diagonal_mass(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let segs: Vec<_> = self.segments().collect();
        let mut total = 0.0;
        for &(x0, x1, mx) in &segs {
            let dx = mx / (x1 - x0);
            for &(y0, y1, my) in &segs {
                if x0 - y1 >= delta || y0 - x1 >= delta {
                    continue;
                }
                let dy = my / (y1 - y0);
                let below = |u: f64| rect_combination(x0, x1, y0, y1, |v| ramp_antiderivative(v, u));
                total += dx * dy * (below(delta) - below(-delta));
            }
        }
        total
    }
}

/// `G(x1-y0) - G(x0-y0) - G(x1-y1) + G(x0-y1)` equals `int int G''(s - t)` over the rectangle.
pub(crate) fn rect_combination(x0: f64, x1: f64, y0: f64, y1: f64, g: impl Fn(f64) -> f64) -> f64 {
    g(x1 - y0) - g(x0 - y0) - g(x1 - y1) + g(x0 - y1)
}

fn ramp_antiderivative(v: f64, u: f64) -> f64 {
    if v < u {
        0.5 * v * v
    } else {
        0.5 * u * u + u * (v - u)
    }
}

/// `1 - sum c_i^2`.
pub fn delta0_single(mu: &SpectralMeasure) -> f64 {
    1.0 - mu.atoms.iter().map(|a| a.mass * a.mass).sum::<f64>()
}

/// `floor(x k)` robust to rounding just below an integer.
pub(crate) fn floor_count(x: f64, k: usize) -> usize {
    (x * k as f64 + 1e-9).floor().max(0.0) as usize
}

/// `lambda_j` = the largest `x` with `nu([a, x]) = j/k`, for `j = 1..floor(ck)`.
pub fn quantiles(mu: &SpectralMeasure, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let c = mu.diffuse_mass();
    if c <= 0.0 {
        return Err(Error::EmptyDiffusePart);
    }
    let n = floor_count(c, k);
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        let t = j as f64 / k as f64;
        out.push(largest_at_level(&mu.cdf, t));
    }
    Ok(out)
}

fn largest_at_level(cdf: &[(f64, f64)], t: f64) -> f64 {
    for w in cdf.windows(2).rev() {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        if f0 <= t + CDF_TOL {
            if f1 <= t + CDF_TOL {
                return x1;
            }
            let x = x0 + (t - f0) / (f1 - f0) * (x1 - x0);
            return x.clamp(x0, x1);
        }
    }
    cdf[0].0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePlan {
    pub k: usize,
    pub tau: f64,
    pub eps0: f64,
    /// Number of retained atoms.
    pub l: usize,
    pub lambdas: Vec<f64>,
    /// `G_k`, 0-based indices into `lambdas`, ascending.
    pub kept_indices: Vec<usize>,
    /// `E_k`, indices whose successor gap is at least `eps0`.
    pub discarded_gap_indices: Vec<usize>,
    /// `floor(c_i k)` for every atom, in atom order.
    pub atom_multiplicities: Vec<usize>,
    pub atom_locations: Vec<f64>,
    pub p_k: usize,
    pub beta: f64,
    pub degenerate: bool,
}

impl QuantilePlan {
    pub fn diffuse_count(&self) -> usize {
        self.lambdas.len()
    }

    /// Successor of `lambda_i`, using `b` past the last quantile.
    pub fn successor(&self, i: usize, b: f64) -> f64 {
        self.lambdas.get(i + 1).copied().unwrap_or(b)
    }

    pub fn retained_atoms(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.atom_locations.iter().copied().zip(self.atom_multiplicities.iter().copied()).take(self.l)
    }

    pub fn tail_atoms(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.atom_locations.iter().copied().zip(self.atom_multiplicities.iter().copied()).skip(self.l)
    }

    /// `#W_k < beta k^2`.
    pub fn near_pair_bound_holds(&self, count: usize) -> bool {
        (count as f64) < self.beta * (self.k * self.k) as f64
    }
}

fn eps0_admissible(mu: &SpectralMeasure, l: usize, tau: f64, e: f64) -> bool {
    if mu.diffuse_mass() > 0.0 && mu.diffuse_near_diagonal_mass(3.0 * e) >= tau {
        return false;
    }
    let retained = &mu.atoms[..l];
    for a in retained {
        if mu.diffuse_interval_mass(a.location - 3.0 * e, a.location + 3.0 * e) >= tau / (3.0 * l as f64) {
            return false;
        }
    }
    for (i, x) in retained.iter().enumerate() {
        for y in &retained[i + 1..] {
            if (x.location - y.location).abs() <= 3.0 * e {
                return false;
            }
        }
    }
    true
}

/// Largest dyadic `m / 2^30` in `(0, 1)` passing the three scale constraints.
fn select_eps0(mu: &SpectralMeasure, l: usize, tau: f64) -> Option<f64> {
    let scale = (1u64 << EPS0_BITS) as f64;
    let ok = |m: u64| eps0_admissible(mu, l, tau, m as f64 / scale);
    let (mut lo, mut hi) = (0u64, 1u64 << EPS0_BITS);
    if !ok(1) {
        return None;
    }
    lo = lo.max(1);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo as f64 / scale)
}

pub fn build_quantile_plan(mu: &SpectralMeasure, k: usize, tau: f64) -> Result<QuantilePlan> {
    if !(tau > 0.0 && tau < 0.5) {
        return Err(Error::InvalidArgument(format!("tau={tau} not in (0, 1/2)")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let (a, b) = mu.support;
    let c = mu.diffuse_mass();
    let masses: Vec<f64> = mu.atoms.iter().map(|x| x.mass).collect();
    let mut l = 0;
    while masses[l..].iter().sum::<f64>() >= tau / 3.0 {
        l += 1;
    }
    let degenerate = c <= 0.0 && mu.atoms.len() <= 1;
    let eps0 = select_eps0(mu, l, tau)
        .ok_or_else(|| Error::Infeasible { k, reason: "no admissible eps0".into() })?;
    let lambdas = if c > 0.0 { quantiles(mu, k)? } else { Vec::new() };
    let n = lambdas.len();
    let retained: Vec<f64> = mu.atoms[..l].iter().map(|x| x.location).collect();
    let mut kept = Vec::new();
    let mut discarded_gap = Vec::new();
    for i in 0..n {
        let next = lambdas.get(i + 1).copied().unwrap_or(b);
        if next - lambdas[i] < eps0 {
            if retained.iter().all(|r| (lambdas[i] - r).abs() >= 3.0 * eps0) {
                kept.push(i);
            }
        } else {
            discarded_gap.push(i);
        }
    }
    if b > a && discarded_gap.len() as f64 >= (b - a) / eps0 {
        return Err(Error::Infeasible { k, reason: "too many large quantile gaps".into() });
    }
    let atom_multiplicities: Vec<usize> = masses.iter().map(|&m| floor_count(m, k)).collect();
    let p_k = kept.len() + atom_multiplicities[..l].iter().sum::<usize>();
    let kf = k as f64;
    if n > 0 && (kept.len() as f64) <= n as f64 - tau * n as f64 / 3.0 - tau * kf / 3.0 {
        return Err(Error::Infeasible { k, reason: format!("#G_k = {} below the required bound", kept.len()) });
    }
    if (p_k as f64) <= kf - tau * kf {
        return Err(Error::Infeasible { k, reason: format!("p_k = {p_k} not above (1 - tau) k") });
    }
    let beta = tau + masses[..l].iter().map(|m| m * m).sum::<f64>();
    Ok(QuantilePlan {
        k,
        tau,
        eps0,
        l,
        lambdas,
        kept_indices: kept,
        discarded_gap_indices: discarded_gap,
        atom_multiplicities,
        atom_locations: mu.atoms.iter().map(|x| x.location).collect(),
        p_k,
        beta,
        degenerate,
    })
}

/// `#{(i, j) : i < j, |a_i - a_j| < eps0}` for ascending `eigenvalues`.
pub fn near_pair_count(eps0: f64, eigenvalues: &[f64]) -> usize {
    let mut count = 0;
    let mut lo = 0;
    for j in 0..eigenvalues.len() {
        while eigenvalues[j] - eigenvalues[lo] >= eps0 {
            lo += 1;
        }
        count += j - lo;
    }
    count
}
