//! Microstate membership, quantile microstates, unitary orbits and freeness defects.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::FiniteDimAlgebra;
use crate::error::{Error, Result};
use crate::matrixcore::{
    conjugate_tuple, eigenvalues, hs_distance, sample_gue, sample_haar_unitary, CMatrix, MatrixTuple,
    SelfAdjointMatrix, UnitaryMatrix,
};
use crate::rng;
use crate::spectral::{build_quantile_plan, QuantilePlan, SpectralMeasure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordTarget {
    pub word: Vec<usize>,
    pub re: f64,
    pub im: f64,
}

/// Parameters `(R, m, gamma, k)` and the word-moment targets of `Gamma_R(z; m, k, gamma)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicrostateSpec {
    pub r: f64,
    pub m: usize,
    pub gamma: f64,
    pub k: usize,
    pub arity: usize,
    pub targets: Vec<WordTarget>,
}

/// All words of length `1..=m` over `arity` letters, shortest first.
pub fn all_words(arity: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..m {
        let mut next = Vec::new();
        for w in &layer {
            for i in 0..arity {
                let mut v = w.clone();
                v.push(i);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

impl MicrostateSpec {
    pub fn new(r: f64, m: usize, gamma: f64, k: usize, arity: usize, targets: Vec<WordTarget>) -> Result<Self> {
        if !(r > 0.0) || !(gamma > 0.0) || m == 0 || k == 0 || arity == 0 {
            return Err(Error::InvalidArgument("need R > 0, gamma > 0, m >= 1, k >= 1, arity >= 1".into()));
        }
        for w in all_words(arity, m) {
            if !targets.iter().any(|t| t.word == w) {
                return Err(Error::InvalidArgument(format!("missing target for word {w:?}")));
            }
        }
        Ok(MicrostateSpec { r, m, gamma, k, arity, targets })
    }

    /// Targets from a moment functional on words.
    pub fn from_state(
        r: f64,
        m: usize,
        gamma: f64,
        k: usize,
        arity: usize,
        state: impl Fn(&[usize]) -> Complex64,
    ) -> Result<Self> {
        let targets = all_words(arity, m)
            .into_iter()
            .map(|w| {
                let z = state(&w);
                WordTarget { word: w, re: z.re, im: z.im }
            })
            .collect();
        Self::new(r, m, gamma, k, arity, targets)
    }

    /// Single variable with law `mu`: targets `int t^q dmu`.
    pub fn for_measure(mu: &SpectralMeasure, r: f64, m: usize, gamma: f64, k: usize) -> Result<Self> {
        Self::from_state(r, m, gamma, k, 1, |w| Complex64::new(mu.moment(w.len() as u32), 0.0))
    }

    /// Generators of a finite-dimensional algebra under `phi`.
    pub fn for_algebra(a: &FiniteDimAlgebra, r: f64, m: usize, gamma: f64, k: usize) -> Result<Self> {
        let [z1, z2] = a.generators();
        let gens: Vec<Vec<CMatrix>> = if a.blocks().iter().any(|b| b.n > 1) {
            vec![z1.into_iter().map(|x| x.into_matrix()).collect(), z2.into_iter().map(|x| x.into_matrix()).collect()]
        } else {
            vec![z1.into_iter().map(|x| x.into_matrix()).collect()]
        };
        Self::from_state(r, m, gamma, k, gens.len(), |w| {
            let prod: Vec<CMatrix> = (0..a.p())
                .map(|b| {
                    let n = a.blocks()[b].n;
                    w.iter().fold(CMatrix::identity(n, n), |acc, &i| acc * &gens[i][b])
                })
                .collect();
            a.state(&prod).expect("generator blocks match the algebra")
        })
    }

    pub fn target(&self, word: &[usize]) -> Option<Complex64> {
        self.targets.iter().find(|t| t.word == word).map(|t| Complex64::new(t.re, t.im))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipReport {
    pub member: bool,
    pub max_operator_norm: f64,
    pub norm_ok: bool,
    pub worst_word: Option<Vec<usize>>,
    pub worst_deviation: f64,
}

/// `tr_k` of every word of length `1..=m`, reusing prefix products.
pub fn all_word_moments(x: &MatrixTuple, m: usize) -> Vec<(Vec<usize>, Complex64)> {
    fn rec(x: &MatrixTuple, m: usize, word: &mut Vec<usize>, prefix: &CMatrix, out: &mut Vec<(Vec<usize>, Complex64)>) {
        if word.len() == m {
            return;
        }
        for (i, c) in x.components().iter().enumerate() {
            let p = if word.is_empty() { c.matrix().clone() } else { prefix * c.matrix() };
            word.push(i);
            out.push((word.clone(), p.trace() / x.k() as f64));
            rec(x, m, word, &p, out);
            word.pop();
        }
    }
    let mut out = Vec::new();
    let k = x.k();
    rec(x, m, &mut Vec::new(), &CMatrix::identity(k, k), &mut out);
    out
}

pub fn is_microstate(x: &MatrixTuple, spec: &MicrostateSpec) -> Result<MembershipReport> {
    if x.k() != spec.k {
        return Err(Error::ShapeMismatch(format!("tuple size {} vs spec k {}", x.k(), spec.k)));
    }
    if x.arity() != spec.arity {
        return Err(Error::ShapeMismatch(format!("tuple arity {} vs spec arity {}", x.arity(), spec.arity)));
    }
    let max_norm = x.components().iter().map(|c| c.operator_norm()).fold(0.0, f64::max);
    let norm_ok = max_norm <= spec.r;
    let mut worst: Option<(Vec<usize>, f64)> = None;
    for (w, v) in all_word_moments(x, spec.m) {
        let t = spec.target(&w).expect("spec has every word");
        let dev = (v - t).norm();
        if worst.as_ref().map(|(_, d)| dev > *d).unwrap_or(true) {
            worst = Some((w, dev));
        }
    }
    let (worst_word, worst_deviation) = worst.map(|(w, d)| (Some(w), d)).unwrap_or((None, 0.0));
    Ok(MembershipReport {
        member: norm_ok && worst_deviation < spec.gamma,
        max_operator_norm: max_norm,
        norm_ok,
        worst_word,
        worst_deviation,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileMicrostate {
    pub plan: QuantilePlan,
    pub a_diag: Vec<f64>,
    pub b_diag: Vec<f64>,
    pub beta: f64,
}

impl QuantileMicrostate {
    pub fn y_diag(&self) -> Vec<f64> {
        self.a_diag.iter().chain(&self.b_diag).copied().collect()
    }

    pub fn y(&self) -> SelfAdjointMatrix {
        SelfAdjointMatrix::from_real_diagonal(&self.y_diag())
    }

    pub fn tuple(&self) -> MatrixTuple {
        MatrixTuple::single(self.y())
    }

    /// Eigenvalues of `A_k`, ascending.
    pub fn a_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.a_diag.clone();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn y_eigenvalues(&self) -> Vec<f64> {
        let mut v = self.y_diag();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }
}

pub fn build_quantile_microstate(mu: &SpectralMeasure, k: usize, tau: f64) -> Result<QuantileMicrostate> {
    let plan = build_quantile_plan(mu, k, tau)?;
    let mut a_diag: Vec<f64> = plan.kept_indices.iter().map(|&i| plan.lambdas[i]).collect();
    for (r, mult) in plan.retained_atoms() {
        a_diag.extend(std::iter::repeat_n(r, mult));
    }
    let mut b_diag: Vec<f64> = Vec::new();
    let mut kept = plan.kept_indices.iter().peekable();
    for (i, &lam) in plan.lambdas.iter().enumerate() {
        if kept.peek() == Some(&&i) {
            kept.next();
        } else {
            b_diag.push(lam);
        }
    }
    for (r, mult) in plan.tail_atoms() {
        b_diag.extend(std::iter::repeat_n(r, mult));
    }
    let pad = k - a_diag.len() - b_diag.len();
    b_diag.extend(std::iter::repeat_n(0.0, pad));
    let beta = plan.beta;
    Ok(QuantileMicrostate { plan, a_diag, b_diag, beta })
}

#[derive(Clone, Debug)]
pub struct OrbitSample {
    pub base: MatrixTuple,
    pub points: Vec<MatrixTuple>,
    pub seeds: Vec<u64>,
}

impl OrbitSample {
    /// Conjugations by explicitly given unitaries.
    pub fn from_unitaries(base: &MatrixTuple, unitaries: &[UnitaryMatrix]) -> Result<Self> {
        let points = unitaries.iter().map(|u| conjugate_tuple(base, u)).collect::<Result<Vec<_>>>()?;
        Ok(OrbitSample { base: base.clone(), points, seeds: vec![] })
    }
}

/// `count` independent Haar conjugations; point `i` uses seed `stream_id([seed, i])`.
pub fn orbit_sample(x: &MatrixTuple, count: usize, seed: u64) -> Result<OrbitSample> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..count as u64).map(|i| rng::stream_id(&[seed, i])).collect();
    let points = seeds
        .par_iter()
        .map(|&s| conjugate_tuple(x, &sample_haar_unitary(x.k(), s)))
        .collect::<Result<Vec<_>>>()?;
    Ok(OrbitSample { base: x.clone(), points, seeds })
}

#[derive(Clone, Debug)]
pub struct OrbitPoint {
    pub point: MatrixTuple,
    pub t: f64,
    pub distance: f64,
    pub attempts: usize,
}

const PATH_SCAN: usize = 512;
const PATH_RETRIES: u64 = 8;

/// A point `Y = u x u*` with `|Y - x|_2 = eps`, found by bisection along `t -> exp(itH)`.
pub fn orbit_point_at_distance(x: &MatrixTuple, eps: f64, seed: u64) -> Result<MatrixTuple> {
    orbit_point_at_distance_detailed(x, eps, seed).map(|p| p.point)
}

pub fn orbit_point_at_distance_detailed(x: &MatrixTuple, eps: f64, seed: u64) -> Result<OrbitPoint> {
    if x.is_scalar() {
        return Err(Error::SingletonOrbit);
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("eps must be nonnegative".into()));
    }
    if eps == 0.0 {
        return Ok(OrbitPoint { point: x.clone(), t: 0.0, distance: 0.0, attempts: 0 });
    }
    let k = x.k();
    for attempt in 0..PATH_RETRIES {
        let h = sample_gue(k, rng::stream_id(&[seed, attempt, 0x7061_7468]));
        let eig = h.matrix().clone().symmetric_eigen();
        let vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let vecs = eig.eigenvectors;
        // In the eigenbasis of H the distance is a weighted sum over entries.
        let weights: Vec<(f64, f64)> = {
            let mut w = Vec::new();
            for c in x.components() {
                let xp = vecs.adjoint() * c.matrix() * &vecs;
                for a in 0..k {
                    for b in 0..k {
                        let m = xp[(a, b)].norm_sqr();
                        if m > 0.0 && a != b {
                            w.push((vals[a] - vals[b], m));
                        }
                    }
                }
            }
            w
        };
        let dist = |t: f64| -> f64 {
            let s: f64 = weights.iter().map(|&(dl, m)| 2.0 * m * (1.0 - (t * dl).cos())).sum();
            (s / k as f64).sqrt()
        };
        let mut prev = 0.0;
        let mut bracket = None;
        for j in 1..=PATH_SCAN {
            let t = std::f64::consts::PI * j as f64 / PATH_SCAN as f64;
            if dist(t) >= eps {
                bracket = Some((prev, t));
                break;
            }
            prev = t;
        }
        let Some((mut lo, mut hi)) = bracket else { continue };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dist(mid) >= eps {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        let t = if (dist(lo) - eps).abs() < (dist(hi) - eps).abs() { lo } else { hi };
        let u = UnitaryMatrix::exp_i_from_eigen(&vecs, &vals, t);
        let y = conjugate_tuple(x, &u)?;
        let d = hs_distance(&y, x)?;
        if (d - eps).abs() <= 1e-9 {
            return Ok(OrbitPoint { point: y, t, distance: d, attempts: attempt as usize + 1 });
        }
    }
    Err(Error::EpsTooLarge { eps })
}

/// Centered powers `x^d - tr_k(x^d)` for `d = 1..=m`.
fn centered_powers(x: &SelfAdjointMatrix, m: usize) -> Vec<CMatrix> {
    let k = x.k();
    let mut out = Vec::with_capacity(m);
    let mut p = CMatrix::identity(k, k);
    for _ in 0..m {
        p = &p * x.matrix();
        let tr = p.trace() / k as f64;
        let mut c = p.clone();
        for i in 0..k {
            c[(i, i)] -= tr;
        }
        out.push(c);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreenessDefect {
    pub defect: f64,
    /// Letters `(group, generator, degree)` of the worst word.
    pub worst_word: Vec<(usize, usize, usize)>,
}

/// Max of `|tr_k(a_1 ... a_q)|` over alternating words of centered single-generator powers,
/// total degree at most `m`.
pub fn freeness_defect(groups: &[MatrixTuple], m: usize) -> Result<f64> {
    freeness_defect_detailed(groups, m).map(|d| d.defect)
}

pub fn freeness_defect_detailed(groups: &[MatrixTuple], m: usize) -> Result<FreenessDefect> {
    let Some(first) = groups.first() else {
        return Err(Error::InvalidArgument("no groups".into()));
    };
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let k = first.k();
    if groups.iter().any(|g| g.k() != k) {
        return Err(Error::ShapeMismatch("groups differ in matrix size".into()));
    }
    let letters: Vec<Vec<Vec<CMatrix>>> =
        groups.iter().map(|g| g.components().iter().map(|c| centered_powers(c, m)).collect()).collect();
    let mut best = FreenessDefect { defect: 0.0, worst_word: vec![] };
    let mut word = Vec::new();
    fn rec(
        letters: &[Vec<Vec<CMatrix>>],
        k: usize,
        budget: usize,
        prev: Option<usize>,
        prefix: Option<&CMatrix>,
        word: &mut Vec<(usize, usize, usize)>,
        best: &mut FreenessDefect,
    ) {
        for (g, gens) in letters.iter().enumerate() {
            if Some(g) == prev {
                continue;
            }
            for (i, powers) in gens.iter().enumerate() {
                for d in 1..=budget {
                    let l = &powers[d - 1];
                    let p = match prefix {
                        Some(q) => q * l,
                        None => l.clone(),
                    };
                    word.push((g, i, d));
                    let v = (p.trace() / k as f64).norm();
                    if v > best.defect {
                        best.defect = v;
                        best.worst_word = word.clone();
                    }
                    if budget > d {
                        rec(letters, k, budget - d, Some(g), Some(&p), word, best);
                    }
                    word.pop();
                }
            }
        }
    }
    rec(&letters, k, m, None, None, &mut word, &mut best);
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct ProductOrbitSample {
    /// `factors[s][i]` is the `i`-th base conjugated for sample `s`.
    pub factors: Vec<Vec<MatrixTuple>>,
}

impl ProductOrbitSample {
    pub fn joined(&self) -> Result<Vec<MatrixTuple>> {
        self.factors.iter().map(|f| MatrixTuple::concat(f)).collect()
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }
}

/// Each sample conjugates base `i` by its own Haar unitary; seeds `stream_id([seed, s, i])`.
pub fn product_orbit_sample(bases: &[MatrixTuple], count: usize, seed: u64) -> Result<ProductOrbitSample> {
    let Some(first) = bases.first() else {
        return Err(Error::InvalidArgument("no bases".into()));
    };
    let k = first.k();
    if bases.iter().any(|b| b.k() != k) {
        return Err(Error::ShapeMismatch("bases differ in matrix size".into()));
    }
    let factors = (0..count as u64)
        .into_par_iter()
        .map(|s| {
            bases
                .iter()
                .enumerate()
                .map(|(i, b)| conjugate_tuple(b, &sample_haar_unitary(k, rng::stream_id(&[seed, s, i as u64]))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProductOrbitSample { factors })
}

/// `(sum_i (lambda_i(x) - lambda_i(y))^2 / k)^(1/2)` over sorted spectra.
pub fn sorted_eigenvalue_distance(x: &SelfAdjointMatrix, y: &SelfAdjointMatrix) -> Result<f64> {
    if x.k() != y.k() {
        return Err(Error::ShapeMismatch(format!("sizes {} and {}", x.k(), y.k())));
    }
    let (a, b) = (eigenvalues(x), eigenvalues(y));
    Ok((a.iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.k() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixcore::hs_norm;

    fn diag(d: &[f64]) -> SelfAdjointMatrix {
        SelfAdjointMatrix::from_real_diagonal(d)
    }

    #[test]
    fn scalar_is_microstate() {
        let mu = SpectralMeasure::atomic(&[(0.7, 1.0)]).unwrap();
        let x = MatrixTuple::single(SelfAdjointMatrix::scalar(9, 0.7));
        for (r, m, g) in [(0.7, 1, 1e-9), (2.0, 4, 0.01)] {
            let spec = MicrostateSpec::for_measure(&mu, r, m, g, 9).unwrap();
            assert!(is_microstate(&x, &spec).unwrap().member);
        }
    }

    #[test]
    fn norm_violation_is_reported() {
        let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let spec = MicrostateSpec::for_measure(&mu, 2.0, 2, 0.5, 3).unwrap();
        let rep = is_microstate(&MatrixTuple::single(diag(&[0.0, 0.5, 3.0])), &spec).unwrap();
        assert!(!rep.member && !rep.norm_ok);
        assert!((rep.max_operator_norm - 3.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_quantile_microstate_is_member() {
        let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let q = build_quantile_microstate(&mu, 200, 0.4).unwrap();
        let spec = MicrostateSpec::for_measure(&mu, 2.0, 3, 0.05, 200).unwrap();
        assert!(is_microstate(&q.tuple(), &spec).unwrap().member);
    }

    #[test]
    fn quantile_microstate_layouts() {
        let q = build_quantile_microstate(&SpectralMeasure::atomic(&[(0.3, 1.0)]).unwrap(), 6, 0.2).unwrap();
        assert_eq!(q.a_diag, vec![0.3; 6]);
        assert!(q.b_diag.is_empty());
        let two = SpectralMeasure::atomic(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let q = build_quantile_microstate(&two, 11, 0.3).unwrap();
        let mut expect = vec![0.0; 5];
        expect.extend(vec![1.0; 5]);
        assert_eq!(q.a_diag, expect);
        assert_eq!(q.b_diag, vec![0.0]);
        assert!((q.beta - 0.8).abs() < 1e-15);
    }

    #[test]
    fn quantile_microstate_cdf_is_close() {
        let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let q = build_quantile_microstate(&mu, 100, 0.4).unwrap();
        let ev = q.y_eigenvalues();
        let mut ks: f64 = 0.0;
        for (i, &x) in ev.iter().enumerate() {
            let f = mu.cdf_at(x);
            ks = ks.max((f - (i + 1) as f64 / 100.0).abs()).max((f - i as f64 / 100.0).abs());
        }
        assert!(ks <= 0.05, "{ks}");
    }

    #[test]
    fn orbit_sample_examples() {
        let x = MatrixTuple::single(diag(&[1.0, -1.0]));
        let s = OrbitSample::from_unitaries(&x, &[UnitaryMatrix::identity(2)]).unwrap();
        assert_eq!(s.points[0], x);
        let s = orbit_sample(&x, 30, 5).unwrap();
        for p in &s.points {
            for q in &s.points {
                assert!(hs_distance(p, q).unwrap() <= 2.0 + 1e-12);
            }
            let ev = eigenvalues(&p.components()[0]);
            assert!((ev[0] + 1.0).abs() < 1e-8 && (ev[1] - 1.0).abs() < 1e-8);
        }
        let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
        let q = build_quantile_microstate(&mu, 40, 0.4).unwrap();
        let spec = MicrostateSpec::for_measure(&mu, 2.0, 3, 0.1, 40).unwrap();
        assert!(is_microstate(&q.tuple(), &spec).unwrap().member);
        for p in orbit_sample(&q.tuple(), 5, 1).unwrap().points {
            assert!(is_microstate(&p, &spec).unwrap().member);
        }
    }

    #[test]
    fn orbit_point_examples() {
        let x = MatrixTuple::single(diag(&[1.0, -1.0]));
        assert_eq!(orbit_point_at_distance(&x, 0.0, 1).unwrap(), x);
        let y = orbit_point_at_distance(&x, 0.1, 1).unwrap();
        assert!((hs_distance(&x, &y).unwrap() - 0.1).abs() <= 1e-9);
        let id = MatrixTuple::single(SelfAdjointMatrix::scalar(4, 1.0));
        assert!(matches!(orbit_point_at_distance(&id, 0.1, 1), Err(Error::SingletonOrbit)));
        assert!(matches!(orbit_point_at_distance(&x, 5.0, 1), Err(Error::EpsTooLarge { .. })));
    }

    #[test]
    fn freeness_examples() {
        let x = MatrixTuple::single(sample_gue(30, 1));
        let d = freeness_defect(&[x.clone(), x.clone()], 2).unwrap();
        let c = x.components()[0].clone();
        let centered_sq = c.trace_sq() - c.trace() * c.trace();
        assert!(d >= centered_sq - 1e-12 && d > 0.0);
        let s = MatrixTuple::single(SelfAdjointMatrix::scalar(5, 2.0));
        assert!(freeness_defect(&[s.clone(), s], 3).unwrap() < 1e-14);
    }

    #[test]
    fn rotated_gue_pairs_are_nearly_free() {
        let k = 200;
        let mut pass = 0;
        for seed in 0..20u64 {
            let a = MatrixTuple::single(sample_gue(k, 2 * seed));
            let b = MatrixTuple::single(sample_gue(k, 2 * seed + 1));
            let ua = sample_haar_unitary(k, 1000 + seed);
            let ub = sample_haar_unitary(k, 2000 + seed);
            let g = [conjugate_tuple(&a, &ua).unwrap(), conjugate_tuple(&b, &ub).unwrap()];
            if freeness_defect(&g, 3).unwrap() < 0.05 {
                pass += 1;
            }
        }
        assert!(pass >= 19, "{pass}");
    }

    #[test]
    fn product_samples() {
        let p = MatrixTuple::single(diag(&[0.0, 0.0, 1.0, 1.0]));
        let q = MatrixTuple::single(diag(&[1.0, 2.0, 3.0, 4.0]));
        let s = product_orbit_sample(&[p.clone(), q.clone()], 6, 3).unwrap();
        for (f, j) in s.factors.iter().zip(s.joined().unwrap()) {
            assert_eq!(j.arity(), 2);
            let e0 = eigenvalues(&f[0].components()[0]);
            let e1 = eigenvalues(&f[1].components()[0]);
            assert!(e0.iter().zip([0.0, 0.0, 1.0, 1.0]).all(|(a, b)| (a - b).abs() < 1e-8));
            assert!(e1.iter().zip([1.0, 2.0, 3.0, 4.0]).all(|(a, b)| (a - b).abs() < 1e-8));
        }
        let single = product_orbit_sample(std::slice::from_ref(&p), 4, 3).unwrap();
        assert_eq!(single.len(), 4);
        assert!(product_orbit_sample(&[p, MatrixTuple::single(diag(&[1.0]))], 1, 0).is_err());
    }

    #[test]
    fn sorted_distance_examples() {
        let x = sample_gue(10, 2);
        assert_eq!(sorted_eigenvalue_distance(&x, &x).unwrap(), 0.0);
        assert!(sorted_eigenvalue_distance(&diag(&[0.0, 1.0]), &diag(&[1.0, 0.0])).unwrap() < 1e-15);
        let u = sample_haar_unitary(10, 4);
        let ux = conjugate_tuple(&MatrixTuple::single(x.clone()), &u).unwrap();
        assert!(sorted_eigenvalue_distance(&x, &ux.components()[0]).unwrap() < 1e-8);
    }

    #[test]
    fn algebra_spec_accepts_represented_generators() {
        use crate::algebra::{plan_representation, represented_generators};
        let a = FiniteDimAlgebra::from_pairs(&[(1, 0.2), (2, 0.8)]).unwrap();
        let plan = plan_representation(&a, 10, 0.1).unwrap();
        let x = represented_generators(&plan, &a).unwrap();
        let spec = MicrostateSpec::for_algebra(&a, 4.0, 3, 1e-9, 10).unwrap();
        assert!(is_microstate(&x, &spec).unwrap().member);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<MicrostateSpec>(&json).unwrap(), spec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn hoffman_wielandt(k in 2usize..16, seed in any::<u64>()) {
                let x = sample_gue(k, seed);
                let y = sample_gue(k, seed.wrapping_add(1));
                let d = hs_norm(&MatrixTuple::single(x.sub(&y).unwrap()));
                prop_assert!(sorted_eigenvalue_distance(&x, &y).unwrap() <= d + 1e-12);
            }

            #[test]
            fn orbit_point_hits_distance(k in 2usize..10, seed in any::<u64>(), eps in 0.001f64..0.5) {
                let x = MatrixTuple::single(sample_gue(k, seed));
                let p = orbit_point_at_distance_detailed(&x, eps, seed).unwrap();
                prop_assert!((p.distance - eps).abs() <= 1e-9);
                let e0 = eigenvalues(&x.components()[0]);
                let e1 = eigenvalues(&p.point.components()[0]);
                for (a, b) in e0.iter().zip(&e1) {
                    prop_assert!((a - b).abs() < 1e-8);
                }
            }

            #[test]
            fn membership_is_conjugation_invariant(k in 4usize..20, seed in any::<u64>()) {
                let mu = SpectralMeasure::uniform(0.0, 1.0).unwrap();
                let q = build_quantile_microstate(&mu, k, 0.45);
                let x = match q { Ok(q) => q.tuple(), Err(_) => MatrixTuple::single(sample_gue(k, seed)) };
                let spec = MicrostateSpec::for_measure(&mu, 2.0, 3, 0.08, k).unwrap();
                let u = sample_haar_unitary(k, seed);
                let a = is_microstate(&x, &spec).unwrap();
                let b = is_microstate(&conjugate_tuple(&x, &u).unwrap(), &spec).unwrap();
                prop_assert_eq!(a.member, b.member);
                prop_assert!((a.worst_deviation - b.worst_deviation).abs() < 1e-9);
            }

            #[test]
            fn freeness_symmetries(k in 3usize..12, seed in any::<u64>()) {
                let a = MatrixTuple::single(sample_gue(k, seed));
                let b = MatrixTuple::new(vec![sample_gue(k, seed ^ 5), sample_gue(k, seed ^ 9)]).unwrap();
                let d1 = freeness_defect(&[a.clone(), b.clone()], 3).unwrap();
                let d2 = freeness_defect(&[b.clone(), a.clone()], 3).unwrap();
                prop_assert!((d1 - d2).abs() < 1e-10);
                let u = sample_haar_unitary(k, seed.wrapping_add(3));
                let ca = conjugate_tuple(&a, &u).unwrap();
                let cb = conjugate_tuple(&b, &u).unwrap();
                prop_assert!((freeness_defect(&[ca, cb], 3).unwrap() - d1).abs() < 1e-9);
            }
        }
    }
}
