//! Selfadjoint matrices, the normalized trace geometry and random matrix sampling.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. The normalized trace is
//! `tr_k = Tr / k`. For a tuple `x`, `|x|_2 = (sum_i tr_k(x_i^2))^(1/2)` and
//! `||x||_2 = sqrt(k) |x|_2`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

pub type CMatrix = DMatrix<Complex64>;

const HERMITIAN_TOL: f64 = 1e-12;
const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SelfAdjointMatrix {
    m: CMatrix,
}

impl SelfAdjointMatrix {
    /// Checks the matrix is square and Hermitian to 1e-12 entrywise.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::ShapeMismatch(format!("{}x{} is not a nonempty square", m.nrows(), m.ncols())));
        }
        let k = m.nrows();
        for i in 0..k {
            for j in i..k {
                if (m[(i, j)] - m[(j, i)].conj()).norm() > HERMITIAN_TOL {
                    return Err(Error::InvalidArgument(format!("matrix is not selfadjoint at ({i},{j})")));
                }
            }
        }
        Ok(Self::hermitian_part(m))
    }

    /// `(m + m*)/2`, used for results of arithmetic that are selfadjoint in exact terms.
    pub fn hermitian_part(m: CMatrix) -> Self {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        SelfAdjointMatrix { m: h }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let k = d.len();
        let mut m = CMatrix::zeros(k, k);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        SelfAdjointMatrix { m }
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        let mut m = CMatrix::zeros(k, k);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::ShapeMismatch("ragged rows".into()));
            }
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        Self::new(m)
    }

    pub fn scalar(k: usize, c: f64) -> Self {
        Self::from_real_diagonal(&vec![c; k])
    }

    pub fn zeros(k: usize) -> Self {
        Self::scalar(k, 0.0)
    }

    pub fn k(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    /// Normalized trace.
    pub fn trace(&self) -> f64 {
        self.m.trace().re / self.k() as f64
    }

    /// `tr_k(x^2)`.
    pub fn trace_sq(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.k() as f64
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(self)
    }

    pub fn operator_norm(&self) -> f64 {
        let ev = self.eigenvalues();
        ev.first().map(|a| a.abs()).unwrap_or(0.0).max(ev.last().map(|a| a.abs()).unwrap_or(0.0))
    }

    /// True when `x = c I` to 1e-12.
    pub fn is_scalar(&self) -> bool {
        let k = self.k();
        let c = self.m[(0, 0)];
        for i in 0..k {
            for j in 0..k {
                let target = if i == j { c } else { Complex64::new(0.0, 0.0) };
                if (self.m[(i, j)] - target).norm() > HERMITIAN_TOL {
                    return false;
                }
            }
        }
        true
    }

    /// Applies a real polynomial `sum_j coeffs[j] t^j` through the spectral calculus.
    pub fn apply_polynomial(&self, coeffs: &[f64]) -> Self {
        let k = self.k();
        let mut acc = CMatrix::zeros(k, k);
        for &c in coeffs.iter().rev() {
            acc = &acc * &self.m;
            for i in 0..k {
                acc[(i, i)] += Complex64::new(c, 0.0);
            }
        }
        Self::hermitian_part(acc)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.k() != other.k() {
            return Err(Error::ShapeMismatch(format!("sizes {} and {}", self.k(), other.k())));
        }
        Ok(SelfAdjointMatrix { m: &self.m - &other.m })
    }

    /// Flat row-major `(re, im)` pairs, for debugging dumps.
    pub fn to_flat(&self) -> Vec<(f64, f64)> {
        let k = self.k();
        let mut out = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let z = self.m[(i, j)];
                out.push((z.re, z.im));
            }
        }
        out
    }

    /// Real coordinates orthonormal for `|.|_2`: diagonal entries scaled by `1/sqrt(k)`,
    /// upper off-diagonal real and imaginary parts scaled by `sqrt(2/k)`.
    pub fn embed_into(&self, out: &mut Vec<f64>) {
        let k = self.k();
        let sd = 1.0 / (k as f64).sqrt();
        let so = (2.0 / k as f64).sqrt();
        for i in 0..k {
            out.push(self.m[(i, i)].re * sd);
        }
        for i in 0..k {
            for j in (i + 1)..k {
                let z = self.m[(i, j)];
                out.push(z.re * so);
                out.push(z.im * so);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FlatMatrix {
    k: usize,
    entries: Vec<(f64, f64)>,
}

impl Serialize for SelfAdjointMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FlatMatrix { k: self.k(), entries: self.to_flat() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SelfAdjointMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let f = FlatMatrix::deserialize(d)?;
        if f.entries.len() != f.k * f.k {
            return Err(serde::de::Error::custom("entry count does not match k"));
        }
        let m = CMatrix::from_fn(f.k, f.k, |i, j| {
            let (re, im) = f.entries[i * f.k + j];
            Complex64::new(re, im)
        });
        SelfAdjointMatrix::new(m).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixTuple {
    components: Vec<SelfAdjointMatrix>,
}

impl MatrixTuple {
    pub fn new(components: Vec<SelfAdjointMatrix>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::ShapeMismatch("tuple needs at least one component".into()));
        };
        let k = first.k();
        if components.iter().any(|c| c.k() != k) {
            return Err(Error::ShapeMismatch("components differ in size".into()));
        }
        Ok(MatrixTuple { components })
    }

    pub fn single(x: SelfAdjointMatrix) -> Self {
        MatrixTuple { components: vec![x] }
    }

    pub fn k(&self) -> usize {
        self.components[0].k()
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[SelfAdjointMatrix] {
        &self.components
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        MatrixTuple { components: vec![SelfAdjointMatrix::zeros(k); n] }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.arity() != other.arity() {
            return Err(Error::ShapeMismatch("arity differs".into()));
        }
        let c = self.components.iter().zip(&other.components).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
        Ok(MatrixTuple { components: c })
    }

    /// Concatenates tuples of the same size.
    pub fn concat(parts: &[MatrixTuple]) -> Result<Self> {
        let comps: Vec<_> = parts.iter().flat_map(|p| p.components.iter().cloned()).collect();
        MatrixTuple::new(comps)
    }

    pub fn is_scalar(&self) -> bool {
        self.components.iter().all(|c| c.is_scalar())
    }

    /// Coordinates in which Euclidean distance equals `|.|_2`.
    pub fn embed(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = Vec::with_capacity(self.arity() * k * k);
        for c in &self.components {
            c.embed_into(&mut out);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    u: CMatrix,
}

impl UnitaryMatrix {
    /// Checks `||u u* - I|| < 1e-10` (operator norm).
    pub fn new(u: CMatrix) -> Result<Self> {
        if u.nrows() != u.ncols() || u.nrows() == 0 {
            return Err(Error::ShapeMismatch("unitary must be nonempty square".into()));
        }
        let w = UnitaryMatrix { u };
        let defect = w.unitarity_defect();
        if defect >= UNITARY_TOL {
            return Err(Error::InvalidArgument(format!("unitarity defect {defect:e}")));
        }
        Ok(w)
    }

    pub fn identity(k: usize) -> Self {
        UnitaryMatrix { u: CMatrix::identity(k, k) }
    }

    pub fn k(&self) -> usize {
        self.u.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.u
    }

    /// `||u u* - I||` in operator norm.
    pub fn unitarity_defect(&self) -> f64 {
        let k = self.k();
        let d = &self.u * self.u.adjoint() - CMatrix::identity(k, k);
        SelfAdjointMatrix::hermitian_part(d).operator_norm()
    }

    /// `exp(i t H)` from an eigendecomposition of `H`.
    pub fn exp_i(h: &SelfAdjointMatrix, t: f64) -> Self {
        let eig = h.matrix().clone().symmetric_eigen();
        Self::exp_i_from_eigen(&eig.eigenvectors, eig.eigenvalues.as_slice(), t)
    }

    pub fn exp_i_from_eigen(vectors: &CMatrix, values: &[f64], t: f64) -> Self {
        let k = values.len();
        let mut scaled = vectors.clone();
        for (j, &l) in values.iter().enumerate() {
            let ph = Complex64::from_polar(1.0, t * l);
            for i in 0..k {
                scaled[(i, j)] *= ph;
            }
        }
        UnitaryMatrix { u: scaled * vectors.adjoint() }
    }
}

/// `|x|_2`.
pub fn hs_norm(x: &MatrixTuple) -> f64 {
    x.components.iter().map(|c| c.trace_sq()).sum::<f64>().sqrt()
}

/// `||x||_2 = sqrt(k) |x|_2`.
pub fn unnormalized_norm(x: &MatrixTuple) -> f64 {
    (x.k() as f64).sqrt() * hs_norm(x)
}

/// `|x - y|_2`.
pub fn hs_distance(x: &MatrixTuple, y: &MatrixTuple) -> Result<f64> {
    if x.k() != y.k() || x.arity() != y.arity() {
        return Err(Error::ShapeMismatch("tuples differ in shape".into()));
    }
    let mut s = 0.0;
    for (a, b) in x.components.iter().zip(&y.components) {
        s += (a.matrix() - b.matrix()).iter().map(|z| z.norm_sqr()).sum::<f64>();
    }
    Ok((s / x.k() as f64).sqrt())
}

/// Natural log of the volume of the Euclidean `d`-ball of radius `r`.
pub fn log_ball_volume(d: usize, r: f64) -> f64 {
    let d = d as f64;
    0.5 * d * std::f64::consts::PI.ln() - ln_gamma(0.5 * d + 1.0) + d * r.ln()
}

pub fn ball_volume(d: usize, r: f64) -> f64 {
    log_ball_volume(d, r).exp()
}

/// GUE sample with `E tr_k(x^2) = 1`.
pub fn sample_gue(k: usize, seed: u64) -> SelfAdjointMatrix {
    let mut r = rng::stream(seed, rng::stream_id(&[0x6775_6500, k as u64]));
    sample_gue_with(k, &mut r)
}

pub fn sample_gue_with(k: usize, r: &mut rng::Rng) -> SelfAdjointMatrix {
    let kf = k as f64;
    let mut m = CMatrix::zeros(k, k);
    for i in 0..k {
        let g: f64 = r.sample(StandardNormal);
        m[(i, i)] = Complex64::new(g / kf.sqrt(), 0.0);
        for j in (i + 1)..k {
            let a: f64 = r.sample(StandardNormal);
            let b: f64 = r.sample(StandardNormal);
            let z = Complex64::new(a, b) / (2.0 * kf).sqrt();
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    SelfAdjointMatrix { m }
}

/// Haar unitary from a Ginibre QR with the phases of `diag(R)` divided out.
pub fn sample_haar_unitary(k: usize, seed: u64) -> UnitaryMatrix {
    let mut r = rng::stream(seed, rng::stream_id(&[0x6861_6172, k as u64]));
    sample_haar_unitary_with(k, &mut r)
}

pub fn sample_haar_unitary_with(k: usize, r: &mut rng::Rng) -> UnitaryMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = CMatrix::from_fn(k, k, |_, _| {
        let a: f64 = r.sample(StandardNormal);
        let b: f64 = r.sample(StandardNormal);
        Complex64::new(a * s, b * s)
    });
    let qr = z.qr();
    let mut q = qr.q();
    let rr = qr.r();
    for j in 0..k {
        let d = rr[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..k {
            q[(i, j)] *= ph;
        }
    }
    UnitaryMatrix { u: q }
}

/// Ascending eigenvalues with multiplicity.
pub fn eigenvalues(x: &SelfAdjointMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = x.m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `tr_k(x_{w_1} ... x_{w_q})` with 0-based indices.
pub fn word_moment(x: &MatrixTuple, word: &[usize]) -> Result<Complex64> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("empty word".into()));
    }
    for &i in word {
        if i >= x.arity() {
            return Err(Error::IndexOutOfRange { index: i, arity: x.arity() });
        }
    }
    let k = x.k();
    if word.len() == 1 {
        return Ok(Complex64::new(x.components[word[0]].trace(), 0.0));
    }
    let mut p = x.components[word[0]].m.clone();
    for &i in &word[1..word.len() - 1] {
        p = &p * &x.components[i].m;
    }
    // Last factor enters only through the trace of the product.
    let last = &x.components[word[word.len() - 1]].m;
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            tr += p[(i, j)] * last[(j, i)];
        }
    }
    Ok(tr / k as f64)
}

/// Componentwise `u x_i u*`.
pub fn conjugate_tuple(x: &MatrixTuple, u: &UnitaryMatrix) -> Result<MatrixTuple> {
    if x.k() != u.k() {
        return Err(Error::ShapeMismatch(format!("tuple size {} vs unitary size {}", x.k(), u.k())));
    }
    let ua = u.u.adjoint();
    let comps = x.components.iter().map(|c| SelfAdjointMatrix::hermitian_part(&u.u * &c.m * &ua)).collect();
    Ok(MatrixTuple { components: comps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(d: &[f64]) -> SelfAdjointMatrix {
        SelfAdjointMatrix::from_real_diagonal(d)
    }

    #[test]
    fn norms_on_small_tuples() {
        assert_eq!(hs_norm(&MatrixTuple::zeros(3, 2)), 0.0);
        let id = MatrixTuple::single(SelfAdjointMatrix::scalar(5, 1.0));
        assert!((hs_norm(&id) - 1.0).abs() < 1e-15);
        assert!((unnormalized_norm(&id) - 5f64.sqrt()).abs() < 1e-12);
        let x = MatrixTuple::new(vec![diag(&[1.0, -1.0]), diag(&[1.0, -1.0])]).unwrap();
        assert!((hs_norm(&x) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ball_volumes_match_closed_forms() {
        use std::f64::consts::PI;
        assert!((ball_volume(1, 1.0) - 2.0).abs() < 1e-12);
        assert!((ball_volume(2, 1.0) - PI).abs() < 1e-12);
        assert!((ball_volume(3, 2.0) - 32.0 * PI / 3.0).abs() < 1e-10);
        assert!(log_ball_volume(1_000_000, 1.0).is_finite());
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(eigenvalues(&diag(&[3.0, 1.0, 2.0])), vec![1.0, 2.0, 3.0]);
        let s = SelfAdjointMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let ev = eigenvalues(&s);
        assert!((ev[0] + 1.0).abs() < 1e-12 && (ev[1] - 1.0).abs() < 1e-12);
        let g = sample_gue(100, 3);
        let sum: f64 = eigenvalues(&g).iter().sum();
        assert!((sum - g.matrix().trace().re).abs() < 1e-8);
    }

    #[test]
    fn word_moment_examples() {
        let x = MatrixTuple::single(diag(&[1.0, 2.0, 3.0]));
        assert!((word_moment(&x, &[0]).unwrap().re - 2.0).abs() < 1e-15);
        let s = SelfAdjointMatrix::from_real_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((word_moment(&MatrixTuple::single(s), &[0, 0]).unwrap().re - 1.0).abs() < 1e-15);
        let p = MatrixTuple::new(vec![diag(&[1.0, 2.0, -1.0]), diag(&[0.5, 3.0, 2.0])]).unwrap();
        let a = word_moment(&p, &[0, 1, 0, 1]).unwrap();
        let b = word_moment(&p, &[0, 0, 1, 1]).unwrap();
        assert!((a - b).norm() < 1e-14);
        assert!(matches!(word_moment(&p, &[2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn gue_k1_is_a_real_scalar() {
        let g = sample_gue(1, 11);
        assert_eq!(g.k(), 1);
        assert_eq!(g.matrix()[(0, 0)].im, 0.0);
    }

    #[test]
    fn gue_moments_are_semicircular() {
        let k = 200;
        let (mut m2, mut m4) = (0.0, 0.0);
        for seed in 0..50 {
            let g = sample_gue(k, seed);
            m2 += g.trace_sq();
            let x2 = g.matrix() * g.matrix();
            m4 += x2.iter().map(|z| z.norm_sqr()).sum::<f64>() / k as f64;
        }
        m2 /= 50.0;
        m4 /= 50.0;
        assert!((0.95..=1.05).contains(&m2), "{m2}");
        assert!((1.9..=2.1).contains(&m4), "{m4}");
    }

    #[test]
    fn haar_unitaries() {
        assert!(sample_haar_unitary(300, 1).unitarity_defect() < 1e-10);
        let u1 = sample_haar_unitary(1, 4);
        assert!((u1.matrix()[(0, 0)].norm() - 1.0).abs() < 1e-14);
        let mut s = 0.0;
        for seed in 0..200 {
            s += sample_haar_unitary(50, seed).matrix().trace().norm_sqr();
        }
        s /= 200.0;
        assert!((0.8..=1.2).contains(&s), "{s}");
    }

    #[test]
    fn conjugation_is_isometric_and_spectral() {
        let x = MatrixTuple::new(vec![sample_gue(12, 1), sample_gue(12, 2)]).unwrap();
        let y = MatrixTuple::new(vec![sample_gue(12, 3), sample_gue(12, 4)]).unwrap();
        let u = sample_haar_unitary(12, 9);
        let cx = conjugate_tuple(&x, &u).unwrap();
        let cy = conjugate_tuple(&y, &u).unwrap();
        let d0 = hs_distance(&x, &y).unwrap();
        let d1 = hs_distance(&cx, &cy).unwrap();
        assert!((d0 - d1).abs() < 1e-10);
        let e0 = eigenvalues(&x.components()[0]);
        let e1 = eigenvalues(&cx.components()[0]);
        for (a, b) in e0.iter().zip(&e1) {
            assert!((a - b).abs() < 1e-10);
        }
        let same = conjugate_tuple(&x, &UnitaryMatrix::identity(12)).unwrap();
        assert!(hs_distance(&same, &x).unwrap() < 1e-15);
    }

    #[test]
    fn embedding_is_isometric() {
        let x = MatrixTuple::new(vec![sample_gue(7, 1), sample_gue(7, 2)]).unwrap();
        let y = MatrixTuple::new(vec![sample_gue(7, 5), sample_gue(7, 6)]).unwrap();
        let (ex, ey) = (x.embed(), y.embed());
        let d: f64 = ex.iter().zip(&ey).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!((d - hs_distance(&x, &y).unwrap()).abs() < 1e-12);
        assert_eq!(ex.len(), 2 * 49);
    }

    #[test]
    fn serde_round_trip() {
        let g = sample_gue(4, 8);
        let s = serde_json::to_string(&g).unwrap();
        let back: SelfAdjointMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = Complex64::new(1.0, 0.0);
        assert!(SelfAdjointMatrix::new(m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn unnormalized_is_sqrt_k_times_hs(k in 1usize..20, seed in any::<u64>()) {
                let x = MatrixTuple::new(vec![sample_gue(k, seed), sample_gue(k, seed ^ 1)]).unwrap();
                let a = unnormalized_norm(&x);
                let b = (k as f64).sqrt() * hs_norm(&x);
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }

            #[test]
            fn conjugation_preserves_word_moments(k in 2usize..10, seed in any::<u64>(), word in proptest::collection::vec(0usize..2, 1..5)) {
                let x = MatrixTuple::new(vec![sample_gue(k, seed), sample_gue(k, seed.wrapping_add(7))]).unwrap();
                let u = sample_haar_unitary(k, seed.wrapping_add(13));
                let cx = conjugate_tuple(&x, &u).unwrap();
                let a = word_moment(&x, &word).unwrap();
                let b = word_moment(&cx, &word).unwrap();
                prop_assert!((a - b).norm() < 1e-9);
            }

            #[test]
            fn log_ball_volume_recursion(d in 3usize..2000, r in 0.01f64..10.0) {
                let lhs = log_ball_volume(d, r);
                let rhs = log_ball_volume(d - 2, r) + (2.0 * std::f64::consts::PI * r * r / d as f64).ln();
                prop_assert!((lhs - rhs).abs() <= 1e-10);
                prop_assert!(log_ball_volume(d, r * 1.1) > lhs);
            }
        }
    }
}
