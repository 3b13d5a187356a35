//! Finite-dimensional tracial algebras `(+)_i M_{n_i}` with weights `alpha_i`,
//! and block representations into `M_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrixcore::{CMatrix, MatrixTuple, SelfAdjointMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub n: usize,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteDimAlgebra {
    blocks: Vec<Block>,
}

#[derive(Serialize, Deserialize)]
struct AlgebraDoc {
    blocks: Vec<(usize, f64)>,
}

impl Serialize for FiniteDimAlgebra {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AlgebraDoc { blocks: self.blocks.iter().map(|b| (b.n, b.alpha)).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteDimAlgebra {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = AlgebraDoc::deserialize(d)?;
        FiniteDimAlgebra::new(doc.blocks.iter().map(|&(n, alpha)| Block { n, alpha }).collect())
            .map_err(serde::de::Error::custom)
    }
}

impl FiniteDimAlgebra {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("no blocks".into()));
        }
        for b in &blocks {
            if b.n == 0 {
                return Err(Error::InvalidAlgebra("block size must be at least 1".into()));
            }
            if !(b.alpha > 0.0 && b.alpha <= 1.0) {
                return Err(Error::InvalidAlgebra(format!("weight {} not in (0,1]", b.alpha)));
            }
        }
        let s: f64 = blocks.iter().map(|b| b.alpha).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidAlgebra(format!("weights sum to {s}")));
        }
        Ok(FiniteDimAlgebra { blocks })
    }

    pub fn from_pairs(pairs: &[(usize, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, alpha)| Block { n, alpha }).collect())
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn p(&self) -> usize {
        self.blocks.len()
    }

    /// A selfadjoint generating pair: a diagonal with distinct nonzero entries
    /// across all blocks, and the path adjacency matrix in each block.
    pub fn generators(&self) -> [Vec<SelfAdjointMatrix>; 2] {
        let mut next = 1.0;
        let mut z1 = Vec::new();
        let mut z2 = Vec::new();
        for b in &self.blocks {
            let d: Vec<f64> = (0..b.n)
                .map(|_| {
                    let v = next;
                    next += 1.0;
                    v
                })
                .collect();
            z1.push(SelfAdjointMatrix::from_real_diagonal(&d));
            let mut m = CMatrix::zeros(b.n, b.n);
            for i in 0..b.n.saturating_sub(1) {
                m[(i, i + 1)] = Complex64::new(1.0, 0.0);
                m[(i + 1, i)] = Complex64::new(1.0, 0.0);
            }
            z2.push(SelfAdjointMatrix::hermitian_part(m));
        }
        [z1, z2]
    }

    /// `phi(x) = sum_i alpha_i tr_{n_i}(x_i)`.
    pub fn state(&self, element: &[CMatrix]) -> Result<Complex64> {
        self.check_element(element)?;
        Ok(self
            .blocks
            .iter()
            .zip(element)
            .map(|(b, x)| x.trace() * (b.alpha / b.n as f64))
            .sum())
    }

    fn check_element(&self, element: &[CMatrix]) -> Result<()> {
        if element.len() != self.p() {
            return Err(Error::ShapeMismatch(format!("{} blocks expected, got {}", self.p(), element.len())));
        }
        for (b, x) in self.blocks.iter().zip(element) {
            if x.nrows() != b.n || x.ncols() != b.n {
                return Err(Error::ShapeMismatch(format!("block of size {} given {}x{}", b.n, x.nrows(), x.ncols())));
            }
        }
        Ok(())
    }
}

/// `1 - sum_i alpha_i^2 / n_i^2`.
pub fn delta0_fd(a: &FiniteDimAlgebra) -> f64 {
    1.0 - a.blocks.iter().map(|b| (b.alpha / b.n as f64).powi(2)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentationPlan {
    pub k: usize,
    pub multiplicities: Vec<usize>,
    pub corner: usize,
    pub block_sizes: Vec<usize>,
    pub exact: bool,
    /// `sum_i |l_i n_i / k - alpha_i|`, the norm of `tr_k o sigma_k - phi`.
    pub trace_error: f64,
    pub general: Option<GeneralBranch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralBranch {
    pub n: usize,
    pub d: usize,
    pub m: Vec<usize>,
    pub beta: Vec<f64>,
    pub eps1: f64,
    pub delta: f64,
}

impl RepresentationPlan {
    /// `k^2 - dim H_k`.
    pub fn orbit_dim(&self) -> usize {
        self.k * self.k - commutant_unitary_dim(self)
    }
}

fn largest_dyadic_below(x: f64) -> f64 {
    let mut d = 1.0;
    while d >= x {
        d *= 0.5;
    }
    d
}

/// Largest-remainder apportionment of `n` seats among weights summing to 1.
fn apportion(n: usize, w: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = w.iter().map(|x| x * n as f64).collect();
    let mut seats: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - seats.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&i, &j| (quotas[j] - quotas[j].floor()).total_cmp(&(quotas[i] - quotas[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        seats[i] += 1;
        left -= 1;
    }
    seats
}

pub fn plan_representation(a: &FiniteDimAlgebra, k: usize, eps: f64) -> Result<RepresentationPlan> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("eps={eps} not in (0,1)")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let blocks = a.blocks();
    let p = blocks.len();
    let sizes: Vec<usize> = blocks.iter().map(|b| b.n).collect();
    let balanced = (0..p).all(|i| {
        (0..p).all(|j| {
            let lhs = blocks[i].alpha * (sizes[j] * sizes[j]) as f64;
            let rhs = blocks[j].alpha * (sizes[i] * sizes[i]) as f64;
            (lhs - rhs).abs() <= 1e-12 * lhs.max(rhs)
        })
    });
    if balanced {
        let raw: Vec<f64> = blocks.iter().map(|b| k as f64 * b.alpha / b.n as f64).collect();
        if raw.iter().all(|x| (x - x.round()).abs() < 1e-9) {
            let l: Vec<usize> = raw.iter().map(|x| x.round() as usize).collect();
            if l.iter().zip(&sizes).map(|(l, n)| l * n).sum::<usize>() == k {
                return Ok(RepresentationPlan {
                    k,
                    multiplicities: l,
                    corner: 0,
                    block_sizes: sizes,
                    exact: true,
                    trace_error: 0.0,
                    general: None,
                });
            }
        }
    }

    // Perturbed weights: move mass toward the block that lowers sum beta_i^2 / n_i^2.
    let mut beta: Vec<f64> = blocks.iter().map(|b| b.alpha).collect();
    let (mut eps1, mut delta) = (0.0, 0.0);
    if !balanced {
        let w: Vec<f64> = blocks.iter().map(|b| b.alpha / (b.n * b.n) as f64).collect();
        let (i, j) = {
            let imax = (0..p).max_by(|&x, &y| w[x].total_cmp(&w[y])).unwrap();
            let imin = (0..p).min_by(|&x, &y| w[x].total_cmp(&w[y])).unwrap();
            (imax, imin)
        };
        let g = 2.0 * (w[i] - w[j]);
        let h = 1.0 / (sizes[i] * sizes[i]) as f64 + 1.0 / (sizes[j] * sizes[j]) as f64;
        eps1 = largest_dyadic_below((eps / 4.0).min(blocks[i].alpha / 2.0).min(g / (2.0 * h)));
        let gain = g * eps1 - h * eps1 * eps1;
        delta = largest_dyadic_below(gain.min(eps));
        beta[i] -= eps1;
        beta[j] += eps1;
    }
    let prod: usize = sizes.iter().product();
    let n = k / prod;
    if n == 0 {
        return Err(Error::KTooSmall { k, reason: format!("k must be at least n_1...n_p = {prod}") });
    }
    let d = n * prod;
    let m = apportion(n, &beta);
    let l: Vec<usize> = m.iter().zip(&sizes).map(|(&mi, &ni)| mi * prod / ni).collect();
    let used: usize = l.iter().zip(&sizes).map(|(l, n)| l * n).sum();
    let corner = k - used;
    let trace_error: f64 =
        l.iter().zip(blocks).map(|(&li, b)| (li as f64 * b.n as f64 / k as f64 - b.alpha).abs()).sum();
    let plan = RepresentationPlan {
        k,
        multiplicities: l,
        corner,
        block_sizes: sizes,
        exact: false,
        trace_error,
        general: Some(GeneralBranch { n, d, m, beta, eps1, delta }),
    };
    if trace_error >= eps {
        return Err(Error::KTooSmall { k, reason: format!("trace error {trace_error:.3e} >= eps") });
    }
    let orbit = plan.orbit_dim() as f64;
    if orbit < delta0_fd(a) * (k * k) as f64 {
        return Err(Error::KTooSmall { k, reason: "orbit dimension below delta0 k^2".into() });
    }
    Ok(plan)
}

/// `l_{p+1}^2 + sum_i l_i^2`.
pub fn commutant_unitary_dim(plan: &RepresentationPlan) -> usize {
    plan.corner * plan.corner + plan.multiplicities.iter().map(|l| l * l).sum::<usize>()
}

/// Block-diagonal image `diag(x_1 (x) I_{l_1}, ..., x_p (x) I_{l_p}, 0)`.
pub fn represent(plan: &RepresentationPlan, a: &FiniteDimAlgebra, element: &[CMatrix]) -> Result<CMatrix> {
    a.check_element(element)?;
    if plan.block_sizes != a.blocks().iter().map(|b| b.n).collect::<Vec<_>>() {
        return Err(Error::ShapeMismatch("plan was built for another algebra".into()));
    }
    let k = plan.k;
    let mut out = DMatrix::zeros(k, k);
    let mut off = 0;
    for (x, &l) in element.iter().zip(&plan.multiplicities) {
        let n = x.nrows();
        for s in 0..n {
            for t in 0..n {
                let v = x[(s, t)];
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..l {
                    out[(off + s * l + r, off + t * l + r)] = v;
                }
            }
        }
        off += n * l;
    }
    Ok(out)
}

/// Represented generator tuple `(sigma_k(z_1), sigma_k(z_2))`, or just `z_1` when every block is `C`.
pub fn represented_generators(plan: &RepresentationPlan, a: &FiniteDimAlgebra) -> Result<MatrixTuple> {
    let [z1, z2] = a.generators();
    let e1: Vec<CMatrix> = z1.into_iter().map(|m| m.into_matrix()).collect();
    let mut comps = vec![SelfAdjointMatrix::hermitian_part(represent(plan, a, &e1)?)];
    if a.blocks().iter().any(|b| b.n > 1) {
        let e2: Vec<CMatrix> = z2.into_iter().map(|m| m.into_matrix()).collect();
        comps.push(SelfAdjointMatrix::hermitian_part(represent(plan, a, &e2)?));
    }
    MatrixTuple::new(comps)
}
