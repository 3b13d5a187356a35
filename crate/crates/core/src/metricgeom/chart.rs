use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::matrixcore::{log_ball_volume, CMatrix, MatrixTuple, SelfAdjointMatrix};

/// Linearization of `h -> e^{ih} x e^{-ih}` at `h = 0`, in `|.|_2`-orthonormal coordinates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TangentChart {
    pub k: usize,
    /// Numerical rank of the differential, the orbit dimension.
    pub dim: usize,
    /// Sum of `log sigma` over the nonzero singular values.
    pub log_volume_element: f64,
    pub singular_values: Vec<f64>,
}

impl TangentChart {
    /// `log P_eps` up to an `eps`-independent constant.
    pub fn log_packing(&self, eps: f64) -> f64 {
        self.log_volume_element - log_ball_volume(self.dim, eps)
    }
}

fn hermitian_basis(k: usize) -> Vec<CMatrix> {
    let kf = k as f64;
    let d = kf.sqrt();
    let o = (kf / 2.0).sqrt();
    let mut out = Vec::with_capacity(k * k);
    for j in 0..k {
        let mut e = CMatrix::zeros(k, k);
        e[(j, j)] = Complex64::new(d, 0.0);
        out.push(e);
    }
    for j in 0..k {
        for l in (j + 1)..k {
            let mut re = CMatrix::zeros(k, k);
            re[(j, l)] = Complex64::new(o, 0.0);
            re[(l, j)] = Complex64::new(o, 0.0);
            out.push(re);
            let mut im = CMatrix::zeros(k, k);
            im[(j, l)] = Complex64::new(0.0, o);
            im[(l, j)] = Complex64::new(0.0, -o);
            out.push(im);
        }
    }
    out
}

/// Singular values of the orbit map's differential; rank below `rel_tol * max` is dropped.
pub fn tangent_chart(x: &MatrixTuple, rel_tol: f64) -> Result<TangentChart> {
    let k = x.k();
    let basis = hermitian_basis(k);
    let i = Complex64::new(0.0, 1.0);
    let rows: Vec<Vec<f64>> = basis
        .iter()
        .map(|e| {
            let mut v = Vec::with_capacity(x.arity() * k * k);
            for c in x.components() {
                let m = c.matrix();
                let t = (e * m - m * e) * i;
                SelfAdjointMatrix::hermitian_part(t).embed_into(&mut v);
            }
            v
        })
        .collect();
    let n = rows.len();
    let gram = DMatrix::from_fn(n, n, |a, b| rows[a].iter().zip(&rows[b]).map(|(p, q)| p * q).sum::<f64>());
    let mut ev: Vec<f64> = gram.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let top = ev.first().copied().unwrap_or(0.0).max(0.0);
    let singular_values: Vec<f64> = ev.iter().take_while(|&&v| top > 0.0 && v > rel_tol * top).map(|v| v.sqrt()).collect();
    let log_volume_element = singular_values.iter().map(|s| s.ln()).sum();
    Ok(TangentChart { k, dim: singular_values.len(), log_volume_element, singular_values })
}
