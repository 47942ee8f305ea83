//! Normal equations of the frozen energy for one coordinate axis.
//!
//! Every energy term couples a vertex pair through a weighted difference, so
//! the system matrix is a weighted graph Laplacian restricted to the free
//! vertices. The weights do not depend on the iterate, so each axis is
//! factored once per solve and only the right-hand side changes.

use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::na::DVector;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use super::energy::FrozenEnergy;
use crate::error::{Error, Result};
use crate::mesh::Point;

pub(crate) struct AxisSystem {
    axis: usize,
    /// Unknown index of each vertex, `None` when the coordinate is pinned.
    free: Vec<Option<usize>>,
    pinned: Vec<f64>,
    factor: Option<CscCholesky<f64>>,
}

impl AxisSystem {
    /// `pinned[v]` is `Some(value)` for vertices whose coordinate is fixed.
    pub fn new(axis: usize, pinned: &[Option<f64>], energy: &FrozenEnergy) -> Result<Self> {
        let mut free = vec![None; pinned.len()];
        let mut n = 0;
        for (v, p) in pinned.iter().enumerate() {
            if p.is_none() {
                free[v] = Some(n);
                n += 1;
            }
        }
        let mut coo = CooMatrix::new(n, n);
        for t in energy.terms.iter().flatten() {
            match (free[t.i], free[t.j]) {
                (Some(a), Some(b)) => {
                    coo.push(a, a, t.weight);
                    coo.push(b, b, t.weight);
                    coo.push(a, b, -t.weight);
                    coo.push(b, a, -t.weight);
                }
                (Some(a), None) => coo.push(a, a, t.weight),
                (None, Some(b)) => coo.push(b, b, t.weight),
                (None, None) => {}
            }
        }
        let factor = if n == 0 {
            None
        } else {
            let f = CscCholesky::factor(&CscMatrix::from(&coo)).map_err(|e| {
                Error::param("solver", format!("system is not positive definite: {e}"))
            })?;
            Some(f)
        };
        Ok(Self {
            axis,
            free,
            pinned: pinned.iter().map(|p| p.unwrap_or(0.0)).collect(),
            factor,
        })
    }

    /// Minimizer of the frozen energy along this axis, written into `out`.
    pub fn solve(&self, energy: &FrozenEnergy, out: &mut [Point]) {
        let k = self.axis;
        let n = self.factor.as_ref().map_or(0, |f| f.l().nrows());
        let mut rhs = DVector::zeros(n);
        for t in energy.terms.iter().flatten() {
            let w = t.weight;
            match (self.free[t.i], self.free[t.j]) {
                (Some(a), Some(b)) => {
                    rhs[a] += w * t.target[k];
                    rhs[b] -= w * t.target[k];
                }
                (Some(a), None) => rhs[a] += w * (t.target[k] + self.pinned[t.j]),
                (None, Some(b)) => rhs[b] += w * (self.pinned[t.i] - t.target[k]),
                (None, None) => {}
            }
        }
        let x: Vec<f64> = match &self.factor {
            Some(f) => f.solve(&rhs).iter().copied().collect(),
            None => Vec::new(),
        };
        for (v, slot) in self.free.iter().enumerate() {
            out[v][k] = match slot {
                Some(a) => x[*a],
                None => self.pinned[v],
            };
        }
    }
}
