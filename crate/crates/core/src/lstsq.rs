//! Dense least squares by Householder QR with column pivoting.
//!
//! Rank is read off the diagonal of `R`. Rank-deficient problems are solved
//! in the minimum-norm sense through a complete orthogonal decomposition.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_columns(rows: usize, columns: Vec<Vec<f64>>) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            assert_eq!(c.len(), rows, "column length");
            data.extend(c);
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.col(j)) {
                *o += a * xj;
            }
        }
        out
    }

    /// `A^T v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on huge monomial columns
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

/// Outcome of a least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LstsqSolution {
    pub x: Vec<f64>,
    /// Numerical rank.
    pub rank: usize,
    /// `|R_00| / |R_kk|` for the last retained pivot.
    pub condition: f64,
}

impl LstsqSolution {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.x.len()
    }
}

/// A Householder reflector `I - beta v v^T` acting on rows `offset..`.
struct Reflector {
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    /// Builds the reflector that maps `x` onto `alpha e_0`; returns `alpha`.
    fn new(offset: usize, x: &[f64]) -> (Self, f64) {
        let nx = norm(x);
        if nx == 0.0 {
            return (
                Self {
                    offset,
                    v: vec![0.0; x.len()],
                    beta: 0.0,
                },
                0.0,
            );
        }
        let alpha = if x[0] >= 0.0 { -nx } else { nx };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        let beta = if vv == 0.0 { 0.0 } else { 2.0 / vv };
        (Self { offset, v, beta }, alpha)
    }

    fn apply(&self, col: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let tail = &mut col[self.offset..];
        let s = self.beta * dot(&self.v, tail);
        for (c, v) in tail.iter_mut().zip(&self.v) {
            *c -= s * v;
        }
    }
}

/// Columns above this count per step are updated in parallel.
const PAR_WORK: usize = 1 << 16;

/// Solves `min ||A x - b||` with relative rank tolerance `rtol`
/// (pass `None` for `max(m, n) * eps`).
pub fn lstsq(a: &ColMatrix, b: &[f64], rtol: Option<f64>) -> Result<LstsqSolution> {
    let (m, n) = (a.rows(), a.cols());
    if b.len() != m {
        return Err(Error::LengthMismatch {
            left: m,
            right: b.len(),
        });
    }
    if n == 0 {
        return Err(Error::Invalid("least squares with no unknowns".into()));
    }
    if m < n {
        return Err(Error::Underdetermined { rows: m, cols: n });
    }
    if a.data.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("least-squares system".into()));
    }
    let rtol = rtol.unwrap_or(m.max(n) as f64 * f64::EPSILON);

    let mut work = a.clone();
    let mut rhs = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut diag = vec![0.0; n];

    for k in 0..n {
        // pivot on the largest remaining column norm
        let (p, _) = (k..n)
            .map(|j| (j, norm(&work.col(j)[k..])))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != k {
            let (lo, hi) = work.data.split_at_mut(p * m);
            lo[k * m..(k + 1) * m].swap_with_slice(&mut hi[..m]);
            perm.swap(k, p);
        }
        let (h, alpha) = Reflector::new(k, &work.col(k)[k..]);
        diag[k] = alpha;
        {
            let col = work.col_mut(k);
            col[k] = alpha;
            for v in &mut col[k + 1..] {
                *v = 0.0;
            }
        }
        let trailing = &mut work.data[(k + 1) * m..];
        if trailing.len() * 2 > PAR_WORK {
            trailing.par_chunks_mut(m).for_each(|c| h.apply(c));
        } else {
            trailing.chunks_mut(m).for_each(|c| h.apply(c));
        }
        h.apply(&mut rhs);
    }

    let lead = diag[0].abs();
    let rank = if lead == 0.0 {
        0
    } else {
        diag.iter().take_while(|d| d.abs() > rtol * lead).count()
    };
    if rank == 0 {
        return Ok(LstsqSolution {
            x: vec![0.0; n],
            rank: 0,
            condition: f64::INFINITY,
        });
    }
    let condition = lead / diag[rank - 1].abs();
    let r = |i: usize, j: usize| work.get(i, j);

    let z = if rank == n {
        let mut z = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| r(i, j) * z[j]).sum();
            z[i] = (rhs[i] - s) / r(i, i);
        }
        z
    } else {
        // [R11 R12]^T = W T, then the minimum-norm solution is W T^{-T} c.
        let mut rt = ColMatrix::zeros(n, rank);
        for i in 0..rank {
            for j in i..n {
                rt.data[i * n + j] = r(i, j);
            }
        }
        let mut reflectors = Vec::with_capacity(rank);
        for k in 0..rank {
            let (h, alpha) = Reflector::new(k, &rt.col(k)[k..]);
            let col = rt.col_mut(k);
            col[k] = alpha;
            for v in &mut col[k + 1..] {
                *v = 0.0;
            }
            for j in k + 1..rank {
                h.apply(rt.col_mut(j));
            }
            reflectors.push(h);
        }
        // T^T w = c, T^T is lower triangular
        let mut w = vec![0.0; n];
        for i in 0..rank {
            let s: f64 = (0..i).map(|j| rt.get(j, i) * w[j]).sum();
            w[i] = (rhs[i] - s) / rt.get(i, i);
        }
        for h in reflectors.iter().rev() {
            h.apply(&mut w);
        }
        w
    };

    let mut x = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = z[k];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("least-squares solution is not finite".into()));
    }
    Ok(LstsqSolution { x, rank, condition })
}
