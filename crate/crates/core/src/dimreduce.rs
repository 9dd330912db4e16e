//! Spatial compression of 2D field slices by a separable cosine transform.
//!
//! The synthesis (inverse) transform is
//!
//! ```text
//! v[k][l] = sum_{i<n_i} sum_{j<n_j} xi[i][j] cos(pi/ny (k + 1/2) i) cos(pi/nz (l + 1/2) j)
//! ```
//!
//! with unit weights. The forward transform is its exact inverse:
//!
//! ```text
//! xi[i][j] = w_i w_j sum_k sum_l v[k][l] cos(pi/ny (k + 1/2) i) cos(pi/nz (l + 1/2) j)
//! w_0 = 1/n,  w_i = 2/n for i > 0
//! ```
//!
//! so a constant field `c` has `xi[0][0] = c` and nothing else.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::UniformSeries;

/// A dense row-major grid of `rows x cols` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let data = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| f(r, c)).collect();
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// One time slice of a spatial field, `ny x nz`.
pub type FieldFrame = Grid;

/// Spectral coefficients `xi[i][j]`.
pub type DctCoefficients = Grid;

/// A time-indexed sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSequence {
    dt: f64,
    t0: f64,
    frames: Vec<FieldFrame>,
}

impl FieldSequence {
    pub fn new(dt: f64, t0: f64, frames: Vec<FieldFrame>) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !t0.is_finite() {
            return Err(Error::Invalid(format!("invalid time axis dt={dt}, t0={t0}")));
        }
        let first = frames
            .first()
            .ok_or_else(|| Error::Invalid("field sequence has no frames".into()))?;
        let dims = (first.rows, first.cols);
        if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| (f.rows, f.cols) != dims) {
            return Err(Error::DimensionMismatch(format!(
                "frame {i} is {}x{}, expected {}x{}",
                f.rows, f.cols, dims.0, dims.1
            )));
        }
        Ok(Self { dt, t0, frames })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn frames(&self) -> &[FieldFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(ny, nz)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.frames[0].rows, self.frames[0].cols)
    }
}

/// Number of retained low-frequency modes per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DctReduction {
    pub n_i: usize,
    pub n_j: usize,
}

impl DctReduction {
    pub fn new(n_i: usize, n_j: usize) -> Self {
        Self { n_i, n_j }
    }

    pub fn validate(&self, ny: usize, nz: usize) -> Result<()> {
        if self.n_i == 0 || self.n_j == 0 || self.n_i > ny || self.n_j > nz {
            return Err(Error::DimensionMismatch(format!(
                "cannot keep {}x{} modes of a {ny}x{nz} field",
                self.n_i, self.n_j
            )));
        }
        Ok(())
    }

    /// Channel names `xi_i_j`, row-major in `(i, j)`.
    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_i)
            .flat_map(|i| (0..self.n_j).map(move |j| mode_name(i, j)))
            .collect()
    }
}

/// Name of the channel holding mode `(i, j)`.
pub fn mode_name(i: usize, j: usize) -> String {
    format!("xi_{i}_{j}")
}

/// `cos(pi/n (k + 1/2) i)` for `i < modes`, `k < n`, row `i`.
fn cosine_table(n: usize, modes: usize) -> Vec<f64> {
    (0..modes)
        .flat_map(|i| (0..n).map(move |k| (PI / n as f64 * (k as f64 + 0.5) * i as f64).cos()))
        .collect()
}

fn weight(n: usize, i: usize) -> f64 {
    if i == 0 {
        1.0 / n as f64
    } else {
        2.0 / n as f64
    }
}

/// Forward transform restricted to the lowest `n_i x n_j` modes.
fn forward_block(frame: &FieldFrame, n_i: usize, n_j: usize, cy: &[f64], cz: &[f64]) -> Grid {
    let (ny, nz) = (frame.rows, frame.cols);
    // t[i][l] = sum_k cy[i][k] v[k][l]
    let mut t = vec![0.0; n_i * nz];
    for i in 0..n_i {
        let row = &mut t[i * nz..(i + 1) * nz];
        for k in 0..ny {
            let c = cy[i * ny + k];
            for (o, v) in row.iter_mut().zip(&frame.data[k * nz..(k + 1) * nz]) {
                *o += c * v;
            }
        }
    }
    let mut out = Grid::zeros(n_i, n_j);
    for i in 0..n_i {
        for j in 0..n_j {
            let s: f64 = t[i * nz..(i + 1) * nz]
                .iter()
                .zip(&cz[j * nz..(j + 1) * nz])
                .map(|(a, b)| a * b)
                .sum();
            out.set(i, j, weight(ny, i) * weight(nz, j) * s);
        }
    }
    out
}

/// Full forward transform of one frame.
pub fn dct2_forward(frame: &FieldFrame) -> DctCoefficients {
    let (ny, nz) = (frame.rows, frame.cols);
    forward_block(frame, ny, nz, &cosine_table(ny, ny), &cosine_table(nz, nz))
}

/// Evaluates the synthesis sum on a `ny x nz` grid. Coefficients beyond
/// the given block are treated as zero.
pub fn dct2_inverse(coeffs: &DctCoefficients, ny: usize, nz: usize) -> Result<FieldFrame> {
    let (n_i, n_j) = (coeffs.rows, coeffs.cols);
    if ny == 0 || nz == 0 || n_i > ny || n_j > nz {
        return Err(Error::DimensionMismatch(format!(
            "{n_i}x{n_j} coefficients do not fit a {ny}x{nz} field"
        )));
    }
    let cy = cosine_table(ny, n_i);
    let cz = cosine_table(nz, n_j);
    // s[i][l] = sum_j xi[i][j] cz[j][l]
    let mut s = vec![0.0; n_i * nz];
    for i in 0..n_i {
        for j in 0..n_j {
            let x = coeffs.get(i, j);
            for (o, c) in s[i * nz..(i + 1) * nz].iter_mut().zip(&cz[j * nz..(j + 1) * nz]) {
                *o += x * c;
            }
        }
    }
    let mut out = Grid::zeros(ny, nz);
    for k in 0..ny {
        for i in 0..n_i {
            let c = cy[i * ny + k];
            for l in 0..nz {
                out.data[k * nz + l] += c * s[i * nz + l];
            }
        }
    }
    Ok(out)
}

/// Compresses every frame to its lowest `n_i x n_j` modes. Channel
/// `xi_i_j` holds mode `(i, j)`; channels are ordered row-major.
pub fn reduce(frames: &FieldSequence, red: &DctReduction) -> Result<UniformSeries> {
    let (ny, nz) = frames.dims();
    red.validate(ny, nz)?;
    let cy = cosine_table(ny, red.n_i);
    let cz = cosine_table(nz, red.n_j);
    let blocks: Vec<Grid> = frames
        .frames
        .par_iter()
        .map(|f| forward_block(f, red.n_i, red.n_j, &cy, &cz))
        .collect();
    let columns = (0..red.n_i * red.n_j)
        .map(|c| blocks.iter().map(|b| b.data[c]).collect())
        .collect();
    UniformSeries::new(frames.dt, frames.t0, red.channel_names(), columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_frame(ny: usize, nz: usize, seed: u64) -> FieldFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Grid::from_fn(ny, nz, |_, _| rng.random_range(-1.0..1.0)).unwrap_or_else(|_| unreachable!())
    }

    /// Solves the full synthesis system for xi by dense LU: the naive
    /// O(N^4)-entry synthesis matrix built straight from the sum.
    fn synthesis_inverse_oracle(frame: &FieldFrame) -> Vec<f64> {
        let (ny, nz) = (frame.rows(), frame.cols());
        let n = ny * nz;
        let mut a = DMatrix::zeros(n, n);
        for k in 0..ny {
            for l in 0..nz {
                for i in 0..ny {
                    for j in 0..nz {
                        a[(k * nz + l, i * nz + j)] = (PI / ny as f64 * (k as f64 + 0.5) * i as f64).cos()
                            * (PI / nz as f64 * (l as f64 + 0.5) * j as f64).cos();
                    }
                }
            }
        }
        let b = DVector::from_column_slice(frame.data());
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn constant_field_is_pure_dc() {
        let f = Grid::from_fn(7, 5, |_, _| 2.5).unwrap();
        let xi = dct2_forward(&f);
        assert!((xi.get(0, 0) - 2.5).abs() < 1e-14);
        for (idx, v) in xi.data().iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-14, "mode {idx}: {v}");
        }
        let back = dct2_inverse(&Grid::new(1, 1, vec![2.5]).unwrap(), 7, 5).unwrap();
        assert!(back.data().iter().all(|v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn single_mode_field() {
        let ny = 11;
        let f = Grid::from_fn(ny, 6, |k, _| (PI * (k as f64 + 0.5) * 2.0 / ny as f64).cos()).unwrap();
        let xi = dct2_forward(&f);
        for i in 0..ny {
            for j in 0..6 {
                let expected = if (i, j) == (2, 0) { 1.0 } else { 0.0 };
                assert!((xi.get(i, j) - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn forward_matches_synthesis_inverse_oracle() {
        for seed in 0..3 {
            let f = random_frame(19, 19, seed);
            let xi = dct2_forward(&f);
            let oracle = synthesis_inverse_oracle(&f);
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max_abs_diff(xi.data(), &oracle) <= 1e-10 * scale);
        }
        let f = random_frame(4, 9, 7);
        assert!(max_abs_diff(dct2_forward(&f).data(), &synthesis_inverse_oracle(&f)) < 1e-12);
    }

    #[test]
    fn full_rank_round_trip() {
        let f = random_frame(19, 19, 11);
        let back = dct2_inverse(&dct2_forward(&f), 19, 19).unwrap();
        assert!(max_abs_diff(back.data(), f.data()) < 1e-12);
    }

    #[test]
    fn linearity() {
        let (f, g) = (random_frame(6, 8, 1), random_frame(6, 8, 2));
        let h = Grid::from_fn(6, 8, |r, c| 2.0 * f.get(r, c) - 0.5 * g.get(r, c)).unwrap();
        let (xf, xg, xh) = (dct2_forward(&f), dct2_forward(&g), dct2_forward(&h));
        for idx in 0..48 {
            let lhs = xh.data()[idx];
            let rhs = 2.0 * xf.data()[idx] - 0.5 * xg.data()[idx];
            assert!((lhs - rhs).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_rejects_oversized_blocks() {
        let xi = Grid::zeros(5, 3);
        assert!(matches!(dct2_inverse(&xi, 4, 4), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn reduce_channels_and_ordering() {
        let frames: Vec<_> = (0..4).map(|s| random_frame(19, 19, s)).collect();
        let seq = FieldSequence::new(0.05, 0.0, frames.clone()).unwrap();
        let out = reduce(&seq, &DctReduction::new(3, 3)).unwrap();
        assert_eq!(out.n_channels(), 9);
        assert_eq!(out.names()[0], "xi_0_0");
        assert_eq!(out.names()[5], "xi_1_2");
        assert_eq!(out.names()[8], "xi_2_2");
        for (t, f) in frames.iter().enumerate() {
            let full = dct2_forward(f);
            assert!((out.require("xi_1_2").unwrap()[t] - full.get(1, 2)).abs() < 1e-13);
        }
        let five = reduce(&seq, &DctReduction::new(5, 5)).unwrap();
        assert_eq!(five.n_channels(), 25);
        assert!(reduce(&seq, &DctReduction::new(20, 1)).is_err());
    }

    #[test]
    fn lossless_at_full_rank() {
        let frames: Vec<_> = (0..3).map(|s| random_frame(5, 4, s + 20)).collect();
        let seq = FieldSequence::new(1.0, 0.0, frames.clone()).unwrap();
        let out = reduce(&seq, &DctReduction::new(5, 4)).unwrap();
        for (t, f) in frames.iter().enumerate() {
            let xi = Grid::new(5, 4, (0..20).map(|c| out.column(c)[t]).collect()).unwrap();
            let back = dct2_inverse(&xi, 5, 4).unwrap();
            assert!(max_abs_diff(back.data(), f.data()) < 1e-10);
        }
    }

    #[test]
    fn mismatched_frames_are_rejected() {
        let r = FieldSequence::new(1.0, 0.0, vec![Grid::zeros(3, 3), Grid::zeros(3, 4)]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    /// A smooth field: a handful of low modes with decaying amplitude.
    fn smooth_field(seed: u64, n: usize) -> FieldFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xi = Grid::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let amp = rng.random_range(-1.0..1.0) / (1.0 + (i * i + j * j) as f64).powi(2);
                xi.set(i, j, amp);
            }
        }
        dct2_inverse(&xi, n, n).unwrap()
    }

    #[test]
    fn truncation_error_decreases_on_smooth_fields() {
        for seed in 0..5 {
            let f = smooth_field(seed, 19);
            let xi = dct2_forward(&f);
            let mut last = f64::INFINITY;
            for keep in 1..=19 {
                let block = Grid::from_fn(keep, keep, |i, j| xi.get(i, j)).unwrap();
                let rec = dct2_inverse(&block, 19, 19).unwrap();
                let rmse = (rec
                    .data()
                    .iter()
                    .zip(f.data())
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    / 361.0)
                    .sqrt();
                assert!(rmse <= last + 1e-15, "keep {keep}: {rmse} > {last}");
                last = rmse;
            }
            assert!(last < 1e-12);
        }
    }

    #[test]
    fn low_modes_dominate_on_smooth_fields() {
        for seed in 0..5 {
            let xi = dct2_forward(&smooth_field(seed + 100, 19));
            let energy = |i0: usize, j0: usize| {
                (i0..i0 + 3)
                    .flat_map(|i| (j0..j0 + 3).map(move |j| (i, j)))
                    .map(|(i, j)| xi.get(i, j).powi(2))
                    .sum::<f64>()
            };
            let low = energy(0, 0);
            for i0 in 3..=16 {
                for j0 in 3..=16 {
                    assert!(low >= energy(i0, j0));
                }
            }
        }
    }
}
