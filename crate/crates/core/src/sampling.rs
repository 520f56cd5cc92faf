//! Sub-Nyquist measurement operators and the composed sensing map.
//!
//! A [`MeasurementOperator`] is the digital stand-in for the random sampler:
//! random row selection of the identity (non-uniform subsampling), or a
//! dense Gaussian / Bernoulli matrix `Φ`. The [`SensingMap`] composes it
//! with the unitary inverse DFT, `A = Φ F⁻¹`, and offers the forward and
//! adjoint applies plus the two linear-algebra kernels the solvers need:
//! `(I + AᴴA)⁻¹` and the exact Euclidean projection onto
//! `{r : ‖A r − y‖₂ ≤ η}`.
//!
//! Both kernels go through `G = A Aᴴ = Φ Φᵀ`, a real symmetric `M × M`
//! matrix. For selection operators `G = I`; otherwise `G` is
//! eigendecomposed once per map and cached.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{seq::index, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dft::UnitaryDft;
use crate::linalg::{norm2, norm_sqr, ZERO};
use crate::sigmodel::TimeSignal;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("measurement count m = {m} must satisfy 1 <= m <= n = {n}")]
    BadDimensions { m: usize, n: usize },
    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("selection row {row} is out of range or repeated (n = {n})")]
    BadRow { row: usize, n: usize },
    #[error("sparsity s = {s} must satisfy 1 <= s <= m = {m}, with at least one trial")]
    BadSparsity { s: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Selection,
    Gaussian,
    Bernoulli,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorKind::Selection => "selection",
            OperatorKind::Gaussian => "gaussian",
            OperatorKind::Bernoulli => "bernoulli",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Rows(Vec<usize>),
    /// Row-major `m × n`.
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementOperator {
    kind: OperatorKind,
    m: usize,
    n: usize,
    seed: u64,
    repr: Repr,
}

/// Compressed samples `y = Φ x`. Imaginary parts are zero for real signals.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<Complex64>,
}

impl MeasurementVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

/// Draws an operator. Selection rows are `m` distinct indices chosen
/// uniformly and stored in ascending (sampling-time) order. Gaussian entries
/// are i.i.d. `N(0, 1/m)`; Bernoulli entries are `±1/√n` with equal odds.
pub fn make_operator(
    kind: OperatorKind,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<MeasurementOperator, SamplingError> {
    if m == 0 || m > n {
        return Err(SamplingError::BadDimensions { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let repr = match kind {
        OperatorKind::Selection => {
            let mut rows = index::sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            Repr::Rows(rows)
        }
        OperatorKind::Gaussian => {
            let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive m");
            Repr::Dense((0..m * n).map(|_| normal.sample(&mut rng)).collect())
        }
        OperatorKind::Bernoulli => {
            let a = 1.0 / (n as f64).sqrt();
            Repr::Dense(
                (0..m * n)
                    .map(|_| if rng.random::<bool>() { a } else { -a })
                    .collect(),
            )
        }
    };
    Ok(MeasurementOperator {
        kind,
        m,
        n,
        seed,
        repr,
    })
}

impl MeasurementOperator {
    /// Selection operator with explicit rows, e.g. restored from a dump.
    pub fn from_rows(n: usize, rows: Vec<usize>, seed: u64) -> Result<Self, SamplingError> {
        let m = rows.len();
        if m == 0 || m > n {
            return Err(SamplingError::BadDimensions { m, n });
        }
        let mut seen = vec![false; n];
        for &row in &rows {
            if row >= n || seen[row] {
                return Err(SamplingError::BadRow { row, n });
            }
            seen[row] = true;
        }
        Ok(Self {
            kind: OperatorKind::Selection,
            m,
            n,
            seed,
            repr: Repr::Rows(rows),
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Selected row indices, for selection operators.
    pub fn rows(&self) -> Option<&[usize]> {
        match &self.repr {
            Repr::Rows(r) => Some(r),
            Repr::Dense(_) => None,
        }
    }

    /// `Φ` as a row-major `m × n` matrix.
    pub fn dense(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Dense(d) => d.clone(),
            Repr::Rows(rows) => {
                let mut d = vec![0.0; self.m * self.n];
                for (i, &r) in rows.iter().enumerate() {
                    d[i * self.n + r] = 1.0;
                }
                d
            }
        }
    }

    /// `Φ x` on a raw complex vector of length `n`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        match &self.repr {
            Repr::Rows(rows) => rows.iter().map(|&r| x[r]).collect(),
            Repr::Dense(d) => d
                .chunks_exact(self.n)
                .map(|row| row.iter().zip(x).map(|(a, v)| v * *a).sum())
                .collect(),
        }
    }

    /// `Φᵀ y` on a raw complex vector of length `m`.
    pub fn apply_transpose(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.m);
        let mut out = vec![ZERO; self.n];
        match &self.repr {
            Repr::Rows(rows) => {
                for (&r, v) in rows.iter().zip(y) {
                    out[r] += v;
                }
            }
            Repr::Dense(d) => {
                for (row, v) in d.chunks_exact(self.n).zip(y) {
                    for (o, a) in out.iter_mut().zip(row) {
                        *o += v * *a;
                    }
                }
            }
        }
        out
    }

    /// `Φ Φᵀ` as a dense symmetric matrix.
    fn gram_matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Rows(_) => DMatrix::identity(self.m, self.m),
            Repr::Dense(d) => {
                let rows: Vec<&[f64]> = d.chunks_exact(self.n).collect();
                DMatrix::from_fn(self.m, self.m, |i, j| {
                    rows[i].iter().zip(rows[j]).map(|(a, b)| a * b).sum()
                })
            }
        }
    }
}

pub fn measure(
    op: &MeasurementOperator,
    x: &TimeSignal,
) -> Result<MeasurementVector, SamplingError> {
    if x.len() != op.n {
        return Err(SamplingError::DimensionMismatch {
            expected: op.n,
            got: x.len(),
        });
    }
    Ok(MeasurementVector {
        values: op.apply(&x.samples),
    })
}

/// Monte Carlo lower bound on the restricted isometry constant `δ_s` of
/// `Φ`: the largest `|‖Φv‖² − 1|` seen over `trials` random unit vectors
/// with `s` nonzeros. The true constant is a maximum over all supports, so
/// this can only under-estimate it.
pub fn estimate_rip_constant(
    op: &MeasurementOperator,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<f64, SamplingError> {
    if s == 0 || s > op.m || trials == 0 {
        return Err(SamplingError::BadSparsity { s, m: op.m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut v = vec![ZERO; op.n];
    for _ in 0..trials {
        v.iter_mut().for_each(|z| *z = ZERO);
        let support = index::sample(&mut rng, op.n, s);
        for k in support.iter() {
            v[k] = Complex64::new(StandardNormal.sample(&mut rng), 0.0);
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|z| *z /= nv);
        let gain = norm_sqr(&op.apply(&v));
        worst = worst.max((gain - 1.0).abs());
    }
    Ok(worst)
}

#[derive(Debug)]
enum Gram {
    Identity,
    /// `G = Q diag(λ) Qᵀ`.
    Eigen {
        q: DMatrix<f64>,
        lambda: Vec<f64>,
    },
}

/// The linear map `A = Φ F⁻¹` from spectra to measurements.
#[derive(Clone)]
pub struct SensingMap {
    op: Arc<MeasurementOperator>,
    dft: UnitaryDft,
    gram: Arc<OnceLock<Gram>>,
}

impl fmt::Debug for SensingMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SensingMap")
            .field("kind", &self.op.kind)
            .field("m", &self.op.m)
            .field("n", &self.op.n)
            .finish()
    }
}

pub fn sensing_map(
    op: Arc<MeasurementOperator>,
    n_bins: usize,
) -> Result<SensingMap, SamplingError> {
    if op.n != n_bins {
        return Err(SamplingError::DimensionMismatch {
            expected: op.n,
            got: n_bins,
        });
    }
    Ok(SensingMap {
        dft: UnitaryDft::new(n_bins),
        op,
        gram: Arc::new(OnceLock::new()),
    })
}

impl SensingMap {
    pub fn operator(&self) -> &Arc<MeasurementOperator> {
        &self.op
    }

    pub fn m(&self) -> usize {
        self.op.m
    }

    pub fn n(&self) -> usize {
        self.op.n
    }

    /// True when `A Aᴴ = I`.
    pub fn has_orthonormal_rows(&self) -> bool {
        self.op.kind == OperatorKind::Selection
    }

    pub fn forward(&self, r: &[Complex64]) -> Vec<Complex64> {
        let mut x = r.to_vec();
        self.dft.inverse_in_place(&mut x);
        self.op.apply(&x)
    }

    pub fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut x = self.op.apply_transpose(y);
        self.dft.forward_in_place(&mut x);
        x
    }

    fn gram(&self) -> &Gram {
        self.gram.get_or_init(|| {
            if self.has_orthonormal_rows() {
                Gram::Identity
            } else {
                let eig = SymmetricEigen::new(self.op.gram_matrix());
                Gram::Eigen {
                    q: eig.eigenvectors,
                    lambda: eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect(),
                }
            }
        })
    }

    /// Returns `r = (I + AᴴA)⁻¹ b` together with `A r`.
    pub fn regularized_solve(&self, b: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let ab = self.forward(b);
        match self.gram() {
            Gram::Identity => {
                // (I + AᴴA)⁻¹ = I − ½AᴴA and A(I + AᴴA)⁻¹ = ½A when AAᴴ = I
                let half: Vec<Complex64> = ab.iter().map(|v| v * 0.5).collect();
                let back = self.adjoint(&half);
                let r = b.iter().zip(&back).map(|(x, y)| x - y).collect();
                (r, half)
            }
            Gram::Eigen { q, lambda } => {
                let c = apply_qt(q, &ab);
                let w = apply_q(q, &scaled(&c, lambda, |l| 1.0 / (1.0 + l)));
                let gw = apply_q(q, &scaled(&c, lambda, |l| l / (1.0 + l)));
                let back = self.adjoint(&w);
                let r = b.iter().zip(&back).map(|(x, y)| x - y).collect();
                let ar = ab.iter().zip(&gw).map(|(x, y)| x - y).collect();
                (r, ar)
            }
        }
    }

    /// Euclidean projection of `p` onto `{r : ‖A r − y‖₂ ≤ eta}`.
    ///
    /// The minimiser has the form `p − Aᴴ (G + tI)⁻¹ e` with `e = A p − y`,
    /// and its residual `t (G + tI)⁻¹ e` grows monotonically in `t`, so `t`
    /// is found by bisection on the residual norm.
    pub fn project_feasible(&self, p: &[Complex64], y: &[Complex64], eta: f64) -> Vec<Complex64> {
        let ap = self.forward(p);
        let e: Vec<Complex64> = ap.iter().zip(y).map(|(a, b)| a - b).collect();
        let ne = norm2(&e);
        if ne <= eta {
            return p.to_vec();
        }
        match self.gram() {
            Gram::Identity => {
                let shrink = 1.0 - eta / ne;
                let e: Vec<Complex64> = e.iter().map(|v| v * shrink).collect();
                let back = self.adjoint(&e);
                p.iter().zip(&back).map(|(a, b)| a - b).collect()
            }
            Gram::Eigen { q, lambda } => {
                let c = apply_qt(q, &e);
                let lmax = lambda.iter().cloned().fold(0.0, f64::max);
                let floor = 1e-13 * lmax.max(f64::MIN_POSITIVE);
                let residual = |t: f64| -> f64 {
                    c.iter()
                        .zip(lambda)
                        .map(|(ci, &l)| {
                            let f = if l <= floor { 1.0 } else { t / (l + t) };
                            (ci * f).norm_sqr()
                        })
                        .sum::<f64>()
                        .sqrt()
                };
                let t = if eta == 0.0 {
                    0.0
                } else {
                    let mut hi = lmax.max(1.0);
                    while residual(hi) < eta {
                        hi *= 2.0;
                    }
                    let mut lo = 0.0;
                    for _ in 0..200 {
                        let mid = 0.5 * (lo + hi);
                        if mid <= lo || mid >= hi {
                            break;
                        }
                        if residual(mid) <= eta {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    lo
                };
                let coef = scaled(&c, lambda, |l| if l <= floor { 0.0 } else { 1.0 / (l + t) });
                let back = self.adjoint(&apply_q(q, &coef));
                p.iter().zip(&back).map(|(a, b)| a - b).collect()
            }
        }
    }

    /// Power-iteration estimate of the spectral norm `‖A‖₂`.
    pub fn operator_norm_estimate(&self, iters: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..self.n())
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect();
        let mut sigma = 0.0;
        for _ in 0..iters {
            let nv = norm2(&v);
            if nv == 0.0 {
                return 0.0;
            }
            v.iter_mut().for_each(|z| *z /= nv);
            let av = self.forward(&v);
            sigma = norm2(&av);
            v = self.adjoint(&av);
        }
        sigma
    }
}

fn scaled(c: &[Complex64], lambda: &[f64], f: impl Fn(f64) -> f64) -> Vec<Complex64> {
    c.iter().zip(lambda).map(|(ci, &l)| ci * f(l)).collect()
}

fn apply_qt(q: &DMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..q.ncols())
        .map(|j| q.column(j).iter().zip(v).map(|(a, z)| z * *a).sum())
        .collect()
}

fn apply_q(q: &DMatrix<f64>, c: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; q.nrows()];
    for (j, cj) in c.iter().enumerate() {
        for (o, a) in out.iter_mut().zip(q.column(j).iter()) {
            *o += cj * *a;
        }
    }
    out
}
