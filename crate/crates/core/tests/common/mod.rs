#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spectrum_cs::bandplan::IndexRange;
use spectrum_cs::sampling::{
    make_operator, sensing_map, MeasurementOperator, OperatorKind, SensingMap,
};
use spectrum_cs::solvers::Partition;

pub const KINDS: [OperatorKind; 3] = [
    OperatorKind::Selection,
    OperatorKind::Gaussian,
    OperatorKind::Bernoulli,
];

pub fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn operator(
    kind: OperatorKind,
    m: usize,
    n: usize,
    seed: u64,
) -> (Arc<MeasurementOperator>, SensingMap) {
    let op = Arc::new(make_operator(kind, m, n, seed).unwrap());
    let map = sensing_map(op.clone(), n).unwrap();
    (op, map)
}

pub fn dmat_apply(a: &DMatrix<Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    (a * DVector::from_column_slice(x))
        .iter()
        .cloned()
        .collect()
}

pub fn rel_err(x: &[Complex64], truth: &[Complex64]) -> f64 {
    let d: f64 = x
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let t: f64 = truth.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    d / t
}

/// Random partition of `0..n` into sections of length `min_len..=max_len`
/// that contains `[fixed.start, fixed.end())` as one section.
pub fn random_sections(
    n: usize,
    fixed: IndexRange,
    max_len: usize,
    rng: &mut ChaCha8Rng,
) -> Partition {
    let mut ranges = Vec::new();
    let fill = |lo: usize, hi: usize, ranges: &mut Vec<IndexRange>, rng: &mut ChaCha8Rng| {
        let mut s = lo;
        while s < hi {
            let len = rng.random_range(1..=max_len).min(hi - s);
            ranges.push(IndexRange::new(s, len));
            s += len;
        }
    };
    fill(0, fixed.start, &mut ranges, rng);
    ranges.push(fixed);
    fill(fixed.end(), n, &mut ranges, rng);
    Partition::new(n, ranges).unwrap()
}

/// Least-squares solution over the sparsest support (size `<= max_s`) that
/// fits `y` to relative residual `tol`, found by exhaustive enumeration.
pub fn exhaustive_support_ls(
    a: &DMatrix<Complex64>,
    y: &[Complex64],
    max_s: usize,
    tol: f64,
) -> Option<Vec<Complex64>> {
    let n = a.ncols();
    let yv = DVector::from_column_slice(y);
    let y_norm = yv.norm();
    if y_norm == 0.0 {
        return Some(vec![Complex64::new(0.0, 0.0); n]);
    }
    for s in 1..=max_s {
        let mut support: Vec<usize> = (0..s).collect();
        loop {
            let sub = DMatrix::from_fn(a.nrows(), s, |i, j| a[(i, support[j])]);
            let qr = sub.clone().qr();
            let rhs = qr.q().adjoint() * &yv;
            if let Some(coef) = qr.r().solve_upper_triangular(&rhs) {
                let res = (&sub * &coef - &yv).norm();
                if res <= tol * y_norm {
                    let mut x = vec![Complex64::new(0.0, 0.0); n];
                    for (j, &k) in support.iter().enumerate() {
                        x[k] = coef[j];
                    }
                    return Some(x);
                }
            }
            // next combination in lexicographic order
            let mut advanced = false;
            let mut i = s;
            while i > 0 {
                i -= 1;
                if support[i] < n - s + i {
                    support[i] += 1;
                    for j in i + 1..s {
                        support[j] = support[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    None
}
