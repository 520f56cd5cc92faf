//! Slow, dense reference solver for small instances.
//!
//! Solves the same group-norm program as the ADMM engine by a different
//! route: the objective is Huber-smoothed with parameter `μ`, minimised by
//! accelerated projected gradient (with function-value restarts) over the
//! feasible set, and `μ` is driven towards zero by continuation. The
//! feasible-set projection uses an SVD of the explicit matrix `A` rather
//! than the sensing map's Gram factorisation. Several starting points are
//! tried and the best feasible objective is kept.
//!
//! Intended for `n ≤ 64`; accuracy is about `1e-4` relative on the
//! objective.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::prox::group_norm_sum;
use super::{equality_radius, Partition, Program};
use crate::bandplan::IndexRange;
use crate::linalg::{norm2, ZERO};
use crate::sampling::MeasurementOperator;

const MU_START: f64 = 0.1;
const MU_STOP: f64 = 1e-8;
const MU_FACTOR: f64 = 0.1;
const STAGE_ITERS: usize = 4000;
const RANDOM_STARTS: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub objective: f64,
    pub solution: Vec<Complex64>,
    /// `‖A x − y‖₂` at the returned solution.
    pub residual_norm: f64,
}

/// `A = Φ F⁻¹` as an explicit matrix, with the inverse DFT written out
/// entry by entry as `e^{+2πi tk/n}/√n`.
pub fn dense_sensing_matrix(op: &MeasurementOperator) -> DMatrix<Complex64> {
    let (m, n) = (op.m(), op.n());
    let phi = op.dense();
    let s = 1.0 / (n as f64).sqrt();
    let finv = DMatrix::from_fn(n, n, |t, k| {
        let angle = 2.0 * std::f64::consts::PI * ((t * k) % n) as f64 / n as f64;
        Complex64::from_polar(s, angle)
    });
    let phi = DMatrix::from_fn(m, n, |i, j| Complex64::new(phi[i * n + j], 0.0));
    phi * finv
}

pub fn reference_solve(
    program: Program,
    a: &DMatrix<Complex64>,
    y: &[Complex64],
    groups: &Partition,
    bound: f64,
) -> ReferenceSolution {
    let (m, n) = a.shape();
    assert_eq!(y.len(), m, "y length must match the rows of A");
    assert_eq!(groups.n(), n, "groups must cover the columns of A");
    let y_norm = norm2(y);
    let radius = if program.is_equality() {
        equality_radius(y_norm)
    } else {
        bound.max(equality_radius(y_norm))
    };
    if y_norm <= radius {
        return ReferenceSolution {
            objective: 0.0,
            solution: vec![ZERO; n],
            residual_norm: y_norm,
        };
    }

    let proj = Projector::new(a, y, radius);
    let aty: Vec<Complex64> = (a.adjoint() * DVector::from_column_slice(y))
        .iter()
        .cloned()
        .collect();
    let scale = norm2(&aty).max(f64::MIN_POSITIVE);

    let mut starts = vec![vec![ZERO; n], aty.clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..RANDOM_STARTS {
        let v: Vec<Complex64> = (0..n)
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                ) * (scale / (n as f64).sqrt())
            })
            .collect();
        starts.push(v);
    }

    let ranges = groups.ranges();
    let mut best: Option<(f64, Vec<Complex64>)> = None;
    for start in starts {
        let x = continuation(&proj, ranges, proj.project(&start), scale);
        let obj = group_norm_sum(&x, ranges);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    let (objective, solution) = best.expect("at least one start");
    let residual_norm = proj.residual_norm(&solution);
    ReferenceSolution {
        objective,
        solution,
        residual_norm,
    }
}

fn continuation(
    proj: &Projector,
    groups: &[IndexRange],
    mut x: Vec<Complex64>,
    scale: f64,
) -> Vec<Complex64> {
    let mut mu = MU_START * scale;
    while mu >= MU_STOP * scale {
        x = fista_stage(proj, groups, x, mu, scale);
        mu *= MU_FACTOR;
    }
    x
}

fn huber(v: &[Complex64], groups: &[IndexRange], mu: f64) -> f64 {
    groups
        .iter()
        .map(|g| {
            let t = norm2(&v[g.range()]);
            if t <= mu {
                t * t / (2.0 * mu)
            } else {
                t - mu / 2.0
            }
        })
        .sum()
}

fn huber_grad(v: &[Complex64], groups: &[IndexRange], mu: f64) -> Vec<Complex64> {
    let mut g = vec![ZERO; v.len()];
    for grp in groups {
        let t = norm2(&v[grp.range()]).max(mu);
        for k in grp.range() {
            g[k] = v[k] / t;
        }
    }
    g
}

fn fista_stage(
    proj: &Projector,
    groups: &[IndexRange],
    x0: Vec<Complex64>,
    mu: f64,
    scale: f64,
) -> Vec<Complex64> {
    // gradient of the smoothed objective is (1/μ)-Lipschitz
    let step = mu;
    let mut x = x0;
    let mut fx = huber(&x, groups, mu);
    let mut yk = x.clone();
    let mut t = 1.0f64;
    for _ in 0..STAGE_ITERS {
        let g = huber_grad(&yk, groups, mu);
        let trial: Vec<Complex64> = yk.iter().zip(&g).map(|(a, b)| a - b * step).collect();
        let x_new = proj.project(&trial);
        let f_new = huber(&x_new, groups, mu);
        if f_new > fx && t > 1.0 {
            // restart momentum from the last accepted point
            yk = x.clone();
            t = 1.0;
            continue;
        }
        let moved = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_new;
        yk = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| a + (a - b) * beta)
            .collect();
        x = x_new;
        fx = f_new;
        t = t_new;
        if moved <= 1e-12 * scale {
            break;
        }
    }
    x
}

/// Exact projection onto `{x : ‖A x − y‖₂ ≤ η}` via the thin SVD of `A`.
struct Projector {
    a: DMatrix<Complex64>,
    y: DVector<Complex64>,
    u: DMatrix<Complex64>,
    v_t: DMatrix<Complex64>,
    sigma: Vec<f64>,
    eta: f64,
}

impl Projector {
    fn new(a: &DMatrix<Complex64>, y: &[Complex64], eta: f64) -> Self {
        let svd = a.clone().svd(true, true);
        Self {
            a: a.clone(),
            y: DVector::from_column_slice(y),
            u: svd.u.expect("requested U"),
            v_t: svd.v_t.expect("requested V^T"),
            sigma: svd.singular_values.iter().cloned().collect(),
            eta,
        }
    }

    fn residual_norm(&self, x: &[Complex64]) -> f64 {
        (&self.a * DVector::from_column_slice(x) - &self.y).norm()
    }

    fn project(&self, p: &[Complex64]) -> Vec<Complex64> {
        let pv = DVector::from_column_slice(p);
        let e = &self.a * &pv - &self.y;
        let ne = e.norm();
        if ne <= self.eta {
            return p.to_vec();
        }
        let c = self.u.adjoint() * &e;
        let perp2 = (ne * ne - c.norm_squared()).max(0.0);
        let smax = self.sigma.iter().cloned().fold(0.0, f64::max);
        let floor = 1e-12 * smax.max(f64::MIN_POSITIVE);
        let residual2 = |t: f64| -> f64 {
            perp2
                + c.iter()
                    .zip(&self.sigma)
                    .map(|(ci, &s)| {
                        let f = if s <= floor { 1.0 } else { t / (s * s + t) };
                        ci.norm_sqr() * f * f
                    })
                    .sum::<f64>()
        };
        let eta2 = self.eta * self.eta;
        let t = if residual2(0.0) >= eta2 {
            0.0
        } else {
            // safeguarded Newton on the increasing secular function
            let phi = |t: f64| -> (f64, f64) {
                let mut v = perp2 - eta2;
                let mut dv = 0.0;
                for (ci, &s) in c.iter().zip(&self.sigma) {
                    if s <= floor {
                        v += ci.norm_sqr();
                    } else {
                        let d = s * s + t;
                        v += ci.norm_sqr() * t * t / (d * d);
                        dv += ci.norm_sqr() * 2.0 * t * s * s / (d * d * d);
                    }
                }
                (v, dv)
            };
            let mut hi = (smax * smax).max(1e-300);
            while phi(hi).0 < 0.0 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            let mut t = 0.5 * hi;
            for _ in 0..200 {
                let (v, dv) = phi(t);
                if v <= 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
                if v.abs() <= 1e-14 * eta2 || hi - lo <= 1e-15 * hi {
                    break;
                }
                let newton = t - v / dv;
                t = if dv > 0.0 && newton > lo && newton < hi {
                    newton
                } else {
                    0.5 * (lo + hi)
                };
            }
            t
        };
        let coef = DVector::from_iterator(
            c.len(),
            c.iter().zip(&self.sigma).map(|(ci, &s)| {
                if s <= floor {
                    ZERO
                } else {
                    ci * (s / (s * s + t))
                }
            }),
        );
        let step = self.v_t.adjoint() * coef;
        (pv - step).iter().cloned().collect()
    }
}
