//! ADMM for `min Σ_g ‖r_g‖₂  s.t.  ‖A r − y‖₂ ≤ η`.
//!
//! The program is split as
//!
//! ```text
//! min  Σ_g ‖z_g‖₂ + 𝟙{‖w − y‖₂ ≤ η}   s.t.  z = r,  w = A r
//! ```
//!
//! which is two-block ADMM in `r` and `(z, w)`. With scaled duals `u, v`:
//!
//! ```text
//! r ← (I + AᴴA)⁻¹ (z − u + Aᴴ(w − v))
//! z ← prox_{‖·‖/ρ}(r + u)            group by group
//! w ← Π_{‖·−y‖≤η}(A r + v)
//! u ← u + r − z,   v ← v + A r − w
//! ```
//!
//! The iteration runs on `y / ‖y‖₂` so every program is positively
//! homogeneous in `(y, η)` and the default `ρ = 1` is scale-appropriate.
//! The returned estimate is the group-sparse iterate `z` projected exactly
//! onto the feasible set, so a converged result is always feasible.

use num_complex::Complex64;

use super::prox::{group_norm_sum, project_l2_ball_in_place, prox_groups_in_place};
use super::{Partition, SolveResult};
use crate::linalg::{dist, norm2, norm_sqr, sub, ZERO};
use crate::sampling::SensingMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
}

/// Relative slack allowed on the residual bound of a converged result.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

const ADAPT_EVERY: usize = 10;
const ADAPT_RATIO: f64 = 10.0;
const ADAPT_FACTOR: f64 = 2.0;

pub fn solve_group_constrained(
    a: &SensingMap,
    y: &[Complex64],
    groups: &Partition,
    radius: f64,
    settings: &AdmmSettings,
) -> SolveResult {
    let n = a.n();
    let m = a.m();
    let scale = norm2(y);
    if scale <= radius || scale == 0.0 {
        return SolveResult {
            r_hat: vec![ZERO; n],
            objective: 0.0,
            residual_norm: scale,
            bound: radius,
            iterations: 0,
            converged: true,
            primal_residual: 0.0,
            dual_residual: 0.0,
            primal_tolerance: 0.0,
            dual_tolerance: 0.0,
            rho: settings.rho,
        };
    }
    let yn: Vec<Complex64> = y.iter().map(|v| v / scale).collect();
    let eta = radius / scale;
    let ranges = groups.ranges();

    let mut rho = settings.rho;
    let mut z = a.adjoint(&yn);
    let mut w = a.forward(&z);
    project_l2_ball_in_place(&mut w, &yn, eta);
    let mut u = vec![ZERO; n];
    let mut v = vec![ZERO; m];

    let sqrt_pri = ((n + m) as f64).sqrt();
    let sqrt_dual = (n as f64).sqrt();
    let mut converged = false;
    let mut iterations = 0;
    let (mut primal, mut dual, mut eps_pri, mut eps_dual) =
        (f64::INFINITY, f64::INFINITY, 0.0, 0.0);

    for k in 1..=settings.max_iters {
        iterations = k;
        let wv: Vec<Complex64> = w.iter().zip(&v).map(|(a, b)| a - b).collect();
        let back = a.adjoint(&wv);
        let b: Vec<Complex64> = z
            .iter()
            .zip(&u)
            .zip(&back)
            .map(|((zi, ui), bi)| zi - ui + bi)
            .collect();
        let (r, ar) = a.regularized_solve(&b);

        let z_old = std::mem::take(&mut z);
        let w_old = std::mem::take(&mut w);
        z = r.iter().zip(&u).map(|(a, b)| a + b).collect();
        prox_groups_in_place(&mut z, ranges, 1.0 / rho);
        w = ar.iter().zip(&v).map(|(a, b)| a + b).collect();
        project_l2_ball_in_place(&mut w, &yn, eta);

        for ((ui, ri), zi) in u.iter_mut().zip(&r).zip(&z) {
            *ui += ri - zi;
        }
        for ((vi, ai), wi) in v.iter_mut().zip(&ar).zip(&w) {
            *vi += ai - wi;
        }

        primal = (norm_sqr(&sub(&r, &z)) + norm_sqr(&sub(&ar, &w))).sqrt();
        let dw = a.adjoint(&sub(&w, &w_old));
        dual = rho
            * z.iter()
                .zip(&z_old)
                .zip(&dw)
                .map(|((a, b), c)| (a - b + c).norm_sqr())
                .sum::<f64>()
                .sqrt();
        eps_pri = sqrt_pri * settings.abs_tol
            + settings.rel_tol
                * (norm_sqr(&r) + norm_sqr(&ar))
                    .sqrt()
                    .max((norm_sqr(&z) + norm_sqr(&w)).sqrt());
        if primal <= eps_pri {
            eps_dual = dual_tolerance(a, &u, &v, rho, sqrt_dual, settings);
            if dual <= eps_dual {
                converged = true;
                break;
            }
        }

        if settings.adaptive_rho && k % ADAPT_EVERY == 0 {
            let factor = if primal > ADAPT_RATIO * dual {
                ADAPT_FACTOR
            } else if dual > ADAPT_RATIO * primal {
                1.0 / ADAPT_FACTOR
            } else {
                1.0
            };
            if factor != 1.0 {
                rho *= factor;
                u.iter_mut().for_each(|x| *x /= factor);
                v.iter_mut().for_each(|x| *x /= factor);
            }
        }
    }

    if !converged {
        eps_dual = dual_tolerance(a, &u, &v, rho, sqrt_dual, settings);
    }

    let mut r_hat = a.project_feasible(&z, &yn, eta);
    let residual_n = dist(&a.forward(&r_hat), &yn);
    if residual_n > eta * (1.0 + FEASIBILITY_SLACK) {
        converged = false;
    }
    r_hat.iter_mut().for_each(|x| *x *= scale);
    SolveResult {
        objective: group_norm_sum(&r_hat, ranges),
        residual_norm: residual_n * scale,
        r_hat,
        bound: radius,
        iterations,
        converged,
        primal_residual: primal * scale,
        dual_residual: dual * scale,
        primal_tolerance: eps_pri * scale,
        dual_tolerance: eps_dual * scale,
        rho,
    }
}

/// `√n·abs_tol + rel_tol·ρ‖u + Aᴴv‖`, the dual stopping threshold.
fn dual_tolerance(
    a: &SensingMap,
    u: &[Complex64],
    v: &[Complex64],
    rho: f64,
    sqrt_dual: f64,
    settings: &AdmmSettings,
) -> f64 {
    let atv = a.adjoint(v);
    let y_norm = u
        .iter()
        .zip(&atv)
        .map(|(a, b)| (a + b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    sqrt_dual * settings.abs_tol + settings.rel_tol * rho * y_norm
}
