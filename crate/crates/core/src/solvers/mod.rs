//! Spectrum recovery programs.
//!
//! All four programs minimise a sum of group `ℓ2` norms under an `ℓ2`
//! residual bound and share one ADMM engine:
//!
//! | program      | groups                   | residual bound |
//! |--------------|--------------------------|----------------|
//! | `bp`         | singletons               | equality       |
//! | `lasso`      | singletons               | `ε`            |
//! | `block_l2l1` | equal blocks of `d0`     | equality       |
//! | `mndo`       | band-plan sections       | `η`            |
//!
//! Equality is enforced as a ball of radius
//! `max(1e-9, 1e-8·‖y‖₂)`; any smaller requested bound is raised to it.

mod admm;
pub mod prox;
pub mod reference;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandplan::IndexRange;
use crate::linalg::norm2;
use crate::sampling::SensingMap;

pub use admm::{AdmmSettings, FEASIBILITY_SLACK};
pub use prox::{group_norm_sum, project_l2_ball, prox_group_l2};
pub use reference::{dense_sensing_matrix, reference_solve, ReferenceSolution};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("block length d0 = {d0} does not divide n = {n}")]
    BlockSize { d0: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid solver setting: {0}")]
    Config(String),
    #[error("unknown program '{0}' (expected bp, lasso, block_l2l1 or mndo)")]
    UnknownProgram(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Program {
    Bp,
    Lasso,
    BlockL2l1,
    Mndo,
}

impl Program {
    pub const ALL: [Program; 4] = [
        Program::Bp,
        Program::Lasso,
        Program::BlockL2l1,
        Program::Mndo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Program::Bp => "bp",
            Program::Lasso => "lasso",
            Program::BlockL2l1 => "block_l2l1",
            Program::Mndo => "mndo",
        }
    }

    /// Programs whose constraint is `A r = y`.
    pub fn is_equality(self) -> bool {
        matches!(self, Program::Bp | Program::BlockL2l1)
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Program {
    type Err = SolveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Program::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| SolveError::UnknownProgram(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    Absolute,
    /// Multiplied by `‖y‖₂`.
    #[default]
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bound {
    pub value: f64,
    #[serde(default)]
    pub mode: BoundMode,
}

impl Bound {
    pub fn relative(value: f64) -> Self {
        Self {
            value,
            mode: BoundMode::Relative,
        }
    }

    pub fn absolute(value: f64) -> Self {
        Self {
            value,
            mode: BoundMode::Absolute,
        }
    }

    pub fn resolve(&self, y_norm: f64) -> f64 {
        match self.mode {
            BoundMode::Absolute => self.value,
            BoundMode::Relative => self.value * y_norm,
        }
    }
}

/// Ball radius standing in for an equality constraint.
pub fn equality_radius(y_norm: f64) -> f64 {
    (1e-8 * y_norm).max(1e-9)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub program: Program,
    /// Residual bound for `lasso`.
    pub epsilon: Bound,
    /// Residual bound for `mndo`.
    pub eta: Bound,
    /// Block length for `block_l2l1`.
    pub d0: usize,
    pub max_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            program: Program::Mndo,
            epsilon: Bound::relative(0.1),
            eta: Bound::relative(0.5),
            d0: 1,
            max_iters: 5000,
            abs_tol: 1e-6,
            rel_tol: 1e-5,
            rho: 1.0,
            adaptive_rho: true,
        }
    }
}

impl SolverConfig {
    pub fn new(program: Program) -> Self {
        Self {
            program,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |what: &str| Err(SolveError::Config(what.to_string()));
        if !(self.epsilon.value >= 0.0 && self.epsilon.value.is_finite()) {
            return bad("epsilon must be finite and >= 0");
        }
        if !(self.eta.value >= 0.0 && self.eta.value.is_finite()) {
            return bad("eta must be finite and >= 0");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be > 0");
        }
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if self.program == Program::BlockL2l1 && self.d0 == 0 {
            return bad("d0 must be >= 1");
        }
        Ok(())
    }

    fn settings(&self) -> AdmmSettings {
        AdmmSettings {
            max_iters: self.max_iters,
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            rho: self.rho,
            adaptive_rho: self.adaptive_rho,
        }
    }

    /// Residual radius actually enforced for measurements of norm `y_norm`.
    pub fn effective_bound(&self, y_norm: f64) -> f64 {
        let floor = equality_radius(y_norm);
        match self.program {
            Program::Bp | Program::BlockL2l1 => floor,
            Program::Lasso => self.epsilon.resolve(y_norm).max(floor),
            Program::Mndo => self.eta.resolve(y_norm).max(floor),
        }
    }
}

/// Ordered, exhaustive partition of `0..n` into groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    ranges: Vec<IndexRange>,
}

impl Partition {
    pub fn new(n: usize, ranges: Vec<IndexRange>) -> Result<Self, SolveError> {
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.len == 0 {
                return Err(SolveError::Dimension(format!(
                    "groups must tile 0..{n} contiguously; bad group at {}..{}",
                    r.start,
                    r.end()
                )));
            }
            next = r.end();
        }
        if next != n {
            return Err(SolveError::Dimension(format!(
                "groups cover 0..{next} but n = {n}"
            )));
        }
        Ok(Self { n, ranges })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            ranges: (0..n).map(|i| IndexRange::new(i, 1)).collect(),
        }
    }

    pub fn equal_blocks(n: usize, d0: usize) -> Result<Self, SolveError> {
        if d0 == 0 || !n.is_multiple_of(d0) {
            return Err(SolveError::BlockSize { d0, n });
        }
        Ok(Self {
            n,
            ranges: (0..n / d0).map(|i| IndexRange::new(i * d0, d0)).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn ranges(&self) -> &[IndexRange] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub r_hat: Vec<Complex64>,
    /// `Σ_g ‖r̂_g‖₂` over the program's groups (`‖r̂‖₁` for singletons).
    pub objective: f64,
    /// `‖y − A r̂‖₂`.
    pub residual_norm: f64,
    /// Residual radius that was enforced.
    pub bound: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_tolerance: f64,
    pub dual_tolerance: f64,
    /// Final penalty parameter after any adaptation.
    pub rho: f64,
}

fn check_dims(a: &SensingMap, y: &[Complex64]) -> Result<(), SolveError> {
    if y.len() != a.m() {
        return Err(SolveError::Dimension(format!(
            "y has length {}, sensing map has {} rows",
            y.len(),
            a.m()
        )));
    }
    Ok(())
}

/// `min ‖r‖₁  s.t.  A r = y`.
pub fn solve_bp(
    a: &SensingMap,
    y: &[Complex64],
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    check_dims(a, y)?;
    let radius = equality_radius(norm2(y));
    Ok(admm::solve_group_constrained(
        a,
        y,
        &Partition::singletons(a.n()),
        radius,
        &cfg.settings(),
    ))
}

/// `min ‖r‖₁  s.t.  ‖A r − y‖₂ ≤ ε`.
pub fn solve_lasso(
    a: &SensingMap,
    y: &[Complex64],
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    check_dims(a, y)?;
    let y_norm = norm2(y);
    let radius = cfg.epsilon.resolve(y_norm).max(equality_radius(y_norm));
    Ok(admm::solve_group_constrained(
        a,
        y,
        &Partition::singletons(a.n()),
        radius,
        &cfg.settings(),
    ))
}

/// `min Σ_i ‖r_[(i−1)d0, i·d0)‖₂  s.t.  A r = y`.
pub fn solve_block_l2l1(
    a: &SensingMap,
    y: &[Complex64],
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    check_dims(a, y)?;
    let groups = Partition::equal_blocks(a.n(), cfg.d0)?;
    let radius = equality_radius(norm2(y));
    Ok(admm::solve_group_constrained(
        a,
        y,
        &groups,
        radius,
        &cfg.settings(),
    ))
}

/// `min Σ_k ‖r_k‖₂  s.t.  ‖A r − y‖₂ ≤ η` over the band-plan sections.
pub fn solve_mndo(
    a: &SensingMap,
    y: &[Complex64],
    sections: &Partition,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    cfg.validate()?;
    check_dims(a, y)?;
    if sections.n() != a.n() {
        return Err(SolveError::Dimension(format!(
            "plan has {} bins, sensing map has {} columns",
            sections.n(),
            a.n()
        )));
    }
    let y_norm = norm2(y);
    let radius = cfg.eta.resolve(y_norm).max(equality_radius(y_norm));
    Ok(admm::solve_group_constrained(
        a,
        y,
        sections,
        radius,
        &cfg.settings(),
    ))
}

/// Runs whichever program `cfg` names. `sections` is used by `mndo` only.
pub fn solve(
    a: &SensingMap,
    y: &[Complex64],
    sections: &Partition,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolveError> {
    match cfg.program {
        Program::Bp => solve_bp(a, y, cfg),
        Program::Lasso => solve_lasso(a, y, cfg),
        Program::BlockL2l1 => solve_block_l2l1(a, y, cfg),
        Program::Mndo => solve_mndo(a, y, sections, cfg),
    }
}

/// The groups a program minimises over.
pub fn program_groups(
    program: Program,
    n: usize,
    d0: usize,
    sections: &Partition,
) -> Result<Partition, SolveError> {
    match program {
        Program::Bp | Program::Lasso => Ok(Partition::singletons(n)),
        Program::BlockL2l1 => Partition::equal_blocks(n, d0),
        Program::Mndo => Ok(sections.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dist, sub};
    use crate::sampling::{make_operator, sensing_map, OperatorKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn map(kind: OperatorKind, m: usize, n: usize, seed: u64) -> SensingMap {
        sensing_map(Arc::new(make_operator(kind, m, n, seed).unwrap()), n).unwrap()
    }

    fn cvec(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect()
    }

    fn sparse(n: usize, support: &[usize], seed: u64) -> Vec<Complex64> {
        let vals = cvec(support.len(), seed);
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        for (&k, v) in support.iter().zip(vals) {
            r[k] = v;
        }
        r
    }

    #[test]
    fn determined_system_recovers_exactly() {
        let a = map(OperatorKind::Selection, 32, 32, 1);
        let r_true = cvec(32, 2);
        let y = a.forward(&r_true);
        let res = solve_bp(&a, &y, &SolverConfig::new(Program::Bp)).unwrap();
        assert!(res.converged);
        assert!(dist(&res.r_hat, &r_true) <= 1e-8 * norm2(&r_true));
    }

    #[test]
    fn zero_measurements_give_zero() {
        let a = map(OperatorKind::Selection, 8, 16, 1);
        let y = vec![Complex64::new(0.0, 0.0); 8];
        for p in Program::ALL {
            let res = solve(&a, &y, &Partition::singletons(16), &SolverConfig::new(p)).unwrap();
            assert!(res.r_hat.iter().all(|v| v.norm() == 0.0));
            assert_eq!(res.objective, 0.0);
        }
    }

    #[test]
    fn loose_bound_gives_zero() {
        let a = map(OperatorKind::Gaussian, 8, 16, 3);
        let y = cvec(8, 4);
        let mut cfg = SolverConfig::new(Program::Lasso);
        cfg.epsilon = Bound::relative(1.0);
        let res = solve_lasso(&a, &y, &cfg).unwrap();
        assert!(res.r_hat.iter().all(|v| v.norm() == 0.0));
        let mut cfg = SolverConfig::new(Program::Mndo);
        cfg.eta = Bound::absolute(2.0 * norm2(&y));
        let res = solve_mndo(&a, &y, &Partition::equal_blocks(16, 4).unwrap(), &cfg).unwrap();
        assert!(res.r_hat.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn lasso_with_zero_epsilon_is_bp() {
        let a = map(OperatorKind::Selection, 16, 32, 5);
        let y = a.forward(&sparse(32, &[3, 17], 6));
        let mut cfg = SolverConfig::new(Program::Lasso);
        cfg.epsilon = Bound::absolute(0.0);
        let l = solve_lasso(&a, &y, &cfg).unwrap();
        let b = solve_bp(&a, &y, &SolverConfig::new(Program::Bp)).unwrap();
        assert!((l.objective - b.objective).abs() <= 1e-6 * b.objective);
    }

    #[test]
    fn block_size_must_divide() {
        let a = map(OperatorKind::Selection, 16, 32, 5);
        let y = cvec(16, 1);
        let mut cfg = SolverConfig::new(Program::BlockL2l1);
        cfg.d0 = 5;
        assert_eq!(
            solve_block_l2l1(&a, &y, &cfg).unwrap_err(),
            SolveError::BlockSize { d0: 5, n: 32 }
        );
    }

    #[test]
    fn full_block_with_full_sampling() {
        let a = map(OperatorKind::Selection, 16, 16, 2);
        let r_true = cvec(16, 3);
        let y = a.forward(&r_true);
        let mut cfg = SolverConfig::new(Program::BlockL2l1);
        cfg.d0 = 16;
        let res = solve_block_l2l1(&a, &y, &cfg).unwrap();
        assert!(dist(&res.r_hat, &r_true) <= 1e-7 * norm2(&r_true));
        assert!((res.objective - norm2(&res.r_hat)).abs() < 1e-12);
    }

    #[test]
    fn single_group_mndo_is_min_norm() {
        // with one group the optimum is the scaled min-norm solution Aᴴy·(1 − η/‖y‖)
        let a = map(OperatorKind::Selection, 12, 24, 8);
        let y = cvec(12, 9);
        let mut cfg = SolverConfig::new(Program::Mndo);
        cfg.eta = Bound::relative(0.2);
        let one = Partition::new(24, vec![IndexRange::new(0, 24)]).unwrap();
        let res = solve_mndo(&a, &y, &one, &cfg).unwrap();
        assert!(res.converged);
        let expect: Vec<Complex64> = a.adjoint(&y).iter().map(|v| v * 0.8).collect();
        assert!(dist(&res.r_hat, &expect) < 1e-5 * norm2(&expect));
        assert!((res.objective - norm2(&res.r_hat)).abs() < 1e-12);
    }

    #[test]
    fn mndo_checks_plan_size() {
        let a = map(OperatorKind::Selection, 8, 16, 1);
        let y = cvec(8, 1);
        let err = solve_mndo(&a, &y, &Partition::singletons(15), &SolverConfig::default());
        assert!(matches!(err, Err(SolveError::Dimension(_))));
        assert!(matches!(
            solve_bp(&a, &cvec(7, 1), &SolverConfig::default()),
            Err(SolveError::Dimension(_))
        ));
    }

    #[test]
    fn converged_results_are_feasible_and_within_tolerance() {
        for (i, kind) in [
            OperatorKind::Selection,
            OperatorKind::Gaussian,
            OperatorKind::Bernoulli,
        ]
        .into_iter()
        .enumerate()
        {
            let a = map(kind, 20, 40, i as u64);
            let y = a.forward(&sparse(40, &[1, 2, 3, 30], 10 + i as u64));
            let sections = Partition::new(
                40,
                vec![
                    IndexRange::new(0, 4),
                    IndexRange::new(4, 26),
                    IndexRange::new(30, 10),
                ],
            )
            .unwrap();
            for p in Program::ALL {
                let mut cfg = SolverConfig::new(p);
                cfg.d0 = 4;
                let res = solve(&a, &y, &sections, &cfg).unwrap();
                assert!(
                    res.converged,
                    "{kind} {p} did not converge in {}",
                    res.iterations
                );
                let resid = norm2(&sub(&a.forward(&res.r_hat), &y));
                assert!((resid - res.residual_norm).abs() < 1e-12);
                assert!(resid <= res.bound * (1.0 + FEASIBILITY_SLACK));
                assert!(res.primal_residual <= res.primal_tolerance);
                assert!(res.dual_residual <= res.dual_tolerance);
            }
        }
    }

    #[test]
    fn program_names_round_trip() {
        for p in Program::ALL {
            assert_eq!(p.name().parse::<Program>().unwrap(), p);
        }
        assert!("omp".parse::<Program>().is_err());
    }
}
