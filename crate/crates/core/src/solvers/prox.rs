//! Proximal kernels shared by the ADMM engine and the reference solver.

use num_complex::Complex64;

use crate::bandplan::IndexRange;
use crate::linalg::norm2;

/// `prox_{λ‖·‖₂}(v) = (1 − λ/‖v‖₂)₊ · v`.
pub fn prox_group_l2(v: &[Complex64], threshold: f64) -> Vec<Complex64> {
    let mut out = v.to_vec();
    prox_group_l2_in_place(&mut out, threshold);
    out
}

pub fn prox_group_l2_in_place(v: &mut [Complex64], threshold: f64) {
    debug_assert!(threshold >= 0.0);
    let nv = norm2(v);
    if nv <= threshold {
        v.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    } else {
        let s = 1.0 - threshold / nv;
        v.iter_mut().for_each(|z| *z *= s);
    }
}

/// Block soft-thresholding applied group by group.
pub fn prox_groups_in_place(v: &mut [Complex64], groups: &[IndexRange], threshold: f64) {
    for g in groups {
        prox_group_l2_in_place(&mut v[g.range()], threshold);
    }
}

/// Projection onto the ball `{x : ‖x − center‖₂ ≤ radius}`.
pub fn project_l2_ball(v: &[Complex64], center: &[Complex64], radius: f64) -> Vec<Complex64> {
    let mut out = v.to_vec();
    project_l2_ball_in_place(&mut out, center, radius);
    out
}

pub fn project_l2_ball_in_place(v: &mut [Complex64], center: &[Complex64], radius: f64) {
    assert_eq!(v.len(), center.len());
    debug_assert!(radius >= 0.0);
    let d = v
        .iter()
        .zip(center)
        .map(|(a, c)| (a - c).norm_sqr())
        .sum::<f64>()
        .sqrt();
    if d <= radius {
        return;
    }
    let s = radius / d;
    for (a, c) in v.iter_mut().zip(center) {
        *a = c + (*a - c) * s;
    }
}

/// `Σ_g ‖v_g‖₂`.
pub fn group_norm_sum(v: &[Complex64], groups: &[IndexRange]) -> f64 {
    groups.iter().map(|g| norm2(&v[g.range()])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dist;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn prox_examples() {
        let zero = vec![c(0.0); 3];
        assert_eq!(prox_group_l2(&zero, 2.0), zero);
        assert_eq!(prox_group_l2(&[c(3.0)], 5.0), vec![c(0.0)]);
        let p = prox_group_l2(&[c(3.0), c(4.0)], 2.5);
        assert!((p[0] - c(1.5)).norm() < 1e-15 && (p[1] - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn ball_examples() {
        let inside = vec![c(0.1), c(0.2)];
        assert_eq!(project_l2_ball(&inside, &[c(0.0), c(0.0)], 1.0), inside);
        let center = vec![c(1.0), c(-2.0)];
        assert_eq!(project_l2_ball(&[c(6.0), c(8.0)], &center, 0.0), center);
        let p = project_l2_ball(&[c(6.0), c(8.0)], &[c(0.0), c(0.0)], 5.0);
        assert!((p[0] - c(3.0)).norm() < 1e-15 && (p[1] - c(4.0)).norm() < 1e-15);
    }

    fn arb_cvec() -> impl Strategy<Value = Vec<Complex64>> {
        proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..20)
            .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn prox_optimality(v in arb_cvec(), lambda in 0.0f64..10.0) {
            let p = prox_group_l2(&v, lambda);
            let np = norm2(&p);
            if np == 0.0 {
                prop_assert!(norm2(&v) <= lambda + 1e-12);
            } else {
                // v − p = λ p / ‖p‖
                for (vi, pi) in v.iter().zip(&p) {
                    prop_assert!(((vi - pi) - pi * (lambda / np)).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn ball_projection_idempotent(v in arb_cvec(), r in 0.0f64..5.0) {
            let center: Vec<Complex64> = v.iter().map(|z| z * 0.3 + Complex64::new(0.1, -0.2)).collect();
            let p = project_l2_ball(&v, &center, r);
            prop_assert!(dist(&p, &center) <= r * (1.0 + 1e-12) + 1e-15);
            let pp = project_l2_ball(&p, &center, r);
            prop_assert!(dist(&p, &pp) <= 1e-12 * (1.0 + norm2(&p)));
        }
    }
}
