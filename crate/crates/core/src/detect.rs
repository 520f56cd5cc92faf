//! Per-section energies, energy-threshold occupancy and the energy
//! betterment ratio between two recoveries.
//!
//! Energies are section-restricted `ℓ2` norms `e_k = ‖r_k‖₂`. With
//! [`Normalization::Total`] they are divided by `‖r‖₂`, so `Σ e_k² = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bandplan::BandPlan;
use crate::linalg::norm2;
use crate::sigmodel::SpectrumVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    Raw,
    #[default]
    Total,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Raw => "raw",
            Normalization::Total => "total",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Normalization::Raw),
            "total" => Ok(Normalization::Total),
            other => Err(format!("unknown normalization '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandEnergies {
    pub values: Vec<f64>,
    pub normalization: Normalization,
    /// Set when `Total` normalization met an all-zero vector; values are 0.
    pub degenerate: bool,
}

impl SubbandEnergies {
    pub fn new(values: Vec<f64>, normalization: Normalization) -> Self {
        Self {
            values,
            normalization,
            degenerate: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `sqrt(Σ e_k²)`, the norm of the vector the energies came from.
    pub fn total(&self) -> f64 {
        self.values.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    /// Rescales to `Σ e_k² = 1`; a no-op on already-normalized energies.
    pub fn normalized(&self) -> Self {
        let t = self.total();
        if t == 0.0 {
            return Self {
                values: vec![0.0; self.values.len()],
                normalization: Normalization::Total,
                degenerate: true,
            };
        }
        Self {
            values: self.values.iter().map(|e| e / t).collect(),
            normalization: Normalization::Total,
            degenerate: false,
        }
    }
}

pub fn subband_energies(
    r_hat: &SpectrumVector,
    plan: &BandPlan,
    normalize: Normalization,
) -> SubbandEnergies {
    assert_eq!(
        r_hat.len(),
        plan.n_bins(),
        "spectrum length must match the plan"
    );
    let raw = SubbandEnergies::new(
        plan.section_index_ranges()
            .iter()
            .map(|g| norm2(&r_hat.values()[g.range()]))
            .collect(),
        Normalization::Raw,
    );
    match normalize {
        Normalization::Raw => raw,
        Normalization::Total => {
            let nr = r_hat.norm();
            if nr == 0.0 {
                raw.normalized()
            } else {
                SubbandEnergies::new(
                    raw.values.iter().map(|e| e / nr).collect(),
                    Normalization::Total,
                )
            }
        }
    }
}

/// Per-section energy betterment ratio of `e_new` over `e_std`, in percent.
///
/// Active sections score `(e_new − e_std)/e_std`, inactive sections
/// `(e_std − e_new)/e_std`. `None` where `e_std = 0` or the section has no
/// ground-truth occupancy.
pub fn ebr(e_new: &SubbandEnergies, e_std: &SubbandEnergies, plan: &BandPlan) -> Vec<Option<f64>> {
    assert_eq!(e_new.len(), plan.num_sections());
    assert_eq!(e_std.len(), plan.num_sections());
    assert_eq!(
        e_new.normalization, e_std.normalization,
        "EBR needs energies under the same normalization"
    );
    (0..plan.num_sections())
        .map(|k| {
            let (n, s) = (e_new.values[k], e_std.values[k]);
            if s == 0.0 {
                return None;
            }
            let active = plan.is_active(k)?;
            let diff = if active { n - s } else { s - n };
            Some(100.0 * diff / s)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub false_positive: usize,
    pub true_negative: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub decisions: Vec<bool>,
    pub threshold: f64,
    pub truth: Vec<Option<bool>>,
    /// Counts over sections whose ground truth is known.
    pub confusion: Confusion,
}

impl DetectionReport {
    /// True when every truly active section was declared occupied.
    pub fn all_active_detected(&self) -> bool {
        self.decisions
            .iter()
            .zip(&self.truth)
            .all(|(d, t)| *t != Some(true) || *d)
    }
}

/// Per-bin-normalized statistic `e_k / √len_k` for each section.
pub fn detection_statistics(energies: &SubbandEnergies, plan: &BandPlan) -> Vec<f64> {
    assert_eq!(energies.len(), plan.num_sections());
    energies
        .values
        .iter()
        .zip(plan.section_index_ranges())
        .map(|(e, g)| e / (g.len as f64).sqrt())
        .collect()
}

/// Section `k` is occupied iff `e_k / √len_k > τ`.
pub fn detect_occupancy(
    energies: &SubbandEnergies,
    plan: &BandPlan,
    threshold: f64,
) -> DetectionReport {
    assert!(threshold >= 0.0, "threshold must be non-negative");
    let decisions: Vec<bool> = detection_statistics(energies, plan)
        .into_iter()
        .map(|s| s > threshold)
        .collect();
    let truth: Vec<Option<bool>> = (0..plan.num_sections())
        .map(|k| plan.is_active(k))
        .collect();
    let mut confusion = Confusion::default();
    for (d, t) in decisions.iter().zip(&truth) {
        match (t, d) {
            (Some(true), true) => confusion.true_positive += 1,
            (Some(true), false) => confusion.false_negative += 1,
            (Some(false), true) => confusion.false_positive += 1,
            (Some(false), false) => confusion.true_negative += 1,
            (None, _) => {}
        }
    }
    DetectionReport {
        decisions,
        threshold,
        truth,
        confusion,
    }
}

/// Threshold exceeded by a fraction `pfa` of noise-only statistics.
///
/// Returns the empirical `(1 − pfa)` quantile (upper order statistic) of
/// the pooled samples.
pub fn calibrate_threshold(noise_statistics: &[f64], pfa: f64) -> f64 {
    assert!(
        !noise_statistics.is_empty(),
        "need at least one noise sample"
    );
    assert!(
        (0.0..1.0).contains(&pfa),
        "false-alarm rate must be in [0, 1)"
    );
    let mut s: Vec<f64> = noise_statistics.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let allowed = (pfa * n as f64).floor() as usize;
    s[n - 1 - allowed.min(n - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandplan::Band;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn table_plan() -> Arc<BandPlan> {
        let bands: Vec<Band> = [(30, 70), (120, 180), (300, 340), (420, 460)]
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| Band::new(a as f64 * 1e6, b as f64 * 1e6, format!("pu{}", i + 1)))
            .collect();
        Arc::new(BandPlan::from_bands(0.0, 500e6, 500, &bands).unwrap())
    }

    const LASSO: [f64; 9] = [
        0.1269, 0.4490, 0.1324, 0.4647, 0.2165, 0.5155, 0.1967, 0.4121, 0.1666,
    ];
    const MNDO: [f64; 9] = [0.0, 0.3986, 0.0, 0.4876, 0.0311, 0.6856, 0.0, 0.3637, 0.0];
    const EBR: [f64; 9] = [100.0, -11.2, 100.0, 4.93, 85.6, 33.0, 100.0, -11.7, 100.0];

    #[test]
    fn table_row_ebr() {
        let plan = table_plan();
        let n = SubbandEnergies::new(MNDO.to_vec(), Normalization::Total);
        let s = SubbandEnergies::new(LASSO.to_vec(), Normalization::Total);
        for (got, want) in ebr(&n, &s, &plan).iter().zip(EBR) {
            assert!((got.unwrap() - want).abs() <= 0.15, "{got:?} vs {want}");
        }
    }

    #[test]
    fn equal_energies_give_zero_and_zero_denominator_is_undefined() {
        let plan = table_plan();
        let s = SubbandEnergies::new(LASSO.to_vec(), Normalization::Raw);
        assert!(ebr(&s, &s, &plan).iter().all(|v| *v == Some(0.0)));
        let z = SubbandEnergies::new(vec![0.0; 9], Normalization::Raw);
        assert!(ebr(&s, &z, &plan).iter().all(Option::is_none));
    }

    #[test]
    fn energies_of_zero_and_single_section() {
        let plan = table_plan();
        let z = SpectrumVector::zeros(plan.clone());
        let e = subband_energies(&z, &plan, Normalization::Total);
        assert!(e.degenerate && e.values.iter().all(|v| *v == 0.0));
        let mut v = vec![Complex64::new(0.0, 0.0); 500];
        v[75] = Complex64::new(3.0, 0.0);
        v[100] = Complex64::new(0.0, 4.0);
        let r = SpectrumVector::new(plan.clone(), v).unwrap();
        let raw = subband_energies(&r, &plan, Normalization::Raw);
        assert!((raw.values[2] - 5.0).abs() < 1e-15);
        let tot = subband_energies(&r, &plan, Normalization::Total);
        assert!((tot.values[2] - 1.0).abs() < 1e-15);
        assert_eq!(tot.values.iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn detection_edges() {
        let plan = table_plan();
        let z = SubbandEnergies::new(vec![0.0; 9], Normalization::Raw);
        assert!(detect_occupancy(&z, &plan, 0.1)
            .decisions
            .iter()
            .all(|d| !d));
        let mut e = z.clone();
        e.values[1] = 1e-30;
        let rep = detect_occupancy(&e, &plan, 0.0);
        assert_eq!(rep.decisions.iter().filter(|d| **d).count(), 1);
        assert_eq!(rep.confusion.true_positive, 1);
        assert_eq!(rep.confusion.false_negative, 3);
        assert_eq!(rep.confusion.true_negative, 5);
        assert!(!rep.all_active_detected());
    }

    #[test]
    fn calibration_quantile() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(calibrate_threshold(&s, 0.01), 99.0);
        assert_eq!(calibrate_threshold(&s, 0.0), 100.0);
        let fa = s
            .iter()
            .filter(|v| **v > calibrate_threshold(&s, 0.05))
            .count();
        assert!(fa <= 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn ebr_sign_convention(n in proptest::collection::vec(0.0f64..1.0, 9),
                               s in proptest::collection::vec(1e-3f64..1.0, 9)) {
            let plan = table_plan();
            let en = SubbandEnergies::new(n.clone(), Normalization::Raw);
            let es = SubbandEnergies::new(s.clone(), Normalization::Raw);
            for (k, v) in ebr(&en, &es, &plan).iter().enumerate() {
                let v = v.unwrap();
                let better = if plan.is_active(k).unwrap() { n[k] > s[k] } else { n[k] < s[k] };
                prop_assert_eq!(v > 0.0, better);
            }
        }

        #[test]
        fn decomposition_and_idempotence(vals in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 500)) {
            let plan = table_plan();
            let r = SpectrumVector::new(
                plan.clone(),
                vals.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
            ).unwrap();
            let raw = subband_energies(&r, &plan, Normalization::Raw);
            let total2: f64 = raw.values.iter().map(|e| e * e).sum();
            let n2 = r.norm().powi(2);
            prop_assert!((total2 - n2).abs() <= 1e-10 * n2);
            let once = subband_energies(&r, &plan, Normalization::Total);
            let twice = once.normalized();
            for (a, b) in once.values.iter().zip(&twice.values) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
