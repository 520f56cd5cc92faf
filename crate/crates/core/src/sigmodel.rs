//! Synthetic wideband signals with clustered-sparse spectra.
//!
//! Each bin of an active section gets an independent magnitude drawn
//! uniformly from that section's PSD range and a uniform random phase.
//! Inactive bins are exactly zero. The time signal is the unitary inverse
//! DFT of the spectrum, and AWGN is scaled from the realised signal power.
//!
//! Two modes exist. `Complex` (the default) treats the spectrum as a free
//! complex-baseband vector. `Real` enforces conjugate symmetry
//! `r[N−k] = conj(r[k])`, which requires the plan itself to be
//! mirror-symmetric so that no energy leaks into inactive sections.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandplan::BandPlan;
use crate::dft::UnitaryDft;
use crate::linalg::norm2;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("no PSD range for active section {section} ({label})")]
    MissingPsdRange { section: usize, label: String },
    #[error("PSD range {index} is invalid: need 0 <= low <= high, got ({low}, {high})")]
    InvalidPsdRange { index: usize, low: f64, high: f64 },
    #[error("SNR must be a finite number of dB or +inf, got {0}")]
    InvalidSnr(f64),
    #[error("cannot scale noise to an all-zero signal at finite SNR")]
    ZeroSignal,
    #[error("real-signal mode needs a mirror-symmetric plan; bin {bin} and its mirror {mirror} disagree")]
    NotMirrorSymmetric { bin: usize, mirror: usize },
    #[error("spectrum length {got} does not match plan with {expected} bins")]
    LengthMismatch { expected: usize, got: usize },
    #[error("writing {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    #[default]
    Complex,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    /// `(low, high)` magnitude bounds, one per active section in plan order.
    pub psd_ranges: Vec<(f64, f64)>,
    /// `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: SignalMode,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<(), SignalError> {
        for (index, &(low, high)) in self.psd_ranges.iter().enumerate() {
            if !(low >= 0.0 && low <= high && high.is_finite()) {
                return Err(SignalError::InvalidPsdRange { index, low, high });
            }
        }
        check_snr(self.snr_db)
    }
}

/// Complex frequency response over a band plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    plan: Arc<BandPlan>,
    values: Vec<Complex64>,
    real: bool,
}

impl SpectrumVector {
    pub fn new(plan: Arc<BandPlan>, values: Vec<Complex64>) -> Result<Self, SignalError> {
        if values.len() != plan.n_bins() {
            return Err(SignalError::LengthMismatch {
                expected: plan.n_bins(),
                got: values.len(),
            });
        }
        Ok(Self {
            plan,
            values,
            real: false,
        })
    }

    pub fn zeros(plan: Arc<BandPlan>) -> Self {
        let n = plan.n_bins();
        Self {
            plan,
            values: vec![Complex64::new(0.0, 0.0); n],
            real: false,
        }
    }

    pub fn plan(&self) -> &Arc<BandPlan> {
        &self.plan
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when generated in real-signal mode (conjugate symmetric).
    pub fn is_real_signal(&self) -> bool {
        self.real
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

/// Nyquist-grid time samples. Imaginary parts are zero for real signals.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub real: bool,
}

impl TimeSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }
}

pub fn generate_spectrum(
    plan: &Arc<BandPlan>,
    spec: &SignalSpec,
) -> Result<SpectrumVector, SignalError> {
    spec.validate()?;
    let n = plan.n_bins();
    let mut bin_range: Vec<Option<(f64, f64)>> = vec![None; n];
    let mut active_index = 0usize;
    for (section, (s, r)) in plan
        .sections()
        .iter()
        .zip(plan.section_index_ranges())
        .enumerate()
    {
        if s.active_truth != Some(true) {
            continue;
        }
        let range =
            *spec
                .psd_ranges
                .get(active_index)
                .ok_or_else(|| SignalError::MissingPsdRange {
                    section,
                    label: s.label.clone(),
                })?;
        active_index += 1;
        for k in r.range() {
            bin_range[k] = Some(range);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = vec![Complex64::new(0.0, 0.0); n];
    match spec.mode {
        SignalMode::Complex => {
            for (k, range) in bin_range.iter().enumerate() {
                if let Some((lo, hi)) = *range {
                    let mag = draw_magnitude(&mut rng, lo, hi);
                    let phase = rng.random::<f64>() * 2.0 * PI;
                    values[k] = Complex64::from_polar(mag, phase);
                }
            }
        }
        SignalMode::Real => {
            for k in 0..n {
                let mirror = (n - k) % n;
                if bin_range[k].is_some() != bin_range[mirror].is_some() {
                    return Err(SignalError::NotMirrorSymmetric { bin: k, mirror });
                }
            }
            for k in 0..n {
                let mirror = (n - k) % n;
                if mirror < k {
                    continue;
                }
                if let Some((lo, hi)) = bin_range[k] {
                    let mag = draw_magnitude(&mut rng, lo, hi);
                    if mirror == k {
                        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                        values[k] = Complex64::new(sign * mag, 0.0);
                    } else {
                        let phase = rng.random::<f64>() * 2.0 * PI;
                        values[k] = Complex64::from_polar(mag, phase);
                        values[mirror] = values[k].conj();
                    }
                }
            }
        }
    }
    Ok(SpectrumVector {
        plan: Arc::clone(plan),
        values,
        real: spec.mode == SignalMode::Real,
    })
}

fn draw_magnitude(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Unitary inverse DFT of the spectrum, sampled at the Nyquist rate of the
/// monitored band.
pub fn spectrum_to_time(r: &SpectrumVector) -> TimeSignal {
    let mut samples = r.values.clone();
    UnitaryDft::new(samples.len()).inverse_in_place(&mut samples);
    if r.real {
        debug_assert!(
            samples.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
                <= 1e-9 * r.norm().max(f64::MIN_POSITIVE)
        );
        samples.iter_mut().for_each(|v| v.im = 0.0);
    }
    TimeSignal {
        samples,
        sample_rate: r.plan.f_max() - r.plan.f_min(),
        real: r.real,
    }
}

/// Per-sample noise variance that puts `x` at `snr_db`.
pub fn noise_variance(x: &TimeSignal, snr_db: f64) -> Result<f64, SignalError> {
    check_snr(snr_db)?;
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let energy = x.energy();
    if energy == 0.0 {
        return Err(SignalError::ZeroSignal);
    }
    Ok(energy / (x.len() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Adds zero-mean white Gaussian noise with total per-sample variance
/// `variance`. Complex signals split it evenly between I and Q.
pub fn add_noise(x: &TimeSignal, variance: f64, seed: u64) -> TimeSignal {
    let mut out = x.clone();
    if variance == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if x.real {
        let normal = Normal::new(0.0, variance.sqrt()).expect("finite variance");
        for v in &mut out.samples {
            v.re += normal.sample(&mut rng);
        }
    } else {
        let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("finite variance");
        for v in &mut out.samples {
            let re = normal.sample(&mut rng);
            let im = normal.sample(&mut rng);
            *v += Complex64::new(re, im);
        }
    }
    out
}

/// AWGN at the requested SNR (10·log10 of signal power over noise power).
/// `snr_db = +inf` returns `x` unchanged.
pub fn add_awgn(x: &TimeSignal, snr_db: f64, seed: u64) -> Result<TimeSignal, SignalError> {
    let variance = noise_variance(x, snr_db)?;
    Ok(add_noise(x, variance, seed))
}

/// Writes `bin_index,freq_hz,re,im` rows.
pub fn write_spectrum_csv(r: &SpectrumVector, path: impl AsRef<Path>) -> Result<(), SignalError> {
    let path = path.as_ref();
    let io = |e: csv::Error| SignalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["bin_index", "freq_hz", "re", "im"])
        .map_err(io)?;
    for (k, v) in r.values.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.16e}", r.plan.bin_frequency(k)),
            format!("{:.16e}", v.re),
            format!("{:.16e}", v.im),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| SignalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn check_snr(snr_db: f64) -> Result<(), SignalError> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(SignalError::InvalidSnr(snr_db));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandplan::Band;
    use proptest::prelude::*;

    const MHZ: f64 = 1e6;

    fn paper_plan() -> Arc<BandPlan> {
        let bands = vec![
            Band::new(30.0 * MHZ, 70.0 * MHZ, "b1"),
            Band::new(120.0 * MHZ, 180.0 * MHZ, "b2"),
            Band::new(300.0 * MHZ, 340.0 * MHZ, "b3"),
            Band::new(420.0 * MHZ, 460.0 * MHZ, "b4"),
        ];
        Arc::new(BandPlan::from_bands(0.0, 500.0 * MHZ, 500, &bands).unwrap())
    }

    fn paper_spec(seed: u64) -> SignalSpec {
        SignalSpec {
            psd_ranges: vec![
                (0.0277, 0.1126),
                (0.0157, 0.0988),
                (0.0588, 0.1294),
                (0.0381, 0.1201),
            ],
            snr_db: 13.0,
            seed,
            mode: SignalMode::Complex,
        }
    }

    #[test]
    fn paper_spectrum_has_180_nonzero_bins() {
        let plan = paper_plan();
        let r = generate_spectrum(&plan, &paper_spec(3)).unwrap();
        let nonzero = r.values().iter().filter(|v| v.norm() > 0.0).count();
        assert_eq!(nonzero, 180);
        for (s, range) in plan.sections().iter().zip(plan.section_index_ranges()) {
            for k in range.range() {
                if s.active_truth == Some(true) {
                    assert!(r.values()[k].norm() > 0.0);
                } else {
                    assert_eq!(r.values()[k], Complex64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn magnitudes_stay_in_range() {
        let plan = paper_plan();
        let spec = paper_spec(11);
        let r = generate_spectrum(&plan, &spec).unwrap();
        let active: Vec<_> = plan
            .section_index_ranges()
            .iter()
            .zip(plan.sections())
            .filter(|(_, s)| s.active_truth == Some(true))
            .map(|(r, _)| *r)
            .collect();
        for (range, (lo, hi)) in active.iter().zip(&spec.psd_ranges) {
            for k in range.range() {
                let m = r.values()[k].norm();
                assert!(m >= lo - 1e-15 && m <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn zero_active_sections_gives_zeros() {
        let plan = Arc::new(BandPlan::from_bands(0.0, 1.0, 16, &[]).unwrap());
        let spec = SignalSpec {
            psd_ranges: vec![],
            snr_db: 10.0,
            seed: 1,
            mode: SignalMode::Complex,
        };
        let r = generate_spectrum(&plan, &spec).unwrap();
        assert!(r.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn degenerate_range_gives_exact_magnitude() {
        let plan = paper_plan();
        let mut spec = paper_spec(5);
        spec.psd_ranges = vec![(0.05, 0.05); 4];
        let r = generate_spectrum(&plan, &spec).unwrap();
        for v in r.values().iter().filter(|v| v.norm() > 0.0) {
            assert!((v.norm() - 0.05).abs() < 1e-15);
        }
    }

    #[test]
    fn missing_range_is_an_error() {
        let plan = paper_plan();
        let mut spec = paper_spec(5);
        spec.psd_ranges.truncate(3);
        assert!(matches!(
            generate_spectrum(&plan, &spec),
            Err(SignalError::MissingPsdRange { section: 7, .. })
        ));
    }

    #[test]
    fn impulse_gives_constant_time_signal() {
        let plan = Arc::new(BandPlan::from_bands(0.0, 1.0, 16, &[]).unwrap());
        let mut v = vec![Complex64::new(0.0, 0.0); 16];
        v[0] = Complex64::new(1.0, 0.0);
        let x = spectrum_to_time(&SpectrumVector::new(plan.clone(), v).unwrap());
        for s in &x.samples {
            assert!((s - Complex64::new(0.25, 0.0)).norm() < 1e-15);
        }
        let z = spectrum_to_time(&SpectrumVector::zeros(plan));
        assert!(z.samples.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn real_mode_needs_mirror_plan() {
        let spec = SignalSpec {
            psd_ranges: vec![(0.5, 1.0), (0.5, 1.0)],
            snr_db: f64::INFINITY,
            seed: 9,
            mode: SignalMode::Real,
        };
        let bands = vec![Band::new(2.0, 4.0, "pos"), Band::new(13.0, 15.0, "neg")];
        let plan = Arc::new(BandPlan::from_bands(0.0, 16.0, 16, &bands).unwrap());
        let r = generate_spectrum(&plan, &spec).unwrap();
        for k in 1..16 {
            assert_eq!(r.values()[k], r.values()[16 - k].conj());
        }
        let x = spectrum_to_time(&r);
        assert!(x.real && x.samples.iter().all(|s| s.im == 0.0));
        assert!((x.energy().sqrt() - r.norm()).abs() < 1e-12);

        let lopsided = Arc::new(BandPlan::from_bands(0.0, 16.0, 16, &bands[..1]).unwrap());
        let mut spec1 = spec.clone();
        spec1.psd_ranges.truncate(1);
        assert!(matches!(
            generate_spectrum(&lopsided, &spec1),
            Err(SignalError::NotMirrorSymmetric { .. })
        ));
    }

    #[test]
    fn infinite_snr_is_identity_and_zero_signal_fails() {
        let plan = paper_plan();
        let x = spectrum_to_time(&generate_spectrum(&plan, &paper_spec(1)).unwrap());
        assert_eq!(add_awgn(&x, f64::INFINITY, 4).unwrap(), x);
        let zero = spectrum_to_time(&SpectrumVector::zeros(plan));
        assert!(matches!(
            add_awgn(&zero, 3.0, 1),
            Err(SignalError::ZeroSignal)
        ));
        assert!(matches!(
            add_awgn(&x, f64::NAN, 1),
            Err(SignalError::InvalidSnr(_))
        ));
    }

    #[test]
    fn zero_db_noise_energy_matches_signal() {
        let plan = paper_plan();
        let x = spectrum_to_time(&generate_spectrum(&plan, &paper_spec(2)).unwrap());
        let trials = 10_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let y = add_awgn(&x, 0.0, 1000 + t).unwrap();
            acc += y
                .samples
                .iter()
                .zip(&x.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
        }
        let mean = acc / trials as f64;
        assert!(
            (mean / x.energy() - 1.0).abs() < 0.02,
            "ratio {}",
            mean / x.energy()
        );
    }

    #[test]
    fn thirteen_db_empirical_snr() {
        let plan = paper_plan();
        let mut snr_acc = 0.0;
        let trials = 1000;
        for t in 0..trials {
            let x = spectrum_to_time(&generate_spectrum(&plan, &paper_spec(t)).unwrap());
            let y = add_awgn(&x, 13.0, 77_000 + t).unwrap();
            let noise: f64 = y
                .samples
                .iter()
                .zip(&x.samples)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            snr_acc += 10.0 * (x.energy() / noise).log10();
        }
        let mean = snr_acc / trials as f64;
        assert!((mean - 13.0).abs() < 0.3, "mean SNR {mean}");
    }

    proptest! {
        #[test]
        fn parseval(values in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..300)) {
            let n = values.len();
            let plan = Arc::new(BandPlan::from_bands(0.0, n as f64, n, &[]).unwrap());
            let v: Vec<Complex64> = values.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let r = SpectrumVector::new(plan, v).unwrap();
            let x = spectrum_to_time(&r);
            let (a, b) = (x.energy().sqrt(), r.norm());
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1e-300));
        }

        #[test]
        fn support_and_determinism(seed in any::<u64>()) {
            let plan = paper_plan();
            let r1 = generate_spectrum(&plan, &paper_spec(seed)).unwrap();
            let r2 = generate_spectrum(&plan, &paper_spec(seed)).unwrap();
            prop_assert_eq!(&r1, &r2);
            for (s, range) in plan.sections().iter().zip(plan.section_index_ranges()) {
                if s.active_truth != Some(true) {
                    for k in range.range() {
                        prop_assert_eq!(r1.values()[k], Complex64::new(0.0, 0.0));
                    }
                }
            }
        }
    }
}
