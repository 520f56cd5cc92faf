//! Fixed frequency-allocation partitions of the monitored band.
//!
//! A [`BandPlan`] splits `[f_min, f_max)` into contiguous [`Section`]s whose
//! edges fall on the bin grid. Bin `k` covers
//! `[f_min + k·Δf, f_min + (k+1)·Δf)` with `Δf = (f_max − f_min) / n_bins`.
//! Recovery code only ever sees the index ranges produced by
//! [`BandPlan::section_index_ranges`]; occupancy ground truth stays here.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative slack when snapping a frequency onto the bin grid.
const GRID_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum BandPlanError {
    #[error("n_bins must be positive")]
    ZeroBins,
    #[error("invalid monitored range [{f_min}, {f_max}] Hz")]
    InvalidRange { f_min: f64, f_max: f64 },
    #[error("band {index} ({label}): f_lo {f_lo} Hz must be below f_hi {f_hi} Hz")]
    EmptyBand {
        index: usize,
        label: String,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("band {index} ({label}): [{f_lo}, {f_hi}] Hz lies outside [{f_min}, {f_max}] Hz")]
    OutOfRange {
        index: usize,
        label: String,
        f_lo: f64,
        f_hi: f64,
        f_min: f64,
        f_max: f64,
    },
    #[error("band {index} ({label}) overlaps or precedes the previous band (starts at {f_lo} Hz, previous ends at {prev_hi} Hz)")]
    Overlap {
        index: usize,
        label: String,
        f_lo: f64,
        prev_hi: f64,
    },
    #[error("band {index} ({label}): edge {edge} Hz is not on the {bin_width} Hz bin grid")]
    OffGrid {
        index: usize,
        label: String,
        edge: f64,
        bin_width: f64,
    },
    #[error("sections are not contiguous at section {index} ({label})")]
    NotContiguous { index: usize, label: String },
    #[error("a plan needs at least one section")]
    NoSections,
    #[error("band-plan file: {0}")]
    Parse(String),
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// A declared allocation, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub f_lo_hz: f64,
    pub f_hi_hz: f64,
    /// Defaults to `band-{n}` (1-based) when empty.
    #[serde(default)]
    pub label: String,
}

impl Band {
    pub fn new(f_lo_hz: f64, f_hi_hz: f64, label: impl Into<String>) -> Self {
        Self {
            f_lo_hz,
            f_hi_hz,
            label: label.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub f_lo: f64,
    pub f_hi: f64,
    pub label: String,
    /// Ground-truth occupancy, used by the simulation harness only.
    pub active_truth: Option<bool>,
}

/// Contiguous run of bins `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexRange {
    pub start: usize,
    pub len: usize,
}

impl IndexRange {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }
}

/// Immutable partition of the monitored band into allocation sections.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPlan {
    f_min: f64,
    f_max: f64,
    n_bins: usize,
    sections: Vec<Section>,
    ranges: Vec<IndexRange>,
}

impl BandPlan {
    /// Builds a plan from an explicit, already complete list of sections.
    pub fn new(
        f_min: f64,
        f_max: f64,
        n_bins: usize,
        sections: Vec<Section>,
    ) -> Result<Self, BandPlanError> {
        check_range(f_min, f_max, n_bins)?;
        if sections.is_empty() {
            return Err(BandPlanError::NoSections);
        }
        let bin_width = (f_max - f_min) / n_bins as f64;
        let mut ranges = Vec::with_capacity(sections.len());
        let mut cursor = 0usize;
        for (index, s) in sections.iter().enumerate() {
            if !(s.f_lo < s.f_hi) {
                return Err(BandPlanError::EmptyBand {
                    index,
                    label: s.label.clone(),
                    f_lo: s.f_lo,
                    f_hi: s.f_hi,
                });
            }
            let lo = grid_bin(s.f_lo, f_min, bin_width).ok_or_else(|| BandPlanError::OffGrid {
                index,
                label: s.label.clone(),
                edge: s.f_lo,
                bin_width,
            })?;
            let hi = grid_bin(s.f_hi, f_min, bin_width).ok_or_else(|| BandPlanError::OffGrid {
                index,
                label: s.label.clone(),
                edge: s.f_hi,
                bin_width,
            })?;
            if lo != cursor || hi <= lo {
                return Err(BandPlanError::NotContiguous {
                    index,
                    label: s.label.clone(),
                });
            }
            ranges.push(IndexRange::new(lo, hi - lo));
            cursor = hi;
        }
        if cursor != n_bins {
            let last = sections.len() - 1;
            return Err(BandPlanError::NotContiguous {
                index: last,
                label: sections[last].label.clone(),
            });
        }
        Ok(Self {
            f_min,
            f_max,
            n_bins,
            sections,
            ranges,
        })
    }

    /// Builds the full partition from the declared active allocations,
    /// inserting an inactive gap section wherever bands do not touch.
    pub fn from_bands(
        f_min: f64,
        f_max: f64,
        n_bins: usize,
        active_bands: &[Band],
    ) -> Result<Self, BandPlanError> {
        check_range(f_min, f_max, n_bins)?;
        let bin_width = (f_max - f_min) / n_bins as f64;

        let mut sections = Vec::with_capacity(2 * active_bands.len() + 1);
        let mut prev_hi = f_min;
        let mut gap_count = 0usize;
        for (index, band) in active_bands.iter().enumerate() {
            let (lo, hi) = (band.f_lo_hz, band.f_hi_hz);
            if !(lo < hi) {
                return Err(BandPlanError::EmptyBand {
                    index,
                    label: band.label.clone(),
                    f_lo: lo,
                    f_hi: hi,
                });
            }
            if lo < f_min || hi > f_max {
                return Err(BandPlanError::OutOfRange {
                    index,
                    label: band.label.clone(),
                    f_lo: lo,
                    f_hi: hi,
                    f_min,
                    f_max,
                });
            }
            if lo < prev_hi {
                return Err(BandPlanError::Overlap {
                    index,
                    label: band.label.clone(),
                    f_lo: lo,
                    prev_hi,
                });
            }
            for edge in [lo, hi] {
                if grid_bin(edge, f_min, bin_width).is_none() {
                    return Err(BandPlanError::OffGrid {
                        index,
                        label: band.label.clone(),
                        edge,
                        bin_width,
                    });
                }
            }
            if lo > prev_hi && !same_edge(lo, prev_hi, bin_width) {
                gap_count += 1;
                sections.push(gap_section(prev_hi, lo, gap_count));
            }
            sections.push(Section {
                f_lo: lo,
                f_hi: hi,
                label: if band.label.is_empty() {
                    format!("band-{}", index + 1)
                } else {
                    band.label.clone()
                },
                active_truth: Some(true),
            });
            prev_hi = hi;
        }
        if prev_hi < f_max && !same_edge(prev_hi, f_max, bin_width) {
            gap_count += 1;
            sections.push(gap_section(prev_hi, f_max, gap_count));
        }
        Self::new(f_min, f_max, n_bins, sections)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, BandPlanError> {
        let file: BandPlanFile =
            toml::from_str(text).map_err(|e| BandPlanError::Parse(e.to_string()))?;
        file.build()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, BandPlanError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BandPlanError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn bin_width(&self) -> f64 {
        (self.f_max - self.f_min) / self.n_bins as f64
    }

    /// Lower edge of bin `k`.
    pub fn bin_frequency(&self, k: usize) -> f64 {
        self.f_min + k as f64 * self.bin_width()
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn num_sections(&self) -> usize {
        self.sections.len()
    }

    /// Consecutive, exhaustive bin ranges, one per section.
    pub fn section_index_ranges(&self) -> &[IndexRange] {
        &self.ranges
    }

    /// Sections flagged active, read back as bands.
    pub fn active_bands(&self) -> Vec<Band> {
        self.sections
            .iter()
            .filter(|s| s.active_truth == Some(true))
            .map(|s| Band::new(s.f_lo, s.f_hi, s.label.clone()))
            .collect()
    }

    pub fn is_active(&self, section: usize) -> Option<bool> {
        self.sections[section].active_truth
    }
}

impl fmt::Display for BandPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "band plan: {} .. {} Hz, {} bins ({} Hz/bin), {} sections",
            self.f_min,
            self.f_max,
            self.n_bins,
            self.bin_width(),
            self.sections.len()
        )?;
        for (i, (s, r)) in self.sections.iter().zip(&self.ranges).enumerate() {
            let state = match s.active_truth {
                Some(true) => "active",
                Some(false) => "inactive",
                None => "unknown",
            };
            writeln!(
                f,
                "  {:>2}  [{:>14.1}, {:>14.1}) Hz  bins {:>5}..{:<5} ({:>4})  {:<8}  {}",
                i + 1,
                s.f_lo,
                s.f_hi,
                r.start,
                r.end(),
                r.len,
                state,
                s.label
            )?;
        }
        Ok(())
    }
}

/// On-disk representation of a band plan. Unknown fields are rejected.
///
/// ```toml
/// f_min_hz = 0.0
/// f_max_hz = 500e6
/// n_bins = 500
///
/// [[band]]
/// f_lo_hz = 30e6
/// f_hi_hz = 70e6
/// label = "primary-1"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandPlanFile {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub n_bins: usize,
    #[serde(default)]
    pub band: Vec<Band>,
}

impl BandPlanFile {
    pub fn build(&self) -> Result<BandPlan, BandPlanError> {
        BandPlan::from_bands(self.f_min_hz, self.f_max_hz, self.n_bins, &self.band)
    }
}

fn check_range(f_min: f64, f_max: f64, n_bins: usize) -> Result<(), BandPlanError> {
    if n_bins == 0 {
        return Err(BandPlanError::ZeroBins);
    }
    if !(f_min.is_finite() && f_max.is_finite() && f_min < f_max) {
        return Err(BandPlanError::InvalidRange { f_min, f_max });
    }
    Ok(())
}

/// Index of the bin boundary at `f`, or `None` if `f` is off the grid.
fn grid_bin(f: f64, f_min: f64, bin_width: f64) -> Option<usize> {
    let x = (f - f_min) / bin_width;
    let k = x.round();
    if k < 0.0 || (x - k).abs() > GRID_TOLERANCE * k.max(1.0) {
        return None;
    }
    Some(k as usize)
}

fn same_edge(a: f64, b: f64, bin_width: f64) -> bool {
    ((a - b) / bin_width).abs() < GRID_TOLERANCE
}

fn gap_section(f_lo: f64, f_hi: f64, n: usize) -> Section {
    Section {
        f_lo,
        f_hi,
        label: format!("gap-{n}"),
        active_truth: Some(false),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MHZ: f64 = 1e6;

    pub(crate) fn paper_bands() -> Vec<Band> {
        vec![
            Band::new(30.0 * MHZ, 70.0 * MHZ, "b1"),
            Band::new(120.0 * MHZ, 180.0 * MHZ, "b2"),
            Band::new(300.0 * MHZ, 340.0 * MHZ, "b3"),
            Band::new(420.0 * MHZ, 460.0 * MHZ, "b4"),
        ]
    }

    #[test]
    fn nine_section_layout() {
        let plan = BandPlan::from_bands(0.0, 500.0 * MHZ, 500, &paper_bands()).unwrap();
        assert_eq!(plan.num_sections(), 9);
        let edges: Vec<(f64, f64)> = plan
            .sections()
            .iter()
            .map(|s| (s.f_lo / MHZ, s.f_hi / MHZ))
            .collect();
        assert_eq!(
            edges,
            vec![
                (0.0, 30.0),
                (30.0, 70.0),
                (70.0, 120.0),
                (120.0, 180.0),
                (180.0, 300.0),
                (300.0, 340.0),
                (340.0, 420.0),
                (420.0, 460.0),
                (460.0, 500.0)
            ]
        );
        let active: Vec<bool> = plan
            .sections()
            .iter()
            .map(|s| s.active_truth.unwrap())
            .collect();
        assert_eq!(
            active,
            vec![false, true, false, true, false, true, false, true, false]
        );
        let lens: Vec<usize> = plan.section_index_ranges().iter().map(|r| r.len).collect();
        assert_eq!(lens, vec![30, 40, 50, 60, 120, 40, 80, 40, 40]);
        assert_eq!(lens.iter().sum::<usize>(), 500);
    }

    #[test]
    fn full_band_single_section() {
        let plan =
            BandPlan::from_bands(0.0, 500.0 * MHZ, 500, &[Band::new(0.0, 500.0 * MHZ, "all")])
                .unwrap();
        assert_eq!(plan.num_sections(), 1);
        assert_eq!(plan.section_index_ranges(), &[IndexRange::new(0, 500)]);
        assert_eq!(plan.sections()[0].active_truth, Some(true));
    }

    #[test]
    fn no_active_bands_is_one_gap() {
        let plan = BandPlan::from_bands(0.0, 1.0, 8, &[]).unwrap();
        assert_eq!(plan.num_sections(), 1);
        assert_eq!(plan.sections()[0].active_truth, Some(false));
    }

    #[test]
    fn off_grid_edge_rejected() {
        let mut bands = paper_bands();
        bands[0].f_hi_hz = 71.3 * MHZ;
        let err = BandPlan::from_bands(0.0, 500.0 * MHZ, 500, &bands).unwrap_err();
        match err {
            BandPlanError::OffGrid { index, edge, .. } => {
                assert_eq!(index, 0);
                assert_eq!(edge, 71.3 * MHZ);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn overlap_and_range_rejected() {
        let bands = vec![
            Band::new(10.0 * MHZ, 50.0 * MHZ, "a"),
            Band::new(40.0 * MHZ, 60.0 * MHZ, "b"),
        ];
        assert!(matches!(
            BandPlan::from_bands(0.0, 100.0 * MHZ, 100, &bands),
            Err(BandPlanError::Overlap { index: 1, .. })
        ));
        let bands = vec![Band::new(90.0 * MHZ, 110.0 * MHZ, "far")];
        assert!(matches!(
            BandPlan::from_bands(0.0, 100.0 * MHZ, 100, &bands),
            Err(BandPlanError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            BandPlan::from_bands(0.0, 100.0, 0, &[]),
            Err(BandPlanError::ZeroBins)
        ));
    }

    #[test]
    fn adjacent_bands_need_no_gap() {
        let bands = vec![Band::new(0.0, 1.0, "a"), Band::new(1.0, 4.0, "b")];
        let plan = BandPlan::from_bands(0.0, 4.0, 4, &bands).unwrap();
        assert_eq!(
            plan.section_index_ranges(),
            &[IndexRange::new(0, 1), IndexRange::new(1, 3)]
        );
    }

    #[test]
    fn toml_round_trip_and_unknown_field() {
        let text = r#"
            f_min_hz = 0.0
            f_max_hz = 500e6
            n_bins = 500
            [[band]]
            f_lo_hz = 30e6
            f_hi_hz = 70e6
            label = "b1"
        "#;
        let plan = BandPlan::from_toml_str(text).unwrap();
        assert_eq!(plan.num_sections(), 3);
        let bad = format!("{text}\ncolour = \"red\"\n");
        assert!(matches!(
            BandPlan::from_toml_str(&bad),
            Err(BandPlanError::Parse(_))
        ));
        let bad_band = text.replace("label = \"b1\"", "label = \"b1\"\nwidth = 3");
        assert!(BandPlan::from_toml_str(&bad_band).is_err());
    }

    #[test]
    fn explicit_sections_must_be_contiguous() {
        let s = |lo: f64, hi: f64| Section {
            f_lo: lo,
            f_hi: hi,
            label: String::new(),
            active_truth: None,
        };
        assert!(BandPlan::new(0.0, 4.0, 4, vec![s(0.0, 1.0), s(2.0, 4.0)]).is_err());
        assert!(BandPlan::new(0.0, 4.0, 4, vec![s(0.0, 1.0), s(1.0, 3.0)]).is_err());
        assert!(BandPlan::new(0.0, 4.0, 4, vec![s(0.0, 1.0), s(1.0, 4.0)]).is_ok());
    }

    /// Random sorted, non-overlapping band lists on an integer grid.
    fn arb_bands() -> impl Strategy<Value = (usize, Vec<Band>)> {
        (1usize..200).prop_flat_map(|n| {
            proptest::collection::vec(0..=n, 0..12).prop_map(move |mut cuts| {
                cuts.sort_unstable();
                cuts.dedup();
                let bands = cuts
                    .chunks_exact(2)
                    .enumerate()
                    .map(|(i, c)| Band::new(c[0] as f64 * 1e3, c[1] as f64 * 1e3, format!("b{i}")))
                    .collect();
                (n, bands)
            })
        })
    }

    proptest! {
        #[test]
        fn ranges_partition_bins((n, bands) in arb_bands()) {
            let plan = BandPlan::from_bands(0.0, n as f64 * 1e3, n, &bands).unwrap();
            let mut next = 0;
            for r in plan.section_index_ranges() {
                prop_assert_eq!(r.start, next);
                prop_assert!(r.len >= 1);
                next = r.end();
            }
            prop_assert_eq!(next, n);
            prop_assert_eq!(plan.active_bands(), bands);
        }
    }
}
