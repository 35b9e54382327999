//! Virtual spectral filtering: weighting a scan cube by per-arm transmission
//! profiles, the visibility/rate tradeoff over filter bandwidth, the flat
//! accidental-background correction, and bandwidth optimization.

use serde::{Deserialize, Serialize};

use crate::analysis::{fit_sinusoid, PolarizerScan, ScanSample};
use crate::error::{Error, Result};
use crate::simulate::ScanCube;

/// Spectral transmission of one arm's filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterProfile {
    /// t(l) = 1 / (1 + (2 (l - center) / fwhm)^2); peak transmission exactly
    /// 1 at the center.
    Lorentzian { center_nm: f64, fwhm_nm: f64 },
    /// Piecewise-linear tabulated transmission, zero outside the table.
    Tabulated { points: Vec<(f64, f64)> },
}

impl FilterProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            FilterProfile::Lorentzian { center_nm, fwhm_nm } => {
                if !center_nm.is_finite() || !fwhm_nm.is_finite() || !(*fwhm_nm > 0.0) {
                    return Err(Error::InvalidFilter(format!(
                        "Lorentzian needs finite center and fwhm > 0, got ({center_nm}, {fwhm_nm})"
                    )));
                }
            }
            FilterProfile::Tabulated { points } => {
                if points.is_empty() {
                    return Err(Error::InvalidFilter("empty transmission table".into()));
                }
                for window in points.windows(2) {
                    if !(window[1].0 > window[0].0) {
                        return Err(Error::InvalidFilter(format!(
                            "table wavelengths must be strictly increasing, got {} then {}",
                            window[0].0, window[1].0
                        )));
                    }
                }
                for &(l, t) in points {
                    if !l.is_finite() || !(0.0..=1.0).contains(&t) {
                        return Err(Error::InvalidFilter(format!(
                            "table entries must be finite with transmission in [0, 1], got ({l}, {t})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Intensity transmission at a wavelength.
    pub fn transmission(&self, lambda_nm: f64) -> f64 {
        match self {
            FilterProfile::Lorentzian { center_nm, fwhm_nm } => {
                let u = 2.0 * (lambda_nm - center_nm) / fwhm_nm;
                1.0 / (1.0 + u * u)
            }
            FilterProfile::Tabulated { points } => {
                if points.len() == 1 {
                    return if lambda_nm == points[0].0 {
                        points[0].1
                    } else {
                        0.0
                    };
                }
                let first = points[0].0;
                let last = points[points.len() - 1].0;
                if lambda_nm < first || lambda_nm > last {
                    return 0.0;
                }
                let hi = points.partition_point(|&(l, _)| l < lambda_nm);
                if hi == 0 {
                    return points[0].1;
                }
                if hi == points.len() {
                    return points[points.len() - 1].1;
                }
                let (l0, t0) = points[hi - 1];
                let (l1, t1) = points[hi];
                if lambda_nm == l1 {
                    t1
                } else {
                    t0 + (t1 - t0) * (lambda_nm - l0) / (l1 - l0)
                }
            }
        }
    }
}

/// Kahan compensated sum over a fixed iteration order; keeps the weighted
/// grid sums run-to-run deterministic.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let y = v - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Integrated scan under per-arm filters: for each analyzer-2 angle,
/// C(alpha2) = sum over pixels of c(l1, l2, alpha2) * f1(l1) * f2(l2),
/// returned as real-valued effective counts. With both filters identically
/// one this is the plain aggregate scan.
pub fn filtered_scan(
    cube: &ScanCube,
    f1: &FilterProfile,
    f2: &FilterProfile,
) -> Result<PolarizerScan> {
    f1.validate()?;
    f2.validate()?;
    let grid = cube.grid();
    let t1: Vec<f64> = (0..grid.count1())
        .map(|i| f1.transmission(grid.lambda1(i)))
        .collect();
    let t2: Vec<f64> = (0..grid.count2())
        .map(|j| f2.transmission(grid.lambda2(j)))
        .collect();
    let mut samples = Vec::with_capacity(cube.angle_count());
    for (k, &alpha2_deg) in cube.alpha2_deg().iter().enumerate() {
        let counts = compensated_sum(
            (0..grid.count1())
                .flat_map(|i| (0..grid.count2()).map(move |j| (i, j)))
                .map(|(i, j)| cube.value(k, i, j) * t1[i] * t2[j]),
        );
        samples.push(ScanSample {
            alpha2_deg,
            counts: counts.max(0.0),
            integration_s: cube.integration_s(),
        });
    }
    Ok(PolarizerScan {
        alpha1_deg: cube.alpha1_deg(),
        samples,
    })
}

/// One scanned bandwidth of a tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub fwhm_nm: f64,
    pub visibility: f64,
    pub normalized_rate: f64,
}

/// Visibility and normalized pair rate versus filter bandwidth. Bandwidths
/// are strictly increasing and the rate, normalized to the widest scanned
/// bandwidth, is non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TradeoffPoint>", into = "Vec<TradeoffPoint>")]
pub struct TradeoffCurve {
    points: Vec<TradeoffPoint>,
}

impl TryFrom<Vec<TradeoffPoint>> for TradeoffCurve {
    type Error = Error;

    fn try_from(points: Vec<TradeoffPoint>) -> Result<Self> {
        TradeoffCurve::new(points)
    }
}

impl From<TradeoffCurve> for Vec<TradeoffPoint> {
    fn from(curve: TradeoffCurve) -> Self {
        curve.points
    }
}

impl TradeoffCurve {
    pub fn new(points: Vec<TradeoffPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty tradeoff curve".into()));
        }
        for pair in points.windows(2) {
            if !(pair[1].fwhm_nm > pair[0].fwhm_nm) {
                return Err(Error::InvalidConfig(format!(
                    "bandwidths must be strictly increasing, got {} then {}",
                    pair[0].fwhm_nm, pair[1].fwhm_nm
                )));
            }
            if pair[1].normalized_rate < pair[0].normalized_rate * (1.0 - 1e-9) {
                return Err(Error::InvalidConfig(format!(
                    "normalized rate must be non-decreasing, got {} then {}",
                    pair[0].normalized_rate, pair[1].normalized_rate
                )));
            }
        }
        Ok(TradeoffCurve { points })
    }

    pub fn points(&self) -> &[TradeoffPoint] {
        &self.points
    }
}

/// Scans identical Lorentzian filters on both arms, centered at `center_nm`,
/// over the given strictly increasing bandwidth list. Each bandwidth yields
/// the fitted visibility of the filtered scan and its mean rate; rates are
/// normalized so the widest bandwidth reads 1.
pub fn tradeoff_curve(cube: &ScanCube, center_nm: f64, fwhm_list: &[f64]) -> Result<TradeoffCurve> {
    if fwhm_list.is_empty() {
        return Err(Error::InvalidConfig("empty bandwidth list".into()));
    }
    for pair in fwhm_list.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(Error::InvalidConfig(
                "bandwidth list must be strictly increasing".into(),
            ));
        }
    }
    let mut raw = Vec::with_capacity(fwhm_list.len());
    for &fwhm_nm in fwhm_list {
        let filter = FilterProfile::Lorentzian {
            center_nm,
            fwhm_nm,
        };
        let scan = filtered_scan(cube, &filter, &filter)?;
        let fit = fit_sinusoid(&scan)?;
        // Mean rate over the scan, not the fitted offset, so that the rate is
        // a fixed positive functional of the cube.
        let mean_rate = scan
            .samples
            .iter()
            .map(|s| s.counts / s.integration_s)
            .sum::<f64>()
            / scan.samples.len() as f64;
        raw.push((fwhm_nm, fit.visibility, mean_rate));
    }
    let reference = raw.last().unwrap().2;
    if !(reference > 0.0) {
        return Err(Error::InvalidScan(
            "widest-bandwidth rate is zero; cannot normalize".into(),
        ));
    }
    TradeoffCurve::new(
        raw.into_iter()
            .map(|(fwhm_nm, visibility, rate)| TradeoffPoint {
                fwhm_nm,
                visibility,
                normalized_rate: rate / reference,
            })
            .collect(),
    )
}

/// Tolerance above 1 accepted before a correction is declared inconsistent.
const CORRECTION_TOL: f64 = 1e-9;

/// Removes a flat, polarization-independent accidental background whose mean
/// coincidence-rate fraction is `rho`: the background shifts the scan offset
/// without touching its amplitude, so the two-photon visibility is
/// v / (1 - rho).
pub fn correct_fourphoton(v_measured: f64, rho: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v_measured) {
        return Err(Error::InvalidState(format!(
            "measured visibility must lie in [0, 1], got {v_measured}"
        )));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidState(format!(
            "background fraction must lie in [0, 1), got {rho}"
        )));
    }
    let corrected = v_measured / (1.0 - rho);
    if corrected > 1.0 + CORRECTION_TOL {
        return Err(Error::InconsistentCorrection { corrected });
    }
    Ok(corrected)
}

/// Criterion for picking a bandwidth off a tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FigureOfMerit {
    /// Maximize the normalized rate subject to visibility >= `v_min`.
    RateAtMinVisibility { v_min: f64 },
    /// Maximize normalized_rate * visibility^exponent.
    RateTimesVisibilityPow { exponent: f64 },
}

/// Picks the scanned bandwidth maximizing the figure of merit; ties break
/// toward the larger bandwidth.
pub fn optimize_filter(curve: &TradeoffCurve, merit: &FigureOfMerit) -> Result<TradeoffPoint> {
    match merit {
        FigureOfMerit::RateAtMinVisibility { v_min } => {
            if !(0.0..=1.0).contains(v_min) {
                return Err(Error::InvalidConfig(format!(
                    "v_min must lie in [0, 1], got {v_min}"
                )));
            }
            let mut best: Option<TradeoffPoint> = None;
            for p in curve.points() {
                if p.visibility >= *v_min
                    && best.map_or(true, |b| p.normalized_rate >= b.normalized_rate)
                {
                    best = Some(*p);
                }
            }
            best.ok_or_else(|| {
                Error::Infeasible(format!("no scanned bandwidth reaches visibility {v_min}"))
            })
        }
        FigureOfMerit::RateTimesVisibilityPow { exponent } => {
            if !(*exponent > 0.0) || !exponent.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "exponent must be finite and > 0, got {exponent}"
                )));
            }
            let mut best: Option<(f64, TradeoffPoint)> = None;
            for p in curve.points() {
                let merit = p.normalized_rate * p.visibility.max(0.0).powf(*exponent);
                if best.map_or(true, |(m, _)| merit >= m) {
                    best = Some((merit, *p));
                }
            }
            Ok(best.expect("curve is never empty").1)
        }
    }
}
