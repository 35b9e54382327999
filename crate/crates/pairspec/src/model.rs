//! Two-dimensional Gaussian model of a photon-pair joint spectrum, the
//! mirrored decay path, marginal widths, and wavelength-resolved maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a Gaussian standard deviation to its full width at half maximum,
/// 2 * sqrt(2 * ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_4;

/// Parameters of one decay path's joint spectrum,
///
/// g(l1, l2) = amplitude * exp(-1/2 * [ (l1 - c1)^2 / sigma1^2
///                                    + (l2 - c2)^2 / sigma2^2
///                                    + (l1 - c1)(l2 - c2) / sigma12 ])
///
/// All wavelengths are vacuum wavelengths in nm. `sigma12` carries nm^2 and
/// enters the cross term with coefficient 1/sigma12; positive values give
/// wavelength anti-correlation along the energy-conservation diagonal.
///
/// A constructed value always satisfies the model invariants; construction
/// and deserialization fail otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct GaussianJointModel {
    lambda1_center_nm: f64,
    lambda2_center_nm: f64,
    sigma1_nm: f64,
    sigma2_nm: f64,
    sigma12_nm2: f64,
    amplitude: f64,
}

/// On-disk shape of a model file; field names are the JSON schema.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawModel {
    lambda1_center_nm: f64,
    lambda2_center_nm: f64,
    sigma1_nm: f64,
    sigma2_nm: f64,
    sigma12_nm2: f64,
    amplitude: f64,
}

impl TryFrom<RawModel> for GaussianJointModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        GaussianJointModel::new(
            raw.lambda1_center_nm,
            raw.lambda2_center_nm,
            raw.sigma1_nm,
            raw.sigma2_nm,
            raw.sigma12_nm2,
            raw.amplitude,
        )
    }
}

impl From<GaussianJointModel> for RawModel {
    fn from(m: GaussianJointModel) -> Self {
        RawModel {
            lambda1_center_nm: m.lambda1_center_nm,
            lambda2_center_nm: m.lambda2_center_nm,
            sigma1_nm: m.sigma1_nm,
            sigma2_nm: m.sigma2_nm,
            sigma12_nm2: m.sigma12_nm2,
            amplitude: m.amplitude,
        }
    }
}

impl GaussianJointModel {
    /// Validates and constructs a model. Every violated invariant is reported
    /// in the error message.
    pub fn new(
        lambda1_center_nm: f64,
        lambda2_center_nm: f64,
        sigma1_nm: f64,
        sigma2_nm: f64,
        sigma12_nm2: f64,
        amplitude: f64,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        for (name, v) in [
            ("lambda1_center_nm", lambda1_center_nm),
            ("lambda2_center_nm", lambda2_center_nm),
            ("sigma1_nm", sigma1_nm),
            ("sigma2_nm", sigma2_nm),
            ("sigma12_nm2", sigma12_nm2),
            ("amplitude", amplitude),
        ] {
            if !v.is_finite() {
                violations.push(format!("{name} must be finite, got {v}"));
            }
        }
        if !(sigma1_nm > 0.0) {
            violations.push(format!("sigma1_nm must be > 0, got {sigma1_nm}"));
        }
        if !(sigma2_nm > 0.0) {
            violations.push(format!("sigma2_nm must be > 0, got {sigma2_nm}"));
        }
        if !(amplitude > 0.0) {
            violations.push(format!("amplitude must be > 0, got {amplitude}"));
        }
        // Positive definiteness of the exponent's quadratic form.
        if !(4.0 * sigma12_nm2 * sigma12_nm2 > sigma1_nm * sigma1_nm * sigma2_nm * sigma2_nm) {
            violations.push(format!(
                "not positive definite: 4*sigma12^2 = {} must exceed sigma1^2*sigma2^2 = {}",
                4.0 * sigma12_nm2 * sigma12_nm2,
                sigma1_nm * sigma1_nm * sigma2_nm * sigma2_nm
            ));
        }
        if violations.is_empty() {
            Ok(GaussianJointModel {
                lambda1_center_nm,
                lambda2_center_nm,
                sigma1_nm,
                sigma2_nm,
                sigma12_nm2,
                amplitude,
            })
        } else {
            Err(Error::InvalidModel(violations.join("; ")))
        }
    }

    pub fn lambda1_center_nm(&self) -> f64 {
        self.lambda1_center_nm
    }

    pub fn lambda2_center_nm(&self) -> f64 {
        self.lambda2_center_nm
    }

    pub fn sigma1_nm(&self) -> f64 {
        self.sigma1_nm
    }

    pub fn sigma2_nm(&self) -> f64 {
        self.sigma2_nm
    }

    pub fn sigma12_nm2(&self) -> f64 {
        self.sigma12_nm2
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Joint spectral rate at a wavelength pair, in the amplitude's units.
    /// Strictly positive, and equal to `amplitude` at the center.
    pub fn eval(&self, lambda1_nm: f64, lambda2_nm: f64) -> f64 {
        let x = lambda1_nm - self.lambda1_center_nm;
        let y = lambda2_nm - self.lambda2_center_nm;
        let quad = (x * x / (self.sigma1_nm * self.sigma1_nm)
            + y * y / (self.sigma2_nm * self.sigma2_nm))
            + x * y / self.sigma12_nm2;
        self.amplitude * (-0.5 * quad).exp()
    }

    /// The mirrored decay path: centers swapped and widths swapped, covariance
    /// and amplitude unchanged. The mirrored path exchanges which arm carries
    /// ordinary vs extraordinary polarization, so evaluating the mirror at
    /// (l1, l2) equals evaluating the original at (l2, l1). Involutive.
    pub fn mirror(&self) -> Self {
        GaussianJointModel {
            lambda1_center_nm: self.lambda2_center_nm,
            lambda2_center_nm: self.lambda1_center_nm,
            sigma1_nm: self.sigma2_nm,
            sigma2_nm: self.sigma1_nm,
            sigma12_nm2: self.sigma12_nm2,
            amplitude: self.amplitude,
        }
    }

    /// FWHM of the marginal spectrum of one arm, integrating the joint
    /// spectrum over the other arm's wavelength.
    pub fn marginal_fwhm_nm(&self, arm: Arm) -> Result<f64> {
        let (s_arm, s_other) = match arm {
            Arm::One => (self.sigma1_nm, self.sigma2_nm),
            Arm::Two => (self.sigma2_nm, self.sigma1_nm),
        };
        marginal_fwhm_raw(s_arm, s_other, self.sigma12_nm2)
    }
}

/// Which detection arm a marginal refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    One,
    Two,
}

/// Core of the marginal-width computation, on raw sigmas.
///
/// Positive definiteness of the joint quadratic form implies a positive
/// bracket for both arms, so the degenerate branch is unreachable through a
/// validated model; it guards direct calls with arbitrary parameters.
pub(crate) fn marginal_fwhm_raw(s_arm: f64, s_other: f64, s12: f64) -> Result<f64> {
    let bracket = 1.0 / (s_arm * s_arm) - (s_other * s_other) / (4.0 * s12 * s12);
    if !(bracket > 0.0) {
        return Err(Error::DegenerateMarginal(format!(
            "1/sigma_arm^2 - sigma_other^2/(4*sigma12^2) = {bracket} is not positive"
        )));
    }
    Ok(FWHM_PER_SIGMA / bracket.sqrt())
}

/// Normalized amplitudes (a, b) of the two decay paths from their local joint
/// spectral rates: a = sqrt(g_hv / (g_hv + g_vh)), b = sqrt(1 - a^2).
///
/// Errors when both rates are zero rather than inventing a default state.
pub fn path_amplitudes(g_hv: f64, g_vh: f64) -> Result<(f64, f64)> {
    if !(g_hv >= 0.0) || !(g_vh >= 0.0) || !g_hv.is_finite() || !g_vh.is_finite() {
        return Err(Error::InvalidState(format!(
            "path rates must be finite and non-negative, got ({g_hv}, {g_vh})"
        )));
    }
    if g_hv + g_vh == 0.0 {
        return Err(Error::UndefinedState);
    }
    // Balanced rates return 1/sqrt(2) for both amplitudes exactly.
    if g_hv == g_vh {
        return Ok((std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2));
    }
    let a = (g_hv / (g_hv + g_vh)).sqrt();
    let b = (1.0 - a * a).sqrt();
    Ok((a, b))
}

/// A rectangular wavelength grid; pixel (i, j) maps to
/// (start1 + i * step1, start2 + j * step2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct WavelengthGrid {
    start1_nm: f64,
    step1_nm: f64,
    count1: usize,
    start2_nm: f64,
    step2_nm: f64,
    count2: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawGrid {
    start1_nm: f64,
    step1_nm: f64,
    count1: usize,
    start2_nm: f64,
    step2_nm: f64,
    count2: usize,
}

impl TryFrom<RawGrid> for WavelengthGrid {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        WavelengthGrid::new(
            raw.start1_nm,
            raw.step1_nm,
            raw.count1,
            raw.start2_nm,
            raw.step2_nm,
            raw.count2,
        )
    }
}

impl From<WavelengthGrid> for RawGrid {
    fn from(g: WavelengthGrid) -> Self {
        RawGrid {
            start1_nm: g.start1_nm,
            step1_nm: g.step1_nm,
            count1: g.count1,
            start2_nm: g.start2_nm,
            step2_nm: g.step2_nm,
            count2: g.count2,
        }
    }
}

impl WavelengthGrid {
    pub fn new(
        start1_nm: f64,
        step1_nm: f64,
        count1: usize,
        start2_nm: f64,
        step2_nm: f64,
        count2: usize,
    ) -> Result<Self> {
        let mut violations = Vec::new();
        if !start1_nm.is_finite() || !start2_nm.is_finite() {
            violations.push("start wavelengths must be finite".to_string());
        }
        if !(step1_nm > 0.0) || !step1_nm.is_finite() {
            violations.push(format!("step1_nm must be finite and > 0, got {step1_nm}"));
        }
        if !(step2_nm > 0.0) || !step2_nm.is_finite() {
            violations.push(format!("step2_nm must be finite and > 0, got {step2_nm}"));
        }
        if count1 == 0 || count2 == 0 {
            violations.push(format!("counts must be > 0, got ({count1}, {count2})"));
        }
        if violations.is_empty() {
            Ok(WavelengthGrid {
                start1_nm,
                step1_nm,
                count1,
                start2_nm,
                step2_nm,
                count2,
            })
        } else {
            Err(Error::InvalidGrid(violations.join("; ")))
        }
    }

    /// Square grid with both axes centered on the same wavelength. `count`
    /// should be odd for the center to fall on a pixel.
    pub fn centered_square(center_nm: f64, step_nm: f64, count: usize) -> Result<Self> {
        let start = center_nm - step_nm * ((count.saturating_sub(1)) as f64) / 2.0;
        WavelengthGrid::new(start, step_nm, count, start, step_nm, count)
    }

    pub fn start1_nm(&self) -> f64 {
        self.start1_nm
    }

    pub fn step1_nm(&self) -> f64 {
        self.step1_nm
    }

    pub fn count1(&self) -> usize {
        self.count1
    }

    pub fn start2_nm(&self) -> f64 {
        self.start2_nm
    }

    pub fn step2_nm(&self) -> f64 {
        self.step2_nm
    }

    pub fn count2(&self) -> usize {
        self.count2
    }

    pub fn lambda1(&self, i: usize) -> f64 {
        self.start1_nm + self.step1_nm * i as f64
    }

    pub fn lambda2(&self, j: usize) -> f64 {
        self.start2_nm + self.step2_nm * j as f64
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.count1 * self.count2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major pixel index of (i, j).
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.count2 + j
    }

    /// The grid with its axes exchanged.
    pub fn transposed(&self) -> Self {
        WavelengthGrid {
            start1_nm: self.start2_nm,
            step1_nm: self.step2_nm,
            count1: self.count2,
            start2_nm: self.start1_nm,
            step2_nm: self.step1_nm,
            count2: self.count1,
        }
    }
}

/// What a spectral map's values mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Coincidence rate, events per second.
    Rate,
    /// Poisson-sampled coincidence counts over some integration time.
    Counts,
    /// Fitted visibility of the polarizer scan, dimensionless in [0, 1].
    Visibility,
    /// Analyzer-2 angle of maximum coincidence rate, degrees in (-90, 90].
    GammaDeg,
    /// Entanglement entropy in bits, in [0, 1].
    EntropyBits,
}

impl MapKind {
    /// Conventional unit string for this kind.
    pub fn units(&self) -> &'static str {
        match self {
            MapKind::Rate => "events/s",
            MapKind::Counts => "counts",
            MapKind::Visibility => "",
            MapKind::GammaDeg => "deg",
            MapKind::EntropyBits => "bits",
        }
    }
}

/// Sidecar metadata accompanying a map's value matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub kind: MapKind,
    pub units: String,
    /// Analyzer angles (arm 1 from H, arm 2 from V) if the map was taken at a
    /// fixed setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyzer_deg: Option<[f64; 2]>,
    /// Integration time per pixel in seconds, for counts maps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integration_s: Option<f64>,
}

impl MapMetadata {
    pub fn new(kind: MapKind) -> Self {
        MapMetadata {
            kind,
            units: kind.units().to_string(),
            analyzer_deg: None,
            integration_s: None,
        }
    }

    pub fn with_analyzer(mut self, alpha1_deg: f64, alpha2_deg: f64) -> Self {
        self.analyzer_deg = Some([alpha1_deg, alpha2_deg]);
        self
    }

    pub fn with_integration(mut self, integration_s: f64) -> Self {
        self.integration_s = Some(integration_s);
        self
    }
}

/// A value on a rectangular wavelength grid. Masked pixels are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMap {
    grid: WavelengthGrid,
    values: Vec<f64>,
    metadata: MapMetadata,
}

impl SpectralMap {
    /// Validates the value matrix against the grid dimensions and the
    /// declared kind: counts must be non-negative integers, visibilities and
    /// entropies must lie in [0, 1], angles in (-90, 90]. NaN marks a masked
    /// pixel and is accepted for any kind.
    pub fn new(grid: WavelengthGrid, values: Vec<f64>, metadata: MapMetadata) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidMap(format!(
                "value matrix has {} entries, grid has {} pixels",
                values.len(),
                grid.len()
            )));
        }
        for (idx, &v) in values.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            let ok = match metadata.kind {
                MapKind::Rate => v.is_finite() && v >= 0.0,
                MapKind::Counts => v.is_finite() && v >= 0.0 && v.fract() == 0.0,
                MapKind::Visibility | MapKind::EntropyBits => (0.0..=1.0).contains(&v),
                MapKind::GammaDeg => -90.0 < v && v <= 90.0,
            };
            if !ok {
                return Err(Error::InvalidMap(format!(
                    "value {v} at pixel {idx} is not a valid {:?} entry",
                    metadata.kind
                )));
            }
        }
        Ok(SpectralMap {
            grid,
            values,
            metadata,
        })
    }

    /// Builds a map by evaluating `f` at every pixel's wavelength pair.
    pub fn from_fn(
        grid: WavelengthGrid,
        metadata: MapMetadata,
        mut f: impl FnMut(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.count1() {
            let l1 = grid.lambda1(i);
            for j in 0..grid.count2() {
                values.push(f(l1, grid.lambda2(j)));
            }
        }
        SpectralMap::new(grid, values, metadata)
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn metadata(&self) -> &MapMetadata {
        &self.metadata
    }

    pub fn kind(&self) -> MapKind {
        self.metadata.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Mean over unmasked pixels; zero for an all-masked map.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for &v in &self.values {
            if v.is_finite() {
                sum += v;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }

    /// Pixel indices of the largest unmasked value.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, &v) in self.values.iter().enumerate() {
            if v.is_finite() && best.map_or(true, |(_, bv)| v > bv) {
                best = Some((idx, v));
            }
        }
        best.map(|(idx, _)| (idx / self.grid.count2(), idx % self.grid.count2()))
    }

    /// Number of masked (NaN) pixels.
    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// The map with wavelength axes exchanged: value(i, j) -> value(j, i).
    pub fn transposed(&self) -> Self {
        let grid = self.grid.transposed();
        let mut values = Vec::with_capacity(self.values.len());
        for j in 0..grid.count1() {
            for i in 0..grid.count2() {
                values.push(self.values[self.grid.index(i, j)]);
            }
        }
        SpectralMap {
            grid,
            values,
            metadata: self.metadata.clone(),
        }
    }
}
