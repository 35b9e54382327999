//! Forward model: synthetic coincidence-rate maps, Poisson-sampled count
//! maps, and polarizer-scan cubes, with an optional flat accidental
//! background.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GaussianJointModel, MapKind, MapMetadata, SpectralMap, WavelengthGrid};
use crate::polarization::AnalyzerSetting;

/// Source description: the H1V2 joint-spectrum model (the V1H2 path is its
/// mirror), the relative phase between the paths, and a flat accidental
/// background expressed as a fraction of the mean total coincidence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSourceConfig", into = "RawSourceConfig")]
pub struct SourceConfig {
    model_hv: GaussianJointModel,
    phase_rad: f64,
    background_fraction: f64,
    rng_seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawSourceConfig {
    model_hv: GaussianJointModel,
    #[serde(default = "default_phase")]
    phase_rad: f64,
    #[serde(default)]
    background_fraction: f64,
    #[serde(default)]
    rng_seed: u64,
}

fn default_phase() -> f64 {
    std::f64::consts::PI
}

impl TryFrom<RawSourceConfig> for SourceConfig {
    type Error = Error;

    fn try_from(raw: RawSourceConfig) -> Result<Self> {
        SourceConfig::new(
            raw.model_hv,
            raw.phase_rad,
            raw.background_fraction,
            raw.rng_seed,
        )
    }
}

impl From<SourceConfig> for RawSourceConfig {
    fn from(c: SourceConfig) -> Self {
        RawSourceConfig {
            model_hv: c.model_hv,
            phase_rad: c.phase_rad,
            background_fraction: c.background_fraction,
            rng_seed: c.rng_seed,
        }
    }
}

impl SourceConfig {
    pub fn new(
        model_hv: GaussianJointModel,
        phase_rad: f64,
        background_fraction: f64,
        rng_seed: u64,
    ) -> Result<Self> {
        if !phase_rad.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "phase_rad must be finite, got {phase_rad}"
            )));
        }
        if !(0.0..1.0).contains(&background_fraction) {
            return Err(Error::InvalidConfig(format!(
                "background_fraction must lie in [0, 1), got {background_fraction}"
            )));
        }
        Ok(SourceConfig {
            model_hv,
            phase_rad,
            background_fraction,
            rng_seed,
        })
    }

    pub fn model_hv(&self) -> &GaussianJointModel {
        &self.model_hv
    }

    pub fn phase_rad(&self) -> f64 {
        self.phase_rad
    }

    pub fn background_fraction(&self) -> f64 {
        self.background_fraction
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Coincidence-rate map at one analyzer setting.
///
/// Per pixel the two decay-path rates are superposed coherently with
/// unnormalized amplitudes, so natural-basis settings recover the individual
/// joint spectra exactly:
///
/// rate = |sqrt(g_hv) cos(a1) cos(a2) + sqrt(g_vh) e^{i phase} sin(a1) sin(a2)|^2
pub fn rate_map(
    config: &SourceConfig,
    setting: &AnalyzerSetting,
    grid: &WavelengthGrid,
) -> SpectralMap {
    let model_vh = config.model_hv.mirror();
    let a1 = setting.alpha1_deg.to_radians();
    let a2 = setting.alpha2_deg.to_radians();
    let (c1, s1) = (a1.cos(), a1.sin());
    let (c2, s2) = (a2.cos(), a2.sin());
    let cos_phase = config.phase_rad.cos();
    let metadata = MapMetadata::new(MapKind::Rate)
        .with_analyzer(setting.alpha1_deg, setting.alpha2_deg);
    SpectralMap::from_fn(*grid, metadata, |l1, l2| {
        let g_hv = config.model_hv.eval(l1, l2);
        let g_vh = model_vh.eval(l1, l2);
        let rate = g_hv * c1 * c1 * c2 * c2
            + g_vh * s1 * s1 * s2 * s2
            + 2.0 * (g_hv * g_vh).sqrt() * cos_phase * c1 * s1 * c2 * s2;
        rate.max(0.0)
    })
    .expect("rates from a validated model are non-negative")
}

/// One Poisson draw from a dedicated (seed, stream) substream, so results do
/// not depend on pixel evaluation order.
fn poisson_draw(mean: f64, seed: u64, stream: u64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let poisson = Poisson::new(mean).expect("positive finite mean");
    poisson.sample(&mut rng) as u64
}

/// Flat background rate implied by a background fraction and the map-average
/// signal rate: background / (signal + background) = rho on average.
fn background_floor(mean_signal_rate: f64, background_fraction: f64) -> f64 {
    if background_fraction == 0.0 {
        0.0
    } else {
        background_fraction * mean_signal_rate / (1.0 - background_fraction)
    }
}

/// Poisson-sampled count map for a rate map: per pixel an independent draw
/// with mean (rate + rho * mean_rate / (1 - rho)) * integration_s, where
/// mean_rate is the map-average signal rate. The background floor is flat
/// over the map and independent of the analyzer setting that produced it.
/// Deterministic for a given seed regardless of evaluation order.
pub fn sample_counts(
    rates: &SpectralMap,
    integration_s: f64,
    background_fraction: f64,
    seed: u64,
) -> Result<SpectralMap> {
    if rates.kind() != MapKind::Rate {
        return Err(Error::InvalidMap(format!(
            "sample_counts needs a rate map, got {:?}",
            rates.kind()
        )));
    }
    if !(integration_s > 0.0) || !integration_s.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "integration_s must be finite and > 0, got {integration_s}"
        )));
    }
    if !(0.0..1.0).contains(&background_fraction) {
        return Err(Error::InvalidConfig(format!(
            "background_fraction must lie in [0, 1), got {background_fraction}"
        )));
    }
    let floor = background_floor(rates.mean(), background_fraction);
    let values: Vec<f64> = rates
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &rate)| {
            if rate.is_nan() {
                f64::NAN
            } else {
                poisson_draw((rate + floor) * integration_s, seed, idx as u64) as f64
            }
        })
        .collect();
    let mut metadata = MapMetadata::new(MapKind::Counts).with_integration(integration_s);
    metadata.analyzer_deg = rates.metadata().analyzer_deg;
    SpectralMap::new(*rates.grid(), values, metadata)
}

/// Per-pixel polarizer scans: effective counts c(l1, l2, alpha2) with
/// analyzer 1 fixed. Values are angle-major: one full map per scan angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanCube {
    grid: WavelengthGrid,
    alpha1_deg: f64,
    alpha2_deg: Vec<f64>,
    integration_s: f64,
    values: Vec<f64>,
}

impl ScanCube {
    /// Assembles a cube from per-angle maps sharing one grid.
    pub fn from_maps(maps: &[SpectralMap], alpha1_deg: f64, alpha2_deg: &[f64]) -> Result<Self> {
        if maps.is_empty() || maps.len() != alpha2_deg.len() {
            return Err(Error::InvalidScan(format!(
                "need one map per scan angle, got {} maps for {} angles",
                maps.len(),
                alpha2_deg.len()
            )));
        }
        let grid = *maps[0].grid();
        let integration_s = maps[0].metadata().integration_s.unwrap_or(1.0);
        let mut values = Vec::with_capacity(grid.len() * maps.len());
        for map in maps {
            if *map.grid() != grid {
                return Err(Error::GridMismatch(
                    "scan-cube maps must share one grid".to_string(),
                ));
            }
            values.extend_from_slice(map.values());
        }
        Ok(ScanCube {
            grid,
            alpha1_deg,
            alpha2_deg: alpha2_deg.to_vec(),
            integration_s,
            values,
        })
    }

    pub fn grid(&self) -> &WavelengthGrid {
        &self.grid
    }

    pub fn alpha1_deg(&self) -> f64 {
        self.alpha1_deg
    }

    pub fn alpha2_deg(&self) -> &[f64] {
        &self.alpha2_deg
    }

    pub fn integration_s(&self) -> f64 {
        self.integration_s
    }

    /// Raw angle-major values, `angle_count * grid.len()` entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn angle_count(&self) -> usize {
        self.alpha2_deg.len()
    }

    /// Effective counts at scan angle `k` and pixel (i, j).
    pub fn value(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[k * self.grid.len() + self.grid.index(i, j)]
    }

    pub(crate) fn from_parts(
        grid: WavelengthGrid,
        alpha1_deg: f64,
        alpha2_deg: Vec<f64>,
        integration_s: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        if alpha2_deg.is_empty() || values.len() != alpha2_deg.len() * grid.len() {
            return Err(Error::InvalidScan(format!(
                "cube needs count-per-angle-per-pixel values, got {} for {} angles x {} pixels",
                values.len(),
                alpha2_deg.len(),
                grid.len()
            )));
        }
        Ok(ScanCube {
            grid,
            alpha1_deg,
            alpha2_deg,
            integration_s,
            values,
        })
    }
}

/// Noiseless scan cube: per-pixel rates at each analyzer-2 angle, usable as
/// effective counts with a one-second integration.
pub fn rate_cube(
    config: &SourceConfig,
    grid: &WavelengthGrid,
    alpha1_deg: f64,
    alpha2_deg: &[f64],
) -> Result<ScanCube> {
    let mut values = Vec::with_capacity(alpha2_deg.len() * grid.len());
    for &alpha2 in alpha2_deg {
        let map = rate_map(config, &AnalyzerSetting::new(alpha1_deg, alpha2), grid);
        values.extend_from_slice(map.values());
    }
    ScanCube::from_parts(*grid, alpha1_deg, alpha2_deg.to_vec(), 1.0, values)
}

/// Poisson-sampled scan cube. The accidental floor is computed from the mean
/// signal rate over the whole cube, so it is flat in both wavelength and
/// analyzer angle. Substreams are indexed by (angle, pixel), making the cube
/// deterministic in `seed` and independent of evaluation order.
pub fn count_cube(
    config: &SourceConfig,
    grid: &WavelengthGrid,
    alpha1_deg: f64,
    alpha2_deg: &[f64],
    integration_s: f64,
    seed: u64,
) -> Result<ScanCube> {
    if !(integration_s > 0.0) || !integration_s.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "integration_s must be finite and > 0, got {integration_s}"
        )));
    }
    if alpha2_deg.is_empty() {
        return Err(Error::InvalidScan("empty scan-angle list".to_string()));
    }
    let mut rates = Vec::with_capacity(alpha2_deg.len() * grid.len());
    for &alpha2 in alpha2_deg {
        let map = rate_map(config, &AnalyzerSetting::new(alpha1_deg, alpha2), grid);
        rates.extend_from_slice(map.values());
    }
    let mean_rate = rates.iter().sum::<f64>() / rates.len() as f64;
    let floor = background_floor(mean_rate, config.background_fraction);
    let values: Vec<f64> = rates
        .iter()
        .enumerate()
        .map(|(idx, &rate)| poisson_draw((rate + floor) * integration_s, seed, idx as u64) as f64)
        .collect();
    ScanCube::from_parts(
        *grid,
        alpha1_deg,
        alpha2_deg.to_vec(),
        integration_s,
        values,
    )
}
