//! Configuration-driven command drivers behind the `pairspec` binary:
//! simulate, fit, maps, and vfilter.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analysis::{
    entropy_map, fit_gaussian2d, visibility_gamma_maps, DEFAULT_VISIBILITY_ERR_MASK,
};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{GaussianJointModel, WavelengthGrid};
use crate::polarization::AnalyzerSetting;
use crate::simulate::{count_cube, rate_map, sample_counts, SourceConfig};
use crate::vfilter::{optimize_filter, tradeoff_curve, FigureOfMerit};

/// A full run description, loaded from a single JSON document. Every embedded
/// type validates itself during deserialization, and referenced files are
/// resolved against the config's own directory before any computation runs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: SourceConfig,
    pub grid: WavelengthGrid,
    pub settings: Vec<AnalyzerSetting>,
    pub integration_s: f64,
    pub alpha2_scan_deg: Vec<f64>,
    pub scan_integration_s: f64,
    pub visibility_err_mask: f64,
    pub entropy_mask_counts: f64,
    pub vfilter: Option<VfilterConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRunConfig {
    source: SourceSection,
    grid: WavelengthGrid,
    /// Analyzer settings for `simulate`, one rate and one counts map each.
    #[serde(default = "default_settings")]
    settings: Vec<AnalyzerSetting>,
    /// Integration time per pixel for simulated count maps, seconds.
    #[serde(default = "default_integration")]
    integration_s: f64,
    /// Analyzer-2 scan angles for `maps` and `vfilter`, degrees.
    #[serde(default = "default_scan_angles")]
    alpha2_scan_deg: Vec<f64>,
    /// Integration time per scan setting, seconds.
    #[serde(default = "default_scan_integration")]
    scan_integration_s: f64,
    /// Pixels with a larger fitted visibility uncertainty are masked.
    #[serde(default = "default_visibility_mask")]
    visibility_err_mask: f64,
    /// Combined-count threshold below which entropy pixels are masked.
    #[serde(default = "default_entropy_mask")]
    entropy_mask_counts: f64,
    /// Virtual-filter scan description, required by `vfilter`.
    #[serde(default)]
    vfilter: Option<VfilterConfig>,
}

/// Source description with the model either inline (`model_hv`) or in a
/// separate model JSON file (`model_file`, resolved against the config's
/// directory).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSection {
    #[serde(default)]
    model_hv: Option<GaussianJointModel>,
    #[serde(default)]
    model_file: Option<PathBuf>,
    #[serde(default = "default_phase")]
    phase_rad: f64,
    #[serde(default)]
    background_fraction: f64,
    #[serde(default)]
    rng_seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfilterConfig {
    /// Filter center; defaults to the grid's central wavelength pair.
    #[serde(default)]
    pub center_nm: Option<f64>,
    pub fwhm_list_nm: Vec<f64>,
    #[serde(default)]
    pub figure_of_merit: Option<FigureOfMerit>,
    /// Measured or pre-simulated scan cube to ingest instead of simulating
    /// one; resolved against the config's directory.
    #[serde(default)]
    pub cube_file: Option<PathBuf>,
}

fn default_phase() -> f64 {
    std::f64::consts::PI
}

fn default_settings() -> Vec<AnalyzerSetting> {
    vec![
        AnalyzerSetting::new(0.0, 0.0),
        AnalyzerSetting::new(90.0, 90.0),
        AnalyzerSetting::new(45.0, 45.0),
        AnalyzerSetting::new(45.0, -45.0),
    ]
}

fn default_integration() -> f64 {
    22.5
}

fn default_scan_angles() -> Vec<f64> {
    (0..19).map(|k| -90.0 + 10.0 * k as f64).collect()
}

fn default_scan_integration() -> f64 {
    60.0
}

fn default_visibility_mask() -> f64 {
    DEFAULT_VISIBILITY_ERR_MASK
}

fn default_entropy_mask() -> f64 {
    5.0
}

impl RunConfig {
    /// Checks everything the type system has not already enforced, before any
    /// output is produced.
    pub fn validate(&self) -> Result<()> {
        if !(self.integration_s > 0.0) || !(self.scan_integration_s > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "integration times must be > 0, got {} and {}",
                self.integration_s, self.scan_integration_s
            )));
        }
        if !(self.visibility_err_mask > 0.0) {
            return Err(Error::InvalidConfig(
                "visibility_err_mask must be > 0".into(),
            ));
        }
        if self.entropy_mask_counts < 0.0 {
            return Err(Error::InvalidConfig(
                "entropy_mask_counts must be >= 0".into(),
            ));
        }
        if let Some(vf) = &self.vfilter {
            if vf.fwhm_list_nm.is_empty() {
                return Err(Error::InvalidConfig("vfilter.fwhm_list_nm is empty".into()));
            }
            for pair in vf.fwhm_list_nm.windows(2) {
                if !(pair[1] > pair[0]) {
                    return Err(Error::InvalidConfig(
                        "vfilter.fwhm_list_nm must be strictly increasing".into(),
                    ));
                }
            }
            if !(vf.fwhm_list_nm[0] > 0.0) {
                return Err(Error::InvalidConfig(
                    "vfilter bandwidths must be > 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// Central wavelength pair of the configured grid.
    pub fn degeneracy_nm(&self) -> f64 {
        let mid1 = self.grid.lambda1(self.grid.count1() / 2);
        let mid2 = self.grid.lambda2(self.grid.count2() / 2);
        (mid1 + mid2) / 2.0
    }
}

/// Loads and fully validates a run configuration, resolving any referenced
/// files (model, cube) against the config's own directory.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    let raw: RawRunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let model = match (&raw.source.model_hv, &raw.source.model_file) {
        (Some(model), None) => *model,
        (None, Some(file)) => {
            let resolved = base.join(file);
            io::read_model_json(&resolved).map_err(|e| {
                Error::InvalidConfig(format!("model_file {}: {e}", resolved.display()))
            })?
        }
        _ => {
            return Err(Error::InvalidConfig(
                "source needs exactly one of model_hv or model_file".into(),
            ))
        }
    };
    let source = SourceConfig::new(
        model,
        raw.source.phase_rad,
        raw.source.background_fraction,
        raw.source.rng_seed,
    )?;
    let mut vfilter = raw.vfilter;
    if let Some(vf) = &mut vfilter {
        if let Some(cube) = &vf.cube_file {
            let resolved = base.join(cube);
            if !resolved.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "cube_file {} does not exist",
                    resolved.display()
                )));
            }
            vf.cube_file = Some(resolved);
        }
    }
    let config = RunConfig {
        source,
        grid: raw.grid,
        settings: raw.settings,
        integration_s: raw.integration_s,
        alpha2_scan_deg: raw.alpha2_scan_deg,
        scan_integration_s: raw.scan_integration_s,
        visibility_err_mask: raw.visibility_err_mask,
        entropy_mask_counts: raw.entropy_mask_counts,
        vfilter,
    };
    config.validate()?;
    Ok(config)
}

fn angle_tag(setting: &AnalyzerSetting) -> String {
    format!("a1_{}_a2_{}", setting.alpha1_deg, setting.alpha2_deg)
}

fn ensure_out_dir(out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    Ok(())
}

/// Emits one rate map and one Poisson count map per analyzer setting.
/// Count maps for successive settings use seed, seed+1, ... so their noise is
/// independent; a fixed seed makes the whole run byte-reproducible.
pub fn cmd_simulate(config: &RunConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out_dir)?;
    let seed = seed_override.unwrap_or(config.source.rng_seed());
    for (idx, setting) in config.settings.iter().enumerate() {
        let rates = rate_map(&config.source, setting, &config.grid);
        let counts = sample_counts(
            &rates,
            config.integration_s,
            config.source.background_fraction(),
            seed.wrapping_add(idx as u64),
        )?;
        let tag = angle_tag(setting);
        io::write_spectral_map(&out_dir.join(format!("rate_{tag}.csv")), &rates)?;
        io::write_spectral_map(&out_dir.join(format!("counts_{tag}.csv")), &counts)?;
    }
    Ok(())
}

/// Fits the joint-spectrum model to a count map file and writes the fit
/// report next to it.
pub fn cmd_fit(map_path: &Path, out_dir: &Path) -> Result<()> {
    let map = io::read_spectral_map(map_path)?;
    let fit = fit_gaussian2d(&map)?;
    ensure_out_dir(out_dir)?;
    let stem = map_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("map");
    io::write_fit_report(&out_dir.join(format!("{stem}_fit.json")), &fit)
}

/// Simulates the per-pixel polarizer scans and writes the visibility map, the
/// maximum-angle map, and the entropy map of the two decay paths.
pub fn cmd_maps(config: &RunConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    config.validate()?;
    ensure_out_dir(out_dir)?;
    let seed = seed_override.unwrap_or(config.source.rng_seed());
    let (vis, angle) = visibility_gamma_maps(
        &config.source,
        &config.grid,
        &config.alpha2_scan_deg,
        config.scan_integration_s,
        seed,
        config.visibility_err_mask,
    )?;
    if vis.masked_count() == vis.values().len() {
        eprintln!(
            "warning: every pixel is masked at visibility_err_mask = {}",
            config.visibility_err_mask
        );
    }
    io::write_spectral_map(&out_dir.join("visibility_map.csv"), &vis)?;
    io::write_spectral_map(&out_dir.join("max_angle_map.csv"), &angle)?;
    let hv_rates = rate_map(&config.source, &AnalyzerSetting::new(0.0, 0.0), &config.grid);
    let vh_rates = rate_map(
        &config.source,
        &AnalyzerSetting::new(90.0, 90.0),
        &config.grid,
    );
    let hv = sample_counts(
        &hv_rates,
        config.integration_s,
        config.source.background_fraction(),
        seed.wrapping_add(1_000_001),
    )?;
    let vh = sample_counts(
        &vh_rates,
        config.integration_s,
        config.source.background_fraction(),
        seed.wrapping_add(1_000_002),
    )?;
    let entropy = entropy_map(&hv, &vh, config.entropy_mask_counts)?;
    if entropy.masked_count() == entropy.values().len() {
        eprintln!(
            "warning: every entropy pixel is masked at threshold {}",
            config.entropy_mask_counts
        );
    }
    io::write_spectral_map(&out_dir.join("entropy_map.csv"), &entropy)
}

/// Simulates a scan cube, runs the bandwidth tradeoff, and writes the curve
/// plus the optimum under the configured figure of merit.
pub fn cmd_vfilter(config: &RunConfig, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    config.validate()?;
    let vf = config
        .vfilter
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("vfilter section is missing".into()))?;
    ensure_out_dir(out_dir)?;
    let seed = seed_override.unwrap_or(config.source.rng_seed());
    let cube = match &vf.cube_file {
        Some(path) => io::read_scan_cube(path)?,
        None => count_cube(
            &config.source,
            &config.grid,
            45.0,
            &config.alpha2_scan_deg,
            config.scan_integration_s,
            seed,
        )?,
    };
    // Default the filter center to the degeneracy point of whatever grid the
    // cube actually lives on.
    let center = vf.center_nm.unwrap_or_else(|| {
        let grid = cube.grid();
        (grid.lambda1(grid.count1() / 2) + grid.lambda2(grid.count2() / 2)) / 2.0
    });
    let curve = tradeoff_curve(&cube, center, &vf.fwhm_list_nm)?;
    io::write_tradeoff_csv(&out_dir.join("tradeoff.csv"), &curve)?;
    if let Some(merit) = &vf.figure_of_merit {
        let best = optimize_filter(&curve, merit)?;
        let report = serde_json::json!({
            "figure_of_merit": merit,
            "fwhm_nm": best.fwhm_nm,
            "visibility": best.visibility,
            "normalized_rate": best.normalized_rate,
        });
        io::atomic_write(
            &out_dir.join("optimum.json"),
            &format!("{}\n", serde_json::to_string_pretty(&report)?),
        )?;
    }
    Ok(())
}
