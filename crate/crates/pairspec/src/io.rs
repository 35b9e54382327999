//! File formats: spectral-map CSV with a JSON metadata sidecar, scan-cube
//! CSV, model and filter JSON, tradeoff CSV, and fit reports. All writes go
//! through a temp file and an atomic rename.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::GaussianFit;
use crate::error::{Error, Result};
use crate::model::{GaussianJointModel, MapMetadata, SpectralMap, WavelengthGrid};
use crate::simulate::ScanCube;
use crate::vfilter::{FilterProfile, TradeoffCurve, TradeoffPoint};

/// Fixed CSV numeric format: nine significant digits, '.' decimal separator,
/// no locale dependence.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.8e}")
    }
}

fn parse_value(text: &str, path: &Path) -> Result<f64> {
    text.trim().parse::<f64>().map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: format!("bad number {text:?}: {e}"),
    })
}

/// Writes through a temporary file in the destination directory and renames,
/// so a failed run never leaves a partial file behind.
pub fn atomic_write(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))?;
    use std::io::Write;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

#[derive(Serialize, Deserialize)]
struct MapSidecar {
    #[serde(flatten)]
    metadata: MapMetadata,
    grid: WavelengthGrid,
}

/// Writes `lambda1_nm,lambda2_nm,value` rows plus the metadata sidecar
/// (`<stem>.meta.json`).
pub fn write_spectral_map(csv_path: &Path, map: &SpectralMap) -> Result<()> {
    let grid = map.grid();
    let mut text = String::with_capacity(40 * grid.len() + 32);
    text.push_str("lambda1_nm,lambda2_nm,value\n");
    for i in 0..grid.count1() {
        for j in 0..grid.count2() {
            text.push_str(&format!(
                "{},{},{}\n",
                format_value(grid.lambda1(i)),
                format_value(grid.lambda2(j)),
                format_value(map.get(i, j))
            ));
        }
    }
    let sidecar = MapSidecar {
        metadata: map.metadata().clone(),
        grid: *grid,
    };
    atomic_write(csv_path, &text)?;
    atomic_write(
        &sidecar_path(csv_path),
        &format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
    )
}

fn read_sidecar<T: serde::de::DeserializeOwned>(csv_path: &Path) -> Result<T> {
    let path = sidecar_path(csv_path);
    serde_json::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a map written by [`write_spectral_map`], checking the CSV wavelength
/// columns against the sidecar grid.
pub fn read_spectral_map(csv_path: &Path) -> Result<SpectralMap> {
    let sidecar: MapSidecar = read_sidecar(csv_path)?;
    let grid = sidecar.grid;
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("lambda1_nm,lambda2_nm,value") => {}
        other => {
            return Err(Error::Parse {
                path: csv_path.display().to_string(),
                message: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (Some(l1), Some(l2), Some(v)) = (fields.next(), fields.next(), fields.next()) else {
            return Err(Error::Parse {
                path: csv_path.display().to_string(),
                message: format!("row {row}: expected three columns"),
            });
        };
        let idx = values.len();
        let (i, j) = (idx / grid.count2(), idx % grid.count2());
        let l1 = parse_value(l1, csv_path)?;
        let l2 = parse_value(l2, csv_path)?;
        if (l1 - grid.lambda1(i)).abs() > 1e-6 || (l2 - grid.lambda2(j)).abs() > 1e-6 {
            return Err(Error::Parse {
                path: csv_path.display().to_string(),
                message: format!(
                    "row {row}: wavelengths ({l1}, {l2}) do not match the sidecar grid"
                ),
            });
        }
        values.push(parse_value(v, csv_path)?);
    }
    SpectralMap::new(grid, values, sidecar.metadata)
}

#[derive(Serialize, Deserialize)]
struct CubeSidecar {
    alpha1_deg: f64,
    alpha2_deg: Vec<f64>,
    integration_s: f64,
    grid: WavelengthGrid,
}

/// Writes a scan cube as `lambda1_nm,lambda2_nm,alpha2_deg,value` rows,
/// angle-major, plus a sidecar with the fixed analyzer-1 angle, the scan
/// list, the per-setting integration time, and the grid.
pub fn write_scan_cube(csv_path: &Path, cube: &ScanCube) -> Result<()> {
    let grid = cube.grid();
    let mut text = String::with_capacity(50 * grid.len() * cube.angle_count() + 40);
    text.push_str("lambda1_nm,lambda2_nm,alpha2_deg,value\n");
    for (k, &alpha2) in cube.alpha2_deg().iter().enumerate() {
        for i in 0..grid.count1() {
            for j in 0..grid.count2() {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    format_value(grid.lambda1(i)),
                    format_value(grid.lambda2(j)),
                    format_value(alpha2),
                    format_value(cube.value(k, i, j))
                ));
            }
        }
    }
    let sidecar = CubeSidecar {
        alpha1_deg: cube.alpha1_deg(),
        alpha2_deg: cube.alpha2_deg().to_vec(),
        integration_s: cube.integration_s(),
        grid: *grid,
    };
    atomic_write(csv_path, &text)?;
    atomic_write(
        &sidecar_path(csv_path),
        &format!("{}\n", serde_json::to_string_pretty(&sidecar)?),
    )
}

/// Reads a cube written by [`write_scan_cube`].
pub fn read_scan_cube(csv_path: &Path) -> Result<ScanCube> {
    let sidecar: CubeSidecar = read_sidecar(csv_path)?;
    let text = fs::read_to_string(csv_path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("lambda1_nm,lambda2_nm,alpha2_deg,value") => {}
        other => {
            return Err(Error::Parse {
                path: csv_path.display().to_string(),
                message: format!("unexpected header {other:?}"),
            })
        }
    }
    let expected = sidecar.grid.len() * sidecar.alpha2_deg.len();
    let mut values = Vec::with_capacity(expected);
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: csv_path.display().to_string(),
                message: format!("row {row}: expected four columns"),
            });
        }
        values.push(parse_value(fields[3], csv_path)?);
    }
    if values.len() != expected {
        return Err(Error::Parse {
            path: csv_path.display().to_string(),
            message: format!("expected {expected} rows, got {}", values.len()),
        });
    }
    ScanCube::from_parts(
        sidecar.grid,
        sidecar.alpha1_deg,
        sidecar.alpha2_deg,
        sidecar.integration_s,
        values,
    )
}

pub fn write_model_json(path: &Path, model: &GaussianJointModel) -> Result<()> {
    atomic_write(path, &format!("{}\n", serde_json::to_string_pretty(model)?))
}

pub fn read_model_json(path: &Path) -> Result<GaussianJointModel> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn write_fit_report(path: &Path, fit: &GaussianFit) -> Result<()> {
    atomic_write(path, &format!("{}\n", serde_json::to_string_pretty(fit)?))
}

/// Writes `fwhm_nm,visibility,normalized_rate` rows.
pub fn write_tradeoff_csv(path: &Path, curve: &TradeoffCurve) -> Result<()> {
    let mut text = String::from("fwhm_nm,visibility,normalized_rate\n");
    for p in curve.points() {
        text.push_str(&format!(
            "{},{},{}\n",
            format_value(p.fwhm_nm),
            format_value(p.visibility),
            format_value(p.normalized_rate)
        ));
    }
    atomic_write(path, &text)
}

pub fn read_tradeoff_csv(path: &Path) -> Result<TradeoffCurve> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("fwhm_nm,visibility,normalized_rate") => {}
        other => {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: format!("unexpected header {other:?}"),
            })
        }
    }
    let mut points = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: path.display().to_string(),
                message: "expected three columns".to_string(),
            });
        }
        points.push(TradeoffPoint {
            fwhm_nm: parse_value(fields[0], path)?,
            visibility: parse_value(fields[1], path)?,
            normalized_rate: parse_value(fields[2], path)?,
        });
    }
    TradeoffCurve::new(points)
}

/// Reads a filter profile: JSON (`.json`) or a two-column tabulated CSV.
pub fn read_filter(path: &Path) -> Result<FilterProfile> {
    let text = fs::read_to_string(path)?;
    let profile = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        let mut points = Vec::new();
        for (row, line) in text.lines().enumerate() {
            if line.is_empty() || line.starts_with("lambda") || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    message: format!("row {row}: expected two columns"),
                });
            }
            points.push((parse_value(fields[0], path)?, parse_value(fields[1], path)?));
        }
        FilterProfile::Tabulated { points }
    };
    profile.validate()?;
    Ok(profile)
}
