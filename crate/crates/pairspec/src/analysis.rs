//! Inverse problems: sinusoid fits of polarizer scans, damped least-squares
//! fits of the joint-spectrum model to count maps, and the assembly of
//! visibility, maximum-angle, and entropy maps.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    path_amplitudes, GaussianJointModel, MapKind, MapMetadata, SpectralMap, WavelengthGrid,
};
use crate::polarization::TwoPathState;
use crate::simulate::{count_cube, ScanCube, SourceConfig};

/// Default mask on the visibility maps: pixels whose fitted visibility
/// uncertainty exceeds this are dropped.
pub const DEFAULT_VISIBILITY_ERR_MASK: f64 = 0.11;

/// One sample of a polarizer scan at fixed analyzer 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSample {
    pub alpha2_deg: f64,
    /// Coincidence counts; real-valued so that filtered effective counts fit
    /// the same type.
    pub counts: f64,
    pub integration_s: f64,
}

/// Coincidence counts versus analyzer-2 angle at fixed analyzer 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizerScan {
    pub alpha1_deg: f64,
    pub samples: Vec<ScanSample>,
}

impl PolarizerScan {
    /// A scan supports the three-coefficient fit only with at least three
    /// angles distinct modulo 180 degrees.
    pub fn validate(&self) -> Result<()> {
        let mut distinct: Vec<f64> = Vec::new();
        for s in &self.samples {
            if !s.counts.is_finite() || s.counts < 0.0 {
                return Err(Error::InvalidScan(format!(
                    "counts must be finite and non-negative, got {}",
                    s.counts
                )));
            }
            if !(s.integration_s > 0.0) {
                return Err(Error::InvalidScan(format!(
                    "integration_s must be > 0, got {}",
                    s.integration_s
                )));
            }
            let folded = s.alpha2_deg.rem_euclid(180.0);
            if !distinct
                .iter()
                .any(|&d| (d - folded).abs() < 1e-9 || (d - folded).abs() > 180.0 - 1e-9)
            {
                distinct.push(folded);
            }
        }
        if distinct.len() < 3 {
            return Err(Error::TooFewPoints {
                needed: 3,
                got: distinct.len(),
            });
        }
        Ok(())
    }
}

/// Result of the sinusoidal scan fit. `offset` and `visibility` describe
/// counts/s = offset * (1 + visibility * cos(2 (alpha2 - max_angle))); the
/// maximum angle is None for a scan without modulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub offset: f64,
    pub offset_err: f64,
    pub visibility: f64,
    pub visibility_err: f64,
    pub max_angle_deg: Option<f64>,
    pub max_angle_err_deg: Option<f64>,
}

/// Weighted closed-form fit of counts/t = p0 + p1 cos(2 a) + p2 sin(2 a).
///
/// Weights are Poisson, 1/max(counts, 1). The visibility is
/// sqrt(p1^2 + p2^2)/p0 and the maximum angle atan2(p2, p1)/2; uncertainties
/// come from first-order propagation through the weighted normal equations.
pub fn fit_sinusoid(scan: &PolarizerScan) -> Result<VisibilityFit> {
    scan.validate()?;
    let mut normal = SMatrix::<f64, 3, 3>::zeros();
    let mut rhs = SVector::<f64, 3>::zeros();
    // Sandwich term for the parameter covariance: sum w^2 var(y) x x^T.
    let mut meat = SMatrix::<f64, 3, 3>::zeros();
    for s in &scan.samples {
        let t2 = 2.0 * s.alpha2_deg.to_radians();
        let x = SVector::<f64, 3>::new(1.0, t2.cos(), t2.sin());
        let w = 1.0 / s.counts.max(1.0);
        let y = s.counts / s.integration_s;
        let var_y = s.counts.max(1.0) / (s.integration_s * s.integration_s);
        normal += w * x * x.transpose();
        rhs += w * y * x;
        meat += w * w * var_y * x * x.transpose();
    }
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::InvalidScan("scan angles are degenerate".to_string()))?;
    let p = inv * rhs;
    let cov = inv * meat * inv;
    let (p0, p1, p2) = (p[0], p[1], p[2]);
    if !(p0 > 0.0) {
        return Err(Error::NonPositiveOffset);
    }
    let amplitude = p1.hypot(p2);
    let visibility = amplitude / p0;
    let offset_err = cov[(0, 0)].max(0.0).sqrt();
    if amplitude <= 1e-12 * p0 {
        // No modulation: the visibility is zero and the angle undefined.
        let visibility_err = ((cov[(1, 1)] + cov[(2, 2)]).max(0.0) / 2.0).sqrt() / p0;
        return Ok(VisibilityFit {
            offset: p0,
            offset_err,
            visibility: 0.0,
            visibility_err,
            max_angle_deg: None,
            max_angle_err_deg: None,
        });
    }
    let grad_v = SVector::<f64, 3>::new(
        -amplitude / (p0 * p0),
        p1 / (amplitude * p0),
        p2 / (amplitude * p0),
    );
    let visibility_err = (grad_v.transpose() * cov * grad_v)[(0, 0)].max(0.0).sqrt();
    let p2_clean = if p2 == 0.0 { 0.0 } else { p2 };
    let max_angle_deg = (0.5 * p2_clean.atan2(p1)).to_degrees();
    let grad_g = SVector::<f64, 3>::new(
        0.0,
        -p2 / (2.0 * amplitude * amplitude),
        p1 / (2.0 * amplitude * amplitude),
    );
    let max_angle_err_deg = (grad_g.transpose() * cov * grad_g)[(0, 0)]
        .max(0.0)
        .sqrt()
        .to_degrees();
    Ok(VisibilityFit {
        offset: p0,
        offset_err,
        visibility,
        visibility_err,
        max_angle_deg: Some(max_angle_deg),
        max_angle_err_deg: Some(max_angle_err_deg),
    })
}

/// Per-parameter 1-sigma uncertainties of a joint-spectrum fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelUncertainties {
    pub lambda1_center_nm: f64,
    pub lambda2_center_nm: f64,
    pub sigma1_nm: f64,
    pub sigma2_nm: f64,
    pub sigma12_nm2: f64,
    pub amplitude: f64,
}

/// Converged joint-spectrum fit: best-fit model, uncertainties, iteration
/// count, and the weighted residual sum of squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub model: GaussianJointModel,
    pub uncertainties: ModelUncertainties,
    pub iterations: usize,
    pub chi2: f64,
}

const FIT_MAX_ITERATIONS: usize = 200;
const FIT_RELATIVE_TOL: f64 = 1e-8;

/// Two-stage fit of the joint-spectrum model to a count or rate map.
///
/// Stage one fits a quadratic form to the log of the counts (pixels above a
/// noise floor, weights proportional to counts) for initialization; stage two
/// refines with damped iterative least squares under Poisson weights
/// 1/max(counts, 1) until the relative parameter change drops below 1e-8.
/// Initialization from the log-linear solve rather than moments keeps the fit
/// honest when the map is truncated by the scan window.
pub fn fit_gaussian2d(map: &SpectralMap) -> Result<GaussianFit> {
    if !matches!(map.kind(), MapKind::Counts | MapKind::Rate) {
        return Err(Error::InvalidMap(format!(
            "can only fit counts or rate maps, got {:?}",
            map.kind()
        )));
    }
    let time = map.metadata().integration_s.unwrap_or(1.0);
    let grid = *map.grid();
    let peak = map
        .values()
        .iter()
        .cloned()
        .filter(|v| v.is_finite())
        .fold(f64::MIN, f64::max);
    if !(peak > 0.0) {
        return Err(Error::TooFewPoints { needed: 6, got: 0 });
    }
    let noise_floor = match map.kind() {
        MapKind::Counts => 5.0,
        _ => peak * 1e-9,
    };

    // Stage one: weighted quadratic fit to log counts.
    let mut pixels: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..grid.count1() {
        for j in 0..grid.count2() {
            let c = map.get(i, j);
            if c.is_finite() && c >= noise_floor {
                pixels.push((grid.lambda1(i), grid.lambda2(j), c));
            }
        }
    }
    if pixels.len() < 6 {
        return Err(Error::TooFewPoints {
            needed: 6,
            got: pixels.len(),
        });
    }
    let weight_sum: f64 = pixels.iter().map(|p| p.2).sum();
    let ref1 = pixels.iter().map(|p| p.0 * p.2).sum::<f64>() / weight_sum;
    let ref2 = pixels.iter().map(|p| p.1 * p.2).sum::<f64>() / weight_sum;
    let mut normal = SMatrix::<f64, 6, 6>::zeros();
    let mut rhs = SVector::<f64, 6>::zeros();
    for &(l1, l2, c) in &pixels {
        let (x, y) = (l1 - ref1, l2 - ref2);
        let basis = SVector::<f64, 6>::new(1.0, x, y, x * x, y * y, x * y);
        normal += c * basis * basis.transpose();
        rhs += c * c.ln() * basis;
    }
    let q = normal
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonConvergence("log-quadratic initialization is singular".into()))?;
    if !(q[3] < 0.0) || !(q[4] < 0.0) {
        return Err(Error::NonConvergence(
            "map is not peaked; log-quadratic curvature is not negative".into(),
        ));
    }
    // A width beyond the scan window is indistinguishable from a flat map;
    // refuse to report such a model.
    let span1 = grid.step1_nm() * (grid.count1() - 1) as f64;
    let span2 = grid.step2_nm() * (grid.count2() - 1) as f64;
    let sigma1 = (-1.0 / (2.0 * q[3])).sqrt();
    let sigma2 = (-1.0 / (2.0 * q[4])).sqrt();
    if sigma1 > span1 || sigma2 > span2 {
        return Err(Error::NonConvergence(format!(
            "map is not peaked within the scan window: implied widths ({sigma1:.3}, {sigma2:.3}) nm \
             exceed the window ({span1:.3}, {span2:.3}) nm"
        )));
    }
    let mut sigma12 = if q[5].abs() < 1e-12 * q[3].abs() {
        1e9
    } else {
        -1.0 / (2.0 * q[5])
    };
    // Nudge an initialization that lands outside the positive-definite region.
    let bound = sigma1 * sigma2 / 2.0;
    if sigma12.abs() <= bound {
        sigma12 = 1.5 * bound * if sigma12 < 0.0 { -1.0 } else { 1.0 };
    }
    let det = 4.0 * q[3] * q[4] - q[5] * q[5];
    if det.abs() < 1e-30 {
        return Err(Error::NonConvergence("degenerate curvature matrix".into()));
    }
    let cx = (-q[1] * 2.0 * q[4] + q[2] * q[5]) / det;
    let cy = (-q[2] * 2.0 * q[3] + q[1] * q[5]) / det;
    let log_peak = q[0] + q[1] * cx + q[2] * cy + q[3] * cx * cx + q[4] * cy * cy + q[5] * cx * cy;
    let mut theta = [
        ref1 + cx,
        ref2 + cy,
        sigma1,
        sigma2,
        sigma12,
        (log_peak.exp() / time).max(peak * 1e-6 / time),
    ];

    // Stage two: damped least squares on the untransformed model.
    let data: Vec<(f64, f64, f64)> = {
        let mut d = Vec::with_capacity(grid.len());
        for i in 0..grid.count1() {
            for j in 0..grid.count2() {
                let c = map.get(i, j);
                if c.is_finite() {
                    d.push((grid.lambda1(i), grid.lambda2(j), c));
                }
            }
        }
        d
    };
    let chi2_of = |theta: &[f64; 6]| -> f64 {
        data.iter()
            .map(|&(l1, l2, c)| {
                let r = c - model_counts(theta, l1, l2, time);
                r * r / c.max(1.0)
            })
            .sum()
    };
    let valid = |t: &[f64; 6]| -> bool {
        t.iter().all(|v| v.is_finite())
            && t[2] > 0.0
            && t[3] > 0.0
            && t[2] <= span1
            && t[3] <= span2
            && t[5] > 0.0
            && 4.0 * t[4] * t[4] > t[2] * t[2] * t[3] * t[3]
    };
    if !valid(&theta) {
        return Err(Error::NonConvergence("initialization outside the model domain".into()));
    }
    let mut chi2 = chi2_of(&theta);
    let mut damping = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < FIT_MAX_ITERATIONS {
        iterations += 1;
        let (hessian, gradient) = normal_equations(&data, &theta, time);
        let mut damped = hessian;
        for k in 0..6 {
            damped[(k, k)] += damping * hessian[(k, k)];
        }
        let Some(step) = damped.lu().solve(&gradient) else {
            damping *= 10.0;
            if damping > 1e14 {
                return Err(Error::NonConvergence("normal equations are singular".into()));
            }
            continue;
        };
        let rel_step = (0..6)
            .map(|k| (step[k] / theta[k].abs().max(1e-30)).abs())
            .fold(0.0, f64::max);
        let mut trial = theta;
        for k in 0..6 {
            trial[k] += step[k];
        }
        let trial_chi2 = if valid(&trial) {
            chi2_of(&trial)
        } else {
            f64::INFINITY
        };
        if trial_chi2 < chi2 {
            theta = trial;
            chi2 = trial_chi2;
            damping = (damping / 10.0).max(1e-14);
            if rel_step < FIT_RELATIVE_TOL {
                converged = true;
                break;
            }
        } else {
            // A step this small that still fails to improve chi2 means the
            // optimum cannot be refined further.
            if rel_step < FIT_RELATIVE_TOL {
                converged = true;
                break;
            }
            damping *= 10.0;
            if damping > 1e14 {
                break;
            }
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "no convergence after {iterations} iterations (chi2 = {chi2:.3})"
        )));
    }
    let model = GaussianJointModel::new(theta[0], theta[1], theta[2], theta[3], theta[4], theta[5])?;
    let (hessian, _) = normal_equations(&data, &theta, time);
    let cov = hessian
        .try_inverse()
        .ok_or_else(|| Error::NonConvergence("singular covariance at the optimum".into()))?;
    let err = |k: usize| cov[(k, k)].max(0.0).sqrt();
    Ok(GaussianFit {
        model,
        uncertainties: ModelUncertainties {
            lambda1_center_nm: err(0),
            lambda2_center_nm: err(1),
            sigma1_nm: err(2),
            sigma2_nm: err(3),
            sigma12_nm2: err(4),
            amplitude: err(5),
        },
        iterations,
        chi2,
    })
}

/// Expected counts at one pixel for parameters
/// (center1, center2, sigma1, sigma2, sigma12, amplitude).
fn model_counts(theta: &[f64; 6], l1: f64, l2: f64, time: f64) -> f64 {
    let x = l1 - theta[0];
    let y = l2 - theta[1];
    let quad =
        (x * x / (theta[2] * theta[2]) + y * y / (theta[3] * theta[3])) + x * y / theta[4];
    time * theta[5] * (-0.5 * quad).exp()
}

/// Gauss-Newton normal equations J^T W J and J^T W r under Poisson weights.
fn normal_equations(
    data: &[(f64, f64, f64)],
    theta: &[f64; 6],
    time: f64,
) -> (SMatrix<f64, 6, 6>, SVector<f64, 6>) {
    let mut hessian = SMatrix::<f64, 6, 6>::zeros();
    let mut gradient = SVector::<f64, 6>::zeros();
    for &(l1, l2, c) in data {
        let mu = model_counts(theta, l1, l2, time);
        let x = l1 - theta[0];
        let y = l2 - theta[1];
        let jac = SVector::<f64, 6>::new(
            mu * (x / (theta[2] * theta[2]) + y / (2.0 * theta[4])),
            mu * (y / (theta[3] * theta[3]) + x / (2.0 * theta[4])),
            mu * x * x / (theta[2] * theta[2] * theta[2]),
            mu * y * y / (theta[3] * theta[3] * theta[3]),
            mu * x * y / (2.0 * theta[4] * theta[4]),
            mu / theta[5],
        );
        let w = 1.0 / c.max(1.0);
        hessian += w * jac * jac.transpose();
        gradient += w * (c - mu) * jac;
    }
    (hessian, gradient)
}

/// Simulates a per-pixel polarizer scan at analyzer 1 fixed to +45 degrees
/// and fits every pixel, producing the visibility map and the maximum-angle
/// map. Pixels whose visibility uncertainty exceeds `visibility_err_mask`
/// (or whose fit fails outright) are masked. Visibility values are clamped
/// to [0, 1] for the map.
pub fn visibility_gamma_maps(
    config: &SourceConfig,
    grid: &WavelengthGrid,
    alpha2_deg: &[f64],
    integration_s: f64,
    seed: u64,
    visibility_err_mask: f64,
) -> Result<(SpectralMap, SpectralMap)> {
    let cube = count_cube(config, grid, 45.0, alpha2_deg, integration_s, seed)?;
    let mut vis = vec![f64::NAN; grid.len()];
    let mut angle = vec![f64::NAN; grid.len()];
    for i in 0..grid.count1() {
        for j in 0..grid.count2() {
            let scan = pixel_scan(&cube, i, j);
            let Ok(fit) = fit_sinusoid(&scan) else {
                continue;
            };
            if fit.visibility_err > visibility_err_mask {
                continue;
            }
            let idx = grid.index(i, j);
            vis[idx] = fit.visibility.clamp(0.0, 1.0);
            angle[idx] = fit.max_angle_deg.unwrap_or(f64::NAN);
        }
    }
    // Analyzer 2 is scanned rather than fixed, so neither map records a
    // full analyzer setting.
    let vis_map = SpectralMap::new(*grid, vis, MapMetadata::new(MapKind::Visibility))?;
    let angle_map = SpectralMap::new(*grid, angle, MapMetadata::new(MapKind::GammaDeg))?;
    Ok((vis_map, angle_map))
}

/// The scan of one cube pixel.
pub fn pixel_scan(cube: &ScanCube, i: usize, j: usize) -> PolarizerScan {
    let samples = cube
        .alpha2_deg()
        .iter()
        .enumerate()
        .map(|(k, &alpha2_deg)| ScanSample {
            alpha2_deg,
            counts: cube.value(k, i, j),
            integration_s: cube.integration_s(),
        })
        .collect();
    PolarizerScan {
        alpha1_deg: cube.alpha1_deg(),
        samples,
    }
}

/// Entanglement-entropy map from the two decay-path maps. Pixels whose
/// combined value falls below `mask_threshold` (or is unmeasurable) are
/// masked.
pub fn entropy_map(
    map_hv: &SpectralMap,
    map_vh: &SpectralMap,
    mask_threshold: f64,
) -> Result<SpectralMap> {
    if map_hv.grid() != map_vh.grid() {
        return Err(Error::GridMismatch(
            "entropy map needs both path maps on one grid".to_string(),
        ));
    }
    for m in [map_hv, map_vh] {
        if !matches!(m.kind(), MapKind::Rate | MapKind::Counts) {
            return Err(Error::InvalidMap(format!(
                "entropy map needs rate or counts inputs, got {:?}",
                m.kind()
            )));
        }
    }
    if map_hv.kind() != map_vh.kind() {
        return Err(Error::InvalidMap(
            "both entropy inputs must share a kind".to_string(),
        ));
    }
    let values: Vec<f64> = map_hv
        .values()
        .iter()
        .zip(map_vh.values())
        .map(|(&g_hv, &g_vh)| {
            if !g_hv.is_finite() || !g_vh.is_finite() || g_hv + g_vh < mask_threshold {
                return f64::NAN;
            }
            match path_amplitudes(g_hv, g_vh) {
                Ok((a, b)) => TwoPathState::new(a, b, 0.0)
                    .map(|s| s.entropy_bits())
                    .unwrap_or(f64::NAN),
                Err(_) => f64::NAN,
            }
        })
        .collect();
    SpectralMap::new(
        *map_hv.grid(),
        values,
        MapMetadata::new(MapKind::EntropyBits),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polarization::AnalyzerSetting;
    use crate::simulate::{rate_cube, rate_map, sample_counts};
    use std::f64::consts::PI;

    fn reference_model() -> GaussianJointModel {
        GaussianJointModel::new(779.77, 779.10, 1.265, 1.853, 1.509, 1.0).unwrap()
    }

    fn reference_config(amplitude: f64, rho: f64) -> SourceConfig {
        let m = GaussianJointModel::new(779.77, 779.10, 1.265, 1.853, 1.509, amplitude).unwrap();
        SourceConfig::new(m, PI, rho, 0).unwrap()
    }

    fn exact_scan(state: &TwoPathState, angles: &[f64], scale: f64) -> PolarizerScan {
        PolarizerScan {
            alpha1_deg: 45.0,
            samples: angles
                .iter()
                .map(|&alpha2_deg| ScanSample {
                    alpha2_deg,
                    counts: scale * state.coincidence_prob(&AnalyzerSetting::new(45.0, alpha2_deg)),
                    integration_s: 1.0,
                })
                .collect(),
        }
    }

    #[test]
    fn noiseless_singlet_scan_fits_exactly() {
        let state = TwoPathState::balanced(PI);
        let angles: Vec<f64> = (0..12).map(|k| -90.0 + 15.0 * k as f64).collect();
        let fit = fit_sinusoid(&exact_scan(&state, &angles, 1000.0)).unwrap();
        assert!((fit.visibility - 1.0).abs() < 1e-9, "V = {}", fit.visibility);
        assert!(
            (fit.max_angle_deg.unwrap() + 45.0).abs() < 1e-9,
            "angle = {:?}",
            fit.max_angle_deg
        );
        // The model lies exactly in the fit basis: residuals at machine zero.
        let two_a = |d: f64| 2.0 * d.to_radians();
        for s in &exact_scan(&state, &angles, 1000.0).samples {
            let predicted = fit.offset
                * (1.0
                    + fit.visibility
                        * (two_a(s.alpha2_deg) - two_a(fit.max_angle_deg.unwrap())).cos());
            assert!((predicted - s.counts).abs() < 1e-12 * fit.offset);
        }
    }

    #[test]
    fn noiseless_imbalanced_scan_recovers_angle() {
        let state = TwoPathState::new(0.8f64.sqrt(), 0.2f64.sqrt(), PI).unwrap();
        let angles: Vec<f64> = (0..9).map(|k| -80.0 + 20.0 * k as f64).collect();
        let fit = fit_sinusoid(&exact_scan(&state, &angles, 500.0)).unwrap();
        let expected = state.max_coincidence_angle_deg().unwrap();
        assert!((fit.max_angle_deg.unwrap() - expected).abs() < 1e-9);
        assert!((fit.visibility - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_scan_has_zero_visibility_and_no_angle() {
        let angles: Vec<f64> = (0..8).map(|k| -90.0 + 22.5 * k as f64).collect();
        let scan = PolarizerScan {
            alpha1_deg: 45.0,
            samples: angles
                .iter()
                .map(|&alpha2_deg| ScanSample {
                    alpha2_deg,
                    counts: 250.0,
                    integration_s: 1.0,
                })
                .collect(),
        };
        let fit = fit_sinusoid(&scan).unwrap();
        assert_eq!(fit.visibility, 0.0);
        assert!(fit.max_angle_deg.is_none());
    }

    #[test]
    fn scan_with_two_angles_is_rejected() {
        let scan = PolarizerScan {
            alpha1_deg: 45.0,
            samples: [0.0, 90.0, 180.0]
                .iter()
                .map(|&alpha2_deg| ScanSample {
                    alpha2_deg,
                    counts: 10.0,
                    integration_s: 1.0,
                })
                .collect(),
        };
        // 180 folds onto 0: only two distinct angles.
        assert!(matches!(
            fit_sinusoid(&scan),
            Err(Error::TooFewPoints { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn zero_count_scan_has_no_positive_offset() {
        let scan = PolarizerScan {
            alpha1_deg: 45.0,
            samples: [0.0, 45.0, 90.0, 135.0]
                .iter()
                .map(|&alpha2_deg| ScanSample {
                    alpha2_deg,
                    counts: 0.0,
                    integration_s: 1.0,
                })
                .collect(),
        };
        assert!(matches!(fit_sinusoid(&scan), Err(Error::NonPositiveOffset)));
    }

    #[test]
    fn sinusoid_uncertainties_match_poisson_scatter() {
        // Seeded ensemble: the quoted 1-sigma bands should cover the true
        // values at the usual rates.
        use rand::SeedableRng;
        use rand_distr::{Distribution, Poisson};
        let state = TwoPathState::balanced(PI);
        let angles: Vec<f64> = (0..19).map(|k| -90.0 + 10.0 * k as f64).collect();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        let mut angle_errors = Vec::new();
        let mut angle_sigmas = Vec::new();
        for _ in 0..60 {
            let samples: Vec<ScanSample> = angles
                .iter()
                .map(|&alpha2_deg| {
                    let mean = 60.0
                        * 50.0
                        * state.coincidence_prob(&AnalyzerSetting::new(45.0, alpha2_deg));
                    let counts = if mean > 0.0 {
                        Poisson::new(mean).unwrap().sample(&mut rng)
                    } else {
                        0.0
                    };
                    ScanSample {
                        alpha2_deg,
                        counts,
                        integration_s: 60.0,
                    }
                })
                .collect();
            let fit = fit_sinusoid(&PolarizerScan {
                alpha1_deg: 45.0,
                samples,
            })
            .unwrap();
            angle_errors.push(fit.max_angle_deg.unwrap() + 45.0);
            angle_sigmas.push(fit.max_angle_err_deg.unwrap());
        }
        let rms = (angle_errors.iter().map(|e| e * e).sum::<f64>() / angle_errors.len() as f64)
            .sqrt();
        let mean_sigma = angle_sigmas.iter().sum::<f64>() / angle_sigmas.len() as f64;
        assert!(
            rms < 2.5 * mean_sigma && rms > mean_sigma / 2.5,
            "rms {rms} vs quoted {mean_sigma}"
        );
    }

    #[test]
    fn gaussian_fit_recovers_noiseless_map_exactly() {
        let model = reference_model();
        let grid = WavelengthGrid::new(770.0, 0.5, 40, 770.0, 0.5, 40).unwrap();
        let map = SpectralMap::from_fn(grid, MapMetadata::new(MapKind::Rate), |l1, l2| {
            model.eval(l1, l2)
        })
        .unwrap();
        let fit = fit_gaussian2d(&map).unwrap();
        let m = fit.model;
        assert!((m.lambda1_center_nm() - 779.77).abs() < 1e-6 * 779.77);
        assert!((m.lambda2_center_nm() - 779.10).abs() < 1e-6 * 779.10);
        assert!((m.sigma1_nm() - 1.265).abs() < 1e-6 * 1.265);
        assert!((m.sigma2_nm() - 1.853).abs() < 1e-6 * 1.853);
        assert!((m.sigma12_nm2() - 1.509).abs() < 1e-6 * 1.509);
        assert!((m.amplitude() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gaussian_fit_recovers_sampled_map_within_uncertainty() {
        let cfg = reference_config(100.0, 0.0);
        let grid = WavelengthGrid::new(770.0, 0.5, 40, 770.0, 0.5, 40).unwrap();
        let rates = rate_map(&cfg, &AnalyzerSetting::new(0.0, 0.0), &grid);
        let counts = sample_counts(&rates, 22.5, 0.0, 17).unwrap();
        let fit = fit_gaussian2d(&counts).unwrap();
        let m = fit.model;
        assert!((m.lambda1_center_nm() - 779.77).abs() < 0.02);
        assert!((m.lambda2_center_nm() - 779.10).abs() < 0.02);
        assert!((m.sigma1_nm() - 1.265).abs() / 1.265 < 0.02);
        assert!((m.sigma2_nm() - 1.853).abs() / 1.853 < 0.02);
        assert!((m.amplitude() - 100.0).abs() / 100.0 < 0.05);
        // Quoted uncertainties should be commensurate with the actual error.
        assert!(fit.uncertainties.lambda1_center_nm < 0.02);
        assert!(fit.uncertainties.lambda1_center_nm > 1e-4);
    }

    #[test]
    fn gaussian_fit_rejects_flat_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Poisson};
        let grid = WavelengthGrid::new(770.0, 0.5, 30, 770.0, 0.5, 30).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let poisson = Poisson::new(40.0).unwrap();
        let values: Vec<f64> = (0..grid.len())
            .map(|_| -> f64 { poisson.sample(&mut rng) })
            .collect();
        let map = SpectralMap::new(
            grid,
            values,
            MapMetadata::new(MapKind::Counts).with_integration(22.5),
        )
        .unwrap();
        assert!(fit_gaussian2d(&map).is_err(), "flat noise must not yield a model");
    }

    #[test]
    fn gaussian_fit_needs_six_informative_pixels() {
        let grid = WavelengthGrid::new(770.0, 0.5, 4, 770.0, 0.5, 4).unwrap();
        let map = SpectralMap::new(
            grid,
            vec![0.0; grid.len()],
            MapMetadata::new(MapKind::Counts).with_integration(1.0),
        )
        .unwrap();
        assert!(matches!(
            fit_gaussian2d(&map),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn visibility_map_is_unity_and_angles_match_theory() {
        let cfg = reference_config(2000.0, 0.0);
        let grid = WavelengthGrid::centered_square(779.435, 0.5, 17).unwrap();
        let angles: Vec<f64> = (0..19).map(|k| -90.0 + 10.0 * k as f64).collect();
        let (vis, angle) =
            visibility_gamma_maps(&cfg, &grid, &angles, 60.0, 21, DEFAULT_VISIBILITY_ERR_MASK)
                .unwrap();
        let center = grid.count1() / 2;
        let v = vis.get(center, center);
        assert!(v > 0.97, "degeneracy-pixel visibility {v}");
        let g = angle.get(center, center);
        assert!((g + 45.0).abs() < 3.0, "degeneracy-pixel angle {g}");
        // In the V1H2-dominant lobe the maximum swings toward +/-90 degrees.
        let lobe = angle.get(0, 12);
        assert!(lobe.abs() > 60.0, "lobe angle {lobe}");
        // Unmasked pixels should be compatible with unit visibility.
        let mut checked = 0;
        for i in 0..grid.count1() {
            for j in 0..grid.count2() {
                let v = vis.get(i, j);
                if v.is_finite() {
                    assert!(v > 0.8, "pixel ({i},{j}) visibility {v}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 20, "too few unmasked pixels: {checked}");
        // Low-rate corners are masked.
        assert!(vis.masked_count() > 0);
    }

    #[test]
    fn entropy_map_diagonal_is_maximal_and_lobes_are_low() {
        let cfg = reference_config(1.0, 0.0);
        let grid = WavelengthGrid::centered_square(779.435, 0.25, 65).unwrap();
        let hv = rate_map(&cfg, &AnalyzerSetting::new(0.0, 0.0), &grid);
        let vh = rate_map(&cfg, &AnalyzerSetting::new(90.0, 90.0), &grid);
        let entropy = entropy_map(&hv, &vh, 1e-6).unwrap();
        let c = grid.count1() / 2;
        assert!((entropy.get(c, c) - 1.0).abs() < 1e-9);
        // Strong imbalance in the off-diagonal lobes pushes the entropy down.
        let lobe = entropy.get(16, 40);
        assert!(lobe < 0.5, "lobe entropy {lobe}");
    }

    #[test]
    fn entropy_vanishes_where_one_path_is_absent() {
        let grid = WavelengthGrid::new(779.0, 0.5, 1, 779.0, 0.5, 2).unwrap();
        let hv = SpectralMap::new(grid, vec![8.0, 4.0], MapMetadata::new(MapKind::Rate)).unwrap();
        let vh = SpectralMap::new(grid, vec![0.0, 1.0], MapMetadata::new(MapKind::Rate)).unwrap();
        let s = entropy_map(&hv, &vh, 0.0).unwrap();
        assert_eq!(s.get(0, 0), 0.0);
        // And the 4:1 pixel lands on the binary entropy of 0.8.
        assert!((s.get(0, 1) - 0.7219).abs() < 1e-4);
    }

    #[test]
    fn entropy_map_respects_exchange_symmetry() {
        let cfg = reference_config(1.0, 0.0);
        let grid = WavelengthGrid::centered_square(779.435, 0.5, 33).unwrap();
        let hv = rate_map(&cfg, &AnalyzerSetting::new(0.0, 0.0), &grid);
        let vh = rate_map(&cfg, &AnalyzerSetting::new(90.0, 90.0), &grid);
        let s = entropy_map(&hv, &vh, 1e-9).unwrap();
        let swapped = entropy_map(&vh.transposed(), &hv.transposed(), 1e-9).unwrap();
        for idx in 0..s.values().len() {
            let (a, b) = (s.values()[idx], swapped.transposed().values()[idx]);
            if a.is_finite() || b.is_finite() {
                assert!((a - b).abs() < 1e-12, "pixel {idx}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn entropy_mask_grows_with_threshold() {
        let cfg = reference_config(1.0, 0.0);
        let grid = WavelengthGrid::centered_square(779.435, 0.5, 33).unwrap();
        let hv = rate_map(&cfg, &AnalyzerSetting::new(0.0, 0.0), &grid);
        let vh = rate_map(&cfg, &AnalyzerSetting::new(90.0, 90.0), &grid);
        let mut previous = 0;
        for threshold in [0.0, 1e-6, 1e-3, 0.1, 0.5] {
            let masked = entropy_map(&hv, &vh, threshold).unwrap().masked_count();
            assert!(masked >= previous, "mask shrank at threshold {threshold}");
            previous = masked;
        }
    }

    #[test]
    fn entropy_map_rejects_mismatched_grids() {
        let cfg = reference_config(1.0, 0.0);
        let g1 = WavelengthGrid::centered_square(779.435, 0.5, 9).unwrap();
        let g2 = WavelengthGrid::centered_square(779.435, 0.5, 11).unwrap();
        let hv = rate_map(&cfg, &AnalyzerSetting::new(0.0, 0.0), &g1);
        let vh = rate_map(&cfg, &AnalyzerSetting::new(90.0, 90.0), &g2);
        assert!(matches!(
            entropy_map(&hv, &vh, 0.0),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn pixel_scans_come_from_the_cube() {
        let cfg = reference_config(1.0, 0.0);
        let grid = WavelengthGrid::centered_square(779.435, 0.5, 9).unwrap();
        let angles = [-90.0, -45.0, 0.0, 45.0];
        let cube = rate_cube(&cfg, &grid, 45.0, &angles).unwrap();
        let scan = pixel_scan(&cube, 4, 4);
        assert_eq!(scan.samples.len(), 4);
        assert_eq!(scan.samples[2].counts, cube.value(2, 4, 4));
    }
}
