//! C ABI over the pairspec library: joint-spectrum models behind opaque
//! handles, scalar polarization-state queries, and map generation into
//! caller-owned buffers. Every fallible call returns a [`PairspecStatus`];
//! results come back through out-pointers.

use std::os::raw::c_char;

use pairspec::model::Arm;
use pairspec::{
    correct_fourphoton, path_amplitudes, rate_map, sample_counts, AnalyzerSetting,
    GaussianJointModel, SourceConfig, TwoPathState, WavelengthGrid,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairspecStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A scalar argument was outside its domain.
    InvalidArgument = 2,
    /// Model parameters violate the model invariants.
    InvalidModel = 3,
    /// The requested quantity is undefined for these inputs.
    Undefined = 4,
    /// A background correction produced a visibility above one.
    Inconsistent = 5,
    /// The provided buffer does not match the requested grid.
    BufferSize = 6,
}

impl From<&pairspec::Error> for PairspecStatus {
    fn from(e: &pairspec::Error) -> Self {
        use pairspec::Error::*;
        match e {
            InvalidModel(_) => PairspecStatus::InvalidModel,
            UndefinedState | UndefinedMaxAngle | DegenerateMarginal(_) => PairspecStatus::Undefined,
            InconsistentCorrection { .. } => PairspecStatus::Inconsistent,
            _ => PairspecStatus::InvalidArgument,
        }
    }
}

/// Opaque handle to a validated joint-spectrum model.
pub struct PairspecModel(GaussianJointModel);

/// Model parameters, mirroring the JSON model schema.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PairspecModelParams {
    pub lambda1_center_nm: f64,
    pub lambda2_center_nm: f64,
    pub sigma1_nm: f64,
    pub sigma2_nm: f64,
    pub sigma12_nm2: f64,
    pub amplitude: f64,
}

/// Rectangular wavelength grid; pixel (i, j) maps to
/// (start1 + i * step1, start2 + j * step2), row-major in the value buffers.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PairspecGrid {
    pub start1_nm: f64,
    pub step1_nm: f64,
    pub count1: usize,
    pub start2_nm: f64,
    pub step2_nm: f64,
    pub count2: usize,
}

impl PairspecGrid {
    fn to_grid(self) -> Result<WavelengthGrid, pairspec::Error> {
        WavelengthGrid::new(
            self.start1_nm,
            self.step1_nm,
            self.count1,
            self.start2_nm,
            self.step2_nm,
            self.count2,
        )
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> PairspecStatus {
    if out.is_null() {
        return PairspecStatus::NullPointer;
    }
    unsafe { out.write(value) };
    PairspecStatus::Ok
}

/// Validates parameters and allocates a model handle. The handle must be
/// released with [`pairspec_model_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_new(
    lambda1_center_nm: f64,
    lambda2_center_nm: f64,
    sigma1_nm: f64,
    sigma2_nm: f64,
    sigma12_nm2: f64,
    amplitude: f64,
    out: *mut *mut PairspecModel,
) -> PairspecStatus {
    if out.is_null() {
        return PairspecStatus::NullPointer;
    }
    match GaussianJointModel::new(
        lambda1_center_nm,
        lambda2_center_nm,
        sigma1_nm,
        sigma2_nm,
        sigma12_nm2,
        amplitude,
    ) {
        Ok(model) => {
            unsafe { out.write(Box::into_raw(Box::new(PairspecModel(model)))) };
            PairspecStatus::Ok
        }
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Releases a model handle. Null is accepted and ignored.
///
/// # Safety
/// `model` must be null or a pointer returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_free(model: *mut PairspecModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Copies the model parameters out of a handle.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_params(
    model: *const PairspecModel,
    out: *mut PairspecModelParams,
) -> PairspecStatus {
    if model.is_null() {
        return PairspecStatus::NullPointer;
    }
    let m = unsafe { &(*model).0 };
    unsafe {
        write_out(
            out,
            PairspecModelParams {
                lambda1_center_nm: m.lambda1_center_nm(),
                lambda2_center_nm: m.lambda2_center_nm(),
                sigma1_nm: m.sigma1_nm(),
                sigma2_nm: m.sigma2_nm(),
                sigma12_nm2: m.sigma12_nm2(),
                amplitude: m.amplitude(),
            },
        )
    }
}

/// Allocates the mirrored decay path's model: centers and widths swapped,
/// covariance and amplitude unchanged.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_mirror(
    model: *const PairspecModel,
    out: *mut *mut PairspecModel,
) -> PairspecStatus {
    if model.is_null() || out.is_null() {
        return PairspecStatus::NullPointer;
    }
    let mirrored = unsafe { (*model).0.mirror() };
    unsafe { out.write(Box::into_raw(Box::new(PairspecModel(mirrored)))) };
    PairspecStatus::Ok
}

/// Joint spectral rate at one wavelength pair.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_eval(
    model: *const PairspecModel,
    lambda1_nm: f64,
    lambda2_nm: f64,
    out: *mut f64,
) -> PairspecStatus {
    if model.is_null() {
        return PairspecStatus::NullPointer;
    }
    let value = unsafe { (*model).0.eval(lambda1_nm, lambda2_nm) };
    unsafe { write_out(out, value) }
}

/// FWHM of one arm's marginal spectrum; `arm` is 1 or 2.
///
/// # Safety
/// `model` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_model_marginal_fwhm(
    model: *const PairspecModel,
    arm: u32,
    out: *mut f64,
) -> PairspecStatus {
    if model.is_null() {
        return PairspecStatus::NullPointer;
    }
    let arm = match arm {
        1 => Arm::One,
        2 => Arm::Two,
        _ => return PairspecStatus::InvalidArgument,
    };
    match unsafe { (*model).0.marginal_fwhm_nm(arm) } {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Normalized decay-path amplitudes from the two local rates.
///
/// # Safety
/// `a_out` and `b_out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_path_amplitudes(
    g_hv: f64,
    g_vh: f64,
    a_out: *mut f64,
    b_out: *mut f64,
) -> PairspecStatus {
    match path_amplitudes(g_hv, g_vh) {
        Ok((a, b)) => {
            let status = unsafe { write_out(a_out, a) };
            if status != PairspecStatus::Ok {
                return status;
            }
            unsafe { write_out(b_out, b) }
        }
        Err(e) => PairspecStatus::from(&e),
    }
}

fn state_from(a: f64, b: f64, phase_rad: f64) -> Result<TwoPathState, pairspec::Error> {
    TwoPathState::new(a, b, phase_rad)
}

/// Joint transmission probability through both linear analyzers (arm-1 angle
/// from H, arm-2 angle from V).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_coincidence_prob(
    a: f64,
    b: f64,
    phase_rad: f64,
    alpha1_deg: f64,
    alpha2_deg: f64,
    out: *mut f64,
) -> PairspecStatus {
    match state_from(a, b, phase_rad) {
        Ok(state) => unsafe {
            write_out(
                out,
                state.coincidence_prob(&AnalyzerSetting::new(alpha1_deg, alpha2_deg)),
            )
        },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Analyzer-2 angle of maximum coincidence at analyzer 1 fixed to +45
/// degrees, in (-90, 90].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_max_coincidence_angle(
    a: f64,
    b: f64,
    phase_rad: f64,
    out: *mut f64,
) -> PairspecStatus {
    match state_from(a, b, phase_rad).and_then(|s| s.max_coincidence_angle_deg()) {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Entanglement entropy of the two-path state, in bits.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_entropy_bits(a: f64, b: f64, out: *mut f64) -> PairspecStatus {
    match state_from(a, b, 0.0) {
        Ok(state) => unsafe { write_out(out, state.entropy_bits()) },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Visibility of the analyzer-2 scan at analyzer 1 fixed to +45 degrees.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_visibility_45(
    a: f64,
    b: f64,
    phase_rad: f64,
    out: *mut f64,
) -> PairspecStatus {
    match state_from(a, b, phase_rad) {
        Ok(state) => unsafe { write_out(out, state.visibility_45()) },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Removes a flat accidental background of fractional rate `rho` from a
/// measured visibility.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pairspec_correct_fourphoton(
    v_measured: f64,
    rho: f64,
    out: *mut f64,
) -> PairspecStatus {
    match correct_fourphoton(v_measured, rho) {
        Ok(v) => unsafe { write_out(out, v) },
        Err(e) => PairspecStatus::from(&e),
    }
}

/// Fills `values` (row-major, `count1 * count2` entries) with the
/// coincidence-rate map of the two-path source at one analyzer setting.
///
/// # Safety
/// `model` must be a valid handle and `values` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn pairspec_rate_map(
    model: *const PairspecModel,
    phase_rad: f64,
    grid: PairspecGrid,
    alpha1_deg: f64,
    alpha2_deg: f64,
    values: *mut f64,
    len: usize,
) -> PairspecStatus {
    if model.is_null() || values.is_null() {
        return PairspecStatus::NullPointer;
    }
    let Ok(grid) = grid.to_grid() else {
        return PairspecStatus::InvalidArgument;
    };
    if len != grid.len() {
        return PairspecStatus::BufferSize;
    }
    let config = match SourceConfig::new(unsafe { (*model).0 }, phase_rad, 0.0, 0) {
        Ok(c) => c,
        Err(e) => return PairspecStatus::from(&e),
    };
    let map = rate_map(&config, &AnalyzerSetting::new(alpha1_deg, alpha2_deg), &grid);
    let out = unsafe { std::slice::from_raw_parts_mut(values, len) };
    out.copy_from_slice(map.values());
    PairspecStatus::Ok
}

/// Fills `values` with one Poisson-sampled count map: per pixel an
/// independent draw with mean (rate + flat background) * integration time,
/// deterministic in `seed`.
///
/// # Safety
/// `model` must be a valid handle and `values` must point to `len` writable
/// 64-bit unsigned integers.
#[no_mangle]
pub unsafe extern "C" fn pairspec_count_map(
    model: *const PairspecModel,
    phase_rad: f64,
    background_fraction: f64,
    grid: PairspecGrid,
    alpha1_deg: f64,
    alpha2_deg: f64,
    integration_s: f64,
    seed: u64,
    values: *mut u64,
    len: usize,
) -> PairspecStatus {
    if model.is_null() || values.is_null() {
        return PairspecStatus::NullPointer;
    }
    let Ok(grid) = grid.to_grid() else {
        return PairspecStatus::InvalidArgument;
    };
    if len != grid.len() {
        return PairspecStatus::BufferSize;
    }
    let config = match SourceConfig::new(unsafe { (*model).0 }, phase_rad, background_fraction, seed)
    {
        Ok(c) => c,
        Err(e) => return PairspecStatus::from(&e),
    };
    let rates = rate_map(&config, &AnalyzerSetting::new(alpha1_deg, alpha2_deg), &grid);
    let counts = match sample_counts(&rates, integration_s, background_fraction, seed) {
        Ok(c) => c,
        Err(e) => return PairspecStatus::from(&e),
    };
    let out = unsafe { std::slice::from_raw_parts_mut(values, len) };
    for (slot, &v) in out.iter_mut().zip(counts.values()) {
        *slot = v as u64;
    }
    PairspecStatus::Ok
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn pairspec_status_message(status: PairspecStatus) -> *const c_char {
    let text: &'static [u8] = match status {
        PairspecStatus::Ok => b"ok\0",
        PairspecStatus::NullPointer => b"null pointer argument\0",
        PairspecStatus::InvalidArgument => b"argument outside its domain\0",
        PairspecStatus::InvalidModel => b"model parameters violate the model invariants\0",
        PairspecStatus::Undefined => b"quantity undefined for these inputs\0",
        PairspecStatus::Inconsistent => b"corrected visibility exceeds one\0",
        PairspecStatus::BufferSize => b"buffer length does not match the grid\0",
    };
    text.as_ptr() as *const c_char
}
