//! C ABI over `tactile-flow`.
//!
//! Every fallible call returns a [`TfStatus`]; on failure a message is kept
//! per thread and can be read with [`tf_last_error`]. Objects cross the
//! boundary as opaque pointers that the caller releases with the matching
//! `_free` function. Images are row-major `double` buffers.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::{ptr, slice};

use tactile_flow::augment::{augment_frame, AugmentConfig};
use tactile_flow::classifier::{pool_planes, ChannelMode, ClassifierModel, NUM_CLASSES};
use tactile_flow::flow::{farneback_flow, FlowConfig, FlowField};
use tactile_flow::image::{Plane, TactileImage};
use tactile_flow::raster::{default_layout, frame_to_image, RasterConfig, Taxel, TaxelFrame, TaxelLayout};
use tactile_flow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimensions = 3,
    NonFinite = 4,
    Io = 5,
    Format = 6,
    Diverged = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

/// Dense flow parameters; see [`tf_flow_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct TfFlowConfig {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub window_size: usize,
    pub poly_n: usize,
    pub poly_sigma: f64,
    pub iterations: usize,
}

impl From<TfFlowConfig> for FlowConfig {
    fn from(c: TfFlowConfig) -> Self {
        FlowConfig {
            pyramid_levels: c.pyramid_levels,
            pyramid_scale: c.pyramid_scale,
            window_size: c.window_size,
            poly_n: c.poly_n,
            poly_sigma: c.poly_sigma,
            iterations: c.iterations,
        }
    }
}

/// A taxel layout together with the rasterization settings used for it.
pub struct TfLayout {
    layout: TaxelLayout,
    raster: RasterConfig,
}

pub struct TfModel(ClassifierModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> TfStatus {
    match err {
        Error::Config(_) | Error::Layout(_) | Error::Input(_) | Error::TooSmall(_) => TfStatus::InvalidArgument,
        Error::Dimensions { .. } => TfStatus::Dimensions,
        Error::NonFinite(_) => TfStatus::NonFinite,
        Error::Diverged { .. } => TfStatus::Diverged,
        Error::Format { .. } | Error::Json(_) => TfStatus::Format,
        Error::Io { .. } => TfStatus::Io,
    }
}

enum Fail {
    Lib(Error),
    Status(TfStatus, String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn fail(status: TfStatus, msg: impl Into<String>) -> Fail {
    Fail::Status(status, msg.into())
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            TfStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(TfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if p.is_null() {
        return Err(fail(TfStatus::NullPointer, format!("{what} is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn object<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| fail(TfStatus::NullPointer, format!("{what} is null")))
}

fn plane(data: &[f64], width: usize, height: usize) -> Result<Plane, Fail> {
    Ok(Plane::new(width, height, data.to_vec())?)
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains a nul byte"),
    };
    VERSION.as_ptr()
}

/// Message for the most recent failure on this thread, or NULL. Valid until
/// the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn tf_flow_config_default() -> TfFlowConfig {
    let c = FlowConfig::default();
    TfFlowConfig {
        pyramid_levels: c.pyramid_levels,
        pyramid_scale: c.pyramid_scale,
        window_size: c.window_size,
        poly_n: c.poly_n,
        poly_sigma: c.poly_sigma,
        iterations: c.iterations,
    }
}

/// Rectangular grid layout with `pitch_mm` spacing.
#[no_mangle]
pub unsafe extern "C" fn tf_layout_grid(rows: usize, cols: usize, pitch_mm: f64, out: *mut *mut TfLayout) -> TfStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        let layout = default_layout(rows, cols, pitch_mm)?;
        let raster = RasterConfig::for_layout(&layout);
        out[0] = Box::into_raw(Box::new(TfLayout { layout, raster }));
        Ok(())
    })
}

/// Arbitrary layout from `n` taxel centres in millimetres; ids are `0..n`.
#[no_mangle]
pub unsafe extern "C" fn tf_layout_from_points(
    x_mm: *const f64,
    y_mm: *const f64,
    n: usize,
    pitch_mm: f64,
    out: *mut *mut TfLayout,
) -> TfStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        let xs = input(x_mm, n, "x_mm")?;
        let ys = input(y_mm, n, "y_mm")?;
        let taxels = (0..n)
            .map(|i| Taxel { id: i as u32, x_mm: xs[i], y_mm: ys[i] })
            .collect();
        let layout = TaxelLayout::new(taxels, pitch_mm)?;
        let raster = RasterConfig::for_layout(&layout);
        out[0] = Box::into_raw(Box::new(TfLayout { layout, raster }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_layout_free(layout: *mut TfLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tf_layout_len(layout: *const TfLayout) -> usize {
    layout.as_ref().map_or(0, |l| l.layout.len())
}

/// Output image size for [`tf_rasterize`].
#[no_mangle]
pub unsafe extern "C" fn tf_layout_image_dims(layout: *const TfLayout, width: *mut usize, height: *mut usize) -> TfStatus {
    guard(|| {
        let l = object(layout, "layout")?;
        let (w, h) = l.layout.image_dims(l.raster.step_mm);
        output(width, 1, "width")?[0] = w;
        output(height, 1, "height")?[0] = h;
        Ok(())
    })
}

/// Sets a uniform baseline and response range for raw-value normalization.
#[no_mangle]
pub unsafe extern "C" fn tf_layout_set_normalization(layout: *mut TfLayout, baseline: f64, response_range: f64) -> TfStatus {
    guard(|| {
        let l = layout
            .as_mut()
            .ok_or_else(|| fail(TfStatus::NullPointer, "layout is null"))?;
        let raster = l.raster.clone().with_uniform_baseline(baseline, response_range);
        raster.validate()?;
        l.raster = raster;
        Ok(())
    })
}

/// Rasterizes one frame of raw taxel values (one per taxel, in layout
/// order) into `pixels`, which must hold `capacity >= width * height`.
#[no_mangle]
pub unsafe extern "C" fn tf_rasterize(
    layout: *const TfLayout,
    values: *const f64,
    n_values: usize,
    pixels: *mut f64,
    capacity: usize,
) -> TfStatus {
    guard(|| {
        let l = object(layout, "layout")?;
        let values = input(values, n_values, "values")?;
        if n_values != l.layout.len() {
            return Err(fail(TfStatus::Dimensions, format!("layout has {} taxels, got {n_values} values", l.layout.len())));
        }
        let (w, h) = l.layout.image_dims(l.raster.step_mm);
        if capacity < w * h {
            return Err(fail(TfStatus::BufferTooSmall, format!("need {} pixels, got {capacity}", w * h)));
        }
        let frame = TaxelFrame::new(values.to_vec(), 0)?;
        let img = frame_to_image(&l.layout, &frame, &l.raster)?;
        output(pixels, w * h, "pixels")?.copy_from_slice(img.plane().data());
        Ok(())
    })
}

/// Dense flow from `prev` to `curr`, both `width * height`. `config` may be
/// NULL for defaults. Writes `u` and `v`, each `width * height`.
#[no_mangle]
pub unsafe extern "C" fn tf_flow(
    prev: *const f64,
    curr: *const f64,
    width: usize,
    height: usize,
    config: *const TfFlowConfig,
    u: *mut f64,
    v: *mut f64,
) -> TfStatus {
    guard(|| {
        let n = width * height;
        let a = plane(input(prev, n, "prev")?, width, height)?;
        let b = plane(input(curr, n, "curr")?, width, height)?;
        let cfg = config.as_ref().map_or_else(FlowConfig::default, |c| (*c).into());
        let flow = farneback_flow(&a, &b, &cfg)?;
        output(u, n, "u")?.copy_from_slice(flow.u().data());
        output(v, n, "v")?.copy_from_slice(flow.v().data());
        Ok(())
    })
}

/// Three-channel frame from a pressure image and the flow that ends at it.
/// `rgb` receives `3 * width * height` values, channel-planar in the order
/// pressure, magnitude, direction.
#[no_mangle]
pub unsafe extern "C" fn tf_augment(
    pressure: *const f64,
    u: *const f64,
    v: *const f64,
    width: usize,
    height: usize,
    v_max: f64,
    rgb: *mut f64,
) -> TfStatus {
    guard(|| {
        let n = width * height;
        let img = TactileImage::from_plane(plane(input(pressure, n, "pressure")?, width, height)?)?;
        let flow = FlowField::from_planes(
            plane(input(u, n, "u")?, width, height)?,
            plane(input(v, n, "v")?, width, height)?,
        )?;
        let cfg = AugmentConfig { v_max };
        cfg.validate()?;
        let frame = augment_frame(&img, &flow, &cfg)?;
        let out = output(rgb, 3 * n, "rgb")?;
        for (chunk, ch) in out.chunks_exact_mut(n).zip(frame.channels()) {
            chunk.copy_from_slice(ch.data());
        }
        Ok(())
    })
}

/// Loads a classifier saved as JSON by the `tactile train` command.
#[no_mangle]
pub unsafe extern "C" fn tf_model_load(path: *const c_char, out: *mut *mut TfModel) -> TfStatus {
    guard(|| {
        let out = output(out, 1, "out")?;
        if path.is_null() {
            return Err(fail(TfStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(TfStatus::InvalidArgument, "path is not UTF-8"))?;
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        out[0] = Box::into_raw(Box::new(TfModel(ClassifierModel::from_json(&text)?)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tf_model_free(model: *mut TfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Frames per classified window, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn tf_model_window_len(model: *const TfModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.window_len)
}

/// Channels the model reads from each frame: 1 (pressure) or 3.
#[no_mangle]
pub unsafe extern "C" fn tf_model_channels(model: *const TfModel) -> usize {
    model.as_ref().map_or(0, |m| match m.0.feature_config.channels {
        ChannelMode::Raw => 1,
        ChannelMode::Augmented => 3,
    })
}

/// Classifies a window of `tf_model_window_len` frames. `frames` holds, for
/// each frame in order, the three channel planes written by [`tf_augment`];
/// pressure-only models read just the first plane of each frame. Writes the
/// class index (Grasp, TwoHandGrasp, Twist, Push, Pull) and, if `probs` is
/// not NULL, five class probabilities.
#[no_mangle]
pub unsafe extern "C" fn tf_model_classify(
    model: *const TfModel,
    frames: *const f64,
    width: usize,
    height: usize,
    class_index: *mut u32,
    probs: *mut f64,
) -> TfStatus {
    guard(|| {
        let m = &object(model, "model")?.0;
        let n = width * height;
        let data = input(frames, 3 * n * m.window_len, "frames")?;
        let grid = m.feature_config.pool_grid;
        let mut features = Vec::with_capacity(m.feature_dim());
        for frame in data.chunks_exact(3 * n) {
            let planes = frame
                .chunks_exact(n)
                .map(|c| plane(c, width, height))
                .collect::<Result<Vec<_>, _>>()?;
            let used: Vec<&Plane> = match m.feature_config.channels {
                ChannelMode::Raw => vec![&planes[0]],
                ChannelMode::Augmented => planes.iter().collect(),
            };
            features.extend(pool_planes(&used, grid)?);
        }
        let (class, p) = m.predict(&features)?;
        output(class_index, 1, "class_index")?[0] = class.index() as u32;
        if !probs.is_null() {
            output(probs, NUM_CLASSES, "probs")?.copy_from_slice(&p);
        }
        Ok(())
    })
}
