//! Unrolled half-quadratic-splitting super-resolution.
//!
//! Each unrolled layer applies the closed-form data step
//! `T = (D^T D + b I)^{-1} (D^T S + b Z)` followed by a denoiser prior step
//! `Z = G(T)`. Because `D` selects rows, `D^T D + b I` is diagonal and the
//! data step is a per-pixel weighted average.

mod denoise;

pub use denoise::{median_blend, total_variation, tv_prox, Denoiser, DenoiserPrior};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rangeview::RangeImage;
use crate::sampling::{RowSelection, SamplingError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid solver config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Each high-res row copies its nearest observed row.
    ReplicateRows,
    /// `D^T S`: unobserved rows start (and, under mask-aware priors, stay)
    /// invalid.
    AdjointZeroFill,
    /// Linear in the row index between the bracketing observed rows, and
    /// extrapolated from the two outermost observed rows beyond them.
    #[default]
    InterpolateRows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Penalty weight of the splitting, > 0.
    pub b: f64,
    /// Unrolling depth, >= 1.
    pub iterations: usize,
    pub prior: DenoiserPrior,
    /// Multiplies the prior's strength; 0 turns the prior into the identity.
    pub prior_strength: f64,
    pub init: Init,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            b: 0.5,
            iterations: 5,
            prior: DenoiserPrior::default(),
            prior_strength: 1.0,
            init: Init::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(SolverError::Config(format!("b must be finite and > 0, got {}", self.b)));
        }
        if self.iterations == 0 {
            return Err(SolverError::Config("iterations must be >= 1".into()));
        }
        if !(self.prior_strength >= 0.0 && self.prior_strength.is_finite()) {
            return Err(SolverError::Config(format!(
                "prior_strength must be finite and >= 0, got {}",
                self.prior_strength
            )));
        }
        self.prior.validate().map_err(SolverError::Config)
    }

    pub fn effective_prior(&self) -> DenoiserPrior {
        self.prior.scaled(self.prior_strength)
    }
}

/// Iterates and diagnostics of a solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: RangeImage,
    pub z: RangeImage,
    pub k: usize,
    /// `|S - D T^(k)|_F` after each iteration, over pixels valid in both.
    pub residual_history: Vec<f64>,
}

fn check_shapes(s: &RangeImage, hi: &RangeImage, sel: &RowSelection) -> Result<(), SolverError> {
    if s.height() != sel.h_lo() {
        return Err(SolverError::Shape(format!(
            "observation has {} rows, selection expects {}",
            s.height(),
            sel.h_lo()
        )));
    }
    if hi.height() != sel.h_hi() {
        return Err(SolverError::Shape(format!(
            "estimate has {} rows, selection expects {}",
            hi.height(),
            sel.h_hi()
        )));
    }
    if s.width() != hi.width() {
        return Err(SolverError::Shape(format!("widths differ: {} vs {}", s.width(), hi.width())));
    }
    Ok(())
}

/// Closed-form data step. Per pixel: observed rows with a valid sample and a
/// valid prior give `(S + b Z) / (1 + b)`; a missing prior leaves `S`; a
/// missing or unobserved sample leaves `Z`; with neither the pixel is
/// invalid.
pub fn data_step(s: &RangeImage, z: &RangeImage, sel: &RowSelection, b: f64) -> Result<RangeImage, SolverError> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(SolverError::Config(format!("b must be finite and > 0, got {b}")));
    }
    check_shapes(s, z, sel)?;
    let w = z.width();
    let zr = z.ranges();
    let zm = z.mask();
    let sr = s.ranges();
    let sm = s.mask();
    let mut range = zr.to_vec();
    let mut valid = zm.to_vec();
    let inv = 1.0 / (1.0 + b);
    for (k, &row) in sel.rows().iter().enumerate() {
        for j in 0..w {
            let u = row * w + j;
            let v = k * w + j;
            if !sm[v] {
                continue;
            }
            if zm[u] {
                range[u] = (sr[v] + b * zr[u]) * inv;
            } else {
                range[u] = sr[v];
                valid[u] = true;
            }
        }
    }
    Ok(RangeImage::from_raw(*z.config(), range, valid, z.intensity().map(<[f64]>::to_vec)))
}

/// `Z = G(T)`.
pub fn prior_step(t: &RangeImage, prior: &DenoiserPrior) -> RangeImage {
    prior.denoise(t)
}

/// `|S - D T|_F` over observed pixels valid in both images.
pub fn residual_norm(s: &RangeImage, t: &RangeImage, sel: &RowSelection) -> Result<f64, SolverError> {
    check_shapes(s, t, sel)?;
    Ok(residual_sq(s, t, sel).sqrt())
}

fn residual_sq(s: &RangeImage, t: &RangeImage, sel: &RowSelection) -> f64 {
    let w = t.width();
    let mut acc = 0.0;
    for (k, &row) in sel.rows().iter().enumerate() {
        for j in 0..w {
            let (u, v) = (row * w + j, k * w + j);
            if t.mask()[u] && s.mask()[v] {
                let d = s.ranges()[v] - t.ranges()[u];
                acc += d * d;
            }
        }
    }
    acc
}

/// `0.5 |S - D T|_F^2 + mu * TV(T)`, for reporting.
pub fn objective(t: &RangeImage, s: &RangeImage, sel: &RowSelection, mu: f64) -> Result<f64, SolverError> {
    check_shapes(s, t, sel)?;
    Ok(0.5 * residual_sq(s, t, sel) + mu * total_variation(t))
}

/// Initial estimate per `init`.
pub fn initialize(s: &RangeImage, sel: &RowSelection, init: Init) -> Result<RangeImage, SolverError> {
    match init {
        Init::AdjointZeroFill => Ok(crate::sampling::adjoint(s, sel)?),
        Init::ReplicateRows => replicate_rows(s, sel),
        Init::InterpolateRows => interpolate_rows(s, sel),
    }
}

/// Row-wise linear interpolation of the observed ranges. A pixel falls back
/// to its nearest observed row when a bracketing pixel is invalid or the
/// extrapolated range is not positive.
pub fn interpolate_rows(s: &RangeImage, sel: &RowSelection) -> Result<RangeImage, SolverError> {
    let out = replicate_rows(s, sel)?;
    let rows = sel.rows();
    if rows.len() < 2 {
        return Ok(out);
    }
    let w = s.width();
    let (cfg, mut range, mut valid, intensity) = out.into_parts();
    for i in 0..sel.h_hi() {
        // the pair of observed rows whose line gives row i
        let k = match rows.binary_search(&i) {
            Ok(_) => continue,
            Err(0) => 0,
            Err(p) if p == rows.len() => rows.len() - 2,
            Err(p) => p - 1,
        };
        let (ra, rb) = (rows[k] as f64, rows[k + 1] as f64);
        let t = (i as f64 - ra) / (rb - ra);
        for j in 0..w {
            let (Some(a), Some(b)) = (s.get(k, j), s.get(k + 1, j)) else {
                continue;
            };
            let v = a + t * (b - a);
            if v > 0.0 {
                range[i * w + j] = v;
                valid[i * w + j] = true;
            }
        }
    }
    Ok(RangeImage::from_raw(cfg, range, valid, intensity))
}

/// Nearest-row upsampling; also the baseline SR must beat.
pub fn replicate_rows(s: &RangeImage, sel: &RowSelection) -> Result<RangeImage, SolverError> {
    if s.height() != sel.h_lo() {
        return Err(SolverError::Shape(format!(
            "observation has {} rows, selection expects {}",
            s.height(),
            sel.h_lo()
        )));
    }
    let w = s.width();
    let cfg = s.config().with_height(sel.h_hi());
    let mut range = Vec::with_capacity(cfg.len());
    let mut valid = Vec::with_capacity(cfg.len());
    let mut intensity = s.intensity().map(|_| Vec::with_capacity(cfg.len()));
    for k in sel.nearest_observed() {
        range.extend_from_slice(s.row(k));
        valid.extend_from_slice(s.row_mask(k));
        if let (Some(out), Some(src)) = (intensity.as_mut(), s.intensity()) {
            out.extend_from_slice(&src[k * w..(k + 1) * w]);
        }
    }
    Ok(RangeImage::from_raw(cfg, range, valid, intensity))
}

/// Runs `cfg.iterations` unrolled layers from the configured initial
/// estimate.
pub fn superresolve(s: &RangeImage, sel: &RowSelection, cfg: &SolverConfig) -> Result<(RangeImage, SolverState), SolverError> {
    cfg.validate()?;
    let t0 = initialize(s, sel, cfg.init)?;
    run(s, sel, cfg, t0, &cfg.effective_prior())
}

/// As [`superresolve`] but starting from a caller-supplied estimate, e.g.
/// the previous frame.
pub fn superresolve_from(
    s: &RangeImage,
    sel: &RowSelection,
    cfg: &SolverConfig,
    t0: RangeImage,
) -> Result<(RangeImage, SolverState), SolverError> {
    cfg.validate()?;
    run(s, sel, cfg, t0, &cfg.effective_prior())
}

/// As [`superresolve`] with an arbitrary denoiser in place of `cfg.prior`.
pub fn superresolve_with(
    s: &RangeImage,
    sel: &RowSelection,
    cfg: &SolverConfig,
    denoiser: &dyn Denoiser,
) -> Result<(RangeImage, SolverState), SolverError> {
    cfg.validate()?;
    let t0 = initialize(s, sel, cfg.init)?;
    run(s, sel, cfg, t0, denoiser)
}

fn run(
    s: &RangeImage,
    sel: &RowSelection,
    cfg: &SolverConfig,
    t0: RangeImage,
    denoiser: &dyn Denoiser,
) -> Result<(RangeImage, SolverState), SolverError> {
    check_shapes(s, &t0, sel)?;
    if t0.config().fov_up != s.config().fov_up || t0.config().fov_down != s.config().fov_down {
        return Err(SolverError::Shape("estimate and observation fields of view differ".into()));
    }
    let mut t = t0;
    let mut z = t.clone();
    let mut history = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        z = denoiser.denoise(&t);
        t = data_step(s, &z, sel, cfg.b)?;
        history.push(residual_sq(s, &t, sel).sqrt());
    }
    let state = SolverState {
        t: t.clone(),
        z,
        k: history.len(),
        residual_history: history,
    };
    Ok((t, state))
}
