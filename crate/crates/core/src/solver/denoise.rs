//! Mask-aware denoisers used as the prior step of the unrolled solver.

use serde::{Deserialize, Serialize};

use crate::rangeview::RangeImage;

/// The prior step `Z = G(T)`. Implementations must leave invalid pixels
/// invalid and must not read their stored values.
pub trait Denoiser {
    fn denoise(&self, img: &RangeImage) -> RangeImage;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DenoiserPrior {
    Identity,
    /// Windowed median over valid neighbours, blended with the input by
    /// `strength` in [0, 1].
    Median { window: usize, strength: f64 },
    /// Proximal operator of `weight * TV`, `weight` in meters.
    TvProx { weight: f64, inner_iters: usize },
}

impl Default for DenoiserPrior {
    fn default() -> Self {
        DenoiserPrior::TvProx {
            weight: 0.02,
            inner_iters: 10,
        }
    }
}

impl DenoiserPrior {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            DenoiserPrior::Identity => Ok(()),
            DenoiserPrior::Median { window, strength } => {
                if window < 3 || window % 2 == 0 {
                    return Err(format!("median window must be odd and >= 3, got {window}"));
                }
                if !(0.0..=1.0).contains(&strength) {
                    return Err(format!("median strength must lie in [0, 1], got {strength}"));
                }
                Ok(())
            }
            DenoiserPrior::TvProx { weight, inner_iters } => {
                if !(weight >= 0.0 && weight.is_finite()) {
                    return Err(format!("tv weight must be finite and >= 0, got {weight}"));
                }
                if inner_iters == 0 {
                    return Err("tv inner iterations must be >= 1".into());
                }
                Ok(())
            }
        }
    }

    /// The prior with its strength multiplied by `lambda`; zero gives the
    /// identity.
    pub fn scaled(&self, lambda: f64) -> DenoiserPrior {
        match *self {
            DenoiserPrior::Identity => DenoiserPrior::Identity,
            DenoiserPrior::Median { window, strength } => DenoiserPrior::Median {
                window,
                strength: (strength * lambda).clamp(0.0, 1.0),
            },
            DenoiserPrior::TvProx { weight, inner_iters } => DenoiserPrior::TvProx {
                weight: weight * lambda,
                inner_iters,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DenoiserPrior::Identity => "identity",
            DenoiserPrior::Median { .. } => "median",
            DenoiserPrior::TvProx { .. } => "tv-prox",
        }
    }
}

impl Denoiser for DenoiserPrior {
    fn denoise(&self, img: &RangeImage) -> RangeImage {
        match *self {
            DenoiserPrior::Identity => img.clone(),
            DenoiserPrior::Median { window, strength } => median_blend(img, window, strength),
            DenoiserPrior::TvProx { weight, inner_iters } => tv_prox(img, weight, inner_iters),
        }
    }
}

/// Anisotropic total variation over 4-neighbour edges joining two valid
/// pixels.
pub fn total_variation(img: &RangeImage) -> f64 {
    let (h, w) = (img.height(), img.width());
    let r = img.ranges();
    let m = img.mask();
    let mut tv = 0.0;
    for i in 0..h {
        for j in 0..w {
            let u = i * w + j;
            if !m[u] {
                continue;
            }
            if j + 1 < w && m[u + 1] {
                tv += (r[u + 1] - r[u]).abs();
            }
            if i + 1 < h && m[u + w] {
                tv += (r[u + w] - r[u]).abs();
            }
        }
    }
    tv
}

/// Approximate `argmin_x 0.5 |x - y|^2 + weight * TV(x)` on the valid-pixel
/// graph by dual projection: projected gradient on the edge duals, started
/// from zero. Few iterations give a diffusion-like smoothing; many converge
/// to the exact prox. Invalid pixels are untouched.
pub fn tv_prox(img: &RangeImage, weight: f64, inner_iters: usize) -> RangeImage {
    if weight <= 0.0 || inner_iters == 0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let n = h * w;
    let y = img.ranges();
    let m = img.mask();

    // Edge u -> u+1 exists in `eh[u]`, u -> u+w in `ev[u]`.
    let mut eh = vec![false; n];
    let mut ev = vec![false; n];
    let mut degree = vec![0u8; n];
    let mut any_edge = false;
    for i in 0..h {
        for j in 0..w {
            let u = i * w + j;
            if !m[u] {
                continue;
            }
            if j + 1 < w && m[u + 1] {
                eh[u] = true;
                degree[u] += 1;
                degree[u + 1] += 1;
                any_edge = true;
            }
            if i + 1 < h && m[u + w] {
                ev[u] = true;
                degree[u] += 1;
                degree[u + w] += 1;
                any_edge = true;
            }
        }
    }
    if !any_edge {
        return img.clone();
    }
    // |D|^2 <= 2 * max degree for a graph incidence matrix.
    let max_deg = degree.iter().copied().max().unwrap_or(1).max(1) as f64;
    let step = 1.0 / (2.0 * max_deg * weight);

    let mut p_h = vec![0.0; n];
    let mut p_v = vec![0.0; n];
    let mut x = vec![0.0; n];
    for _ in 0..inner_iters {
        primal(y, m, &p_h, &p_v, &eh, &ev, weight, w, &mut x);
        for u in 0..n {
            if eh[u] {
                p_h[u] = (p_h[u] + step * (x[u + 1] - x[u])).clamp(-1.0, 1.0);
            }
            if ev[u] {
                p_v[u] = (p_v[u] + step * (x[u + w] - x[u])).clamp(-1.0, 1.0);
            }
        }
    }
    primal(y, m, &p_h, &p_v, &eh, &ev, weight, w, &mut x);
    RangeImage::from_raw(*img.config(), x, m.to_vec(), img.intensity().map(<[f64]>::to_vec))
}

/// `x = y - weight * D^T p` on valid pixels.
#[allow(clippy::too_many_arguments)]
fn primal(y: &[f64], m: &[bool], p_h: &[f64], p_v: &[f64], eh: &[bool], ev: &[bool], weight: f64, w: usize, x: &mut [f64]) {
    for u in 0..y.len() {
        if !m[u] {
            x[u] = 0.0;
            continue;
        }
        let mut div = 0.0;
        if eh[u] {
            div -= p_h[u];
        }
        if ev[u] {
            div -= p_v[u];
        }
        if u % w > 0 && eh[u - 1] {
            div += p_h[u - 1];
        }
        if u >= w && ev[u - w] {
            div += p_v[u - w];
        }
        x[u] = y[u] - weight * div;
    }
}

/// Median over the valid pixels of a `window x window` neighbourhood,
/// blended with the input: `t + strength * (median - t)`.
pub fn median_blend(img: &RangeImage, window: usize, strength: f64) -> RangeImage {
    if strength == 0.0 {
        return img.clone();
    }
    let (h, w) = (img.height(), img.width());
    let half = window / 2;
    let r = img.ranges();
    let m = img.mask();
    let mut out = r.to_vec();
    let mut buf = Vec::with_capacity(window * window);
    for i in 0..h {
        for j in 0..w {
            let u = i * w + j;
            if !m[u] {
                continue;
            }
            buf.clear();
            for ii in i.saturating_sub(half)..(i + half + 1).min(h) {
                for jj in j.saturating_sub(half)..(j + half + 1).min(w) {
                    let v = ii * w + jj;
                    if m[v] {
                        buf.push(r[v]);
                    }
                }
            }
            buf.sort_by(f64::total_cmp);
            let k = buf.len();
            let med = if k % 2 == 1 {
                buf[k / 2]
            } else {
                0.5 * (buf[k / 2 - 1] + buf[k / 2])
            };
            out[u] = r[u] + strength * (med - r[u]);
        }
    }
    RangeImage::from_raw(*img.config(), out, m.to_vec(), img.intensity().map(<[f64]>::to_vec))
}
