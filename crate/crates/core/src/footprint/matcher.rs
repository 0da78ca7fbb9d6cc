//! Fused streaming footprint matcher.
//!
//! Computes the same per-pixel argmax as the composed op chain
//! (`convolve_quality` -> `footprint_normal_std` -> `feasibility` ->
//! `reduce_matches`) without materializing any channel stack.
//!
//! Cup-based channels decompose into disk convolutions shared across all
//! rotations: each field is convolved once per distinct cup radius, and a
//! channel's response is the sum of a few integer-shifted reads of those
//! planes. Pattern channels fall back to direct accumulation over nonzero
//! kernel entries.
//!
//! Every pixel's value is computed with a fixed summation order, so results
//! are identical regardless of thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid};
use crate::math::VARIANCE_FLOOR;

use super::conv::channel_offsets;
use super::{ChannelStack, KernelStack, MatchMaps};

/// How channel feasibility is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityMode {
    /// Accumulated quality divided by the regularized footprint normal
    /// deviation. The default.
    Penalized,
    /// Raw accumulated quality with activation-mass weighting and no
    /// deviation penalty, i.e. the plain unnormalized convolution of the
    /// quality map. Reproduces the edge-wrapping failure mode; intended for
    /// regression tests and diagnostics.
    RawAccumulation,
}

/// Options for [`match_footprints`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub epsilon: f64,
    pub mode: FeasibilityMode,
    /// Keep the full per-channel feasibility stack in the result.
    pub emit_raw: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            mode: FeasibilityMode::Penalized,
            emit_raw: false,
        }
    }
}

const N_FIELDS: usize = 7; // Q, Nx, Ny, Nz, Nx^2, Ny^2, Nz^2

/// Input planes embedded in a zero margin of `pad` pixels on every side.
struct PaddedFields {
    width: usize,
    height: usize,
    planes: Vec<Grid<f64>>,
}

impl PaddedFields {
    fn build(
        quality: &Grid<f64>,
        normals: &VectorGrid,
        normal_valid: &Grid<bool>,
        pad: usize,
    ) -> Self {
        let (w, h) = quality.dims();
        let (pw, ph) = (w + 2 * pad, h + 2 * pad);
        let mut planes: Vec<Grid<f64>> = (0..N_FIELDS).map(|_| Grid::filled(pw, ph, 0.0)).collect();
        for v in 0..h {
            for u in 0..w {
                let valid = *normal_valid.at(u, v);
                let n = if valid { normals.at(u, v) } else { [0.0; 3] };
                let q = *quality.at(u, v);
                let (pu, pv) = (u + pad, v + pad);
                *planes[0].at_mut(pu, pv) = q;
                for k in 0..3 {
                    *planes[1 + k].at_mut(pu, pv) = n[k];
                    *planes[4 + k].at_mut(pu, pv) = n[k] * n[k];
                }
            }
        }
        Self {
            width: w,
            height: h,
            planes,
        }
    }
}

/// Row prefix sums of a padded plane: `prefix[v][u] = sum(plane[v][0..u])`.
struct RowPrefix {
    stride: usize,
    data: Vec<f64>,
}

impl RowPrefix {
    fn build(plane: &Grid<f64>) -> Self {
        let (pw, ph) = plane.dims();
        let stride = pw + 1;
        let mut data = vec![0.0f64; stride * ph];
        for v in 0..ph {
            let row = plane.row(v);
            let out = &mut data[v * stride..(v + 1) * stride];
            let mut acc = 0.0;
            for (u, &x) in row.iter().enumerate() {
                acc += x;
                out[u + 1] = acc;
            }
        }
        Self { stride, data }
    }

    #[inline]
    fn row(&self, v: usize) -> &[f64] {
        &self.data[v * self.stride..(v + 1) * self.stride]
    }
}

/// Unnormalized disk-sum convolution of a padded plane: the value at `q` is
/// the sum of the plane over a disk of the given pixel radius centered at
/// `q`. Computed row-run by row-run from prefix sums.
fn disk_convolve(prefix: &RowPrefix, dims: (usize, usize), radius: f64) -> Grid<f64> {
    let (pw, ph) = dims;
    let ri = radius.floor() as isize;
    let rows: Vec<Vec<f64>> = (0..ph)
        .into_par_iter()
        .map(|v_out| {
            let mut row = vec![0.0f64; pw];
            for dy in -ri..=ri {
                let v_src = v_out as isize + dy;
                if v_src < 0 || v_src >= ph as isize {
                    continue;
                }
                let hw = (radius * radius - (dy * dy) as f64).sqrt().floor() as isize;
                let p = prefix.row(v_src as usize);
                for (u, out) in row.iter_mut().enumerate() {
                    let lo = (u as isize - hw).max(0) as usize;
                    let hi = (u as isize + hw + 1).min(pw as isize) as usize;
                    *out += p[hi] - p[lo];
                }
            }
            row
        })
        .collect();
    let mut out = Grid::filled(pw, ph, 0.0f64);
    for (v, row) in rows.into_iter().enumerate() {
        out.row_mut(v).copy_from_slice(&row);
    }
    out
}

/// One disk-plane read contributing to a cup channel's response.
#[derive(Debug, Clone, Copy)]
struct Shift {
    radius_idx: usize,
    dx: isize,
    dy: isize,
}

enum ChannelPlan {
    /// Disk-plane reads, one per cup.
    Cups(Vec<Shift>),
    /// Direct accumulation over nonzero kernel entries.
    Dense(Vec<(isize, isize, f64)>),
    /// Identical to an earlier channel; can never win the argmax.
    Duplicate,
}

/// Runs footprint matching over the full image, returning the per-pixel
/// winning footprint, rotation, and feasibility.
pub fn match_footprints(
    quality: &Grid<f64>,
    normals: &VectorGrid,
    normal_valid: &Grid<bool>,
    stack: &KernelStack,
    cfg: &MatchConfig,
) -> Result<MatchMaps> {
    let (w, h) = quality.dims();
    if normals.dims() != (w, h) {
        return Err(Error::DimensionMismatch {
            expected_w: w,
            expected_h: h,
            got_w: normals.width(),
            got_h: normals.height(),
        });
    }
    quality.require_same_dims(normal_valid)?;
    let (fw, fh) = stack.frame();
    if w < fw || h < fh {
        return Err(Error::InvalidValue(format!(
            "image {w}x{h} is smaller than the kernel frame {fw}x{fh}"
        )));
    }
    if cfg.mode == FeasibilityMode::Penalized && !(cfg.epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {}",
            cfg.epsilon
        )));
    }

    let pad = fw / 2;
    let fields = PaddedFields::build(quality, normals, normal_valid, pad);
    let pdims = (fields.width + 2 * pad, fields.height + 2 * pad);

    // Distinct cup radii across all channels, keyed at nanometer resolution.
    let mut radius_keys: Vec<i64> = Vec::new();
    let mut radius_of = |r: f64| -> usize {
        let key = (r * 1e6).round() as i64;
        match radius_keys.iter().position(|&k| k == key) {
            Some(idx) => idx,
            None => {
                radius_keys.push(key);
                radius_keys.len() - 1
            }
        }
    };
    // Channels with identical cup plans (a rotationally symmetric footprint
    // repeats the same snapped raster for every rotation) produce identical
    // values; under the strict-greater argmax only the first occurrence can
    // win, so later duplicates are skipped entirely. With the raw stack
    // requested every channel must still be evaluated.
    let mut seen_plans: Vec<(Vec<(usize, isize, isize)>, usize)> = Vec::new();
    let plans: Vec<ChannelPlan> = (0..stack.channel_count())
        .map(|c| {
            let info = stack.info(c);
            match &info.cups_px {
                Some(cups) => {
                    let shifts: Vec<Shift> = cups
                        .iter()
                        .map(|cup| Shift {
                            radius_idx: radius_of(cup.radius_px),
                            dx: cup.dx as isize,
                            dy: cup.dy as isize,
                        })
                        .collect();
                    let mut key: Vec<(usize, isize, isize)> =
                        shifts.iter().map(|s| (s.radius_idx, s.dx, s.dy)).collect();
                    key.sort_unstable();
                    if !cfg.emit_raw {
                        let dup = seen_plans
                            .iter()
                            .find(|(k, _)| *k == key)
                            .map(|&(_, first)| first);
                        if let Some(first) = dup {
                            if (stack.info(first).mass - info.mass).abs() < 1e-12 {
                                return ChannelPlan::Duplicate;
                            }
                        }
                        seen_plans.push((key, c));
                    }
                    ChannelPlan::Cups(shifts)
                }
                None => ChannelPlan::Dense(channel_offsets(stack.channel(c))),
            }
        })
        .collect();

    // Disk-sum planes per distinct radius, per field.
    let disk_planes: Vec<Vec<Grid<f64>>> = if radius_keys.is_empty() {
        Vec::new()
    } else {
        let prefixes: Vec<RowPrefix> = fields.planes.iter().map(RowPrefix::build).collect();
        radius_keys
            .iter()
            .map(|&key| {
                let radius = key as f64 / 1e6;
                prefixes
                    .iter()
                    .map(|p| disk_convolve(p, pdims, radius))
                    .collect()
            })
            .collect()
    };

    // Banded sweep over output rows; each band owns its result rows.
    let n_bands = (rayon::current_num_threads() * 4).clamp(1, h);
    let band_size = h.div_ceil(n_bands);
    let bands: Vec<(usize, usize)> = (0..h)
        .step_by(band_size)
        .map(|v0| (v0, (v0 + band_size).min(h)))
        .collect();

    struct BandResult {
        v0: usize,
        best_val: Vec<f64>,
        best_ch: Vec<u32>,
        raw: Option<Vec<f64>>,
    }

    let n_channels = stack.channel_count();
    let results: Vec<BandResult> = bands
        .par_iter()
        .map(|&(v0, v1)| {
            let rows = v1 - v0;
            let mut best_val = vec![f64::NEG_INFINITY; rows * w];
            let mut best_ch = vec![0u32; rows * w];
            let mut raw = if cfg.emit_raw {
                Some(vec![0.0f64; n_channels * rows * w])
            } else {
                None
            };
            let mut acc = vec![vec![0.0f64; w]; N_FIELDS];
            let mut value_row = vec![0.0f64; w];
            for v in v0..v1 {
                let out_row = (v - v0) * w;
                for (ci, plan) in plans.iter().enumerate() {
                    let info = stack.info(ci);
                    match plan {
                        ChannelPlan::Duplicate => continue,
                        ChannelPlan::Cups(shifts) => {
                            for f in 0..N_FIELDS {
                                for (s_idx, shift) in shifts.iter().enumerate() {
                                    let plane = &disk_planes[shift.radius_idx][f];
                                    let src_v = (v as isize + shift.dy + pad as isize) as usize;
                                    let src_u0 = (shift.dx + pad as isize) as usize;
                                    let src = &plane.row(src_v)[src_u0..src_u0 + w];
                                    accumulate(&mut acc[f], src, 1.0, s_idx == 0);
                                }
                            }
                        }
                        ChannelPlan::Dense(offsets) => {
                            for f in 0..N_FIELDS {
                                let plane = &fields.planes[f];
                                for (o_idx, &(dx, dy, weight)) in offsets.iter().enumerate() {
                                    let src_v = (v as isize + dy + pad as isize) as usize;
                                    let src_u0 = (dx + pad as isize) as usize;
                                    let src = &plane.row(src_v)[src_u0..src_u0 + w];
                                    accumulate(&mut acc[f], src, weight, o_idx == 0);
                                }
                            }
                        }
                    }
                    // Cup plans accumulate unnormalized disk sums; dense
                    // plans read the already unit-sum kernel weights.
                    let (inv, raw_scale) = match plan {
                        ChannelPlan::Dense(_) => (1.0, info.mass),
                        _ => (1.0 / info.mass, 1.0),
                    };
                    // Value pass kept free of branches so it vectorizes;
                    // the argmax update scans the finished row.
                    let (acc_q, acc_rest) = acc.split_first().unwrap();
                    match cfg.mode {
                        FeasibilityMode::RawAccumulation => {
                            for (value, &q) in value_row.iter_mut().zip(acc_q.iter()) {
                                *value = q * raw_scale;
                            }
                        }
                        FeasibilityMode::Penalized => {
                            for (u, value) in value_row.iter_mut().enumerate() {
                                let fq = acc_q[u] * inv;
                                let mut var_total = 0.0;
                                for k in 0..3 {
                                    let m = acc_rest[k][u] * inv;
                                    let m2 = acc_rest[3 + k][u] * inv;
                                    let var = (m2 - m * m).abs();
                                    if var > VARIANCE_FLOOR {
                                        var_total += var;
                                    }
                                }
                                *value = fq / (cfg.epsilon + var_total.sqrt());
                            }
                        }
                    }
                    let bv = &mut best_val[out_row..out_row + w];
                    let bc = &mut best_ch[out_row..out_row + w];
                    for (u, &value) in value_row.iter().enumerate() {
                        if value > bv[u] {
                            bv[u] = value;
                            bc[u] = ci as u32;
                        }
                    }
                    if let Some(raw) = raw.as_mut() {
                        raw[(ci * rows + (v - v0)) * w..][..w].copy_from_slice(&value_row);
                    }
                }
            }
            BandResult {
                v0,
                best_val,
                best_ch,
                raw,
            }
        })
        .collect();

    let mut o_type = Grid::filled(w, h, 0u16);
    let mut o_rot = Grid::filled(w, h, 0.0f64);
    let mut o_q = Grid::filled(w, h, 0.0f64);
    let mut raw_stack = if cfg.emit_raw {
        Some(ChannelStack::zeros(n_channels, w, h))
    } else {
        None
    };
    for band in results {
        let rows = band.best_val.len() / w;
        for r in 0..rows {
            let v = band.v0 + r;
            for u in 0..w {
                let ch = band.best_ch[r * w + u] as usize;
                let info = stack.info(ch);
                *o_type.at_mut(u, v) = info.footprint_idx as u16;
                *o_rot.at_mut(u, v) = info.rotation_deg;
                *o_q.at_mut(u, v) = band.best_val[r * w + u];
            }
        }
        if let (Some(stack_out), Some(band_raw)) = (raw_stack.as_mut(), band.raw) {
            for c in 0..n_channels {
                for r in 0..rows {
                    let v = band.v0 + r;
                    let src = &band_raw[(c * rows + r) * w..][..w];
                    stack_out.channel_mut(c)[v * w..(v + 1) * w].copy_from_slice(src);
                }
            }
        }
    }

    Ok(MatchMaps {
        o_type,
        o_rot,
        o_q,
        raw_feasibility: raw_stack,
    })
}

#[inline]
fn accumulate(dst: &mut [f64], src: &[f64], weight: f64, first: bool) {
    if first {
        if weight == 1.0 {
            dst.copy_from_slice(src);
        } else {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = weight * s;
            }
        }
    } else if weight == 1.0 {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    } else {
        for (d, s) in dst.iter_mut().zip(src) {
            *d += weight * s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::{
        build_kernel_stack, convolve_quality, feasibility, footprint_normal_std, reduce_matches,
        Cup, Footprint,
    };

    fn rng(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn random_scene(seed: u64, w: usize, h: usize) -> (Grid<f64>, VectorGrid, Grid<bool>) {
        let mut next = rng(seed);
        let quality = Grid::from_fn(w, h, |_, _| next());
        let mut normals = VectorGrid::zeros(w, h);
        let valid = Grid::from_fn(w, h, |_, _| next() > 0.05);
        for v in 0..h {
            for u in 0..w {
                let n = [next() - 0.5, next() - 0.5, -next() - 0.05];
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                normals.set(u, v, [n[0] / len, n[1] / len, n[2] / len]);
            }
        }
        (quality, normals, valid)
    }

    fn zero_invalid(normals: &VectorGrid, valid: &Grid<bool>) -> VectorGrid {
        let mut out = normals.clone();
        for (u, v, &ok) in valid.iter_pixels() {
            if !ok {
                out.set(u, v, [0.0, 0.0, 0.0]);
            }
        }
        out
    }

    fn test_footprints() -> Vec<Footprint> {
        vec![
            Footprint::from_cups(
                "single",
                1,
                vec![Cup {
                    dx_mm: 0.0,
                    dy_mm: 0.0,
                    radius_mm: 2.0,
                }],
                2.0,
            )
            .unwrap(),
            Footprint::from_cups(
                "pair",
                2,
                vec![
                    Cup {
                        dx_mm: -4.0,
                        dy_mm: 0.0,
                        radius_mm: 1.5,
                    },
                    Cup {
                        dx_mm: 4.0,
                        dy_mm: 0.0,
                        radius_mm: 1.5,
                    },
                ],
                2.0,
            )
            .unwrap(),
        ]
    }

    fn composed_reference(
        quality: &Grid<f64>,
        normals: &VectorGrid,
        valid: &Grid<bool>,
        stack: &crate::footprint::KernelStack,
        epsilon: f64,
    ) -> MatchMaps {
        let zeroed = zero_invalid(normals, valid);
        let q_stack = convolve_quality(quality, stack).unwrap();
        let s_stack = footprint_normal_std(&zeroed, stack).unwrap();
        let f_stack = feasibility(&q_stack, &s_stack, epsilon).unwrap();
        reduce_matches(&f_stack, stack).unwrap()
    }

    #[test]
    fn fused_matches_composed_chain_on_cup_footprints() {
        let (quality, normals, valid) = random_scene(17, 48, 40);
        let stack = build_kernel_stack(&test_footprints(), 30.0, 180.0).unwrap();
        let reference = composed_reference(&quality, &normals, &valid, &stack, 0.1);
        let fused = match_footprints(
            &quality,
            &normals,
            &valid,
            &stack,
            &MatchConfig::default(),
        )
        .unwrap();
        for v in 0..40 {
            for u in 0..48 {
                assert!(
                    (fused.o_q.at(u, v) - reference.o_q.at(u, v)).abs() < 1e-9,
                    "o_q differs at ({u},{v}): {} vs {}",
                    fused.o_q.at(u, v),
                    reference.o_q.at(u, v)
                );
                assert_eq!(fused.o_type.at(u, v), reference.o_type.at(u, v));
                assert_eq!(fused.o_rot.at(u, v), reference.o_rot.at(u, v));
            }
        }
    }

    #[test]
    fn fused_matches_composed_chain_on_pattern_footprints() {
        let (quality, normals, valid) = random_scene(29, 32, 28);
        let mut next = rng(5);
        let pattern = Grid::from_fn(7, 5, |_, _| if next() > 0.4 { 1.0 } else { 0.0 });
        let pattern = {
            let mut p = pattern;
            *p.at_mut(3, 2) = 1.0;
            p
        };
        let fp = Footprint::from_pattern("blob", 1, pattern, 2.0).unwrap();
        let stack = build_kernel_stack(&[fp], 45.0, 180.0).unwrap();
        let reference = composed_reference(&quality, &normals, &valid, &stack, 0.1);
        let fused = match_footprints(
            &quality,
            &normals,
            &valid,
            &stack,
            &MatchConfig::default(),
        )
        .unwrap();
        for v in 0..28 {
            for u in 0..32 {
                assert!((fused.o_q.at(u, v) - reference.o_q.at(u, v)).abs() < 1e-9);
                assert_eq!(fused.o_type.at(u, v), reference.o_type.at(u, v));
            }
        }
    }

    #[test]
    fn raw_mode_equals_unnormalized_convolution() {
        let (quality, normals, valid) = random_scene(31, 40, 32);
        let stack = build_kernel_stack(&test_footprints(), 90.0, 180.0).unwrap();
        let cfg = MatchConfig {
            mode: FeasibilityMode::RawAccumulation,
            emit_raw: true,
            ..MatchConfig::default()
        };
        let fused = match_footprints(&quality, &normals, &valid, &stack, &cfg).unwrap();
        let q_stack = convolve_quality(&quality, &stack).unwrap();
        let raw = fused.raw_feasibility.as_ref().unwrap();
        for c in 0..stack.channel_count() {
            let mass = stack.info(c).mass;
            for v in 0..32 {
                for u in 0..40 {
                    let expected = q_stack.at(c, u, v) * mass;
                    assert!(
                        (raw.at(c, u, v) - expected).abs() < 1e-9,
                        "channel {c} at ({u},{v})"
                    );
                }
            }
        }
    }

    #[test]
    fn results_identical_across_thread_counts() {
        let (quality, normals, valid) = random_scene(7, 40, 36);
        let stack = build_kernel_stack(&test_footprints(), 45.0, 180.0).unwrap();
        let cfg = MatchConfig::default();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| match_footprints(&quality, &normals, &valid, &stack, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.o_q.data(), b.o_q.data());
        assert_eq!(a.o_type.data(), b.o_type.data());
        assert_eq!(a.o_rot.data(), b.o_rot.data());
    }

    #[test]
    fn scaling_quality_preserves_argmax() {
        let (quality, normals, valid) = random_scene(13, 44, 36);
        let stack = build_kernel_stack(&test_footprints(), 36.0, 180.0).unwrap();
        let cfg = MatchConfig::default();
        let full = match_footprints(&quality, &normals, &valid, &stack, &cfg).unwrap();
        let halved = quality.map(|&q| q * 0.5);
        let half = match_footprints(&halved, &normals, &valid, &stack, &cfg).unwrap();
        assert_eq!(full.o_type.data(), half.o_type.data());
        assert_eq!(full.o_rot.data(), half.o_rot.data());
        for (a, b) in full.o_q.data().iter().zip(half.o_q.data()) {
            assert!((a * 0.5 - b).abs() < 1e-9);
        }
    }

    #[test]
    fn o_q_upper_bounds_every_channel() {
        let (quality, normals, valid) = random_scene(3, 36, 30);
        let stack = build_kernel_stack(&test_footprints(), 60.0, 180.0).unwrap();
        let cfg = MatchConfig {
            emit_raw: true,
            ..MatchConfig::default()
        };
        let maps = match_footprints(&quality, &normals, &valid, &stack, &cfg).unwrap();
        let raw = maps.raw_feasibility.as_ref().unwrap();
        for c in 0..raw.n_channels() {
            for v in 0..30 {
                for u in 0..36 {
                    assert!(raw.at(c, u, v) <= *maps.o_q.at(u, v) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn rotational_consistency_under_quarter_turn() {
        // Rotating the scene by 90 degrees must reproduce the result of the
        // 90-degree-rotated channel at corresponding pixels.
        let n = 41;
        let (quality, normals, valid) = random_scene(23, n, n);
        let fp = test_footprints().remove(1); // the asymmetric pair
        let stack = build_kernel_stack(&[fp], 90.0, 180.0).unwrap();
        let cfg = MatchConfig {
            emit_raw: true,
            ..MatchConfig::default()
        };
        let maps = match_footprints(&quality, &normals, &valid, &stack, &cfg).unwrap();
        let raw = maps.raw_feasibility.as_ref().unwrap();

        // Rotate the scene a quarter turn: dst(u, v) = src(v, n-1-u) maps
        // source offsets through the same forward rotation used for cups.
        let rot_q = Grid::from_fn(n, n, |u, v| *quality.at(v, n - 1 - u));
        let rot_valid = Grid::from_fn(n, n, |u, v| *valid.at(v, n - 1 - u));
        let mut rot_n = VectorGrid::zeros(n, n);
        for v in 0..n {
            for u in 0..n {
                // The normal vector itself also rotates in-plane.
                let src = normals.at(v, n - 1 - u);
                rot_n.set(u, v, [-src[1], src[0], src[2]]);
            }
        }
        let rot_maps = match_footprints(&rot_q, &rot_n, &rot_valid, &stack, &cfg).unwrap();
        let rot_raw = rot_maps.raw_feasibility.as_ref().unwrap();

        // Channel 0 (0 deg) on the original equals channel 1 (90 deg) on the
        // rotated scene at corresponding pixels.
        let margin = stack.frame().0 / 2 + 1;
        for v in margin..n - margin {
            for u in margin..n - margin {
                let (ru, rv) = (n - 1 - v, u);
                let a = raw.at(0, u, v);
                let b = rot_raw.at(1, ru, rv);
                assert!(
                    (a - b).abs() < 1e-3,
                    "rotational consistency at ({u},{v}): {a} vs {b}"
                );
            }
        }
    }
}
