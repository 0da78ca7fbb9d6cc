//! Dense per-channel convolution operations on the kernel stack.
//!
//! These materialize full channel stacks and are the reference surface for
//! small grids and diagnostics. The streaming matcher in [`super::matcher`]
//! computes the same quantities without allocating the stacks.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Grid, VectorGrid};
use crate::math::VARIANCE_FLOOR;

use super::{ChannelStack, KernelStack, MatchMaps};

/// Nonzero kernel entries of one channel as centered offsets.
pub(super) fn channel_offsets(kernel: &Grid<f64>) -> Vec<(isize, isize, f64)> {
    let (kw, kh) = kernel.dims();
    let (ckx, cky) = ((kw / 2) as isize, (kh / 2) as isize);
    let mut offsets = Vec::new();
    for (u, v, &w) in kernel.iter_pixels() {
        if w != 0.0 {
            offsets.push((u as isize - ckx, v as isize - cky, w));
        }
    }
    offsets
}

/// Cross-correlates a plane with one channel kernel, "same" output size,
/// zero padding outside the plane.
pub(super) fn correlate_plane(plane: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
    let (w, h) = plane.dims();
    let offsets = channel_offsets(kernel);
    let mut out = Grid::filled(w, h, 0.0f64);
    for (dx, dy, weight) in offsets {
        for v_out in 0..h as isize {
            let v_src = v_out + dy;
            if v_src < 0 || v_src >= h as isize {
                continue;
            }
            let src_row = plane.row(v_src as usize);
            let dst_row = out.row_mut(v_out as usize);
            // dst[u] += weight * src[u + dx] over the in-bounds overlap.
            let u_lo = (-dx).max(0) as usize;
            let u_hi = ((w as isize - dx).min(w as isize)).max(0) as usize;
            if u_lo >= u_hi {
                continue;
            }
            let src = &src_row[(u_lo as isize + dx) as usize..(u_hi as isize + dx) as usize];
            let dst = &mut dst_row[u_lo..u_hi];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += weight * s;
            }
        }
    }
    out
}

/// Convolves the grasp-quality plane with every channel of the stack.
///
/// Channels are unit sum, so each output value is a weighted mean of the
/// quality under the footprint and stays in [0, 1].
pub fn convolve_quality(quality: &Grid<f64>, stack: &KernelStack) -> Result<ChannelStack> {
    let (w, h) = quality.dims();
    let (kw, kh) = stack.frame();
    if w < kw || h < kh {
        return Err(Error::InvalidValue(format!(
            "quality grid {w}x{h} is smaller than the kernel frame {kw}x{kh}"
        )));
    }
    let n = stack.channel_count();
    let planes: Vec<Grid<f64>> = (0..n)
        .into_par_iter()
        .map(|c| correlate_plane(quality, stack.channel(c)))
        .collect();
    let mut out = ChannelStack::zeros(n, w, h);
    for (c, plane) in planes.into_iter().enumerate() {
        out.channel_mut(c).copy_from_slice(plane.data());
    }
    Ok(out)
}

/// Weighted standard deviation of the normal field under each channel:
/// per component, convolve the squared normals and subtract the square of
/// the convolved normals, then combine the three component deviations by
/// Euclidean norm.
pub fn footprint_normal_std(normals: &VectorGrid, stack: &KernelStack) -> Result<ChannelStack> {
    let (w, h) = normals.dims();
    let (kw, kh) = stack.frame();
    if w < kw || h < kh {
        return Err(Error::InvalidValue(format!(
            "normal grid {w}x{h} is smaller than the kernel frame {kw}x{kh}"
        )));
    }
    let squares: [Grid<f64>; 3] = [
        normals.x.map(|v| v * v),
        normals.y.map(|v| v * v),
        normals.z.map(|v| v * v),
    ];
    let n = stack.channel_count();
    let planes: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|c| {
            let kernel = stack.channel(c);
            let mut combined = vec![0.0f64; w * h];
            for k in 0..3 {
                let mean = correlate_plane(normals.component(k), kernel);
                let mean_sq = correlate_plane(&squares[k], kernel);
                for (out, (m, m2)) in combined
                    .iter_mut()
                    .zip(mean.data().iter().zip(mean_sq.data()))
                {
                    let var = (m2 - m * m).abs();
                    if var > VARIANCE_FLOOR {
                        *out += var;
                    }
                }
            }
            for out in combined.iter_mut() {
                *out = out.sqrt();
            }
            combined
        })
        .collect();
    let mut out = ChannelStack::zeros(n, w, h);
    for (c, plane) in planes.into_iter().enumerate() {
        out.channel_mut(c).copy_from_slice(&plane);
    }
    Ok(out)
}

/// Grasp feasibility: accumulated quality divided by the regularized
/// footprint normal deviation, `(F*Q) / (epsilon + F_Std)`.
pub fn feasibility(
    quality_stack: &ChannelStack,
    std_stack: &ChannelStack,
    epsilon: f64,
) -> Result<ChannelStack> {
    if !quality_stack.same_shape(std_stack) {
        return Err(Error::InvalidValue(
            "quality and deviation stacks have different shapes".into(),
        ));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let mut out = ChannelStack::zeros(
        quality_stack.n_channels(),
        quality_stack.width(),
        quality_stack.height(),
    );
    for c in 0..quality_stack.n_channels() {
        let q = quality_stack.channel(c);
        let s = std_stack.channel(c);
        for (o, (q, s)) in out.channel_mut(c).iter_mut().zip(q.iter().zip(s)) {
            *o = q / (epsilon + s);
        }
    }
    Ok(out)
}

/// Per-pixel argmax over all channels, decoded into footprint index and
/// rotation. Ties break toward the lowest channel index (first footprint,
/// then smallest rotation).
pub fn reduce_matches(feas: &ChannelStack, stack: &KernelStack) -> Result<MatchMaps> {
    if feas.n_channels() == 0 || feas.n_channels() != stack.channel_count() {
        return Err(Error::InvalidValue(format!(
            "feasibility stack has {} channels, kernel stack has {}",
            feas.n_channels(),
            stack.channel_count()
        )));
    }
    let (w, h) = (feas.width(), feas.height());
    let mut best_val = vec![f64::NEG_INFINITY; w * h];
    let mut best_ch = vec![0u32; w * h];
    for c in 0..feas.n_channels() {
        let plane = feas.channel(c);
        for ((bv, bc), &v) in best_val.iter_mut().zip(best_ch.iter_mut()).zip(plane) {
            if v > *bv {
                *bv = v;
                *bc = c as u32;
            }
        }
    }
    let mut o_type = Grid::filled(w, h, 0u16);
    let mut o_rot = Grid::filled(w, h, 0.0f64);
    let mut o_q = Grid::filled(w, h, 0.0f64);
    for i in 0..w * h {
        let info = stack.info(best_ch[i] as usize);
        o_type.data_mut()[i] = info.footprint_idx as u16;
        o_rot.data_mut()[i] = info.rotation_deg;
        o_q.data_mut()[i] = best_val[i];
    }
    Ok(MatchMaps {
        o_type,
        o_rot,
        o_q,
        raw_feasibility: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::footprint::{build_kernel_stack, Cup, Footprint};

    fn rng(seed: u64) -> impl FnMut() -> f64 {
        let mut state = seed.max(1);
        move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn delta_footprint() -> Footprint {
        let mut pattern = Grid::filled(3, 3, 0.0);
        *pattern.at_mut(1, 1) = 1.0;
        Footprint::from_pattern("delta", 1, pattern, 2.0).unwrap()
    }

    /// Literal quadruple-loop cross-correlation, the independent oracle.
    fn naive_correlate(plane: &Grid<f64>, kernel: &Grid<f64>) -> Grid<f64> {
        let (w, h) = plane.dims();
        let (kw, kh) = kernel.dims();
        let (ckx, cky) = ((kw / 2) as isize, (kh / 2) as isize);
        Grid::from_fn(w, h, |u, v| {
            let mut acc = 0.0;
            for kv in 0..kh {
                for ku in 0..kw {
                    let su = u as isize + ku as isize - ckx;
                    let sv = v as isize + kv as isize - cky;
                    if let Some(&p) = plane.get(su, sv) {
                        acc += kernel.at(ku, kv) * p;
                    }
                }
            }
            acc
        })
    }

    #[test]
    fn delta_kernel_reproduces_quality() {
        let mut next = rng(11);
        let q = Grid::from_fn(16, 12, |_, _| next());
        let stack = build_kernel_stack(&[delta_footprint()], 90.0, 180.0).unwrap();
        let out = convolve_quality(&q, &stack).unwrap();
        for (u, v, &expected) in q.iter_pixels() {
            for c in 0..out.n_channels() {
                assert!(
                    (out.at(c, u, v) - expected).abs() < 1e-12,
                    "delta kernel must reproduce the input"
                );
            }
        }
    }

    #[test]
    fn constant_quality_stays_constant_away_from_borders() {
        let q = Grid::filled(40, 40, 0.7);
        let fp = Footprint::from_cups(
            "cup",
            1,
            vec![Cup {
                dx_mm: 0.0,
                dy_mm: 0.0,
                radius_mm: 3.0,
            }],
            2.0,
        )
        .unwrap();
        let stack = build_kernel_stack(&[fp], 45.0, 180.0).unwrap();
        let (kw, _) = stack.frame();
        let margin = kw / 2;
        let out = convolve_quality(&q, &stack).unwrap();
        for v in margin..40 - margin {
            for u in margin..40 - margin {
                assert!((out.at(0, u, v) - 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn random_case_matches_quadruple_loop_oracle() {
        let mut next = rng(77);
        let q = Grid::from_fn(16, 16, |_, _| next());
        let pattern = Grid::from_fn(5, 5, |_, _| (next() * 4.0).min(1.0).max(0.0));
        let fp = Footprint::from_pattern("rand", 1, pattern, 2.0).unwrap();
        let stack = build_kernel_stack(&[fp], 60.0, 180.0).unwrap();
        let out = convolve_quality(&q, &stack).unwrap();
        for c in 0..stack.channel_count() {
            let oracle = naive_correlate(&q, stack.channel(c));
            for (u, v, &expected) in oracle.iter_pixels() {
                assert!(
                    (out.at(c, u, v) - expected).abs() < 1e-10,
                    "channel {c} differs at ({u},{v})"
                );
            }
        }
    }

    fn constant_normals(w: usize, h: usize, n: [f64; 3]) -> VectorGrid {
        let mut g = VectorGrid::zeros(w, h);
        for v in 0..h {
            for u in 0..w {
                g.set(u, v, n);
            }
        }
        g
    }

    #[test]
    fn constant_normal_field_has_exactly_zero_std_interior() {
        let normals = constant_normals(30, 30, [0.0, 0.0, -1.0]);
        let fp = Footprint::from_cups(
            "cup",
            1,
            vec![Cup {
                dx_mm: 0.0,
                dy_mm: 0.0,
                radius_mm: 3.0,
            }],
            2.0,
        )
        .unwrap();
        let stack = build_kernel_stack(&[fp], 90.0, 180.0).unwrap();
        let (kw, _) = stack.frame();
        let margin = kw / 2;
        let out = footprint_normal_std(&normals, &stack).unwrap();
        for c in 0..out.n_channels() {
            for v in margin..30 - margin {
                for u in margin..30 - margin {
                    assert_eq!(out.at(c, u, v), 0.0, "channel {c} at ({u},{v})");
                }
            }
        }
    }

    #[test]
    fn delta_kernel_gives_zero_std_everywhere() {
        let mut next = rng(5);
        let mut normals = VectorGrid::zeros(12, 12);
        for v in 0..12 {
            for u in 0..12 {
                let n = [next() - 0.5, next() - 0.5, -next() - 0.1];
                let len = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                normals.set(u, v, [n[0] / len, n[1] / len, n[2] / len]);
            }
        }
        let stack = build_kernel_stack(&[delta_footprint()], 90.0, 180.0).unwrap();
        let out = footprint_normal_std(&normals, &stack).unwrap();
        for c in 0..out.n_channels() {
            for &v in out.channel(c) {
                assert_eq!(v, 0.0, "one-sample variance must be zero");
            }
        }
    }

    #[test]
    fn roof_ridge_std_matches_direct_weighted_oracle() {
        // Two half-planes of constant normals; a two-cup footprint straddling
        // the ridge sees both populations.
        let w = 60;
        let h = 40;
        let s = (0.5f64).sqrt();
        let mut normals = VectorGrid::zeros(w, h);
        for v in 0..h {
            for u in 0..w {
                if u < w / 2 {
                    normals.set(u, v, [-s, 0.0, -s]);
                } else {
                    normals.set(u, v, [s, 0.0, -s]);
                }
            }
        }
        let fp = Footprint::from_cups(
            "pair",
            2,
            vec![
                Cup {
                    dx_mm: -5.0,
                    dy_mm: 0.0,
                    radius_mm: 2.0,
                },
                Cup {
                    dx_mm: 5.0,
                    dy_mm: 0.0,
                    radius_mm: 2.0,
                },
            ],
            2.0,
        )
        .unwrap();
        let stack = build_kernel_stack(&[fp], 90.0, 180.0).unwrap();
        let out = footprint_normal_std(&normals, &stack).unwrap();

        // Direct weighted-variance oracle per component.
        let oracle = |c: usize, u: usize, v: usize| -> f64 {
            let kernel = stack.channel(c);
            let offsets = channel_offsets(kernel);
            let mut total = 0.0;
            for k in 0..3 {
                let mut mean = 0.0;
                let mut mean_sq = 0.0;
                for &(dx, dy, wgt) in &offsets {
                    let val = normals
                        .component(k)
                        .get(u as isize + dx, v as isize + dy)
                        .copied()
                        .unwrap_or(0.0);
                    mean += wgt * val;
                    mean_sq += wgt * val * val;
                }
                let var = (mean_sq - mean * mean).abs();
                total += var;
            }
            total.sqrt()
        };
        let ridge = w / 2;
        let mid = h / 2;
        for c in 0..stack.channel_count() {
            for u in [ridge - 6, ridge - 1, ridge, ridge + 3] {
                let got = out.at(c, u, mid);
                let expected = oracle(c, u, mid);
                if expected > 1e-6 {
                    assert!(
                        (got - expected).abs() < 1e-8,
                        "channel {c} at u={u}: {got} vs {expected}"
                    );
                } else {
                    // Constant sub-population: the naive route carries only
                    // rounding noise, which the variance floor removes.
                    assert_eq!(got, 0.0, "channel {c} at u={u}");
                }
            }
        }
        // The straddling orientation sees high deviation at the ridge.
        assert!(out.at(0, ridge, mid) > 0.5);
    }

    #[test]
    fn feasibility_flat_surface_scales_by_epsilon() {
        let mut q = ChannelStack::zeros(2, 4, 4);
        for c in 0..2 {
            for (i, v) in q.channel_mut(c).iter_mut().enumerate() {
                *v = (i + c) as f64 / 20.0;
            }
        }
        let s = ChannelStack::zeros(2, 4, 4);
        let f = feasibility(&q, &s, 0.1).unwrap();
        for c in 0..2 {
            for (fv, qv) in f.channel(c).iter().zip(q.channel(c)) {
                assert!((fv - qv / 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_quality_gives_zero_feasibility() {
        let q = ChannelStack::zeros(1, 3, 3);
        let mut s = ChannelStack::zeros(1, 3, 3);
        for v in s.channel_mut(0).iter_mut() {
            *v = 0.4;
        }
        let f = feasibility(&q, &s, 0.1).unwrap();
        assert!(f.channel(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn reduce_single_channel_is_identity() {
        let mut next = rng(3);
        let mut feas = ChannelStack::zeros(1, 6, 5);
        for v in feas.channel_mut(0).iter_mut() {
            *v = next();
        }
        let stack = build_kernel_stack(&[delta_footprint()], 180.0, 180.0).unwrap();
        let maps = reduce_matches(&feas, &stack).unwrap();
        for (u, v, &q) in maps.o_q.iter_pixels() {
            assert_eq!(q, feas.at(0, u, v));
            assert_eq!(*maps.o_type.at(u, v), 0);
            assert_eq!(*maps.o_rot.at(u, v), 0.0);
        }
    }

    #[test]
    fn reduce_dominant_channel_wins_everywhere() {
        let fp1 = delta_footprint();
        let mut p2 = Grid::filled(3, 3, 0.0);
        *p2.at_mut(1, 1) = 1.0;
        let fp2 = Footprint::from_pattern("delta2", 2, p2, 2.0).unwrap();
        let stack = build_kernel_stack(&[fp1, fp2], 180.0, 180.0).unwrap();
        let mut feas = ChannelStack::zeros(2, 4, 4);
        for v in feas.channel_mut(0).iter_mut() {
            *v = 0.2;
        }
        for v in feas.channel_mut(1).iter_mut() {
            *v = 0.9;
        }
        let maps = reduce_matches(&feas, &stack).unwrap();
        assert!(maps.o_type.data().iter().all(|&t| t == 1));
        assert!(maps.o_q.data().iter().all(|&q| q == 0.9));
    }

    #[test]
    fn reduce_matches_linear_scan_oracle() {
        let mut next = rng(123);
        let n = 3;
        let mut feas = ChannelStack::zeros(n, 8, 8);
        for c in 0..n {
            for v in feas.channel_mut(c).iter_mut() {
                *v = next();
            }
        }
        let fp = delta_footprint();
        let stack = build_kernel_stack(&[fp], 60.0, 180.0).unwrap();
        let maps = reduce_matches(&feas, &stack).unwrap();
        for v in 0..8 {
            for u in 0..8 {
                let mut best_c = 0;
                let mut best = f64::NEG_INFINITY;
                for c in 0..n {
                    let val = feas.at(c, u, v);
                    if val > best {
                        best = val;
                        best_c = c;
                    }
                }
                assert_eq!(*maps.o_q.at(u, v), best);
                assert_eq!(*maps.o_rot.at(u, v), stack.info(best_c).rotation_deg);
            }
        }
    }

    #[test]
    fn reduce_breaks_ties_toward_lowest_channel() {
        let fp = delta_footprint();
        let stack = build_kernel_stack(&[fp], 90.0, 180.0).unwrap();
        let mut feas = ChannelStack::zeros(2, 2, 2);
        for c in 0..2 {
            for v in feas.channel_mut(c).iter_mut() {
                *v = 0.5;
            }
        }
        let maps = reduce_matches(&feas, &stack).unwrap();
        assert!(maps.o_rot.data().iter().all(|&r| r == 0.0));
    }
}
