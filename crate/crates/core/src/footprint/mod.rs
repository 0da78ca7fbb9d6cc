//! Gripper footprints, the stacked rotation kernel, and footprint matching.
//!
//! A footprint is a contact-weight pattern centered at the end-effector
//! pose. All rotations of all footprints are stacked into one multi-channel
//! kernel; convolving the grasp quality map and the normal field with the
//! stack yields per-pixel gripper selection, rotation, and feasibility.
//!
//! Footprints come in two flavors:
//!
//! - **Pattern footprints** carry an arbitrary grid loaded from a PGM file;
//!   rotated channels are produced by bilinear resampling.
//! - **Cup footprints** are described parametrically as disjoint circular
//!   suction cups; rotated channels place each cup disk at its rotated,
//!   pixel-snapped center. These channels decompose into shared disk
//!   convolutions, which is what makes full-resolution matching fast.

mod conv;
mod matcher;

pub use conv::{convolve_quality, feasibility, footprint_normal_std, reduce_matches};
pub use matcher::{match_footprints, FeasibilityMode, MatchConfig};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Cup diameter of the canonical single-suction footprint, millimeters.
pub const CANONICAL_CUP_DIAMETER_MM: f64 = 20.0;
/// Center spacing of the canonical two-cup footprint, millimeters.
pub const CANONICAL_TWO_CUP_SPACING_MM: f64 = 26.0;

/// One suction cup of a parametric footprint, in millimeters relative to
/// the end-effector center. Image convention: x right, y down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cup {
    pub dx_mm: f64,
    pub dy_mm: f64,
    pub radius_mm: f64,
}

/// The canonical four-footprint set: a single-cup gripper plus a linear
/// multi-cup gripper with three activation patterns (inner pair, triple,
/// outer pair), all at 2 px/mm.
pub fn default_footprint_set() -> Vec<Footprint> {
    let r = CANONICAL_CUP_DIAMETER_MM / 2.0;
    let s = CANONICAL_TWO_CUP_SPACING_MM;
    let cup = |dx: f64| Cup {
        dx_mm: dx,
        dy_mm: 0.0,
        radius_mm: r,
    };
    vec![
        Footprint::from_cups("cup20", 1, vec![cup(0.0)], 2.0).expect("canonical single"),
        Footprint::from_cups("pair26", 2, vec![cup(-s / 2.0), cup(s / 2.0)], 2.0)
            .expect("canonical pair"),
        Footprint::from_cups("triple26", 2, vec![cup(-s), cup(0.0), cup(s)], 2.0)
            .expect("canonical triple"),
        Footprint::from_cups("pair52", 2, vec![cup(-s), cup(s)], 2.0).expect("canonical wide pair"),
    ]
}

/// A gripper footprint (one activation pattern of a gripper).
#[derive(Debug, Clone)]
pub struct Footprint {
    pub name: String,
    /// Gripper id; several footprints may share one gripper as alternative
    /// activation patterns.
    pub gripper_type: u32,
    /// Contact weights in [0, 1], odd dimensions, centered on the
    /// end-effector anchor pixel.
    pub pattern: Grid<f64>,
    pub pixels_per_mm: f64,
    /// Parametric cup decomposition when known.
    pub cups: Option<Vec<Cup>>,
}

impl Footprint {
    /// Wraps an explicit pattern grid.
    pub fn from_pattern(
        name: impl Into<String>,
        gripper_type: u32,
        pattern: Grid<f64>,
        pixels_per_mm: f64,
    ) -> Result<Self> {
        let fp = Self {
            name: name.into(),
            gripper_type,
            pattern,
            pixels_per_mm,
            cups: None,
        };
        fp.validate()?;
        Ok(fp)
    }

    /// Builds a footprint from disjoint circular cups. Cup disks are
    /// rasterized at pixel-snapped centers; a 2 px margin between cups is
    /// required so they stay disjoint under every rotation.
    pub fn from_cups(
        name: impl Into<String>,
        gripper_type: u32,
        cups: Vec<Cup>,
        pixels_per_mm: f64,
    ) -> Result<Self> {
        let name = name.into();
        if cups.is_empty() {
            return Err(Error::Config(format!("footprint '{name}' has no cups")));
        }
        if !(pixels_per_mm > 0.0) {
            return Err(Error::Config("pixels_per_mm must be positive".into()));
        }
        for cup in &cups {
            if !(cup.radius_mm > 0.0) {
                return Err(Error::Config(format!(
                    "footprint '{name}': cup radius must be positive"
                )));
            }
        }
        for (i, a) in cups.iter().enumerate() {
            for b in cups.iter().skip(i + 1) {
                let dist =
                    ((a.dx_mm - b.dx_mm).powi(2) + (a.dy_mm - b.dy_mm).powi(2)).sqrt();
                let min_dist = a.radius_mm + b.radius_mm + 2.0 / pixels_per_mm;
                if dist < min_dist {
                    return Err(Error::Config(format!(
                        "footprint '{name}': cups overlap or touch (distance {dist:.2} mm, \
                         need {min_dist:.2} mm)"
                    )));
                }
            }
        }
        let pattern = rasterize_cups(&cups, pixels_per_mm, 0.0);
        let fp = Self {
            name,
            gripper_type,
            pattern,
            pixels_per_mm,
            cups: Some(cups),
        };
        fp.validate()?;
        Ok(fp)
    }

    fn validate(&self) -> Result<()> {
        let (w, h) = self.pattern.dims();
        if w % 2 == 0 || h % 2 == 0 || w == 0 || h == 0 {
            return Err(Error::Config(format!(
                "footprint '{}' pattern must have odd dimensions, got {w}x{h}",
                self.name
            )));
        }
        if !(self.pixels_per_mm > 0.0) {
            return Err(Error::Config("pixels_per_mm must be positive".into()));
        }
        let mut any_positive = false;
        for &p in self.pattern.data() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!(
                    "footprint '{}' pattern value {p} outside [0, 1]",
                    self.name
                )));
            }
            any_positive |= p > 0.0;
        }
        if !any_positive {
            return Err(Error::Config(format!(
                "footprint '{}' pattern has no positive value",
                self.name
            )));
        }
        Ok(())
    }

    /// Largest distance from the center to any active pixel, in pixels.
    fn radial_extent(&self) -> f64 {
        if let Some(cups) = &self.cups {
            return cups
                .iter()
                .map(|c| {
                    (c.dx_mm.hypot(c.dy_mm) + c.radius_mm) * self.pixels_per_mm
                })
                .fold(0.0, f64::max);
        }
        let (w, h) = self.pattern.dims();
        let (cu, cv) = ((w / 2) as f64, (h / 2) as f64);
        let mut extent = 0.0f64;
        for (u, v, &p) in self.pattern.iter_pixels() {
            if p > 0.0 {
                extent = extent.max((u as f64 - cu).hypot(v as f64 - cv));
            }
        }
        extent
    }
}

/// Rasterizes disjoint cup disks into an odd-sized pattern grid. Cup
/// centers are snapped to the pixel lattice after rotating by `angle_deg`.
fn rasterize_cups(cups: &[Cup], pixels_per_mm: f64, angle_deg: f64) -> Grid<f64> {
    let placed = place_cups(cups, pixels_per_mm, angle_deg);
    let mut half = 0i64;
    for cup in &placed {
        let r = cup.radius_px.ceil() as i64;
        half = half.max(cup.dx.abs().max(cup.dy.abs()) + r);
    }
    let side = (2 * half + 1) as usize;
    let mut pattern = Grid::filled(side, side, 0.0f64);
    stamp_cups(&placed, &mut pattern, half, half);
    pattern
}

/// A cup disk placed on the pixel lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedCup {
    pub dx: i64,
    pub dy: i64,
    pub radius_px: f64,
}

fn place_cups(cups: &[Cup], pixels_per_mm: f64, angle_deg: f64) -> Vec<PlacedCup> {
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    cups.iter()
        .map(|c| {
            let x = c.dx_mm * pixels_per_mm;
            let y = c.dy_mm * pixels_per_mm;
            PlacedCup {
                dx: (x * cos - y * sin).round() as i64,
                dy: (x * sin + y * cos).round() as i64,
                radius_px: c.radius_mm * pixels_per_mm,
            }
        })
        .collect()
}

fn stamp_cups(placed: &[PlacedCup], pattern: &mut Grid<f64>, cx: i64, cy: i64) {
    for cup in placed {
        let r = cup.radius_px;
        let ri = r.floor() as i64;
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if (dx * dx + dy * dy) as f64 <= r * r {
                    let u = cx + cup.dx + dx;
                    let v = cy + cup.dy + dy;
                    if u >= 0
                        && v >= 0
                        && (u as usize) < pattern.width()
                        && (v as usize) < pattern.height()
                    {
                        *pattern.at_mut(u as usize, v as usize) = 1.0;
                    }
                }
            }
        }
    }
}

/// Metadata describing one kernel channel.
#[derive(Debug, Clone)]
pub struct ChannelInfo {
    pub footprint_idx: usize,
    pub rotation_deg: f64,
    /// Pre-normalization activation mass (sum of the rasterized channel).
    pub mass: f64,
    /// Disk decomposition of the channel, when the footprint is cup-based.
    pub cups_px: Option<Vec<PlacedCup>>,
}

/// Identity of a footprint inside a kernel stack.
#[derive(Debug, Clone)]
pub struct FootprintInfo {
    pub name: String,
    pub gripper_type: u32,
}

/// The combined multi-channel convolution kernel: every rotation of every
/// footprint as a unit-sum channel on a common odd frame.
#[derive(Debug, Clone)]
pub struct KernelStack {
    channels: Vec<Grid<f64>>,
    channel_info: Vec<ChannelInfo>,
    footprints: Vec<FootprintInfo>,
    rotation_step_deg: f64,
    max_rotation_deg: f64,
    rotations_per_footprint: usize,
    pixels_per_mm: f64,
}

impl KernelStack {
    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, idx: usize) -> &Grid<f64> {
        &self.channels[idx]
    }

    pub fn info(&self, idx: usize) -> &ChannelInfo {
        &self.channel_info[idx]
    }

    pub fn footprint(&self, idx: usize) -> &FootprintInfo {
        &self.footprints[idx]
    }

    pub fn footprint_count(&self) -> usize {
        self.footprints.len()
    }

    pub fn rotations_per_footprint(&self) -> usize {
        self.rotations_per_footprint
    }

    pub fn rotation_step_deg(&self) -> f64 {
        self.rotation_step_deg
    }

    pub fn max_rotation_deg(&self) -> f64 {
        self.max_rotation_deg
    }

    pub fn pixels_per_mm(&self) -> f64 {
        self.pixels_per_mm
    }

    /// Common channel frame (width, height); both odd.
    pub fn frame(&self) -> (usize, usize) {
        self.channels[0].dims()
    }

    /// True when every channel carries a disk decomposition.
    pub fn all_cup_channels(&self) -> bool {
        self.channel_info.iter().all(|c| c.cups_px.is_some())
    }
}

/// Builds the stacked kernel: `rotations_per_footprint` rotations of each
/// footprint, channel-ordered footprint-major (footprint 0 rotations first,
/// each by ascending angle). Channels are normalized to unit sum.
pub fn build_kernel_stack(
    footprints: &[Footprint],
    rotation_step_deg: f64,
    max_rotation_deg: f64,
) -> Result<KernelStack> {
    if footprints.is_empty() {
        return Err(Error::Config("footprint list is empty".into()));
    }
    if !(rotation_step_deg > 0.0) || !(max_rotation_deg > 0.0) {
        return Err(Error::Config(
            "rotation step and range must be positive".into(),
        ));
    }
    let n_r = max_rotation_deg / rotation_step_deg;
    if (n_r - n_r.round()).abs() > 1e-9 || n_r.round() < 1.0 {
        return Err(Error::Config(format!(
            "rotation step {rotation_step_deg} must divide max rotation {max_rotation_deg}"
        )));
    }
    let n_r = n_r.round() as usize;
    let pixels_per_mm = footprints[0].pixels_per_mm;
    for fp in footprints {
        if (fp.pixels_per_mm - pixels_per_mm).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "mixed pixel scales: footprint '{}' has {} px/mm, expected {}",
                fp.name, fp.pixels_per_mm, pixels_per_mm
            )));
        }
        fp.validate()?;
    }

    // Frame sized to the largest rotated extent over all footprints; +1 px
    // absorbs bilinear spill and cup-center snapping.
    let extent = footprints
        .iter()
        .map(Footprint::radial_extent)
        .fold(0.0, f64::max);
    let half = extent.ceil() as usize + 1;
    let side = 2 * half + 1;

    let mut channels = Vec::with_capacity(footprints.len() * n_r);
    let mut channel_info = Vec::with_capacity(footprints.len() * n_r);
    for (f_idx, fp) in footprints.iter().enumerate() {
        for r_idx in 0..n_r {
            let angle = r_idx as f64 * rotation_step_deg;
            let (mut raster, cups_px) = match &fp.cups {
                Some(cups) => {
                    let placed = place_cups(cups, pixels_per_mm, angle);
                    let mut grid = Grid::filled(side, side, 0.0f64);
                    stamp_cups(&placed, &mut grid, half as i64, half as i64);
                    (grid, Some(placed))
                }
                None => (rotate_pattern(&fp.pattern, angle, side), None),
            };
            let mass: f64 = raster.data().iter().sum();
            if mass <= 0.0 {
                return Err(Error::Config(format!(
                    "footprint '{}' rotated by {angle} deg has no active pixel",
                    fp.name
                )));
            }
            let inv = 1.0 / mass;
            for p in raster.data_mut() {
                *p *= inv;
            }
            channels.push(raster);
            channel_info.push(ChannelInfo {
                footprint_idx: f_idx,
                rotation_deg: angle,
                mass,
                cups_px,
            });
        }
    }

    Ok(KernelStack {
        channels,
        channel_info,
        footprints: footprints
            .iter()
            .map(|fp| FootprintInfo {
                name: fp.name.clone(),
                gripper_type: fp.gripper_type,
            })
            .collect(),
        rotation_step_deg,
        max_rotation_deg,
        rotations_per_footprint: n_r,
        pixels_per_mm,
    })
}

/// Rotates a pattern about its center pixel by `angle_deg` into an odd
/// `side x side` frame using bilinear resampling, clamped to [0, 1].
fn rotate_pattern(pattern: &Grid<f64>, angle_deg: f64, side: usize) -> Grid<f64> {
    let (pw, ph) = pattern.dims();
    let (pcx, pcy) = ((pw / 2) as f64, (ph / 2) as f64);
    let c = (side / 2) as f64;
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    Grid::from_fn(side, side, |u, v| {
        // Inverse map: rotate the target offset back into the pattern.
        let ox = u as f64 - c;
        let oy = v as f64 - c;
        let sx = ox * cos + oy * sin + pcx;
        let sy = -ox * sin + oy * cos + pcy;
        bilinear_sample(pattern, sx, sy).clamp(0.0, 1.0)
    })
}

fn bilinear_sample(grid: &Grid<f64>, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let sample = |u: isize, v: isize| grid.get(u, v).copied().unwrap_or(0.0);
    let v00 = sample(x0, y0);
    let v10 = sample(x0 + 1, y0);
    let v01 = sample(x0, y0 + 1);
    let v11 = sample(x0 + 1, y0 + 1);
    v00 * (1.0 - fx) * (1.0 - fy)
        + v10 * fx * (1.0 - fy)
        + v01 * (1.0 - fx) * fy
        + v11 * fx * fy
}

/// A dense multi-channel plane stack, channel-major.
#[derive(Debug, Clone)]
pub struct ChannelStack {
    n_channels: usize,
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ChannelStack {
    pub fn zeros(n_channels: usize, width: usize, height: usize) -> Self {
        Self {
            n_channels,
            width,
            height,
            data: vec![0.0; n_channels * width * height],
        }
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.width * self.height;
        &mut self.data[c * n..(c + 1) * n]
    }

    #[inline]
    pub fn at(&self, c: usize, u: usize, v: usize) -> f64 {
        self.data[(c * self.height + v) * self.width + u]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, u: usize, v: usize) -> &mut f64 {
        &mut self.data[(c * self.height + v) * self.width + u]
    }

    pub fn same_shape(&self, other: &ChannelStack) -> bool {
        self.n_channels == other.n_channels
            && self.width == other.width
            && self.height == other.height
    }
}

/// Per-pixel footprint matching results.
#[derive(Debug, Clone)]
pub struct MatchMaps {
    /// Winning footprint index per pixel.
    pub o_type: Grid<u16>,
    /// Winning rotation per pixel, degrees in `[0, max_rotation)`.
    pub o_rot: Grid<f64>,
    /// Feasibility of the winning channel.
    pub o_q: Grid<f64>,
    /// Full feasibility stack, kept only on request.
    pub raw_feasibility: Option<ChannelStack>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_footprint(radius_mm: f64) -> Footprint {
        Footprint::from_cups(
            "single",
            1,
            vec![Cup {
                dx_mm: 0.0,
                dy_mm: 0.0,
                radius_mm,
            }],
            2.0,
        )
        .unwrap()
    }

    fn pair_footprint(spacing_mm: f64, radius_mm: f64) -> Footprint {
        Footprint::from_cups(
            "pair",
            2,
            vec![
                Cup {
                    dx_mm: -spacing_mm / 2.0,
                    dy_mm: 0.0,
                    radius_mm,
                },
                Cup {
                    dx_mm: spacing_mm / 2.0,
                    dy_mm: 0.0,
                    radius_mm,
                },
            ],
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn cup_pattern_is_centered_disk() {
        let fp = disk_footprint(5.0);
        let (w, h) = fp.pattern.dims();
        assert_eq!(w % 2, 1);
        assert_eq!(h % 2, 1);
        let (cx, cy) = (w / 2, h / 2);
        assert_eq!(*fp.pattern.at(cx, cy), 1.0);
        // Radius 10 px: pixel at distance 10 is in, 11 is out.
        assert_eq!(*fp.pattern.at(cx + 10, cy), 1.0);
        assert_eq!(*fp.pattern.at(cx, cy - 10), 1.0);
        if cx + 11 < w {
            assert_eq!(*fp.pattern.at(cx + 11, cy), 0.0);
        }
    }

    #[test]
    fn overlapping_cups_rejected() {
        let result = Footprint::from_cups(
            "bad",
            1,
            vec![
                Cup {
                    dx_mm: 0.0,
                    dy_mm: 0.0,
                    radius_mm: 10.0,
                },
                Cup {
                    dx_mm: 15.0,
                    dy_mm: 0.0,
                    radius_mm: 10.0,
                },
            ],
            2.0,
        );
        assert!(result.is_err());
    }

    #[test]
    fn symmetric_disk_channels_are_identical() {
        let stack = build_kernel_stack(&[disk_footprint(6.0)], 5.0, 180.0).unwrap();
        assert_eq!(stack.channel_count(), 36);
        let reference = stack.channel(0);
        for c in 1..36 {
            for (a, b) in reference.data().iter().zip(stack.channel(c).data()) {
                assert!(
                    (a - b).abs() < 1e-3,
                    "rotated disk channel differs beyond tolerance"
                );
            }
        }
    }

    #[test]
    fn zero_rotation_channel_is_padded_normalized_pattern() {
        let fp = pair_footprint(20.0, 4.0);
        let mass: f64 = fp.pattern.data().iter().sum();
        let stack = build_kernel_stack(&[fp.clone()], 5.0, 180.0).unwrap();
        let ch = stack.channel(0);
        let (side, _) = stack.frame();
        let offset = (side - fp.pattern.width()) / 2;
        let offset_v = (side - fp.pattern.height()) / 2;
        for (u, v, &p) in fp.pattern.iter_pixels() {
            let got = *ch.at(u + offset, v + offset_v);
            assert!((got - p / mass).abs() < 1e-15);
        }
        // Everything outside the embedded pattern is zero.
        let total: f64 = ch.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ninety_degree_rotation_matches_transpose_oracle() {
        // Rectangular two-cup pattern footprint; exact 90-degree rotation
        // via transpose+flip is the oracle.
        let pair = pair_footprint(16.0, 3.0);
        let pattern = pair.pattern.clone();
        let fp =
            Footprint::from_pattern("pair_pattern", 2, pattern.clone(), 2.0).unwrap();
        let stack = build_kernel_stack(&[fp], 90.0, 180.0).unwrap();
        assert_eq!(stack.channel_count(), 2);
        let ch90 = stack.channel(1);
        let (side, _) = stack.frame();

        // Oracle: rotate the embedded pattern by 90 degrees. With the
        // inverse-map convention used by the builder, out(u, v) samples
        // pattern(center + (u-c)*cos + (v-c)*sin, -(u-c)*sin + (v-c)*cos);
        // at 90 degrees that is pattern(v', -u') = transpose + flip.
        let half = side / 2;
        let (pw, ph) = pattern.dims();
        let mass: f64 = pattern.data().iter().sum();
        let mut oracle: Grid<f64> = Grid::filled(side, side, 0.0);
        for v in 0..side {
            for u in 0..side {
                let ox = u as i64 - half as i64;
                let oy = v as i64 - half as i64;
                // Inverse rotation by 90 degrees: (sx, sy) = (oy, -ox).
                let sx = oy + (pw / 2) as i64;
                let sy = -ox + (ph / 2) as i64;
                if sx >= 0 && sy >= 0 && (sx as usize) < pw && (sy as usize) < ph {
                    *oracle.at_mut(u, v) = *pattern.at(sx as usize, sy as usize) / mass;
                }
            }
        }
        for (a, b) in ch90.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-3, "90-degree channel differs: {a} vs {b}");
        }
    }

    #[test]
    fn channels_are_unit_sum() {
        let footprints = vec![disk_footprint(5.0), pair_footprint(22.0, 5.0)];
        let stack = build_kernel_stack(&footprints, 15.0, 180.0).unwrap();
        for c in 0..stack.channel_count() {
            let sum: f64 = stack.channel(c).data().iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "channel {c} sums to {sum}");
        }
    }

    #[test]
    fn channel_order_is_footprint_major() {
        let footprints = vec![disk_footprint(5.0), pair_footprint(22.0, 5.0)];
        let stack = build_kernel_stack(&footprints, 45.0, 180.0).unwrap();
        assert_eq!(stack.channel_count(), 8);
        assert_eq!(stack.info(0).footprint_idx, 0);
        assert_eq!(stack.info(0).rotation_deg, 0.0);
        assert_eq!(stack.info(3).rotation_deg, 135.0);
        assert_eq!(stack.info(4).footprint_idx, 1);
        assert_eq!(stack.info(4).rotation_deg, 0.0);
    }

    #[test]
    fn mixed_scales_rejected() {
        let a = disk_footprint(5.0);
        let mut b = pair_footprint(22.0, 5.0);
        b.pixels_per_mm = 3.0;
        assert!(build_kernel_stack(&[a, b], 5.0, 180.0).is_err());
    }

    #[test]
    fn step_must_divide_range() {
        let fp = disk_footprint(5.0);
        assert!(build_kernel_stack(&[fp.clone()], 7.0, 180.0).is_err());
        assert!(build_kernel_stack(&[fp], 45.0, 180.0).is_ok());
    }
}
