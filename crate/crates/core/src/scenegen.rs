//! Synthetic depth/intensity scenes of analytic primitives with exact
//! ground truth.
//!
//! Scenes are ray-cast from an overhead pinhole camera against boxes,
//! cylinders, and roof wedges standing on a bin floor. Ground-truth quality
//! is produced by the labeler on the noise-free render; Gaussian depth noise
//! and dropout holes are applied afterward to the emitted scene only, so the
//! ground truth always reflects true geometry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::evaluation::{Difficulty, SceneGroundTruth};
use crate::geometry::{compute_geometry, GeometryConfig, SceneGrid};
use crate::grid::Grid;
use crate::labeling::{generate_labels, LabelConfig};
use crate::quality::QualityMap;

/// Analytic primitive shapes. All stand on the bin floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Rectangular box: x-extent, y-extent, height.
    Box {
        width_m: f64,
        depth_m: f64,
        height_m: f64,
    },
    /// Vertical cylinder.
    Cylinder { radius_m: f64, height_m: f64 },
    /// Roof wedge: two sloped faces meeting at a ridge running along the
    /// local y-axis. `height_m = width_m / 2` makes the faces meet at 90
    /// degrees.
    Wedge {
        width_m: f64,
        length_m: f64,
        height_m: f64,
    },
}

impl Shape {
    /// Horizontal circumradius, for placement checks.
    fn footprint_radius(&self) -> f64 {
        match *self {
            Shape::Box { width_m, depth_m, .. } => width_m.hypot(depth_m) / 2.0,
            Shape::Cylinder { radius_m, .. } => radius_m,
            Shape::Wedge {
                width_m, length_m, ..
            } => width_m.hypot(length_m) / 2.0,
        }
    }

    fn height(&self) -> f64 {
        match *self {
            Shape::Box { height_m, .. } => height_m,
            Shape::Cylinder { height_m, .. } => height_m,
            Shape::Wedge { height_m, .. } => height_m,
        }
    }
}

/// A placed primitive: shape, horizontal center, yaw about the vertical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub cx_m: f64,
    pub cy_m: f64,
    pub yaw_deg: f64,
}

/// Bin geometry: a floor plane at `floor_depth_m` below the camera with
/// four walls around the rectangular interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinGeometry {
    pub floor_depth_m: f64,
    /// Interior x-extent.
    pub width_m: f64,
    /// Interior y-extent.
    pub depth_m: f64,
    pub wall_height_m: f64,
    pub wall_thickness_m: f64,
}

impl Default for BinGeometry {
    fn default() -> Self {
        Self {
            floor_depth_m: 0.5,
            width_m: 0.20,
            depth_m: 0.15,
            wall_height_m: 0.025,
            wall_thickness_m: 0.006,
        }
    }
}

/// A complete synthetic scene description.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveScene {
    pub bin: BinGeometry,
    pub primitives: Vec<Primitive>,
    /// Depth noise applied to the emitted scene, meters.
    pub noise_sigma_m: f64,
    /// Fraction of pixels invalidated in the emitted scene.
    pub hole_rate: f64,
    pub seed: u64,
}

impl PrimitiveScene {
    /// Validates that every primitive lies inside the bin footprint.
    pub fn validate(&self) -> Result<()> {
        let half_w = self.bin.width_m / 2.0;
        let half_d = self.bin.depth_m / 2.0;
        for (i, p) in self.primitives.iter().enumerate() {
            let r = p.shape.footprint_radius();
            if p.cx_m.abs() + r > half_w || p.cy_m.abs() + r > half_d {
                return Err(Error::Config(format!(
                    "primitive {i} extends outside the bin footprint"
                )));
            }
            if p.shape.height() >= self.bin.floor_depth_m {
                return Err(Error::Config(format!(
                    "primitive {i} reaches the camera plane"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.hole_rate) {
            return Err(Error::Config("hole_rate must be in [0, 1]".into()));
        }
        if self.noise_sigma_m < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// The overhead camera matching a given floor depth at roughly 2 px/mm.
pub fn overhead_camera(dims: (usize, usize), floor_depth_m: f64, pixels_per_mm: f64) -> CameraIntrinsics {
    let f = pixels_per_mm * 1000.0 * floor_depth_m;
    CameraIntrinsics {
        fx: f,
        fy: f,
        cx: (dims.0 as f64 - 1.0) / 2.0,
        cy: (dims.1 as f64 - 1.0) / 2.0,
    }
}

/// Smallest even frame that contains the bin including walls at the
/// overhead-camera scale, plus a small margin.
pub fn fitting_dims(bin: &BinGeometry, pixels_per_mm: f64) -> (usize, usize) {
    let f = pixels_per_mm * 1000.0 * bin.floor_depth_m;
    let z_top = bin.floor_depth_m - bin.wall_height_m;
    let half_w = (bin.width_m / 2.0 + bin.wall_thickness_m) * f / z_top;
    let half_h = (bin.depth_m / 2.0 + bin.wall_thickness_m) * f / z_top;
    (
        2 * (half_w.ceil() as usize + 8),
        2 * (half_h.ceil() as usize + 8),
    )
}

// -- Ray casting ---------------------------------------------------------------

/// Ray `p = t * dir` with `dir_z = 1`, so `t` equals metric depth.
struct Ray {
    dx: f64,
    dy: f64,
}

trait Solid {
    /// Nearest positive hit depth, if any.
    fn hit(&self, ray: &Ray) -> Option<f64>;
}

/// Convex solid given by half-spaces `n . p <= b`.
struct ConvexSolid {
    half_spaces: Vec<([f64; 3], f64)>,
}

impl Solid for ConvexSolid {
    fn hit(&self, ray: &Ray) -> Option<f64> {
        let mut t_enter = 0.0f64;
        let mut t_exit = f64::INFINITY;
        for &(n, b) in &self.half_spaces {
            let denom = n[0] * ray.dx + n[1] * ray.dy + n[2];
            // Ray origin is the camera at 0, so n . o = 0.
            if denom.abs() < 1e-15 {
                if b < 0.0 {
                    return None;
                }
                continue;
            }
            let t = b / denom;
            if denom > 0.0 {
                t_exit = t_exit.min(t);
            } else {
                t_enter = t_enter.max(t);
            }
            if t_enter > t_exit {
                return None;
            }
        }
        (t_enter > 0.0).then_some(t_enter)
    }
}

struct CylinderSolid {
    cx: f64,
    cy: f64,
    radius: f64,
    z_top: f64,
    z_bottom: f64,
}

impl Solid for CylinderSolid {
    fn hit(&self, ray: &Ray) -> Option<f64> {
        // Top cap.
        let t = self.z_top;
        let (px, py) = (ray.dx * t - self.cx, ray.dy * t - self.cy);
        if px * px + py * py <= self.radius * self.radius {
            return Some(t);
        }
        // Side surface: |o + t d - c|^2 = r^2 in the horizontal plane.
        let a = ray.dx * ray.dx + ray.dy * ray.dy;
        if a < 1e-18 {
            return None;
        }
        let b = -2.0 * (ray.dx * self.cx + ray.dy * self.cy);
        let c = self.cx * self.cx + self.cy * self.cy - self.radius * self.radius;
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sqrt_disc = disc.sqrt();
        for t in [(-b - sqrt_disc) / (2.0 * a), (-b + sqrt_disc) / (2.0 * a)] {
            if t > 0.0 {
                let z = t;
                if z >= self.z_top && z <= self.z_bottom {
                    return Some(t);
                }
            }
        }
        None
    }
}

fn primitive_solid(p: &Primitive, floor: f64) -> Box<dyn Solid + Sync> {
    let (sin, cos) = p.yaw_deg.to_radians().sin_cos();
    // Local frame axes in world coordinates (rotation about z by yaw).
    let xl = [cos, sin];
    let yl = [-sin, cos];
    let center = [p.cx_m, p.cy_m];
    // Half-space helper in the local horizontal frame: axis . (p - center) <= d.
    let lateral = |axis: [f64; 2], d: f64| -> ([f64; 3], f64) {
        let n = [axis[0], axis[1], 0.0];
        let b = d + axis[0] * center[0] + axis[1] * center[1];
        (n, b)
    };
    match p.shape {
        Shape::Box {
            width_m,
            depth_m,
            height_m,
        } => Box::new(ConvexSolid {
            half_spaces: vec![
                lateral(xl, width_m / 2.0),
                lateral([-xl[0], -xl[1]], width_m / 2.0),
                lateral(yl, depth_m / 2.0),
                lateral([-yl[0], -yl[1]], depth_m / 2.0),
                ([0.0, 0.0, 1.0], floor),
                ([0.0, 0.0, -1.0], -(floor - height_m)),
            ],
        }),
        Shape::Cylinder { radius_m, height_m } => Box::new(CylinderSolid {
            cx: p.cx_m,
            cy: p.cy_m,
            radius: radius_m,
            z_top: floor - height_m,
            z_bottom: floor,
        }),
        Shape::Wedge {
            width_m,
            length_m,
            height_m,
        } => {
            // Roof surfaces: z >= apex + slope * |x_local|, i.e. two planes
            // -slope*x_l - z <= -apex and slope*x_l - z <= -apex.
            let apex = floor - height_m;
            let slope = height_m / (width_m / 2.0);
            let roof = |sign: f64| -> ([f64; 3], f64) {
                // sign * slope * x_local - z <= -apex
                let ax = sign * slope;
                let n = [ax * xl[0], ax * xl[1], -1.0];
                let b = -apex + ax * (xl[0] * center[0] + xl[1] * center[1]);
                (n, b)
            };
            Box::new(ConvexSolid {
                half_spaces: vec![
                    lateral(xl, width_m / 2.0),
                    lateral([-xl[0], -xl[1]], width_m / 2.0),
                    lateral(yl, length_m / 2.0),
                    lateral([-yl[0], -yl[1]], length_m / 2.0),
                    ([0.0, 0.0, 1.0], floor),
                    roof(1.0),
                    roof(-1.0),
                ],
            })
        }
    }
}

fn bin_solids(bin: &BinGeometry) -> Vec<Box<dyn Solid + Sync>> {
    let t = bin.wall_thickness_m;
    let hw = bin.width_m / 2.0;
    let hd = bin.depth_m / 2.0;
    let wall = |cx: f64, cy: f64, w: f64, d: f64| -> Box<dyn Solid + Sync> {
        Box::new(ConvexSolid {
            half_spaces: vec![
                ([1.0, 0.0, 0.0], cx + w / 2.0),
                ([-1.0, 0.0, 0.0], -(cx - w / 2.0)),
                ([0.0, 1.0, 0.0], cy + d / 2.0),
                ([0.0, -1.0, 0.0], -(cy - d / 2.0)),
                ([0.0, 0.0, 1.0], bin.floor_depth_m),
                ([0.0, 0.0, -1.0], -(bin.floor_depth_m - bin.wall_height_m)),
            ],
        })
    };
    vec![
        wall(-(hw + t / 2.0), 0.0, t, bin.depth_m + 2.0 * t),
        wall(hw + t / 2.0, 0.0, t, bin.depth_m + 2.0 * t),
        wall(0.0, -(hd + t / 2.0), bin.width_m + 2.0 * t, t),
        wall(0.0, hd + t / 2.0, bin.width_m + 2.0 * t, t),
    ]
}

// -- Rendering ---------------------------------------------------------------

/// Everything `render` produces for one scene.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    /// The emitted scene with noise and holes applied.
    pub scene: SceneGrid,
    pub ground_truth: SceneGroundTruth,
    /// Clean empty-bin depth for background subtraction.
    pub background_depth: Grid<f64>,
    /// Noise-free depth of the full scene.
    pub clean_depth: Grid<f64>,
    /// The labeler output used as ground truth.
    pub gt_labels: QualityMap,
}

/// Parameters shared by the renderer and the ground-truth labeler.
#[derive(Debug, Clone)]
pub struct RenderConfig {
    pub intrinsics: CameraIntrinsics,
    pub dims: (usize, usize),
    pub geometry: GeometryConfig,
    pub label: LabelConfig,
}

impl RenderConfig {
    pub fn overhead(dims: (usize, usize), floor_depth_m: f64, pixels_per_mm: f64) -> Self {
        Self {
            intrinsics: overhead_camera(dims, floor_depth_m, pixels_per_mm),
            dims,
            geometry: GeometryConfig::default(),
            label: LabelConfig {
                pixels_per_mm,
                ..LabelConfig::default()
            },
        }
    }
}

fn cast_scene(
    solids: &[(u32, Box<dyn Solid + Sync>)],
    floor_depth: f64,
    intrinsics: &CameraIntrinsics,
    dims: (usize, usize),
) -> (Grid<f64>, Grid<u32>) {
    let (w, h) = dims;
    let mut depth = Grid::filled(w, h, 0.0f64);
    let mut ids = Grid::filled(w, h, 0u32);
    for v in 0..h {
        for u in 0..w {
            let ray = Ray {
                dx: (u as f64 - intrinsics.cx) / intrinsics.fx,
                dy: (v as f64 - intrinsics.cy) / intrinsics.fy,
            };
            let mut best_t = floor_depth;
            let mut best_id = 0u32;
            for (id, solid) in solids {
                if let Some(t) = solid.hit(&ray) {
                    if t < best_t {
                        best_t = t;
                        best_id = *id;
                    }
                }
            }
            *depth.at_mut(u, v) = best_t;
            *ids.at_mut(u, v) = best_id;
        }
    }
    (depth, ids)
}

/// Renders a scene: z-buffer ray cast, per-pixel instance ids, ground-truth
/// quality from the labeler on the noise-free render, then seeded Gaussian
/// depth noise and dropout holes on the emitted scene only.
pub fn render(
    scene: &PrimitiveScene,
    cfg: &RenderConfig,
    scene_id: &str,
    difficulty: Difficulty,
) -> Result<RenderedScene> {
    scene.validate()?;
    let (w, h) = cfg.dims;
    // The bin (with walls) must project inside the frame.
    let hw = scene.bin.width_m / 2.0 + scene.bin.wall_thickness_m;
    let hd = scene.bin.depth_m / 2.0 + scene.bin.wall_thickness_m;
    for (x, y) in [(-hw, -hd), (hw, -hd), (-hw, hd), (hw, hd)] {
        let top = scene.bin.floor_depth_m - scene.bin.wall_height_m;
        let (pu, pv) = cfg
            .intrinsics
            .project(&nalgebra::Vector3::new(x, y, top))
            .ok_or_else(|| Error::Config("bin behind the camera".into()))?;
        if pu < 0.0 || pv < 0.0 || pu >= w as f64 || pv >= h as f64 {
            return Err(Error::Config(format!(
                "bin corner projects outside the {w}x{h} frame at ({pu:.0}, {pv:.0})"
            )));
        }
    }

    let mut solids: Vec<(u32, Box<dyn Solid + Sync>)> = Vec::new();
    for (i, p) in scene.primitives.iter().enumerate() {
        solids.push((i as u32 + 1, primitive_solid(p, scene.bin.floor_depth_m)));
    }
    for wall in bin_solids(&scene.bin) {
        solids.push((0, wall));
    }
    let (clean_depth, instance_ids) =
        cast_scene(&solids, scene.bin.floor_depth_m, &cfg.intrinsics, cfg.dims);

    let wall_only: Vec<(u32, Box<dyn Solid + Sync>)> = bin_solids(&scene.bin)
        .into_iter()
        .map(|s| (0u32, s))
        .collect();
    let (background_depth, _) = cast_scene(
        &wall_only,
        scene.bin.floor_depth_m,
        &cfg.intrinsics,
        cfg.dims,
    );

    // Deterministic per-instance albedo and depth-shaded intensity.
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    let albedos: Vec<f64> = (0..=scene.primitives.len())
        .map(|_| 0.35 + 0.5 * rng.gen::<f64>())
        .collect();
    let (z_min, z_max) = clean_depth.min_max().unwrap_or((0.0, 1.0));
    let z_range = (z_max - z_min).max(1e-9);
    let intensity = Grid::from_fn(w, h, |u, v| {
        let shade = 1.0 - 0.25 * (*clean_depth.at(u, v) - z_min) / z_range;
        (albedos[*instance_ids.at(u, v) as usize] * shade).clamp(0.0, 1.0)
    });

    // Ground truth from the noise-free render, masked by instances.
    let clean_scene = SceneGrid::new(intensity.clone(), clean_depth.clone(), cfg.intrinsics)?;
    let geo = compute_geometry(&clean_scene, &cfg.geometry)?;
    let object_mask = instance_ids.map(|&id| id != 0);
    let (gt_labels, _clusters) = generate_labels(&geo, &object_mask, &cfg.label)?;
    let ground_truth = SceneGroundTruth::new(
        scene_id,
        gt_labels.values.clone(),
        instance_ids,
        difficulty,
    )?;

    // Noise and holes on the emitted scene only.
    let normal = Normal::new(0.0, scene.noise_sigma_m.max(1e-12)).unwrap();
    let mut noisy_depth = clean_depth.clone();
    for d in noisy_depth.data_mut() {
        let n: f64 = normal.sample(&mut rng);
        if scene.noise_sigma_m > 0.0 {
            *d += n;
        }
        if scene.hole_rate > 0.0 && rng.gen::<f64>() < scene.hole_rate {
            *d = f64::NAN;
        }
    }
    let scene_grid = SceneGrid::new(intensity, noisy_depth, cfg.intrinsics)?;

    Ok(RenderedScene {
        scene: scene_grid,
        ground_truth,
        background_depth,
        clean_depth,
        gt_labels,
    })
}

// -- Canonical scenes ----------------------------------------------------------

use crate::footprint::CANONICAL_CUP_DIAMETER_MM;

/// The canonical edge-wrapping regression scene: one 90-degree roof wedge
/// sized so a two-cup footprint spans the ridge while each flat face fits a
/// single cup. Face width is 1.2x the single-cup diameter; the wedge base
/// span exceeds the two-cup spacing so both cups land on opposite faces.
pub fn edge_wrapping_scene() -> PrimitiveScene {
    let face_width_m = 1.2 * CANONICAL_CUP_DIAMETER_MM / 1000.0;
    let width_m = 2.0 * face_width_m;
    PrimitiveScene {
        bin: BinGeometry::default(),
        primitives: vec![Primitive {
            shape: Shape::Wedge {
                width_m,
                length_m: 0.024,
                // 90-degree roof: faces at 45 degrees.
                height_m: width_m / 2.0,
            },
            cx_m: 0.0,
            cy_m: 0.0,
            yaw_deg: 0.0,
        }],
        noise_sigma_m: 0.00015,
        hole_rate: 0.001,
        seed: 7,
    }
}

/// Render setup tuned for the edge-wrapping scene: a narrow deviation
/// window keeps the ridge band tight relative to the wedge faces, and a
/// small background delta keeps the shallow face edges in the object mask.
pub fn edge_wrapping_render_config() -> RenderConfig {
    let bin = edge_wrapping_scene().bin;
    let mut cfg = RenderConfig::overhead(fitting_dims(&bin, 2.0), bin.floor_depth_m, 2.0);
    cfg.geometry.std_window = 9;
    cfg.label.bg_depth_delta = 0.003;
    cfg.label.min_cluster_size = 400;
    cfg
}

/// Parameters for randomized disjoint-object scenes.
#[derive(Debug, Clone)]
pub struct RandomSceneParams {
    pub bin: BinGeometry,
    pub n_objects: usize,
    /// Horizontal object size range, meters.
    pub size_range_m: (f64, f64),
    pub height_range_m: (f64, f64),
    pub noise_sigma_m: f64,
    pub hole_rate: f64,
    /// Minimum free space between object footprints, meters.
    pub clearance_m: f64,
}

impl Default for RandomSceneParams {
    fn default() -> Self {
        Self {
            bin: BinGeometry::default(),
            n_objects: 3,
            size_range_m: (0.035, 0.060),
            height_range_m: (0.02, 0.05),
            noise_sigma_m: 0.00015,
            hole_rate: 0.001,
            clearance_m: 0.012,
        }
    }
}

/// Places `n_objects` disjoint flat-topped primitives (boxes and cylinders)
/// by rejection sampling. Identical seeds give identical scenes.
pub fn random_scene(seed: u64, params: &RandomSceneParams) -> Result<PrimitiveScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ce0_617e);
    let mut primitives: Vec<Primitive> = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    let half_w = params.bin.width_m / 2.0;
    let half_d = params.bin.depth_m / 2.0;
    let mut attempts = 0;
    while primitives.len() < params.n_objects {
        attempts += 1;
        if attempts > 4000 {
            return Err(Error::Config(format!(
                "could not place {} disjoint objects in the bin",
                params.n_objects
            )));
        }
        let size = params.size_range_m.0
            + rng.gen::<f64>() * (params.size_range_m.1 - params.size_range_m.0);
        let height = params.height_range_m.0
            + rng.gen::<f64>() * (params.height_range_m.1 - params.height_range_m.0);
        let shape = if rng.gen::<f64>() < 0.5 {
            Shape::Box {
                width_m: size,
                depth_m: size * (0.7 + 0.3 * rng.gen::<f64>()),
                height_m: height,
            }
        } else {
            Shape::Cylinder {
                radius_m: size / 2.0,
                height_m: height,
            }
        };
        let r = shape.footprint_radius();
        if r + 0.004 > half_w.min(half_d) {
            continue;
        }
        let cx = (rng.gen::<f64>() * 2.0 - 1.0) * (half_w - r - 0.004);
        let cy = (rng.gen::<f64>() * 2.0 - 1.0) * (half_d - r - 0.004);
        let clear = primitives.iter().zip(&radii).all(|(p, pr)| {
            let d = (p.cx_m - cx).hypot(p.cy_m - cy);
            d >= pr + r + params.clearance_m
        });
        if !clear {
            continue;
        }
        primitives.push(Primitive {
            shape,
            cx_m: cx,
            cy_m: cy,
            yaw_deg: rng.gen::<f64>() * 180.0,
        });
        radii.push(r);
    }
    Ok(PrimitiveScene {
        bin: params.bin,
        primitives,
        noise_sigma_m: params.noise_sigma_m,
        hole_rate: params.hole_rate,
        seed,
    })
}
