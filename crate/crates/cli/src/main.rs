//! Command-line driver for the grasp detection pipeline.
//!
//! Subcommands: `detect` (scene -> ranked grasps), `label` (scene -> quality
//! labels), `evaluate` (grasp files + ground truth -> metrics report),
//! `generate` (scene configs -> rendered corpus).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use graspmap::config::{PipelineConfig, QualitySourceConfig};
use graspmap::evaluation::{self, Difficulty, SceneScore};
use graspmap::footprint::{build_kernel_stack, default_footprint_set, KernelStack};
use graspmap::geometry::SceneGrid;
use graspmap::grid::Grid;
use graspmap::io::{
    footprint_file, grasp_file, ground_truth, pfm, pgm, scene_file, read_depth, read_intensity,
    read_intrinsics, write_intrinsics,
};
use graspmap::pipeline::{detect, label_scene, DetectInput};
use graspmap::quality::{load_quality, save_quality};
use graspmap::scenegen::{
    edge_wrapping_render_config, edge_wrapping_scene, fitting_dims, random_scene, render,
    RandomSceneParams, RenderConfig,
};

#[derive(Parser)]
#[command(name = "graspmap", version, about = "Multi-suction grasp detection pipeline")]
struct Cli {
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Pipeline configuration file (key = value).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect ranked grasp poses in one scene or a corpus directory.
    Detect(DetectArgs),
    /// Generate grasp-quality labels for a scene.
    Label(LabelArgs),
    /// Score grasp files against pixel-wise ground truth.
    Evaluate(EvaluateArgs),
    /// Render synthetic scenes with ground truth.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Depth image (.pfm, or .pgm with a .pgm.meta depth-scale sidecar).
    #[arg(long, required_unless_present = "scenes_dir")]
    depth: Option<PathBuf>,
    /// Intensity image (8- or 16-bit PGM).
    #[arg(long)]
    intensity: Option<PathBuf>,
    /// Camera intrinsics (key = value: fx, fy, cx, cy).
    #[arg(long, required_unless_present = "scenes_dir")]
    intrinsics: Option<PathBuf>,
    /// Empty-bin depth image for background subtraction.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Process every `<id>.depth.pfm` scene under this directory.
    #[arg(long, conflicts_with = "depth")]
    scenes_dir: Option<PathBuf>,
    /// Footprint set file (defaults to the built-in canonical set).
    #[arg(long)]
    footprints: Option<PathBuf>,
    /// Externally produced quality map (PFM); implies the external source.
    #[arg(long)]
    quality_file: Option<PathBuf>,
    /// Use the analytic labeler as the quality source (the default).
    #[arg(long, conflicts_with = "quality_file")]
    quality_analytic: bool,
    /// Rotation discretization in degrees.
    #[arg(long)]
    rotation_step: Option<f64>,
    /// Rotation range in degrees.
    #[arg(long)]
    max_rotation: Option<f64>,
    /// Deviation-penalty regularizer.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Keep and store the full per-channel feasibility stack.
    #[arg(long)]
    emit_raw_stack: bool,
    /// Disable the normal-deviation penalty (raw accumulation mode).
    #[arg(long)]
    disable_std_penalty: bool,
    /// Scene id for outputs (default: depth file stem).
    #[arg(long)]
    scene_id: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    intensity: Option<PathBuf>,
    #[arg(long)]
    intrinsics: PathBuf,
    /// Empty-bin depth image for background subtraction.
    #[arg(long)]
    background: Option<PathBuf>,
    /// Instance-mask PGMs: one multi-valued map or several binary masks.
    #[arg(long, num_args = 1..)]
    instances: Option<Vec<PathBuf>>,
    /// Output label map (PFM).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Grasp files, or directories scanned for `*.grasps.txt`.
    #[arg(long, num_args = 1.., required = true)]
    grasps: Vec<PathBuf>,
    /// Directory holding `<id>.gt.txt` ground-truth sidecars.
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of random scenes.
    #[arg(long, default_value_t = 5)]
    count: usize,
    /// Base seed; scene k uses seed + k.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Objects per scene.
    #[arg(long, default_value_t = 4)]
    objects: usize,
    /// Difficulty recorded in the ground truth.
    #[arg(long, default_value = "simple")]
    difficulty: Difficulty,
    /// Render these scene description files instead of random scenes.
    #[arg(long, num_args = 1..)]
    scene_file: Option<Vec<PathBuf>>,
    /// Emit the canonical edge-wrapping regression scene.
    #[arg(long)]
    edge_wrapping: bool,
    /// Image scale on the bin floor.
    #[arg(long, default_value_t = 2.0)]
    pixels_per_mm: f64,
    #[arg(long, default_value = "corpus")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut config = PipelineConfig::default();
    if let Some(path) = &cli.config {
        if let Err(e) = config.apply_file(path) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Detect(args) => run_detect(args, config),
        Command::Label(args) => run_label(args, config),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Generate(args) => run_generate(args, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let input_error = e
                .downcast_ref::<graspmap::Error>()
                .is_some_and(graspmap::Error::is_input_error);
            ExitCode::from(if input_error { 2 } else { 1 })
        }
    }
}

fn load_stack(args_footprints: Option<&Path>, step: f64, range: f64) -> Result<KernelStack> {
    let footprints = match args_footprints {
        Some(path) => footprint_file::read_footprint_set(path)?,
        None => default_footprint_set(),
    };
    Ok(build_kernel_stack(&footprints, step, range)?)
}

/// Writes a file atomically: temp file in the same directory, then rename.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

fn run_detect(args: DetectArgs, mut config: PipelineConfig) -> Result<()> {
    if let Some(step) = args.rotation_step {
        config.rotation_step_deg = step;
    }
    if let Some(range) = args.max_rotation {
        config.max_rotation_deg = range;
    }
    if let Some(epsilon) = args.epsilon {
        config.epsilon = epsilon;
    }
    if args.emit_raw_stack {
        config.emit_raw_stack = true;
    }
    if args.disable_std_penalty {
        config.std_penalty = false;
    }
    if args.quality_file.is_some() {
        config.quality_source = QualitySourceConfig::External;
    } else if args.quality_analytic {
        config.quality_source = QualitySourceConfig::Analytic;
    }
    config.validate()?;
    let stack = load_stack(
        args.footprints.as_deref(),
        config.rotation_step_deg,
        config.max_rotation_deg,
    )?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    if let Some(dir) = &args.scenes_dir {
        let intrinsics = read_intrinsics(&dir.join("intrinsics.txt"))?;
        let mut stems: Vec<String> = Vec::new();
        for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".depth.pfm") {
                stems.push(stem.to_string());
            }
        }
        stems.sort();
        if stems.is_empty() {
            bail!("no <id>.depth.pfm scenes under {}", dir.display());
        }
        for stem in &stems {
            let scene = load_scene_from_corpus(dir, stem, &intrinsics)?;
            let background = pfm::read_pfm(&dir.join(format!("{stem}.background.pfm"))).ok();
            detect_one(scene, background, None, stem, &stack, &config, &args.out_dir)?;
        }
        return Ok(());
    }

    let depth_path = args.depth.as_ref().expect("clap enforces depth");
    let depth = read_depth(depth_path)?;
    let intensity = match &args.intensity {
        Some(path) => read_intensity(path)?,
        None => Grid::filled(depth.width(), depth.height(), 0.5),
    };
    let intrinsics = read_intrinsics(args.intrinsics.as_ref().expect("clap enforces intrinsics"))?;
    let scene = SceneGrid::new(intensity, depth, intrinsics)?;
    let background = match &args.background {
        Some(path) => Some(read_depth(path)?),
        None => None,
    };
    let external_quality = match &args.quality_file {
        Some(path) => Some(load_quality(
            path,
            (scene.width(), scene.height()),
            config.strict_quality,
        )?),
        None => None,
    };
    let scene_id = args.scene_id.clone().unwrap_or_else(|| {
        let stem = depth_path.file_stem().unwrap_or_default().to_string_lossy();
        stem.trim_end_matches(".depth").to_string()
    });
    detect_one(
        scene,
        background,
        external_quality,
        &scene_id,
        &stack,
        &config,
        &args.out_dir,
    )
}

fn load_scene_from_corpus(
    dir: &Path,
    stem: &str,
    intrinsics: &graspmap::CameraIntrinsics,
) -> Result<SceneGrid> {
    let depth = pfm::read_pfm(&dir.join(format!("{stem}.depth.pfm")))?;
    let intensity_path = dir.join(format!("{stem}.intensity.pgm"));
    let intensity = if intensity_path.exists() {
        read_intensity(&intensity_path)?
    } else {
        Grid::filled(depth.width(), depth.height(), 0.5)
    };
    Ok(SceneGrid::new(intensity, depth, *intrinsics)?)
}

fn detect_one(
    scene: SceneGrid,
    background_depth: Option<Grid<f64>>,
    external_quality: Option<graspmap::quality::QualityMap>,
    scene_id: &str,
    stack: &KernelStack,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<()> {
    let input = DetectInput {
        scene,
        background_depth,
        external_quality,
    };
    let output = detect(&input, stack, config)?;
    let grasp_path = out_dir.join(format!("{scene_id}.grasps.txt"));
    write_atomic(
        &grasp_path,
        &grasp_file::format_grasps(scene_id, &output.config_hash, &output.grasps),
    )?;
    let timing_path = out_dir.join(format!("{scene_id}.timings.txt"));
    write_atomic(
        &timing_path,
        &format!(
            "scene = {scene_id}\nconfig = {}\n{}\n",
            output.config_hash,
            output.timings.summary()
        ),
    )?;
    if let Some(raw) = &output.match_maps.raw_feasibility {
        let raw_dir = out_dir.join(format!("{scene_id}.raw_stack"));
        std::fs::create_dir_all(&raw_dir)?;
        for c in 0..raw.n_channels() {
            let info = stack.info(c);
            let name = format!(
                "ch{c:03}_{}_r{:03}.pfm",
                stack.footprint(info.footprint_idx).name,
                info.rotation_deg.round() as i64
            );
            let plane = Grid::from_vec(raw.width(), raw.height(), raw.channel(c).to_vec())?;
            pfm::write_pfm(&raw_dir.join(name), &plane)?;
        }
    }
    println!(
        "{scene_id}: {} grasps ({})",
        output.grasps.len(),
        output.timings.summary()
    );
    Ok(())
}

fn run_label(args: LabelArgs, config: PipelineConfig) -> Result<()> {
    let depth = read_depth(&args.depth)?;
    let intensity = match &args.intensity {
        Some(path) => read_intensity(path)?,
        None => Grid::filled(depth.width(), depth.height(), 0.5),
    };
    let intrinsics = read_intrinsics(&args.intrinsics)?;
    let scene = SceneGrid::new(intensity, depth, intrinsics)?;
    let background = match &args.background {
        Some(path) => Some(read_depth(path)?),
        None => None,
    };
    let mask = match &args.instances {
        Some(paths) => Some(read_instance_masks(paths)?),
        None => None,
    };
    let (labels, clusters) = label_scene(&scene, background.as_ref(), mask.as_ref(), &config)?;
    save_quality(&args.out, &labels)?;
    println!(
        "{}: {} clusters, labels written",
        args.out.display(),
        clusters.len()
    );
    Ok(())
}

/// One multi-valued instance map, or several binary masks; nonzero samples
/// mark object pixels.
fn read_instance_masks(paths: &[PathBuf]) -> Result<Grid<bool>> {
    let mut masks = Vec::new();
    for path in paths {
        let (raw, _) = pgm::read_pgm(path)?;
        masks.push(raw.map(|&s| s > 0));
    }
    Ok(graspmap::labeling::mask_from_instances(&masks)?)
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let mut grasp_paths: Vec<PathBuf> = Vec::new();
    for path in &args.grasps {
        if path.is_dir() {
            for entry in
                std::fs::read_dir(path).with_context(|| format!("reading {}", path.display()))?
            {
                let p = entry?.path();
                if p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(".grasps.txt"))
                {
                    grasp_paths.push(p);
                }
            }
        } else {
            grasp_paths.push(path.clone());
        }
    }
    grasp_paths.sort();
    if grasp_paths.is_empty() {
        bail!("no grasp files given");
    }

    let mut gt_by_id = std::collections::BTreeMap::new();
    for meta in ground_truth::list_ground_truth(&args.ground_truth)? {
        let gt = ground_truth::read_ground_truth(&meta)?;
        gt_by_id.insert(gt.scene_id.clone(), gt);
    }

    let mut rows: Vec<SceneScore> = Vec::new();
    for path in &grasp_paths {
        let parsed = grasp_file::read_grasps(path)?;
        let gt = gt_by_id.get(&parsed.scene_id).ok_or_else(|| {
            anyhow!(
                "no ground truth for scene id '{}' (from {})",
                parsed.scene_id,
                path.display()
            )
        })?;
        rows.push(evaluation::score_scene(&parsed.grasps, gt)?);
    }
    let report = evaluation::aggregate(&rows)?;
    let table = evaluation::format_table(&report);
    print!("{table}");
    std::fs::create_dir_all(&args.out_dir)?;
    write_atomic(&args.out_dir.join("report.txt"), &table)?;
    write_atomic(
        &args.out_dir.join("report.csv"),
        &evaluation::format_csv(&report),
    )?;
    Ok(())
}

fn run_generate(args: GenerateArgs, config: PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&args.out_dir)?;

    // Scene list: explicit files, the canonical regression scene, or
    // seeded random corpora.
    let mut scenes: Vec<(String, graspmap::scenegen::PrimitiveScene, RenderConfig)> = Vec::new();
    if let Some(files) = &args.scene_file {
        for path in files {
            let scene = scene_file::read_scene(path)?;
            let id = path
                .file_stem()
                .unwrap_or_default()
                .to_string_lossy()
                .into_owned();
            let dims = fitting_dims(&scene.bin, args.pixels_per_mm);
            let mut rc = RenderConfig::overhead(dims, scene.bin.floor_depth_m, args.pixels_per_mm);
            rc.geometry = config.geometry.clone();
            rc.label = config.label.clone();
            scenes.push((id, scene, rc));
        }
    }
    if args.edge_wrapping {
        let scene = edge_wrapping_scene();
        scenes.push(("edge_wrapping".into(), scene, edge_wrapping_render_config()));
    }
    if scenes.is_empty() {
        for k in 0..args.count {
            let seed = args.seed + k as u64;
            let scene = random_scene(
                seed,
                &RandomSceneParams {
                    n_objects: args.objects,
                    ..RandomSceneParams::default()
                },
            )?;
            let dims = fitting_dims(&scene.bin, args.pixels_per_mm);
            let mut rc = RenderConfig::overhead(dims, scene.bin.floor_depth_m, args.pixels_per_mm);
            rc.geometry = config.geometry.clone();
            rc.label = config.label.clone();
            scenes.push((format!("scene_{seed:04}"), scene, rc));
        }
    }

    let mut shared_intrinsics: Option<graspmap::CameraIntrinsics> = None;
    for (id, scene, rc) in &scenes {
        let rendered = render(scene, rc, id, args.difficulty)?;
        pfm::write_pfm(&args.out_dir.join(format!("{id}.depth.pfm")), &rendered.scene.depth)?;
        pgm::write_intensity(
            &args.out_dir.join(format!("{id}.intensity.pgm")),
            &rendered.scene.intensity,
        )?;
        pfm::write_pfm(
            &args.out_dir.join(format!("{id}.background.pfm")),
            &rendered.background_depth,
        )?;
        ground_truth::write_ground_truth(&args.out_dir, &rendered.ground_truth)?;
        scene_file::write_scene(&args.out_dir.join(format!("{id}.scene.txt")), scene)?;
        match shared_intrinsics {
            None => {
                write_intrinsics(&args.out_dir.join("intrinsics.txt"), &rc.intrinsics)?;
                shared_intrinsics = Some(rc.intrinsics);
            }
            Some(existing) if existing != rc.intrinsics => {
                write_intrinsics(
                    &args.out_dir.join(format!("{id}.intrinsics.txt")),
                    &rc.intrinsics,
                )?;
            }
            Some(_) => {}
        }
        println!("{id}: rendered {}x{}", rc.dims.0, rc.dims.1);
    }
    footprint_file::write_footprint_set(
        &args.out_dir.join("footprints.txt"),
        &default_footprint_set(),
    )?;
    Ok(())
}
