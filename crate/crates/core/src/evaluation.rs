//! Scene metrics against pixel-wise ground truth.
//!
//! Five statistics per scene: mean ground-truth quality of feasible grasps,
//! the feasible percentage among predicted grasps, the percentage of objects
//! reached, the average number of grasps per reached object, and whether the
//! scene produced no feasible grasp at all.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pose::GraspList;

/// Scene difficulty category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Difficulty {
    Simple,
    Typical,
    Complex,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Difficulty::Simple => "simple",
            Difficulty::Typical => "typical",
            Difficulty::Complex => "complex",
        };
        f.write_str(s)
    }
}

impl FromStr for Difficulty {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simple" => Ok(Difficulty::Simple),
            "typical" => Ok(Difficulty::Typical),
            "complex" => Ok(Difficulty::Complex),
            other => Err(format!("unknown difficulty '{other}'")),
        }
    }
}

/// Pixel-wise ground truth for one scene.
#[derive(Debug, Clone)]
pub struct SceneGroundTruth {
    pub scene_id: String,
    /// Ground-truth grasp quality in [0, 1]; zero on background.
    pub gt_quality: Grid<f64>,
    /// Instance ids; 0 is background.
    pub instance_ids: Grid<u32>,
    pub difficulty: Difficulty,
}

impl SceneGroundTruth {
    pub fn new(
        scene_id: impl Into<String>,
        gt_quality: Grid<f64>,
        instance_ids: Grid<u32>,
        difficulty: Difficulty,
    ) -> Result<Self> {
        gt_quality.require_same_dims(&instance_ids)?;
        for (u, v, &q) in gt_quality.iter_pixels() {
            if *instance_ids.at(u, v) == 0 && q != 0.0 {
                return Err(Error::InvalidValue(format!(
                    "ground-truth quality {q} on background pixel ({u}, {v})"
                )));
            }
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidValue(format!(
                    "ground-truth quality {q} at ({u}, {v}) outside [0, 1]"
                )));
            }
        }
        Ok(Self {
            scene_id: scene_id.into(),
            gt_quality,
            instance_ids,
            difficulty,
        })
    }

    pub fn instance_count(&self) -> usize {
        let ids: BTreeSet<u32> = self
            .instance_ids
            .data()
            .iter()
            .copied()
            .filter(|&id| id != 0)
            .collect();
        ids.len()
    }
}

/// Metrics of a single scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneScore {
    pub scene_id: String,
    pub difficulty: Difficulty,
    pub predicted: usize,
    pub feasible: usize,
    /// Mean ground-truth quality over feasible grasps; absent without any.
    pub quality: Option<f64>,
    /// Percentage of feasible grasps among predicted grasps.
    pub success_pct: f64,
    /// Percentage of objects reached, capped at 20 objects; absent for
    /// empty scenes.
    pub objects_pct: Option<f64>,
    /// Average grasps per reached object; absent when nothing was reached.
    pub multi: Option<f64>,
    /// True when the scene yielded zero feasible grasps.
    pub none: bool,
}

/// Scores one scene: a grasp is feasible iff the ground-truth quality at its
/// pixel is positive; a grasp lands on an object iff the instance id at its
/// pixel is nonzero. Background hits count as infeasible, not as errors.
pub fn score_scene(grasps: &GraspList, gt: &SceneGroundTruth) -> Result<SceneScore> {
    let (w, h) = gt.gt_quality.dims();
    let mut feasible = 0usize;
    let mut quality_sum = 0.0f64;
    let mut on_object = 0usize;
    let mut objects_hit: BTreeSet<u32> = BTreeSet::new();
    for grasp in &grasps.grasps {
        let (u, v) = grasp.pixel;
        if u >= w || v >= h {
            return Err(Error::InvalidPixel {
                u,
                v,
                reason: format!("grasp pixel outside the {w}x{h} ground-truth grids"),
            });
        }
        let q = *gt.gt_quality.at(u, v);
        if q > 0.0 {
            feasible += 1;
            quality_sum += q;
        }
        let id = *gt.instance_ids.at(u, v);
        if id != 0 {
            on_object += 1;
            objects_hit.insert(id);
        }
    }
    let predicted = grasps.len();
    let instance_count = gt.instance_count();
    Ok(SceneScore {
        scene_id: gt.scene_id.clone(),
        difficulty: gt.difficulty,
        predicted,
        feasible,
        quality: (feasible > 0).then(|| quality_sum / feasible as f64),
        success_pct: if predicted > 0 {
            100.0 * feasible as f64 / predicted as f64
        } else {
            0.0
        },
        objects_pct: (instance_count > 0)
            .then(|| 100.0 * objects_hit.len() as f64 / instance_count.min(20) as f64),
        multi: (!objects_hit.is_empty()).then(|| on_object as f64 / objects_hit.len() as f64),
        none: feasible == 0,
    })
}

/// Aggregated metrics over a set of scenes.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Mean over scenes where the metric is defined.
    pub quality: Option<f64>,
    pub success_pct: f64,
    pub objects_pct: Option<f64>,
    pub multi: Option<f64>,
    /// Percentage of scenes without a single feasible grasp.
    pub none_pct: f64,
    pub rows: Vec<SceneScore>,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Averages per-scene metrics. Quality, Objects, and Multi average over the
/// scenes where they are defined; errors on an empty list.
pub fn aggregate(rows: &[SceneScore]) -> Result<MetricsReport> {
    if rows.is_empty() {
        return Err(Error::InvalidValue("no scenes to aggregate".into()));
    }
    let n = rows.len() as f64;
    Ok(MetricsReport {
        quality: mean_defined(rows.iter().map(|r| r.quality)),
        success_pct: rows.iter().map(|r| r.success_pct).sum::<f64>() / n,
        objects_pct: mean_defined(rows.iter().map(|r| r.objects_pct)),
        multi: mean_defined(rows.iter().map(|r| r.multi)),
        none_pct: 100.0 * rows.iter().filter(|r| r.none).count() as f64 / n,
        rows: rows.to_vec(),
    })
}

fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    match value {
        Some(v) => format!("{v:.precision$}"),
        None => "-".to_string(),
    }
}

/// Renders an aligned plain-text table: one block per difficulty present,
/// plus an overall block when several are mixed.
pub fn format_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<12} {:>8} {:>9} {:>9} {:>7} {:>7}\n",
        "", "Quality", "Success", "Objects", "Multi", "None"
    ));
    let mut difficulties: Vec<Difficulty> = report.rows.iter().map(|r| r.difficulty).collect();
    difficulties.sort();
    difficulties.dedup();
    let mut blocks: Vec<(String, Vec<&SceneScore>)> = Vec::new();
    if difficulties.len() > 1 {
        for d in &difficulties {
            blocks.push((
                d.to_string(),
                report.rows.iter().filter(|r| r.difficulty == *d).collect(),
            ));
        }
    }
    blocks.push(("overall".into(), report.rows.iter().collect()));
    for (name, rows) in blocks {
        let owned: Vec<SceneScore> = rows.into_iter().cloned().collect();
        let agg = aggregate(&owned).expect("non-empty block");
        out.push_str(&format!(
            "{:<12} {:>8} {:>8}% {:>8}% {:>7} {:>6}%\n",
            name,
            fmt_opt(agg.quality, 3),
            format!("{:.1}", agg.success_pct),
            fmt_opt(agg.objects_pct, 1),
            fmt_opt(agg.multi, 2),
            format!("{:.0}", agg.none_pct),
        ));
    }
    out
}

/// Machine-readable per-scene rows plus the aggregate, comma-delimited.
pub fn format_csv(report: &MetricsReport) -> String {
    let mut out =
        String::from("scene_id,difficulty,predicted,feasible,quality,success_pct,objects_pct,multi,none\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.scene_id,
            r.difficulty,
            r.predicted,
            r.feasible,
            fmt_opt(r.quality, 6),
            format!("{:.6}", r.success_pct),
            fmt_opt(r.objects_pct, 6),
            fmt_opt(r.multi, 6),
            r.none
        ));
    }
    out.push_str(&format!(
        "aggregate,,,,{},{},{},{},{}\n",
        fmt_opt(report.quality, 6),
        format!("{:.6}", report.success_pct),
        fmt_opt(report.objects_pct, 6),
        fmt_opt(report.multi, 6),
        report.none_pct
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::GraspCandidate;
    use nalgebra::Vector3;

    fn grasp_at(u: usize, v: usize) -> GraspCandidate {
        GraspCandidate {
            pixel: (u, v),
            position: Vector3::zeros(),
            approach: Vector3::new(0.0, 0.0, -1.0),
            yaw_deg: 0.0,
            footprint_idx: 0,
            footprint_name: "f".into(),
            gripper_type: 1,
            score: 1.0,
            cluster_id: 1,
        }
    }

    /// Three horizontal object stripes with the given gt values.
    fn three_object_gt() -> SceneGroundTruth {
        let instances = Grid::from_fn(30, 30, |_, v| match v {
            0..=4 => 1u32,
            10..=14 => 2,
            20..=24 => 3,
            _ => 0,
        });
        let gt = Grid::from_fn(30, 30, |_, v| match v {
            0..=4 => 0.8,
            10..=14 => 0.6,
            20..=24 => 0.9,
            _ => 0.0,
        });
        SceneGroundTruth::new("pencil", gt, instances, Difficulty::Simple).unwrap()
    }

    #[test]
    fn perfect_scene_scores_cleanly() {
        let instances = Grid::from_fn(50, 50, |u, v| (1 + (v / 10) * 5 + u / 10) as u32);
        let gt = Grid::filled(50, 50, 1.0);
        let scene = SceneGroundTruth::new("perfect", gt, instances, Difficulty::Simple).unwrap();
        // 20 grasps on 20 distinct objects (of 25).
        let grasps = GraspList {
            grasps: (0..20)
                .map(|i| grasp_at((i % 5) * 10 + 5, (i / 5) * 10 + 5))
                .collect(),
        };
        let score = score_scene(&grasps, &scene).unwrap();
        assert_eq!(score.quality, Some(1.0));
        assert_eq!(score.success_pct, 100.0);
        assert_eq!(score.multi, Some(1.0));
        assert_eq!(score.objects_pct, Some(100.0));
        assert!(!score.none);
    }

    #[test]
    fn zero_predictions_count_toward_none() {
        let scene = three_object_gt();
        let score = score_scene(&GraspList::default(), &scene).unwrap();
        assert_eq!(score.success_pct, 0.0);
        assert!(score.none);
        assert_eq!(score.quality, None);
        assert_eq!(score.multi, None);
    }

    #[test]
    fn pencil_and_paper_three_object_case() {
        // 5 grasps: two on object 1 (gt 0.8), one on object 2 (gt 0.6), two
        // on background. Feasible = 3 on 2 distinct objects.
        // Quality = (0.8 + 0.8 + 0.6) / 3; Success = 60%; Objects = 2/3;
        // Multi = 3 grasps on objects / 2 distinct = 1.5.
        let scene = three_object_gt();
        let grasps = GraspList {
            grasps: vec![
                grasp_at(5, 2),
                grasp_at(12, 3),
                grasp_at(8, 12),
                grasp_at(3, 7),
                grasp_at(25, 27),
            ],
        };
        let score = score_scene(&grasps, &scene).unwrap();
        assert_eq!(score.predicted, 5);
        assert_eq!(score.feasible, 3);
        let expected_quality = (0.8 + 0.8 + 0.6) / 3.0;
        assert!((score.quality.unwrap() - expected_quality).abs() < 1e-12);
        assert!((score.success_pct - 60.0).abs() < 1e-12);
        assert!((score.objects_pct.unwrap() - 100.0 * 2.0 / 3.0).abs() < 1e-9);
        assert!((score.multi.unwrap() - 1.5).abs() < 1e-12);
        assert!(!score.none);
    }

    #[test]
    fn metrics_invariant_under_grasp_permutation() {
        let scene = three_object_gt();
        let grasps = vec![
            grasp_at(5, 2),
            grasp_at(12, 12),
            grasp_at(20, 22),
            grasp_at(1, 8),
        ];
        let a = score_scene(
            &GraspList {
                grasps: grasps.clone(),
            },
            &scene,
        )
        .unwrap();
        let mut reversed = grasps;
        reversed.reverse();
        let b = score_scene(&GraspList { grasps: reversed }, &scene).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn object_count_caps_at_twenty() {
        // 25 objects, grasps on 20 of them: Objects = 100%.
        let instances = Grid::from_fn(50, 50, |u, v| (1 + (v / 10) * 5 + u / 10) as u32);
        let gt = Grid::filled(50, 50, 0.5);
        let scene = SceneGroundTruth::new("many", gt, instances, Difficulty::Typical).unwrap();
        let grasps = GraspList {
            grasps: (0..20)
                .map(|i| grasp_at((i % 5) * 10 + 5, (i / 5) * 10 + 5))
                .collect(),
        };
        let score = score_scene(&grasps, &scene).unwrap();
        assert_eq!(score.objects_pct, Some(100.0));
    }

    #[test]
    fn aggregate_single_scene_is_identity() {
        let scene = three_object_gt();
        let grasps = GraspList {
            grasps: vec![grasp_at(5, 2), grasp_at(8, 12)],
        };
        let row = score_scene(&grasps, &scene).unwrap();
        let report = aggregate(&[row.clone()]).unwrap();
        assert_eq!(report.quality, row.quality);
        assert_eq!(report.success_pct, row.success_pct);
        assert_eq!(report.multi, row.multi);
        assert_eq!(report.none_pct, 0.0);
    }

    #[test]
    fn none_rate_counts_empty_scenes() {
        let scene = three_object_gt();
        let with = score_scene(
            &GraspList {
                grasps: vec![grasp_at(5, 2)],
            },
            &scene,
        )
        .unwrap();
        let without = score_scene(&GraspList::default(), &scene).unwrap();
        let report = aggregate(&[with, without]).unwrap();
        assert_eq!(report.none_pct, 50.0);
    }

    #[test]
    fn ten_scene_mean_matches_independent_summation() {
        let scene = three_object_gt();
        let mut rows = Vec::new();
        for i in 0..10usize {
            let mut grasps = vec![grasp_at(5, 2)];
            if i % 2 == 0 {
                grasps.push(grasp_at(3, 12));
            }
            if i % 3 == 0 {
                grasps.push(grasp_at(7, 27)); // background
            }
            let row = score_scene(&GraspList { grasps }, &scene).unwrap();
            rows.push(row);
        }
        let report = aggregate(&rows).unwrap();
        // Independent summation, spreadsheet style.
        let mut qs = 0.0;
        let mut ss = 0.0;
        let mut ms = 0.0;
        for row in &rows {
            qs += row.quality.unwrap();
            ss += row.success_pct;
            ms += row.multi.unwrap();
        }
        assert!((report.quality.unwrap() - qs / 10.0).abs() < 1e-12);
        assert!((report.success_pct - ss / 10.0).abs() < 1e-12);
        assert!((report.multi.unwrap() - ms / 10.0).abs() < 1e-12);
        assert_eq!(report.none_pct, 0.0);
    }

    #[test]
    fn aggregate_rejects_empty_list() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn gt_validates_background_is_zero() {
        let instances = Grid::filled(4, 4, 0u32);
        let gt = Grid::filled(4, 4, 0.5);
        assert!(SceneGroundTruth::new("bad", gt, instances, Difficulty::Simple).is_err());
    }

    #[test]
    fn table_renders_without_panicking() {
        let scene = three_object_gt();
        let row = score_scene(
            &GraspList {
                grasps: vec![grasp_at(5, 2)],
            },
            &scene,
        )
        .unwrap();
        let report = aggregate(&[row]).unwrap();
        let table = format_table(&report);
        assert!(table.contains("Quality"));
        assert!(table.contains("overall"));
        let csv = format_csv(&report);
        assert!(csv.lines().count() >= 3);
    }
}
