//! On-disk artifacts of segmentation and evaluation runs.
//!
//! A run directory holds `labels.lbl` (hard labels), `slot_NN.pgm` (one soft
//! mask per slot) and `manifest.json`. Evaluation adds `metrics_<mode>.json`.
//!
//! Manifest slot counts: `slots` is every final-layer slot including residual
//! and padding, `anchored_slots` excludes those, and `labeled_slots` counts
//! slots that win at least one pixel.

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CocaError, Result};
use crate::heatmap::{compactness_heatmap, to_gray};
use crate::hierarchy::{coca_net, NetOutput};
use crate::image::Image;
use crate::metrics::{ari, fg_filter, msc, LabelMap};
use crate::pnm::{read_labels, write_labels, write_pgm, write_pgm_unit, write_ppm, LabelFile};
use crate::scene::Scene;

pub const LABELS_FILE: &str = "labels.lbl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Background pixels excluded.
    Foreground,
    /// Every pixel scored.
    WithBackground,
}

impl EvalMode {
    pub fn name(self) -> &'static str {
        match self {
            EvalMode::Foreground => "fg",
            EvalMode::WithBackground => "bg",
        }
    }
}

impl std::str::FromStr for EvalMode {
    type Err = CocaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fg" => Ok(EvalMode::Foreground),
            "bg" => Ok(EvalMode::WithBackground),
            _ => Err(CocaError::config(format!("mode must be fg or bg, got {s:?}"))),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CocaError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CocaError::io(path, e))
}

fn to_u16(labels: &[usize]) -> Result<Vec<u16>> {
    labels
        .iter()
        .map(|&l| u16::try_from(l).map_err(|_| CocaError::Numeric(format!("label {l} does not fit in 16 bits"))))
        .collect()
}

/// Summary of a segmentation run.
#[derive(Debug, Clone)]
pub struct SegmentReport {
    pub out_dir: PathBuf,
    pub output: NetOutput,
}

/// Runs the hierarchy on `img` and writes all artifacts into `out_dir`.
pub fn segment_to_dir(img: &Image, cfg: &RunConfig, out_dir: &Path) -> Result<SegmentReport> {
    cfg.validate()?;
    let output = coca_net(img, &cfg.layers, &cfg.encoder, cfg.anchor)?;
    ensure_dir(out_dir)?;
    let (h, w) = (img.height, img.width);
    let labels = LabelFile { height: h, width: w, background: Vec::new(), labels: to_u16(&output.hard_labels)? };
    write_labels(&labels, &out_dir.join(LABELS_FILE))?;
    let mut slot_files = Vec::with_capacity(output.slots());
    for s in 0..output.slots() {
        let name = format!("slot_{s:02}.pgm");
        write_pgm_unit(h, w, output.slot_mask(s), &out_dir.join(&name))?;
        slot_files.push(name);
    }
    let final_k = output.dendrogram.levels.last().map_or(0, |l| l.k);
    let anchors: Vec<Option<usize>> = output.slot_anchors.clone();
    let labeled: std::collections::BTreeSet<usize> = output.hard_labels.iter().copied().collect();
    let manifest = json!({
        "height": h,
        "width": w,
        "layers": cfg.layers.len(),
        "slots": output.slots(),
        "clusters_per_window": final_k,
        "anchored_slots": output.anchored_slots(),
        "labeled_slots": labeled.len(),
        "anchors": anchors,
        "slot_files": slot_files,
        "labels_file": LABELS_FILE,
        "config": cfg.to_text(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CocaError::Numeric(e.to_string()))?;
    write_text(&out_dir.join(MANIFEST_FILE), &text)?;
    Ok(SegmentReport { out_dir: out_dir.to_path_buf(), output })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub ari: f64,
    pub msc: f64,
}

/// Scores predicted labels against ground truth. In foreground mode the
/// ground truth's background ids are excluded.
pub fn evaluate_labels(pred: &LabelFile, gt: &LabelFile, mode: EvalMode) -> Result<EvalReport> {
    if (pred.height, pred.width) != (gt.height, gt.width) {
        return Err(CocaError::shape(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.height, pred.width, gt.height, gt.width
        )));
    }
    let as_map = |f: &LabelFile| LabelMap::new(f.height, f.width, f.labels.iter().map(|&l| l as usize).collect());
    let pred_map = as_map(pred)?;
    let mut gt_map = as_map(gt)?;
    if mode == EvalMode::Foreground {
        let bg: Vec<usize> = gt.background.iter().map(|&b| b as usize).collect();
        gt_map = fg_filter(&gt_map, &bg);
    }
    Ok(EvalReport { mode, ari: ari(&pred_map, &gt_map)?, msc: msc(&pred_map, &gt_map)? })
}

/// Evaluates the labels of a run directory and writes the metrics next to
/// them.
pub fn evaluate_dir(run_dir: &Path, gt_path: &Path, mode: EvalMode) -> Result<EvalReport> {
    let pred = read_labels(&run_dir.join(LABELS_FILE))?;
    let gt = read_labels(gt_path)?;
    let report = evaluate_labels(&pred, &gt, mode)?;
    let text = serde_json::to_string_pretty(&json!({ "mode": mode.name(), "ari": report.ari, "msc": report.msc }))
        .map_err(|e| CocaError::Numeric(e.to_string()))?;
    write_text(&run_dir.join(format!("metrics_{}.json", mode.name())), &text)?;
    Ok(report)
}

/// Writes the per-pixel compactness map of a fresh run as an 8-bit PGM.
pub fn heatmap_to_file(img: &Image, cfg: &RunConfig, path: &Path) -> Result<Vec<f64>> {
    cfg.validate()?;
    let output = coca_net(img, &cfg.layers, &cfg.encoder, cfg.anchor)?;
    let heat = compactness_heatmap(&output, img.height, img.width)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_pgm(img.height, img.width, &to_gray(&heat), path)?;
    Ok(heat)
}

/// Writes `<stem>.ppm` and `<stem>.lbl` for a generated scene.
pub fn write_scene(scene: &Scene, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    ensure_dir(dir)?;
    let img_path = dir.join(format!("{stem}.ppm"));
    let gt_path = dir.join(format!("{stem}.lbl"));
    write_ppm(&scene.image, &img_path)?;
    let gt = LabelFile {
        height: scene.gt.height,
        width: scene.gt.width,
        background: to_u16(&scene.bg_ids)?,
        labels: to_u16(&scene.gt.labels)?,
    };
    write_labels(&gt, &gt_path)?;
    Ok((img_path, gt_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(labels: Vec<u16>, background: Vec<u16>) -> LabelFile {
        LabelFile { height: 1, width: labels.len(), background, labels }
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let gt = file(vec![0, 0, 1, 1, 2, 2], vec![2]);
        for mode in [EvalMode::Foreground, EvalMode::WithBackground] {
            let r = evaluate_labels(&gt, &gt, mode).unwrap();
            assert_eq!((r.ari, r.msc), (1.0, 1.0));
        }
    }

    #[test]
    fn half_split_covering() {
        let gt = file(vec![0, 0, 0, 0], vec![]);
        let pred = file(vec![3, 3, 4, 4], vec![]);
        let r = evaluate_labels(&pred, &gt, EvalMode::WithBackground).unwrap();
        assert!((r.msc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_background_foreground_is_empty() {
        let gt = file(vec![5, 5], vec![5]);
        let err = evaluate_labels(&gt, &gt, EvalMode::Foreground).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        let other = LabelFile { height: 2, width: 1, background: vec![], labels: vec![0, 0] };
        assert_eq!(evaluate_labels(&other, &gt, EvalMode::WithBackground).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn mode_names() {
        assert_eq!("fg".parse::<EvalMode>().unwrap(), EvalMode::Foreground);
        assert_eq!("bg".parse::<EvalMode>().unwrap(), EvalMode::WithBackground);
        assert!("xx".parse::<EvalMode>().is_err());
    }
}
