//! Command-line pipeline over the JSON scene formats.
//!
//! Exit codes: 0 success, 1 validation failure (bad content), 2 I/O
//! failure, 64 usage errors.

use crate::graph::{merge_junctions, Severity};
use crate::harness::builder::{build_with_degree, RawSceneSet};
use crate::harness::eval::{evaluate, Aggregation, EvalConfig};
use crate::harness::scene::{
    load_json, load_scene_set, save_json, save_scene_set, SceneIoError, SceneSet,
};
use crate::harness::svg::render_svg;
use crate::harness::synth::{synth_scene, SynthConfig};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(
    name = "lanegraph",
    about = "Construct, post-process, render, and score directed lane graphs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score a prediction set against a ground-truth set.
    Eval(EvalArgs),
    /// Fit Bezier scenes from raw metric polylines.
    Fit(FitArgs),
    /// Snap junction endpoints of every scene in a set.
    Merge(MergeArgs),
    /// Render a scene (optionally with a prediction overlay) to SVG.
    Render(RenderArgs),
    /// Generate synthetic ground-truth and prediction sets.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth scene set.
    #[arg(long)]
    gt: PathBuf,
    /// Predicted scene set.
    #[arg(long)]
    pred: PathBuf,
    /// Output report path.
    #[arg(long)]
    report: PathBuf,
    /// Interpolated points per centerline.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Include per-scene metric blocks in the report.
    #[arg(long)]
    per_scene: bool,
    /// Average per-scene ratios instead of summing counts.
    #[arg(long)]
    scene_mean: bool,
    /// Skip semantic-grid mean IOU (faster).
    #[arg(long)]
    no_miou: bool,
    /// Detection-probability threshold for activating predicted lines.
    #[arg(long, default_value_t = 0.5)]
    detection_threshold: f64,
    /// Association-probability threshold for activating predicted edges.
    #[arg(long, default_value_t = 0.5)]
    association_threshold: f64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Raw polyline document.
    #[arg(long = "in")]
    input: PathBuf,
    /// Bezier degree of the fitted centerlines.
    #[arg(long, default_value_t = 2)]
    degree: usize,
    /// Output scene set.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MergeArgs {
    /// Scene set to post-process.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output scene set.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Scene set holding the scene to draw.
    #[arg(long)]
    scene: PathBuf,
    /// Optional prediction set overlaid on the same scene id.
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Scene id to draw; defaults to the first scene in the set.
    #[arg(long)]
    id: Option<String>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Base seed; scene k uses seed + k.
    #[arg(long)]
    seed: u64,
    /// Number of scenes.
    #[arg(long, default_value_t = 10)]
    scenes: u64,
    /// Generator configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output ground-truth set.
    #[arg(long)]
    out_gt: PathBuf,
    /// Output prediction set.
    #[arg(long)]
    out_pred: PathBuf,
}

/// Run the CLI on the given arguments (the first is the program name) and
/// return the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    SceneIo(#[from] SceneIoError),
    #[error("ground-truth validation failed for scene {id}:\n{details}")]
    InvalidGraph { id: String, details: String },
    #[error(transparent)]
    Eval(#[from] crate::harness::eval::EvalError),
    #[error(transparent)]
    Build(#[from] crate::harness::builder::BuildError),
    #[error("no scene with id {0} in the input set")]
    NoSuchScene(String),
    #[error("input set is empty")]
    EmptySet,
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::SceneIo(SceneIoError::Io { .. }) => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Eval(args) => cmd_eval(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Merge(args) => cmd_merge(args),
        Command::Render(args) => cmd_render(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let gt = load_scene_set(&args.gt)?;
    let pred = load_scene_set(&args.pred)?;

    for scene in &gt.scenes {
        let errors: Vec<String> = crate::graph::validate(&scene.graph)
            .into_iter()
            .filter(|d| d.severity() == Severity::Error)
            .map(|d| format!("  - {d}"))
            .collect();
        if !errors.is_empty() {
            return Err(CliError::InvalidGraph {
                id: scene.id.clone(),
                details: errors.join("\n"),
            });
        }
    }

    let config = EvalConfig {
        samples: args.samples,
        detection_threshold: args.detection_threshold,
        association_threshold: args.association_threshold,
        with_miou: !args.no_miou,
        aggregation: if args.scene_mean {
            Aggregation::SceneMean
        } else {
            Aggregation::CountSum
        },
        per_scene: args.per_scene,
        ..EvalConfig::default()
    };
    let report = evaluate(&gt.scenes, &pred.scenes, &config)?;
    save_json(&args.report, &report)?;

    println!(
        "evaluated {} scenes ({} vacuous)",
        report.scene_count, report.vacuous_scenes
    );
    println!(
        "m_pre {:.4}  m_rec {:.4}  detection {:.4}  c_pre {:.4}  c_rec {:.4}  c_iou {:.4}",
        report.aggregate.m_pre,
        report.aggregate.m_rec,
        report.aggregate.detection_ratio,
        report.aggregate.conn_precision,
        report.aggregate.conn_recall,
        report.aggregate.conn_iou,
    );
    Ok(())
}

fn cmd_fit(args: FitArgs) -> Result<(), CliError> {
    let raw: RawSceneSet = load_json(&args.input)?;
    let mut scenes = Vec::with_capacity(raw.scenes.len());
    for raw_scene in &raw.scenes {
        let (scene, diagnostics) =
            build_with_degree(raw_scene, &raw.camera, &raw.roi, raw.n_classes, args.degree)?;
        for d in &diagnostics {
            eprintln!("{}: {d}", raw_scene.id);
        }
        scenes.push(scene);
    }
    save_scene_set(&args.out, &SceneSet::new(scenes))?;
    println!("fit {} scenes", raw.scenes.len());
    Ok(())
}

fn cmd_merge(args: MergeArgs) -> Result<(), CliError> {
    let mut set = load_scene_set(&args.input)?;
    for scene in &mut set.scenes {
        scene.graph = merge_junctions(&scene.graph);
    }
    save_scene_set(&args.out, &set)?;
    println!("merged {} scenes", set.scenes.len());
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    let set = load_scene_set(&args.scene)?;
    if set.scenes.is_empty() {
        return Err(CliError::EmptySet);
    }
    let scene = match &args.id {
        Some(id) => set
            .scenes
            .iter()
            .find(|s| &s.id == id)
            .ok_or_else(|| CliError::NoSuchScene(id.clone()))?,
        None => &set.scenes[0],
    };
    let pred_set = args.pred.as_ref().map(load_scene_set).transpose()?;
    let pred_scene = pred_set
        .as_ref()
        .and_then(|set| set.scenes.iter().find(|s| s.id == scene.id));
    render_svg(scene, pred_scene, &args.out)?;
    println!("rendered {} to {}", scene.id, args.out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let config: SynthConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => SynthConfig::default(),
    };
    let mut gt = Vec::with_capacity(args.scenes as usize);
    let mut pred = Vec::with_capacity(args.scenes as usize);
    for k in 0..args.scenes {
        let (g, p) = synth_scene(args.seed.wrapping_add(k), &config);
        gt.push(g);
        pred.push(p);
    }
    save_scene_set(&args.out_gt, &SceneSet::new(gt))?;
    save_scene_set(&args.out_pred, &SceneSet::new(pred))?;
    println!(
        "wrote {} scenes to {} and {}",
        args.scenes,
        args.out_gt.display(),
        args.out_pred.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        std::iter::once("lanegraph")
            .chain(list.iter().copied())
            .map(String::from)
            .collect()
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(args(&["eval", "--bogus"])), EXIT_USAGE);
        assert_eq!(run(args(&["no-such-command"])), EXIT_USAGE);
        assert_eq!(run(args(&["--help"])), EXIT_OK);
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let report = dir.path().join("report.json");
        let code = run(args(&[
            "eval",
            "--gt",
            "/nope/gt.json",
            "--pred",
            "/nope/pred.json",
            "--report",
            report.to_str().unwrap(),
        ]));
        assert_eq!(code, EXIT_IO);
    }

    #[test]
    fn synth_eval_render_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let gt = dir.path().join("gt.json");
        let pred = dir.path().join("pred.json");
        let report = dir.path().join("report.json");
        let svg = dir.path().join("scene.svg");

        let code = run(args(&[
            "synth",
            "--seed",
            "7",
            "--scenes",
            "3",
            "--out-gt",
            gt.to_str().unwrap(),
            "--out-pred",
            pred.to_str().unwrap(),
        ]));
        assert_eq!(code, EXIT_OK);
        assert!(gt.exists() && pred.exists());

        let code = run(args(&[
            "eval",
            "--gt",
            gt.to_str().unwrap(),
            "--pred",
            pred.to_str().unwrap(),
            "--report",
            report.to_str().unwrap(),
            "--no-miou",
        ]));
        assert_eq!(code, EXIT_OK);
        let parsed: crate::harness::eval::MetricReport =
            load_json(&report).expect("report parses back");
        assert_eq!(parsed.scene_count, 3);

        let code = run(args(&[
            "render",
            "--scene",
            gt.to_str().unwrap(),
            "--pred",
            pred.to_str().unwrap(),
            "--out",
            svg.to_str().unwrap(),
        ]));
        assert_eq!(code, EXIT_OK);
        let text = std::fs::read_to_string(&svg).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.ends_with("</svg>\n"));
    }

    #[test]
    fn synth_outputs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |tag: &str| {
            let gt = dir.path().join(format!("gt-{tag}.json"));
            let pred = dir.path().join(format!("pred-{tag}.json"));
            let code = run(args(&[
                "synth",
                "--seed",
                "11",
                "--scenes",
                "4",
                "--out-gt",
                gt.to_str().unwrap(),
                "--out-pred",
                pred.to_str().unwrap(),
            ]));
            assert_eq!(code, EXIT_OK);
            (
                std::fs::read(gt).unwrap(),
                std::fs::read(pred).unwrap(),
            )
        };
        let (gt_a, pred_a) = mk("a");
        let (gt_b, pred_b) = mk("b");
        assert_eq!(gt_a, gt_b);
        assert_eq!(pred_a, pred_b);
    }

    #[test]
    fn eval_identical_files_scores_ones() {
        let dir = tempfile::tempdir().unwrap();
        let gt = dir.path().join("gt.json");
        let pred = dir.path().join("pred.json");
        let report = dir.path().join("report.json");
        assert_eq!(
            run(args(&[
                "synth",
                "--seed",
                "3",
                "--scenes",
                "2",
                "--out-gt",
                gt.to_str().unwrap(),
                "--out-pred",
                pred.to_str().unwrap(),
            ])),
            EXIT_OK
        );
        // Evaluate ground truth against itself.
        assert_eq!(
            run(args(&[
                "eval",
                "--gt",
                gt.to_str().unwrap(),
                "--pred",
                gt.to_str().unwrap(),
                "--report",
                report.to_str().unwrap(),
                "--no-miou",
            ])),
            EXIT_OK
        );
        let parsed: crate::harness::eval::MetricReport = load_json(&report).unwrap();
        assert_eq!(parsed.aggregate.m_pre, 1.0);
        assert_eq!(parsed.aggregate.m_rec, 1.0);
        assert_eq!(parsed.aggregate.detection_ratio, 1.0);
        assert_eq!(parsed.aggregate.conn_iou, 1.0);
    }

    #[test]
    fn merge_preserves_incidence_through_cli() {
        let dir = tempfile::tempdir().unwrap();
        let gt = dir.path().join("gt.json");
        let pred = dir.path().join("pred.json");
        let merged = dir.path().join("merged.json");
        assert_eq!(
            run(args(&[
                "synth",
                "--seed",
                "5",
                "--scenes",
                "2",
                "--out-gt",
                gt.to_str().unwrap(),
                "--out-pred",
                pred.to_str().unwrap(),
            ])),
            EXIT_OK
        );
        assert_eq!(
            run(args(&[
                "merge",
                "--in",
                pred.to_str().unwrap(),
                "--out",
                merged.to_str().unwrap(),
            ])),
            EXIT_OK
        );
        let before = load_scene_set(&pred).unwrap();
        let after = load_scene_set(&merged).unwrap();
        for (b, a) in before.scenes.iter().zip(&after.scenes) {
            assert_eq!(b.graph.incidence().pairs(), a.graph.incidence().pairs());
        }
    }
}
