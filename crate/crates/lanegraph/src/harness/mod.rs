//! Scene files, ground-truth construction, synthetic scene generation,
//! the dataset-level evaluation driver, SVG rendering, and the CLI.

pub mod builder;
pub mod cli;
pub mod eval;
pub mod scene;
pub mod svg;
pub mod synth;

pub use builder::{build_ground_truth, BuildDiagnostic, RawBox, RawScene};
pub use eval::{evaluate, EvalConfig, MetricReport};
pub use scene::{SceneRecord, SceneSet, TrafficSide};
pub use synth::{synth_scene, SynthConfig};
