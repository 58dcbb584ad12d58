//! End-to-end orchestration: configuration, synthetic pairs, matching runs
//! and ablation sweeps.

mod ablate;
mod config;
mod run;
mod synth;
mod truth;

pub use ablate::{run_ablation, write_ablation_csv, AblationCell};
pub use config::{pc_keys, PipelineConfig, CONFIG_KEYS};
pub use run::{coarse_stage, evaluate_run, fine_stage, phase_congruency_pair, run_match, write_match_outputs, MatchRun, RunEvaluation, Timings};
pub use synth::{synthesize, synthetic_scene, Radiometric, SynthSpec, TruthFile};
pub use truth::resolve_truth;
