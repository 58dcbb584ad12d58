//! Command-line front end: `pc`, `match`, `synth`, `ablate` and `eval`.

use std::marker::PhantomData;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};

use pcwlad::coarse::Metric;
use pcwlad::eval::{read_matches_csv, score_matches, write_report_json, write_residuals_csv, RansacConfig, NCM_THRESHOLD};
use pcwlad::phase::{compute_pc, NoiseMode};
use pcwlad::pipeline::{
    evaluate_run, pc_keys, resolve_truth, run_ablation, run_match, synthesize, write_ablation_csv, write_match_outputs, PipelineConfig, Radiometric,
    SynthSpec, TruthFile, CONFIG_KEYS,
};
use pcwlad::raster::{load_gray, save_pcw, save_png16, AffinePair};
use pcwlad::Error;

const EXIT_IO: u8 = 1;
const EXIT_EMPTY: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "pcwlad", version, about = "Sub-pixel template matching of multimodal images")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a phase congruency map.
    Pc {
        #[arg(long)]
        input: PathBuf,
        /// Output PCW1 file; a PNG preview is written alongside.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: KeyFlags<PcKeys>,
    },
    /// Match a reference image against a target image.
    Match {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        /// Synthesis truth file; adds an evaluation block to the summary.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        opts: KeyFlags<AllKeys>,
    },
    /// Write a warped, radiometrically altered copy of an image with its truth file.
    Synth {
        #[arg(long)]
        input: PathBuf,
        /// Output directory for reference.pcw, target.pcw, target.png and truth.json.
        #[arg(long)]
        out: PathBuf,
        /// Translation `dx,dy` from reference to target.
        #[arg(long, conflicts_with = "affine", value_parser = parse_list::<2>)]
        shift: Option<[f64; 2]>,
        /// Reference-to-target affine map `a0,a1,a2,b0,b1,b2`.
        #[arg(long, value_parser = parse_list::<6>)]
        affine: Option<[f64; 6]>,
        /// `gamma,gain,offset,invert` with invert 0 or 1.
        #[arg(long, value_parser = parse_list::<4>)]
        radiometric: Option<[f64; 4]>,
        /// Standard deviation of additive Gaussian noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Sweep metric, window size and noise mode against a known transform.
    Ablate {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        tgt: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "ssd,lad,ncc,ssim")]
        metrics: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "21,41,61,81,101")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "off,rayleigh")]
        noise_modes: Vec<String>,
        #[command(flatten)]
        opts: KeyFlags<AllKeys>,
    },
    /// Score a match file against a truth source.
    Eval {
        /// CSV with x1, y1, x2, y2 columns.
        #[arg(long)]
        matches: PathBuf,
        /// `fundamental`, `affine`, a truth .json file or a CSV of true positions.
        #[arg(long)]
        truth: String,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        threshold: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'")))
        .collect::<Result<_, _>>()?;
    let n = v.len();
    v.try_into().map_err(|_| format!("expected {N} comma-separated values, got {n}"))
}

trait KeySet {
    fn keys() -> &'static [&'static str];
}

struct PcKeys;
struct AllKeys;

impl KeySet for PcKeys {
    fn keys() -> &'static [&'static str] {
        pc_keys()
    }
}

impl KeySet for AllKeys {
    fn keys() -> &'static [&'static str] {
        CONFIG_KEYS
    }
}

/// Configuration flags generated from the configuration keys, plus `--config`.
struct KeyFlags<K> {
    file: Option<PathBuf>,
    pairs: Vec<(&'static str, String)>,
    _keys: PhantomData<K>,
}

impl<K: KeySet> KeyFlags<K> {
    /// Defaults, overridden by the config file, overridden by flags.
    fn resolve(&self) -> pcwlad::Result<PipelineConfig> {
        let mut cfg = match &self.file {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        for (k, v) in &self.pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl<K: KeySet> FromArgMatches for KeyFlags<K> {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut s = KeyFlags { file: None, pairs: Vec::new(), _keys: PhantomData };
        s.update_from_arg_matches(m)?;
        Ok(s)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        if let Some(p) = m.get_one::<PathBuf>("config") {
            self.file = Some(p.clone());
        }
        for key in K::keys() {
            if let Some(v) = m.get_one::<String>(key) {
                self.pairs.push((key, v.clone()));
            }
        }
        Ok(())
    }
}

impl<K: KeySet> Args for KeyFlags<K> {
    fn augment_args(cmd: Command) -> Command {
        let mut cmd = cmd.arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .value_parser(clap::value_parser!(PathBuf))
                .help("key = value configuration file; flags take precedence"),
        );
        for key in K::keys() {
            cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").help_heading("Configuration"));
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format(_) => EXIT_IO,
        Error::Parameter(_) => EXIT_USAGE,
        _ => EXIT_EMPTY,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = std::env::var("PCWLAD_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcwlad: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Cmd) -> pcwlad::Result<()> {
    match cmd {
        Cmd::Pc { input, out, opts } => {
            let cfg = opts.resolve()?;
            let img = load_gray(&input)?;
            let pc = compute_pc(&img, &cfg.pc)?.pc;
            save_pcw(&pc, &out)?;
            save_png16(&pc, out.with_extension("png"))?;
            let (lo, hi) = pc.min_max();
            println!("{}: {}x{} pc range [{lo:.4}, {hi:.4}]", out.display(), pc.width(), pc.height());
        }
        Cmd::Match { reference, tgt, truth, opts } => {
            let cfg = opts.resolve()?;
            let a = load_gray(&reference)?;
            let b = load_gray(&tgt)?;
            let run = run_match(&a, &b, &cfg)?;
            let evaluation = match &truth {
                Some(p) => Some(evaluate_run(&run, &TruthFile::load(p)?.spec.transform)),
                None => None,
            };
            write_match_outputs(&cfg.out_dir, &run, &cfg, evaluation.as_ref())?;
            println!(
                "keypoints {} coarse {} converged {} inliers {} -> {}",
                run.keypoints.len(),
                run.coarse.len(),
                run.converged().count(),
                run.inliers().len(),
                cfg.out_dir.display()
            );
            if let Some(e) = evaluation {
                println!("CMR {:.4} RMSE {}", e.fine.cmr, e.fine.rmse.map_or("n/a".into(), |v| format!("{v:.4}")));
            }
            if run.inliers().is_empty() {
                return Err(Error::Estimation("no consistent matches".into()));
            }
        }
        Cmd::Synth { input, out, shift, affine, radiometric, noise, seed } => {
            let transform = match (shift, affine) {
                (Some(s), _) => AffinePair::translation(s[0], s[1]),
                (None, Some(c)) => AffinePair::from_coeffs(c),
                (None, None) => AffinePair::IDENTITY,
            };
            let radiometric = match radiometric {
                Some(r) => Radiometric { gamma: r[0], gain: r[1], offset: r[2], invert: r[3] != 0.0 },
                None => Radiometric::default(),
            };
            let spec = SynthSpec { transform, radiometric, noise_sigma: noise, seed };
            let src = load_gray(&input)?;
            let (target, truth) = synthesize(&src, &spec)?;
            std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            save_pcw(&src, out.join("reference.pcw"))?;
            save_pcw(&target, out.join("target.pcw"))?;
            save_png16(&target, out.join("target.png"))?;
            truth.save(&out.join("truth.json"))?;
            println!("wrote {}", out.display());
        }
        Cmd::Ablate { reference, tgt, truth, metrics, sizes, noise_modes, opts } => {
            let metrics: Vec<Metric> = metrics.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<Result<_, _>>()?;
            let modes: Vec<NoiseMode> = noise_modes.iter().filter(|s| !s.is_empty()).map(|s| s.parse()).collect::<Result<_, _>>()?;
            if metrics.is_empty() || sizes.is_empty() || modes.is_empty() {
                return Err(Error::Parameter("metric, size and noise-mode lists must be non-empty".into()));
            }
            let cfg = opts.resolve()?;
            let truth = TruthFile::load(&truth)?;
            let a = load_gray(&reference)?;
            let b = load_gray(&tgt)?;
            let cells = run_ablation(&a, &b, &truth.spec.transform, &metrics, &sizes, &modes, &cfg)?;
            std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_error(&cfg.out_dir, e))?;
            let path = cfg.out_dir.join("ablation.csv");
            write_ablation_csv(&path, &cells)?;
            println!("{} cells -> {}", cells.len(), path.display());
        }
        Cmd::Eval { matches, truth, out, threshold, seed } => {
            let pts = read_matches_csv(&matches)?;
            if pts.is_empty() {
                return Err(Error::Estimation(format!("{}: no matches", matches.display())));
            }
            let rc = RansacConfig { threshold, seed, ..Default::default() };
            let truth = resolve_truth(&truth, &pts, &rc)?;
            let report = score_matches(&pts, &truth, NCM_THRESHOLD)?;
            std::fs::create_dir_all(&out).map_err(|e| io_error(&out, e))?;
            write_report_json(&out.join("report.json"), &report, None)?;
            write_residuals_csv(&out.join("residuals.csv"), &pts, &report)?;
            println!(
                "NCM {} / {} CMR {:.4} RMSE {}",
                report.ncm,
                report.total,
                report.cmr,
                report.rmse.map_or("n/a".into(), |v| format!("{v:.4}"))
            );
        }
    }
    Ok(())
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source: e }
}
