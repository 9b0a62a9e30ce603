//! The experiment commands behind the CLI verbs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dynamics::{integrate, synthetic_problem, TrajectoryAbort, TrajectorySnapshot};
use crate::error::{Error, Result};
use crate::grad_analysis::{magnitude_surface, per_sample_grad_magnitude, ScalarSensitivities};
use crate::policy::{PolicyParams, PreferenceExample};
use crate::report::check::{render_table, run_checks, CheckSubject};
use crate::report::config::ExperimentConfig;
use crate::report::dataset::{parse_dataset, serialize_dataset, validate_dataset};
use crate::rewards::{ResponseStats, RewardConfig};

/// Whether a command's numeric checks held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    NumericFailure,
}

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_NUMERIC: u8 = 2;

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Passed => EXIT_OK,
            Status::NumericFailure => EXIT_NUMERIC,
        }
    }
}

/// Exit code for a command that failed with `err`.
pub fn error_exit_code(err: &Error) -> u8 {
    match err {
        Error::NonFinite(_) | Error::Saturation(_) | Error::Integrator { .. } => EXIT_NUMERIC,
        _ => EXIT_INVALID,
    }
}

/// Open `dir/name` for CSV output, writing the metadata comment line first.
pub fn csv_writer(cfg: &ExperimentConfig, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    let path = cfg.output_dir.join(name);
    let file = File::create(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# config_hash={} seed={}", cfg.hash()?, cfg.seed)?;
    Ok(csv::Writer::from_writer(out))
}

fn prepare_output(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::Io(format!("{}: {e}", cfg.output_dir.display())))
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// The two worked toy pairs: unit lengths and sensitivities, `beta = 1`,
/// `gamma = 0`.
pub struct Illustration {
    pub id: u8,
    pub log_pi_w: f64,
    pub log_pi_l: f64,
    pub t1: [&'static str; 5],
    pub t2: [&'static str; 5],
    pub magnitude: [&'static str; 5],
}

pub const ILLUSTRATION_ALPHAS: [f64; 5] = [-2.0, 0.0, 0.25, 1.0, 2.0];

pub const ILLUSTRATIONS: [Illustration; 2] = [
    Illustration {
        id: 1,
        log_pi_w: -1.0,
        log_pi_l: -2.0,
        t1: ["0.49", "0.27", "0.19", "0.01", "5.60e-11"],
        t2: ["0.23", "4.67", "8.69", "47.21", "383.34"],
        magnitude: ["0.11", "1.26", "1.63", "0.44", "2.15e-8"],
    },
    Illustration {
        id: 2,
        log_pi_w: -2.0,
        log_pi_l: -1.0,
        t1: ["0.51", "0.73", "0.81", "0.99", "1.00"],
        t2: ["0.23", "4.67", "8.69", "47.21", "383.34"],
        magnitude: ["0.12", "3.41", "7.05", "46.77", "383.34"],
    },
];

/// Does `value` reproduce a quoted figure? Fixed-point quotes must round to
/// the quoted digits (half a unit in the last place); exponent-notation
/// quotes are compared at 5% relative error.
pub fn matches_quoted(value: f64, quoted: &str) -> bool {
    let target: f64 = match quoted.parse() {
        Ok(t) => t,
        Err(_) => return false,
    };
    if quoted.contains(['e', 'E']) {
        return ((value - target) / target).abs() <= 5e-2;
    }
    let decimals = quoted.split_once('.').map_or(0, |(_, frac)| frac.len()) as i32;
    (value - target).abs() <= 0.5 * 10f64.powi(-decimals) * (1.0 + 1e-9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IllustrationRow {
    pub illustration: u8,
    pub alpha: f64,
    pub t1: f64,
    pub t2: f64,
    pub magnitude: f64,
    pub quoted: [&'static str; 3],
    pub matches: bool,
}

pub fn illustration_rows() -> Result<Vec<IllustrationRow>> {
    let mut rows = Vec::new();
    for ill in &ILLUSTRATIONS {
        let w = ResponseStats::new(ill.log_pi_w, 1)?;
        let l = ResponseStats::new(ill.log_pi_l, 1)?;
        for (i, &alpha) in ILLUSTRATION_ALPHAS.iter().enumerate() {
            let cfg = RewardConfig::new(alpha, 1.0, 0.0)?;
            let d = per_sample_grad_magnitude(&cfg, &w, &l, &ScalarSensitivities::unit())?;
            let quoted = [ill.t1[i], ill.t2[i], ill.magnitude[i]];
            let matches = [d.t1, d.t2, d.magnitude]
                .iter()
                .zip(quoted)
                .all(|(&v, q)| matches_quoted(v, q));
            rows.push(IllustrationRow {
                illustration: ill.id,
                alpha,
                t1: d.t1,
                t2: d.t2,
                magnitude: d.magnitude,
                quoted,
                matches,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_illustrations(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    prepare_output(cfg)?;
    let rows = illustration_rows()?;
    let mut w = csv_writer(cfg, "illustrations.csv")?;
    w.write_record([
        "illustration",
        "alpha",
        "t1",
        "t2",
        "magnitude",
        "quoted_t1",
        "quoted_t2",
        "quoted_magnitude",
        "matches",
    ])?;
    writeln!(out, "ill  alpha        t1            t2            |dl/dv|       quoted (t1, t2, |dl/dv|)")?;
    for r in &rows {
        w.write_record([
            r.illustration.to_string(),
            num(r.alpha),
            num(r.t1),
            num(r.t2),
            num(r.magnitude),
            r.quoted[0].to_string(),
            r.quoted[1].to_string(),
            r.quoted[2].to_string(),
            r.matches.to_string(),
        ])?;
        writeln!(
            out,
            "{:<4} {:<12} {:<13.6e} {:<13.6e} {:<13.6e} {}, {}, {}{}",
            r.illustration,
            r.alpha,
            r.t1,
            r.t2,
            r.magnitude,
            r.quoted[0],
            r.quoted[1],
            r.quoted[2],
            if r.matches { "" } else { "  MISMATCH" }
        )?;
    }
    w.flush()?;
    Ok(if rows.iter().all(|r| r.matches) {
        Status::Passed
    } else {
        Status::NumericFailure
    })
}

pub fn cmd_surface(cfg: &ExperimentConfig, out: &mut dyn Write) -> Result<Status> {
    prepare_output(cfg)?;
    let s = &cfg.surface;
    let points = magnitude_surface(s.beta, s.gamma, s.log_prob_w, s.log_prob_l, &s.alpha, &s.length)?;
    let mut w = csv_writer(cfg, "surface.csv")?;
    w.write_record(["alpha", "length", "log10_magnitude"])?;
    for p in &points {
        w.write_record([num(p.alpha), p.length.to_string(), num(p.log10_magnitude)])?;
    }
    w.flush()?;
    writeln!(out, "wrote {} surface points to {}", points.len(), cfg.output_dir.join("surface.csv").display())?;
    Ok(Status::Passed)
}

/// Initial policy and dataset: the synthetic problem, with its data
/// replaced by `dataset` when given.
pub fn load_problem(
    cfg: &ExperimentConfig,
    dataset: Option<&Path>,
) -> Result<(PolicyParams, Vec<PreferenceExample>)> {
    let (params, synthetic) = synthetic_problem(&cfg.synthetic_config())?;
    let data = match dataset {
        Some(path) => {
            let data = parse_dataset(path)?;
            if data.is_empty() {
                return Err(Error::InvalidInput(format!("dataset {} is empty", path.display())));
            }
            validate_dataset(&data, params.spec(), params.prompt_classes())?;
            data
        }
        None => synthetic,
    };
    Ok((params, data))
}

fn write_trajectory(cfg: &ExperimentConfig, name: &str, snapshots: &[TrajectorySnapshot]) -> Result<()> {
    let mut w = csv_writer(cfg, name)?;
    w.write_record(["time", "stat_name", "min", "q1", "median", "q3", "max", "mean_loss", "kl"])?;
    for s in snapshots {
        for (stat, sum) in s.summaries() {
            w.write_record([
                num(s.time),
                stat.to_string(),
                num(sum.min),
                num(sum.q1),
                num(sum.median),
                num(sum.q3),
                num(sum.max),
                num(s.mean_loss),
                num(s.kl_to_reference),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_per_example(cfg: &ExperimentConfig, name: &str, snapshots: &[TrajectorySnapshot]) -> Result<()> {
    let mut w = csv_writer(cfg, name)?;
    w.write_record(["time", "example", "norm_loglik_w", "norm_loglik_l", "norm_margin"])?;
    for s in snapshots {
        for (i, e) in s.examples.iter().enumerate() {
            w.write_record([
                num(s.time),
                i.to_string(),
                num(e.norm_loglik_w),
                num(e.norm_loglik_l),
                num(e.norm_margin),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_text(cfg: &ExperimentConfig, name: &str, text: &str) -> Result<()> {
    let path: PathBuf = cfg.output_dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn trajectory_file_name(alpha: f64) -> String {
    format!("trajectory_alpha_{alpha}.csv")
}

pub fn cmd_dynamics(
    cfg: &ExperimentConfig,
    dataset: Option<&Path>,
    per_example: bool,
    out: &mut dyn Write,
) -> Result<Status> {
    prepare_output(cfg)?;
    let (initial, data) = load_problem(cfg, dataset)?;
    write_text(cfg, "dataset.jsonl", &serialize_dataset(&data))?;
    write_text(cfg, "initial_policy.txt", &initial.to_text())?;
    let (snapshots, last) = match integrate(&initial, &data, &cfg.flow_config()) {
        Ok(done) => done,
        Err(TrajectoryAbort { snapshots, source }) => {
            write_trajectory(cfg, "trajectory.csv", &snapshots)?;
            return Err(source);
        }
    };
    write_trajectory(cfg, "trajectory.csv", &snapshots)?;
    if per_example {
        write_per_example(cfg, "per_example.csv", &snapshots)?;
    }
    write_text(cfg, "final_policy.txt", &last.to_text())?;
    let end = snapshots.last().expect("trajectory has a first snapshot");
    writeln!(
        out,
        "t = {}: margin median {:.4}, IQR {:.4}, mean loss {:.4}, KL {:.4}",
        end.time,
        end.margin.median,
        end.margin.iqr(),
        end.mean_loss,
        end.kl_to_reference
    )?;
    Ok(Status::Passed)
}

pub fn cmd_sweep_alpha(cfg: &ExperimentConfig, dataset: Option<&Path>, out: &mut dyn Write) -> Result<Status> {
    prepare_output(cfg)?;
    let (initial, data) = load_problem(cfg, dataset)?;
    write_text(cfg, "dataset.jsonl", &serialize_dataset(&data))?;
    let base = cfg.flow_config();
    let runs: Vec<_> = cfg
        .sweep
        .alpha
        .par_iter()
        .map(|&alpha| {
            let mut flow = base;
            flow.reward = cfg.reward.with_alpha(alpha);
            integrate(&initial, &data, &flow).map(|(s, _)| s)
        })
        .collect();

    let mut summary = csv_writer(cfg, "sweep_summary.csv")?;
    summary.write_record([
        "alpha", "time", "margin_min", "margin_q1", "margin_median", "margin_q3", "margin_max",
        "margin_iqr", "mean_loss", "kl",
    ])?;
    let mut first_error = None;
    for (&alpha, run) in cfg.sweep.alpha.iter().zip(runs) {
        let snapshots = match run {
            Ok(s) => s,
            Err(TrajectoryAbort { snapshots, source }) => {
                write_trajectory(cfg, &trajectory_file_name(alpha), &snapshots)?;
                first_error.get_or_insert(source);
                continue;
            }
        };
        write_trajectory(cfg, &trajectory_file_name(alpha), &snapshots)?;
        let end = snapshots.last().expect("trajectory has a first snapshot");
        let m = &end.margin;
        summary.write_record([
            num(alpha),
            num(end.time),
            num(m.min),
            num(m.q1),
            num(m.median),
            num(m.q3),
            num(m.max),
            num(m.iqr()),
            num(end.mean_loss),
            num(end.kl_to_reference),
        ])?;
        writeln!(out, "alpha {alpha:>6}: terminal margin median {:.4}, IQR {:.4}", m.median, m.iqr())?;
    }
    summary.flush()?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(Status::Passed),
    }
}

pub fn cmd_check(subject: &CheckSubject, out: &mut dyn Write) -> Result<Status> {
    let results = run_checks(subject);
    out.write_all(render_table(&results).as_bytes())?;
    Ok(if results.iter().all(|r| r.passed) {
        Status::Passed
    } else {
        Status::NumericFailure
    })
}
