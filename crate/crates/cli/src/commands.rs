//! Subcommand implementations. Each returns the text to print on stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use jointgap::gap::{
    accumulated_error, render_gap_table, run_step_response, velocity_violations, SettleParams,
    SettleReference,
};
use jointgap::model::load_robot_model;
use jointgap::policy::{cem_train, episode_end_abs_sum, rollout, Env};
use jointgap::trajectory_csv::{parse_trajectory_csv, trajectory_to_csv, velocities_to_csv};
use jointgap::{GapReport, Policy, Trajectory};

use crate::args::{Command, GapArgs, RolloutArgs, StepArgs, TrainArgs, ViolationsArgs};
use crate::config::{resolve_seed, RunConfig};
use crate::error::{CliError, CliResult};

pub fn run(command: &Command) -> CliResult<String> {
    match command {
        Command::Step(a) => cmd_step(a),
        Command::Gap(a) => cmd_gap(a),
        Command::Violations(a) => cmd_violations(a),
        Command::Train(a) => cmd_train(a),
        Command::Rollout(a) => cmd_rollout(a),
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

fn read_trajectory(path: &Path) -> CliResult<Trajectory> {
    parse_trajectory_csv(&read_text(path)?).map_err(CliError::in_file(path))
}

pub fn cmd_step(args: &StepArgs) -> CliResult<String> {
    let config = RunConfig::load(&args.config)?;
    // the step response is deterministic; the seed is resolved only to validate it
    resolve_seed(args.seed, config.seed)?;
    let model = config.load_model()?;
    let variant = args.variant.unwrap_or(config.variant);
    let mut experiment = config.step_experiment(&model)?;
    if let Some(d) = args.duration {
        experiment.duration = d;
    }
    let traj = run_step_response(&model, variant, &experiment, config.gains_for(variant))?;
    let out = args.out.clone().unwrap_or_else(|| config.output_dir());
    let t = write_file(&out, "trajectory.csv", &trajectory_to_csv(&traj))?;
    write_file(&out, "velocities.csv", &velocities_to_csv(&traj))?;
    Ok(format!(
        "{variant}: {} samples written to {}\n",
        traj.len(),
        t.display()
    ))
}

fn settle_params(args: &GapArgs) -> CliResult<SettleParams> {
    let reference = if args.settle_target.trim() == "final" {
        SettleReference::FinalSample
    } else {
        let pose = args
            .settle_target
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| {
                CliError::Usage(format!(
                    "--settle-target must be `final` or comma-separated numbers, got `{}`",
                    args.settle_target
                ))
            })?;
        SettleReference::Target(pose)
    };
    Ok(SettleParams {
        reference,
        eps: args.eps,
        window: args.window,
    })
}

fn parse_compare(spec: &str) -> CliResult<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((label, path)) if !label.is_empty() && !path.is_empty() => {
            Ok((label.to_owned(), PathBuf::from(path)))
        }
        _ => Err(CliError::Usage(format!(
            "--compare expects LABEL=PATH, got `{spec}`"
        ))),
    }
}

pub fn cmd_gap(args: &GapArgs) -> CliResult<String> {
    let settle = settle_params(args)?;
    let reference = read_trajectory(&args.reference)?;
    let test = read_trajectory(&args.test)?;
    let report = accumulated_error(&reference, &test, &settle)?;

    let mut stored = Vec::new();
    for spec in &args.compare {
        let (label, path) = parse_compare(spec)?;
        let r = GapReport::from_json_str(&read_text(&path)?).map_err(CliError::in_file(&path))?;
        stored.push((label, r));
    }

    write_file(&args.out, "gap_report.json", &report.to_json_string())?;
    write_file(&args.out, "error_curves.csv", &report.error_curves_csv())?;

    let mut rows: Vec<(&str, &GapReport)> = vec![(args.label.as_str(), &report)];
    rows.extend(stored.iter().map(|(l, r)| (l.as_str(), r)));
    let mut out = render_gap_table(&rows);
    let _ = writeln!(
        out,
        "steady state at {} s ({})",
        report.steady_state_time,
        if report.settled {
            "settled"
        } else {
            "not settled; full horizon"
        }
    );
    Ok(out)
}

pub fn cmd_violations(args: &ViolationsArgs) -> CliResult<String> {
    let model = match (&args.model, &args.config) {
        (Some(path), _) => load_robot_model(path)?,
        (None, Some(config)) => RunConfig::load(config)?.load_model()?,
        (None, None) => {
            return Err(CliError::Usage(
                "one of --model or --config is required".into(),
            ))
        }
    };
    let traj = read_trajectory(&args.trajectory)?;
    let report = velocity_violations(&traj, &model)?;
    write_file(&args.out, "violations.json", &report.to_json_string())?;
    let mut out = String::new();
    for d in report.per_dof.iter().filter(|d| d.count > 0) {
        let _ = writeln!(
            out,
            "DOF {}: {} samples above qd_max {} (max |qd| {})",
            d.dof, d.count, d.qd_max, d.max_abs_qd
        );
    }
    let _ = writeln!(out, "violations: {}", report.total_count());
    Ok(out)
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<String> {
    let config = RunConfig::load(&args.config)?;
    let seed = resolve_seed(args.seed, config.seed)?;
    let model = config.load_model()?;
    let env = Env::new(model, config.env_config(config.variant), seed)?;
    let mut train = config.train_config(seed);
    if let Some(n) = args.iterations {
        train.iterations = n;
    }
    if let Some(n) = args.population {
        train.population = n;
    }
    if let Some(n) = args.threads {
        train.threads = n;
    }
    let (policy, history) = cem_train(&env, &train)?;
    let residual = episode_end_abs_sum(&policy, &env, seed)?;

    let out = args.out.clone().unwrap_or_else(|| config.output_dir());
    write_file(&out, "policy.json", &policy.to_json_string())?;
    write_file(&out, "history.csv", &history.to_csv())?;
    let mut text = String::new();
    match history.best() {
        Some(best) => {
            let _ = writeln!(text, "best return: {best}");
        }
        None => text.push_str("best return: n/a (no iterations)\n"),
    }
    let _ = writeln!(text, "final sum |q|: {residual}");
    Ok(text)
}

pub fn cmd_rollout(args: &RolloutArgs) -> CliResult<String> {
    let config = RunConfig::load(&args.config)?;
    let seed = resolve_seed(args.seed, config.seed)?;
    let model = config.load_model()?;
    let policy = Policy::from_json_str(&read_text(&args.policy)?)
        .map_err(CliError::in_file(&args.policy))?;
    let variant = args.variant.unwrap_or(config.variant);
    let env = Env::new(model, config.env_config(variant), seed)?;
    let (traj, ret) = rollout(&policy, &env, seed)?;
    let residual: f64 = traj
        .last()
        .expect("rollout is non-empty")
        .q
        .iter()
        .map(|q| q.abs())
        .sum();

    let out = args.out.clone().unwrap_or_else(|| config.output_dir());
    write_file(&out, "trajectory.csv", &trajectory_to_csv(&traj))?;
    Ok(format!(
        "{variant}: return {ret}\nfinal sum |q|: {residual}\n"
    ))
}
