use std::collections::hash_map::DefaultHasher;
use std::fs::{self, File};
use std::hash::{Hash, Hasher};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sigcross_core::engine::{run, Policy, SimConfig, SimResult};
use sigcross_core::geometry::ManeuverKind;
use sigcross_core::output::{write_events, write_summary, write_trace};
use sigcross_core::scenario::{maneuver_sweep, Scenario};

#[derive(Parser)]
#[command(
    name = "sigcross",
    version,
    about = "Decentralized intersection coordination simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace, event log and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// Decision policy; overrides the scenario file.
        #[arg(long, value_enum)]
        policy: Option<PolicyArg>,
    },
    /// Run one scenario under both policies and tabulate exit times.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Run every right/straight/left assignment of the base scenario under both policies.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override the simulation step (s).
    #[arg(long)]
    dt: Option<f64>,
    /// Also write per-vehicle opinion and speed series for plotting.
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Proposed,
    Fcfs,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Proposed => Policy::Proposed,
            PolicyArg::Fcfs => Policy::Fcfs,
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every run finished without collision or timeout.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { common, policy } => {
            let (scenario, mut config) = load(&common)?;
            if let Some(p) = policy {
                config.policy = p.into();
            }
            cmd_run(&scenario.name, &config, &common)
        }
        Command::Compare { common } => {
            let (scenario, config) = load(&common)?;
            cmd_compare(&scenario.name, &config, &common)
        }
        Command::Sweep { common } => {
            let (_, config) = load(&common)?;
            cmd_sweep(&config, &common)
        }
    }
}

fn load(common: &Common) -> Result<(Scenario, SimConfig)> {
    let scenario = Scenario::load(&common.scenario)
        .with_context(|| format!("loading {}", common.scenario.display()))?;
    let mut config = scenario.config.clone();
    if let Some(dt) = common.dt {
        config.dt = dt;
        config.validate().context("--dt override")?;
    }
    fs::create_dir_all(&common.out)
        .with_context(|| format!("creating {}", common.out.display()))?;
    Ok((scenario, config))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_outputs(dir: &Path, result: &SimResult, plots: bool) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trace(create(&dir.join("trace.csv"))?, &result.trace)?;
    write_events(create(&dir.join("events.csv"))?, &result.events)?;
    write_summary(create(&dir.join("summary.csv"))?, result)?;
    if plots {
        write_series(&dir.join("opinion.csv"), result, |r| r.z)?;
        write_series(&dir.join("speed.csv"), result, |r| r.v)?;
    }
    Ok(())
}

/// Wide table with one column per vehicle, for plotting z(t) or v(t).
fn write_series(
    path: &Path,
    result: &SimResult,
    value: fn(&sigcross_core::TraceRow) -> f64,
) -> Result<()> {
    let n = result.exit_times.len();
    let mut out = create(path)?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|k| format!("cav{k}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for tick in result.trace.chunks(n.max(1)) {
        let Some(first) = tick.first() else { continue };
        let cells: Vec<String> = std::iter::once(format!("{:.2}", first.t))
            .chain(tick.iter().map(|r| format!("{:.4}", value(r))))
            .collect();
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

fn healthy(result: &SimResult) -> bool {
    !result.collision && !result.timeout
}

fn cmd_run(name: &str, config: &SimConfig, common: &Common) -> Result<bool> {
    let result = run(config)?;
    write_outputs(&common.out, &result, common.emit_plots)?;
    println!("scenario {name} policy {}", config.policy);
    println!("last_exit_time {}", fmt_time(result.last_exit_time));
    println!("go_order {:?}", result.go_order());
    println!("min_clearance {:.3}", result.min_clearance);
    println!("collision {}", result.collision);
    if result.timeout {
        println!(
            "timeout: not every vehicle exited within {} s",
            config.max_time
        );
    }
    Ok(healthy(&result))
}

/// Hash of everything in the config except the policy.
fn config_hash(config: &SimConfig) -> Result<u64> {
    let mut c = config.clone();
    c.policy = Policy::Proposed;
    let text = Scenario {
        name: String::new(),
        config: c,
    }
    .to_toml()?;
    let mut h = DefaultHasher::new();
    text.hash(&mut h);
    Ok(h.finish())
}

fn run_pair(config: &SimConfig) -> Result<(SimResult, SimResult)> {
    let mut proposed = config.clone();
    proposed.policy = Policy::Proposed;
    let mut fcfs = config.clone();
    fcfs.policy = Policy::Fcfs;
    if config_hash(&proposed)? != config_hash(&fcfs)? {
        bail!("compared configurations differ beyond the policy");
    }
    Ok((run(&proposed)?, run(&fcfs)?))
}

fn cmd_compare(name: &str, config: &SimConfig, common: &Common) -> Result<bool> {
    let (proposed, fcfs) = run_pair(config)?;
    write_outputs(&common.out.join("proposed"), &proposed, common.emit_plots)?;
    write_outputs(&common.out.join("fcfs"), &fcfs, common.emit_plots)?;

    let mut rows = vec!["vehicle,fcfs,proposed".to_string()];
    for (k, (f, p)) in fcfs.exit_times.iter().zip(&proposed.exit_times).enumerate() {
        rows.push(format!("cav{},{},{}", k + 1, fmt_time(*f), fmt_time(*p)));
    }
    rows.push(format!(
        "last,{},{}",
        fmt_time(fcfs.last_exit_time),
        fmt_time(proposed.last_exit_time)
    ));
    let ratio = match (proposed.last_exit_time, fcfs.last_exit_time) {
        (Some(p), Some(f)) => Some(p / f),
        _ => None,
    };
    rows.push(format!(
        "ratio,,{}",
        ratio.map_or("-".into(), |r| format!("{r:.4}"))
    ));
    let table = rows.join("\n") + "\n";
    fs::write(common.out.join("compare.csv"), &table)?;
    println!("scenario {name}");
    print!("{table}");
    println!(
        "go_order fcfs {:?} proposed {:?}",
        fcfs.go_order(),
        proposed.go_order()
    );
    Ok(healthy(&proposed) && healthy(&fcfs))
}

fn label(kinds: &[ManeuverKind]) -> String {
    kinds
        .iter()
        .map(|k| match k {
            ManeuverKind::Right => "R",
            ManeuverKind::Straight => "S",
            ManeuverKind::Left => "L",
        })
        .collect()
}

fn cmd_sweep(base: &SimConfig, common: &Common) -> Result<bool> {
    let cases = maneuver_sweep(base)?;
    let results: Vec<(String, SimResult, SimResult)> = cases
        .par_iter()
        .map(|(kinds, config)| {
            let (p, f) = run_pair(config)?;
            Ok((label(kinds), p, f))
        })
        .collect::<Result<_>>()?;

    let mut out = create(&common.out.join("sweep.csv"))?;
    writeln!(
        out,
        "maneuvers,fcfs_time,proposed_time,fcfs_collision,proposed_collision,fcfs_timeout,proposed_timeout,proposed_min_clearance"
    )?;
    let mut ok = true;
    for (name, p, f) in &results {
        writeln!(
            out,
            "{name},{},{},{},{},{},{},{:.3}",
            fmt_time(f.last_exit_time),
            fmt_time(p.last_exit_time),
            f.collision,
            p.collision,
            f.timeout,
            p.timeout,
            p.min_clearance
        )?;
        ok &= healthy(p) && healthy(f);
    }
    out.flush()?;
    let collisions = results
        .iter()
        .filter(|(_, p, f)| p.collision || f.collision)
        .count();
    let timeouts = results
        .iter()
        .filter(|(_, p, f)| p.timeout || f.timeout)
        .count();
    let faster = results
        .iter()
        .filter(|(_, p, f)| matches!((p.last_exit_time, f.last_exit_time), (Some(a), Some(b)) if a <= b))
        .count();
    println!(
        "{} combinations: {collisions} with collisions, {timeouts} with timeouts, proposed no slower than fcfs in {faster}",
        results.len()
    );
    Ok(ok)
}
