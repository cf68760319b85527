use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use ptconsensus::engine::{self, EvalMode};
use ptconsensus::plot::{self, SeriesKind};
use ptconsensus::scenario::{self, Scenario, DEFAULT_SEED};
use ptconsensus::tbg;
use ptconsensus::Error;

/// Prescribed-time leader-following consensus simulator.
#[derive(Parser)]
#[command(name = "ptconsensus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write its trajectories as CSV.
    Run {
        /// Scenario file path or bundled scenario name.
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Output directory for the CSV (defaults to the current directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parameter studies over initial-error norm, settling time or agent count.
    Sweep {
        /// Base scenario file path or bundled name (unused for --kind agents).
        scenario: Option<String>,
        /// What to sweep: x0 (initial-error norm), tf (settling time) or
        /// agents (ring size).
        #[arg(long)]
        kind: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',')]
        list: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the sweep table CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the time base generator polynomials and their derivatives.
    Tbg {
        /// System order (chain length).
        #[arg(long)]
        order: usize,
        /// Prescribed settling time.
        #[arg(long, value_name = "TF")]
        tf: f64,
        /// Number of samples over [0, 1.2 tf].
        #[arg(long, default_value_t = 121)]
        samples: usize,
        /// Output directory for the sample table CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a scenario's communication graph and print its certificate.
    GraphCheck {
        /// Scenario file path or bundled scenario name.
        scenario: String,
    },
    /// Render a CSV produced by `run` as an SVG.
    Plot {
        /// CSV file written by `run`.
        csv: PathBuf,
        /// Series family: states, errors, surfaces or inputs.
        #[arg(long, default_value = "states")]
        series: String,
        /// Output directory for the SVG.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the record stride (0 = automatic).
    #[arg(long)]
    stride: Option<usize>,
    /// Override the neighbor evaluation mode: buffered or topo.
    #[arg(long)]
    mode: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for rejected input, 2 for faults at runtime.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidArgument(_)
        | Error::DimensionMismatch(_)
        | Error::Expr(_)
        | Error::ScenarioInvalid(_)
        | Error::ScenarioParse(_)
        | Error::CyclicFollowerGraph
        | Error::UnknownSeries(_) => 1,
        Error::SingularBoundarySystem { .. }
        | Error::SingularGainSchedule
        | Error::SingularInputGain { .. }
        | Error::Divergence { .. }
        | Error::Io { .. } => 2,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            scenario,
            overrides,
            out,
        } => cmd_run(&scenario, overrides, out),
        Command::Sweep {
            scenario,
            kind,
            list,
            seed,
            out,
        } => cmd_sweep(scenario.as_deref(), &kind, &list, seed, out),
        Command::Tbg {
            order,
            tf,
            samples,
            out,
        } => cmd_tbg(order, tf, samples, out),
        Command::GraphCheck { scenario } => cmd_graph_check(&scenario),
        Command::Plot { csv, series, out } => cmd_plot(&csv, &series, out),
    }
}

/// Loads a scenario from a file path, falling back to the bundled set when
/// the argument names one of them.
fn load_scenario(arg: &str) -> Result<Scenario, Error> {
    if scenario::BUILTIN_SCENARIOS.iter().any(|(n, _)| *n == arg) && !Path::new(arg).exists() {
        return scenario::builtin(arg);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| {
        if scenario::BUILTIN_SCENARIOS.iter().any(|(n, _)| *n == arg) {
            Error::io(arg, e)
        } else {
            Error::InvalidArgument(format!(
                "'{arg}' is neither a readable file nor a bundled scenario \
                 (bundled: {})",
                scenario::BUILTIN_SCENARIOS
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            ))
        }
    })?;
    scenario::parse_and_validate(&text)
}

fn apply_overrides(s: &mut Scenario, o: &Overrides) -> Result<(), Error> {
    if let Some(seed) = o.seed {
        // Reparse with the new seed so drawn disturbance amplitudes follow it.
        s.seed = seed;
        let doc = scenario::serialize(s);
        // Drawn amplitudes were pinned by serialize; redraw them instead.
        let mut redrawn = scenario::parse_and_validate(&doc)?;
        redraw_alphas(&mut redrawn);
        *s = redrawn;
    }
    if let Some(dt) = o.dt {
        s.sim.dt = dt;
    }
    if let Some(stride) = o.stride {
        s.sim.stride = stride;
    }
    if let Some(mode) = &o.mode {
        s.sim.mode = EvalMode::parse(mode)?;
    }
    s.sim.validate(s.settling_time)?;
    Ok(())
}

/// Redraws the sinusoidal disturbance amplitudes from the scenario seed.
fn redraw_alphas(s: &mut Scenario) {
    use ptconsensus::dynamics::DisturbanceSpec;
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(s.seed);
    for (idx, agent) in s.agents.iter_mut().enumerate() {
        if let DisturbanceSpec::SinusoidalOffset { alpha, .. } = &mut agent.disturbance {
            *alpha = rng.random_range(0.0..1.0);
            s.alphas[idx] = *alpha;
        }
    }
}

fn cmd_run(arg: &str, overrides: Overrides, out: Option<PathBuf>) -> Result<(), Error> {
    let mut s = load_scenario(arg)?;
    apply_overrides(&mut s, &overrides)?;
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    let started = Instant::now();
    let result = engine::run(&s)?;
    let elapsed = started.elapsed();
    let dir = out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let path = dir.join(format!("{}.csv", s.name));
    scenario::write_csv(&result, &path)?;
    println!("scenario:          {}", s.name);
    println!("final error norm:  {:.6e}", result.metrics.final_error_norm);
    println!("max |v|:           {:.6e}", result.metrics.max_abs_v);
    if let Some(t) = result.metrics.settle_time {
        println!("settle time:       {t:.4}");
    }
    println!("wall time:         {:.3}s", elapsed.as_secs_f64());
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(list: &[String], what: &str) -> Result<Vec<T>, Error> {
    list.iter()
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} value '{s}' in --list")))
        })
        .collect()
}

fn cmd_sweep(
    scenario_arg: Option<&str>,
    kind: &str,
    list: &[String],
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    if list.is_empty() {
        return Err(Error::InvalidArgument(
            "--list must name at least one sweep value".into(),
        ));
    }
    let seed = seed.unwrap_or(DEFAULT_SEED);
    let base = || -> Result<Scenario, Error> {
        let arg = scenario_arg.ok_or_else(|| {
            Error::InvalidArgument(format!("sweep --kind {kind} requires a base scenario"))
        })?;
        load_scenario(arg)
    };
    let started = Instant::now();
    let (columns, rows): (&str, Vec<String>) = match kind {
        "x0" => {
            let norms: Vec<f64> = parse_list(list, "norm")?;
            let table = engine::sweep_initial_norm(&base()?, &norms, seed)?;
            (
                "norm,final_error_norm,max_abs_v",
                table
                    .iter()
                    .map(|(n, e, v)| format!("{n},{e:.16e},{v:.16e}"))
                    .collect(),
            )
        }
        "tf" => {
            let tfs: Vec<f64> = parse_list(list, "settling time")?;
            let table = engine::sweep_tf(&base()?, &tfs)?;
            (
                "t_f,max_abs_v",
                table
                    .iter()
                    .map(|(tf, v)| format!("{tf},{v:.16e}"))
                    .collect(),
            )
        }
        "agents" => {
            let counts: Vec<usize> = parse_list(list, "agent count")?;
            let table = engine::sweep_agent_count(&counts, seed)?;
            (
                "agents,final_error_norm,max_abs_v",
                table
                    .iter()
                    .map(|(c, e, v)| format!("{c},{e:.16e},{v:.16e}"))
                    .collect(),
            )
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown sweep kind '{other}'; valid: x0, tf, agents"
            )))
        }
    };
    let elapsed = started.elapsed();
    println!("{columns}");
    for row in &rows {
        println!("{row}");
    }
    println!("# wall time: {:.3}s", elapsed.as_secs_f64());
    if let Some(dir) = out {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        let path = dir.join(format!("sweep_{kind}.csv"));
        let mut text = format!("{columns}\n");
        for row in &rows {
            text.push_str(row);
            text.push('\n');
        }
        scenario::write_atomic(&path, &text)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_tbg(order: usize, tf: f64, samples: usize, out: Option<PathBuf>) -> Result<(), Error> {
    if samples < 2 {
        return Err(Error::InvalidArgument(
            "--samples must be at least 2".into(),
        ));
    }
    let basis = tbg::build_basis(order, tf)?;
    println!("order:             {order}");
    println!("settling time:     {tf}");
    println!("boundary residual: {:.3e}", basis.boundary_residual());
    let mut text = String::from("t");
    for k in 1..=order {
        for j in 0..=order {
            text.push_str(&format!(",h{k}_d{j}"));
        }
    }
    text.push('\n');
    let horizon = 1.2 * tf;
    for i in 0..samples {
        let t = horizon * i as f64 / (samples - 1) as f64;
        let eval = basis.eval(t)?;
        text.push_str(&format!("{t:.16e}"));
        for k in 0..order {
            for j in 0..order {
                text.push_str(&format!(",{:.16e}", eval.h[(j, k)]));
            }
            text.push_str(&format!(",{:.16e}", eval.kt[k]));
        }
        text.push('\n');
    }
    match out {
        Some(dir) => {
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
            let path = dir.join(format!("tbg_n{order}_tf{tf}.csv"));
            scenario::write_atomic(&path, &text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_graph_check(arg: &str) -> Result<(), Error> {
    let s = load_scenario(arg)?;
    let net = &s.network;
    let cert = net.rootedness_certificate();
    println!("followers:         {}", net.follower_count());
    println!(
        "directed:          {}",
        if net.is_directed() { "yes" } else { "no" }
    );
    println!("leader rooted:     {}", net.leader_rooted());
    println!("L + M invertible:  {}", cert.invertible);
    println!("identity residual: {:.3e}", cert.identity_residual);
    match net.topological_order() {
        Ok(_) => println!("follower graph:    acyclic (zero-delay mode available)"),
        Err(_) => println!("follower graph:    cyclic (buffered mode only)"),
    }
    for w in &s.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_plot(csv: &Path, series: &str, out: Option<PathBuf>) -> Result<(), Error> {
    let kind = SeriesKind::parse(series)?;
    let data = scenario::read_csv(csv)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let stem = csv
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "plot".into());
    let path = dir.join(format!("{stem}_{}.svg", kind.name()));
    plot::render(&data, kind, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}
