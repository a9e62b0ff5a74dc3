use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dica_core::experiment::{
    ablation_matrix, complexity_sweep, loglog_slope, record_calls, sweep, sweep_csv, BenchResult,
};
use dica_core::metrics::MetricsReport;
use dica_core::sim::{
    prepare, run_scenario, ControlMode, RunLength, ScenarioConfig, SEEDS, VOLUME_TABLE,
};
use dica_core::Techniques;

#[derive(Parser)]
#[command(
    name = "dica",
    version,
    about = "Intersection coordination scenarios, sweeps and ablation benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its metrics.
    Run(RunArgs),
    /// Time the coordinator on a recorded request stream, one row per technique subset.
    Bench(BenchArgs),
    /// Seed-averaged metrics over modes and volumes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    unbalanced: bool,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ControlMode>,
    #[arg(long)]
    volume: Option<u32>,
    /// Simulated seconds; ignored with --vehicles.
    #[arg(long)]
    duration: Option<f64>,
    /// Spawn this many vehicles and run until all have left.
    #[arg(long)]
    vehicles: Option<usize>,
    /// Write an event trace as trace.jsonl.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    volume: Option<u32>,
    /// Techniques to combine, e.g. IV-A,IV-B,IV-C,IV-D; every valid subset is timed.
    #[arg(long, default_value = "IV-A,IV-B,IV-C,IV-D")]
    ablate: String,
    /// Replays per cell; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Also fit operation-count growth over route lengths 20..200 m.
    #[arg(long)]
    complexity: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Volumes as a list (100,300) or an inclusive range (100..500).
    #[arg(long, default_value = "100..500")]
    volumes: String,
    #[arg(long, default_value = "enhanced,tlight")]
    modes: String,
    /// Seeds to average; defaults to 12,21,66.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

fn parse_mode(s: &str) -> Result<ControlMode, String> {
    ControlMode::parse(s).map_err(|e| e.to_string())
}

fn parse_volumes(s: &str) -> Result<Vec<u32>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let (lo, hi): (u32, u32) = (lo.trim().parse()?, hi.trim().parse()?);
        let picked: Vec<u32> = VOLUME_TABLE
            .iter()
            .map(|v| v.0)
            .filter(|v| (lo..=hi).contains(v))
            .collect();
        if picked.is_empty() {
            bail!("no table volume in {lo}..{hi}");
        }
        return Ok(picked);
    }
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<u32>()
                .with_context(|| format!("bad volume `{v}`"))
        })
        .collect()
}

fn base_config(common: &Common) -> Result<ScenarioConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ScenarioConfig::from_toml(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.unbalanced {
        cfg.unbalanced = true;
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(volume) = args.volume {
        cfg.volume = volume;
    }
    if let Some(t) = args.duration {
        cfg.run = RunLength::Seconds(t);
    }
    if let Some(n) = args.vehicles {
        cfg.run = RunLength::Vehicles(n);
    }
    cfg.trace |= args.trace;
    cfg.validate()?;
    let out = run_scenario(&cfg)?;
    let dir = &args.common.out;
    fs::create_dir_all(dir)?;
    let r = &out.report;
    write(
        dir,
        "metrics.csv",
        &format!("{}\n{}\n", MetricsReport::header(), r.csv_row()),
    )?;
    write(dir, "series_flow_ratio.csv", &r.flow_ratio.to_csv())?;
    write(dir, "series_waiting.csv", &r.waiting.to_csv())?;
    write(dir, "series_distance_histogram.csv", &r.distances.to_csv())?;
    if cfg.trace {
        write(dir, "trace.jsonl", &out.trace.to_jsonl())?;
    }

    let mut report = String::new();
    writeln!(
        report,
        "mode {} volume {} seed {} unbalanced {}",
        cfg.mode.label(),
        cfg.volume,
        cfg.seed,
        cfg.unbalanced
    )?;
    writeln!(report, "simulated {:.1} s", out.sim_time)?;
    writeln!(
        report,
        "generated {} crossed {} throughput {:.3}",
        r.generated, r.crossed, r.throughput
    )?;
    writeln!(
        report,
        "average trip time {:.2} s (sd {:.2}), effective {:.2} s",
        r.avg_trip_time, r.trip_time_sd, r.effective_avg_trip_time
    )?;
    writeln!(
        report,
        "major roads {:.2} s, minor roads {:.2} s",
        r.major_avg_trip_time, r.minor_avg_trip_time
    )?;
    match r.distances.min {
        Some(d) => writeln!(
            report,
            "closest approach inside the intersection {d:.2} m over {} samples",
            r.distances.samples
        )?,
        None => writeln!(
            report,
            "no two vehicles were inside the intersection together"
        )?,
    }
    writeln!(
        report,
        "longest wait for confirmation {:.1} s, re-requests {}",
        r.max_confirmation_wait, r.re_requests
    )?;
    if let Some(s) = &out.stats {
        writeln!(
            report,
            "coordinator: {} requests, {:.3} s, {} operations",
            s.requests,
            s.wall_seconds(),
            s.total_ops()
        )?;
    }
    if let Some(plan) = &out.signal_plan {
        writeln!(
            report,
            "signal cycle {:.2} s, critical flow ratio {:.3}",
            plan.cycle, plan.critical_sum
        )?;
    }
    write(dir, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

/// Every valid subset of the listed techniques, baseline first.
fn cells(list: &str) -> Result<Vec<Techniques>> {
    let allowed = Techniques::parse(list)?;
    let within = |t: &Techniques| {
        (!t.a || allowed.a) && (!t.b || allowed.b) && (!t.c || allowed.c) && (!t.d || allowed.d)
    };
    Ok(Techniques::all_valid().into_iter().filter(within).collect())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    cfg.mode = ControlMode::Enhanced;
    if let Some(volume) = args.volume {
        cfg.volume = volume;
    }
    cfg.validate()?;
    let cells = cells(&args.ablate)?;
    let prepared = prepare(&cfg)?;
    let calls = record_calls(&cfg, &prepared)?;
    let results = ablation_matrix(&calls, &prepared, &cfg, &cells, args.repeats)?;
    let dir = &args.common.out;
    fs::create_dir_all(dir)?;

    let baseline = results.iter().find(|r| r.techniques.is_baseline());
    let mut csv = format!("{},time_ratio,ops_ratio\n", BenchResult::header());
    let mut report = format!(
        "volume {} seed {}: {} requests replayed\n",
        cfg.volume,
        cfg.seed,
        results.first().map_or(0, |r| r.requests)
    );
    for r in &results {
        let (tr, or) = match baseline {
            Some(b) => (
                r.wall_seconds / b.wall_seconds,
                r.total_ops as f64 / b.total_ops as f64,
            ),
            None => (f64::NAN, f64::NAN),
        };
        writeln!(csv, "{},{tr:.5},{or:.5}", r.csv_row())?;
        writeln!(
            report,
            "{:>8}  {:>9.4} s  {:>8.1} us/request  {:>12} ops  {:>7.2}% of baseline time",
            r.label,
            r.wall_seconds,
            r.mean_request_us,
            r.total_ops,
            tr * 100.0
        )?;
    }
    write(dir, "bench.csv", &csv)?;

    if args.complexity {
        let lengths: Vec<f64> = (1..=10).map(|i| 20.0 * f64::from(i)).collect();
        let points = complexity_sweep(&lengths, 4, cfg.h)?;
        let mut csv = String::from("l_m,n_bar,blockers,baseline_ops,enhanced_ops\n");
        for p in &points {
            writeln!(
                csv,
                "{:.1},{:.2},{},{},{}",
                p.l_m, p.n_bar, p.blockers, p.baseline_ops, p.enhanced_ops
            )?;
        }
        write(dir, "series_complexity.csv", &csv)?;
        let fit = |f: fn(&dica_core::experiment::ComplexityPoint) -> u64| {
            loglog_slope(
                &points
                    .iter()
                    .map(|p| (p.n_bar, f(p) as f64))
                    .collect::<Vec<_>>(),
            )
        };
        writeln!(
            report,
            "log-log slope of operations against states per trajectory: baseline {:.3}, enhanced {:.3}",
            fit(|p| p.baseline_ops),
            fit(|p| p.enhanced_ops)
        )?;
    }
    write(dir, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn sweep_cmd(args: SweepArgs) -> Result<()> {
    let cfg = base_config(&args.common)?;
    cfg.validate()?;
    let volumes = parse_volumes(&args.volumes)?;
    let modes: Vec<ControlMode> = args
        .modes
        .split(',')
        .map(|m| ControlMode::parse(m.trim()))
        .collect::<std::result::Result<_, _>>()?;
    let seeds = if args.seeds.is_empty() {
        SEEDS.to_vec()
    } else {
        args.seeds
    };
    let rows = sweep(&cfg, &modes, &volumes, &seeds, cfg.unbalanced)?;
    let dir = &args.common.out;
    fs::create_dir_all(dir)?;
    write(dir, "metrics.csv", &sweep_csv(&rows))?;
    let mut report = String::new();
    writeln!(
        report,
        "{:>9} {:>7} {:>10} {:>10} {:>10} {:>10}",
        "mode", "volume", "avg trip", "effective", "major", "minor"
    )?;
    for r in &rows {
        let a = &r.averaged;
        writeln!(
            report,
            "{:>9} {:>7} {:>10.2} {:>10.2} {:>10.2} {:>10.2}",
            r.mode.label(),
            r.volume,
            a.avg_trip_time,
            a.effective_avg_trip_time,
            a.major_avg_trip_time,
            a.minor_avg_trip_time
        )?;
    }
    write(dir, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volume_range_picks_table_entries() {
        assert_eq!(
            parse_volumes("100..500").unwrap(),
            vec![100, 200, 300, 400, 500]
        );
        assert_eq!(parse_volumes("200..300").unwrap(), vec![200, 300]);
        assert_eq!(parse_volumes("100, 400").unwrap(), vec![100, 400]);
        assert!(parse_volumes("10..20").is_err());
    }

    #[test]
    fn ablation_cells_are_valid_subsets() {
        assert_eq!(cells("IV-A,IV-B,IV-C,IV-D").unwrap().len(), 12);
        let two = cells("IV-B,IV-D").unwrap();
        assert_eq!(
            two.iter().map(Techniques::label).collect::<Vec<_>>(),
            ["none", "B", "B+D"]
        );
        assert!(cells("IV-D").is_err());
    }
}
