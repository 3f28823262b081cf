//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cartpole;
use crate::error::{Error, Result};
use crate::lab::config::RunConfig;
use crate::lab::experiment::{compare_strategies, run_experiment, Comparison};
use crate::lab::persist;
use crate::lab::stats::{self, DEFAULT_WINDOW};
use crate::rehearsal::RehearsalMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rehearsal-lab",
    version,
    about = "Actor-critic cart-pole experiments with pseudorehearsal"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one configuration and write per-episode steps.
    Run(RunArgs),
    /// Run several strategies over a seed range and t-test them pairwise.
    Compare(CompareArgs),
    /// Mean episode length with no control at all.
    Baseline(BaselineArgs),
    /// Smooth the columns of a CSV written by `run` or `compare`.
    Tendency(TendencyArgs),
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args)]
struct Overrides {
    #[arg(long)]
    episodes: Option<usize>,
    /// Push force in newtons.
    #[arg(long)]
    force: Option<f64>,
    /// Pseudoset size.
    #[arg(long)]
    pr: Option<usize>,
    /// Pseudoset re-capture period in episodes.
    #[arg(long)]
    reinit: Option<usize>,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(e) = self.episodes {
            config.run.episodes = e;
        }
        if let Some(f) = self.force {
            config.physics.force_magnitude = f;
        }
        if let Some(p) = self.pr {
            config.rehearsal.pr = p;
        }
        if let Some(r) = self.reinit {
            config.rehearsal.reinit_period = r;
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RehearsalMode>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Config files; each becomes one strategy. Repeatable.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Rehearsal modes; each is applied to every config. Repeatable.
    #[arg(long, value_parser = parse_mode)]
    mode: Vec<RehearsalMode>,
    /// Seed range `a..b` (inclusive), a comma list, or a single seed.
    #[arg(long, value_parser = parse_seeds, default_value = "1..30")]
    seeds: SeedList,
    #[command(flatten)]
    overrides: Overrides,
    /// Per-episode mean table; a `.tendency.csv` sibling is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    #[arg(long)]
    force: Option<f64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Args)]
struct TendencyArgs {
    /// CSV written by `run` or `compare`.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Emit windowed minimums instead of means.
    #[arg(long)]
    min: bool,
    /// With --min, use only the two window endpoints.
    #[arg(long, requires = "min")]
    two_point: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

fn parse_mode(s: &str) -> std::result::Result<RehearsalMode, String> {
    s.parse::<RehearsalMode>().map_err(|e| e.to_string())
}

/// Parses `a..b` (inclusive), `a,b,c` or a single seed.
pub fn parse_seeds(s: &str) -> std::result::Result<SeedList, String> {
    let bad = |p: &str| format!("invalid seed `{p}`");
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad(lo))?;
        let hi: u64 = hi
            .trim()
            .trim_start_matches('=')
            .parse()
            .map_err(|_| bad(hi))?;
        if hi < lo {
            return Err(format!("empty seed range `{s}`"));
        }
        return Ok(SeedList((lo..=hi).collect()));
    }
    s.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad(p)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(SeedList)
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn exit_code(err: &Error) -> i32 {
    if err.is_io() {
        EXIT_IO
    } else {
        EXIT_CONFIG
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    return EXIT_OK;
                }
                _ => EXIT_CONFIG,
            };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Baseline(a) => cmd_baseline(a, out),
        Command::Tendency(a) => cmd_tendency(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(s) = a.seed {
        config.run.seed = s;
    }
    if let Some(m) = a.mode {
        config.rehearsal.mode = m;
    }
    a.overrides.apply(&mut config);
    let record = run_experiment(&config)?;
    if let Some(path) = &a.out {
        persist::write_run_csv(&record, path)?;
    }
    if !a.quiet {
        let steps = record.steps_f64();
        writeln!(
            out,
            "label,episodes,mean,variance,cap_hits,diverged,wall_time"
        )
        .map_err(io_out)?;
        writeln!(
            out,
            "{},{},{:.4},{:.4},{},{},{:.3}",
            config.label(),
            steps.len(),
            stats::mean(&steps),
            stats::variance(&steps),
            record.cap_hits,
            record.diverged,
            record.wall_time
        )
        .map_err(io_out)?;
    }
    Ok(())
}

/// Strategy list for `compare`: every config crossed with every mode.
fn compare_configs(a: &CompareArgs) -> Result<Vec<RunConfig>> {
    let bases: Vec<RunConfig> = if a.config.is_empty() {
        vec![RunConfig::default()]
    } else {
        a.config
            .iter()
            .map(|p| RunConfig::load(p))
            .collect::<Result<_>>()?
    };
    let mut configs = Vec::new();
    for base in bases {
        let mut base = base;
        a.overrides.apply(&mut base);
        if a.mode.is_empty() {
            configs.push(base);
            continue;
        }
        for mode in &a.mode {
            let mut c = base.clone();
            c.rehearsal.mode = *mode;
            if !c.run.label.is_empty() && a.mode.len() > 1 {
                c.run.label = format!("{}:{}", c.run.label, mode);
            }
            configs.push(c);
        }
    }
    Ok(configs)
}

fn tendency_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.tendency.csv"))
}

pub fn write_comparison(cmp: &Comparison, path: &Path) -> Result<()> {
    let labels: Vec<String> = cmp.strategies.iter().map(|s| s.label.clone()).collect();
    let means: Vec<Vec<f64>> = cmp
        .strategies
        .iter()
        .map(|s| s.mean_curve.clone())
        .collect();
    persist::write_series_csv(&labels, &means, path)?;

    let mut t_labels = labels;
    let mut t_cols: Vec<Vec<f64>> = cmp
        .strategies
        .iter()
        .map(|s| s.tendency_curve.clone())
        .collect();
    for p in &cmp.pairwise {
        if let Ok(diff) = cmp.difference_tendency(p.a, p.b) {
            t_labels.push(format!(
                "{}-minus-{}",
                cmp.strategies[p.a].label, cmp.strategies[p.b].label
            ));
            t_cols.push(diff);
        }
    }
    persist::write_series_csv(&t_labels, &t_cols, &tendency_path(path))
}

pub fn write_summary(cmp: &Comparison, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "label,mean,variance,diverged_runs")?;
    for s in &cmp.strategies {
        writeln!(
            out,
            "{},{:.4},{:.4},{}",
            s.label, s.mean, s.variance, s.diverged_runs
        )?;
    }
    writeln!(
        out,
        "a,b,t_stat,dof,significant_one_tail_05,smoothed_t_stat"
    )?;
    for p in &cmp.pairwise {
        let smoothed = p
            .smoothed
            .map(|t| format!("{:.4}", t.t_stat))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{:.4},{},{},{}",
            cmp.strategies[p.a].label,
            cmp.strategies[p.b].label,
            p.raw.t_stat,
            p.raw.dof,
            p.raw.significant_one_tail_05,
            smoothed
        )?;
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let configs = compare_configs(&a)?;
    let cmp = compare_strategies(&configs, &a.seeds.0)?;
    if let Some(path) = &a.out {
        write_comparison(&cmp, path)?;
    }
    if !a.quiet {
        write_summary(&cmp, out).map_err(io_out)?;
    }
    Ok(())
}

fn cmd_baseline(a: BaselineArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = load_config(a.config.as_deref())?;
    if let Some(f) = a.force {
        config.physics.force_magnitude = f;
    }
    config.validate()?;
    let seed = a.seed.unwrap_or(config.run.seed);
    let mean =
        cartpole::free_fall_baseline(&config.physics, seed, a.episodes, config.run.step_cap)?;
    if !a.quiet {
        writeln!(out, "free_fall_mean_steps,{mean:.4}").map_err(io_out)?;
    }
    Ok(())
}

fn cmd_tendency(a: TendencyArgs, out: &mut dyn Write) -> Result<()> {
    let table = persist::read_series_csv(&a.input)?;
    let smooth = |col: &Vec<f64>| -> Result<Vec<f64>> {
        match (a.min, a.two_point) {
            (false, _) => stats::tendency(col, a.window),
            (true, false) => stats::smoothed_min(col, a.window),
            (true, true) => stats::smoothed_min_two_point(col, a.window),
        }
    };
    let columns = table
        .columns
        .iter()
        .map(smooth)
        .collect::<Result<Vec<_>>>()?;
    match &a.out {
        Some(path) => persist::write_series_csv(&table.labels, &columns, path)?,
        None if !a.quiet => {
            writeln!(out, "episode,{}", table.labels.join(",")).map_err(io_out)?;
            let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
            for i in 0..rows {
                let cells: Vec<String> = columns
                    .iter()
                    .map(|c| c.get(i).map(|v| v.to_string()).unwrap_or_default())
                    .collect();
                writeln!(out, "{},{}", i + 1, cells.join(",")).map_err(io_out)?;
            }
        }
        None => {}
    }
    Ok(())
}
