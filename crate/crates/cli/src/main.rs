mod bench;
mod verify;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pbopt::opb::{emit_comment, emit_result, parse_with, ParseOptions, MAX_INTSIZE};
use pbopt::search::{solve, Config, Mode, Observer, SolveResult, DEFAULT_FTOL, DEFAULT_MCAP};

#[derive(Parser, Debug)]
#[command(name = "pbopt", version, about = "Exact pseudo-Boolean solver for OPB and WBO files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance and print the competition protocol.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        opts: SolverOpts,
        /// Reject instances whose intsize exceeds this many bits.
        #[arg(long, env = "PBOPT_MAX_INTSIZE", default_value_t = MAX_INTSIZE)]
        max_intsize: u32,
    },
    /// Check a model line against an instance with exact arithmetic.
    Verify {
        file: PathBuf,
        /// Literals such as "x1 -x2 x3"; a leading "v" is ignored.
        #[arg(allow_hyphen_values = true)]
        model: String,
    },
    /// Run every .opb/.wbo file of a directory and write CSV and plot data.
    Bench {
        dir: PathBuf,
        /// Output prefix; writes <out>.csv and <out>.plot (or _on/_off pairs).
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        /// Run the corpus twice, with the feature on and off.
        #[arg(long, value_enum)]
        ablate: Option<Feature>,
        #[arg(long, env = "PBOPT_MAX_INTSIZE", default_value_t = 49)]
        max_intsize: u32,
        #[command(flatten)]
        opts: SolverOpts,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Feature {
    Flower,
    Rlt,
    Symmetry,
    ConflictPb,
    Fjump,
    Restarts,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Default,
    AggressiveHeur,
    SatLike,
}

#[derive(Args, Debug, Clone)]
struct SolverOpts {
    /// Wall-clock limit in seconds.
    #[arg(long, env = "PBOPT_TIME_LIMIT")]
    time_limit: Option<f64>,
    #[arg(long, env = "PBOPT_NODE_LIMIT")]
    node_limit: Option<u64>,
    #[arg(long, env = "PBOPT_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "PBOPT_MODE", value_enum, default_value_t = ModeArg::Default)]
    mode: ModeArg,
    #[arg(long, env = "PBOPT_NO_FLOWER")]
    no_flower: bool,
    #[arg(long, env = "PBOPT_NO_RLT")]
    no_rlt: bool,
    #[arg(long, env = "PBOPT_NO_SYMMETRY")]
    no_symmetry: bool,
    #[arg(long, env = "PBOPT_NO_CONFLICT_PB")]
    no_conflict_pb: bool,
    #[arg(long, env = "PBOPT_NO_FJUMP")]
    no_fjump: bool,
    #[arg(long, env = "PBOPT_NO_RESTARTS")]
    no_restarts: bool,
    /// Number of portfolio threads (0 or 1: single solver).
    #[arg(long, env = "PBOPT_PORTFOLIO", default_value_t = 0)]
    portfolio: usize,
    /// Largest big-M coefficient put into the LP for soft rows.
    #[arg(long, env = "PBOPT_MCAP", default_value_t = DEFAULT_MCAP)]
    mcap: i64,
    /// Absolute LP feasibility and integrality tolerance.
    #[arg(long, env = "PBOPT_FTOL", default_value_t = DEFAULT_FTOL)]
    ftol: f64,
}

impl SolverOpts {
    fn config(&self) -> Result<Config> {
        let time_limit = match self.time_limit {
            None => None,
            Some(t) if t.is_finite() && t > 0.0 => Some(Duration::from_secs_f64(t)),
            Some(t) => bail!("--time-limit must be a positive number of seconds, got {t}"),
        };
        let cfg = Config {
            time_limit,
            node_limit: self.node_limit,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Default => Mode::Default,
                ModeArg::AggressiveHeur => Mode::AggressiveHeur,
                ModeArg::SatLike => Mode::SatLike,
            },
            flower: !self.no_flower,
            rlt: !self.no_rlt,
            symmetry: !self.no_symmetry,
            conflict_pb: !self.no_conflict_pb,
            fjump: !self.no_fjump,
            restarts: !self.no_restarts,
            portfolio: self.portfolio,
            mcap: self.mcap,
            ftol: self.ftol,
            ..Config::default()
        };
        cfg.validate().map_err(anyhow::Error::msg)?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            file,
            opts,
            max_intsize,
        } => cmd_solve(&file, &opts, max_intsize),
        Command::Verify { file, model } => cmd_verify(&file, &model),
        Command::Bench {
            dir,
            out,
            ablate,
            max_intsize,
            opts,
        } => cmd_bench(&dir, &out, ablate, max_intsize, &opts),
    }
}

fn read_instance(file: &Path, max_intsize: u32) -> Result<pbopt::Instance> {
    let text = fs::read(file).with_context(|| format!("cannot read {}", file.display()))?;
    parse_with(&text, ParseOptions { max_intsize }).with_context(|| format!("cannot parse {}", file.display()))
}

fn install_stop_flag() -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    let s = stop.clone();
    // a second handler cannot be installed; the flag then simply never fires
    let _ = ctrlc::set_handler(move || s.store(true, Ordering::Relaxed));
    stop
}

fn cmd_solve(file: &Path, opts: &SolverOpts, max_intsize: u32) -> Result<ExitCode> {
    let mut cfg = opts.config()?;
    let inst = read_instance(file, max_intsize)?;
    cfg.stop = Some(install_stop_flag());
    let optimize = inst.is_optimization();
    let printed: Arc<Mutex<Option<i128>>> = Arc::default();
    if optimize {
        let printed = printed.clone();
        cfg.observer = Some(Observer(Arc::new(move |obj| {
            let mut last = printed.lock().unwrap();
            if last.is_none_or(|l| obj < l) {
                *last = Some(obj);
                let mut out = io::stdout().lock();
                let _ = writeln!(out, "o {obj}");
                let _ = out.flush();
            }
        })));
    }
    let res = solve(&inst, &cfg);
    let mut out = io::stdout().lock();
    emit_comment(&mut out, &stats_text(&res))?;
    let best_obj = res.best.as_ref().filter(|_| optimize).map(|b| b.objective);
    if let Some(o) = best_obj {
        if *printed.lock().unwrap() != Some(o) {
            writeln!(out, "o {o}")?;
        }
    }
    emit_result(res.status, None, res.best.as_ref().map(|b| b.x.as_slice()), &mut out)?;
    Ok(ExitCode::from(res.status.exit_code() as u8))
}

fn stats_text(res: &SolveResult) -> String {
    let s = &res.stats;
    let mut t = format!(
        "nodes {} max_depth {} lp_solves {} lp_iterations {}\n",
        s.nodes, s.max_depth, s.lp_solves, s.lp_iterations
    );
    t += &format!(
        "conflicts {} learned {} clause_fallbacks {} propagations {}\n",
        s.conflicts, s.learned, s.clause_fallbacks, s.propagations
    );
    t += &format!(
        "cuts flower1 {} flower2 {} rlt {}\n",
        s.cuts[0], s.cuts[1], s.cuts[2]
    );
    t += &format!(
        "restarts {} incumbents {} fj_solutions {} rejected_candidates {}\n",
        s.restarts, s.incumbents, s.fj_solutions, s.rejected_candidates
    );
    t += &format!(
        "symmetry generators {} lex_propagations {} orbital_fixings {}",
        s.sym.generators, s.sym.lex_propagations, s.sym.orbital_fixings
    );
    if let Some(b) = res.dual_bound {
        t += &format!("\ndual_bound {b}");
    }
    t
}

fn cmd_verify(file: &Path, model: &str) -> Result<ExitCode> {
    let inst = read_instance(file, u32::MAX)?;
    let x = match verify::parse_model(model, inst.n_vars) {
        Ok(x) => x,
        Err(e) => {
            println!("INVALID: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let report = verify::check(&inst, &x);
    for l in &report.lines {
        println!("{l}");
    }
    if report.valid {
        println!("VALID");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("INVALID");
        Ok(ExitCode::from(1))
    }
}

fn with_feature(mut cfg: Config, f: Feature, on: bool) -> Config {
    match f {
        Feature::Flower => cfg.flower = on,
        Feature::Rlt => cfg.rlt = on,
        Feature::Symmetry => cfg.symmetry = on,
        Feature::ConflictPb => cfg.conflict_pb = on,
        Feature::Fjump => cfg.fjump = on,
        Feature::Restarts => cfg.restarts = on,
    }
    cfg
}

fn suffixed(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    s.push(ext);
    PathBuf::from(s)
}

fn cmd_bench(dir: &Path, out: &Path, ablate: Option<Feature>, max_intsize: u32, opts: &SolverOpts) -> Result<ExitCode> {
    let base = opts.config()?;
    let files = bench::corpus(dir)?;
    if files.is_empty() {
        bail!("no .opb or .wbo files in {}", dir.display());
    }
    let runs: Vec<(String, Config)> = match ablate {
        None => vec![(String::new(), base)],
        Some(f) => vec![
            ("_on".into(), with_feature(base.clone(), f, true)),
            ("_off".into(), with_feature(base, f, false)),
        ],
    };
    for (suffix, cfg) in &runs {
        let rows: Vec<bench::Row> = files.iter().map(|p| bench::run_one(p, cfg, max_intsize)).collect();
        let csv = suffixed(out, suffix, ".csv");
        let plot = suffixed(out, suffix, ".plot");
        bench::write_csv(&csv, &rows)?;
        bench::write_plot(&plot, &rows)?;
        let solved = rows.iter().filter(|r| bench::is_solved(r)).count();
        let rejected = rows.iter().filter(|r| r.status == "REJECTED").count();
        let nodes: u64 = rows.iter().map(|r| r.nodes).sum();
        println!(
            "{}: {} instances, {solved} solved, {rejected} rejected, {nodes} nodes",
            csv.display(),
            rows.len()
        );
        let mut buckets: Vec<(&str, usize)> = Vec::new();
        for r in &rows {
            if let Some(b) = r.intsize {
                let label = bench::bucket(b);
                match buckets.iter_mut().find(|(l, _)| *l == label) {
                    Some(e) => e.1 += 1,
                    None => buckets.push((label, 1)),
                }
            }
        }
        buckets.sort();
        let summary: Vec<String> = buckets.iter().map(|(l, n)| format!("{l}:{n}")).collect();
        println!("intsize buckets {}", summary.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}
