use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use manna::bench::{plot_point, run_parallel, summary_line, write_csv};
use manna::io::{
    decimal, parse_equilibrium, parse_game, parse_instance, parse_prices, parse_rational, write_equilibrium,
    write_equilibrium_decimal, write_instance,
};
use manna_core::harness::{gen_random_instance, BenchConfig, Mode};
use manna_core::oracle::{enumerate_equilibria, DEFAULT_CAP};
use manna_core::reduction::{check_well_supported, exchange_to_fisher, extract_strategies, reduce_game_to_exchange};
use manna_core::verify::verify_equilibrium;
use manna_core::{ratio, solve, Rational, SolveOptions, SolveStatus};

const PARSE: u8 = 1;
const RAY: u8 = 2;
const LIMIT: u8 = 3;
const DEGENERATE: u8 = 4;

#[derive(Parser)]
#[command(name = "manna", version, about = "Exact competitive equilibria for goods and bads")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute an equilibrium with Lemke's algorithm.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_iters: Option<usize>,
        /// Print `iter, entering, leaving, z` for every pivot to stderr.
        #[arg(long)]
        trace: bool,
        /// Also print the result with this many decimals.
        #[arg(long)]
        decimal: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check an equilibrium file against an instance.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        equilibrium: PathBuf,
        /// Relative market-clearing tolerance.
        #[arg(long, default_value = "0", value_parser = rational)]
        epsilon: Rational,
    },
    /// List every equilibrium of a tiny instance by brute force.
    Enumerate {
        #[arg(long)]
        instance: PathBuf,
        /// Largest total number of segments to accept.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Write a random instance.
    Gen {
        #[command(flatten)]
        dims: Dims,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Solve a batch of random instances and report iteration counts.
    Bench {
        #[command(flatten)]
        dims: Dims,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Print `total_segments,max_iters` for plotting.
        #[arg(long)]
        plot_data: bool,
    },
    /// Compile a bimatrix game into a chore-division market.
    Reduce {
        #[arg(long)]
        game: PathBuf,
        /// Emit the equal-income version instead of the exchange market.
        #[arg(long)]
        fisher: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Read mixed strategies off the prices of a reduced market.
    Extract {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        n: usize,
        /// Report whether the strategies are a well-supported equilibrium of this game.
        #[arg(long)]
        game: Option<PathBuf>,
        #[arg(long, value_parser = rational)]
        epsilon: Option<Rational>,
    },
}

#[derive(Args)]
struct Dims {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    segs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Make the first half of the items goods.
    #[arg(long)]
    mixed: bool,
}

impl Dims {
    fn config(&self, trials: usize, max_iters: Option<usize>) -> Result<BenchConfig, Failure> {
        if self.n == 0 || self.m == 0 || self.segs == 0 {
            return Err(Failure::input("--n, --m and --segs must be positive"));
        }
        if self.mixed && self.m < 2 {
            return Err(Failure::input("--mixed needs at least two items"));
        }
        let mode = if self.mixed { Mode::Mixed } else { Mode::AllBads };
        Ok(BenchConfig { n: self.n, m: self.m, segments: self.segs, trials, seed: self.seed, mode, max_iters })
    }
}

fn rational(s: &str) -> Result<Rational, String> {
    parse_rational(s).ok_or_else(|| format!("`{s}` is not a rational number"))
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: PARSE, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn parsed<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, Failure> {
    r.map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { instance, seed, max_iters, trace, decimal: digits, output } => {
            let inst = parsed(&instance, parse_instance(&read(&instance)?))?;
            let opts = SolveOptions { seed, max_iters, trace, ..SolveOptions::default() };
            let out = solve(&inst, &opts).map_err(|e| Failure::input(format!("solver failed: {e}")))?;
            for step in &out.trace {
                eprintln!("{}, {}, {}, {}", step.iteration, step.entering, step.leaving, step.z);
            }
            eprintln!("iterations: {}", out.iterations);
            match &out.status {
                SolveStatus::Solved(eq) => {
                    emit(output.as_deref(), &write_equilibrium(eq))?;
                    if let Some(d) = digits {
                        eprint!("{}", write_equilibrium_decimal(eq, d));
                    }
                    Ok(())
                }
                SolveStatus::SecondaryRay => Err(Failure { code: RAY, message: "terminated on a secondary ray".into() }),
                SolveStatus::IterationLimit => {
                    Err(Failure { code: LIMIT, message: format!("no solution within {} pivots", out.iterations) })
                }
                SolveStatus::Degenerate(w) => Err(Failure {
                    code: DEGENERATE,
                    message: format!("degenerate after {} attempts: {w}", out.attempts),
                }),
            }
        }
        Command::Verify { instance, equilibrium, epsilon } => {
            let inst = parsed(&instance, parse_instance(&read(&instance)?))?;
            let eq = parsed(&equilibrium, parse_equilibrium(&read(&equilibrium)?, &inst))?;
            let rep = verify_equilibrium(&inst, &eq, &epsilon).map_err(|e| Failure::input(e.to_string()))?;
            let verdict = |ok: bool| if ok { "ok" } else { "FAIL" };
            for i in 0..inst.num_agents() {
                println!(
                    "agent {i}: optimal {}, budget {}",
                    verdict(rep.optimal_bundles[i]),
                    verdict(rep.budget_balanced[i])
                );
            }
            for (j, ok) in rep.clearing.iter().enumerate() {
                println!("item {j}: clearing {}", verdict(*ok));
            }
            println!("equilibrium: {}", if rep.overall { "yes" } else { "no" });
            if rep.overall {
                Ok(())
            } else {
                Err(Failure { code: 1, message: "not an equilibrium".into() })
            }
        }
        Command::Enumerate { instance, cap } => {
            let inst = parsed(&instance, parse_instance(&read(&instance)?))?;
            let all = enumerate_equilibria(&inst, cap).map_err(|e| Failure::input(e.to_string()))?;
            for (k, found) in all.equilibria.iter().enumerate() {
                println!("# equilibrium {k}");
                print!("{}", write_equilibrium(&found.equilibrium));
            }
            for (k, eq) in all.families.iter().enumerate() {
                println!("# family member {k}");
                print!("{}", write_equilibrium(eq));
            }
            if all.degenerate {
                println!("degenerate family detected; {} isolated equilibria listed", all.count());
            } else {
                println!("count: {}", all.count());
            }
            Ok(())
        }
        Command::Gen { dims, trial, output } => {
            let cfg = dims.config(trial + 1, None)?;
            emit(output.as_deref(), &write_instance(&gen_random_instance(&cfg, trial)))
        }
        Command::Bench { dims, trials, max_iters, csv, plot_data } => {
            let cfg = dims.config(trials, max_iters)?;
            let (stats, records) = run_parallel(&cfg);
            if let Some(path) = &csv {
                let file = fs::File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
                write_csv(file, &cfg, &stats, &records).map_err(|e| Failure::input(e.to_string()))?;
            } else {
                write_csv(std::io::stdout(), &cfg, &stats, &records).map_err(|e| Failure::input(e.to_string()))?;
            }
            eprintln!("{}", summary_line(&cfg, &stats));
            if plot_data {
                println!("{}", plot_point(&cfg, &stats));
            }
            Ok(())
        }
        Command::Reduce { game, fisher, output } => {
            let g = parsed(&game, parse_game(&read(&game)?))?;
            let mut inst = reduce_game_to_exchange(&g);
            if fisher {
                inst = exchange_to_fisher(&inst, &ratio(1, g.n() as i64)).map_err(|e| Failure::input(e.to_string()))?;
            }
            emit(output.as_deref(), &write_instance(&inst))
        }
        Command::Extract { prices, n, game, epsilon } => {
            let p = parsed(&prices, parse_prices(&read(&prices)?))?;
            let (alpha, beta) = extract_strategies(&p, n).map_err(|e| Failure::input(e.to_string()))?;
            let show = |v: &[Rational]| v.iter().map(|x| format!("{x} ({})", decimal(x, 4))).collect::<Vec<_>>().join(" ");
            println!("alpha {}", show(alpha.probs()));
            println!("beta {}", show(beta.probs()));
            if let Some(path) = game {
                let g = parsed(&path, parse_game(&read(&path)?))?;
                if g.n() != n {
                    return Err(Failure::input(format!("the game has {} strategies, not {n}", g.n())));
                }
                let eps = epsilon.unwrap_or_else(|| ratio(1, n as i64));
                let ok = check_well_supported(&g, &alpha, &beta, &eps);
                println!("well-supported at {eps}: {}", if ok { "yes" } else { "no" });
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
