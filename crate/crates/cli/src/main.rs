use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowfactor::builtins::{builtin, builtins};
use flowfactor::integrator::Scheme;
use flowfactor::report::{export_truth_csv, run_scenario, write_artifacts};
use flowfactor::scenario::Scenario;

const DEFAULT_OUT_DIR: &str = "flowfactor-out";

/// Factor stochastic flows through structure-preserving groups.
#[derive(Parser)]
#[command(name = "flowfactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (TOML) or a builtin scenario by name.
    Run {
        scenario: String,
        #[command(flatten)]
        overrides: Overrides,
        /// Output root; artifacts go to <root>/<scenario name>/.
        #[arg(long, env = "FLOWFACTOR_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
    /// List builtin scenarios.
    List,
    /// Print the closed-form reference of a builtin scenario as CSV.
    ExportTruth {
        name: String,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Write <root>/<name>/truth.csv instead of printing.
        #[arg(long, env = "FLOWFACTOR_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// heun or rk4
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Disable the per-step snap back onto the structure group.
    #[arg(long)]
    no_reproject: bool,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(dt) = self.dt {
            s.dt = dt;
        }
        if let Some(t) = self.t_end {
            s.t_end = t;
        }
        if let Some(p) = self.paths {
            s.paths = p;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(scheme) = self.scheme {
            s.scheme = scheme;
        }
        if self.no_reproject {
            s.reproject = false;
        }
    }
}

fn load(spec: &str) -> Result<Scenario, String> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        return Scenario::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()));
    }
    builtin(spec).ok_or_else(|| format!("'{spec}' is neither a scenario file nor a builtin (see `flowfactor list`)"))
}

fn run(scenario: &str, overrides: &Overrides, out_dir: Option<PathBuf>) -> Result<bool, String> {
    let mut s = load(scenario)?;
    overrides.apply(&mut s);
    let output = run_scenario(&s).map_err(|e| e.to_string())?;
    let root = out_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let dir = write_artifacts(&output, &root).map_err(|e| e.to_string())?;
    print!("{}", output.report.to_text());
    eprintln!("artifacts: {}", dir.display());
    Ok(output.report.passed)
}

fn export_truth(name: &str, dt: Option<f64>, t_end: Option<f64>, out_dir: Option<PathBuf>) -> Result<(), String> {
    let s = builtin(name).ok_or_else(|| format!("no builtin scenario named '{name}'"))?;
    let csv = export_truth_csv(name, t_end.unwrap_or(s.t_end), dt.unwrap_or(s.dt), s.sample_every)
        .map_err(|e| e.to_string())?;
    match out_dir {
        Some(root) => {
            let dir = root.join(name);
            std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let file = dir.join("truth.csv");
            std::fs::write(&file, csv).map_err(|e| format!("{}: {e}", file.display()))?;
            eprintln!("wrote {}", file.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, overrides, out_dir } => run(&scenario, &overrides, out_dir).map(|passed| {
            if passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }),
        Command::List => {
            for b in builtins() {
                println!("{:<24} {}", b.name, b.description);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ExportTruth { name, dt, t_end, out_dir } => export_truth(&name, dt, t_end, out_dir).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
