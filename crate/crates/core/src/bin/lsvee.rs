use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use lsvee::algo::ConstantsMode;
use lsvee::envgen;
use lsvee::harness::{self, Baseline, EnvSpec, ExperimentConfig, HarnessError};
use lsvee::oracle;

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(name = "lsvee", version, about = "PAC learning in layered contextual decision processes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an environment and its function class.
    Generate {
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        out_cdp: PathBuf,
        #[arg(long)]
        out_class: PathBuf,
    },
    /// Run the learner over a list of seeds.
    Run(RunArgs),
    /// Run a reference method over a list of seeds.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "enumerateAll")]
        method: String,
    },
    /// Exact optimal values for an environment file.
    Oracle {
        #[arg(long)]
        cdp: PathBuf,
        #[arg(long)]
        class: Option<PathBuf>,
    },
    /// Check reactivity of Q*, realizability and determinism.
    Validate {
        #[arg(long)]
        cdp: PathBuf,
        #[arg(long)]
        class: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Random,
    Disjoint,
    Lock,
}

#[derive(Args, Default)]
struct EnvArgs {
    #[arg(long, value_enum)]
    generator: Option<Generator>,
    #[arg(long, default_value_t = 3)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    h: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    obs_per_state: usize,
    /// Reward gap of the combination lock.
    #[arg(long, default_value_t = 0.1)]
    lock_epsilon: f64,
    /// Comma-separated optimal path of the lock.
    #[arg(long, value_delimiter = ',')]
    p_star: Option<Vec<usize>>,
    /// Environment seed; defaults to the run seed.
    #[arg(long)]
    env_seed: Option<u64>,
    #[arg(long, requires = "class")]
    cdp: Option<PathBuf>,
    #[arg(long, requires = "cdp")]
    class: Option<PathBuf>,
}

impl EnvArgs {
    fn spec(&self) -> Option<EnvSpec> {
        if let (Some(cdp), Some(class)) = (&self.cdp, &self.class) {
            return Some(EnvSpec::File { cdp: cdp.clone(), class: class.clone() });
        }
        let (m, k, h, n, obs_per_state, seed) = (self.m, self.k, self.h, self.n, self.obs_per_state, self.env_seed);
        Some(match self.generator? {
            Generator::Random => EnvSpec::Random { m, k, h, n, obs_per_state, seed },
            Generator::Disjoint => EnvSpec::Disjoint { m, k, h, n, obs_per_state, seed },
            Generator::Lock => EnvSpec::Lock { h, k, epsilon: self.lock_epsilon, p_star: self.p_star.clone(), seed },
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ConstantsMode>,
    #[arg(long)]
    budget: Option<u64>,
    /// `a..b` or a comma-separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<ConstantsMode, String> {
    match s {
        "theory" => Ok(ConstantsMode::Theory),
        "practical" => Ok(ConstantsMode::Practical),
        _ => Err(format!("mode must be theory or practical, got {s:?}")),
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Config(format!("cannot parse seeds {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let env = self
                    .env
                    .spec()
                    .ok_or_else(|| HarnessError::Config("need --config, --generator or --cdp/--class".into()))?;
                ExperimentConfig { env, algo: Default::default(), seeds: vec![0], budget: None, output_dir: None }
            }
        };
        if self.config.is_some() {
            if let Some(env) = self.env.spec() {
                cfg.env = env;
            }
        }
        if let Some(e) = self.epsilon {
            cfg.algo.epsilon = e;
        }
        if let Some(d) = self.delta {
            cfg.algo.delta = d;
        }
        if let Some(m) = self.mode {
            cfg.algo.mode = m;
        }
        if let Some(b) = self.budget {
            cfg.budget = Some(b);
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &HarnessError) -> u8 {
    match e {
        HarnessError::Config(_) | HarnessError::Json(_) | HarnessError::Io { .. } => EXIT_CONFIG,
        HarnessError::Core(lsvee::Error::ValidationFailed(_)) => EXIT_VALIDATION,
        HarnessError::Core(lsvee::Error::InvalidCdp(_) | lsvee::Error::InvalidClass(_)) => EXIT_CONFIG,
        _ => 1,
    }
}

fn print_json(v: &serde_json::Value) {
    print_line(&serde_json::to_string_pretty(v).expect("json value serializes"));
}

fn print_line(line: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn dispatch(cmd: Cmd) -> Result<u8, HarnessError> {
    match cmd {
        Cmd::Generate { env, out_cdp, out_class } => {
            let spec = env.spec().ok_or_else(|| HarnessError::Config("--generator is required".into()))?;
            let inst = spec.build(env.env_seed.unwrap_or(0))?;
            harness::save_instance(&inst, &out_cdp, &out_class)?;
            print_json(&json!({
                "cdp": out_cdp,
                "class": out_class,
                "levels": inst.cdp.level_sizes(),
                "classSize": inst.class.len(),
            }));
            Ok(0)
        }
        Cmd::Run(args) => {
            let cfg = args.config()?;
            let rows = harness::run_experiment(&cfg)?;
            for row in &rows {
                print_line(&serde_json::to_string(row)?);
            }
            Ok(if harness::all_budget_exceeded(&rows) { EXIT_BUDGET } else { 0 })
        }
        Cmd::Baseline { run, method } => {
            let cfg = run.config()?;
            let method: Baseline = method.parse()?;
            let runs = harness::run_baseline(&cfg, method)?;
            let rows: Vec<_> = runs.into_iter().map(|r| r.row).collect();
            for row in &rows {
                print_line(&serde_json::to_string(row)?);
            }
            Ok(if harness::all_budget_exceeded(&rows) { EXIT_BUDGET } else { 0 })
        }
        Cmd::Oracle { cdp, class } => {
            let text = std::fs::read_to_string(&cdp).map_err(|source| HarnessError::Io { path: cdp.clone(), source })?;
            let env = lsvee::LayeredCdp::from_json(&text)?;
            let exact = oracle::compute_exact_values(&env)?;
            let mut out = json!({ "rootValue": exact.root_value(&env), "vStar": exact.v_star });
            if let Some(class) = class {
                let inst = harness::load_instance(&cdp, &class)?;
                let (id, value) = oracle::brute_force_policy_search(&inst.cdp, &inst.class)?;
                out["bestInClass"] = json!({ "id": id, "value": value });
            }
            print_json(&out);
            Ok(0)
        }
        Cmd::Validate { cdp, class } => {
            let inst = harness::load_instance(&cdp, &class)?;
            let report = envgen::validate_assumptions(&inst.cdp, &inst.class)?;
            print_json(&serde_json::to_value(&report)?);
            Ok(if report.all_hold() { 0 } else { EXIT_VALIDATION })
        }
    }
}
