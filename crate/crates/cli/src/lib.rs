//! Commands behind the `veilvote` binary.
//!
//! Each command returns a process exit code: 0 on success, 2 for invalid
//! configuration or parameters, 1 for failures while running.

mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use veilvote::accounting::{
    accumulate_data_dependent, scheme_curve, Granularity, MarginRecord, MechanismParams,
    PrivacyReport, VotingScheme,
};
use veilvote::harness::{run_scheme, FederationSpec, RunReport, SchemeConfig};

pub use config::{CompareConfig, RunConfig, SchemeBlock};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VEILVOTE_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

fn finish(result: Result<(), CliError>, err: &mut dyn Write) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// Size the global rayon pool from `VEILVOTE_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // A pool that is already initialized (e.g. in tests) is left alone.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run_repeats(
    federation: &FederationSpec,
    scheme: &SchemeConfig,
    seed: u64,
    repeats: u64,
    delta: f64,
) -> Result<Vec<RunReport>, CliError> {
    (0..repeats)
        .into_par_iter()
        .map(|r| {
            let spec = FederationSpec {
                seed: seed + r,
                ..federation.clone()
            };
            run_scheme(&spec, scheme, delta).map_err(|e| CliError::Runtime(format!("run with seed {}: {e}", seed + r)))
        })
        .collect()
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}

/// Run the configured scheme `repeats` times (seeds `seed + i`) and write
/// one JSON line per run to the output file, in repeat order.
pub fn cmd_run(config_path: &Path, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let cfg = RunConfig::load(config_path)?;
        let reports = run_repeats(&cfg.federation, &cfg.scheme, cfg.seed, cfg.repeats, cfg.delta)?;
        let mut out = create(&cfg.output)?;
        for report in &reports {
            writeln!(out, "{}", report.to_json_line()).map_err(write_err(&cfg.output))?;
        }
        out.flush().map_err(write_err(&cfg.output))
    })();
    finish(result, err)
}

/// Parameters of the `account` calculator.
#[derive(Debug, Clone, PartialEq)]
pub struct AccountArgs {
    pub scheme: VotingScheme,
    pub granularity: Granularity,
    pub queries: u64,
    pub sigma: f64,
    pub k: Option<usize>,
    pub delta: f64,
    pub margins: Option<PathBuf>,
    pub agents: Option<usize>,
    pub classes: Option<usize>,
}

/// Parse a `query_id,gamma` CSV with header.
pub fn parse_margins(text: &str) -> Result<Vec<MarginRecord>, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("margins file is empty")?;
    if header.trim().replace(' ', "") != "query_id,gamma" {
        return Err(format!("expected header `query_id,gamma`, found `{header}`"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let (id, gamma) = line
                .split_once(',')
                .ok_or_else(|| format!("line {}: expected two columns", i + 2))?;
            let query_id = id.trim().parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            let gamma = gamma.trim().parse().map_err(|e| format!("line {}: {e}", i + 2))?;
            Ok(MarginRecord { query_id, gamma })
        })
        .collect()
}

fn account_report(args: &AccountArgs) -> Result<PrivacyReport, CliError> {
    let config = |e: veilvote::Error| CliError::Config(e.to_string());
    if !(args.delta > 0.0 && args.delta < 1.0) {
        return Err(CliError::Config(format!("delta out of range (0, 1): {}", args.delta)));
    }
    let margins = match &args.margins {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            let records = parse_margins(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if args.agents.is_none() || args.classes.is_none() {
                return Err(CliError::Config("--margins needs --agents and --classes".into()));
            }
            Some(records)
        }
        None => None,
    };
    let params = MechanismParams {
        sigma: args.sigma,
        queries: args.queries,
        num_agents: args.agents.unwrap_or(1),
        k: args.k,
        num_classes: args.classes.unwrap_or(2),
        granularity: args.granularity,
    };
    match margins {
        Some(records) => accumulate_data_dependent(&records, &params, args.scheme, args.delta).map_err(config),
        None => {
            let curve = scheme_curve(&params, args.scheme).map_err(config)?;
            PrivacyReport::from_curve(&curve, args.delta).map_err(config)
        }
    }
}

/// Print the privacy report for the given mechanism without training.
pub fn cmd_account(args: &AccountArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = account_report(args).and_then(|report| {
        writeln!(out, "{}", report.to_json()).map_err(|e| CliError::Runtime(e.to_string()))
    });
    finish(result, err)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn kind_name(scheme: &SchemeConfig) -> &'static str {
    match scheme {
        SchemeConfig::Ae(_) => "ae",
        SchemeConfig::Knn(_) => "knn",
        SchemeConfig::FedAvg(_) => "fed_avg",
        SchemeConfig::DpFedAvg(_) => "dp_fed_avg",
    }
}

/// Run every scheme block on the same federation and seeds and write a CSV
/// `scheme,seed,accuracy,epsilon,epsilon_star,comm_floats`.
pub fn cmd_compare(config_path: &Path, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let (cfg, federation) = CompareConfig::load(config_path)?;
        let mut out = create(&cfg.output)?;
        let w = write_err(&cfg.output);
        writeln!(out, "scheme,seed,accuracy,epsilon,epsilon_star,comm_floats").map_err(&w)?;
        for block in &cfg.scheme {
            let name = block.name.clone().unwrap_or_else(|| kind_name(&block.scheme).to_string());
            let reports = run_repeats(&federation, &block.scheme, cfg.seed, cfg.repeats, cfg.delta)?;
            for r in reports {
                let eps = r.privacy.as_ref().map(|p| p.epsilon);
                let eps_star = r.privacy.as_ref().and_then(|p| p.epsilon_data_dependent);
                writeln!(
                    out,
                    "{name},{},{},{},{},{}",
                    r.seed,
                    r.test_accuracy,
                    eps.map_or_else(|| "inf".to_string(), |e| e.to_string()),
                    fmt_opt(eps_star),
                    r.comm_upstream_floats
                )
                .map_err(&w)?;
            }
        }
        out.flush().map_err(&w)
    })();
    finish(result, err)
}
