use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use john_s::certify::verify_result;
use john_s::helly::{family_from_json, family_to_json, helly_select, lower_bound_family, subset_integral, HellyChecks, HellyConfig};
use john_s::limits::sweep;
use john_s::solver::{solve_john, Status};
use john_s::{LogConcaveFn, RunConfig};

mod output;

use output::to_json_17;

#[derive(Parser)]
#[command(name = "john-s", version, about = "John s-ellipsoids of log-concave functions")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// JSON file with run settings; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed (JOHN_S_SEED takes precedence).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// John s-ellipsoid of one function.
    John {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        s: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Search for a contact certificate of optimality.
        #[arg(long)]
        certify: bool,
        #[command(flatten)]
        common: Common,
    },
    /// John s-ellipsoids over a list of s values, as CSV.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        /// Comma separated, increasing.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        s_list: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full parameters as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Helly selection for the minimum of a family.
    Helly {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smooth each function with e^{-δ|x|²} first.
        #[arg(long)]
        smooth: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// The 2d+1 function family where no 2d indices suffice.
    LowerBound {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the family itself.
        #[arg(long)]
        family_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn parse(msg: impl ToString) -> Self {
        Failure { code: 2, msg: msg.to_string() }
    }
    fn solver(msg: impl ToString) -> Self {
        Failure { code: 3, msg: msg.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

fn load_config(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::parse(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.geom.seed = seed;
    }
    if let Ok(v) = std::env::var("JOHN_S_SEED") {
        cfg.geom.seed = v.trim().parse().map_err(|_| Failure::parse(format!("JOHN_S_SEED is not an integer: {v}")))?;
    }
    Ok(cfg)
}

fn read_json(p: &Path) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(p).map_err(|e| Failure::parse(format!("{}: {e}", p.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", p.display())))
}

fn read_function(p: &Path) -> Result<LogConcaveFn, Failure> {
    LogConcaveFn::from_json(&read_json(p)?).map_err(Failure::parse)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure { code: 2, msg: format!("{}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_runtime(mut v: Value, start: Instant) -> Value {
    if let Value::Object(m) = &mut v {
        m.insert("runtime_ms".into(), json!(start.elapsed().as_millis() as u64));
    }
    v
}

fn cmd_john(input: &Path, s: f64, out: &Option<PathBuf>, certify: bool, common: &Common) -> CmdResult {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let f = read_function(input)?;
    if s.is_nan() || s <= 0.0 {
        return Err(Failure::parse("s must be positive"));
    }
    let r = solve_john(&f, s, &cfg).map_err(Failure::solver)?;
    let mut v = r.to_json();
    if certify {
        let verdict = verify_result(&f, &r, &cfg).map_err(Failure::solver)?;
        v["verification"] = verdict.to_json();
        v["suspect"] = json!(!verdict.is_certified());
    }
    emit(out, &to_json_17(&with_runtime(v, start)))?;
    Ok(if r.status == Status::Converged { 0 } else { 3 })
}

fn cmd_sweep(input: &Path, s_list: &[f64], out: &Option<PathBuf>, json_out: &Option<PathBuf>, jobs: usize, common: &Common) -> CmdResult {
    let cfg = load_config(common)?;
    let f = read_function(input)?;
    if s_list.is_empty() {
        return Err(Failure::parse("empty s-list"));
    }
    let mut list = s_list.to_vec();
    if list.iter().any(|s| s.is_nan() || *s <= 0.0) {
        return Err(Failure::parse("s values must be positive"));
    }
    list.sort_by(|a, b| a.partial_cmp(b).unwrap());
    list.dedup();
    let sw = sweep(&f, &list, jobs.max(1), &cfg).map_err(Failure::solver)?;
    emit(out, &sw.to_csv())?;
    if let Some(p) = json_out {
        emit(&Some(p.clone()), &to_json_17(&sw.to_json()))?;
    }
    let failed = sw.points.iter().any(|p| p.result.as_ref().map_or(true, |r| r.status != Status::Converged));
    Ok(if failed { 3 } else { 0 })
}

fn cmd_helly(family: &Path, out: &Option<PathBuf>, smooth: Option<f64>, common: &Common) -> CmdResult {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let fam = family_from_json(&read_json(family)?).map_err(Failure::parse)?;
    let hcfg = HellyConfig { smooth_delta: smooth, ..HellyConfig::default() };
    let sel = helly_select(&fam, &hcfg, &cfg).map_err(Failure::solver)?;
    emit(out, &to_json_17(&with_runtime(sel.to_json(), start)))?;
    Ok(helly_exit_code(&sel.checks(), true))
}

fn cmd_lower_bound(d: usize, delta: f64, out: &Option<PathBuf>, family_out: &Option<PathBuf>, common: &Common) -> CmdResult {
    let start = Instant::now();
    let cfg = load_config(common)?;
    let fam = lower_bound_family(d, delta).map_err(Failure::parse)?;
    if let Some(p) = family_out {
        emit(&Some(p.clone()), &to_json_17(&family_to_json(&fam)))?;
    }
    let n = fam.len();
    let all: Vec<usize> = (0..n).collect();
    let full = subset_integral(&fam, &all, &cfg).map_err(Failure::solver)?;
    let mut subsets = Vec::new();
    let mut every_large = true;
    for skip in 0..n {
        let set: Vec<usize> = all.iter().cloned().filter(|&i| i != skip).collect();
        let v = subset_integral(&fam, &set, &cfg).map_err(Failure::solver)?;
        every_large &= v > delta;
        subsets.push(json!({"omitted": skip, "integral": if v.is_finite() { json!(v) } else { json!("inf") }}));
    }
    let exact = 2f64.powi(d as i32);
    let full_ok = (full - exact).abs() <= 1e-9 * exact;
    let sel = helly_select(&fam, &HellyConfig::default(), &cfg).map_err(Failure::solver)?;
    let v = json!({
        "d": d,
        "delta": delta,
        "integral_all": full,
        "integral_all_exact": exact,
        "subsets": subsets,
        "selection": sel.to_json(),
        "checks": {"integral_all": full_ok, "subsets_exceed_delta": every_large, "selection_size": sel.sigma.len() == n},
    });
    emit(out, &to_json_17(&with_runtime(v, start)))?;
    Ok(helly_exit_code(&sel.checks(), full_ok && every_large && sel.sigma.len() == n))
}

/// 4 if the integral ratio bound fails, 3 if any other promised quantity fails, else 0.
fn helly_exit_code(c: &HellyChecks, extra: bool) -> u8 {
    if !c.ratio {
        4
    } else if c.all() && extra {
        0
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match &cli.cmd {
        Command::John { input, s, out, certify, common } => cmd_john(input, *s, out, *certify, common),
        Command::Sweep { input, s_list, out, json, jobs, common } => cmd_sweep(input, s_list, out, json, *jobs, common),
        Command::Helly { family, out, smooth, common } => cmd_helly(family, out, *smooth, common),
        Command::LowerBound { d, delta, out, family_out, common } => cmd_lower_bound(*d, *delta, out, family_out, common),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ok() -> HellyChecks {
        HellyChecks { sigma_size: true, ratio: true, p_volume: true, dr_det: true, lambda: true, eta_size: true }
    }

    #[test]
    fn exit_codes_for_checks() {
        assert_eq!(helly_exit_code(&ok(), true), 0);
        assert_eq!(helly_exit_code(&ok(), false), 3);
        assert_eq!(helly_exit_code(&HellyChecks { dr_det: false, ..ok() }, true), 3);
        assert_eq!(helly_exit_code(&HellyChecks { ratio: false, ..ok() }, true), 4);
        assert_eq!(helly_exit_code(&HellyChecks { ratio: false, sigma_size: false, ..ok() }, true), 4);
    }
}
