//! Command-line front end: config ingestion, scenario execution, the
//! validation suite, optimization runs, and CSV emission.
//!
//! Exit codes: 0 success, 1 validation failure, 2 configuration error,
//! 3 infeasible optimization problem.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, RunConfig};
use crate::optim::{exhaustive_search, scp_solve, OptProblem, RateObjective, ScpProblem};
use crate::oracle::empirical_correlation;
use crate::plan::ProbePlan;
use crate::rate::skg_rate_at;
use crate::scenario::estimation_variances_at;
use crate::stats::{corr_with_direct, corr_without_direct, Regime, ScenarioContext};
use crate::validate::{run_all, McScale};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION_FAILURE: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "irskg", version, about = "surface-assisted secret-key generation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RegimeArg {
    Eps,
    Rps,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Eps => Regime::Eps,
            RegimeArg::Rps => Regime::Rps,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Key-value configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed for every random stream; recorded in all outputs.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Restrict to one phase regime (default: both).
    #[arg(long)]
    pub regime: Option<RegimeArg>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form temporal correlation versus Monte Carlo estimates.
    Correlation {
        #[command(flatten)]
        common: CommonArgs,
        /// Monte Carlo block count.
        #[arg(long)]
        blocks: Option<u64>,
    },
    /// Closed-form rate at one point or swept over the direct-probe time.
    Rate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Full oracle validation suite; nonzero exit on any failure.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        /// Base Monte Carlo block count (the stated criteria use 100000).
        #[arg(long)]
        blocks: Option<u64>,
    },
    /// Probing-time optimization over a transmit-power sweep.
    Optimize {
        #[command(flatten)]
        common: CommonArgs,
    },
}

struct CsvFile {
    lines: Vec<String>,
}

impl CsvFile {
    fn new(cfg: &RunConfig, seed: u64, header: &str) -> Self {
        let mut lines = Vec::new();
        lines.push(format!(
            "# config_hash={} seed={} version={}",
            cfg.hash(),
            seed,
            env!("CARGO_PKG_VERSION")
        ));
        lines.push(header.to_string());
        CsvFile { lines }
    }

    fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    fn write(&self, dir: &Path, name: &str) -> Result<PathBuf, String> {
        std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let path = dir.join(name);
        let mut f = std::fs::File::create(&path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
        for line in &self.lines {
            writeln!(f, "{line}").map_err(|e| format!("write {}: {e}", path.display()))?;
        }
        Ok(path)
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

fn regimes(choice: Option<RegimeArg>) -> Vec<Regime> {
    match choice {
        Some(r) => vec![r.into()],
        None => vec![Regime::Eps, Regime::Rps],
    }
}

fn plan_from_config(cfg: &RunConfig) -> Result<ProbePlan, ConfigError> {
    let t_p = cfg.get_f64("t_p")?.unwrap_or(100.0);
    let t_d = cfg.get_f64("t_d")?.unwrap_or(20.0);
    let t_s = cfg.get_f64("t_s")?.unwrap_or(5.0);
    ProbePlan::new(t_p, t_d, t_s)
        .map_err(|e| ConfigError { line: None, message: e.to_string() })
}

fn cmd_correlation(common: &CommonArgs, blocks: Option<u64>) -> Result<i32, String> {
    let cfg = RunConfig::load(&common.config).map_err(|e| e.to_string())?;
    let scn = cfg.scenario().map_err(|e| e.to_string())?;
    let plan = plan_from_config(&cfg).map_err(|e| e.to_string())?;
    let blocks = blocks
        .or(cfg.get_usize("blocks").map_err(|e| e.to_string())?.map(|b| b as u64))
        .unwrap_or(100_000);
    let ctx = ScenarioContext::new(&scn);
    let v = estimation_variances_at(&scn, plan.t_d, plan.t_s);
    let mut csv = CsvFile::new(&cfg, common.seed, "regime,with_direct,n,t_d,t_s,rho_closed,rho_mc,se,pass");
    for regime in regimes(common.regime) {
        for with_direct in [true, false] {
            let closed = if with_direct {
                corr_with_direct(regime, ctx.beta_ab, ctx.traces_ab(), v.reflected_a).value
            } else {
                corr_without_direct(regime, v.direct_a2, ctx.traces_ab(), v.combined_za).value
            };
            let (est, se) =
                empirical_correlation(&scn, &plan, regime, with_direct, blocks, common.seed);
            let pass = (est - closed).abs() <= (4.0 * se).max(0.02);
            csv.row(&[
                regime.name().into(),
                with_direct.to_string(),
                ctx.n_elements.to_string(),
                fmt(plan.t_d),
                fmt(plan.t_s),
                fmt(closed),
                fmt(est),
                fmt(se),
                pass.to_string(),
            ]);
        }
    }
    let path = csv.write(&common.out, "correlation.csv")?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_rate(common: &CommonArgs) -> Result<i32, String> {
    let cfg = RunConfig::load(&common.config).map_err(|e| e.to_string())?;
    let scn = cfg.scenario().map_err(|e| e.to_string())?;
    let ctx = ScenarioContext::new(&scn);
    let t_p = cfg.get_f64("t_p").map_err(|e| e.to_string())?.unwrap_or(100.0);
    let g = |k: &str| cfg.get_f64(k).map_err(|e| e.to_string());
    let points: Vec<(f64, f64)> = match (g("rate_t_d_min")?, g("rate_t_d_max")?, g("rate_t_d_step")?) {
        (Some(lo), Some(hi), step) => {
            let step = step.unwrap_or(1.0);
            let t_s = g("rate_t_s")?.or(g("t_s")?).unwrap_or(5.0);
            let mut pts = Vec::new();
            let mut k = 0u64;
            loop {
                let t_d = lo + step * k as f64;
                if t_d > hi + 1e-12 {
                    break;
                }
                pts.push((t_d, t_s));
                k += 1;
            }
            pts
        }
        _ => {
            let t_d = g("t_d")?.unwrap_or(20.0);
            let t_s = g("t_s")?.unwrap_or(5.0);
            vec![(t_d, t_s)]
        }
    };
    let mut csv = CsvFile::new(&cfg, common.seed, "t_d,t_s,regime,direct_term,reflected_term,total,feasible");
    for regime in regimes(common.regime) {
        for &(t_d, t_s) in &points {
            let feasible = ProbePlan::budget_ok(t_p, t_d, t_s);
            match skg_rate_at(&ctx, t_d, t_s, regime, &scn) {
                Ok(r) => csv.row(&[
                    fmt(t_d),
                    fmt(t_s),
                    regime.name().into(),
                    fmt(r.direct_term),
                    fmt(r.reflected_term),
                    fmt(r.total),
                    feasible.to_string(),
                ]),
                Err(_) => csv.row(&[
                    fmt(t_d),
                    fmt(t_s),
                    regime.name().into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "false".into(),
                ]),
            }
        }
    }
    let path = csv.write(&common.out, "rate.csv")?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}

fn cmd_validate(common: &CommonArgs, blocks: Option<u64>) -> Result<i32, String> {
    let cfg = RunConfig::load(&common.config).map_err(|e| e.to_string())?;
    // the criteria pin their own scenario scale; the config contributes the
    // hash and seed lineage of the output
    let scale = McScale { base_blocks: blocks.unwrap_or(100_000) };
    let reports = run_all(common.seed, scale);
    let mut csv = CsvFile::new(&cfg, common.seed, "criterion,check,value,reference,tolerance,se,pass");
    let mut all_pass = true;
    for r in &reports {
        println!(
            "{}: {} ({:.1} s) - {}",
            r.id,
            if r.pass { "pass" } else { "FAIL" },
            r.elapsed_seconds,
            r.summary
        );
        all_pass &= r.pass;
        for row in &r.rows {
            csv.row(&[
                r.id.into(),
                row.name.clone(),
                fmt(row.value),
                fmt(row.reference),
                fmt(row.tolerance),
                fmt(row.standard_error),
                row.pass.to_string(),
            ]);
        }
    }
    let path = csv.write(&common.out, "validate.csv")?;
    println!("wrote {}", path.display());
    Ok(if all_pass { EXIT_OK } else { EXIT_VALIDATION_FAILURE })
}

fn cmd_optimize(common: &CommonArgs) -> Result<i32, String> {
    let cfg = RunConfig::load(&common.config).map_err(|e| e.to_string())?;
    let base = cfg.scenario().map_err(|e| e.to_string())?;
    let t_p = cfg.get_f64("t_p").map_err(|e| e.to_string())?.unwrap_or(100.0);
    let rho_t = cfg.get_f64("rho_t").map_err(|e| e.to_string())?.unwrap_or(0.1);
    let max_iters = cfg.get_usize("max_iterations").map_err(|e| e.to_string())?.unwrap_or(20);
    let es_step = cfg.get_f64("es_step_fraction").map_err(|e| e.to_string())?.unwrap_or(1e-2);
    let powers = cfg
        .get_f64_list("powers_w")
        .map_err(|e| e.to_string())?
        .unwrap_or_else(|| vec![0.01, 0.1, 1.0, 10.0, 100.0]);
    let regime: Regime = common.regime.map(Into::into).unwrap_or(Regime::Eps);
    let mut csv = CsvFile::new(
        &cfg,
        common.seed,
        "power_w,regime,rate_scp,rate_es,t_d_opt,t_s_opt,iterations,feasible",
    );
    let mut any_infeasible = false;
    for &power in &powers {
        let mut scn = base.clone();
        scn.power_a_w = power;
        scn.power_b_w = power;
        let prob =
            RateObjective::new(&scn, OptProblem::new(regime, t_p, rho_t, max_iters as u32));
        let scp = scp_solve(&prob, prob.opt.default_init());
        let es = exhaustive_search(&prob, es_step);
        match (scp, es) {
            (Ok(scp), Ok(es)) => {
                let feasible = prob.exact_feasible([scp.t_d, scp.t_s]);
                any_infeasible |= !feasible;
                csv.row(&[
                    fmt(power),
                    regime.name().into(),
                    fmt(scp.rate),
                    fmt(es.rate),
                    fmt(scp.t_d),
                    fmt(scp.t_s),
                    scp.iterations.to_string(),
                    feasible.to_string(),
                ]);
            }
            _ => {
                any_infeasible = true;
                csv.row(&[
                    fmt(power),
                    regime.name().into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "nan".into(),
                    "0".into(),
                    "false".into(),
                ]);
            }
        }
    }
    let path = csv.write(&common.out, "optimize.csv")?;
    println!("wrote {}", path.display());
    Ok(if any_infeasible { EXIT_INFEASIBLE } else { EXIT_OK })
}

/// Run a parsed command; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Correlation { common, blocks } => cmd_correlation(common, *blocks),
        Command::Rate { common } => cmd_rate(common),
        Command::Validate { common, blocks } => cmd_validate(common, *blocks),
        Command::Optimize { common } => cmd_optimize(common),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_CONFIG_ERROR
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, body: &str) -> PathBuf {
        let path = dir.join("run.cfg");
        std::fs::write(&path, body).unwrap();
        path
    }

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("irskg-cli-{tag}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn common(config: PathBuf, out: PathBuf, seed: u64) -> CommonArgs {
        CommonArgs { config, seed, out, regime: None }
    }

    #[test]
    fn correlation_emits_four_rows_and_reruns_identically() {
        let dir = tmpdir("corr");
        let cfg = write_config(&dir, "t_p = 100\nt_d = 20\nt_s = 5\n");
        let code = cmd_correlation(&common(cfg.clone(), dir.clone(), 9), Some(2000)).unwrap();
        assert_eq!(code, EXIT_OK);
        let body = std::fs::read_to_string(dir.join("correlation.csv")).unwrap();
        assert_eq!(body.lines().count(), 2 + 4, "{body}");
        assert!(body.starts_with("# config_hash="));
        let again_dir = tmpdir("corr2");
        cmd_correlation(&common(cfg, again_dir.clone(), 9), Some(2000)).unwrap();
        let body2 = std::fs::read_to_string(again_dir.join("correlation.csv")).unwrap();
        assert_eq!(body, body2);
    }

    #[test]
    fn rate_sweep_and_empty_sweep() {
        let dir = tmpdir("rate");
        let cfg = write_config(&dir, "rate_t_d_min = 5\nrate_t_d_max = 8\nrate_t_s = 5\n");
        let args = CommonArgs {
            config: cfg,
            seed: 1,
            out: dir.clone(),
            regime: Some(RegimeArg::Eps),
        };
        assert_eq!(cmd_rate(&args).unwrap(), EXIT_OK);
        let body = std::fs::read_to_string(dir.join("rate.csv")).unwrap();
        assert_eq!(body.lines().count(), 2 + 4, "{body}");
        // infeasible point flagged but still evaluated
        let cfg2 = write_config(&dir, "t_d = 40\nt_s = 16\n");
        let args2 = CommonArgs {
            config: cfg2,
            seed: 1,
            out: dir.clone(),
            regime: Some(RegimeArg::Eps),
        };
        assert_eq!(cmd_rate(&args2).unwrap(), EXIT_OK);
        let body2 = std::fs::read_to_string(dir.join("rate.csv")).unwrap();
        let row = body2.lines().last().unwrap();
        assert!(row.ends_with(",false"), "{row}");
        assert!(!row.contains("nan"), "{row}");
        // empty sweep: header-only body
        let cfg3 = write_config(&dir, "rate_t_d_min = 9\nrate_t_d_max = 8\n");
        let args3 = CommonArgs { config: cfg3, seed: 1, out: dir.clone(), regime: None };
        assert_eq!(cmd_rate(&args3).unwrap(), EXIT_OK);
        let body3 = std::fs::read_to_string(dir.join("rate.csv")).unwrap();
        assert_eq!(body3.lines().count(), 2, "{body3}");
    }

    #[test]
    fn malformed_config_names_the_key() {
        let dir = tmpdir("bad");
        let cfg = write_config(&dir, "t_pp = 100\n");
        let args = common(cfg, dir.clone(), 1);
        let err = cmd_rate(&args).unwrap_err();
        assert!(err.contains("t_pp"), "{err}");
    }

    #[test]
    fn optimize_single_power_point() {
        let dir = tmpdir("opt");
        let cfg = write_config(&dir, "powers_w = 1.0\nrho_t = 0.1\nmax_iterations = 20\n");
        let args = CommonArgs {
            config: cfg,
            seed: 1,
            out: dir.clone(),
            regime: Some(RegimeArg::Eps),
        };
        assert_eq!(cmd_optimize(&args).unwrap(), EXIT_OK);
        let body = std::fs::read_to_string(dir.join("optimize.csv")).unwrap();
        assert_eq!(body.lines().count(), 3, "{body}");
        let row = body.lines().last().unwrap();
        assert!(row.ends_with(",true"), "{row}");
    }

    #[test]
    fn optimize_infeasible_exits_three() {
        let dir = tmpdir("optbad");
        let cfg = write_config(&dir, "powers_w = 1.0\nrho_t = 1e-9\n");
        let args = CommonArgs {
            config: cfg,
            seed: 1,
            out: dir.clone(),
            regime: Some(RegimeArg::Eps),
        };
        assert_eq!(cmd_optimize(&args).unwrap(), EXIT_INFEASIBLE);
    }
}
