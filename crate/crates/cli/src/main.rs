// SPDX-License-Identifier: Apache-2.0

//! `conelrt` command-line interface.

mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use conelrt::experiments::{csv_string, to_canonical_json};
use conelrt::lrt::calibrate_closed_form;
use conelrt::rng::{mix64, with_workers};
use conelrt::{
    calibrate_null, conic_stats, decide, estimate_conic_summary, estimate_gamma, identity_checks,
    iso_jacobian_band_check, ks_distance, lrs, normal_bound_rhs, predict_power, run_scenario, Error, NullSpec,
    Scenario, ScenarioConfig, Sidedness, TestPlan,
};
use serde_json::{json, Value};

use parse::{SetSpec, Usage};

#[derive(Parser, Debug)]
#[command(name = "conelrt", version, about = "Likelihood-ratio tests under convex constraints")]
struct Cli {
    /// Master seed; echoed in every output.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte-Carlo loops (results do not depend on it).
    #[arg(long, global = true, env = "CONELRT_WORKERS")]
    workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Indent JSON output.
    #[arg(long, global = true)]
    pretty: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
struct SetArgs {
    /// subspace, poly, orthant, circular, product-circular, monotone, kmonotone, l1image
    #[arg(long = "set")]
    tag: String,
    #[arg(long)]
    dim: Option<usize>,
    /// Half-aperture in radians (circular sets).
    #[arg(long)]
    angle: Option<f64>,
    /// Polynomial degree (poly) or monotonicity order (kmonotone).
    #[arg(long)]
    order: Option<usize>,
    /// Spanning vectors as columns, `@file.csv` (subspace).
    #[arg(long)]
    basis: Option<String>,
    /// Coordinate subspace of this rank (subspace without --basis).
    #[arg(long)]
    rank: Option<usize>,
    /// Design matrix, `@file.csv` (l1image).
    #[arg(long)]
    design: Option<String>,
    /// l1 radius (l1image).
    #[arg(long)]
    lambda: Option<f64>,
}

impl SetArgs {
    fn build(&self) -> Result<conelrt::ConstraintSet, Usage> {
        SetSpec {
            tag: self.tag.clone(),
            dim: self.dim,
            angle: self.angle,
            order: self.order,
            basis: self.basis.clone(),
            rank: self.rank,
            design: self.design.clone(),
            lambda: self.lambda,
        }
        .build()
    }
}

#[derive(Args, Debug, Clone)]
struct NullArgs {
    /// `point:<vector>` or `subspace:poly:<k>`; default is the origin.
    #[arg(long, allow_hyphen_values = true)]
    null: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct PlanArgs {
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Side::One)]
    sided: Side,
    #[arg(long, value_enum, default_value_t = Mode::MonteCarlo)]
    mode: Mode,
    /// Null calibration replications (Monte-Carlo mode).
    #[arg(long, default_value_t = 20_000)]
    calibration_reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Side {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Mode {
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Ks,
    Bound,
    Identities,
    IsoBand,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Euclidean projection of --point onto the set.
    Project {
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Monte-Carlo statistical dimension and face-dimension law.
    Statdim {
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Gaussian-width functional Γ_p(nu).
    Gamma {
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, allow_hyphen_values = true)]
        nu: String,
        #[arg(long, default_value_t = 2)]
        p: u32,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Null mean and standard deviation of the statistic.
    Calibrate {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        null: NullArgs,
        #[arg(long, value_enum, default_value_t = Mode::MonteCarlo)]
        mode: Mode,
        #[arg(long, default_value_t = 20_000)]
        reps: usize,
    },
    /// Statistic and decision for an observation --y.
    Test {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        null: NullArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, allow_hyphen_values = true)]
        y: String,
    },
    /// Normal-approximation power at the mean --mu.
    Predict {
        #[command(flatten)]
        set: SetArgs,
        #[command(flatten)]
        null: NullArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, allow_hyphen_values = true)]
        mu: String,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
    },
    /// Normality diagnostics.
    Diagnose {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Required except for iso-band (which uses --dim alone).
        #[arg(long = "set")]
        tag: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        angle: Option<f64>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        basis: Option<String>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        design: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[command(flatten)]
        null: NullArgs,
        /// Mean vector (ks, identities); defaults to the null point.
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<String>,
        /// ks reference law: `normal` or `chisq:<dof>`.
        #[arg(long, default_value = "normal")]
        reference: String,
        /// ks: compare the raw statistic instead of its standardized version.
        #[arg(long)]
        raw: bool,
        /// Slope of the linear null mean (iso-band).
        #[arg(long, default_value_t = 1.0)]
        slope: f64,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        #[arg(long, default_value_t = 20_000)]
        calibration_reps: usize,
    },
    /// Run a simulation scenario and write CSV, SVG and manifest.
    Reproduce {
        /// fig1, fig2, counterexamples, subspace-cone, circular, lasso, iso
        scenario: String,
        /// JSON file matching the scenario configuration schema.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        param_grid: Option<Vec<f64>>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        reps_power: Option<usize>,
        #[arg(long)]
        reps_calibration: Option<usize>,
        /// Print the effective configuration and exit.
        #[arg(long)]
        dry_run: bool,
    },
}

enum Failure {
    Usage(String),
    Config(String),
    Core(Error),
}

impl From<Usage> for Failure {
    fn from(u: Usage) -> Self {
        Failure::Usage(u.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Config(_) => 3,
            Failure::Core(e) if e.is_numerical() => 1,
            Failure::Core(Error::Io(_) | Error::Csv(_)) => 1,
            Failure::Core(_) => 2,
        }
    }

    fn message(&self) -> String {
        let text = match self {
            Failure::Usage(m) => format!("usage: {m}"),
            Failure::Config(m) => format!("config: {m}"),
            Failure::Core(e) => e.to_string(),
        };
        text.replace('\n', " ")
    }
}

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            // first line only: the diagnostic, without clap's usage block
            let text = e.render().to_string();
            eprintln!("conelrt: {}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    let workers = cli.workers;
    match with_workers(workers, || run(cli)) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("conelrt: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn sidedness(s: Side) -> Sidedness {
    match s {
        Side::One => Sidedness::OneSided,
        Side::Two => Sidedness::TwoSided,
    }
}

fn calibrate(
    set: &conelrt::ConstraintSet,
    null: &NullSpec,
    mode: Mode,
    reps: usize,
    seed: u64,
) -> Result<conelrt::NullCalibration, Error> {
    match mode {
        Mode::MonteCarlo => calibrate_null(set, null, reps, seed),
        Mode::ClosedForm => calibrate_closed_form(set, null, seed),
    }
}

fn plan(set: &conelrt::ConstraintSet, null: &NullSpec, args: &PlanArgs, seed: u64) -> Result<TestPlan, Error> {
    let cal = calibrate(set, null, args.mode, args.calibration_reps, mix64(seed, 0))?;
    TestPlan::new(sidedness(args.sided), args.alpha, cal)
}

fn run(cli: Cli) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    let value = match cli.command {
        Command::Project { set, point } => {
            let k = set.build()?;
            let x = parse::vector(&point)?;
            serde_json::to_value(k.project(&x)?).map_err(Error::from)?
        }
        Command::Statdim { set, reps } => {
            let k = set.build()?;
            serde_json::to_value(estimate_conic_summary(&k, reps, seed)?).map_err(Error::from)?
        }
        Command::Gamma { set, nu, p, reps } => {
            let k = set.build()?;
            let nu = parse::vector(&nu)?;
            serde_json::to_value(estimate_gamma(&k, &nu, p, reps, seed)?).map_err(Error::from)?
        }
        Command::Calibrate { set, null, mode, reps } => {
            let k = set.build()?;
            let h0 = parse::null(null.null.as_deref(), k.dim())?;
            serde_json::to_value(calibrate(&k, &h0, mode, reps, seed)?).map_err(Error::from)?
        }
        Command::Test { set, null, plan: p, y } => {
            let k = set.build()?;
            let h0 = parse::null(null.null.as_deref(), k.dim())?;
            let y = parse::vector(&y)?;
            let t = lrs(&k, &h0, &y)?;
            let plan = plan(&k, &h0, &p, seed)?;
            json!({
                "statistic": t,
                "standardized": plan.standardize(t),
                "reject": decide(t, &plan),
                "plan": plan,
            })
        }
        Command::Predict {
            set,
            null,
            plan: p,
            mu,
            reps,
        } => {
            let k = set.build()?;
            let h0 = parse::null(null.null.as_deref(), k.dim())?;
            let mu = parse::vector(&mu)?;
            let plan = plan(&k, &h0, &p, seed)?;
            let pred = predict_power(&k, &h0, &mu, &plan, reps, mix64(seed, 1))?;
            json!({ "prediction": pred, "plan": plan })
        }
        Command::Diagnose {
            kind,
            tag,
            dim,
            angle,
            order,
            basis,
            rank,
            design,
            lambda,
            null,
            mu,
            reference,
            raw,
            slope,
            reps,
            calibration_reps,
        } => {
            if kind == Kind::IsoBand {
                let n = dim.ok_or_else(|| Usage("--kind iso-band requires --dim".into()))?;
                serde_json::to_value(iso_jacobian_band_check(n, slope, reps, seed)?).map_err(Error::from)?
            } else {
                let set_spec = SetSpec {
                    tag: tag.ok_or_else(|| Usage("--set is required for this --kind".into()))?,
                    dim,
                    angle,
                    order,
                    basis,
                    rank,
                    design,
                    lambda,
                };
                let k = set_spec.build()?;
                let h0 = parse::null(null.null.as_deref(), k.dim())?;
                let mu = match mu {
                    Some(m) => parse::vector(&m)?,
                    None => h0.null_point(k.dim()),
                };
                match kind {
                    Kind::Ks => {
                        let law = parse::reference(&reference)?;
                        let mut t = conic_stats::sample_lrs(&k, &h0, &mu, reps, seed)?;
                        if !raw {
                            let cal = calibrate_null(&k, &h0, calibration_reps, mix64(seed, 1))?;
                            t.iter_mut().for_each(|v| *v = (*v - cal.m_hat) / cal.sigma_hat);
                        }
                        serde_json::to_value(ks_distance(&t, law)?).map_err(Error::from)?
                    }
                    Kind::Bound => serde_json::to_value(normal_bound_rhs(&k, &h0, reps, seed)?).map_err(Error::from)?,
                    Kind::Identities => {
                        serde_json::to_value(identity_checks(&k, &h0, &mu, reps, seed)?).map_err(Error::from)?
                    }
                    Kind::IsoBand => unreachable!("handled above"),
                }
            }
        }
        Command::Reproduce {
            scenario,
            config,
            output_dir,
            n_grid,
            param_grid,
            alpha,
            reps_power,
            reps_calibration,
            dry_run,
        } => {
            let sc = Scenario::from_slug(&scenario).ok_or_else(|| {
                let all: Vec<&str> = Scenario::ALL.iter().map(|s| s.slug()).collect();
                Usage(format!("unknown scenario {scenario:?}; expected one of {}", all.join(", ")))
            })?;
            let mut c = match &config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(Error::from)?;
                    let c = ScenarioConfig::from_json(&text).map_err(|e| Failure::Config(e.to_string()))?;
                    if c.scenario != sc {
                        return Err(Failure::Config(format!(
                            "{} describes scenario {}, not {sc}",
                            path.display(),
                            c.scenario.slug()
                        )));
                    }
                    c
                }
                None => ScenarioConfig::desk(sc, format!("out/{}", sc.slug())),
            };
            if let Some(d) = output_dir {
                c.output_dir = d;
            }
            if let Some(v) = n_grid {
                c.n_grid = v;
            }
            if let Some(v) = param_grid {
                c.param_grid = v;
            }
            if let Some(v) = alpha {
                c.alpha = v;
            }
            if let Some(v) = reps_power {
                c.reps_power = v;
            }
            if let Some(v) = reps_calibration {
                c.reps_calibration = v;
            }
            if let Some(s) = cli.seed {
                c.master_seed = s;
            }
            c.validate().map_err(|e| Failure::Config(e.to_string()))?;
            if dry_run {
                // the configuration itself, so it can be fed back via --config
                return Ok(with_newline(serde_json::to_string_pretty(&c).map_err(Error::from)?));
            }
            let run = run_scenario(&c)?;
            if cli.format == Format::Csv {
                return Ok(csv_string(&run.points)?);
            }
            json!({
                "seed": c.master_seed,
                "scenario": sc.slug(),
                "output_dir": c.output_dir,
                "points": run.points.len(),
                "files": run.manifest.files,
            })
        }
    };
    render(value, seed, cli.format, cli.pretty)
}

fn with_newline(mut s: String) -> String {
    s.push('\n');
    s
}

/// Adds the seed to the top-level object and renders it.
fn render(mut value: Value, seed: u64, format: Format, pretty: bool) -> Outcome {
    if let Value::Object(map) = &mut value {
        map.entry("seed").or_insert(json!(seed));
    }
    match format {
        Format::Json => Ok(with_newline(to_canonical_json(&value, pretty)?)),
        Format::Csv => Ok(flat_csv(&value)),
    }
}

/// Two-column `field,value` listing with dotted paths for nested fields.
fn flat_csv(value: &Value) -> String {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => {
                let sorted: std::collections::BTreeMap<_, _> = m.iter().collect();
                for (k, item) in sorted {
                    walk(&key(k), item, out);
                }
            }
            Value::Array(items) => {
                for (i, item) in items.iter().enumerate() {
                    walk(&key(&i.to_string()), item, out);
                }
            }
            Value::Null => out.push((prefix.to_string(), String::new())),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            other => {
                let text = to_canonical_json(other, false).unwrap_or_default();
                out.push((prefix.to_string(), text));
            }
        }
    }
    let mut rows = Vec::new();
    walk("", value, &mut rows);
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let _ = w.write_record(["field", "value"]);
    for (k, v) in rows {
        let _ = w.write_record([k, v]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
