//! `tailbound`: command-line access to every bound and to the Monte Carlo
//! verification harness.
//!
//! Results go to stdout (or `--output`) as JSON or CSV. Exit status is 0 on
//! success, 2 when an input violates a precondition and 1 when a numerical
//! routine fails.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use tailbound::cgf::{cgf_discrete, rate_bound_t};
use tailbound::chaining::{build_deflation, optimize_deflation, theorem_main_bound, FunctionFamily};
use tailbound::gaussian::{
    cgf_norm, gaussian_instance_bound, optimal_rank, CovarianceSpec, GaussianModel, LinearFunctional,
};
use tailbound::io::{json_or_path, read_json, FamilyDocument};
use tailbound::orlicz::{
    conversion_factor_m, orlicz_norm, wr_exponential_type, wr_quadrature_bound, OrliczGenerator,
};
use tailbound::verify::{
    reports_to_csv, run_trials, sweep, SweepGrid, SweepModel, TrialPlan, VerificationReport,
};
use tailbound::{Error, Result};

#[derive(Parser)]
#[command(name = "tailbound", version, about = "Instance-dependent uniform tail bounds")]
struct Cli {
    /// Output format; `verify` and `sweep` default to CSV, everything else to JSON.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Chernoff rate bound T_r(f) of one function.
    Trf {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        f: String,
        #[arg(long)]
        r: f64,
    },
    /// Class coefficient w_r over all normalized differences of a family.
    ClassWr {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        r: f64,
    },
    /// Orlicz norm of one function.
    OrliczNorm {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        f: String,
        /// Generator as inline JSON or a path.
        #[arg(long)]
        gen: String,
    },
    /// Quadrature bound on w_r for an Orlicz generator.
    WrQuad {
        #[arg(long)]
        gen: String,
        #[arg(long)]
        r: f64,
    },
    /// Closed-form w_r bound for an exponential-type generator.
    WrExp {
        #[arg(long)]
        gen: String,
        #[arg(long)]
        r: f64,
        /// Conversion factor; the certified numerical value when omitted.
        #[arg(long)]
        m: Option<f64>,
    },
    /// Rank-k bound for a linear functional of a Gaussian vector.
    GaussianBound {
        /// Covariance as inline JSON or a path.
        #[arg(long)]
        cov: String,
        #[command(flatten)]
        direction: Direction,
        /// Truncation rank; the optimal rank when omitted.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        loose_projected: bool,
    },
    /// Deflated chaining bound for one deflation parameter.
    ChainBound {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        k: u32,
    },
    /// Pick the deflation parameter with the smallest objective.
    Optimize {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        /// Candidate values of k.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        k: Vec<u32>,
    },
    /// Monte Carlo check of one guarantee.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r: f64,
        /// Deflation parameter or Gaussian rank (optimal rank when omitted).
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Replace every threshold by this value.
        #[arg(long, allow_negative_numbers = true)]
        threshold_override: Option<f64>,
    },
    /// Monte Carlo checks over a grid of (n, r, k).
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long, value_delimiter = ',', required = true)]
        r: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        k: Vec<u32>,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Direction {
    /// Direction u as inline JSON array or a path.
    #[arg(long)]
    u: Option<String>,
    /// Standard basis vector e_i (zero-based).
    #[arg(long)]
    basis: Option<usize>,
    /// i-th eigenvector of the covariance, 0 being the top one.
    #[arg(long)]
    eigen: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum)]
    target: TargetArg,
    /// Family document (also accepted as --dist).
    #[arg(long, visible_alias = "dist")]
    family: Option<PathBuf>,
    /// Covariance for the Gaussian target, inline JSON or a path.
    #[arg(long)]
    cov: Option<String>,
    /// Tracked function (chernoff) or first function of the difference (corollary).
    #[arg(long)]
    f: Option<String>,
    /// Second function of the difference (corollary); the zero member by default.
    #[arg(long)]
    g: Option<String>,
    /// Number of random unit directions for the Gaussian target.
    #[arg(long, default_value_t = 1000)]
    mesh: usize,
    #[arg(long)]
    loose_projected: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Chernoff,
    Corollary,
    Gaussian,
    TheoremMain,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// A result in both output shapes.
struct Rendered {
    json: Value,
    csv: String,
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(x) if x.is_f64() => x.as_f64().map(|f| f.to_string()).unwrap_or_default(),
        Value::Number(x) => x.to_string(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn scalar_fields(obj: &Map<String, Value>) -> Vec<(&String, &Value)> {
    obj.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).collect()
}

/// Header and one row from the scalar fields of each object.
fn csv_table(rows: &[&Map<String, Value>]) -> String {
    let Some(first) = rows.first() else { return String::new() };
    let header: Vec<&str> = scalar_fields(first).iter().map(|(k, _)| k.as_str()).collect();
    let mut out = header.join(",") + "\n";
    for row in rows {
        let cells: Vec<String> = header.iter().map(|k| row.get(*k).map(csv_cell).unwrap_or_default()).collect();
        out += &(cells.join(",") + "\n");
    }
    out
}

fn scalars(json: Value) -> Rendered {
    let csv = json.as_object().map(|o| csv_table(&[o])).unwrap_or_default();
    Rendered { json, csv }
}

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Numerical(format!("could not serialize result: {e}")))
}

fn load_family(path: &PathBuf) -> Result<FunctionFamily> {
    read_json::<FamilyDocument>(path)?.family()
}

fn load_gaussian(arg: &str) -> Result<GaussianModel> {
    GaussianModel::from_spec(&json_or_path::<CovarianceSpec>(arg)?)
}

fn reports(reps: &[VerificationReport]) -> Result<Rendered> {
    Ok(Rendered { json: to_value(&reps)?, csv: reports_to_csv(reps) })
}

fn member_index(family: &FunctionFamily, name: &str) -> Result<usize> {
    family
        .index_of(name)
        .ok_or_else(|| invalid(format!("no function named `{name}` (available: {})", family.names().join(", "))))
}

/// Loaded inputs for `verify` and `sweep`.
enum Loaded {
    Discrete { family: FunctionFamily },
    Gaussian { model: GaussianModel },
}

fn load_model(args: &ModelArgs) -> Result<Loaded> {
    match args.target {
        TargetArg::Gaussian => {
            let cov = args.cov.as_deref().ok_or_else(|| invalid("target gaussian needs --cov"))?;
            Ok(Loaded::Gaussian { model: load_gaussian(cov)? })
        }
        _ => {
            let path = args.family.as_ref().ok_or_else(|| invalid("this target needs --family"))?;
            Ok(Loaded::Discrete { family: load_family(path)? })
        }
    }
}

fn sweep_model<'a>(args: &ModelArgs, loaded: &'a Loaded) -> Result<SweepModel<'a>> {
    Ok(match (args.target, loaded) {
        (TargetArg::Chernoff, Loaded::Discrete { family }) => {
            let name = args.f.as_deref().ok_or_else(|| invalid("target chernoff needs --f"))?;
            let i = member_index(family, name)?;
            SweepModel::Chernoff { dist: family.distribution(), f: family.member(i) }
        }
        (TargetArg::Corollary, Loaded::Discrete { family }) => {
            let name = args.f.as_deref().ok_or_else(|| invalid("target corollary needs --f"))?;
            let i = member_index(family, name)?;
            let j = match &args.g {
                Some(g) => member_index(family, g)?,
                None => family.zero_index(),
            };
            SweepModel::Corollary { family, i, j }
        }
        (TargetArg::TheoremMain, Loaded::Discrete { family }) => SweepModel::TheoremMain { family },
        (TargetArg::Gaussian, Loaded::Gaussian { model }) => {
            SweepModel::Gaussian { model, mesh: args.mesh, loose_projected: args.loose_projected }
        }
        _ => unreachable!("inputs are loaded per target"),
    })
}

fn dispatch(command: Command) -> Result<Rendered> {
    match command {
        Command::Trf { dist, f, r } => {
            let doc: FamilyDocument = read_json(&dist)?;
            let value = rate_bound_t(&cgf_discrete(&doc.distribution()?, &doc.function(&f)?)?, r)?;
            Ok(scalars(json!({ "function": f, "r": r, "value": value })))
        }
        Command::ClassWr { family, r } => {
            let family = load_family(&family)?;
            let value = family.class_wr(r)?;
            let differences = family.coefficients().difference_count();
            Ok(scalars(json!({ "r": r, "w_r": value, "differences": differences })))
        }
        Command::OrliczNorm { dist, f, gen } => {
            let doc: FamilyDocument = read_json(&dist)?;
            let generator: OrliczGenerator = json_or_path(&gen)?;
            let value = orlicz_norm(&doc.distribution()?, &doc.function(&f)?, &generator)?;
            Ok(scalars(json!({ "function": f, "generator": generator.label(), "value": value })))
        }
        Command::WrQuad { gen, r } => {
            let generator: OrliczGenerator = json_or_path(&gen)?;
            let value = wr_quadrature_bound(&generator, r)?;
            Ok(scalars(json!({ "generator": generator.label(), "r": r, "value": value })))
        }
        Command::WrExp { gen, r, m } => {
            let generator: OrliczGenerator = json_or_path(&gen)?;
            let (m, source) = match m {
                Some(m) => (m, "given"),
                None => (conversion_factor_m(&generator)?, "certified"),
            };
            let value = wr_exponential_type(&generator, m, r)?;
            Ok(scalars(json!({
                "generator": generator.label(), "r": r, "m": m, "m_source": source, "value": value
            })))
        }
        Command::GaussianBound { cov, direction, k, n, r, loose_projected } => {
            let model = load_gaussian(&cov)?;
            let d = model.dim();
            let f = if let Some(u) = direction.u {
                LinearFunctional::new(json_or_path(&u)?)?
            } else if let Some(i) = direction.basis {
                LinearFunctional::basis(d, i)?
            } else {
                let i = direction.eigen.unwrap_or(0);
                if i >= d {
                    return Err(invalid(format!("eigenvector index {i} outside dimension {d}")));
                }
                LinearFunctional::new(model.eigen().vector(i))?
            };
            let k = match k {
                Some(k) => k,
                None => optimal_rank(&model, n, r)?,
            };
            let bound = gaussian_instance_bound(&model, &f, k, n, r, loose_projected)?;
            let mut json = to_value(&bound)?;
            json["cgf_norm"] = json!(cgf_norm(&model, &f)?);
            Ok(scalars(json))
        }
        Command::ChainBound { family, n, r, k } => {
            let family = load_family(&family)?;
            let report = theorem_main_bound(&family, &build_deflation(&family, k), n, r)?;
            Ok(scalars(to_value(&report)?))
        }
        Command::Optimize { family, n, r, k } => {
            let family = load_family(&family)?;
            let opt = optimize_deflation(&family, n, r, &k)?;
            let json = to_value(&opt)?;
            let rows: Vec<&Map<String, Value>> =
                json["candidates"].as_array().into_iter().flatten().filter_map(Value::as_object).collect();
            let csv = csv_table(&rows);
            Ok(Rendered { json, csv })
        }
        Command::Verify { model, n, r, k, trials, seed, threshold_override } => {
            let loaded = load_model(&model)?;
            let k = match (&loaded, k) {
                (_, Some(k)) => k,
                (Loaded::Gaussian { model }, None) => optimal_rank(model, n, r)? as u32,
                (_, None) if matches!(model.target, TargetArg::TheoremMain) => {
                    return Err(invalid("target theorem-main needs --k"))
                }
                _ => 0,
            };
            let mut plan: TrialPlan = sweep_model(&model, &loaded)?.plan(n, r, k, trials, seed)?;
            if let Some(t) = threshold_override {
                let count = plan.thresholds().len();
                plan = plan.with_thresholds(vec![t; count])?;
            }
            reports(&[run_trials(&plan)?])
        }
        Command::Sweep { model, n, r, k, trials, seed } => {
            let loaded = load_model(&model)?;
            let grid = SweepGrid { n, r, k };
            reports(&sweep(sweep_model(&model, &loaded)?, &grid, trials, seed)?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let default_format = match cli.command {
        Command::Verify { .. } | Command::Sweep { .. } => Format::Csv,
        _ => Format::Json,
    };
    let format = cli.format.unwrap_or(default_format);
    let rendered = dispatch(cli.command)?;
    let text = match format {
        Format::Json => {
            serde_json::to_string_pretty(&rendered.json).map_err(|e| Error::Numerical(e.to_string()))? + "\n"
        }
        Format::Csv => rendered.csv,
    };
    match cli.output {
        Some(path) => {
            fs::write(&path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tailbound: {e}");
            match e {
                Error::Numerical(_) => ExitCode::from(1),
                Error::InvalidInput(_) | Error::UnsupportedGenerator(_) => ExitCode::from(2),
            }
        }
    }
}
