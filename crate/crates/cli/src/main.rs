mod output;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use subag_core::bounds::{BoundSpec, BoundVariant};
use subag_core::cv::SchemeKind;
use subag_core::data::{Criterion, Dataset, Task, TaskKind};
use subag_core::learners::{shatter_coefficient, vc_lower_bound_in, HypothesisClass, Learner};
use subag_core::sim::{coverage_experiment, l1_experiment, majority_inequality_oracle, CoverageConfig, L1Config};
use subag_core::split_select::{select_split, BoundPair, SelectOptions};
use subag_core::subagging::{subag_fit, Aggregation, EstimateVariant, SubaggedEnsemble};

use output::{emit, num, writer, Format, Table};

#[derive(Parser, Debug)]
#[command(name = "subag", version, about = "Subagging, cross-validation estimates and their bounds")]
struct Cli {
    /// Master seed; overrides the seed of a simulation config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a bound over a deviation grid.
    Bounds(BoundsArgs),
    /// Cross-validated risk estimate on a dataset.
    Estimate(EstimateArgs),
    /// Fit a subagged ensemble and write it as JSON.
    SubagTrain(TrainArgs),
    /// Predict with a saved ensemble.
    SubagPredict(PredictArgs),
    /// Choose the test size by the bound-penalized estimate.
    SelectSplit(SelectArgs),
    /// Run a coverage or expectation experiment from a JSON config.
    Simulate(SimulateArgs),
    /// Exhaustively check the majority-vote inequalities.
    OracleMajority(OracleArgs),
    /// Shatter coefficient and VC search for a hypothesis class.
    Shatter(ShatterArgs),
}

#[derive(Args, Debug, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    variant: BoundVariant,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: Option<f64>,
    /// A value or a grid `start:stop:step`.
    #[arg(long)]
    eps: String,
    #[arg(long)]
    vc: Option<u32>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// CSV with columns x0..x{d-1} and y.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "classification")]
    task: String,
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Learner JSON, inline or a file path.
    #[arg(long)]
    learner: String,
    /// Scheme JSON, inline or a file path.
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value = "out")]
    variant: String,
    /// Loss or surrogate; defaults by task.
    #[arg(long)]
    criterion: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AggregationArg {
    Average,
    Majority,
}

#[derive(Args, Debug, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    learner: String,
    #[arg(long)]
    scheme: String,
    /// Defaults to majority for classification and average for regression.
    #[arg(long, value_enum)]
    aggregation: Option<AggregationArg>,
}

#[derive(Args, Debug, Serialize)]
struct PredictArgs {
    /// Ensemble JSON written by `subag-train`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with the same columns as the training data.
    #[arg(long)]
    data: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    learner: String,
    #[arg(long)]
    eta: f64,
    #[arg(long)]
    vc: u32,
    /// Bound pair: erm or sym.
    #[arg(long, default_value = "erm")]
    variant: String,
    #[arg(long)]
    criterion: Option<String>,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = subag_core::cv::DEFAULT_MAX_ENUM)]
    max_enum: u64,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Experiment JSON, inline or a file path.
    #[arg(long)]
    config: String,
    /// Exit with status 3 when a bound is exceeded beyond its slack.
    #[arg(long)]
    check: bool,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[arg(long, default_value_t = 4)]
    max_m: usize,
    #[arg(long = "max-n", default_value_t = 5)]
    max_n: usize,
}

#[derive(Args, Debug, Serialize)]
struct ShatterArgs {
    /// Hypothesis class JSON, inline or a file path.
    #[arg(long)]
    class: String,
    /// Use the points 0, 1, ..., n-1 on the class's feature.
    #[arg(long, conflicts_with = "data")]
    n: Option<usize>,
    /// Use the feature vectors of a CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Largest size tried by the VC search.
    #[arg(long, default_value_t = 8)]
    max_vc: usize,
    /// Exit with status 3 when the count exceeds (n+1)^vc.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
enum SimConfig {
    Coverage(CoverageConfig),
    L1(L1Config),
}

enum Failure {
    Config(String),
    Runtime(String),
    Violation(String),
}

impl From<subag_core::Error> for Failure {
    fn from(e: subag_core::Error) -> Self {
        match e {
            subag_core::Error::Config(_) | subag_core::Error::Domain(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Emitter<'a> {
    format: Format,
    output: Option<&'a Path>,
}

impl Emitter<'_> {
    fn emit(&self, command: &str, config: &impl Serialize, table: &Table, result: &Value) -> Outcome {
        let config = serde_json::to_value(config).map_err(|e| Failure::Runtime(e.to_string()))?;
        let mut out = writer(self.output)?;
        emit(&mut *out, self.format, command, &config, table, result)?;
        Ok(())
    }
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// Parses inline JSON, or reads it from a file.
fn load_json<T: DeserializeOwned>(what: &str, arg: &str) -> Result<T, Failure> {
    let t = arg.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| Failure::Config(format!("cannot read {what} `{arg}`: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid {what}: {e}")))
}

fn parse<T: std::str::FromStr<Err = subag_core::Error>>(s: &str) -> Result<T, Failure> {
    s.parse().map_err(Failure::from)
}

fn load_data(args: &DataArgs) -> Result<Dataset, Failure> {
    let kind: TaskKind = parse(&args.task)?;
    Dataset::read_csv_path(&args.data, kind).map_err(|e| match e {
        subag_core::Error::Io(io) => Failure::Config(format!("cannot read `{}`: {io}", args.data.display())),
        other => Failure::Config(other.to_string()),
    })
}

fn criterion_for(arg: &Option<String>, task: Task) -> Result<Criterion, Failure> {
    match arg {
        Some(s) => parse(s),
        None => Ok(match task {
            Task::Regression => "clipped-squared".parse()?,
            Task::Classification { .. } => Criterion::ZERO_ONE,
        }),
    }
}

/// A single value or `start:stop:step`, endpoints included.
fn eps_grid(s: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Config(format!("invalid eps `{s}`; expected a number or start:stop:step"));
    let parts: Vec<&str> = s.split(':').collect();
    let vals: Vec<f64> = parts.iter().map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    match vals[..] {
        [v] => Ok(vec![v]),
        [start, stop, step] => {
            if !(step > 0.0 && start <= stop && start.is_finite() && stop.is_finite()) {
                return Err(bad());
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(Failure::Config("eps grid has more than 10^6 points".into()));
            }
            // snap to 12 decimals so that 0.1 + 2 * 0.1 prints as 0.3
            Ok((0..count).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect())
        }
        _ => Err(bad()),
    }
}

fn bounds(args: &BoundsArgs, em: &Emitter) -> Outcome {
    let spec = BoundSpec {
        variant: args.variant,
        n: args.n,
        p: args.p,
        vc: args.vc,
        k: args.k,
        lambda: args.lambda,
        delta: args.delta,
        alpha: args.alpha,
        l: args.l,
        b: args.b,
        c: args.c,
    };
    let grid = eps_grid(&args.eps)?;
    let mut table = Table::new(&["eps", "value", "log_value", "branch"]);
    let mut rows = Vec::new();
    for eps in grid {
        let v = spec.evaluate(eps)?;
        table.push(vec![num(eps), num(v.value), num(v.log_value), v.branch.to_string()]);
        rows.push(json!({ "eps": eps, "bound": v }));
    }
    em.emit("bounds", args, &table, &Value::Array(rows))
}

fn estimate(args: &EstimateArgs, em: &Emitter) -> Outcome {
    let data = load_data(&args.data)?;
    let learner: Learner = load_json("learner", &args.learner)?;
    let scheme: SchemeKind = load_json("scheme", &args.scheme)?;
    let variant: EstimateVariant = parse(&args.variant)?;
    let criterion = criterion_for(&args.criterion, data.task())?;
    let scheme = scheme.over(data.len())?;
    let est = match variant {
        EstimateVariant::Out => subag_core::subagging::r_hat_cv_out(&learner, &data, &scheme, &criterion)?,
        EstimateVariant::In => subag_core::subagging::r_hat_cv_in(&learner, &data, &scheme, &criterion)?,
        EstimateVariant::Maj => subag_core::subagging::r_hat_cv_maj(&learner, &data, &scheme, &criterion)?,
    };
    let mut table = Table::new(&["variant", "value", "exact", "l", "members"]);
    table.push(vec![
        args.variant.clone(),
        num(est.value),
        est.exact.to_string(),
        est.l.map(|l| l.to_string()).unwrap_or_default(),
        est.per_member_errors.len().to_string(),
    ]);
    em.emit("estimate", args, &table, &to_value(&est))
}

fn default_aggregation(task: Task) -> Aggregation {
    if task.is_classification() {
        Aggregation::Majority
    } else {
        Aggregation::Average
    }
}

fn subag_train(args: &TrainArgs, em: &Emitter) -> Outcome {
    let data = load_data(&args.data)?;
    let learner: Learner = load_json("learner", &args.learner)?;
    let scheme: SchemeKind = load_json("scheme", &args.scheme)?;
    let aggregation = match args.aggregation {
        Some(AggregationArg::Average) => Aggregation::Average,
        Some(AggregationArg::Majority) => Aggregation::Majority,
        None => default_aggregation(data.task()),
    };
    let ens = subag_fit(&learner, &data, &scheme.over(data.len())?, aggregation)?;
    let mut out = writer(em.output)?;
    serde_json::to_writer(&mut *out, &ens).map_err(|e| Failure::Runtime(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn subag_predict(args: &PredictArgs, em: &Emitter) -> Outcome {
    let text = fs::read_to_string(&args.model)
        .map_err(|e| Failure::Config(format!("cannot read `{}`: {e}", args.model.display())))?;
    let ens: SubaggedEnsemble =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("invalid model: {e}")))?;
    let kind = match ens.task {
        Task::Regression => TaskKind::Regression,
        Task::Classification { .. } => TaskKind::Classification,
    };
    let data = Dataset::read_csv_path(&args.data, kind).map_err(|e| Failure::Config(e.to_string()))?;
    let mut table = Table::new(&["index", "prediction"]);
    let mut preds = Vec::new();
    for (i, s) in data.samples().iter().enumerate() {
        let y = ens.predict(&s.x)?;
        table.push(vec![i.to_string(), y.to_string()]);
        preds.push(y);
    }
    em.emit("subag-predict", args, &table, &to_value(&preds))
}

fn select(args: &SelectArgs, em: &Emitter, seed: u64) -> Outcome {
    let data = load_data(&args.data)?;
    let learner: Learner = load_json("learner", &args.learner)?;
    let options = SelectOptions {
        pair: parse::<BoundPair>(&args.variant)?,
        criterion: criterion_for(&args.criterion, data.task())?,
        max_enum: args.max_enum,
        draws: args.draws,
        seed,
    };
    let t = select_split(&learner, &data, args.eta, args.vc, &options)?;
    let mut table =
        Table::new(&["k", "p", "r_hat_out", "exact", "log_delta_nk", "delta_nk", "f_value", "f_branch", "objective"]);
    for r in &t.rows {
        table.push(vec![
            r.k.to_string(),
            num(r.p),
            num(r.r_hat_out),
            r.exact.to_string(),
            num(r.log_delta_nk),
            num(r.delta_nk),
            num(r.f_value),
            r.f_branch.to_string(),
            num(r.objective),
        ]);
    }
    let summary = json!({ "k_star": t.k_star, "p_star": t.p_star });
    #[derive(Serialize)]
    struct Echo<'a> {
        #[serde(flatten)]
        args: &'a SelectArgs,
        seed: u64,
    }
    let echo = Echo { args, seed };
    if em.format == Format::Csv {
        if em.output.is_some() {
            println!("{summary}");
        } else {
            table.trailer.push(summary.to_string());
        }
    }
    em.emit("select-split", &echo, &table, &to_value(&t))
}

fn simulate(args: &SimulateArgs, em: &Emitter, seed: Option<u64>) -> Outcome {
    let mut cfg: SimConfig = load_json("simulation config", &args.config)?;
    if let Some(s) = seed {
        match &mut cfg {
            SimConfig::Coverage(c) => c.seed = s,
            SimConfig::L1(c) => c.seed = s,
        }
    }
    let violated = match &cfg {
        SimConfig::Coverage(c) => {
            let report = coverage_experiment(c)?;
            let mut table =
                Table::new(&["eps", "empirical_freq", "bound_value", "bound_branch", "margin", "slack", "holds"]);
            for r in &report.rows {
                table.push(vec![
                    num(r.eps),
                    num(r.empirical_freq),
                    num(r.bound_value),
                    r.bound_branch.to_string(),
                    num(r.margin),
                    num(r.slack),
                    r.holds.to_string(),
                ]);
            }
            table.trailer.push(format!(
                "replicates={} ghost={} mean_deviation={} approximate_scheme={}",
                report.replicates,
                report.ghost,
                num(report.mean_deviation),
                report.approximate_scheme
            ));
            em.emit("simulate", &cfg, &table, &to_value(&report))?;
            !report.all_hold()
        }
        SimConfig::L1(c) => {
            let report = l1_experiment(c)?;
            let mut table = Table::new(&["mean", "se", "bound", "holds", "erm_bound", "holds_erm"]);
            table.push(vec![
                num(report.mean),
                num(report.se),
                num(report.bound),
                report.holds.to_string(),
                report.erm_bound.map(num).unwrap_or_default(),
                report.holds_erm.map(|h| h.to_string()).unwrap_or_default(),
            ]);
            em.emit("simulate", &cfg, &table, &to_value(&report))?;
            !report.holds || report.holds_erm == Some(false)
        }
    };
    if args.check && violated {
        return Err(Failure::Violation("a bound was exceeded beyond its slack".into()));
    }
    Ok(())
}

fn oracle(args: &OracleArgs, em: &Emitter) -> Outcome {
    let v = majority_inequality_oracle(args.max_m, args.max_n)?;
    let mut table = Table::new(&["max_m", "max_n", "matrices_checked", "passed", "counterexample"]);
    let cex = v
        .counterexample
        .as_ref()
        .map(|(m, which)| {
            let bits: String = m.entries.iter().map(|&e| if e { '1' } else { '0' }).collect();
            format!("{}x{}:{bits}:{}", m.rows, m.members, to_value(which).as_str().unwrap_or(""))
        })
        .unwrap_or_default();
    table.push(vec![
        v.max_m.to_string(),
        v.max_n.to_string(),
        v.matrices_checked.to_string(),
        v.passed().to_string(),
        cex,
    ]);
    em.emit("oracle-majority", args, &table, &to_value(&v))?;
    if v.passed() {
        Ok(())
    } else {
        Err(Failure::Violation("counterexample found".into()))
    }
}

fn shatter(args: &ShatterArgs, em: &Emitter) -> Outcome {
    let class: HypothesisClass = load_json("hypothesis class", &args.class)?;
    class.validate()?;
    let dim_needed = match &class {
        HypothesisClass::HalfLine { feature }
        | HypothesisClass::Stump { feature }
        | HypothesisClass::Interval { feature } => feature + 1,
        HypothesisClass::Histogram { .. } => 1,
    };
    let points: Vec<Vec<f64>> = match (&args.n, &args.data) {
        (Some(n), None) => (0..*n)
            .map(|i| {
                let mut p = vec![0.0; dim_needed];
                for v in &mut p {
                    *v = match class {
                        // spread the points over the histogram range
                        HypothesisClass::Histogram { lo, hi, .. } => lo + (hi - lo) * (i as f64 + 0.5) / *n as f64,
                        _ => i as f64,
                    };
                }
                p
            })
            .collect(),
        (None, Some(path)) => {
            let data =
                Dataset::read_csv_path(path, TaskKind::Regression).map_err(|e| Failure::Config(e.to_string()))?;
            data.samples().iter().map(|s| s.x.clone()).collect()
        }
        _ => return Err(Failure::Config("give exactly one of --n and --data".into())),
    };
    let dim = points.first().map_or(dim_needed, Vec::len);
    let count = shatter_coefficient(&class, &points)?;
    let declared = class.declared_vc(dim)?;
    let lower = vc_lower_bound_in(&class, dim, args.max_vc)?;
    let n = points.len();
    let sauer = ((n + 1) as f64).powi(declared as i32);
    let within = (count as f64) <= sauer;
    let mut table =
        Table::new(&["points", "shatter_coefficient", "declared_vc", "vc_lower_bound", "sauer_bound", "within_sauer"]);
    table.push(vec![
        n.to_string(),
        count.to_string(),
        declared.to_string(),
        lower.to_string(),
        num(sauer),
        within.to_string(),
    ]);
    let result = json!({
        "points": n,
        "shatter_coefficient": count,
        "declared_vc": declared,
        "vc_lower_bound": lower,
        "sauer_bound": sauer,
        "within_sauer": within,
    });
    em.emit("shatter", args, &table, &result)?;
    if args.check && (!within || lower > declared) {
        return Err(Failure::Violation("shatter count exceeds the declared VC dimension".into()));
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let em = Emitter { format: cli.format, output: cli.output.as_deref() };
    match &cli.command {
        Command::Bounds(a) => bounds(a, &em),
        Command::Estimate(a) => estimate(a, &em),
        Command::SubagTrain(a) => subag_train(a, &em),
        Command::SubagPredict(a) => subag_predict(a, &em),
        Command::SelectSplit(a) => select(a, &em, cli.seed.unwrap_or(0)),
        Command::Simulate(a) => simulate(a, &em, cli.seed),
        Command::OracleMajority(a) => oracle(a, &em),
        Command::Shatter(a) => shatter(a, &em),
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
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("violation: {m}");
            ExitCode::from(3)
        }
    }
}
