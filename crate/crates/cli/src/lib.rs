//! The `bct` command line: argument parsing and one handler per subcommand.
//!
//! Exit codes: 0 on success, 2 for usage errors (bad flags, malformed prior
//! specs, invalid parameters), 1 for data errors (unreadable or invalid
//! input files, sequences too short, non-normalizable priors).

mod output;
mod study;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use bct_core::engine::prior_prob;
use bct_core::inference::Comparison;
use bct_core::simulate::{builtin_model, parse_model_file, sample_sequence, GENERATOR};
use bct_core::symbols::load_sequence;
use bct_core::trees::{parse_tree_file, structural_distance, DEFAULT_NODE_BUDGET};
use bct_core::{
    Alphabet, Analysis, ContextTree, InitialPolicy, NodeWeightFunction, Sequence, SequenceFormat,
    SelectionTrace, TransitionModel, TreeSpace,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use output::{csv_float, emit, log_prob, tree_label, tree_leaves, Format, Report, Table};

pub use output::{round_sig, SIGNIFICANT_DIGITS};

/// Environment variable overriding the maximal-tree node budget.
pub const NODE_BUDGET_VAR: &str = "BCT_NODE_BUDGET";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 1,
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "bct", version, about = "Bayesian context-tree inference for discrete sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model evidence and MAP tree under one prior.
    Evidence(EvidenceArgs),
    /// MAP tree under one prior, optionally written as a tree file.
    Map(MapArgs),
    /// Posterior probability of a given tree.
    Posterior(PosteriorArgs),
    /// Prior probability of a given tree (no data needed).
    Prior(PriorArgs),
    /// Bayes factor of one prior against another.
    Bf(BfArgs),
    /// Sequential maximal-depth selection.
    SelectDepth(SelectDepthArgs),
    /// Depth selection per candidate prior, then a scan over candidates.
    SelectModel(SelectModelArgs),
    /// Structural distance between two tree files.
    Distance(DistanceArgs),
    /// Sample a sequence from a built-in or file model.
    Simulate(SimulateArgs),
    /// Simulation study tables over priors, lengths and seeds.
    Report(study::ReportArgs),
}

#[derive(Debug, Args, Serialize)]
struct SpaceArgs {
    /// Alphabet symbols in code order, e.g. `01` or `acgt`.
    #[arg(long, default_value = "01")]
    alphabet: String,
    /// Maximal context depth L.
    #[arg(short = 'L', long = "depth")]
    depth: usize,
}

#[derive(Debug, Args, Serialize)]
struct DataArgs {
    /// Sequence file.
    #[arg(long)]
    data: PathBuf,
    /// `chars` (one symbol per character) or `csv-int` (integer codes).
    #[arg(long, default_value = "chars")]
    data_format: SequenceFormat,
    /// Dirichlet hyper-parameter.
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    alpha: f64,
}

#[derive(Debug, Args, Serialize)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Report path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EvidenceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Prior specification, e.g. `ctw` or `target:8,3*depth:5`.
    #[arg(long)]
    prior: String,
    /// Reference tree file whose prior and posterior are also reported.
    #[arg(long)]
    tree: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct MapArgs {
    #[command(flatten)]
    #[serde(flatten)]
    inner: EvidenceArgs,
    /// Write the MAP tree here in tree-file format.
    #[arg(long)]
    tree_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct PosteriorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    #[arg(long)]
    prior: String,
    #[arg(long)]
    tree: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct PriorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    prior: String,
    #[arg(long)]
    tree: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct BfArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Numerator prior.
    #[arg(long)]
    prior: String,
    /// Denominator prior.
    #[arg(long)]
    versus: String,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SelectDepthArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Switch to the smaller depth when log10 BF(current, smaller) is below this.
    #[arg(short = 'c', long = "threshold", default_value_t = 0.0, allow_hyphen_values = true)]
    threshold: f64,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SelectModelArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    #[command(flatten)]
    #[serde(flatten)]
    data: DataArgs,
    /// Candidate prior; repeat for each candidate, in scan order.
    #[arg(long = "prior")]
    priors: Vec<String>,
    /// Depth-selection threshold.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    c1: f64,
    /// Candidate-scan threshold.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    c2: f64,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct DistanceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    space: SpaceArgs,
    first: PathBuf,
    second: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// `scenario-a`, `scenario-b` or a model file.
    #[arg(long)]
    model: String,
    /// Sequence length.
    #[arg(short = 'n', long = "length")]
    length: usize,
    /// Maximal depth; the model's own depth when omitted.
    #[arg(short = 'L', long = "depth")]
    depth: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// First-L symbols: `repeat:SYM`, `given:SYMBOLS` or `uniform`.
    #[arg(long, default_value = "repeat:0")]
    initial: String,
    /// Sequence path; the sequence goes to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also write the JSON run report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("bct: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Evidence(a) => finish(evidence(&a, "evidence", None)?, &a.out),
        Command::Map(a) => finish(evidence(&a.inner, "map", a.tree_out.as_deref())?, &a.inner.out),
        Command::Posterior(a) => finish(posterior(&a)?, &a.out),
        Command::Prior(a) => finish(prior(&a)?, &a.out),
        Command::Bf(a) => finish(bayes_factor(&a)?, &a.out),
        Command::SelectDepth(a) => finish(select_depth(&a)?, &a.out),
        Command::SelectModel(a) => finish(select_model(&a)?, &a.out),
        Command::Distance(a) => finish(distance(&a)?, &a.out),
        Command::Simulate(a) => simulate(&a),
        Command::Report(a) => study::run(&a),
    }
}

fn finish(report: Report, out: &OutputArgs) -> Result<(), CliError> {
    emit(&report.render(out.format)?, out.output.as_deref())
}

fn config<T: Serialize>(args: &T) -> Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn node_budget() -> Result<usize, CliError> {
    match std::env::var(NODE_BUDGET_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{NODE_BUDGET_VAR}={v} is not a node count"))),
        Err(_) => Ok(DEFAULT_NODE_BUDGET),
    }
}

fn tree_space(m: usize, depth: usize) -> Result<TreeSpace, CliError> {
    TreeSpace::with_node_budget(m, depth, node_budget()?).map_err(usage)
}

fn resolve_space(args: &SpaceArgs) -> Result<(Alphabet, TreeSpace), CliError> {
    let alphabet: Alphabet = args.alphabet.parse().map_err(usage)?;
    let space = tree_space(alphabet.len(), args.depth)?;
    Ok((alphabet, space))
}

fn parse_prior(spec: &str, alphabet: &Alphabet, space: &TreeSpace) -> Result<NodeWeightFunction, CliError> {
    NodeWeightFunction::parse(spec, alphabet, space)
        .map_err(|e| CliError::Usage(format!("prior `{spec}`: {e}")))
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha must be positive and finite, got {alpha}")))
    }
}

fn load_data(args: &DataArgs, alphabet: &Alphabet, space: &TreeSpace) -> Result<Analysis, CliError> {
    check_alpha(args.alpha)?;
    let z: Sequence = load_sequence(&args.data, alphabet, args.data_format).map_err(data)?;
    Analysis::new(&z, space, args.alpha).map_err(data)
}

fn load_tree(path: &Path, alphabet: &Alphabet, space: &TreeSpace) -> Result<ContextTree, CliError> {
    parse_tree_file(path, alphabet, space).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn data_fields(analysis: &Analysis) -> Value {
    json!({
        "transitions": analysis.counts().transitions(),
        "length": analysis.counts().transitions() + analysis.space().depth(),
    })
}

fn evidence(a: &EvidenceArgs, command: &'static str, tree_out: Option<&Path>) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    let f = parse_prior(&a.prior, &alphabet, &space)?;
    let reference = a.tree.as_deref().map(|p| load_tree(p, &alphabet, &space)).transpose()?;
    let analysis = load_data(&a.data, &alphabet, &space)?;
    let summary = analysis
        .fit(&f)
        .and_then(|fit| fit.summary(reference.as_ref()))
        .map_err(data)?;

    if let Some(path) = tree_out {
        std::fs::write(path, summary.map_tree.to_tree_file(&alphabet))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    }

    let map_log10 = summary.map_log_posterior / std::f64::consts::LN_10;
    let reference_json = summary.reference.as_ref().map(|r| {
        json!({
            "tree": tree_leaves(&r.tree, &alphabet),
            "prior": log_prob(r.prior_log_prob),
            "posterior": log_prob(r.posterior_log_prob),
            "distance_to_map": structural_distance(&r.tree, &summary.map_tree),
        })
    });
    let result = json!({
        "prior": f.to_string(),
        "alpha": analysis.alpha(),
        "data": data_fields(&analysis),
        "log_evidence": summary.log_evidence,
        "log10_evidence": summary.log10_evidence,
        "map_tree": tree_leaves(&summary.map_tree, &alphabet),
        "map_leaf_count": summary.map_tree.leaf_count(),
        "map_depth": summary.map_tree.depth(),
        "map_log_posterior": summary.map_log_posterior,
        "map_log10_posterior": map_log10,
        "map_tie": summary.map_tie,
        "reference": reference_json,
    });

    let mut header = vec![
        "prior", "log_evidence", "log10_evidence", "map_tree", "map_log_posterior",
        "map_log10_posterior", "map_tie",
    ];
    let mut row = vec![
        f.to_string(),
        csv_float(summary.log_evidence),
        csv_float(summary.log10_evidence),
        tree_label(&summary.map_tree, &alphabet),
        csv_float(summary.map_log_posterior),
        csv_float(map_log10),
        summary.map_tie.to_string(),
    ];
    if let Some(r) = &summary.reference {
        header.extend(["reference_prior", "reference_posterior", "reference_distance"]);
        row.extend([
            csv_float(r.prior_log_prob.value()),
            csv_float(r.posterior_log_prob.value()),
            structural_distance(&r.tree, &summary.map_tree).to_string(),
        ]);
    }
    let mut table = Table::new(&header);
    table.push(row);

    let mut cfg = config(a);
    if let Some(path) = tree_out {
        cfg["tree_out"] = json!(path);
    }
    Ok(Report {
        command,
        config: cfg,
        seed: Value::Null,
        generator: None,
        result,
        table,
    })
}

fn probability_table(prior: &str, tree: &str, p: bct_core::LogWeight) -> Table {
    let mut t = Table::new(&["prior", "tree", "probability", "ln", "log10"]);
    t.push(vec![
        prior.to_string(),
        tree.to_string(),
        csv_float(p.value()),
        p.ln().map(csv_float).unwrap_or_default(),
        p.log10().map(csv_float).unwrap_or_default(),
    ]);
    t
}

fn posterior(a: &PosteriorArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    let f = parse_prior(&a.prior, &alphabet, &space)?;
    let tree = load_tree(&a.tree, &alphabet, &space)?;
    let analysis = load_data(&a.data, &alphabet, &space)?;
    let fit = analysis.fit(&f).map_err(data)?;
    let p = fit.posterior_prob(&tree).map_err(data)?;
    Ok(Report {
        command: "posterior",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result: json!({
            "prior": f.to_string(),
            "alpha": analysis.alpha(),
            "data": data_fields(&analysis),
            "tree": tree_leaves(&tree, &alphabet),
            "posterior": log_prob(p),
            "log_evidence": fit.log_evidence(),
            "log10_evidence": fit.log10_evidence(),
        }),
        table: probability_table(&f.to_string(), &tree_label(&tree, &alphabet), p),
    })
}

fn prior(a: &PriorArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    let f = parse_prior(&a.prior, &alphabet, &space)?;
    let tree = load_tree(&a.tree, &alphabet, &space)?;
    let p = prior_prob(&f, &tree).map_err(data)?;
    Ok(Report {
        command: "prior",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result: json!({
            "prior": f.to_string(),
            "tree": tree_leaves(&tree, &alphabet),
            "probability": log_prob(p),
        }),
        table: probability_table(&f.to_string(), &tree_label(&tree, &alphabet), p),
    })
}

fn bayes_factor(a: &BfArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    let f = parse_prior(&a.prior, &alphabet, &space)?;
    let g = parse_prior(&a.versus, &alphabet, &space)?;
    let analysis = load_data(&a.data, &alphabet, &space)?;
    let report = analysis.bayes_factor(&f, &g).map_err(data)?;
    let ln_bf = report.log10_bf * std::f64::consts::LN_10;
    let mut result = serde_json::to_value(&report).expect("report serializes");
    result["ln_bf"] = json!(ln_bf);
    result["data"] = data_fields(&analysis);

    let mut table = Table::new(&["numerator", "denominator", "log10_bf", "ln_bf", "interpretation"]);
    table.push(vec![
        report.numerator_model.clone(),
        report.denominator_model.clone(),
        csv_float(report.log10_bf),
        csv_float(ln_bf),
        report.interpretation.to_string(),
    ]);
    Ok(Report {
        command: "bf",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result,
        table,
    })
}

fn trace_table(trace: &SelectionTrace, labels: &[String]) -> Table {
    let mut t = Table::new(&[
        "step", "stage", "candidate", "incumbent", "tested", "log10_bf", "switched",
    ]);
    for (i, step) in trace.steps.iter().enumerate() {
        let (stage, candidate, incumbent, tested) = match &step.comparison {
            Comparison::Depth {
                candidate,
                incumbent,
                tested,
            } => ("depth", labels[*candidate].clone(), incumbent.to_string(), tested.to_string()),
            Comparison::Model { incumbent, tested } => (
                "model",
                String::new(),
                labels[*incumbent].clone(),
                labels[*tested].clone(),
            ),
        };
        t.push(vec![
            (i + 1).to_string(),
            stage.into(),
            candidate,
            incumbent,
            tested,
            csv_float(step.log10_bf),
            step.switched.to_string(),
        ]);
    }
    t
}

fn select_depth(a: &SelectDepthArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    if a.threshold.is_nan() {
        return Err(CliError::Usage("threshold must be a number".into()));
    }
    let analysis = load_data(&a.data, &alphabet, &space)?;
    let (depth, trace) = analysis.select_depth(a.threshold).map_err(data)?;
    let unity = NodeWeightFunction::unity(&space);
    let profile = analysis.depth_profile(&unity).map_err(data)?;
    let table = trace_table(&trace, &["unity".to_string()]);
    Ok(Report {
        command: "select-depth",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result: json!({
            "depth": depth,
            "threshold": a.threshold,
            "alpha": analysis.alpha(),
            "data": data_fields(&analysis),
            "log10_evidence_by_depth": profile,
            "trace": trace,
        }),
        table,
    })
}

fn select_model(a: &SelectModelArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    if a.priors.is_empty() {
        return Err(CliError::Usage("select-model needs at least one --prior".into()));
    }
    if a.c1.is_nan() || a.c2.is_nan() {
        return Err(CliError::Usage("thresholds must be numbers".into()));
    }
    let candidates = a
        .priors
        .iter()
        .map(|p| parse_prior(p, &alphabet, &space))
        .collect::<Result<Vec<_>, _>>()?;
    let analysis = load_data(&a.data, &alphabet, &space)?;
    let sel = analysis.select_model(&candidates, a.c1, a.c2).map_err(data)?;
    let labels: Vec<String> = candidates.iter().map(ToString::to_string).collect();
    Ok(Report {
        command: "select-model",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result: json!({
            "best": sel.best,
            "best_prior": labels[sel.best],
            "depth": sel.depth,
            "selected": sel.function.to_string(),
            "log10_evidence": sel.log10_evidence,
            "log_evidence": sel.log10_evidence * std::f64::consts::LN_10,
            "alpha": analysis.alpha(),
            "data": data_fields(&analysis),
            "candidates": sel.candidates,
            "trace": sel.trace,
        }),
        table: trace_table(&sel.trace, &labels),
    })
}

fn distance(a: &DistanceArgs) -> Result<Report, CliError> {
    let (alphabet, space) = resolve_space(&a.space)?;
    let first = load_tree(&a.first, &alphabet, &space)?;
    let second = load_tree(&a.second, &alphabet, &space)?;
    let d = structural_distance(&first, &second);
    let mut table = Table::new(&["first", "second", "distance"]);
    table.push(vec![tree_label(&first, &alphabet), tree_label(&second, &alphabet), d.to_string()]);
    Ok(Report {
        command: "distance",
        config: config(a),
        seed: Value::Null,
        generator: None,
        result: json!({
            "distance": d,
            "first": tree_leaves(&first, &alphabet),
            "second": tree_leaves(&second, &alphabet),
        }),
        table,
    })
}

/// Built-in name or model file; returns the model and its natural depth.
fn load_model(spec: &str) -> Result<(TransitionModel, usize), CliError> {
    match builtin_model(spec) {
        Ok(model) => {
            let depth = model.tree().depth();
            Ok((model, depth))
        }
        Err(_) if !spec.starts_with("scenario-") || Path::new(spec).exists() => {
            parse_model_file(Path::new(spec)).map_err(|e| CliError::Data(format!("{spec}: {e}")))
        }
        Err(e) => Err(usage(e)),
    }
}

fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let (model, natural_depth) = load_model(&a.model)?;
    let depth = a.depth.unwrap_or(natural_depth);
    let initial = InitialPolicy::parse(&a.initial, model.alphabet()).map_err(usage)?;
    let model = model.with_initial(initial);
    let space = tree_space(model.alphabet().len(), depth)?;
    let z = sample_sequence(&model, a.length, a.seed, &space).map_err(data)?;

    let text = z.to_text();
    match &a.output {
        Some(path) => emit(&text, Some(path))?,
        None => emit(&format!("{text}\n"), None)?,
    }
    if let Some(path) = &a.report {
        let mut cfg = config(a);
        cfg["depth"] = json!(depth);
        cfg["alphabet"] = json!(model.alphabet().to_string());
        let report = Report {
            command: "simulate",
            config: cfg,
            seed: json!(a.seed),
            generator: Some(GENERATOR),
            result: json!({
                "length": z.len(),
                "tree": tree_leaves(model.tree(), model.alphabet()),
                "initial": model.initial().render(model.alphabet()),
                "output": a.output,
            }),
            table: Table::default(),
        };
        emit(&report.render(Format::Json)?, Some(path))?;
    }
    Ok(())
}
