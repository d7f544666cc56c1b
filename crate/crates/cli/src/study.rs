//! The `report` command: true-tree recovery tables over priors, sequence
//! lengths and seeds.

use std::path::PathBuf;

use bct_core::simulate::{sample_sequence, GENERATOR};
use bct_core::trees::structural_distance;
use bct_core::{Analysis, InitialPolicy};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::output::{csv_float, emit, tree_leaves, Format, Report, Table};
use crate::{check_alpha, config, data, load_model, parse_prior, tree_space, usage, CliError};

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// `scenario-a`, `scenario-b` or a model file.
    #[arg(long)]
    model: String,
    /// Prior to evaluate; repeat for each row group.
    #[arg(long = "prior")]
    priors: Vec<String>,
    /// Sequence lengths, comma separated.
    #[arg(short = 'n', long = "lengths", value_delimiter = ',', required = true)]
    lengths: Vec<usize>,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seeds: Vec<u64>,
    #[arg(short = 'L', long = "depth")]
    depth: usize,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value = "repeat:0")]
    initial: String,
    /// Directory receiving table.csv, summary.csv and report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct Row {
    prior: String,
    n: usize,
    seed: u64,
    delta: usize,
    prior_prob: f64,
    posterior_prob: f64,
    log10_evidence: f64,
    #[serde(skip)]
    order: usize,
}

#[derive(Debug, Serialize)]
struct SummaryRow {
    prior: String,
    n: usize,
    runs: usize,
    exact_recovery: f64,
    mean_delta: f64,
    prior_prob: f64,
    mean_posterior: f64,
    mean_log10_evidence: f64,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

pub fn run(a: &ReportArgs) -> Result<(), CliError> {
    if a.priors.is_empty() {
        return Err(CliError::Usage("report needs at least one --prior".into()));
    }
    if a.seeds.is_empty() {
        return Err(CliError::Usage("report needs at least one seed".into()));
    }
    check_alpha(a.alpha)?;
    let (model, _) = load_model(&a.model)?;
    let alphabet = model.alphabet().clone();
    let initial = InitialPolicy::parse(&a.initial, &alphabet).map_err(usage)?;
    let model = model.with_initial(initial);
    let space = tree_space(alphabet.len(), a.depth)?;
    let priors = a
        .priors
        .iter()
        .map(|p| parse_prior(p, &alphabet, &space))
        .collect::<Result<Vec<_>, _>>()?;
    let truth = model.tree();

    let cells: Vec<(usize, u64)> = a
        .lengths
        .iter()
        .flat_map(|&n| a.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let mut rows: Vec<Row> = cells
        .par_iter()
        .map(|&(n, seed)| {
            let z = sample_sequence(&model, n, seed, &space).map_err(data)?;
            let analysis = Analysis::new(&z, &space, a.alpha).map_err(data)?;
            priors
                .iter()
                .enumerate()
                .map(|(order, f)| {
                    let s = analysis
                        .fit(f)
                        .and_then(|fit| fit.summary(Some(truth)))
                        .map_err(data)?;
                    let r = s.reference.expect("reference requested");
                    Ok(Row {
                        prior: f.to_string(),
                        n,
                        seed,
                        delta: structural_distance(truth, &s.map_tree),
                        prior_prob: r.prior_log_prob.value(),
                        posterior_prob: r.posterior_log_prob.value(),
                        log10_evidence: s.log10_evidence,
                        order,
                    })
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|r| (r.order, r.n, r.seed));

    let mut table = Table::new(&["F", "n", "seed", "delta", "prior", "posterior", "log10_evidence"]);
    for r in &rows {
        table.push(vec![
            r.prior.clone(),
            r.n.to_string(),
            r.seed.to_string(),
            r.delta.to_string(),
            csv_float(r.prior_prob),
            csv_float(r.posterior_prob),
            csv_float(r.log10_evidence),
        ]);
    }

    let mut summary = Vec::new();
    for group in rows.chunk_by(|x, y| (x.order, x.n) == (y.order, y.n)) {
        let k = group.len() as f64;
        let mean = |f: fn(&Row) -> f64| group.iter().map(f).sum::<f64>() / k;
        summary.push(SummaryRow {
            prior: group[0].prior.clone(),
            n: group[0].n,
            runs: group.len(),
            exact_recovery: mean(|r| (r.delta == 0) as u8 as f64),
            mean_delta: mean(|r| r.delta as f64),
            prior_prob: group[0].prior_prob,
            mean_posterior: mean(|r| r.posterior_prob),
            mean_log10_evidence: round2(mean(|r| r.log10_evidence)),
        });
    }
    let mut summary_table = Table::new(&[
        "F", "n", "runs", "exact_recovery", "mean_delta", "prior", "mean_posterior",
        "mean_log10_evidence",
    ]);
    for s in &summary {
        summary_table.push(vec![
            s.prior.clone(),
            s.n.to_string(),
            s.runs.to_string(),
            csv_float(s.exact_recovery),
            csv_float(s.mean_delta),
            csv_float(s.prior_prob),
            csv_float(s.mean_posterior),
            format!("{:.2}", s.mean_log10_evidence),
        ]);
    }

    let report = Report {
        command: "report",
        config: config(a),
        seed: json!(a.seeds),
        generator: Some(GENERATOR),
        result: json!({
            "true_tree": tree_leaves(truth, &alphabet),
            "rows": rows,
            "summary": summary,
        }),
        table: Table::default(),
    };

    std::fs::create_dir_all(&a.out_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", a.out_dir.display())))?;
    let table_path = a.out_dir.join("table.csv");
    let summary_path = a.out_dir.join("summary.csv");
    let json_path = a.out_dir.join("report.json");
    emit(&table.to_csv()?, Some(&table_path))?;
    emit(&summary_table.to_csv()?, Some(&summary_path))?;
    emit(&report.render(Format::Json)?, Some(&json_path))?;
    let listing = json!({ "files": [table_path, summary_path, json_path] });
    emit(&format!("{}\n", serde_json::to_string_pretty(&listing).map_err(data)?), None)
}
