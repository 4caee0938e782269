//! Command-line verbs, one per pipeline stage, plus `serve` and `run`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rigor_core::adapters::AdapterSpec;
use rigor_core::detectors::{builtin, Criterion, BUILTIN_IDS};
use rigor_core::ensemble::{extract_boolean_rule, stability_analysis, train, ModelFamily, StabilityConfig, TrainConfig};
use rigor_core::pipeline::{
    self, gold_standard, load_matrix, run_pipeline, stored_report, EvaluateOptions, Layout, PipelineConfig,
    SampleSettings,
};
use rigor_core::report::ReportFormat;
use serde_json::json;

use crate::api::{self, AppState};

#[derive(Debug, Parser)]
#[command(name = "rigor", version, about = "Screen full texts for rigor criteria and evaluate the tools that do it")]
pub struct Cli {
    /// Pipeline configuration (JSON). Flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// State directory holding results, queues, labels and reports.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CriterionArg {
    #[arg(long)]
    pub criterion: Criterion,
    /// Overrides the configured seed for this stage.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a directory of JATS files and write the corpus manifest.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Keep a seeded random sample of this many papers.
        #[arg(long)]
        sample: Option<usize>,
        /// Restrict to ids with this prefix before sampling.
        #[arg(long)]
        prefix: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run built-in detectors over the ingested corpus.
    Detect {
        /// Detector ids; defaults to the configured set, else all built-ins.
        #[arg(long = "detector")]
        detectors: Vec<String>,
    },
    /// Import one external tool's output through an adapter spec.
    Import {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        source: PathBuf,
    },
    /// Build the blinded disagreement queue for a criterion.
    Queue(CriterionArg),
    /// Draw the control set and shuffle it into the queue.
    Controls {
        #[command(flatten)]
        target: CriterionArg,
        #[arg(long)]
        size: Option<usize>,
    },
    /// Serve the curation API.
    Serve {
        #[arg(long, env = "RIGOR_PORT")]
        port: Option<u16>,
    },
    /// Assemble the gold standard, score tools and ensemble, write reports.
    Evaluate {
        #[command(flatten)]
        target: CriterionArg,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Train the ensemble on the gold standard and print its rule and stability.
    Ensemble {
        #[command(flatten)]
        target: CriterionArg,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        fraction: Option<f64>,
    },
    /// Print a stored report.
    Report {
        #[arg(long)]
        criterion: Criterion,
        #[arg(long, default_value = "md")]
        format: ReportFormat,
    },
    /// Run every stage; stops with the remaining items if curation is open.
    Run,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::from_json_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    Ok(config)
}

/// Runs one verb. Text meant for the user is returned rather than printed so
/// callers can route it.
pub fn execute(cli: Cli) -> Result<String> {
    let mut config = load_config(&cli)?;
    let layout = Layout::new(&config.output_dir);
    let pretty = |v: serde_json::Value| serde_json::to_string_pretty(&v).expect("json value") + "\n";
    Ok(match cli.command {
        Command::Ingest {
            corpus,
            sample,
            prefix,
            seed,
        } => {
            let dir = corpus
                .or(config.corpus_dir.clone())
                .context("no corpus directory: pass --corpus or set corpus_dir")?;
            let settings = match (sample, config.sample.clone()) {
                (Some(n), _) => Some(SampleSettings { n, prefix }),
                (None, Some(mut s)) => {
                    s.prefix = prefix.or(s.prefix);
                    Some(s)
                }
                (None, None) => None,
            };
            let summary = pipeline::ingest(&layout, &dir, settings.as_ref(), seed.unwrap_or(config.seeds.sample))?;
            for (path, reason) in &summary.excluded {
                tracing::warn!(path = %path.display(), %reason, "excluded");
            }
            pretty(json!({ "documents": summary.documents, "excluded": summary.excluded.len() }))
        }
        Command::Detect { detectors } => {
            let ids: Vec<String> = if !detectors.is_empty() {
                detectors
            } else if !config.detectors.is_empty() {
                config.detectors.clone()
            } else {
                BUILTIN_IDS.iter().map(|s| s.to_string()).collect()
            };
            let oc = config.open_code_config()?;
            let set = ids.iter().map(|id| builtin(id, &oc)).collect::<Result<Vec<_>, _>>()?;
            let written = pipeline::detect(&layout, &set)?;
            pretty(json!(written))
        }
        Command::Import { spec, source } => {
            let spec = AdapterSpec::from_json_file(&spec)?;
            let n = pipeline::import(&layout, &spec, &source)?;
            pretty(json!({ "tool": spec.tool, "criterion": spec.criterion, "verdicts": n }))
        }
        Command::Queue(t) => {
            let items = pipeline::build_queue(
                &layout,
                t.criterion,
                t.seed.unwrap_or(config.seeds.queue),
                &config.link_template,
            )?;
            pretty(json!({ "criterion": t.criterion, "items": items.len() }))
        }
        Command::Controls { target, size } => {
            let summary = pipeline::add_controls(
                &layout,
                target.criterion,
                target.seed.unwrap_or(config.seeds.controls),
                size.unwrap_or(config.control_size),
                &config.link_template,
            )?;
            pretty(json!(summary))
        }
        Command::Serve { port } => {
            let port = port.unwrap_or(config.port);
            let state = AppState::open(layout)?;
            tokio::runtime::Runtime::new()?.block_on(api::serve(state, port))?;
            String::new()
        }
        Command::Evaluate { target, format } => {
            if let Some(seed) = target.seed {
                config.seeds.ensemble = seed;
            }
            let opts = EvaluateOptions {
                ensemble: config.ensemble.clone(),
                seeds: config.seeds,
                tool_order: config.tool_order.get(&target.criterion).cloned(),
            };
            pipeline::evaluate(&layout, target.criterion, &opts)?;
            stored_report(&layout, target.criterion, format)?.context("report was not written")?
        }
        Command::Ensemble {
            target,
            trials,
            fraction,
        } => ensemble_summary(&layout, &config, &target, trials, fraction)?,
        Command::Report { criterion, format } => match stored_report(&layout, criterion, format)? {
            Some(text) => text,
            None => bail!("no report for {criterion} yet; run `rigor evaluate --criterion {criterion}`"),
        },
        Command::Run => {
            let reports = run_pipeline(&config)?;
            let done: BTreeMap<String, Option<String>> = reports
                .iter()
                .map(|r| (r.criterion.to_string(), r.rule.clone()))
                .collect();
            pretty(json!({ "evaluated": done }))
        }
    })
}

fn ensemble_summary(
    layout: &Layout,
    config: &PipelineConfig,
    target: &CriterionArg,
    trials: Option<usize>,
    fraction: Option<f64>,
) -> Result<String> {
    let matrix = load_matrix(layout, target.criterion)?;
    let truth = gold_standard(layout, target.criterion)?.truth();
    let tools = config
        .tool_order
        .get(&target.criterion)
        .cloned()
        .unwrap_or_else(|| matrix.tools.clone());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (pmcid, row) in matrix.complete_rows() {
        if let Some(&label) = truth.get(pmcid) {
            xs.push(tools.iter().map(|t| row[matrix.tool_index(t).expect("tool from matrix")]).collect());
            ys.push(label);
        }
    }
    let seed = target.seed.unwrap_or(config.seeds.ensemble);
    let train_cfg = TrainConfig {
        family: config.ensemble.family,
        c: config.ensemble.c,
        ..TrainConfig::default()
    };
    let model = train(&xs, &ys, &tools, seed, &train_cfg)?;
    let rule = extract_boolean_rule(&model)?;
    let stability = stability_analysis(
        &xs,
        &ys,
        &tools,
        &StabilityConfig {
            fraction: fraction.unwrap_or(config.ensemble.fraction),
            trials: trials.unwrap_or(config.ensemble.trials),
            seed,
            train: train_cfg,
        },
    )?;
    let family = match model.family {
        ModelFamily::Logistic => "logistic",
        ModelFamily::LinearMargin => "linear_margin",
    };
    Ok(serde_json::to_string_pretty(&json!({
        "criterion": target.criterion,
        "family": family,
        "papers": xs.len(),
        "tools": tools,
        "weights": model.weights,
        "bias": model.bias,
        "rule": rule.expression,
        "percent_same": stability.percent_same,
        "trials": stability.trials,
        "fraction": stability.fraction,
    }))? + "\n")
}
