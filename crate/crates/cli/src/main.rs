mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use groundsynth_core::dataset::{
    pool_from_records, select_records, stratified_subset, synthesize_refusals_with,
    DatasetManifest, Record,
};
use groundsynth_core::element::SizeFilter;
use groundsynth_core::eval::{
    aggregate_with, compare_refined, load_benchmark, resolve_predictions, Frame, PredictionLine,
    PredictionParser,
};
use groundsynth_core::filter::drop_counts;
use groundsynth_core::geometry::ImageDims;
use groundsynth_core::harness::{render_component, RenderJob};
use groundsynth_core::office::OfficeTask;
use groundsynth_core::par::{with_jobs, Exec};
use groundsynth_core::pipeline::{
    build, filter_records, ingest_trees, load_tree, load_trees, office_records, read_candidates,
    synthesize, write_candidates, FilterConfig, SynthConfig,
};
use groundsynth_core::provider::{Client, HttpProvider, ScriptedMock};
use groundsynth_core::seed::derive_seed;
use groundsynth_core::{io, ErrorKind};
use serde_json::json;

use crate::config::RunConfig;

#[derive(Parser)]
#[command(
    name = "groundsynth",
    version,
    about = "GUI-grounding data synthesis and evaluation"
)]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for per-record work.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Directory that screenshot paths are relative to.
    #[arg(long, global = true)]
    image_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Element trees -> filtered candidate sets.
    Ingest {
        /// A tree file or a directory of them.
        #[arg(long)]
        trees: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_area: Option<f64>,
        #[arg(long)]
        max_frac: Option<f64>,
    },
    /// Candidate sets + model -> grounding and description records.
    Synthesize {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        provider: ProviderArgs,
        #[arg(long)]
        samples_per_space: Option<usize>,
        /// Where to write the list of skipped generation units.
        #[arg(long)]
        skipped: Option<PathBuf>,
    },
    /// Office task fixtures -> grounding records.
    Office {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Records -> surviving records + filter report.
    Filter {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: PathBuf,
        /// Also ask the model to review each instruction.
        #[arg(long)]
        llm: bool,
        /// Also ask the model to review each rendered action.
        #[arg(long)]
        visual: bool,
        #[command(flatten)]
        provider: ProviderArgs,
    },
    /// Records -> compressed JSONL + manifest.
    Build {
        #[arg(long, required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Records with instructions -> cross-paired refusal records.
    Refuse {
        #[arg(long, required = true, num_args = 1..)]
        records: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Manifest + fraction -> nested subset manifest.
    Subset {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        out: PathBuf,
        /// Dataset JSONL to cut down alongside the manifest.
        #[arg(long, requires = "records_out")]
        records: Option<PathBuf>,
        #[arg(long)]
        records_out: Option<PathBuf>,
    },
    /// Benchmark + predictions -> report.
    Eval {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Frame of predictions that do not declare one.
        #[arg(long)]
        frame: Option<Frame>,
    },
    /// Original vs refined-instruction predictions.
    EvalRefined {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        refined: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        frame: Option<Frame>,
    },
    /// Manifest summary table.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the external component renderer and check its capture.
    Render {
        /// Renderer command line, e.g. "node harness/dist/cli.js".
        #[arg(long)]
        renderer: String,
        #[arg(long)]
        source: PathBuf,
        #[arg(long, value_parser = parse_viewport)]
        viewport: ImageDims,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct ProviderArgs {
    /// Scripted mock responses instead of a live provider.
    #[arg(long)]
    mock: Option<PathBuf>,
}

fn parse_viewport(s: &str) -> Result<ImageDims, String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w = w.parse().map_err(|_| format!("bad width `{w}`"))?;
    let h = h.parse().map_err(|_| format!("bad height `{h}`"))?;
    Ok(ImageDims::new(w, h))
}

struct Ctx {
    cfg: RunConfig,
    exec: Exec,
}

impl Ctx {
    fn seed(&self, stage: &str) -> Result<u64> {
        let run = self
            .cfg
            .seed
            .with_context(|| format!("`{stage}` needs a seed (--seed or `seed` in the config)"))?;
        Ok(derive_seed(run, stage))
    }

    fn image_root(&self) -> PathBuf {
        self.cfg
            .image_root
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn client(&self, args: &ProviderArgs) -> Result<Client> {
        if let Some(path) = args.mock.as_ref().or(self.cfg.mock.as_ref()) {
            return Ok(Client::mock(ScriptedMock::load(path)?));
        }
        let provider = HttpProvider::new(&self.cfg.provider, self.image_root())?;
        Ok(Client::new(Arc::new(provider), self.cfg.provider.clone())?)
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.seed = cli.seed.or(cfg.seed);
    cfg.jobs = cli.jobs.or(cfg.jobs);
    cfg.image_root = cli.image_root.or(cfg.image_root);
    let exec = if cli.sequential || cfg.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let ctx = Ctx { cfg, exec };
    with_jobs(ctx.cfg.jobs, || dispatch(&ctx, cli.command))
}

fn dispatch(ctx: &Ctx, command: Command) -> Result<()> {
    let cfg = &ctx.cfg;
    match command {
        Command::Ingest {
            trees,
            out,
            min_area,
            max_frac,
        } => {
            let size = SizeFilter {
                min_area: min_area.unwrap_or(cfg.size.min_area),
                max_frac: max_frac.unwrap_or(cfg.size.max_frac),
            };
            let loaded = if trees.is_dir() {
                load_trees(&trees)?
            } else {
                vec![load_tree(&trees)?]
            };
            let sets = ingest_trees(&loaded, &size, ctx.exec)?;
            write_candidates(&out, &sets)?;
            let n: usize = sets.iter().map(|s| s.candidates.len()).sum();
            log::info!("{} trees, {n} candidates", sets.len());
        }
        Command::Synthesize {
            candidates,
            out,
            provider,
            samples_per_space,
            skipped,
        } => {
            let synth = SynthConfig {
                seed: ctx.seed("synthesize")?,
                samples_per_space: samples_per_space.unwrap_or(cfg.synth.samples_per_space),
                resize: cfg.resize,
                image_root: ctx.image_root(),
            };
            let sets = read_candidates(&candidates)?;
            let client = ctx.client(&provider)?;
            let result = synthesize(&sets, &client, &synth, ctx.exec)?;
            io::write_jsonl(&out, &result.records)?;
            if let Some(p) = skipped {
                io::write_jsonl(&p, &result.skipped)?;
            }
            log::info!(
                "{} records, {} skipped",
                result.records.len(),
                result.skipped.len()
            );
        }
        Command::Office { tasks, out } => {
            let tasks: Vec<OfficeTask> = io::read_jsonl(&tasks)?;
            io::write_jsonl(&out, &office_records(&tasks, &cfg.resize, ctx.exec)?)?;
        }
        Command::Filter {
            records,
            out,
            report,
            llm,
            visual,
            provider,
        } => {
            let fcfg = FilterConfig {
                rules: cfg.filter.rules,
                llm: llm || cfg.filter.llm,
                visual: visual || cfg.filter.visual,
                image_root: ctx.image_root(),
            };
            let client = if fcfg.llm || fcfg.visual {
                Some(ctx.client(&provider)?)
            } else {
                None
            };
            let recs: Vec<Record> = io::read_jsonl(&records)?;
            let (kept, lines) = filter_records(recs, client.as_ref(), &fcfg, ctx.exec)?;
            io::write_jsonl(&out, &kept)?;
            io::write_jsonl(&report, &lines)?;
            let counts = drop_counts(&lines);
            println!(
                "{}",
                serde_json::to_string(&json!({"kept": kept.len(), "dropped": counts}))?
            );
        }
        Command::Build {
            records,
            out,
            manifest,
        } => {
            let mut all: Vec<Record> = Vec::new();
            for p in &records {
                all.extend(io::read_jsonl::<Record>(p)?);
            }
            let (lines, m) = build(all)?;
            io::write_jsonl(&out, &lines)?;
            io::write_json(&manifest, &m)?;
        }
        Command::Refuse { records, out, rate } => {
            let mut recs: Vec<Record> = Vec::new();
            for p in &records {
                recs.extend(io::read_jsonl::<Record>(p)?);
            }
            let (pool, images) = pool_from_records(&recs);
            let rate = rate.unwrap_or(cfg.refusal.rate);
            let refusals = synthesize_refusals_with(
                &pool,
                &images,
                rate,
                ctx.seed("refuse")?,
                &cfg.resize,
                ctx.exec,
            )?;
            log::info!("{} refusals from a pool of {}", refusals.len(), pool.len());
            io::write_jsonl(&out, &refusals)?;
        }
        Command::Subset {
            manifest,
            fraction,
            out,
            records,
            records_out,
        } => {
            let m: DatasetManifest = io::read_json(&manifest)?;
            let sub = stratified_subset(&m, fraction, ctx.seed("subset")?)?;
            io::write_json(&out, &sub)?;
            if let (Some(src), Some(dst)) = (records, records_out) {
                let recs: Vec<Record> = io::read_jsonl(&src)?;
                io::write_jsonl(&dst, &select_records(recs, &sub))?;
            }
        }
        Command::Eval {
            benchmark,
            predictions,
            out,
            frame,
        } => {
            let samples = load_benchmark(&benchmark)?;
            let preds = load_predictions(ctx, &samples, &predictions, frame)?;
            let report = aggregate_with(&samples, &preds, ctx.exec)?;
            io::write_json(&out, &report)?;
        }
        Command::EvalRefined {
            benchmark,
            predictions,
            refined,
            out,
            frame,
        } => {
            let samples = load_benchmark(&benchmark)?;
            let a = load_predictions(ctx, &samples, &predictions, frame)?;
            let b = load_predictions(ctx, &samples, &refined, frame)?;
            io::write_json(&out, &compare_refined(&samples, &a, &b)?)?;
        }
        Command::Stats { manifest } => {
            let m: DatasetManifest = io::read_json(&manifest)?;
            print!("{}", m.summary_table());
        }
        Command::Render {
            renderer,
            source,
            viewport,
            out,
        } => {
            let program: Vec<String> = renderer.split_whitespace().map(str::to_string).collect();
            if program.is_empty() {
                bail!("--renderer is empty");
            }
            let job = RenderJob {
                source,
                viewport,
                seed: ctx.cfg.seed.context("`render` needs a seed")?,
                out_dir: out,
            };
            let cap = render_component(&program, &job)?;
            println!(
                "{}",
                serde_json::to_string(&json!({
                    "screenshot": cap.screenshot,
                    "tree": cap.tree_path,
                    "nodes": cap.tree.nodes.len(),
                }))?
            );
        }
    }
    Ok(())
}

fn load_predictions(
    ctx: &Ctx,
    samples: &[groundsynth_core::eval::BenchmarkSample],
    path: &Path,
    frame: Option<Frame>,
) -> Result<BTreeMap<String, groundsynth_core::eval::Prediction>> {
    let lines: Vec<PredictionLine> = io::read_jsonl(path)?;
    let parser = match &ctx.cfg.eval.refusal_patterns {
        Some(p) => PredictionParser::new(p).context("bad refusal pattern")?,
        None => PredictionParser::default(),
    };
    let frame = frame.unwrap_or(ctx.cfg.eval.frame);
    Ok(resolve_predictions(
        samples,
        &lines,
        frame,
        &parser,
        &ctx.cfg.resize,
    )?)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::Provider => 2,
        ErrorKind::Io => 3,
    }
}

/// Failure class of an error chain; anything unrecognised is a validation failure.
fn classify(err: &anyhow::Error) -> ErrorKind {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<groundsynth_core::Error>() {
            return e.kind();
        }
        if cause.is::<groundsynth_core::provider::ProviderError>() {
            return ErrorKind::Provider;
        }
        if cause.is::<std::io::Error>() {
            return ErrorKind::Io;
        }
    }
    ErrorKind::Validation
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().get_matches();
    let command = matches.subcommand_name().unwrap_or_default().to_string();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = classify(&err);
            let record = json!({
                "error": {
                    "kind": kind.as_str(),
                    "message": format!("{err:#}"),
                    "command": command,
                }
            });
            eprintln!("{record}");
            ExitCode::from(exit_code(kind))
        }
    }
}
