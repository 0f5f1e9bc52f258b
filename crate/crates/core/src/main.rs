use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use pollforge::corpus::{load_corpus, save_corpus, Split};
use pollforge::experiments::{
    ablation_variants, export_report, run_plan, single_task_variant, ExperimentPlan, ResultTable,
};
use pollforge::formatting::{expand_to_instances, Limits, TaskFormat, TaskSet};
use pollforge::humaneval::{http, HumanEvalStore, SessionConfig};
use pollforge::metrics::MetricReport;
use pollforge::pipeline::{
    build_tokenizer, evaluate_split, load_run, predict_split, read_predictions, save_run, train_run,
    write_predictions, RunConfig,
};

#[derive(Parser)]
#[command(name = "pollforge", version, about = "Poll generation from posts and comments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a JSONL corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Write the template corpus used for smoke tests.
    Synth {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Expand the train split into shuffled task instances (JSONL).
    Prepare {
        corpus: PathBuf,
        #[arg(long, default_value = "main,qg,ag")]
        tasks: TaskSet,
        #[arg(long, default_value_t = 40)]
        seed: u64,
        #[arg(long = "max-src", default_value_t = 1024)]
        max_src: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model from a run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate polls for a corpus split with a trained checkpoint.
    Generate {
        #[arg(long)]
        ckpt: PathBuf,
        /// Defaults to the corpus named in the checkpoint's run config.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        beam: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions file against a corpus split.
    Evaluate {
        #[arg(long)]
        preds: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write the scores as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run an experiment plan and export its table.
    Sweep {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "all")]
        format: String,
    },
    /// Run the four-variant ablation (and optionally the single-task baseline).
    Ablation(AblationArgs),
    #[command(subcommand)]
    Humaneval(HumanevalCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    Validate {
        path: PathBuf,
        #[arg(long)]
        strict: bool,
    },
    Stats {
        path: PathBuf,
    },
}

#[derive(Args)]
struct AblationArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "40,41,42,43,44")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "ablation-out")]
    out: PathBuf,
    /// Add the single-task baseline row.
    #[arg(long)]
    baseline: bool,
}

#[derive(Subcommand)]
enum HumanevalCmd {
    /// Serve the rating API and the rater UI bundle.
    Serve {
        /// Session to create at startup (skipped when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "humaneval-data")]
        data_dir: PathBuf,
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

fn parse_split(s: &str) -> Result<Split> {
    Ok(match s {
        "train" => Split::Train,
        "valid" => Split::Valid,
        "test" => Split::Test,
        _ => bail!("unknown split {s:?}"),
    })
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_report_csv(path: &Path, report: &MetricReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["target", "rouge1", "rougeL", "bleu1", "bleu3"])?;
    for t in pollforge::metrics::Target::ALL {
        let v = report.target(t).values();
        w.write_record([t.as_str().to_string(), v[0].to_string(), v[1].to_string(), v[2].to_string(), v[3].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Corpus(CorpusCmd::Validate { path, strict }) => {
            let (_, report) = load_corpus(&path, strict)?;
            print_json(&report)?;
        }
        Command::Corpus(CorpusCmd::Stats { path }) => {
            let (corpus, _) = load_corpus(&path, false)?;
            print_json(&corpus.stats())?;
        }
        Command::Synth { n, seed, out } => {
            save_corpus(&pollforge::synthetic::synthetic_corpus(n, seed), &out)?;
        }
        Command::Prepare {
            corpus,
            tasks,
            seed,
            max_src,
            out,
        } => {
            let (corpus, _) = load_corpus(&corpus, false)?;
            let format = TaskFormat::default();
            let tok = build_tokenizer(&corpus, &format, 1);
            let limits = Limits {
                max_source_len: max_src,
                ..Limits::default()
            };
            let instances = expand_to_instances(&corpus, &tasks, &format, &tok, &limits, seed)?;
            let mut text = String::new();
            for i in &instances {
                text.push_str(&serde_json::to_string(i)?);
                text.push('\n');
            }
            std::fs::write(&out, text).with_context(|| out.display().to_string())?;
            eprintln!("{} instances", instances.len());
        }
        Command::Train { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let corpus = cfg.load_corpus()?;
            let run = train_run(&corpus, &cfg)?;
            save_run(&out, &run, &cfg)?;
            eprintln!("selected {}", run.history.selected.as_deref().unwrap_or("-"));
        }
        Command::Generate {
            ckpt,
            corpus,
            split,
            beam,
            out,
        } => {
            let (model, tok, mut cfg) = load_run(&ckpt)?;
            if let Some(b) = beam {
                cfg.decode.beam_size = b;
            }
            let corpus = match corpus {
                Some(p) => load_corpus(&p, false)?.0,
                None => cfg.load_corpus()?,
            };
            let kind = cfg.train.task_set.inference_kind();
            let preds = predict_split(&model, &tok, &cfg, &corpus, parse_split(&split)?, kind)?;
            write_predictions(&out, &preds)?;
        }
        Command::Evaluate {
            preds,
            gold,
            split,
            out,
            csv,
        } => {
            let preds = read_predictions(&preds)?;
            let (corpus, _) = load_corpus(&gold, false)?;
            let report = evaluate_split(&preds, &corpus, parse_split(&split)?)?;
            std::fs::write(&out, serde_json::to_string_pretty(&report)?)?;
            if let Some(c) = csv {
                write_report_csv(&c, &report)?;
            }
            print_json(&report)?;
        }
        Command::Sweep { plan, format } => {
            let plan = ExperimentPlan::load(&plan)?;
            let corpus = plan.base.load_corpus()?;
            let table = run_plan(&corpus, &plan)?;
            finish_table(&table, &format, plan.outputs.as_deref())?;
        }
        Command::Ablation(a) => {
            let base = RunConfig::load(&a.config)?;
            let corpus = base.load_corpus()?;
            let mut variants = ablation_variants();
            if a.baseline {
                variants.push(single_task_variant());
            }
            let plan = ExperimentPlan {
                name: "ablation".into(),
                base,
                variants,
                seeds: a.seeds,
                outputs: Some(a.out),
            };
            let table = run_plan(&corpus, &plan)?;
            finish_table(&table, "all", plan.outputs.as_deref())?;
        }
        Command::Humaneval(HumanevalCmd::Serve {
            config,
            port,
            data_dir,
            static_dir,
        }) => {
            let store = Arc::new(HumanEvalStore::open(&data_dir)?);
            if let Some(c) = config {
                let h = store.create(&SessionConfig::load(&c)?)?;
                eprintln!("session {} with {} items", h.session.id, h.session.items.len());
            }
            for id in store.session_ids() {
                eprintln!("session {id}");
            }
            tokio::runtime::Runtime::new()?.block_on(http::serve(store, static_dir, port))?;
        }
    }
    Ok(())
}

fn finish_table(table: &ResultTable, format: &str, outputs: Option<&Path>) -> Result<()> {
    let dir = outputs.unwrap_or(Path::new("."));
    for p in export_report(std::slice::from_ref(table), format, dir)? {
        eprintln!("wrote {}", p.display());
    }
    print!("{}", table.render_text());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
