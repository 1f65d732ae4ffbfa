use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adlforge_core::config::RunConfig;
use adlforge_core::model::ActionTable;
use adlforge_core::pipeline::{self as pl, Context};
use adlforge_core::Error;
use clap::{Args, Parser, Subcommand};

/// Curation pipeline and evaluation harness for ADL video instruction data.
#[derive(Parser, Debug)]
#[command(name = "adlforge", version)]
struct Cli {
    /// TOML run configuration; ADLFORGE_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Answer every model call from the built-in fixtures; no network use.
    #[arg(long, global = true)]
    mock_backends: bool,
    /// Machine-readable progress on stderr.
    #[arg(long, global = true)]
    json_logs: bool,
    /// Replace the latest output directory instead of writing a new version.
    #[arg(long, global = true)]
    overwrite: bool,
    /// Output root (overrides paths.out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Corpus directory (overrides paths.corpus).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Person-centric crop boxes for every corpus clip.
    Crop,
    /// Composite action sequences.
    Sequences,
    /// Assign clips to sequences and render stitched videos.
    Stitch {
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long)]
        crops: Option<PathBuf>,
    },
    /// Frame captions for stitched videos.
    Caption {
        #[arg(long)]
        stitched: PathBuf,
    },
    /// Dense descriptions from frame captions.
    Describe {
        #[arg(long)]
        stitched: PathBuf,
        #[arg(long)]
        captions: PathBuf,
    },
    /// Base QA pairs from dense descriptions.
    Qagen {
        #[arg(long)]
        stitched: PathBuf,
        #[arg(long)]
        captions: PathBuf,
        #[arg(long)]
        dense: PathBuf,
    },
    /// Detect, filter and localize relevant objects per segment.
    Objects {
        #[arg(long)]
        stitched: PathBuf,
    },
    /// Link object tracks and emit object QA and context.
    Track {
        #[arg(long)]
        objects: PathBuf,
    },
    /// Pose context and pose QA from skeletons.
    Posecues {
        #[arg(long)]
        stitched: PathBuf,
    },
    /// Validate and stamp a pose feature file.
    PackageFeatures {
        #[arg(long)]
        input: PathBuf,
    },
    /// Multiple-choice recognition and forecasting accuracy.
    EvalMcq {
        #[arg(long)]
        stitched: PathBuf,
        /// Pre-collected replies (`{"item_id", "reply"}` per line).
        #[arg(long)]
        answers: Option<PathBuf>,
    },
    /// Judge-scored description quality.
    EvalDesc(DescArgs),
    /// Verb and noun F1 of generated descriptions.
    EvalMementos(DescArgs),
    /// Check every manifest invariant under a directory.
    Validate {
        /// Defaults to the output root.
        dir: Option<PathBuf>,
    },
    /// All curation stages end to end.
    Pipeline,
    /// Write a synthetic corpus (one clip per subject, camera and action).
    SynthCorpus {
        #[arg(long, default_value_t = 4)]
        subjects: usize,
        #[arg(long, default_value_t = 2)]
        cameras: usize,
        /// Use only the first N actions of the table.
        #[arg(long)]
        actions: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct DescArgs {
    /// Generated/reference pairs (`{"video_id", "generated", "reference"}`).
    #[arg(long)]
    descriptions: Option<PathBuf>,
    #[arg(long)]
    stitched: Option<PathBuf>,
    #[arg(long)]
    qa: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Crop => "crop",
            Command::Sequences => "sequences",
            Command::Stitch { .. } => "stitch",
            Command::Caption { .. } => "caption",
            Command::Describe { .. } => "describe",
            Command::Qagen { .. } => "qagen",
            Command::Objects { .. } => "objects",
            Command::Track { .. } => "track",
            Command::Posecues { .. } => "posecues",
            Command::PackageFeatures { .. } => "package-features",
            Command::EvalMcq { .. } => "eval-mcq",
            Command::EvalDesc(_) => "eval-desc",
            Command::EvalMementos(_) => "eval-mementos",
            Command::Validate { .. } => "validate",
            Command::Pipeline => "pipeline",
            Command::SynthCorpus { .. } => "synth-corpus",
        }
    }

    fn needs_corpus(&self) -> bool {
        matches!(
            self,
            Command::Crop | Command::Stitch { .. } | Command::Posecues { .. } | Command::Pipeline
        )
    }
}

enum Failure {
    Stage(Error),
    Invalid(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Stage(e)
    }
}

fn init_logging(json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(out) = &cli.out {
        cfg.paths.out = out.clone();
    }
    if let Some(c) = &cli.corpus {
        cfg.paths.corpus = c.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn hashed(paths: &[&Path]) -> Vec<PathBuf> {
    paths.iter().map(|p| p.to_path_buf()).collect()
}

fn run(cli: &Cli, ctx: &Context) -> Result<(), Failure> {
    let ow = cli.overwrite;
    let dir = match &cli.command {
        Command::Crop => pl::run_stage(ctx, "crop", ow, &[pl::corpus_file(ctx)], |o| pl::crop(ctx, o))?,
        Command::Sequences => pl::run_stage(ctx, "sequences", ow, &[], |o| pl::sequences(ctx, o))?,
        Command::Stitch { sequences, crops } => {
            let seqs = pl::locate(sequences, pl::SEQUENCES_FILE)?;
            let crops = crops.as_deref().map(|c| pl::locate(c, pl::CROPS_FILE)).transpose()?;
            let mut inputs = vec![seqs.clone(), pl::corpus_file(ctx)];
            inputs.extend(crops.clone());
            pl::run_stage(ctx, "stitch", ow, &inputs, |o| pl::stitch(ctx, &seqs, crops.as_deref(), o))?
        }
        Command::Caption { stitched } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            pl::run_stage(ctx, "caption", ow, &hashed(&[&s]), |o| pl::caption(ctx, &s, o))?
        }
        Command::Describe { stitched, captions } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            let c = pl::locate(captions, pl::CAPTIONS_FILE)?;
            pl::run_stage(ctx, "describe", ow, &hashed(&[&s, &c]), |o| pl::describe(ctx, &s, &c, o))?
        }
        Command::Qagen { stitched, captions, dense } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            let c = pl::locate(captions, pl::CAPTIONS_FILE)?;
            let d = pl::locate(dense, pl::DENSE_FILE)?;
            pl::run_stage(ctx, "qagen", ow, &hashed(&[&s, &c, &d]), |o| pl::qagen(ctx, &s, &c, &d, o))?
        }
        Command::Objects { stitched } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            pl::run_stage(ctx, "objects", ow, &hashed(&[&s]), |o| pl::objects(ctx, &s, o))?
        }
        Command::Track { objects } => {
            let index = pl::locate(objects, pl::TRACK_INDEX_FILE)?;
            let src = index.parent().map(Path::to_path_buf).unwrap_or_default();
            pl::run_stage(ctx, "track", ow, &hashed(&[&index]), |o| pl::track(ctx, &src, o))?
        }
        Command::Posecues { stitched } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            let inputs = vec![s.clone(), pl::corpus_file(ctx)];
            pl::run_stage(ctx, "posecues", ow, &inputs, |o| pl::posecues(ctx, &s, o))?
        }
        Command::PackageFeatures { input } => {
            pl::run_stage(ctx, "package-features", ow, &hashed(&[input]), |o| pl::package_features(input, o))?
        }
        Command::EvalMcq { stitched, answers } => {
            let s = pl::locate(stitched, pl::STITCHED_FILE)?;
            let mut inputs = vec![s.clone()];
            inputs.extend(answers.clone());
            let mut report = None;
            let dir = pl::run_stage(ctx, "eval-mcq", ow, &inputs, |o| {
                let r = pl::eval_mcq(ctx, &s, answers.as_deref(), o)?;
                let n = r.recognition.as_ref().map_or(0, |m| m.total) + r.forecasting.as_ref().map_or(0, |m| m.total);
                report = Some(r);
                Ok(n)
            })?;
            if let Some(r) = report {
                print_json(&serde_json::json!({
                    "recognition_accuracy": r.recognition.map(|m| m.accuracy),
                    "forecasting_accuracy": r.forecasting.map(|m| m.accuracy),
                }));
            }
            dir
        }
        Command::EvalDesc(args) | Command::EvalMementos(args) => {
            let judge = matches!(cli.command, Command::EvalDesc(_));
            let stage = cli.command.name();
            let descriptions = args.descriptions.clone();
            let stitched = args.stitched.as_deref().map(|p| pl::locate(p, pl::STITCHED_FILE)).transpose()?;
            let qa = args.qa.as_deref().map(|p| pl::locate(p, pl::QA_FILE)).transpose()?;
            let inputs: Vec<PathBuf> = descriptions.iter().chain(&stitched).chain(&qa).cloned().collect();
            let mut summary = None;
            let dir = pl::run_stage(ctx, stage, ow, &inputs, |o| {
                let pairs = pl::description_pairs(ctx, descriptions.as_deref(), stitched.as_deref(), qa.as_deref(), o)?;
                let r = if judge { pl::eval_desc(ctx, &pairs, o)? } else { pl::eval_mementos(&pairs, o)? };
                summary = Some(match (r.judge, r.mementos) {
                    (Some(j), _) => serde_json::to_value(j.corpus).expect("serializable"),
                    (_, Some(m)) => serde_json::to_value(m.corpus).expect("serializable"),
                    _ => serde_json::Value::Null,
                });
                Ok(pairs.len())
            })?;
            if let Some(s) = summary {
                print_json(&s);
            }
            dir
        }
        Command::Validate { dir } => {
            let dir = dir.clone().unwrap_or_else(|| ctx.config.paths.out.clone());
            let violations = pl::validate(ctx, &dir)?;
            for v in &violations {
                println!("{v}");
            }
            if !violations.is_empty() {
                return Err(Failure::Invalid(violations.len()));
            }
            println!("ok: {}", dir.display());
            return Ok(());
        }
        Command::Pipeline => {
            let summary = pl::pipeline(ctx, ow)?;
            print_json(&summary);
            return Ok(());
        }
        Command::SynthCorpus {
            subjects,
            cameras,
            actions,
        } => {
            let table = match actions {
                Some(n) => ActionTable::from_pairs(ctx.actions.iter().take(*n).map(|(id, l)| (id, l.to_string()))),
                None => ctx.actions.clone(),
            };
            let spec = pl::SynthSpec {
                subjects: *subjects,
                cameras: *cameras,
                seed: ctx.config.master_seed,
                ..pl::SynthSpec::default()
            };
            let dir = ctx.corpus_dir();
            let clips = pl::generate_corpus(dir, &table, &spec, ctx.codec.as_ref())?;
            let p = dir.join("actions.json");
            std::fs::write(&p, table.to_json()).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
            println!("{} clips written to {}", clips.len(), dir.display());
            return Ok(());
        }
    };
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.json_logs);
    let stage = cli.command.name();
    let fail = |msg: String| {
        eprintln!("error: {stage}: {msg}");
        ExitCode::from(1)
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    if let Err(e) = cfg.validate(cli.command.needs_corpus()) {
        return fail(e.to_string());
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let ctx = match if cli.mock_backends { Context::mock(cfg) } else { Context::http(cfg) } {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    match pool.install(|| run(&cli, &ctx)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Stage(e)) => fail(e.to_string()),
        Err(Failure::Invalid(n)) => fail(format!("{n} manifest violation(s)")),
    }
}
