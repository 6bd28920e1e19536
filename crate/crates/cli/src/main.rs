use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use rxngraph_core::chem::FingerprintConfig;
use rxngraph_core::pipeline::{
    config_keys, detection_files, evaluate, fingerprint_report, render_files, write_reports,
    Pipeline, PipelineConfig, PipelineError, EXIT_CONFIG, EXIT_FAILED, EXIT_OK,
};

/// Every config key as a `--key VALUE` flag (underscore or dash spelling).
#[derive(Debug, Clone, Default)]
struct ConfigFlags {
    overrides: Vec<(String, String)>,
}

impl FromArgMatches for ConfigFlags {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut overrides = Vec::new();
        for k in config_keys() {
            if let Some(v) = m.get_one::<String>(&k) {
                overrides.push((k, v.clone()));
            }
        }
        Ok(ConfigFlags { overrides })
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        *self = ConfigFlags::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for ConfigFlags {
    fn augment_args(mut cmd: Command) -> Command {
        for k in config_keys() {
            let dashed = k.replace('_', "-");
            let mut arg = Arg::new(k.clone())
                .long(k.clone())
                .value_name("VALUE")
                .help_heading("Config overrides")
                .help(format!("override config key {k}"));
            if dashed != k {
                arg = arg.visible_alias(dashed);
            }
            cmd = cmd.arg(arg);
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        ConfigFlags::augment_args(cmd)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rxngraph",
    version,
    about = "Reaction diagram parsing from detection files"
)]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Parse detection files into reaction JSON, with a run manifest.
    Parse {
        /// Detection files; defaults to every *.json in detections_dir.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Score predictions against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Print the expert plan for a document and query.
    Plan {
        doc: PathBuf,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Draw a document and its reactions as SVG.
    Render {
        doc: PathBuf,
        reactions: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Print a molecule's fingerprint and atom counts.
    Fingerprint {
        smiles: String,
        #[arg(long, default_value_t = 2048)]
        width: usize,
        #[arg(long, default_value_t = 5)]
        max_path_length: usize,
    },
    /// Print the channel scores for one entity pair.
    ScoreEdge {
        doc: PathBuf,
        a: String,
        b: String,
        #[command(flatten)]
        flags: ConfigFlags,
    },
}

fn load_config(path: Option<&Path>, flags: &ConfigFlags) -> Result<PipelineConfig, PipelineError> {
    PipelineConfig::load(path, &flags.overrides)
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Exit code, or the error with its code.
fn run(cli: Cli) -> Result<i32, (i32, anyhow::Error)> {
    let cfg_err = |e: PipelineError| (EXIT_CONFIG, anyhow::Error::new(e));
    let fail = |e: anyhow::Error| (EXIT_FAILED, e);
    let config = cli.config.as_deref();
    match cli.command {
        Cmd::Parse { inputs, flags } => {
            let cfg = load_config(config, &flags).map_err(cfg_err)?;
            let inputs = if inputs.is_empty() {
                let dir = cfg.settings.detections_dir.clone().ok_or_else(|| {
                    cfg_err(PipelineError::Config(
                        "no inputs and no detections_dir".into(),
                    ))
                })?;
                detection_files(&dir).map_err(cfg_err)?
            } else {
                inputs
            };
            let pipeline = Pipeline::new(cfg).map_err(cfg_err)?;
            let manifest = pipeline.run_batch(&inputs).map_err(|e| fail(e.into()))?;
            for d in &manifest.documents {
                match &d.error {
                    None => println!(
                        "{:<8} {} ({} reactions)",
                        format!("{:?}", d.status).to_lowercase(),
                        d.input,
                        d.reactions
                    ),
                    Some(e) => println!(
                        "failed   {} [{}] {e}",
                        d.input,
                        d.error_class.as_deref().unwrap_or("?")
                    ),
                }
            }
            let s = &manifest.summary;
            println!("ok {} / partial {} / failed {}", s.ok, s.partial, s.failed);
            Ok(manifest.exit_code())
        }
        Cmd::Eval { gt, pred, flags } => {
            let cfg = load_config(config, &flags).map_err(cfg_err)?;
            let s = &cfg.settings;
            let gt = read(&gt).map_err(fail)?;
            let pred = read(&pred).map_err(fail)?;
            let reports =
                evaluate(&gt, &pred, &s.criterion.criteria(), s.iou).map_err(|e| fail(e.into()))?;
            let table =
                write_reports(&reports, s.per_layout, &s.output_dir).map_err(|e| fail(e.into()))?;
            print!("{table}");
            Ok(EXIT_OK)
        }
        Cmd::Plan { doc, flags } => {
            let cfg = load_config(config, &flags).map_err(cfg_err)?;
            let query = cfg.settings.query.clone();
            let pipeline = Pipeline::new(cfg).map_err(cfg_err)?;
            let bytes = read(&doc).map_err(fail)?;
            let json = pipeline
                .plan_json(&bytes, &query)
                .map_err(|e| fail(e.into()))?;
            println!("{json}");
            Ok(EXIT_OK)
        }
        Cmd::Render {
            doc,
            reactions,
            out,
        } => {
            let pipeline = Pipeline::new(PipelineConfig::default()).map_err(cfg_err)?;
            let (document, _) = pipeline
                .load(&read(&doc).map_err(fail)?)
                .map_err(|e| fail(e.into()))?;
            let svg = render_files(&document, &read(&reactions).map_err(fail)?)
                .map_err(|e| fail(e.into()))?;
            match out {
                Some(p) => std::fs::write(&p, svg)
                    .with_context(|| format!("writing {}", p.display()))
                    .map_err(fail)?,
                None => print!("{svg}"),
            }
            Ok(EXIT_OK)
        }
        Cmd::Fingerprint {
            smiles,
            width,
            max_path_length,
        } => {
            let fc = FingerprintConfig::new(
                width,
                max_path_length,
                rxngraph_core::chem::DEFAULT_ALGORITHM_TAG,
            )
            .map_err(|e| (EXIT_CONFIG, e.into()))?;
            let v = fingerprint_report(&smiles, &fc).map_err(|e| fail(e.into()))?;
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            Ok(EXIT_OK)
        }
        Cmd::ScoreEdge { doc, a, b, flags } => {
            let cfg = load_config(config, &flags).map_err(cfg_err)?;
            let pipeline = Pipeline::new(cfg).map_err(cfg_err)?;
            let (document, _) = pipeline
                .load(&read(&doc).map_err(fail)?)
                .map_err(|e| fail(e.into()))?;
            let r = pipeline
                .score_edge(&document, &a, &b)
                .map_err(|e| fail(e.into()))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&r.to_json()).expect("json value")
            );
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                EXIT_CONFIG as u8
            } else {
                EXIT_OK as u8
            });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
