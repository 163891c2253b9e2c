use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use botflow::classifiers::{ModelFile, ModelKind, ModelSpec};
use botflow::dataset::{read_feature_csv, DatasetManifest};
use botflow::evaluation::{render_report, write_report_file, ReportFormat};
use botflow::flow::records::{read_flows_file, write_flows_file};
use botflow::flow::{FeatureVector, MeterConfig};
use botflow::labeling::DEFAULT_LABEL;
use botflow::pipeline::{self, seconds_to_us, PipelineConfig};
use botflow::selection::{read_ranking_file, read_universal_file, write_ranking_file, write_universal_file};
use botflow::synth::Scenario;

#[derive(Parser)]
#[command(name = "botflow", version, about = "Flow features, universal feature selection and botnet detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct MeterArgs {
    /// Idle time after which a flow ends.
    #[arg(long, value_name = "SECONDS")]
    timeout_s: Option<f64>,
    /// Gap that closes an active period.
    #[arg(long, value_name = "SECONDS")]
    activity_timeout_s: Option<f64>,
}

impl MeterArgs {
    fn apply(&self, meter: &mut MeterConfig) -> Result<()> {
        if let Some(t) = self.timeout_s {
            meter.flow_timeout_us = seconds_to_us(t)?;
        }
        if let Some(t) = self.activity_timeout_s {
            meter.activity_timeout_us = seconds_to_us(t)?;
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Capture(s) to a flow feature CSV.
    Extract {
        /// A dataset manifest; its captures are read in order.
        #[arg(long, conflicts_with = "captures")]
        config: Option<PathBuf>,
        captures: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        meter: MeterArgs,
    },
    /// Feature CSV plus ground-truth rules to a labeled CSV.
    Label {
        flows: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long, default_value = DEFAULT_LABEL)]
        default_label: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-k features of one labeled dataset by LR coefficient magnitude.
    Rank {
        labeled: PathBuf,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_LABEL)]
        negative_label: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequency count over ranking CSVs.
    Universal {
        #[arg(required = true, num_args = 1..)]
        rankings: Vec<PathBuf>,
        #[arg(long, default_value_t = 2)]
        threshold: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train classifiers on the universal features of a labeled dataset.
    Train {
        labeled: PathBuf,
        #[arg(long)]
        universal: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "NB,KNN,RF,LR")]
        models: Vec<ModelKind>,
        #[arg(long, default_value = DEFAULT_LABEL)]
        negative_label: String,
        /// Directory for `<name>_<KIND>.json` files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score trained models on the held-out part of a labeled dataset.
    Evaluate {
        labeled: PathBuf,
        #[arg(required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = DEFAULT_LABEL)]
        negative_label: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// All stages from a TOML config.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<usize>,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        ratio: Option<f64>,
        #[command(flatten)]
        meter: MeterArgs,
    },
    /// Write synthetic captures, rules and manifests.
    Synth {
        /// ddos, botnet, mirai or all.
        #[arg(long, default_value = "all")]
        scenario: String,
        #[arg(long, default_value_t = 200)]
        normal: usize,
        #[arg(long, default_value_t = 200)]
        attack: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract {
            config,
            captures,
            out,
            meter,
        } => {
            let manifest = match config {
                Some(p) => DatasetManifest::load(&p)?,
                None => {
                    if captures.is_empty() {
                        bail!("give capture files or --config MANIFEST");
                    }
                    let mut m = DatasetManifest::new(&dataset_name(&out));
                    m.captures = captures;
                    m
                }
            };
            let mut mc = MeterConfig::default();
            meter.apply(&mut mc)?;
            let flows = pipeline::extract_dataset(&manifest, &mc).context("extract")?;
            write_flows_file(&out, &flows, None)?;
            eprintln!("{} flows -> {}", flows.len(), out.display());
        }
        Command::Label {
            flows,
            rules,
            default_label,
            out,
        } => {
            let rows: Vec<FeatureVector> = read_flows_file(&flows)?.into_iter().map(|r| r.features).collect();
            let mut m = DatasetManifest::new(&dataset_name(&flows));
            m.rules = Some(rules);
            m.default_label = default_label;
            let (labeled, report) = pipeline::label_dataset(&m, &rows)?;
            let labels: Vec<String> = labeled.into_iter().map(|r| r.label).collect();
            write_flows_file(&out, &rows, Some(&labels))?;
            for (label, n) in &report.per_label {
                eprintln!("{label}: {n}");
            }
            eprintln!("unmatched: {}", report.unmatched);
        }
        Command::Rank {
            labeled,
            top_k,
            seed,
            negative_label,
            out,
        } => {
            let table = read_feature_csv(&labeled, &negative_label)?;
            let ModelSpec::LR(hyper) = ModelSpec::default_for(ModelKind::LR, seed) else {
                unreachable!()
            };
            let list = pipeline::rank_table(&dataset_name(&labeled), &table, top_k, &hyper)?;
            write_ranking_file(&out, &list)?;
            for e in &list.entries {
                println!("{:.6}  {}", e.score, e.name);
            }
        }
        Command::Universal {
            rankings,
            threshold,
            out,
        } => {
            let lists = rankings.iter().map(read_ranking_file).collect::<botflow::Result<Vec<_>>>()?;
            let set = pipeline::universal_from_lists(&lists, threshold)?;
            write_universal_file(&out, &set)?;
            for m in &set.members {
                println!("{}  {}", m.count, m.name);
            }
        }
        Command::Train {
            labeled,
            universal,
            ratio,
            seed,
            models,
            negative_label,
            out,
        } => {
            let names = read_universal_file(&universal)?.names();
            let table = read_feature_csv(&labeled, &negative_label)?.select(&names)?;
            let (train, _) = pipeline::split_table(&table, ratio, seed, false)?;
            let specs: Vec<ModelSpec> = models.iter().map(|&k| ModelSpec::default_for(k, seed)).collect();
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let name = dataset_name(&labeled);
            for model in pipeline::train_models(&train, &specs)? {
                let path = out.join(format!("{name}_{}.json", model.kind()));
                ModelFile::new(model, names.clone()).save(&path)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Evaluate {
            labeled,
            models,
            ratio,
            seed,
            negative_label,
            out,
        } => {
            let table = read_feature_csv(&labeled, &negative_label)?;
            let name = dataset_name(&labeled);
            let mut reports = Vec::new();
            for path in &models {
                let mf = ModelFile::load(path)?;
                let sub = table.select(&mf.feature_names)?;
                let (_, test) = pipeline::split_table(&sub, ratio, seed, false)?;
                reports.push(pipeline::evaluate_model(&name, &mf.model, &test)?);
            }
            print!("{}", render_report(&reports, ReportFormat::Text));
            if let Some(out) = out {
                write_report_file(&out, &reports, ReportFormat::Csv)?;
            }
        }
        Command::Pipeline {
            config,
            seed,
            out,
            threshold,
            top_k,
            ratio,
            meter,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.set_seed(s);
            }
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            if let Some(t) = threshold {
                cfg.threshold = t;
            }
            if let Some(k) = top_k {
                cfg.top_k = k;
            }
            if let Some(r) = ratio {
                cfg.ratio = r;
            }
            meter.apply(&mut cfg.meter)?;
            let outcome = pipeline::run_pipeline(&cfg)?;
            println!("universal features: {}", outcome.universal.names().join(", "));
            print!("{}", render_report(&outcome.reports, ReportFormat::Text));
        }
        Command::Synth {
            scenario,
            normal,
            attack,
            seed,
            out,
        } => {
            let scenarios = if scenario.eq_ignore_ascii_case("all") {
                Scenario::ALL.to_vec()
            } else {
                vec![Scenario::parse(&scenario).with_context(|| format!("unknown scenario `{scenario}`"))?]
            };
            for m in pipeline::write_synthetic_corpus(&out, &scenarios, normal, attack, seed)? {
                println!("{}", out.join(format!("{}.manifest", m.name)).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already embed their sources in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
