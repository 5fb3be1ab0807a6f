//! `dcm`: identifiability checks, simulation, fitting and replication studies
//! for diagnostic classification models.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use dcm::designs::Design;
use dcm::harness::{self, ReportFormat, StudyConfig};
use dcm::identifiability::{self as ident, CheckOptions, ItemPartition, Verdict};
use dcm::inference::{
    cluster_all, merge_partial_info_threshold, posterior_mean, reconstruct_q, truncate_classes,
    ClusterOptions, Coding, QReconstruction,
};
use dcm::models::{AttributeSpace, ModelParams, Partition, QMatrix};
use dcm::sampler::{run_chain, DrawsFormat, PosteriorDraws, SamplerConfig};
use dcm::simulate::{simulate, Dataset, MixtureWeights};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "dcm",
    version,
    about = "Diagnostic classification models as latent class models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Theorem {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    #[value(name = "4")]
    Four,
    Auto,
}

#[derive(Clone, Copy, ValueEnum)]
enum DrawsFormatArg {
    Csv,
    Binary,
}

#[derive(Subcommand)]
enum Command {
    /// Check sufficient identifiability conditions for a model and Q-matrix
    CheckId {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        q: PathBuf,
        /// Class weights (JSON array); uniform over all classes when absent
        #[arg(long)]
        pi: Option<PathBuf>,
        /// Attribute levels, comma separated; binary when absent
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Three item subsets as a JSON array of 0-based item lists
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "auto")]
        theorem: Theorem,
        /// Output on stdout: text or structured
        #[arg(long, default_value = "text")]
        format: String,
        /// Also write the structured verdicts here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a response dataset (labels go to a sidecar file)
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        pi: PathBuf,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the slice Gibbs sampler and write posterior draws
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Sampler settings (JSON); defaults when absent
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Draws format; inferred from the extension when absent
        #[arg(long, value_enum)]
        format: Option<DrawsFormatArg>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report progress on stderr every 100 iterations
        #[arg(long)]
        progress: bool,
    },
    /// Posterior mean, class truncation and per-item partial information
    Cluster {
        #[arg(long)]
        draws: PathBuf,
        /// Sample size; taken from the draws file when absent
        #[arg(long)]
        n: Option<usize>,
        /// Retention threshold; n^{-1/2} when absent
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a Q-matrix from per-item partitions
    ReconstructQ {
        /// A cluster report or a JSON array of partitions
        #[arg(long)]
        partitions: PathBuf,
        /// `auto`, or a JSON array giving each class's attribute profile
        #[arg(long, default_value = "auto")]
        coding: String,
        /// Number of binary attributes
        #[arg(long, conflicts_with = "levels")]
        attributes: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a replication study from a config file
    Replicate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config and the environment
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print a stored study report
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "text")]
        format: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<dcm::Error>(), Some(dcm::Error::Usage(_))));
            ExitCode::from(if usage { EXIT_USAGE } else { EXIT_FAILURE })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::CheckId {
            model,
            q,
            pi,
            levels,
            partition,
            theorem,
            format,
            out,
        } => check_id(
            &model,
            &q,
            pi.as_deref(),
            levels,
            partition.as_deref(),
            theorem,
            &format,
            out.as_deref(),
        ),
        Command::Simulate {
            model,
            q,
            pi,
            levels,
            n,
            seed,
            out,
        } => {
            let design = load_design(&model, &q, Some(&pi), levels)?;
            let data = simulate(&design.table()?, &design.weights, n, seed)?;
            data.write(&out)?;
            eprintln!("wrote {} responses to {}", n, out.display());
            Ok(())
        }
        Command::Fit {
            data,
            config,
            out,
            format,
            seed,
            progress,
        } => {
            let data = Dataset::read(&data)?;
            let mut cfg = match config {
                Some(p) => SamplerConfig::read_json(&p)
                    .with_context(|| format!("reading {}", p.display()))?,
                None => SamplerConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.progress |= progress;
            cfg.validate()?;
            let draws = run_chain(&data, &cfg)?;
            let format = match format {
                Some(DrawsFormatArg::Csv) => DrawsFormat::Csv,
                Some(DrawsFormatArg::Binary) => DrawsFormat::Binary,
                None => DrawsFormat::for_path(&out),
            };
            draws.write(&out, format)?;
            eprintln!("wrote {} draws to {}", draws.len(), out.display());
            Ok(())
        }
        Command::Cluster {
            draws,
            n,
            threshold,
            out,
        } => cluster(&draws, n, threshold, &out),
        Command::ReconstructQ {
            partitions,
            coding,
            attributes,
            levels,
            out,
        } => reconstruct(&partitions, &coding, attributes, levels, out.as_deref()),
        Command::Replicate {
            config,
            out_dir,
            workers,
        } => {
            let mut cfg = StudyConfig::read(&config)?;
            cfg.apply_env()?;
            if let Some(w) = workers {
                cfg.workers = Some(w);
            }
            if let Some(d) = out_dir {
                cfg.output_dir = Some(d);
            }
            cfg.validate()?;
            let dir = cfg
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("dcm-output"));
            let (report, timing) = harness::run_study(&cfg)?;
            harness::emit_report(&report, ReportFormat::Structured, &dir)?;
            harness::emit_report(&report, ReportFormat::Text, &dir)?;
            harness::write_timing(&timing, &dir)?;
            print!("{}", harness::render_text(&report));
            eprintln!(
                "report written to {} ({:.1} s)",
                dir.display(),
                timing.total_seconds
            );
            Ok(())
        }
        Command::Report { input, format } => {
            let format: ReportFormat = format.parse()?;
            let report = harness::read_report(&input)?;
            match format {
                ReportFormat::Text => print!("{}", harness::render_text(&report)),
                ReportFormat::Structured => println!("{}", report.to_json()?),
            }
            Ok(())
        }
    }
}

fn load_design(
    model: &Path,
    q: &Path,
    pi: Option<&Path>,
    levels: Option<Vec<usize>>,
) -> Result<Design> {
    let q = QMatrix::read_csv(q)?;
    let levels = match levels {
        Some(l) => AttributeSpace::new(l)?,
        None => AttributeSpace::binary(q.n_attributes())?,
    };
    let model = ModelParams::read_json(model)?;
    model.validate(&q)?;
    let weights = match pi {
        Some(p) => MixtureWeights::read_json(p)?,
        None => MixtureWeights::uniform(levels.n_classes()),
    };
    Ok(Design {
        name: "custom".into(),
        q,
        levels,
        model,
        weights,
        report_order: None,
    })
}

#[derive(Serialize)]
struct CheckReport<'a> {
    /// True when some sufficient condition was verified.
    identified: bool,
    verdicts: &'a [Verdict],
}

#[allow(clippy::too_many_arguments)]
fn check_id(
    model: &Path,
    q: &Path,
    pi: Option<&Path>,
    levels: Option<Vec<usize>>,
    partition: Option<&Path>,
    theorem: Theorem,
    format: &str,
    out: Option<&Path>,
) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let design = load_design(model, q, pi, levels)?;
    let full = design.table()?;
    let support = design.weights.support();
    let table = full.restrict_classes(&support)?;
    let weights = design.weights.restrict(&support)?;
    let opts = CheckOptions::default();
    let partition: Option<ItemPartition> = match partition {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    // Theorems 1-3 need three item subsets; search for one when none is given.
    let subsets = |verdicts: &mut Vec<Verdict>| -> Result<Option<ItemPartition>> {
        if partition.is_some() {
            return Ok(partition.clone());
        }
        let (found, verdict) = ident::search_partition(&table, &weights, &opts)?;
        if found.is_none() {
            verdicts.push(verdict);
        }
        Ok(found)
    };
    let mut verdicts = Vec::new();
    match theorem {
        Theorem::One | Theorem::Two | Theorem::Three => {
            if let Some(p) = subsets(&mut verdicts)? {
                let v = match theorem {
                    Theorem::One => {
                        ident::check_two_valued_binary(&table, &weights, Some(&p), &opts)?
                    }
                    Theorem::Two => {
                        ident::check_two_valued_categorical(&table, &weights, Some(&p), &opts)?
                    }
                    _ => ident::check_full_rank(&table, &weights, Some(&p), &opts)?,
                };
                verdicts.push(v);
            }
        }
        Theorem::Four => {
            verdicts.push(ident::check_single_attribute_pools(
                &full,
                &design.weights,
                &design.q,
                design.space(),
                &opts,
            )?);
        }
        Theorem::Auto => {
            let identities = ident::check_three_identities(&design.q);
            let has_identities = identities.pass;
            verdicts.push(identities);
            if has_identities {
                verdicts.push(ident::check_single_attribute_pools(
                    &full,
                    &design.weights,
                    &design.q,
                    design.space(),
                    &opts,
                )?);
            }
            if !verdicts.last().is_some_and(|v| v.pass) {
                if let Some(p) = subsets(&mut verdicts)? {
                    verdicts.push(ident::check_full_rank(&table, &weights, Some(&p), &opts)?);
                }
            }
        }
    }
    let identified = verdicts
        .iter()
        .any(|v| v.pass && v.check != ident::Check::ThreeIdentities);
    let doc = CheckReport {
        identified,
        verdicts: &verdicts,
    };
    let json = serde_json::to_string_pretty(&doc)?;
    if let Some(path) = out {
        fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    match format {
        ReportFormat::Text => {
            for v in &verdicts {
                println!("{v}");
            }
            println!(
                "identified (sufficient condition verified): {}",
                if identified { "yes" } else { "no" }
            );
        }
        ReportFormat::Structured => println!("{json}"),
    }
    Ok(())
}

/// Output of `cluster`, also accepted as input by `reconstruct-q`.
#[derive(Debug, Serialize, Deserialize)]
struct ClusterReport {
    n: usize,
    threshold: f64,
    /// Retained class weights, decreasing; class `a` here is `C{a+1}`.
    weights: Vec<f64>,
    discarded_mass: f64,
    max_discarded: f64,
    /// `probs[j][a][y]` for retained classes.
    probs: Vec<Vec<Vec<f64>>>,
    /// K-means/silhouette partition of the retained classes, per item.
    partitions: Vec<Partition>,
    /// Connected components of `d_j <= n^{-1/2}`, per item.
    threshold_partitions: Vec<Partition>,
}

fn class_blocks(p: &Partition) -> String {
    p.blocks()
        .iter()
        .map(|b| {
            let names: Vec<String> = b.iter().map(|a| format!("C{}", a + 1)).collect();
            format!("{{{}}}", names.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn cluster(draws: &Path, n: Option<usize>, threshold: Option<f64>, out: &Path) -> Result<()> {
    let draws = PosteriorDraws::read(draws)?;
    let n = n.unwrap_or(draws.n_obs);
    if n == 0 {
        bail!("sample size unknown: pass --n");
    }
    let est = posterior_mean(&draws)?;
    let tr = truncate_classes(&est, n, threshold)?;
    let est = est.restrict(&tr.retained)?;
    let partitions = cluster_all(&est.table, Some(n), &ClusterOptions::default());
    let threshold_partitions = (0..est.table.n_items())
        .map(|j| merge_partial_info_threshold(&est.table, j, Some(n)))
        .collect();
    let report = ClusterReport {
        n,
        threshold: tr.threshold,
        weights: est.weights.clone(),
        discarded_mass: tr.discarded_mass,
        max_discarded: tr.max_discarded,
        probs: est.table.to_nested(),
        partitions,
        threshold_partitions,
    };
    fs::write(out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", out.display()))?;

    println!(
        "{} classes retained (threshold {:.4}); discarded mass {:.2e}, largest discarded {:.2e}",
        report.weights.len(),
        report.threshold,
        report.discarded_mass,
        report.max_discarded
    );
    for (a, w) in report.weights.iter().enumerate() {
        println!("C{:<4} {:.4}", a + 1, w);
    }
    println!("item  partial information");
    for (j, p) in report.partitions.iter().enumerate() {
        println!("{:<5} {}", j + 1, class_blocks(p));
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PartitionsInput {
    Report(ClusterReport),
    Partitions(Vec<Partition>),
    Blocks(Vec<Vec<Vec<usize>>>),
}

fn reconstruct(
    partitions: &Path,
    coding: &str,
    attributes: Option<usize>,
    levels: Option<Vec<usize>>,
    out: Option<&Path>,
) -> Result<()> {
    let text = fs::read_to_string(partitions)
        .with_context(|| format!("reading {}", partitions.display()))?;
    let parsed: PartitionsInput =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", partitions.display()))?;
    let partitions: Vec<Partition> = match parsed {
        PartitionsInput::Report(r) => r.partitions,
        PartitionsInput::Partitions(p) => p,
        PartitionsInput::Blocks(b) => b.into_iter().map(Partition::from_blocks).collect(),
    };
    let space = match (attributes, levels) {
        (_, Some(l)) => AttributeSpace::new(l)?,
        (Some(k), None) => AttributeSpace::binary(k)?,
        (None, None) => {
            return Err(dcm::Error::Usage("pass --attributes or --levels".into()).into())
        }
    };
    let coding = if coding == "auto" {
        Coding::Auto
    } else {
        let text =
            fs::read_to_string(coding).with_context(|| format!("reading coding file {coding}"))?;
        let profiles: Vec<Vec<usize>> =
            serde_json::from_str(&text).with_context(|| format!("parsing {coding}"))?;
        Coding::Given(
            profiles
                .iter()
                .map(|p| space.index(p))
                .collect::<dcm::Result<Vec<usize>>>()?,
        )
    };
    let rec: QReconstruction = reconstruct_q(&partitions, &space, &coding)?;
    if let Some(path) = out {
        fs::write(path, serde_json::to_string_pretty(&rec)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!("coding:");
    for (a, &c) in rec.coding.iter().enumerate() {
        let profile: Vec<String> = space.profile(c).iter().map(usize::to_string).collect();
        println!("  C{} = ({})", a + 1, profile.join(","));
    }
    println!("Q-matrix:");
    for (j, row) in rec.rows.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(u8::to_string).collect();
        let flag = if rec.uninformative.contains(&j) {
            "  (uninformative)"
        } else {
            ""
        };
        println!("  {:<4} {}{}", j + 1, cells.join(" "), flag);
    }
    Ok(())
}
