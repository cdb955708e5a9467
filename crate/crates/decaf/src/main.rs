//! Command-line front end for dataset generation, splitting, training,
//! prediction, shift diagnosis, and end-to-end experiment runs.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use decaf::diagnostics::shift_report;
use decaf::harness::{
    aggregate, load_dataset, run_experiment, save_dataset_with_provenance, DatasetSpec,
    ExperimentConfig, Method, MetricsReport, ShiftConfig,
};
use decaf::model::{
    erm_predict, load_checkpoint, predict, save_checkpoint, train_decaf, train_erm, Checkpoint,
    Encoder, SavedModel, CHECKPOINT_VERSION,
};
use decaf::numerics::Matrix;
use decaf::scmgen::{
    apply_shift, generate_graph, make_recipe, sample_latents, Recipe, ShiftKind, ShiftSpec,
};
use decaf::splits::{soft_label_leaveout, SplitMasks};
use decaf::{Error, Result};

#[derive(Parser)]
#[command(name = "decaf", about = "Causal decoupling experiments on synthetic graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory from a recipe.
    Generate {
        #[arg(long)]
        recipe: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 2000)]
        nodes: usize,
        #[arg(long, default_value_t = 20.0)]
        mean_degree: f64,
        /// Apply a shift before sampling: covariate, concept-x, concept-a.
        #[arg(long)]
        shift: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        magnitude: f64,
    },
    /// Compute soft label-leaveout masks for a dataset.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        major_share: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a stored dataset and write a checkpoint.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        cf_samples: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict classes for a dataset with a stored checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Masks JSON from `split`; background samples come from its
        /// training portion (defaults to all nodes).
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class shift statistics between two datasets.
    Diagnose {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Use the encoder of this checkpoint for the neighborhood branch
        /// (defaults to a 1-hop identity encoder).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// End-to-end experiment: generate, shift, split, train, evaluate.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        recipe: Option<String>,
        /// none, covariate, concept-x, or concept-a.
        #[arg(long)]
        shift: Option<String>,
        #[arg(long)]
        magnitude: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        cf_samples: Option<usize>,
    },
    /// Aggregate report.json files from multi-seed runs.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn thread_cap() -> Result<usize> {
    match std::env::var("DECAF_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::invalid(format!("DECAF_THREADS must be a positive integer, got '{v}'"))),
    }
}

fn load_masks(path: &Path) -> Result<SplitMasks> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        file: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn cmd_generate(
    recipe: &str,
    seed: u64,
    out: &Path,
    nodes: usize,
    mean_degree: f64,
    shift: Option<&str>,
    magnitude: f64,
) -> Result<()> {
    let recipe = Recipe::from_str(recipe)?;
    let mut params = make_recipe(recipe, seed, mean_degree)?;
    let mut provenance = format!("recipe={recipe} seed={seed} nodes={nodes} mean_degree={mean_degree}");
    if let Some(kind) = shift.filter(|s| *s != "none") {
        let kind = ShiftKind::from_str(kind)?;
        params = apply_shift(
            &params,
            &ShiftSpec {
                kind,
                magnitude,
                seed: seed.wrapping_add(13),
            },
        );
        provenance.push_str(&format!(" shift={kind} magnitude={magnitude}"));
    }
    if params.density_clamped {
        eprintln!("warning: density clamped at 1; target mean degree {mean_degree} unreachable");
    }
    let z = sample_latents(&params, nodes, seed.wrapping_add(11))?;
    let syn = generate_graph(&params, &z, seed.wrapping_add(12))?;
    save_dataset_with_provenance(&syn.graph, out, &provenance)?;
    println!(
        "wrote {} nodes, {} edges to {}",
        syn.graph.n(),
        syn.graph.adjacency.num_edges(),
        out.display()
    );
    Ok(())
}

fn cmd_run(
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    method: Option<&str>,
    recipe: Option<&str>,
    shift: Option<&str>,
    magnitude: Option<f64>,
    gamma: Option<f64>,
    cf_samples: Option<usize>,
) -> Result<()> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => ExperimentConfig::default_recipe(Recipe::HFeat, Method::Decaf, 0),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(m) = method {
        cfg.method = Method::from_str(m)?;
    }
    if let Some(r) = recipe {
        let recipe = Recipe::from_str(r)?;
        cfg.dataset = match cfg.dataset {
            DatasetSpec::Recipe {
                nodes,
                target_mean_degree,
                ..
            } => DatasetSpec::Recipe {
                recipe,
                nodes,
                target_mean_degree,
            },
            DatasetSpec::Path { .. } => DatasetSpec::Recipe {
                recipe,
                nodes: 2000,
                target_mean_degree: 20.0,
            },
        };
    }
    match shift {
        Some("none") => cfg.shift = None,
        Some(kind) => {
            let kind = ShiftKind::from_str(kind)?;
            let magnitude = magnitude
                .or(cfg.shift.map(|s| s.magnitude))
                .unwrap_or(0.0);
            cfg.shift = Some(ShiftConfig { kind, magnitude });
        }
        None => {
            if let (Some(m), Some(s)) = (magnitude, cfg.shift.as_mut()) {
                s.magnitude = m;
            }
        }
    }
    if let Some(g) = gamma {
        cfg.hyper.gamma = g;
    }
    if let Some(k) = cf_samples {
        cfg.hyper.cf_samples = k;
    }

    let report = run_experiment(&cfg, out)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("report serialization"));
    Ok(())
}

fn cmd_train(
    config: Option<&Path>,
    data: &Path,
    method: Option<&str>,
    seed: Option<u64>,
    gamma: Option<f64>,
    cf_samples: Option<usize>,
    out: &Path,
) -> Result<()> {
    let mut cfg = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::Parse {
                file: path.display().to_string(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        None => ExperimentConfig::default_recipe(Recipe::HFeat, Method::Decaf, 0),
    };
    cfg.dataset = DatasetSpec::Path {
        path: data.to_path_buf(),
    };
    if let Some(m) = method {
        cfg.method = Method::from_str(m)?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(g) = gamma {
        cfg.hyper.gamma = g;
    }
    if let Some(k) = cf_samples {
        cfg.hyper.cf_samples = k;
    }

    let g = load_dataset(data)?;
    let masks = soft_label_leaveout(
        &g.labels,
        cfg.split.num_groups,
        cfg.split.major_share,
        cfg.seed.wrapping_add(16),
    )?;
    let mut hyper = cfg.hyper.clone();
    hyper.seed = cfg.seed;
    let saved = match cfg.method {
        Method::Decaf => SavedModel::Decaf(train_decaf(&g, &masks, &hyper)?),
        Method::Erm => SavedModel::Erm(train_erm(&g, &masks, cfg.backbone, &hyper)?),
    };
    std::fs::create_dir_all(out)?;
    save_checkpoint(
        &out.join("checkpoint.json"),
        &Checkpoint {
            version: CHECKPOINT_VERSION,
            config_fingerprint: cfg.fingerprint(),
            model: saved,
        },
    )?;
    std::fs::write(
        out.join("masks.json"),
        serde_json::to_string(&masks).expect("mask serialization"),
    )?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_predict(checkpoint: &Path, data: &Path, masks: Option<&Path>, out: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let g = load_dataset(data)?;
    let train_mask = match masks {
        Some(path) => load_masks(path)?.train,
        None => vec![true; g.n()],
    };
    let (probs, classes) = match &ckpt.model {
        SavedModel::Decaf(model) => predict(model, &g, &train_mask, &g, 0)?,
        SavedModel::Erm(model) => erm_predict(model, &g)?,
    };
    let mut text = String::from("node,class");
    for c in 0..probs.cols() {
        text.push_str(&format!(",p{c}"));
    }
    text.push('\n');
    for i in 0..g.n() {
        text.push_str(&format!("{i},{}", classes[i]));
        for p in probs.row(i) {
            text.push_str(&format!(",{p}"));
        }
        text.push('\n');
    }
    std::fs::write(out, text)?;
    println!("predictions written to {}", out.display());
    Ok(())
}

fn cmd_diagnose(train: &Path, test: &Path, checkpoint: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let g_train = load_dataset(train)?;
    let g_test = load_dataset(test)?;
    let encoder = match checkpoint {
        Some(path) => match load_checkpoint(path)?.model {
            SavedModel::Decaf(model) => model.encoder,
            SavedModel::Erm(_) => {
                return Err(Error::invalid("checkpoint holds no neighborhood encoder"))
            }
        },
        None => Encoder {
            weights: Matrix::identity(g_train.d()),
            hops: 1,
        },
    };
    let report = shift_report(&g_train, &g_test, &encoder, None)?;
    match out {
        Some(path) => {
            if path.extension().is_some_and(|e| e == "json") {
                std::fs::write(path, report.to_json())?;
            } else {
                std::fs::write(path, report.to_csv())?;
            }
            println!("report written to {}", path.display());
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_report(dir: &Path) -> Result<()> {
    let mut by_method: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let candidate = if entry.path().is_dir() {
            entry.path().join("report.json")
        } else if entry.file_name() == "report.json" {
            entry.path()
        } else {
            continue;
        };
        if !candidate.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&candidate)?;
        let report: MetricsReport = serde_json::from_str(&text).map_err(|e| Error::Parse {
            file: candidate.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })?;
        by_method
            .entry(report.method.to_string())
            .or_default()
            .push(report.macro_f1.test);
    }
    if by_method.is_empty() {
        return Err(Error::invalid(format!("no report.json files under {}", dir.display())));
    }
    let mut summary = serde_json::Map::new();
    for (method, values) in by_method {
        let agg = aggregate(&values)?;
        summary.insert(
            method,
            serde_json::to_value(agg).expect("aggregate serialization"),
        );
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(summary)).expect("summary")
    );
    Ok(())
}

fn real_main() -> Result<()> {
    let _threads = thread_cap()?; // execution is sequential; the cap is accepted for compatibility
    let cli = Cli::parse();
    match cli.command {
        Command::Generate {
            recipe,
            seed,
            out,
            nodes,
            mean_degree,
            shift,
            magnitude,
        } => cmd_generate(&recipe, seed, &out, nodes, mean_degree, shift.as_deref(), magnitude),
        Command::Split {
            data,
            seed,
            major_share,
            out,
        } => {
            let g = load_dataset(&data)?;
            let masks = soft_label_leaveout(&g.labels, 3, major_share, seed)?;
            std::fs::write(&out, serde_json::to_string(&masks).expect("mask serialization"))?;
            println!("masks written to {}", out.display());
            Ok(())
        }
        Command::Train {
            config,
            data,
            method,
            seed,
            gamma,
            cf_samples,
            out,
        } => cmd_train(
            config.as_deref(),
            &data,
            method.as_deref(),
            seed,
            gamma,
            cf_samples,
            &out,
        ),
        Command::Predict {
            checkpoint,
            data,
            masks,
            out,
        } => cmd_predict(&checkpoint, &data, masks.as_deref(), &out),
        Command::Diagnose {
            train,
            test,
            checkpoint,
            out,
        } => cmd_diagnose(&train, &test, checkpoint.as_deref(), out.as_deref()),
        Command::Run {
            config,
            seed,
            out,
            method,
            recipe,
            shift,
            magnitude,
            gamma,
            cf_samples,
        } => cmd_run(
            config.as_deref(),
            seed,
            out.as_deref(),
            method.as_deref(),
            recipe.as_deref(),
            shift.as_deref(),
            magnitude,
            gamma,
            cf_samples,
        ),
        Command::Report { dir } => cmd_report(&dir),
    }
}

fn main() {
    if let Err(e) = real_main() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
