//! `shadowvae`: dataset ingestion, training, interpolation media, level
//! checks and the HTTP server, all over one data directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::{json, Value};

use shadowvae_core::dataset::{build_drawn_dataset, parse_idx, DigitDataset, StrokeSet, DEFAULT_SPLIT_SEED};
use shadowvae_core::game::{solve, Level};
use shadowvae_core::media::{
    encode_gif, interpolate, parse_pgm, write_pgm, Endpoint, FrameSequence, InterpolationSpec, DEFAULT_FRAME_DELAY_CS,
};
use shadowvae_core::trainer::{train, ProgressEvent, ProgressSink, TrainConfig};
use shadowvae_core::IMAGE_PIXELS;
use shadowvae_service::{new_id, now_secs, port_from_env, valid_id, ModelMeta, ServiceConfig, Store};

#[derive(Parser)]
#[command(name = "shadowvae", version, about = "Train and explore a small MNIST VAE, and play the shadow game")]
struct Cli {
    /// Directory holding datasets, models and media.
    #[arg(long, global = true, env = "SHADOWVAE_DATA_DIR", default_value = "./shadowvae-data")]
    data_dir: PathBuf,
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import an IDX image file (and optional label file) as a dataset.
    IngestIdx {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Dataset id; generated when omitted.
        #[arg(long)]
        id: Option<String>,
        /// Seed for the train/test split.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rasterize two files of drawings into a two-digit dataset.
    DrawImport {
        /// JSON array of stroke sets for the first digit (label 0).
        #[arg(long)]
        digit_a: PathBuf,
        /// JSON array of stroke sets for the second digit (label 1).
        #[arg(long)]
        digit_b: PathBuf,
        #[arg(long)]
        num_images_per_digit: usize,
        #[arg(long)]
        id: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
        seed: u64,
    },
    /// Train a model on a dataset, creating the model if it does not exist.
    Train(TrainArgs),
    /// Decode a straight line between two latent codes into a GIF.
    Interpolate(InterpolateArgs),
    /// Assemble PGM frames into an animated GIF.
    ExportGif {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FRAME_DELAY_CS)]
        delay_cs: u16,
        /// Play once instead of looping.
        #[arg(long)]
        no_loop: bool,
        #[arg(required = true)]
        frames: Vec<PathBuf>,
    },
    /// Check that level files are valid and solvable.
    LevelCheck {
        #[arg(required = true)]
        levels: Vec<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        port: Option<u16>,
        /// Training worker threads.
        #[arg(long, env = "SHADOWVAE_WORKERS", default_value_t = 1)]
        workers: usize,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: String,
    /// Model id; an existing model keeps training, otherwise a new one is made.
    #[arg(long)]
    model: Option<String>,
    /// TrainConfig JSON file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    freeze_up_to: Option<usize>,
}

#[derive(Args)]
struct InterpolateArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    num_images: usize,
    #[arg(long)]
    out: PathBuf,
    /// Dataset for `--index-a/--index-b`; defaults to the model's training set.
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset image for endpoint a; defaults to the first image labelled 0.
    #[arg(long)]
    index_a: Option<usize>,
    /// Dataset image for endpoint b; defaults to the first image labelled 1.
    #[arg(long)]
    index_b: Option<usize>,
    /// PGM file for endpoint a.
    #[arg(long)]
    image_a: Option<PathBuf>,
    #[arg(long)]
    image_b: Option<PathBuf>,
    /// Latent code for endpoint a, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    latent_a: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    latent_b: Option<Vec<f64>>,
    /// With `false`, also write every frame as `<out>-NN.pgm`.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    show_gif_only: bool,
    #[arg(long, default_value_t = DEFAULT_FRAME_DELAY_CS)]
    frame_delay_cs: u16,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_mode = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json_mode {
                eprintln!("{}", json!({ "error": format!("{e:#}") }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}

/// Prints `value` as JSON, or `text` otherwise.
fn emit(json_mode: bool, value: Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{value}");
    } else {
        println!("{}", text());
    }
}

fn run(cli: Cli) -> Result<()> {
    let json_mode = cli.json;
    if let Command::Serve { port, workers } = cli.command {
        return serve(cli.data_dir, port, workers);
    }
    if let Command::LevelCheck { levels } = &cli.command {
        return level_check(levels, json_mode);
    }
    if let Command::ExportGif {
        out,
        delay_cs,
        no_loop,
        frames,
    } = &cli.command
    {
        return export_gif(frames, out, *delay_cs, !no_loop, json_mode);
    }

    let store = Store::open(&cli.data_dir).with_context(|| format!("opening {}", cli.data_dir.display()))?;
    match cli.command {
        Command::IngestIdx { images, labels, id, seed } => {
            let image_bytes = fs::read(&images).with_context(|| format!("reading {}", images.display()))?;
            let label_bytes = labels
                .as_ref()
                .map(|p| fs::read(p).with_context(|| format!("reading {}", p.display())))
                .transpose()?;
            let mut ds = parse_idx(&image_bytes, label_bytes.as_deref())?;
            if let Some(seed) = seed {
                ds = ds.resplit(seed);
            }
            save_dataset(&store, id, &ds, json_mode)
        }
        Command::DrawImport {
            digit_a,
            digit_b,
            num_images_per_digit,
            id,
            seed,
        } => {
            let ds = build_drawn_dataset(&read_strokes(&digit_a)?, &read_strokes(&digit_b)?, num_images_per_digit, seed)?;
            save_dataset(&store, id, &ds, json_mode)
        }
        Command::Train(args) => run_train(&store, args, json_mode),
        Command::Interpolate(args) => run_interpolate(&store, args, json_mode),
        Command::ExportGif { .. } | Command::LevelCheck { .. } | Command::Serve { .. } => unreachable!(),
    }
}

fn read_strokes(path: &Path) -> Result<Vec<StrokeSet>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a JSON array of stroke sets", path.display()))
}

fn checked_id(id: Option<String>, what: &str) -> Result<String> {
    let id = id.unwrap_or_else(new_id);
    if !valid_id(&id) {
        bail!("invalid {what} id {id:?}: use letters, digits, '-' or '_'");
    }
    Ok(id)
}

fn save_dataset(store: &Store, id: Option<String>, ds: &DigitDataset, json_mode: bool) -> Result<()> {
    let id = checked_id(id, "dataset")?;
    store.put_dataset_as(&id, ds)?;
    let split = ds.split();
    if ds.split_warning() {
        eprintln!("warning: too few images for a test split; all {} images are used for training", ds.len());
    }
    emit(
        json_mode,
        json!({
            "dataset_id": id,
            "fingerprint": ds.fingerprint(),
            "len": ds.len(),
            "train": split.train.len(),
            "test": split.test.len(),
            "split_warning": ds.split_warning(),
        }),
        || format!("dataset {id}: {} images ({} train, {} test)", ds.len(), split.train.len(), split.test.len()),
    );
    Ok(())
}

struct StderrProgress {
    quiet: bool,
}

impl ProgressSink for StderrProgress {
    fn on_epoch(&mut self, e: &ProgressEvent) {
        if self.quiet {
            return;
        }
        let test = e.test_total.map_or("-".to_string(), |t| format!("{t:.3}"));
        eprintln!(
            "epoch {:>4}  train {:.3} (bce {:.3}, kl {:.3})  test {test}",
            e.epoch, e.train_total, e.train_bce, e.train_kl
        );
    }
}

fn run_train(store: &Store, args: TrainArgs, json_mode: bool) -> Result<()> {
    let (dataset, _) = store
        .get_dataset(&args.dataset)?
        .ok_or_else(|| anyhow!("unknown dataset {:?}", args.dataset))?;
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{} is not a valid TrainConfig", path.display()))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => { $(if let Some(v) = args.$field { cfg.$field = v; })* };
    }
    set!(epochs, batch_size, learning_rate, seed, hidden_dim, latent_dim);
    if args.freeze_up_to.is_some() {
        cfg.freeze_up_to = args.freeze_up_to;
    }

    let model_id = checked_id(args.model, "model")?;
    let mut model = match store.get_model(&model_id)? {
        Some(m) => {
            if (args.hidden_dim.is_some() && m.hidden_dim() != cfg.hidden_dim)
                || (args.latent_dim.is_some() && m.latent_dim() != cfg.latent_dim)
            {
                bail!(
                    "model {model_id} has hidden_dim {} and latent_dim {}",
                    m.hidden_dim(),
                    m.latent_dim()
                );
            }
            cfg.hidden_dim = m.hidden_dim();
            cfg.latent_dim = m.latent_dim();
            m
        }
        None => cfg.init_model()?,
    };
    let report = train(&mut model, &dataset, &cfg, &mut StderrProgress { quiet: json_mode })?;
    let meta = ModelMeta {
        id: model_id.clone(),
        hidden_dim: model.hidden_dim(),
        latent_dim: model.latent_dim(),
        fingerprint: model.fingerprint(),
        dataset_id: Some(args.dataset.clone()),
        config: Some(cfg.clone()),
        report: Some(report.clone()),
        updated_at: now_secs(),
    };
    store.put_model(&model, &meta)?;
    let last = report.epochs.last();
    emit(
        json_mode,
        json!({ "model_id": model_id, "fingerprint": meta.fingerprint, "config": cfg, "report": report }),
        || match last {
            Some(e) => format!("model {model_id}: {} epochs, final train loss {:.3}", report.epochs.len(), e.train_total),
            None => format!("model {model_id}: no epochs run"),
        },
    );
    Ok(())
}

fn read_pgm_endpoint(path: &Path) -> Result<Endpoint> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let image = parse_pgm(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    if image.pixels().len() != IMAGE_PIXELS {
        bail!("{} is {}x{}, expected 28x28", path.display(), image.width(), image.height());
    }
    Ok(Endpoint::Image(image.pixels().iter().map(|&p| p as f64 / 255.0).collect()))
}

fn run_interpolate(store: &Store, args: InterpolateArgs, json_mode: bool) -> Result<()> {
    let model = store
        .get_model(&args.model)?
        .ok_or_else(|| anyhow!("unknown model {:?}", args.model))?;

    let mut dataset: Option<DigitDataset> = None;
    let mut load_dataset = || -> Result<DigitDataset> {
        if let Some(ds) = &dataset {
            return Ok(ds.clone());
        }
        let id = match &args.dataset {
            Some(id) => id.clone(),
            None => store
                .get_model_meta(&args.model)?
                .and_then(|m| m.dataset_id)
                .ok_or_else(|| anyhow!("model {} has no training dataset; pass --dataset or explicit endpoints", args.model))?,
        };
        let (ds, _) = store.get_dataset(&id)?.ok_or_else(|| anyhow!("unknown dataset {id:?}"))?;
        dataset = Some(ds.clone());
        Ok(ds)
    };
    let mut endpoint = |latent: &Option<Vec<f64>>, image: &Option<PathBuf>, index: Option<usize>, label: u8| {
        if let Some(z) = latent {
            return Ok(Endpoint::Latent(z.clone()));
        }
        if let Some(path) = image {
            return read_pgm_endpoint(path);
        }
        let ds = load_dataset()?;
        let i = match index {
            Some(i) => i,
            None => ds
                .labels()
                .and_then(|l| l.iter().position(|&v| v == label))
                .ok_or_else(|| anyhow!("dataset has no image labelled {label}; pass an explicit index"))?,
        };
        if i >= ds.len() {
            bail!("image index {i} out of range for a dataset of {}", ds.len());
        }
        Ok(Endpoint::Image(ds.image(i).data().to_vec()))
    };
    let endpoint_a = endpoint(&args.latent_a, &args.image_a, args.index_a, 0)?;
    let endpoint_b = endpoint(&args.latent_b, &args.image_b, args.index_b, 1)?;

    let spec = InterpolationSpec {
        endpoint_a,
        endpoint_b,
        num_images: args.num_images,
        show_gif_only: args.show_gif_only,
        frame_delay_cs: args.frame_delay_cs,
    };
    let frames = interpolate(&model, &spec)?;
    fs::write(&args.out, encode_gif(&frames, spec.frame_delay_cs, true))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let mut frame_paths = Vec::new();
    if !spec.show_gif_only {
        let stem = args.out.with_extension("");
        for (i, frame) in frames.frames().iter().enumerate() {
            let path = PathBuf::from(format!("{}-{i:02}.pgm", stem.display()));
            fs::write(&path, write_pgm(frame)).with_context(|| format!("writing {}", path.display()))?;
            frame_paths.push(path.display().to_string());
        }
    }
    emit(
        json_mode,
        json!({ "out": args.out.display().to_string(), "num_frames": frames.len(), "frames": frame_paths }),
        || format!("wrote {} ({} frames)", args.out.display(), frames.len()),
    );
    Ok(())
}

fn export_gif(paths: &[PathBuf], out: &Path, delay_cs: u16, loop_forever: bool, json_mode: bool) -> Result<()> {
    let frames = paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            parse_pgm(&bytes).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let seq = FrameSequence::new(frames)?;
    fs::write(out, encode_gif(&seq, delay_cs, loop_forever)).with_context(|| format!("writing {}", out.display()))?;
    emit(
        json_mode,
        json!({ "out": out.display().to_string(), "num_frames": seq.len() }),
        || format!("wrote {} ({} frames)", out.display(), seq.len()),
    );
    Ok(())
}

fn level_check(paths: &[PathBuf], json_mode: bool) -> Result<()> {
    let mut unsolvable = Vec::new();
    for path in paths {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let level = Level::from_json(&text).with_context(|| format!("loading {}", path.display()))?;
        let solution = solve(&level);
        let verdict = if solution.is_some() { "solvable" } else { "unsolvable" };
        let cells: Option<Vec<[i32; 3]>> = solution.map(|o| o.cells.iter().map(|&c| c.into()).collect());
        emit(
            json_mode,
            json!({ "level": level.name, "path": path.display().to_string(), "verdict": verdict, "solution": cells }),
            || {
                if paths.len() == 1 {
                    verdict.to_string()
                } else {
                    format!("{}: {verdict}", path.display())
                }
            },
        );
        if cells.is_none() {
            unsolvable.push(path.display().to_string());
        }
    }
    if !unsolvable.is_empty() {
        bail!("unsolvable: {}", unsolvable.join(", "));
    }
    Ok(())
}

fn serve(data_dir: PathBuf, port: Option<u16>, workers: usize) -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = ServiceConfig { data_dir, workers };
    let port = port.unwrap_or_else(port_from_env);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .with_context(|| format!("binding port {port}"))?;
        shadowvae_service::serve(listener, &config).await?;
        Ok(())
    })
}
