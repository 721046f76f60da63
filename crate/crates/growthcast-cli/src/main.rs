//! Operator-facing pipeline: generate synthetic series, segment rasters
//! into urban masks, clean masks, tile rasters, train the predictor,
//! predict the next date, and evaluate against truth.
//!
//! Configuration precedence: command-line flags > config file > defaults.
//! The config file is line-oriented `key = value` text; unknown keys are
//! errors. Log level comes from the GROWTHCAST_LOG environment variable.
//! Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.

mod config;

use clap::{Parser, Subcommand};
use config::{CliError, RunConfig};
use growthcast_core::convlstm::{
    load_checkpoint, predict, save_checkpoint, train_model, ConvLstmModel, TrainError,
};
use growthcast_core::exec;
use growthcast_core::maskops::{morph_close_open, remove_small_components, BinaryMask};
use growthcast_core::metrics::{summary_table, ConfusionMatrix, MetricReport, SsimConfig};
use growthcast_core::pipeline::{
    load_raster, make_dataset, persistence_baseline, save_raster, stitch, tile, DatasetRole,
    Raster, TileSet,
};
use growthcast_core::segnet::{
    extract_class_mask, select_urban_label, train_segmentation, write_label_map_png, SegError,
    SegNetModel,
};
use growthcast_core::synth::{generate_series, growth_stats};
use growthcast_core::tensor::RngStream;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "growthcast",
    about = "Urban-expansion prediction: segment multi-date rasters and forecast the next urban mask",
    version
)]
struct Cli {
    /// key=value config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for all randomized steps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic growth series (masks + noisy renders).
    Synth {
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
        /// Number of dates T in the series.
        #[arg(long)]
        dates: Option<usize>,
        /// Initial urban fraction f0.
        #[arg(long)]
        f0: Option<f64>,
        /// Per-step boundary conversion rate g.
        #[arg(long)]
        growth: Option<f64>,
        /// Render noise sigma.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Segment a raster block-wise into a cleaned urban mask.
    Segment {
        input: PathBuf,
        /// Segmentation block size (1024 in the full-scale protocol).
        #[arg(long)]
        block_size: Option<usize>,
        /// Reference mask used to pick the urban label per block.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Explicit urban label id (alternative to --reference).
        #[arg(long)]
        urban_label: Option<u32>,
        /// Small-component removal threshold in pixels.
        #[arg(long)]
        min_area: Option<usize>,
        /// Close/open structuring-element radius.
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Clean a binary mask: remove small components, then close/open.
    Clean {
        input: PathBuf,
        #[arg(long)]
        min_area: Option<usize>,
        #[arg(long)]
        radius: Option<usize>,
    },
    /// Cut a raster into non-overlapping tiles plus a manifest.
    Tile {
        input: PathBuf,
        #[arg(long)]
        tile_size: Option<usize>,
    },
    /// Train the predictor on >= 3 dated masks (train k=1->m=2,
    /// validate k=2->m=3); writes the best-validation checkpoint.
    Train {
        /// Mask rasters in date order (earliest first).
        inputs: Vec<PathBuf>,
        #[arg(long)]
        tile_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict the next-date map from a checkpoint and an input raster.
    Predict {
        checkpoint: PathBuf,
        input: PathBuf,
        #[arg(long)]
        tile_size: Option<usize>,
        /// Binarization threshold for the hard mask output.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Evaluate a prediction against truth; optionally compare with the
    /// persistence baseline fed from --baseline-input.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Input the baseline repeats (typically the last observed date).
        #[arg(long)]
        baseline_input: Option<PathBuf>,
        #[arg(long)]
        tile_size: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GROWTHCAST_LOG")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error[{}]: {}", e.class.label(), e.message);
        std::process::exit(e.class.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    fs::create_dir_all(&cli.out).map_err(|e| {
        CliError::data(format!(
            "cannot create output dir {}: {e}",
            cli.out.display()
        ))
    })?;
    let out = cli.out;

    match cli.command {
        Command::Synth {
            width,
            height,
            dates,
            f0,
            growth,
            noise,
        } => {
            apply(&mut cfg.growth.width, width);
            apply(&mut cfg.growth.height, height);
            apply(&mut cfg.growth.dates, dates);
            apply(&mut cfg.growth.initial_fraction, f0);
            apply(&mut cfg.growth.growth_rate, growth);
            apply(&mut cfg.growth.noise_sigma, noise);
            cmd_synth(&cfg, &out)
        }
        Command::Segment {
            input,
            block_size,
            reference,
            urban_label,
            min_area,
            radius,
        } => {
            apply(&mut cfg.block_size, block_size);
            apply(&mut cfg.clean_min_area, min_area);
            apply(&mut cfg.clean_radius, radius);
            cmd_segment(&cfg, &out, &input, reference.as_deref(), urban_label)
        }
        Command::Clean {
            input,
            min_area,
            radius,
        } => {
            apply(&mut cfg.clean_min_area, min_area);
            apply(&mut cfg.clean_radius, radius);
            cmd_clean(&cfg, &out, &input)
        }
        Command::Tile { input, tile_size } => {
            apply(&mut cfg.tile_size, tile_size);
            cmd_tile(&cfg, &out, &input)
        }
        Command::Train {
            inputs,
            tile_size,
            epochs,
        } => {
            apply(&mut cfg.tile_size, tile_size);
            apply(&mut cfg.train.epochs_max, epochs);
            cmd_train(&cfg, &out, &inputs)
        }
        Command::Predict {
            checkpoint,
            input,
            tile_size,
            threshold,
        } => {
            apply(&mut cfg.tile_size, tile_size);
            apply(&mut cfg.threshold, threshold);
            cmd_predict(&cfg, &out, &checkpoint, &input)
        }
        Command::Evaluate {
            pred,
            truth,
            baseline_input,
            tile_size,
            threshold,
        } => {
            apply(&mut cfg.tile_size, tile_size);
            apply(&mut cfg.threshold, threshold);
            cmd_evaluate(&cfg, &out, &pred, &truth, baseline_input.as_deref())
        }
    }
}

fn apply<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    let mut growth = cfg.growth.clone();
    growth.seed = cfg.seed;
    let series =
        generate_series(&growth).map_err(|e| CliError::config(format!("growth config: {e}")))?;
    for (t, mask) in series.masks.iter().enumerate() {
        save_raster(&Raster::from_mask(mask), &out.join(format!("mask_{t}.png")))?;
    }
    for (t, render) in series.renders.iter().enumerate() {
        save_raster(render, &out.join(format!("render_{t}.png")))?;
    }
    let stats = growth_stats(&series.masks)
        .map_err(|e| CliError::config(format!("growth config: {e}")))?;
    let mut summary = String::from("date,urban_fraction,changed_pixels\n");
    for (t, f) in stats.fractions.iter().enumerate() {
        let changed = if t == 0 {
            String::new()
        } else {
            stats.changed[t - 1].to_string()
        };
        summary.push_str(&format!("{t},{f:.6},{changed}\n"));
    }
    fs::write(out.join("growth_stats.csv"), &summary)
        .map_err(|e| CliError::data(format!("write growth_stats.csv: {e}")))?;
    println!(
        "wrote {} masks and renders to {}",
        series.masks.len(),
        out.display()
    );
    Ok(())
}

fn cleanup_mask(cfg: &RunConfig, mask: &BinaryMask) -> Result<BinaryMask, CliError> {
    let removed = remove_small_components(mask, cfg.clean_min_area)
        .map_err(|e| CliError::config(format!("clean.min_area: {e}")))?;
    Ok(morph_close_open(&removed, cfg.clean_radius))
}

struct BlockSegmentation {
    label_map: growthcast_core::segnet::LabelMap,
    cleaned: BinaryMask,
}

fn segment_block(
    cfg: &RunConfig,
    block: &Raster,
    reference_block: Option<&Raster>,
    urban_label: Option<u32>,
    mut rng: RngStream,
) -> Result<BlockSegmentation, CliError> {
    let (_model, labels): (SegNetModel<f32>, _) =
        train_segmentation(block, &cfg.seg, &mut rng).map_err(seg_to_cli)?;
    let target = match (reference_block, urban_label) {
        (Some(reference), _) => {
            let mask = reference.to_mask(cfg.threshold as f32);
            select_urban_label(&labels, &mask).map_err(seg_to_cli)?
        }
        (None, Some(id)) => id,
        (None, None) => {
            let listing: Vec<String> = labels
                .histogram()
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(id, c)| format!("{id}:{c}px"))
                .collect();
            return Err(CliError::config(format!(
                "no --reference or --urban-label given; observed label histogram: {}",
                listing.join(" ")
            )));
        }
    };
    let raw = extract_class_mask(&labels, target).map_err(seg_to_cli)?;
    let cleaned = cleanup_mask(cfg, &raw)?;
    Ok(BlockSegmentation {
        label_map: labels,
        cleaned,
    })
}

fn cmd_segment(
    cfg: &RunConfig,
    out: &Path,
    input: &Path,
    reference: Option<&Path>,
    urban_label: Option<u32>,
) -> Result<(), CliError> {
    let raster = load_raster(input)?;
    let blocks = tile(&raster, cfg.block_size)?;
    let reference_blocks: Option<TileSet> = match reference {
        Some(path) => {
            let r = load_raster(path)?;
            if r.width() != raster.width() || r.height() != raster.height() {
                return Err(CliError::data(format!(
                    "reference is {}x{} but input is {}x{}",
                    r.width(),
                    r.height(),
                    raster.width(),
                    raster.height()
                )));
            }
            Some(tile(&r, cfg.block_size)?)
        }
        None => None,
    };

    let root = RngStream::new(cfg.seed);
    let indices: Vec<usize> = (0..blocks.len()).collect();
    let results: Vec<Result<BlockSegmentation, CliError>> = exec::map_slice(&indices, |&i| {
        segment_block(
            cfg,
            &blocks.tiles()[i],
            reference_blocks.as_ref().map(|ts| &ts.tiles()[i]),
            urban_label,
            root.derive(i as u64),
        )
    });
    let mut cleaned_tiles = Vec::with_capacity(blocks.len());
    for (i, r) in results.into_iter().enumerate() {
        let seg = r?;
        write_label_map_png(&seg.label_map, &out.join(format!("labels_block{i:03}.png")))
            .map_err(seg_to_cli)?;
        cleaned_tiles.push(Raster::from_mask(&seg.cleaned));
    }
    let mask_set = blocks.with_tiles(cleaned_tiles)?;
    let full = stitch(&mask_set)?;
    save_raster(&full, &out.join("urban_mask.png"))?;
    println!(
        "segmented {} block(s) -> {}",
        blocks.len(),
        out.join("urban_mask.png").display()
    );
    Ok(())
}

fn cmd_clean(cfg: &RunConfig, out: &Path, input: &Path) -> Result<(), CliError> {
    let raster = load_raster(input)?;
    let cleaned = cleanup_mask(cfg, &raster.to_mask(cfg.threshold as f32))?;
    let path = out.join("cleaned.png");
    save_raster(&Raster::from_mask(&cleaned), &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_tile(cfg: &RunConfig, out: &Path, input: &Path) -> Result<(), CliError> {
    let raster = load_raster(input)?;
    let ts = tile(&raster, cfg.tile_size)?;
    let tiles_dir = out.join("tiles");
    fs::create_dir_all(&tiles_dir)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", tiles_dir.display())))?;
    let mut manifest = format!(
        "# growthcast tileset\ntile_size={}\ngrid_cols={}\ngrid_rows={}\norig_width={}\norig_height={}\nbands={}\n",
        ts.tile_size(),
        ts.grid_cols(),
        ts.grid_rows(),
        ts.orig_width(),
        ts.orig_height(),
        ts.bands()
    );
    for (i, t) in ts.tiles().iter().enumerate() {
        let name = format!("t{i:04}.png");
        save_raster(t, &tiles_dir.join(&name))?;
        manifest.push_str(&format!("tile\t{i}\ttiles/{name}\n"));
    }
    fs::write(out.join("tiles.txt"), manifest)
        .map_err(|e| CliError::data(format!("write tiles.txt: {e}")))?;
    println!("wrote {} tiles to {}", ts.len(), tiles_dir.display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, out: &Path, inputs: &[PathBuf]) -> Result<(), CliError> {
    if inputs.len() < 3 {
        return Err(CliError::data(format!(
            "got {} date(s); validation requires k=2, m=3, so at least 3 dated masks are needed",
            inputs.len()
        )));
    }
    let rasters: Vec<Raster> = inputs
        .iter()
        .map(|p| load_raster(p))
        .collect::<Result<_, _>>()?;
    let tilesets: Vec<TileSet> = rasters
        .iter()
        .map(|r| tile(r, cfg.tile_size))
        .collect::<Result<_, _>>()?;
    let train = make_dataset(&tilesets, 1, 2, DatasetRole::Train)?;
    let val = make_dataset(&tilesets, 2, 3, DatasetRole::Validate)?;

    let mut model_cfg = cfg.model.clone();
    model_cfg.in_channels = rasters[0].bands();
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = cfg.seed;
    if train_cfg.batch_size > train.len() {
        log::warn!(
            "batch size {} exceeds the {} available tiles; clamping",
            train_cfg.batch_size,
            train.len()
        );
        train_cfg.batch_size = train.len();
    }

    let mut model = ConvLstmModel::<f32>::init(model_cfg, &mut RngStream::new(cfg.seed))
        .map_err(train_to_cli)?;
    let log = train_model(&mut model, &train, Some(&val), &train_cfg).map_err(train_to_cli)?;
    save_checkpoint(&model, &out.join("model.gckp")).map_err(train_to_cli)?;
    fs::write(out.join("training_log.csv"), log.to_csv())
        .map_err(|e| CliError::data(format!("write training_log.csv: {e}")))?;
    println!(
        "trained {} epoch(s), best validation at epoch {}; checkpoint {}",
        log.epochs.len(),
        log.best_epoch,
        out.join("model.gckp").display()
    );
    Ok(())
}

fn cmd_predict(
    cfg: &RunConfig,
    out: &Path,
    checkpoint: &Path,
    input: &Path,
) -> Result<(), CliError> {
    let model = load_checkpoint(checkpoint).map_err(train_to_cli)?;
    let raster = load_raster(input)?;
    if raster.bands() != model.config().in_channels {
        return Err(CliError::data(format!(
            "input has {} band(s) but the checkpoint expects {}",
            raster.bands(),
            model.config().in_channels
        )));
    }
    let ts = tile(&raster, cfg.tile_size)?;
    let prob_tiles = predict(&model, ts.tiles(), None).map_err(train_to_cli)?;
    let probability = stitch(&ts.with_tiles(prob_tiles)?)?;
    save_raster(&probability, &out.join("prediction.urtn"))?;
    save_raster(&probability, &out.join("prediction.png"))?;
    let hard_tiles = predict(&model, ts.tiles(), Some(cfg.threshold)).map_err(train_to_cli)?;
    let hard = stitch(&ts.with_tiles(hard_tiles)?)?;
    save_raster(&hard, &out.join("predicted_mask.png"))?;
    println!(
        "wrote prediction.png / prediction.urtn / predicted_mask.png to {}",
        out.display()
    );
    Ok(())
}

fn cmd_evaluate(
    cfg: &RunConfig,
    out: &Path,
    pred: &Path,
    truth: &Path,
    baseline_input: Option<&Path>,
) -> Result<(), CliError> {
    let pred_r = load_raster(pred)?;
    let truth_r = load_raster(truth)?;
    if pred_r.width() != truth_r.width() || pred_r.height() != truth_r.height() {
        return Err(CliError::data(format!(
            "prediction {}x{} does not match truth {}x{}",
            pred_r.width(),
            pred_r.height(),
            truth_r.width(),
            truth_r.height()
        )));
    }
    let truth_tiles = tile(&truth_r, cfg.tile_size)?;
    let pred_tiles = tile(&pred_r, cfg.tile_size)?;
    let ssim_cfg = SsimConfig::default();

    let to_tensors = |ts: &[Raster]| -> Vec<growthcast_core::tensor::Tensor<f32>> {
        ts.iter().map(|t| t.to_tensor()).collect()
    };
    let model_report = MetricReport::compute(
        &to_tensors(truth_tiles.tiles()),
        &to_tensors(pred_tiles.tiles()),
        &ssim_cfg,
    )
    .map_err(|e| CliError::data(e.to_string()))?;
    let model_confusion = ConfusionMatrix::from_masks(
        &truth_r.to_mask(cfg.threshold as f32),
        &pred_r.to_mask(cfg.threshold as f32),
    )
    .map_err(|e| CliError::data(e.to_string()))?;

    let baseline = match baseline_input {
        Some(path) => {
            let input_r = load_raster(path)?;
            let base_tiles = persistence_baseline(tile(&input_r, cfg.tile_size)?.tiles());
            let report = MetricReport::compute(
                &to_tensors(truth_tiles.tiles()),
                &to_tensors(&base_tiles),
                &ssim_cfg,
            )
            .map_err(|e| CliError::data(e.to_string()))?;
            let confusion = ConfusionMatrix::from_masks(
                &truth_r.to_mask(cfg.threshold as f32),
                &input_r.to_mask(cfg.threshold as f32),
            )
            .map_err(|e| CliError::data(e.to_string()))?;
            Some((report, confusion))
        }
        None => None,
    };

    let mut csv = model_report.to_csv("model");
    if let Some((report, _)) = &baseline {
        csv.push_str(&report.to_csv("persistence"));
    }
    fs::write(out.join("metrics.csv"), &csv)
        .map_err(|e| CliError::data(format!("write metrics.csv: {e}")))?;

    let mut entries = vec![("model", &model_report)];
    if let Some((report, _)) = &baseline {
        entries.push(("persistence", report));
    }
    let mut report_text = summary_table(&entries);
    report_text.push('\n');
    report_text.push_str(&model_confusion.normalized_table("model"));
    if let Some((_, confusion)) = &baseline {
        report_text.push('\n');
        report_text.push_str(&confusion.normalized_table("persistence"));
    }
    fs::write(out.join("report.txt"), &report_text)
        .map_err(|e| CliError::data(format!("write report.txt: {e}")))?;
    print!("{report_text}");
    Ok(())
}

fn seg_to_cli(e: SegError) -> CliError {
    match e {
        SegError::BadConfig(_) => CliError::config(e.to_string()),
        SegError::NonFiniteLoss { .. } => CliError::numeric(e.to_string()),
        other => CliError::data(other.to_string()),
    }
}

fn train_to_cli(e: TrainError) -> CliError {
    match e {
        TrainError::BadConfig(_) | TrainError::BatchTooLarge { .. } => {
            CliError::config(e.to_string())
        }
        TrainError::NonFiniteLoss { .. } => CliError::numeric(e.to_string()),
        other => CliError::data(other.to_string()),
    }
}
