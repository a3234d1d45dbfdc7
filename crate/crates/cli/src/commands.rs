use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use clicksel::backend::{synth_scene_with, train_with_progress, ProbabilityBackend, ReferenceModel, SynthConfig, TrainConfig};
use clicksel::dataset::{load_dataset, split, write_dataset, LabeledScene, Manifest, Split};
use clicksel::encoding::ClickSet;
use clicksel::graphcut::EnergyParams;
use clicksel::pairs::{load_pairs, write_pairs, PairManifest, PairSet};
use clicksel::raster::{load_image, save_image, save_mask};
use clicksel::sampling::{generate_pairs, pair_rng, InstanceScene};
use clicksel::simulator::{evaluate_dataset, EvalConfig, EvalReport, OracleSegmenter, Pipeline};
use clicksel::{BinaryMask, Image};
use clicksel_service::{replay, AppState, ServiceConfig, SharedPipeline};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{EvaluateArgs, SampleArgs, SegmentArgs, ServeArgs, SplitArgs, SynthArgs, TrainArgs};
use crate::error::{CliError, CliResult};

/// Options shared by every subcommand.
#[derive(Debug, Clone, Copy, Default)]
pub struct Globals {
    pub seed: u64,
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serializes");
    text.push('\n');
    write_text(path, &text)
}

/// Seed of scene `index` in a run seeded with `seed` (splitmix64 finalizer).
pub fn scene_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn synth(args: &SynthArgs, globals: Globals) -> CliResult<Manifest> {
    if args.test_count > args.count {
        return Err(CliError::Param(format!(
            "--test-count {} exceeds --count {}",
            args.test_count, args.count
        )));
    }
    if args.size < 16 || args.min_shapes == 0 || args.min_shapes > args.max_shapes {
        return Err(CliError::Param("need --size >= 16 and 1 <= --min-shapes <= --max-shapes".into()));
    }
    let config = SynthConfig { size: args.size, min_shapes: args.min_shapes, max_shapes: args.max_shapes };
    let first_test = args.count - args.test_count;
    let scenes: Vec<LabeledScene> = (0..args.count)
        .into_par_iter()
        .map(|i| LabeledScene {
            id: format!("scene{i:05}"),
            split: if i < first_test { Split::Train } else { Split::Test },
            scene: synth_scene_with(scene_seed(globals.seed, i as u64), &config),
        })
        .collect();
    create_dir(&args.out)?;
    let manifest = write_dataset(&args.out, &scenes)?;
    info!("wrote {} scenes to {}", scenes.len(), args.out.display());
    Ok(manifest)
}

pub fn split_cmd(args: &SplitArgs, globals: Globals) -> CliResult<Manifest> {
    let manifest = Manifest::read(&args.dataset)?;
    let updated = split(&manifest, args.val_count, globals.seed)?;
    updated.write(&args.dataset)?;
    info!("{} train, {} val, {} test", updated.count(Split::Train), updated.count(Split::Val), updated.count(Split::Test));
    Ok(updated)
}

fn scenes_in(root: &Path, which: Split) -> CliResult<Vec<LabeledScene>> {
    Ok(load_dataset(root)?.into_iter().filter(|s| s.split == which).collect())
}

pub fn sample(args: &SampleArgs, globals: Globals) -> CliResult<PairManifest> {
    let params = args.sampling.params(globals.seed);
    params.validate()?;
    let mut sources: Vec<(String, InstanceScene)> =
        scenes_in(&args.dataset, args.split)?.into_iter().map(|s| (s.id, s.scene)).collect();
    if args.flip {
        let flipped: Vec<_> = sources.iter().map(|(id, s)| (format!("{id}-flip"), s.flip_horizontal())).collect();
        sources.extend(flipped);
    }

    let jobs: Vec<(usize, usize)> = sources
        .iter()
        .enumerate()
        .flat_map(|(i, (_, s))| (0..s.instances.len()).map(move |k| (i, k)))
        .collect();
    let sampled = jobs
        .par_iter()
        .map(|&(i, k)| {
            let (id, scene) = &sources[i];
            let source_id = format!("{id}/{k}");
            let mut rng = pair_rng(params.seed, &source_id);
            generate_pairs(scene, k, &params, &source_id, &mut rng).map(|pairs| (i, pairs))
        })
        .collect::<clicksel::Result<Vec<_>>>()?;

    let mut set = PairSet::default();
    for (i, pairs) in sampled {
        set.pairs.extend(pairs.into_iter().map(|p| (i, p)));
    }
    set.images = sources.into_iter().map(|(_, s)| s.image).collect();
    create_dir(&args.out)?;
    let manifest = write_pairs(&args.out, &set, Some(&params))?;
    info!("wrote {} pairs from {} objects to {}", set.len(), jobs.len(), args.out.display());
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainHistory {
    pub config: TrainConfig,
    pub pairs: usize,
    /// Mean training loss of each epoch.
    pub loss: Vec<f64>,
    pub seconds: f64,
}

pub fn train(args: &TrainArgs, globals: Globals) -> CliResult<(ReferenceModel<f32>, TrainHistory)> {
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: globals.seed,
        crop: args.crop,
    };
    config.validate()?;
    let set = load_pairs(&args.pairs)?;
    info!("training on {} pairs", set.len());
    let started = Instant::now();
    let (model, loss) =
        train_with_progress(ReferenceModel::reference(globals.seed), &set.refs(), &config, |epoch, loss| {
            info!("epoch {} loss {loss:.4} ({:.0?})", epoch + 1, started.elapsed());
        })?;
    let history = TrainHistory { config, pairs: set.len(), loss, seconds: started.elapsed().as_secs_f64() };

    if let Some(dir) = args.model_out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    model.save(&args.model_out)?;
    let history_path = args.history.clone().unwrap_or_else(|| {
        let mut p = args.model_out.clone().into_os_string();
        p.push(".history.json");
        p.into()
    });
    write_json(&history_path, &history)?;
    Ok((model, history))
}

fn load_backend(path: &Path) -> CliResult<Arc<dyn ProbabilityBackend>> {
    Ok(Arc::new(ReferenceModel::<f32>::load(path)?))
}

pub fn read_clicks(args: &SegmentArgs) -> CliResult<ClickSet> {
    let text = match (&args.clicks, &args.clicks_file) {
        (Some(inline), _) => inline.clone(),
        (None, Some(path)) => std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?,
        (None, None) => return Err(CliError::Param("one of --clicks or --clicks-file is required".into())),
    };
    Ok(ClickSet::from_json_str(&text)?)
}

fn probability_image(q: &clicksel::ProbabilityMap) -> Image {
    Image::from_fn(q.height(), q.width(), |r, c| {
        let v = (q.get(r, c) * 255.0).round() as u8;
        [v, v, v]
    })
    .expect("dimensions come from a valid map")
}

/// Writes the mask for one image and click list. An empty list gives the
/// all-background mask, as in a fresh service session.
pub fn segment(args: &SegmentArgs, _globals: Globals) -> CliResult<BinaryMask> {
    let energy = args.energy.params();
    energy.validate()?;
    let pipeline: SharedPipeline =
        Pipeline::new(load_backend(&args.model)?, energy).with_graphcut(!args.energy.no_graphcut);
    let image = load_image(&args.image)?;
    let clicks = read_clicks(args)?;
    clicks.check_bounds(image.height(), image.width())?;
    let (mask, probability) = replay(&pipeline, &image, &clicks)?;
    save_mask(&mask, &args.out)?;
    if let Some(path) = &args.prob_out {
        let q = match probability {
            Some(q) => q,
            None => pipeline.predict(&image, &clicks)?,
        };
        save_image(&probability_image(&q), path)?;
    }
    info!("{} of {} pixels selected", mask.count(), image.height() * image.width());
    Ok(mask)
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaTrial {
    pub lambda: f64,
    pub mean_clicks: Vec<f64>,
    pub mean_iu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaSelection {
    pub split: Split,
    pub trials: Vec<LambdaTrial>,
    pub chosen: f64,
}

/// Lowest mean clicks at the highest threshold wins; ties go to the higher
/// mean IU over the curve, then to the earlier grid entry.
pub fn choose_lambda(trials: &[LambdaTrial]) -> Option<f64> {
    let key = |t: &LambdaTrial| (t.mean_clicks.last().copied().unwrap_or(f64::INFINITY), -t.mean_iu);
    trials
        .iter()
        .reduce(|best, t| if key(t) < key(best) { t } else { best })
        .map(|t| t.lambda)
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub report: EvalReport,
    pub selection: Option<LambdaSelection>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

pub fn evaluate(args: &EvaluateArgs, _globals: Globals) -> CliResult<EvalOutcome> {
    let config = EvalConfig { thresholds: args.thresholds.clone(), max_clicks: args.max_clicks };
    if config.max_clicks == 0 {
        return Err(CliError::Param("--max-clicks must be at least 1".into()));
    }
    let all = load_dataset(&args.dataset)?;
    let scenes: Vec<LabeledScene> = all.iter().filter(|s| s.split == args.split).cloned().collect();
    if scenes.is_empty() {
        return Err(CliError::Param(format!("dataset has no {} scenes", args.split)));
    }

    let mut selection = None;
    let report = if args.oracle_segmenter {
        let seg = OracleSegmenter::new(scenes.iter().map(|s| (s.scene.image.clone(), s.scene.instances.clone())));
        evaluate_dataset(&seg, &scenes, &config)?
    } else {
        let model = args.model.as_ref().ok_or_else(|| CliError::Param("--model is required".into()))?;
        let backend = load_backend(model)?;
        let mut energy = args.energy.params();
        energy.validate()?;
        if let Some(grid) = &args.lambda_grid {
            if args.energy.no_graphcut {
                return Err(CliError::Param("--lambda-grid has no effect with --no-graphcut".into()));
            }
            let tune: Vec<LabeledScene> = all.iter().filter(|s| s.split == args.tune_split).cloned().collect();
            if tune.is_empty() {
                return Err(CliError::Param(format!("--lambda-grid needs {} scenes", args.tune_split)));
            }
            let mut trials = Vec::with_capacity(grid.len());
            for &lambda in grid {
                let candidate = EnergyParams { lambda, ..energy };
                candidate.validate()?;
                let started = Instant::now();
                let seg = Pipeline::new(backend.clone(), candidate);
                let r = evaluate_dataset(&seg, &tune, &config)?;
                let trial = LambdaTrial {
                    lambda,
                    mean_clicks: r.mean_clicks.iter().map(|m| m.mean_clicks).collect(),
                    mean_iu: mean(&r.mean_curve),
                };
                info!("lambda {lambda}: mean clicks {:?} ({:.1?})", trial.mean_clicks, started.elapsed());
                trials.push(trial);
            }
            let chosen = choose_lambda(&trials).ok_or_else(|| CliError::Param("--lambda-grid is empty".into()))?;
            energy.lambda = chosen;
            selection = Some(LambdaSelection { split: args.tune_split, trials, chosen });
        }
        let seg = Pipeline::new(backend, energy).with_graphcut(!args.energy.no_graphcut);
        evaluate_dataset(&seg, &scenes, &config)?
    };

    create_dir(&args.out)?;
    write_text(&args.out.join("report.json"), &format!("{}\n", report.to_json()))?;
    write_text(&args.out.join("report.txt"), &report.to_text_table())?;
    write_text(&args.out.join("curve.csv"), &report.to_curve_csv())?;
    if let Some(sel) = &selection {
        write_json(&args.out.join("lambda_selection.json"), sel)?;
    }
    info!("evaluated {} objects", report.objects);
    Ok(EvalOutcome { report, selection })
}

pub fn serve(args: &ServeArgs, _globals: Globals) -> CliResult<()> {
    let energy = args.energy.params();
    energy.validate()?;
    if args.max_image_dim == 0 || args.session_ttl == 0 {
        return Err(CliError::Param("--max-image-dim and --session-ttl must be positive".into()));
    }
    let pipeline = Pipeline::new(load_backend(&args.model)?, energy).with_graphcut(!args.energy.no_graphcut);
    let config = ServiceConfig::with_limits(args.max_image_dim, Duration::from_secs(args.session_ttl));
    let state = AppState::new(pipeline, config);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Other(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Other(format!("cannot listen on {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| CliError::Other(e.to_string()))?);
        clicksel_service::serve(listener, state)
            .await
            .map_err(|e| CliError::Other(format!("server error: {e}")))
    })
}
