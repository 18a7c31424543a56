//! Batch replay: ingest -> detect -> window -> compress -> link ->
//! reconstruct -> evaluate, once per (algorithm, fraction) pair, with
//! deterministic outputs for a given config, input bytes, and seed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::Instant;

use super::config::{Algorithm, InputFormat, ScenarioConfig};
use super::manifest::RunManifest;
use super::HarnessError;
use crate::anomaly::{self, AnomalyHistory, ModelConfig, PrototypeModel};
use crate::compress::{bwc_dr, bwc_dr_a, dr_simplify, BudgetSpec, SelectionResult, WindowBatch};
use crate::core_model::{window_of, AisRecord, TimeWindow, Trajectory, VesselId};
use crate::ingest::{self, CleanParams, CleanReport};
use crate::near_edge::{evaluate, persist, redetect, MetricsReport, ReconstructedStore};
use crate::wire;

pub struct ReplayOutput {
    pub manifest: RunManifest,
    pub metrics: MetricsReport,
    pub out_dir: PathBuf,
    pub metrics_path: PathBuf,
    /// True when a sweep saw a distortion ordering violation.
    pub monotonicity_violated: bool,
}

fn stage<E: std::fmt::Display>(name: &'static str) -> impl Fn(E) -> HarnessError {
    move |e| HarnessError::Stage {
        stage: name,
        message: e.to_string(),
    }
}

/// Reads and cleans the configured input.
pub fn load_records(
    config: &ScenarioConfig,
) -> Result<(Vec<AisRecord>, CleanReport), HarnessError> {
    let path = &config.input.path;
    let (decoded, mut report) = match config.input.format {
        InputFormat::Csv => ingest::read_dma_csv(path)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?,
        InputFormat::Nmea => {
            let file = std::fs::File::open(path)
                .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
            ingest::read_nmea(std::io::BufReader::new(file), None)
                .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?
        }
    };
    if let Some(dump) = &config.dump_json {
        let mut file = std::fs::File::create(dump).map_err(stage("dump-json"))?;
        ingest::dump_json(&decoded, &mut file).map_err(stage("dump-json"))?;
    }
    let (cleaned, clean_report) = ingest::clean(
        decoded,
        CleanParams {
            stale_after_s: config.pipeline.stale_after_s,
        },
    );
    report.chain(&clean_report);
    Ok((cleaned, report))
}

fn load_clean_csv(
    path: &std::path::Path,
    stale_after_s: i64,
) -> Result<Vec<AisRecord>, HarnessError> {
    let (records, _) = ingest::read_dma_csv(path)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
    let (cleaned, _) = ingest::clean(records, CleanParams { stale_after_s });
    Ok(cleaned)
}

/// Loads or trains the detector, then calibrates it. The calibration
/// holdout is, in order of preference: the configured holdout file, the
/// training stream, the replay input itself.
pub fn prepare_model(
    config: &ScenarioConfig,
    input_records: &[AisRecord],
) -> Result<PrototypeModel, HarnessError> {
    let model_cfg = ModelConfig {
        cell_size_deg: config.model.cell_size_deg,
        max_components: config.model.components,
        em_iterations: config.model.em_iterations,
        min_cell_samples: config.model.min_cell_samples,
        seed: config.seed,
    };

    let train_records: Option<Vec<AisRecord>> = match &config.model.train {
        Some(path) => Some(load_clean_csv(path, config.pipeline.stale_after_s)?),
        None => None,
    };
    let holdout_records: Option<Vec<AisRecord>> = match &config.model.calibrate {
        Some(path) => Some(load_clean_csv(path, config.pipeline.stale_after_s)?),
        None => None,
    };

    let mut model = match &config.model.path {
        Some(path) if path.exists() => {
            let bytes = std::fs::read(path).map_err(stage("model-load"))?;
            anomaly::deserialize(&bytes).map_err(stage("model-load"))?
        }
        _ => {
            let records = train_records.as_deref().unwrap_or(input_records);
            anomaly::train(records.iter(), &model_cfg).map_err(stage("train"))?
        }
    };

    let holdout = holdout_records
        .as_deref()
        .or(train_records.as_deref())
        .unwrap_or(input_records);
    anomaly::calibrate_threshold(&mut model, holdout.iter(), config.model.calibrate_quantile)
        .map_err(stage("calibrate"))?;
    Ok(model)
}

/// Runs the detector over the records in place; returns the flagged count.
pub fn flag_records(
    model: &PrototypeModel,
    records: &mut [AisRecord],
) -> Result<u64, HarnessError> {
    let mut flagged = 0;
    for rec in records.iter_mut() {
        if anomaly::flag_record(model, rec).map_err(stage("detect"))? {
            flagged += 1;
        }
    }
    Ok(flagged)
}

/// Records grouped per window index, plus the detector-flagged vessels of
/// each window (the history feed).
pub fn window_groups(
    records: &[AisRecord],
    window_s: u32,
) -> Result<BTreeMap<i64, Vec<AisRecord>>, HarnessError> {
    let mut groups: BTreeMap<i64, Vec<AisRecord>> = BTreeMap::new();
    for rec in records {
        let w = window_of(rec.timestamp, window_s).map_err(stage("window"))?;
        groups.entry(w.index).or_default().push(*rec);
    }
    Ok(groups)
}

/// One window's selection under the configured algorithm.
pub fn select_one(
    algorithm: Algorithm,
    batch: &WindowBatch,
    budget: &BudgetSpec,
    history: &AnomalyHistory,
    boost_factor: f64,
    dr_threshold_m: f64,
) -> Result<SelectionResult, HarnessError> {
    match algorithm {
        Algorithm::BwcDr => bwc_dr(batch, budget).map_err(stage("compress")),
        Algorithm::BwcDrA => {
            bwc_dr_a(batch, budget, history, boost_factor).map_err(stage("compress"))
        }
        Algorithm::Dr => {
            // per-vessel threshold baseline wrapped in the same result shape
            let mut kept: BTreeMap<VesselId, Vec<AisRecord>> = BTreeMap::new();
            let mut total = 0;
            for (vessel, points) in batch.vessels() {
                total += points.len();
                let traj = Trajectory::from_points(points.clone()).map_err(stage("compress"))?;
                let sel = dr_simplify(&traj, dr_threshold_m).map_err(stage("compress"))?;
                if let Some(pts) = sel.kept.get(vessel) {
                    kept.insert(*vessel, pts.clone());
                }
            }
            Ok(SelectionResult::from_kept(kept, total))
        }
    }
}

struct PairRun {
    packets: Vec<wire::TimedPacket>,
    windows: u64,
}

/// Compresses and encodes every window of one (algorithm, fraction) pair.
fn compress_pair(
    config: &ScenarioConfig,
    groups: &BTreeMap<i64, Vec<AisRecord>>,
    algorithm: Algorithm,
    fraction: f64,
) -> Result<PairRun, HarnessError> {
    let window_s = config.pipeline.window_seconds;
    let budget = BudgetSpec::with_floor(fraction, config.pipeline.budget_floor)
        .map_err(stage("compress"))?;
    let mut history = AnomalyHistory::new(config.pipeline.history_windows);
    let mut packets = Vec::new();
    let mut windows = 0;

    let (Some(&first), Some(&last)) = (groups.keys().next(), groups.keys().next_back()) else {
        return Ok(PairRun {
            packets,
            windows: 0,
        });
    };

    for index in first..=last {
        let window = TimeWindow::from_index(index, window_s).map_err(stage("window"))?;
        let flagged: BTreeSet<VesselId> = match groups.get(&index) {
            Some(records) => {
                let batch =
                    WindowBatch::new(window, records.iter().copied()).map_err(stage("window"))?;
                let selection = select_one(
                    algorithm,
                    &batch,
                    &budget,
                    &history,
                    config.pipeline.boost_factor,
                    config.pipeline.dr_threshold_m,
                )?;
                let bytes = wire::encode(&selection, &window, config.live.far_edge_id)
                    .map_err(stage("encode"))?;
                packets.push(wire::TimedPacket {
                    arrival_s: window.end() as f64,
                    bytes,
                });
                windows += 1;
                batch.flagged_vessels()
            }
            None => BTreeSet::new(),
        };
        history.push_completed(index, flagged);
    }
    Ok(PairRun { packets, windows })
}

fn pair_label(algorithm: Algorithm, fraction: f64) -> String {
    format!("{}_{}", algorithm.name().to_ascii_lowercase(), fraction)
}

/// Full batch replay per the configured (algorithm, fraction) grid.
pub fn run_replay(config: &ScenarioConfig) -> Result<ReplayOutput, HarnessError> {
    run_replay_inner(config, false)
}

/// Replay plus the sweep's distortion-ordering check: for each algorithm,
/// average distortion must be non-increasing as the fraction grows.
/// Violations are recorded in the manifest, not fatal.
pub fn sweep(
    config: &ScenarioConfig,
    fractions: Option<&[f64]>,
) -> Result<ReplayOutput, HarnessError> {
    let mut config = config.clone();
    if let Some(f) = fractions {
        if f.is_empty() {
            return Err(HarnessError::Config("empty fraction list".into()));
        }
        config.pipeline.fractions = f.to_vec();
    }
    run_replay_inner(&config, true)
}

fn run_replay_inner(
    config: &ScenarioConfig,
    check_monotonicity: bool,
) -> Result<ReplayOutput, HarnessError> {
    config
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.out_dir).map_err(stage("setup"))?;
    let mut manifest = RunManifest::new(config.seed, config.to_text());
    manifest
        .stamp_input(&config.input.path)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", config.input.path.display())))?;

    let t0 = Instant::now();
    let (mut records, report) = load_records(config)?;
    manifest.timing("ingest_ms", t0.elapsed().as_millis() as u64);
    manifest.count("records_in", report.records_in);
    manifest.count("records_cleaned", report.records_out);
    manifest.count("records_rejected", report.rejected_total());
    let clean_path = config.out_dir.join("clean_report.csv");
    std::fs::write(&clean_path, report.to_csv()).map_err(stage("setup"))?;
    if records.is_empty() {
        return Err(HarnessError::Input(format!(
            "{}: no records survived cleaning",
            config.input.path.display()
        )));
    }

    let t1 = Instant::now();
    let model = prepare_model(config, &records)?;
    manifest.timing("model_ms", t1.elapsed().as_millis() as u64);
    manifest.count("model_cells", model.cell_count() as u64);

    let t2 = Instant::now();
    let flagged = flag_records(&model, &mut records)?;
    manifest.timing("detect_ms", t2.elapsed().as_millis() as u64);
    manifest.count("anomalies_detected", flagged);

    let groups = window_groups(&records, config.pipeline.window_seconds)?;
    manifest.count("windows", groups.len() as u64);

    let mut metrics = MetricsReport::default();
    let mut delivered_total = 0u64;
    let mut dropped_total = 0u64;
    let mut output_paths: Vec<PathBuf> = vec![clean_path];

    let t3 = Instant::now();
    for &fraction in &config.pipeline.fractions {
        for &algorithm in &config.pipeline.algorithms {
            let run = compress_pair(config, &groups, algorithm, fraction)?;
            let outcome =
                wire::channel_transmit(run.packets, &config.channel).map_err(stage("channel"))?;
            delivered_total += outcome.delivered.len() as u64;
            dropped_total += outcome.dropped as u64;

            let label = pair_label(algorithm, fraction);
            let capture_path = config.out_dir.join(format!("capture_{label}.vecl"));
            let captured: Vec<(f64, Vec<u8>)> = outcome
                .delivered
                .iter()
                .map(|d| (d.delivery_s, d.bytes.clone()))
                .collect();
            wire::write_capture(&capture_path, &captured).map_err(stage("capture"))?;
            output_paths.push(capture_path);

            let mut store = ReconstructedStore::new();
            for d in &outcome.delivered {
                let packet = wire::decode(&d.bytes, config.pipeline.window_seconds)
                    .map_err(stage("decode"))?;
                store
                    .insert_packet(&packet.window, packet.edge_id, &packet.points)
                    .map_err(stage("merge"))?;
            }
            redetect(&mut store, &model).map_err(stage("redetect"))?;
            let row = evaluate(
                &records,
                &store,
                fraction,
                algorithm.name(),
                config.pipeline.budget_floor,
            )
            .map_err(stage("evaluate"))?;
            metrics.rows.push(row);

            let store_path = config.out_dir.join(format!("store_{label}.csv"));
            // replays overwrite rather than append across runs
            let _ = std::fs::remove_file(&store_path);
            persist(&store, &store_path).map_err(stage("persist"))?;
            output_paths.push(store_path);
            manifest.count(&format!("windows_{label}"), run.windows);
            manifest.count(&format!("store_points_{label}"), store.point_count() as u64);
        }
    }
    manifest.timing("pipeline_ms", t3.elapsed().as_millis() as u64);
    manifest.count("packets_delivered", delivered_total);
    manifest.count("packets_dropped", dropped_total);

    metrics.sort();
    let mut violated = false;
    if check_monotonicity {
        for violation in monotonicity_violations(&metrics) {
            violated = true;
            manifest.monotonicity_violations.push(violation);
        }
    }

    let metrics_path = config.out_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics.to_csv()).map_err(stage("metrics"))?;
    output_paths.push(metrics_path.clone());

    for path in &output_paths {
        manifest.stamp_output(path).map_err(stage("manifest"))?;
    }
    let manifest_path = config.out_dir.join("manifest.json");
    manifest.write(&manifest_path).map_err(stage("manifest"))?;

    Ok(ReplayOutput {
        manifest,
        metrics,
        out_dir: config.out_dir.clone(),
        metrics_path,
        monotonicity_violated: violated,
    })
}

/// Distortion must not grow when the budget does, per algorithm.
pub fn monotonicity_violations(metrics: &MetricsReport) -> Vec<String> {
    let mut per_alg: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &metrics.rows {
        per_alg
            .entry(row.algorithm.as_str())
            .or_default()
            .push((row.fraction, row.avg_distortion_m));
    }
    let mut out = Vec::new();
    for (alg, mut rows) in per_alg {
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in rows.windows(2) {
            let (f1, d1) = pair[0];
            let (f2, d2) = pair[1];
            if d2 > d1 {
                out.push(format!(
                    "{alg}: distortion rose from {d1} m at fraction {f1} to {d2} m at {f2}"
                ));
            }
        }
    }
    out
}
