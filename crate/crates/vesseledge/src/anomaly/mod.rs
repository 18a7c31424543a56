//! Prototype-based movement-anomaly detection.
//!
//! The model is a 0.01-degree lat/lon grid; each populated cell holds a
//! small Gaussian mixture over the movement features (sog, sin cog,
//! cos cog). Course is embedded as a sin/cos pair so the 0/360 wrap does
//! not tear the distribution. A record is anomalous when its log density
//! under its cell's mixture falls below the calibrated threshold; records
//! in cells the model has never seen are anomalous by definition.

mod codec;
mod federate;
pub mod gmm;
mod history;

pub use codec::{deserialize, serialize};
pub use federate::federate;
pub use gmm::{GaussianComponent, Sym3, COV_FLOOR, FEATURE_DIM};
pub use history::{AnomalyHistory, DEFAULT_HISTORY_DEPTH};

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::core_model::{AisRecord, CoreError};

/// Surrogate score for records in cells with no prototype: the minimum
/// representable score, strictly below any calibrated threshold.
pub const EMPTY_CELL_SCORE: f64 = f64::MIN;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("cannot train on an empty record stream")]
    EmptyTrainingSet,
    #[error("cannot calibrate on an empty holdout")]
    EmptyHoldout,
    #[error("quantile {0} outside [0, 100]")]
    InvalidQuantile(f64),
    #[error("model is not calibrated; run calibrate_threshold first")]
    Uncalibrated,
    #[error("model configurations differ: {0}")]
    ConfigMismatch(String),
    #[error("model file format error: {0}")]
    Format(String),
    #[error("invalid record: {0}")]
    InvalidRecord(#[from] CoreError),
}

/// Training configuration. `seed` pins the k-means++ initialization so a
/// given input always yields the same model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub cell_size_deg: f64,
    pub max_components: usize,
    pub em_iterations: usize,
    /// Cells with fewer samples fall back to a single diagonal component.
    pub min_cell_samples: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cell_size_deg: 0.01,
            max_components: 3,
            em_iterations: 25,
            min_cell_samples: 50,
            seed: 0,
        }
    }
}

/// Spatial grid cell key: latitude index in the high 32 bits, longitude
/// index in the low 32 bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellId(pub i64);

impl CellId {
    pub fn from_position(lat: f64, lon: f64, cell_size_deg: f64) -> Self {
        let lat_idx = (lat / cell_size_deg).floor() as i32;
        let lon_idx = (lon / cell_size_deg).floor() as i32;
        Self::from_indices(lat_idx, lon_idx)
    }

    pub fn from_indices(lat_idx: i32, lon_idx: i32) -> Self {
        let packed = ((lat_idx as u32 as u64) << 32) | (lon_idx as u32 as u64);
        CellId(packed as i64)
    }

    pub fn indices(self) -> (i32, i32) {
        let packed = self.0 as u64;
        ((packed >> 32) as u32 as i32, packed as u32 as i32)
    }
}

/// Movement features of one record: (sog, sin cog, cos cog).
pub fn features(rec: &AisRecord) -> [f64; 3] {
    let rad = rec.cog.to_radians();
    [rec.sog, rad.sin(), rad.cos()]
}

/// Per-cell mixture prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPrototype {
    pub components: Vec<GaussianComponent>,
    pub sample_count: u64,
}

/// The anomaly knowledge: a grid of cell prototypes plus the calibrated
/// score threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeModel {
    cell_size_deg: f64,
    max_components: usize,
    grid: BTreeMap<CellId, CellPrototype>,
    pub trained_count: u64,
    pub score_threshold: Option<f64>,
}

impl PrototypeModel {
    pub fn empty(cell_size_deg: f64, max_components: usize) -> Self {
        Self {
            cell_size_deg,
            max_components,
            grid: BTreeMap::new(),
            trained_count: 0,
            score_threshold: None,
        }
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn max_components(&self) -> usize {
        self.max_components
    }

    pub fn cell_count(&self) -> usize {
        self.grid.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellId, &CellPrototype)> {
        self.grid.iter()
    }

    pub fn cell(&self, id: CellId) -> Option<&CellPrototype> {
        self.grid.get(&id)
    }

    pub fn cell_of(&self, rec: &AisRecord) -> CellId {
        CellId::from_position(rec.lat, rec.lon, self.cell_size_deg)
    }

    pub(crate) fn insert_cell(&mut self, id: CellId, cell: CellPrototype) {
        self.grid.insert(id, cell);
    }
}

fn mix_seed(seed: u64, cell: CellId) -> u64 {
    // splitmix64 over the cell id, xored with the run seed
    let mut z = (cell.0 as u64).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (z ^ (z >> 31)) ^ seed
}

/// Fits one mixture per populated cell by EM on (sog, sin cog, cos cog).
/// Deterministic given `config.seed`.
pub fn train<'a>(
    records: impl IntoIterator<Item = &'a AisRecord>,
    config: &ModelConfig,
) -> Result<PrototypeModel, ModelError> {
    let mut per_cell: BTreeMap<CellId, Vec<[f64; 3]>> = BTreeMap::new();
    let mut total = 0u64;
    for rec in records {
        rec.validate()?;
        let id = CellId::from_position(rec.lat, rec.lon, config.cell_size_deg);
        per_cell.entry(id).or_default().push(features(rec));
        total += 1;
    }
    if total == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }

    let mut model = PrototypeModel::empty(config.cell_size_deg, config.max_components);
    model.trained_count = total;
    for (id, samples) in per_cell {
        let components = if samples.len() < config.min_cell_samples {
            vec![gmm::fit_single_diag(&samples)]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, id));
            gmm::fit_gmm(
                &samples,
                config.max_components,
                config.em_iterations,
                &mut rng,
            )
        };
        model.insert_cell(
            id,
            CellPrototype {
                components,
                sample_count: samples.len() as u64,
            },
        );
    }
    Ok(model)
}

/// One online EM step with learning rate `1/sample_count`; a record landing
/// in an unseen cell bootstraps a fresh single-component prototype.
pub fn update(model: &mut PrototypeModel, rec: &AisRecord) -> Result<(), ModelError> {
    rec.validate()?;
    let x = features(rec);
    let id = model.cell_of(rec);
    match model.grid.get_mut(&id) {
        None => {
            model.grid.insert(
                id,
                CellPrototype {
                    components: vec![GaussianComponent {
                        weight: 1.0,
                        mean: x,
                        cov: Sym3::scaled_identity(COV_FLOOR),
                    }],
                    sample_count: 1,
                },
            );
        }
        Some(cell) => {
            cell.sample_count += 1;
            let eta = 1.0 / cell.sample_count as f64;

            // responsibilities under the current mixture
            let logs: Vec<f64> = cell
                .components
                .iter()
                .map(|c| c.weight.max(f64::MIN_POSITIVE).ln() + c.log_density(&x))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logs.iter().map(|l| (l - max).exp()).sum();

            for (c, l) in cell.components.iter_mut().zip(&logs) {
                let r = (l - max).exp() / total;
                c.weight += eta * (r - c.weight);
                if c.weight <= 0.0 {
                    continue;
                }
                let rho = eta * r / c.weight;
                let d_old = [x[0] - c.mean[0], x[1] - c.mean[1], x[2] - c.mean[2]];
                for (m, d) in c.mean.iter_mut().zip(&d_old) {
                    *m += rho * d;
                }
                let d_new = [x[0] - c.mean[0], x[1] - c.mean[1], x[2] - c.mean[2]];
                let mut inc = Sym3::zero();
                inc.add_sym_outer(&d_old, &d_new, 1.0);
                inc.add(&c.cov, -1.0);
                c.cov.add(&inc, rho);
                c.cov.regularize(COV_FLOOR);
            }
            // keep the mixture exactly normalized against fp drift
            let sum: f64 = cell.components.iter().map(|c| c.weight).sum();
            if sum > 0.0 {
                for c in cell.components.iter_mut() {
                    c.weight /= sum;
                }
            }
        }
    }
    model.trained_count += 1;
    Ok(())
}

/// Log density of the record's features under its cell's mixture;
/// [`EMPTY_CELL_SCORE`] for unpopulated cells.
pub fn score(model: &PrototypeModel, rec: &AisRecord) -> f64 {
    match model.cell(model.cell_of(rec)) {
        Some(cell) => gmm::log_mixture_density(&cell.components, &features(rec)),
        None => EMPTY_CELL_SCORE,
    }
}

/// Sets the threshold to the q-th percentile of the holdout scores.
///
/// With `k = ceil(q/100 * n)`: `q = 0` pins the threshold at the minimum
/// holdout score (flags nothing in the holdout under the strict comparison),
/// `k >= n` lifts it above every holdout score (flags everything), otherwise
/// the threshold is the k-th smallest score, so exactly k holdout scores sit
/// at or below it when scores are distinct.
pub fn calibrate_threshold<'a>(
    model: &mut PrototypeModel,
    holdout: impl IntoIterator<Item = &'a AisRecord>,
    q: f64,
) -> Result<(), ModelError> {
    if !(0.0..=100.0).contains(&q) || q.is_nan() {
        return Err(ModelError::InvalidQuantile(q));
    }
    let mut scores: Vec<f64> = holdout.into_iter().map(|r| score(model, r)).collect();
    if scores.is_empty() {
        return Err(ModelError::EmptyHoldout);
    }
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let k = ((q / 100.0) * n as f64).ceil() as usize;
    let threshold = if k == 0 {
        scores[0]
    } else if k >= n {
        f64::MAX
    } else {
        scores[k - 1]
    };
    model.score_threshold = Some(threshold);
    Ok(())
}

/// True iff the record scores strictly below the calibrated threshold.
pub fn flag(model: &PrototypeModel, rec: &AisRecord) -> Result<bool, ModelError> {
    let threshold = model.score_threshold.ok_or(ModelError::Uncalibrated)?;
    Ok(score(model, rec) < threshold)
}

/// Flags the record in place; returns the flag value.
pub fn flag_record(model: &PrototypeModel, rec: &mut AisRecord) -> Result<bool, ModelError> {
    let v = flag(model, rec)?;
    rec.anomaly = v;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::VesselId;
    use rand::Rng;

    fn rec(sog: f64, cog: f64, lat: f64, lon: f64) -> AisRecord {
        AisRecord::new(
            VesselId::new(219000001).unwrap(),
            0,
            lat,
            lon,
            sog,
            cog,
            None,
        )
        .unwrap()
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            min_cell_samples: 0,
            ..Default::default()
        }
    }

    #[test]
    fn train_rejects_empty_input() {
        let recs: Vec<AisRecord> = vec![];
        assert_eq!(
            train(recs.iter(), &ModelConfig::default()),
            Err(ModelError::EmptyTrainingSet)
        );
    }

    #[test]
    fn cell_id_round_trips_indices() {
        for (lat, lon) in [(57.705, 11.905), (-33.86, 151.21), (0.0, 0.0)] {
            let id = CellId::from_position(lat, lon, 0.01);
            let (li, lo) = id.indices();
            assert_eq!(CellId::from_indices(li, lo), id);
        }
        // negative coordinates floor downward
        let id = CellId::from_position(-0.004, -0.004, 0.01);
        assert_eq!(id.indices(), (-1, -1));
    }

    #[test]
    fn trained_weights_sum_to_one() {
        let recs: Vec<AisRecord> = (0..300)
            .map(|i| rec(5.0 + (i % 60) as f64 * 0.2, 45.0, 57.005, 10.005))
            .collect();
        let model = train(recs.iter(), &ModelConfig::default()).unwrap();
        for (_, cell) in model.cells() {
            let sum: f64 = cell.components.iter().map(|c| c.weight).sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            for c in &cell.components {
                assert!(c.cov.min_eigenvalue() >= COV_FLOOR * 0.999_999);
            }
        }
        assert_eq!(model.trained_count, 300);
    }

    #[test]
    fn update_fixed_point_at_component_mean() {
        let recs: Vec<AisRecord> = (0..100).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let mut model = train(recs.iter(), &ModelConfig::default()).unwrap();
        let id = model.cell_of(&recs[0]);
        let mean_before = model.cell(id).unwrap().components[0].mean;
        // feed a record exactly at the component mean: sog 8, cog 90
        update(&mut model, &rec(8.0, 90.0, 57.005, 10.005)).unwrap();
        let mean_after = model.cell(id).unwrap().components[0].mean;
        for d in 0..3 {
            assert!((mean_after[d] - mean_before[d]).abs() <= 1e-9);
        }
    }

    #[test]
    fn streaming_matches_batch_for_single_component() {
        // batch-vs-online oracle, K = 1
        let recs: Vec<AisRecord> = (0..200)
            .map(|i| rec(4.0 + (i % 23) as f64 * 0.37, 120.0, 57.005, 10.005))
            .collect();
        let config = ModelConfig {
            max_components: 1,
            min_cell_samples: 0,
            ..Default::default()
        };
        let batch = train(recs.iter(), &config).unwrap();

        let mut online = PrototypeModel::empty(config.cell_size_deg, config.max_components);
        for r in &recs {
            update(&mut online, r).unwrap();
        }
        let id = batch.cell_of(&recs[0]);
        let bm = batch.cell(id).unwrap().components[0].mean;
        let om = online.cell(id).unwrap().components[0].mean;
        for d in 0..3 {
            assert!(
                (bm[d] - om[d]).abs() <= 1e-6,
                "dim {d}: {} vs {}",
                bm[d],
                om[d]
            );
        }
    }

    #[test]
    fn update_into_empty_cell_bootstraps() {
        let mut model = PrototypeModel::empty(0.01, 3);
        let r = rec(6.0, 180.0, 55.5, 12.5);
        update(&mut model, &r).unwrap();
        assert_eq!(model.cell_count(), 1);
        let cell = model.cell(model.cell_of(&r)).unwrap();
        assert_eq!(cell.components.len(), 1);
        assert_eq!(cell.sample_count, 1);
        assert_eq!(cell.components[0].mean, features(&r));
    }

    #[test]
    fn update_rejects_invalid_record() {
        let mut model = PrototypeModel::empty(0.01, 3);
        let mut bad = rec(5.0, 0.0, 57.0, 10.0);
        bad.lat = 95.0;
        assert!(matches!(
            update(&mut model, &bad),
            Err(ModelError::InvalidRecord(_))
        ));
    }

    #[test]
    fn score_at_mean_matches_analytic_density() {
        let recs: Vec<AisRecord> = (0..10).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let model = train(recs.iter(), &ModelConfig::default()).unwrap();
        let id = model.cell_of(&recs[0]);
        let comp = &model.cell(id).unwrap().components[0];
        // analytic gaussian log density at its own mean
        let det = comp.cov.det();
        let expected = -0.5 * ((2.0 * std::f64::consts::PI).powi(3) * det).ln();
        let got = score(&model, &recs[0]);
        assert!((got - expected).abs() <= 1e-9 * expected.abs());
    }

    #[test]
    fn score_matches_brute_force_mixture() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::from_seed([3; 32]);
        let recs: Vec<AisRecord> = (0..400)
            .map(|_| {
                rec(
                    r.random_range(2.0..20.0),
                    r.random_range(0.0..360.0),
                    57.005,
                    10.005,
                )
            })
            .collect();
        let model = train(recs.iter(), &small_config()).unwrap();
        let id = model.cell_of(&recs[0]);
        let cell = model.cell(id).unwrap();
        for probe in recs.iter().take(50) {
            let got = score(&model, probe);
            let x = features(probe);
            let want = cell
                .components
                .iter()
                .map(|c| c.weight * gmm::naive_density(c, &x))
                .sum::<f64>()
                .ln();
            assert!(
                (got - want).abs() <= 1e-9 * want.abs().max(1.0),
                "{got} vs {want}"
            );
        }
    }

    #[test]
    fn empty_cell_scores_minimum() {
        let recs: Vec<AisRecord> = (0..10).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let model = train(recs.iter(), &ModelConfig::default()).unwrap();
        let elsewhere = rec(8.0, 90.0, 30.0, -40.0);
        assert_eq!(score(&model, &elsewhere), EMPTY_CELL_SCORE);
    }

    #[test]
    fn calibrate_quantile_edges() {
        let recs: Vec<AisRecord> = (0..100)
            .map(|i| rec(8.0 + i as f64 * 0.05, 90.0, 57.005, 10.005))
            .collect();
        let mut model = train(recs.iter(), &ModelConfig::default()).unwrap();

        calibrate_threshold(&mut model, recs.iter(), 0.0).unwrap();
        let flagged = recs.iter().filter(|r| flag(&model, r).unwrap()).count();
        assert_eq!(flagged, 0, "q=0 flags nothing in holdout");

        calibrate_threshold(&mut model, recs.iter(), 100.0).unwrap();
        let flagged = recs.iter().filter(|r| flag(&model, r).unwrap()).count();
        assert_eq!(flagged, recs.len(), "q=100 flags everything");

        assert_eq!(
            calibrate_threshold(&mut model, [].iter(), 1.0),
            Err(ModelError::EmptyHoldout)
        );
        assert_eq!(
            calibrate_threshold(&mut model, recs.iter(), 101.0),
            Err(ModelError::InvalidQuantile(101.0))
        );
    }

    #[test]
    fn calibrate_percentile_sort_oracle() {
        // 10,000 distinct scores: exactly ceil(1%) = 100 at or below threshold
        let recs: Vec<AisRecord> = (0..10_000)
            .map(|i| rec(8.0 + i as f64 * 0.001, 90.0, 57.005, 10.005))
            .collect();
        let mut model = train(recs.iter(), &small_config()).unwrap();
        calibrate_threshold(&mut model, recs.iter(), 1.0).unwrap();
        let threshold = model.score_threshold.unwrap();

        let mut scores: Vec<f64> = recs.iter().map(|r| score(&model, r)).collect();
        scores.sort_by(f64::total_cmp);
        let at_or_below = scores.iter().filter(|&&s| s <= threshold).count();
        assert_eq!(at_or_below, 100);
    }

    #[test]
    fn flag_boundary_is_strict() {
        let recs: Vec<AisRecord> = (0..50).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let mut model = train(recs.iter(), &ModelConfig::default()).unwrap();
        let probe = rec(9.0, 90.0, 57.005, 10.005);
        model.score_threshold = Some(score(&model, &probe));
        assert!(
            !flag(&model, &probe).unwrap(),
            "score == threshold is not anomalous"
        );
        let worse = rec(12.0, 90.0, 57.005, 10.005);
        assert!(flag(&model, &worse).unwrap());
    }

    #[test]
    fn empty_cell_flags_once_calibrated() {
        let recs: Vec<AisRecord> = (0..50).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let mut model = train(recs.iter(), &ModelConfig::default()).unwrap();
        calibrate_threshold(&mut model, recs.iter(), 1.0).unwrap();
        let elsewhere = rec(8.0, 90.0, 30.0, -40.0);
        assert!(flag(&model, &elsewhere).unwrap());
    }

    #[test]
    fn flag_requires_calibration() {
        let recs: Vec<AisRecord> = (0..10).map(|_| rec(8.0, 90.0, 57.005, 10.005)).collect();
        let model = train(recs.iter(), &ModelConfig::default()).unwrap();
        assert_eq!(flag(&model, &recs[0]), Err(ModelError::Uncalibrated));
    }

    #[test]
    fn injected_offdistribution_recall() {
        use rand::SeedableRng;
        // synthetic injection oracle: train on harbor-speed traffic,
        // inject 1% fast movers, expect recall >= 0.9 at q=1
        let mut r = rand_chacha::ChaCha8Rng::from_seed([11; 32]);
        let normal = |r: &mut rand_chacha::ChaCha8Rng| {
            rec(
                8.0 + r.random_range(-2.0..2.0),
                90.0 + r.random_range(-10.0..10.0),
                57.005 + r.random_range(-0.004..0.004),
                10.005 + r.random_range(-0.004..0.004),
            )
        };
        let train_set: Vec<AisRecord> = (0..4000).map(|_| normal(&mut r)).collect();
        let holdout: Vec<AisRecord> = (0..2000).map(|_| normal(&mut r)).collect();
        let mut model = train(train_set.iter(), &ModelConfig::default()).unwrap();
        calibrate_threshold(&mut model, holdout.iter(), 1.0).unwrap();

        let injected: Vec<AisRecord> = (0..20)
            .map(|_| {
                rec(
                    30.0 + r.random_range(0.0..5.0),
                    270.0,
                    57.005 + r.random_range(-0.004..0.004),
                    10.005 + r.random_range(-0.004..0.004),
                )
            })
            .collect();
        let hits = injected.iter().filter(|x| flag(&model, x).unwrap()).count();
        assert!(
            hits as f64 / injected.len() as f64 >= 0.9,
            "recall {hits}/20"
        );
    }

    #[test]
    fn update_preserves_invariants_over_stream() {
        use rand::SeedableRng;
        let mut r = rand_chacha::ChaCha8Rng::from_seed([5; 32]);
        let mut model = PrototypeModel::empty(0.01, 3);
        for _ in 0..5_000 {
            let x = rec(
                r.random_range(0.0..25.0),
                r.random_range(0.0..360.0),
                57.0 + r.random_range(0.0..0.05),
                10.0 + r.random_range(0.0..0.05),
            );
            update(&mut model, &x).unwrap();
        }
        for (_, cell) in model.cells() {
            let sum: f64 = cell.components.iter().map(|c| c.weight).sum();
            assert!((sum - 1.0).abs() <= 1e-9, "weight sum {sum}");
            for c in &cell.components {
                assert!(c.cov.min_eigenvalue() >= COV_FLOOR * 0.999);
            }
        }
    }
}
