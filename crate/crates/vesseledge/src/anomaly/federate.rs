//! Federation: merging prototype models trained on decentralized data
//! without exchanging the data itself.
//!
//! Cells seen by a single model pass through unchanged. Cells shared by
//! several models pool their components, weighted by the per-model sample
//! counts, then reduce back to the component budget by repeatedly
//! moment-matching the closest pair (mean distance scaled by pooled
//! variance as a symmetrized-KL proxy). Components are kept in a canonical
//! order throughout, which makes the merge permutation-invariant.

use std::collections::BTreeMap;

use super::gmm::{sort_components, GaussianComponent, Sym3, COV_FLOOR, FEATURE_DIM};
use super::{CellId, CellPrototype, ModelError, PrototypeModel};

/// Merges models cell-wise into one. `weights` are per-model sample counts
/// (typically `trained_count`); they set the relative mass of shared cells.
pub fn federate(models: &[PrototypeModel], weights: &[u64]) -> Result<PrototypeModel, ModelError> {
    if models.is_empty() {
        return Err(ModelError::ConfigMismatch("no models to federate".into()));
    }
    if models.len() != weights.len() {
        return Err(ModelError::ConfigMismatch(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    if weights.iter().sum::<u64>() == 0 {
        return Err(ModelError::ConfigMismatch("all weights zero".into()));
    }
    let cell_size = models[0].cell_size_deg();
    let k = models[0].max_components();
    for m in models.iter().skip(1) {
        if m.cell_size_deg().to_bits() != cell_size.to_bits() {
            return Err(ModelError::ConfigMismatch(format!(
                "cell size {} vs {}",
                m.cell_size_deg(),
                cell_size
            )));
        }
        if m.max_components() != k {
            return Err(ModelError::ConfigMismatch(format!(
                "component budget {} vs {}",
                m.max_components(),
                k
            )));
        }
    }

    // gather contributions per cell in deterministic cell order
    let mut contributions: BTreeMap<CellId, Vec<(u64, &CellPrototype)>> = BTreeMap::new();
    for (model, &w) in models.iter().zip(weights) {
        for (&id, cell) in model.cells() {
            contributions.entry(id).or_default().push((w, cell));
        }
    }

    let mut out = PrototypeModel::empty(cell_size, k);
    out.trained_count = models.iter().map(|m| m.trained_count).sum();
    out.score_threshold = None; // recalibrate after federation

    for (id, contribs) in contributions {
        let merged = if contribs.len() == 1 {
            contribs[0].1.clone()
        } else {
            merge_cell(&contribs, k)
        };
        out.insert_cell(id, merged);
    }
    Ok(out)
}

fn merge_cell(contribs: &[(u64, &CellPrototype)], k: usize) -> CellPrototype {
    let total_weight: u64 = contribs.iter().map(|(w, _)| w).sum();
    let sample_count: u64 = contribs.iter().map(|(_, c)| c.sample_count).sum();

    // order-independent pooling: sort contributions canonically first
    let mut pooled: Vec<GaussianComponent> = Vec::new();
    for (w, cell) in contribs {
        let share = *w as f64 / total_weight as f64;
        for c in &cell.components {
            pooled.push(GaussianComponent {
                weight: c.weight * share,
                mean: c.mean,
                cov: c.cov,
            });
        }
    }
    sort_components(&mut pooled);

    // coinciding components coalesce unconditionally, so federating a model
    // with itself reproduces its structure; then reduce to the budget
    const DUPLICATE_EPS: f64 = 1e-12;
    while pooled.len() > 1 {
        let (i, j) = closest_pair(&pooled);
        if pooled.len() <= k && pair_distance(&pooled[i], &pooled[j]) > DUPLICATE_EPS {
            break;
        }
        let merged = moment_match(&pooled[i], &pooled[j]);
        pooled.remove(j);
        pooled[i] = merged;
        sort_components(&mut pooled);
    }

    let sum: f64 = pooled.iter().map(|c| c.weight).sum();
    if sum > 0.0 {
        for c in &mut pooled {
            c.weight /= sum;
        }
    }
    CellPrototype {
        components: pooled,
        sample_count,
    }
}

/// Distance proxy: squared mean distance over pooled average variance.
fn pair_distance(a: &GaussianComponent, b: &GaussianComponent) -> f64 {
    let d2: f64 = a
        .mean
        .iter()
        .zip(&b.mean)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let pooled_var = (a.cov.trace() + b.cov.trace()) / (2.0 * FEATURE_DIM as f64);
    d2 / pooled_var.max(COV_FLOOR)
}

fn closest_pair(components: &[GaussianComponent]) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_d = f64::INFINITY;
    for i in 0..components.len() {
        for j in (i + 1)..components.len() {
            let d = pair_distance(&components[i], &components[j]);
            if d < best_d {
                best_d = d;
                best = (i, j);
            }
        }
    }
    best
}

/// Weight-preserving merge of two Gaussians: the mixture's first two
/// moments are kept exactly.
fn moment_match(a: &GaussianComponent, b: &GaussianComponent) -> GaussianComponent {
    let w = a.weight + b.weight;
    let (fa, fb) = (a.weight / w, b.weight / w);
    let mut mean = [0.0; 3];
    for (m, (ma, mb)) in mean.iter_mut().zip(a.mean.iter().zip(&b.mean)) {
        *m = fa * ma + fb * mb;
    }
    let mut cov = Sym3::zero();
    cov.add(&a.cov, fa);
    cov.add(&b.cov, fb);
    let da = [
        a.mean[0] - mean[0],
        a.mean[1] - mean[1],
        a.mean[2] - mean[2],
    ];
    let db = [
        b.mean[0] - mean[0],
        b.mean[1] - mean[1],
        b.mean[2] - mean[2],
    ];
    cov.add_sym_outer(&da, &da, fa);
    cov.add_sym_outer(&db, &db, fb);
    cov.regularize(COV_FLOOR);
    GaussianComponent {
        weight: w,
        mean,
        cov,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anomaly::{score, train, ModelConfig};
    use crate::core_model::{AisRecord, VesselId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    fn sample_model(seed: u64, lat0: f64, lon0: f64) -> PrototypeModel {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let recs: Vec<AisRecord> = (0..600)
            .map(|_| {
                rec(
                    r.random_range(4.0..16.0),
                    r.random_range(40.0..140.0),
                    lat0 + r.random_range(0.0..0.03),
                    lon0 + r.random_range(0.0..0.03),
                )
            })
            .collect();
        train(recs.iter(), &ModelConfig::default()).unwrap()
    }

    #[test]
    fn single_model_identity() {
        let m = sample_model(1, 57.0, 10.8);
        let f = federate(std::slice::from_ref(&m), &[m.trained_count]).unwrap();
        for ((ida, a), (idb, b)) in m.cells().zip(f.cells()) {
            assert_eq!(ida, idb);
            assert_eq!(a.sample_count, b.sample_count);
            assert_eq!(a.components, b.components);
        }
        assert_eq!(f.trained_count, m.trained_count);
    }

    #[test]
    fn self_federation_preserves_means() {
        let m = sample_model(2, 57.0, 10.8);
        let f = federate(&[m.clone(), m.clone()], &[100, 100]).unwrap();
        assert_eq!(f.cell_count(), m.cell_count());
        for ((_, a), (_, b)) in m.cells().zip(f.cells()) {
            assert_eq!(a.components.len(), b.components.len());
            for (ca, cb) in a.components.iter().zip(&b.components) {
                for d in 0..3 {
                    assert!((ca.mean[d] - cb.mean[d]).abs() <= 1e-9);
                }
                assert!((ca.weight - cb.weight).abs() <= 1e-9);
            }
        }
        assert_eq!(f.trained_count, 2 * m.trained_count);
    }

    #[test]
    fn disjoint_areas_union_unchanged() {
        let a = sample_model(3, 57.0, 10.8);
        let b = sample_model(4, 55.0, 12.5);
        let f = federate(&[a.clone(), b.clone()], &[a.trained_count, b.trained_count]).unwrap();
        assert_eq!(f.cell_count(), a.cell_count() + b.cell_count());
        for (id, cell) in a.cells() {
            assert_eq!(f.cell(*id).unwrap(), cell);
        }
        for (id, cell) in b.cells() {
            assert_eq!(f.cell(*id).unwrap(), cell);
        }
    }

    #[test]
    fn permutation_invariant() {
        let a = sample_model(5, 57.0, 10.8);
        let b = sample_model(6, 57.01, 10.81); // heavy cell overlap
        let c = sample_model(7, 57.02, 10.82);

        let fwd = federate(
            &[a.clone(), b.clone(), c.clone()],
            &[a.trained_count, b.trained_count, c.trained_count],
        )
        .unwrap();
        let rev = federate(
            &[c.clone(), a.clone(), b.clone()],
            &[c.trained_count, a.trained_count, b.trained_count],
        )
        .unwrap();
        assert_eq!(fwd, rev);

        // and it scores identically on probes
        let probe = rec(9.0, 80.0, 57.015, 10.815);
        assert_eq!(score(&fwd, &probe), score(&rev, &probe));
    }

    #[test]
    fn shared_cells_respect_component_budget() {
        let a = sample_model(8, 57.0, 10.8);
        let b = sample_model(9, 57.0, 10.8);
        let f = federate(&[a.clone(), b.clone()], &[a.trained_count, b.trained_count]).unwrap();
        for (_, cell) in f.cells() {
            assert!(!cell.components.is_empty());
            assert!(cell.components.len() <= 3);
            let sum: f64 = cell.components.iter().map(|c| c.weight).sum();
            assert!((sum - 1.0).abs() <= 1e-9);
            for c in &cell.components {
                assert!(c.cov.min_eigenvalue() >= COV_FLOOR * 0.999);
            }
        }
    }

    #[test]
    fn config_mismatch_rejected() {
        let a = sample_model(10, 57.0, 10.8);
        let cfg = ModelConfig {
            cell_size_deg: 0.02,
            ..Default::default()
        };
        let recs: Vec<AisRecord> = (0..60).map(|_| rec(8.0, 90.0, 57.0, 10.8)).collect();
        let b = train(recs.iter(), &cfg).unwrap();
        assert!(matches!(
            federate(&[a, b], &[1, 1]),
            Err(ModelError::ConfigMismatch(_))
        ));
    }

    #[test]
    fn moment_match_preserves_mixture_moments() {
        let a = GaussianComponent {
            weight: 0.3,
            mean: [5.0, 1.0, 0.0],
            cov: Sym3::diag(0.5, 0.1, 0.1),
        };
        let b = GaussianComponent {
            weight: 0.7,
            mean: [10.0, -1.0, 0.5],
            cov: Sym3::diag(1.0, 0.2, 0.3),
        };
        let m = moment_match(&a, &b);
        assert!((m.weight - 1.0).abs() < 1e-12);
        // mixture mean
        for d in 0..3 {
            let want = 0.3 * a.mean[d] + 0.7 * b.mean[d];
            assert!((m.mean[d] - want).abs() < 1e-12);
        }
        // mixture second moment: E[xx^T] preserved on the diagonal
        for d in 0..3 {
            let want = 0.3 * (a.cov.get(d, d) + a.mean[d].powi(2))
                + 0.7 * (b.cov.get(d, d) + b.mean[d].powi(2));
            let got = m.cov.get(d, d) + m.mean[d].powi(2);
            assert!((got - want).abs() < 1e-9, "dim {d}: {got} vs {want}");
        }
    }
}
