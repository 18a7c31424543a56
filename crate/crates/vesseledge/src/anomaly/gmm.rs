//! Gaussian mixture machinery over the three-dimensional movement feature
//! space (sog, sin cog, cos cog).
//!
//! Covariances are symmetric 3x3 matrices kept positive definite by an
//! eigenvalue floor. Densities are evaluated in log space through Cholesky
//! factorization; batch fitting is expectation-maximization seeded with
//! k-means++.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FEATURE_DIM: usize = 3;

/// Minimum eigenvalue every stored covariance must keep.
pub const COV_FLOOR: f64 = 1e-6;

const LN_2PI: f64 = 1.837_877_066_409_345_5; // ln(2*pi)

/// Symmetric 3x3 matrix stored as upper-triangular
/// `[m00, m01, m02, m11, m12, m22]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym3(pub [f64; 6]);

impl Sym3 {
    pub fn zero() -> Self {
        Sym3([0.0; 6])
    }

    pub fn diag(d0: f64, d1: f64, d2: f64) -> Self {
        Sym3([d0, 0.0, 0.0, d1, 0.0, d2])
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self::diag(s, s, s)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (i, j) {
            (0, 0) => self.0[0],
            (0, 1) => self.0[1],
            (0, 2) => self.0[2],
            (1, 1) => self.0[3],
            (1, 2) => self.0[4],
            (2, 2) => self.0[5],
            _ => unreachable!(),
        }
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn det(&self) -> f64 {
        let a = self.0[0];
        let b = self.0[1];
        let c = self.0[2];
        let d = self.0[3];
        let e = self.0[4];
        let f = self.0[5];
        a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
    }

    /// Adds `scale * sym(a bᵀ)` in place.
    pub fn add_sym_outer(&mut self, a: &[f64; 3], b: &[f64; 3], scale: f64) {
        self.0[0] += scale * a[0] * b[0];
        self.0[1] += scale * 0.5 * (a[0] * b[1] + a[1] * b[0]);
        self.0[2] += scale * 0.5 * (a[0] * b[2] + a[2] * b[0]);
        self.0[3] += scale * a[1] * b[1];
        self.0[4] += scale * 0.5 * (a[1] * b[2] + a[2] * b[1]);
        self.0[5] += scale * a[2] * b[2];
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.0 {
            *v *= s;
        }
    }

    pub fn add(&mut self, other: &Sym3, scale: f64) {
        for (v, o) in self.0.iter_mut().zip(other.0.iter()) {
            *v += scale * o;
        }
    }

    /// Eigenvalues in ascending order (analytic, symmetric 3x3).
    pub fn eigenvalues(&self) -> [f64; 3] {
        let a00 = self.0[0];
        let a01 = self.0[1];
        let a02 = self.0[2];
        let a11 = self.0[3];
        let a12 = self.0[4];
        let a22 = self.0[5];

        let p1 = a01 * a01 + a02 * a02 + a12 * a12;
        if p1 == 0.0 {
            let mut d = [a00, a11, a22];
            d.sort_by(f64::total_cmp);
            return d;
        }
        let q = self.trace() / 3.0;
        let p2 = (a00 - q).powi(2) + (a11 - q).powi(2) + (a22 - q).powi(2) + 2.0 * p1;
        let p = (p2 / 6.0).sqrt();
        let mut b = *self;
        b.0[0] -= q;
        b.0[3] -= q;
        b.0[5] -= q;
        b.scale(1.0 / p);
        let r = (b.det() / 2.0).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let e_hi = q + 2.0 * p * phi.cos();
        let e_lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
        let e_mid = 3.0 * q - e_hi - e_lo;
        [e_lo, e_mid, e_hi]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Lifts the spectrum so the smallest eigenvalue reaches `floor`.
    pub fn regularize(&mut self, floor: f64) {
        let min = self.min_eigenvalue();
        if min < floor {
            let bump = floor - min;
            self.0[0] += bump;
            self.0[3] += bump;
            self.0[5] += bump;
        }
    }

    /// Lower-triangular Cholesky factor, or `None` if not positive definite.
    pub fn cholesky(&self) -> Option<[f64; 6]> {
        // layout: [l00, l10, l11, l20, l21, l22]
        let a00 = self.0[0];
        let a01 = self.0[1];
        let a02 = self.0[2];
        let a11 = self.0[3];
        let a12 = self.0[4];
        let a22 = self.0[5];

        if a00 <= 0.0 {
            return None;
        }
        let l00 = a00.sqrt();
        let l10 = a01 / l00;
        let t11 = a11 - l10 * l10;
        if t11 <= 0.0 {
            return None;
        }
        let l11 = t11.sqrt();
        let l20 = a02 / l00;
        let l21 = (a12 - l20 * l10) / l11;
        let t22 = a22 - l20 * l20 - l21 * l21;
        if t22 <= 0.0 {
            return None;
        }
        Some([l00, l10, l11, l20, l21, t22.sqrt()])
    }
}

/// One weighted Gaussian of a cell mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: [f64; 3],
    pub cov: Sym3,
}

impl GaussianComponent {
    /// Log density of `x` under this component (weight excluded).
    pub fn log_density(&self, x: &[f64; 3]) -> f64 {
        let l = match self.cov.cholesky() {
            Some(l) => l,
            // floored covariances are always PD; treat a numeric miss as
            // an effectively-zero density
            None => return f64::MIN / 4.0,
        };
        let [l00, l10, l11, l20, l21, l22] = l;
        let d = [
            x[0] - self.mean[0],
            x[1] - self.mean[1],
            x[2] - self.mean[2],
        ];
        // forward substitution L y = d
        let y0 = d[0] / l00;
        let y1 = (d[1] - l10 * y0) / l11;
        let y2 = (d[2] - l20 * y0 - l21 * y1) / l22;
        let quad = y0 * y0 + y1 * y1 + y2 * y2;
        let log_det = 2.0 * (l00.ln() + l11.ln() + l22.ln());
        -0.5 * (FEATURE_DIM as f64 * LN_2PI + log_det + quad)
    }
}

/// Log of the mixture density via log-sum-exp over components.
pub fn log_mixture_density(components: &[GaussianComponent], x: &[f64; 3]) -> f64 {
    let mut terms = [0.0f64; 16];
    let n = components.len().min(16);
    let mut max = f64::NEG_INFINITY;
    for (i, c) in components.iter().take(n).enumerate() {
        let t = c.weight.max(f64::MIN_POSITIVE).ln() + c.log_density(x);
        terms[i] = t;
        if t > max {
            max = t;
        }
    }
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms[..n].iter().map(|t| (t - max).exp()).sum();
    max + sum.ln()
}

fn sq_dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

/// k-means++ seeding over the samples, deterministic for a given rng state.
fn kmeans_pp(samples: &[[f64; 3]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centers = Vec::with_capacity(k);
    centers.push(samples[rng.random_range(0..samples.len())]);
    let mut d2: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining mass at existing centers; pick any sample
            samples[rng.random_range(0..samples.len())]
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut pick = samples.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            samples[pick]
        };
        centers.push(next);
        for (i, s) in samples.iter().enumerate() {
            let d = sq_dist(s, &next);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

fn weighted_moments(samples: &[[f64; 3]], resp: &[f64]) -> Option<GaussianComponent> {
    let mass: f64 = resp.iter().sum();
    if mass <= 1e-12 {
        return None;
    }
    let mut mean = [0.0; 3];
    for (s, &r) in samples.iter().zip(resp) {
        for d in 0..3 {
            mean[d] += r * s[d];
        }
    }
    for m in &mut mean {
        *m /= mass;
    }
    let mut cov = Sym3::zero();
    for (s, &r) in samples.iter().zip(resp) {
        let d = [s[0] - mean[0], s[1] - mean[1], s[2] - mean[2]];
        cov.add_sym_outer(&d, &d, r);
    }
    cov.scale(1.0 / mass);
    cov.regularize(COV_FLOOR);
    Some(GaussianComponent {
        weight: mass,
        mean,
        cov,
    })
}

fn normalize_weights(components: &mut [GaussianComponent]) {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    if total > 0.0 {
        for c in components.iter_mut() {
            c.weight /= total;
        }
    }
}

/// Canonical component order: descending weight, then mean lexicographic.
pub(crate) fn sort_components(components: &mut [GaussianComponent]) {
    components.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.mean[0].total_cmp(&b.mean[0]))
            .then(a.mean[1].total_cmp(&b.mean[1]))
            .then(a.mean[2].total_cmp(&b.mean[2]))
    });
}

/// Mean and diagonal covariance of the samples, floored. The fallback
/// estimator for sparsely populated cells.
pub fn fit_single_diag(samples: &[[f64; 3]]) -> GaussianComponent {
    if samples.iter().all(|s| s == &samples[0]) {
        // degenerate cluster: mean is the sample itself, exactly
        return GaussianComponent {
            weight: 1.0,
            mean: samples[0],
            cov: Sym3::scaled_identity(COV_FLOOR),
        };
    }
    let n = samples.len() as f64;
    let mut mean = [0.0; 3];
    for s in samples {
        for d in 0..3 {
            mean[d] += s[d];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = [0.0; 3];
    for s in samples {
        for d in 0..3 {
            var[d] += (s[d] - mean[d]).powi(2);
        }
    }
    let mut cov = Sym3::diag(var[0] / n, var[1] / n, var[2] / n);
    cov.regularize(COV_FLOOR);
    GaussianComponent {
        weight: 1.0,
        mean,
        cov,
    }
}

/// Fits up to `k_max` components by EM with k-means++ initialization.
/// Deterministic for a given rng state; duplicate-heavy inputs reduce the
/// effective component count.
pub fn fit_gmm(
    samples: &[[f64; 3]],
    k_max: usize,
    iterations: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<GaussianComponent> {
    assert!(!samples.is_empty());
    let mut distinct: Vec<[f64; 3]> = Vec::new();
    'outer: for s in samples {
        for d in &distinct {
            if d == s {
                continue 'outer;
            }
        }
        distinct.push(*s);
        if distinct.len() >= k_max {
            break;
        }
    }
    let k = k_max.min(distinct.len()).max(1);
    if k == 1 {
        let mut out = vec![fit_single_diag(samples)];
        normalize_weights(&mut out);
        return out;
    }

    let centers = kmeans_pp(samples, k, rng);
    // hard assignment to the seeded centers for the initial moments
    let mut resp = vec![vec![0.0f64; samples.len()]; k];
    for (i, s) in samples.iter().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let d = sq_dist(s, center);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        resp[best][i] = 1.0;
    }
    let mut components: Vec<GaussianComponent> = resp
        .iter()
        .filter_map(|r| weighted_moments(samples, r))
        .collect();
    normalize_weights(&mut components);

    let n = samples.len();
    for _ in 0..iterations {
        if components.len() <= 1 {
            break;
        }
        // E step
        let mut resp = vec![vec![0.0f64; n]; components.len()];
        for (i, s) in samples.iter().enumerate() {
            let logs: Vec<f64> = components
                .iter()
                .map(|c| c.weight.max(f64::MIN_POSITIVE).ln() + c.log_density(s))
                .collect();
            let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for l in &logs {
                total += (l - max).exp();
            }
            for (c, l) in logs.iter().enumerate() {
                resp[c][i] = (l - max).exp() / total;
            }
        }
        // M step
        let mut next: Vec<GaussianComponent> = Vec::with_capacity(components.len());
        for r in &resp {
            if let Some(mut comp) = weighted_moments(samples, r) {
                comp.weight /= n as f64;
                next.push(comp);
            }
        }
        if next.is_empty() {
            break;
        }
        normalize_weights(&mut next);
        components = next;
    }
    sort_components(&mut components);
    components
}

/// Test oracle: mixture component density by explicit adjugate inverse,
/// an independent route from the Cholesky evaluation above.
#[cfg(test)]
pub(crate) fn naive_density(c: &GaussianComponent, x: &[f64; 3]) -> f64 {
    let m = &c.cov;
    let a = m.get(0, 0);
    let b = m.get(0, 1);
    let cc = m.get(0, 2);
    let d = m.get(1, 1);
    let e = m.get(1, 2);
    let f = m.get(2, 2);
    let det = m.det();
    let inv = [
        [
            (d * f - e * e) / det,
            (cc * e - b * f) / det,
            (b * e - cc * d) / det,
        ],
        [
            (cc * e - b * f) / det,
            (a * f - cc * cc) / det,
            (b * cc - a * e) / det,
        ],
        [
            (b * e - cc * d) / det,
            (b * cc - a * e) / det,
            (a * d - b * b) / det,
        ],
    ];
    let dx = [x[0] - c.mean[0], x[1] - c.mean[1], x[2] - c.mean[2]];
    let mut quad = 0.0;
    for (i, dxi) in dx.iter().enumerate() {
        for (j, dxj) in dx.iter().enumerate() {
            quad += dxi * inv[i][j] * dxj;
        }
    }
    let norm = ((2.0 * std::f64::consts::PI).powi(3) * det).sqrt();
    (-0.5 * quad).exp() / norm
}
