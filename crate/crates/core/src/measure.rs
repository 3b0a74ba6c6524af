//! Physical-measure estimation: Birkhoff fingerprints, clustering, basin
//! maps, correlation decay, CLT variance and the perturbation-strength sweep.

use crate::cocycle;
use crate::error::{Error, Result};
use crate::maps::{AnosovSpec, ManeDASpec, MapSpec};
use crate::torus::TorusPoint;
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const TAU: f64 = std::f64::consts::TAU;

/// Histogram partition: 16^3 congruent cubes.
pub const HIST_SIDE: usize = 16;
pub const HIST_BINS: usize = HIST_SIDE * HIST_SIDE * HIST_SIDE;

/// Deterministic per-stream RNG derived from a root seed by splitmix-style
/// counter mixing; identical streams regardless of scheduling.
pub fn stream_rng(root: u64, index: u64) -> ChaCha8Rng {
    let mut z = root ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

#[inline]
fn kahan_add(sum: &mut f64, comp: &mut f64, v: f64) {
    let y = v - *comp;
    let t = *sum + y;
    *comp = (t - *sum) - y;
    *sum = t;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservableKind {
    Cos,
    Sin,
}

/// A trigonometric character observable cos/sin(2 pi <m, x>).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observable {
    pub name: String,
    pub frequency: [i64; 3],
    pub kind: ObservableKind,
}

impl Observable {
    pub fn new(frequency: [i64; 3], kind: ObservableKind) -> Result<Self> {
        if frequency.iter().any(|m| m.abs() > 3) {
            return Err(Error::Precondition(format!(
                "frequency {frequency:?} outside |m|_inf <= 3"
            )));
        }
        let tag = match kind {
            ObservableKind::Cos => "cos",
            ObservableKind::Sin => "sin",
        };
        let name = format!(
            "{tag}(2pi<({},{},{}),x>)",
            frequency[0], frequency[1], frequency[2]
        );
        Ok(Self {
            name,
            frequency,
            kind,
        })
    }

    pub fn cos(frequency: [i64; 3]) -> Result<Self> {
        Self::new(frequency, ObservableKind::Cos)
    }

    pub fn sin(frequency: [i64; 3]) -> Result<Self> {
        Self::new(frequency, ObservableKind::Sin)
    }

    pub fn is_constant(&self) -> bool {
        self.frequency == [0, 0, 0]
    }

    pub fn eval(&self, x: &TorusPoint) -> f64 {
        let c = x.coords();
        let a = TAU
            * (self.frequency[0] as f64 * c[0]
                + self.frequency[1] as f64 * c[1]
                + self.frequency[2] as f64 * c[2]);
        match self.kind {
            ObservableKind::Cos => a.cos(),
            ObservableKind::Sin => a.sin(),
        }
    }
}

/// Canonical nonzero frequencies with |m|_inf <= 2: one representative per
/// +/- pair, first nonzero component positive. 62 vectors.
pub fn canonical_frequencies() -> Vec<[i64; 3]> {
    let mut out = Vec::with_capacity(62);
    for a in -2i64..=2 {
        for b in -2i64..=2 {
            for c in -2i64..=2 {
                let m = [a, b, c];
                let lead = m.iter().find(|&&v| v != 0);
                if matches!(lead, Some(&v) if v > 0) {
                    out.push(m);
                }
            }
        }
    }
    out
}

/// The fixed fingerprint dictionary: cos and sin of every canonical
/// frequency, 124 entries, cos before sin per frequency.
pub fn dictionary() -> Vec<Observable> {
    canonical_frequencies()
        .into_iter()
        .flat_map(|m| {
            [
                Observable::new(m, ObservableKind::Cos).unwrap(),
                Observable::new(m, ObservableKind::Sin).unwrap(),
            ]
        })
        .collect()
}

/// Orbit fingerprint: dictionary averages plus a coarse histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    /// one entry per dictionary observable, dictionary order
    pub averages: Vec<f64>,
    /// occupation frequencies over the 16^3 partition, sums to 1
    pub histogram: Vec<f64>,
    pub n_avg: usize,
    pub seed_point: TorusPoint,
}

impl EmpiricalMeasure {
    /// Exact fingerprint of Lebesgue measure: characters integrate to zero,
    /// occupation is uniform.
    pub fn lebesgue() -> Self {
        Self {
            averages: vec![0.0; 124],
            histogram: vec![1.0 / HIST_BINS as f64; HIST_BINS],
            n_avg: 0,
            seed_point: TorusPoint::origin(),
        }
    }

    /// Sup metric over the dictionary averages.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.averages
            .iter()
            .zip(&other.averages)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// n_avg-weighted combination (two disjoint orbit halves combine to the
    /// whole-orbit fingerprint).
    pub fn combine(a: &Self, b: &Self) -> Self {
        let (na, nb) = (a.n_avg as f64, b.n_avg as f64);
        let n = na + nb;
        let mix =
            |u: &[f64], v: &[f64]| -> Vec<f64> {
                u.iter().zip(v).map(|(x, y)| (na * x + nb * y) / n).collect()
            };
        Self {
            averages: mix(&a.averages, &b.averages),
            histogram: mix(&a.histogram, &b.histogram),
            n_avg: a.n_avg + b.n_avg,
            seed_point: a.seed_point,
        }
    }

    /// Unweighted centroid.
    pub fn mean(list: &[Self]) -> Self {
        let k = list.len() as f64;
        let dim = list[0].averages.len();
        let mut averages = vec![0.0; dim];
        let mut histogram = vec![0.0; HIST_BINS];
        for m in list {
            for (s, v) in averages.iter_mut().zip(&m.averages) {
                *s += v / k;
            }
            for (s, v) in histogram.iter_mut().zip(&m.histogram) {
                *s += v / k;
            }
        }
        Self {
            averages,
            histogram,
            n_avg: list.iter().map(|m| m.n_avg).sum::<usize>() / list.len(),
            seed_point: list[0].seed_point,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BirkhoffParams {
    pub n_transient: usize,
    pub n_avg: usize,
}

fn hist_bin(x: &TorusPoint) -> usize {
    let c = x.coords();
    let mut idx = 0usize;
    for v in c {
        let b = ((v * HIST_SIDE as f64) as usize).min(HIST_SIDE - 1);
        idx = idx * HIST_SIDE + b;
    }
    idx
}

/// Birkhoff fingerprint over iterates n_transient+1 .. n_transient+n_avg.
///
/// Character sums are evaluated through complex exponential powers (62
/// products per step instead of 124 trig calls) and accumulated with
/// compensated summation.
pub fn birkhoff(map: &MapSpec, x: &TorusPoint, params: &BirkhoffParams) -> EmpiricalMeasure {
    let freqs = canonical_frequencies();
    let nf = freqs.len();
    let mut sums = vec![0.0f64; 2 * nf];
    let mut comps = vec![0.0f64; 2 * nf];
    let mut hist = vec![0.0f64; HIST_BINS];
    let mut y = *x;
    for _ in 0..=params.n_transient {
        y = map.apply(&y);
    }
    for step in 0..params.n_avg {
        let c = y.coords();
        let z: [Complex<f64>; 3] = std::array::from_fn(|j| Complex::from_polar(1.0, TAU * c[j]));
        let z2: [Complex<f64>; 3] = std::array::from_fn(|j| z[j] * z[j]);
        let one = Complex::new(1.0, 0.0);
        for (i, m) in freqs.iter().enumerate() {
            let mut w = one;
            for j in 0..3 {
                let p = match m[j].abs() {
                    0 => one,
                    1 => z[j],
                    _ => z2[j],
                };
                w *= if m[j] >= 0 { p } else { p.conj() };
            }
            kahan_add(&mut sums[2 * i], &mut comps[2 * i], w.re);
            kahan_add(&mut sums[2 * i + 1], &mut comps[2 * i + 1], w.im);
        }
        hist[hist_bin(&y)] += 1.0;
        if step + 1 < params.n_avg {
            y = map.apply(&y);
        }
    }
    let n = params.n_avg as f64;
    EmpiricalMeasure {
        averages: sums.iter().map(|s| s / n).collect(),
        histogram: hist.iter().map(|h| h / n).collect(),
        n_avg: params.n_avg,
        seed_point: *x,
    }
}

/// Birkhoff average of a single observable (compensated summation).
pub fn time_average(
    map: &MapSpec,
    x: &TorusPoint,
    obs: &Observable,
    params: &BirkhoffParams,
) -> f64 {
    let mut y = *x;
    for _ in 0..=params.n_transient {
        y = map.apply(&y);
    }
    let mut s = 0.0;
    let mut c = 0.0;
    for step in 0..params.n_avg {
        kahan_add(&mut s, &mut c, obs.eval(&y));
        if step + 1 < params.n_avg {
            y = map.apply(&y);
        }
    }
    s / params.n_avg as f64
}

/// Clustering outcome over a set of fingerprints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasinReport {
    /// clusters containing at least 5% of the seeds
    pub cluster_count: usize,
    pub cluster_fingerprints: Vec<EmpiricalMeasure>,
    /// per input measure: index into cluster_fingerprints, or None when the
    /// fingerprint is farther than 2 epsilon from every centroid
    pub assignment: Vec<Option<usize>>,
    pub coverage: f64,
    pub undersampled: bool,
}

/// Single-linkage clustering of fingerprints at threshold epsilon in the sup
/// metric; centroids closer than 2 epsilon are merged afterwards so reported
/// clusters stay separated.
pub fn cluster_measures(measures: &[EmpiricalMeasure], epsilon: f64) -> Result<BasinReport> {
    if measures.len() < 2 {
        return Err(Error::Precondition("need at least 2 measures".into()));
    }
    if epsilon <= 0.0 {
        return Err(Error::Precondition("epsilon must be positive".into()));
    }
    let n = measures.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if measures[i].sup_distance(&measures[j]) <= epsilon {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    // significant clusters: >= 5% of seeds
    let cutoff = (n as f64 * 0.05).ceil() as usize;
    let mut clusters: Vec<Vec<usize>> = groups
        .into_values()
        .filter(|g| g.len() >= cutoff.max(1))
        .collect();
    clusters.sort_by_key(|g| std::cmp::Reverse(g.len()));
    // merge clusters whose centroids ended up within 2 epsilon
    loop {
        let centroids: Vec<EmpiricalMeasure> = clusters
            .iter()
            .map(|g| {
                EmpiricalMeasure::mean(&g.iter().map(|&i| measures[i].clone()).collect::<Vec<_>>())
            })
            .collect();
        let mut merge: Option<(usize, usize)> = None;
        'search: for i in 0..centroids.len() {
            for j in (i + 1)..centroids.len() {
                if centroids[i].sup_distance(&centroids[j]) <= 2.0 * epsilon {
                    merge = Some((i, j));
                    break 'search;
                }
            }
        }
        match merge {
            Some((i, j)) => {
                let g = clusters.remove(j);
                clusters[i].extend(g);
            }
            None => {
                let assignment: Vec<Option<usize>> = measures
                    .iter()
                    .map(|m| {
                        let best = centroids
                            .iter()
                            .enumerate()
                            .map(|(k, c)| (k, m.sup_distance(c)))
                            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
                        match best {
                            Some((k, d)) if d <= 2.0 * epsilon => Some(k),
                            _ => None,
                        }
                    })
                    .collect();
                let coverage =
                    assignment.iter().filter(|a| a.is_some()).count() as f64 / n as f64;
                return Ok(BasinReport {
                    cluster_count: clusters.len(),
                    cluster_fingerprints: centroids,
                    assignment,
                    coverage,
                    undersampled: coverage < 0.9,
                });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BasinParams {
    pub grid: usize,
    pub epsilon: f64,
    pub birkhoff: BirkhoffParams,
}

/// Birkhoff-and-cluster over a jittered g^3 Lebesgue seed grid.
pub fn basin_map(map: &MapSpec, params: &BasinParams, rng: &mut ChaCha8Rng) -> Result<BasinReport> {
    let g = params.grid;
    if g < 5 {
        return Err(Error::Precondition(format!("grid {g} below the minimum of 5")));
    }
    let cell = 1.0 / g as f64;
    let mut seeds = Vec::with_capacity(g * g * g);
    for i in 0..g {
        for j in 0..g {
            for k in 0..g {
                seeds.push(TorusPoint::new(
                    (i as f64 + rng.gen::<f64>()) * cell,
                    (j as f64 + rng.gen::<f64>()) * cell,
                    (k as f64 + rng.gen::<f64>()) * cell,
                ));
            }
        }
    }
    let measures: Vec<EmpiricalMeasure> = seeds
        .par_iter()
        .map(|s| birkhoff(map, s, &params.birkhoff))
        .collect();
    cluster_measures(&measures, params.epsilon)
}

/// Mean middle finite-time Lyapunov exponent over cluster seeds, with the
/// mostly-expanding pass flag (positive by more than 3 standard errors).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterExponentReport {
    pub mean: f64,
    pub std_error: f64,
    pub sample_size: usize,
    pub passes: bool,
}

pub fn center_exponent_of_cluster(
    map: &MapSpec,
    seeds: &[TorusPoint],
    orbit_length: usize,
    warmup: usize,
) -> Result<CenterExponentReport> {
    if seeds.len() < 10 {
        return Err(Error::Precondition(format!(
            "need at least 10 cluster seeds, got {}",
            seeds.len()
        )));
    }
    let middles: Vec<f64> = seeds
        .par_iter()
        .map(|s| Ok(cocycle::ftle(map, s, orbit_length, warmup)?.exponents[1]))
        .collect::<Result<Vec<_>>>()?;
    let n = middles.len() as f64;
    let mean = middles.iter().sum::<f64>() / n;
    let var = middles.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let std_error = (var / n).sqrt();
    Ok(CenterExponentReport {
        mean,
        std_error,
        sample_size: middles.len(),
        passes: mean > 3.0 * std_error,
    })
}

/// Exact Lebesgue correlation of two characters under the linear map:
/// C(n) = int phi * psi o A^n dLeb - int phi int psi, evaluated by integer
/// iteration of A^T on the psi frequency.
pub fn character_correlation_oracle(
    matrix: &[[i64; 3]; 3],
    phi: &Observable,
    psi: &Observable,
    n: usize,
) -> f64 {
    if phi.is_constant() || psi.is_constant() {
        return 0.0;
    }
    // (A^T)^n m_psi
    let mut k: [i128; 3] = std::array::from_fn(|i| psi.frequency[i] as i128);
    for _ in 0..n {
        let prev = k;
        for (i, ki) in k.iter_mut().enumerate() {
            *ki = (0..3).map(|j| matrix[j][i] as i128 * prev[j]).sum();
        }
    }
    let m: [i128; 3] = std::array::from_fn(|i| phi.frequency[i] as i128);
    let plus = k == m;
    let minus = k == m.map(|v| -v);
    if !plus && !minus {
        return 0.0;
    }
    use ObservableKind::*;
    match (phi.kind, psi.kind) {
        (Cos, Cos) => 0.5,
        (Sin, Sin) => {
            if plus {
                0.5
            } else {
                -0.5
            }
        }
        (Cos, Sin) | (Sin, Cos) => {
            // int cos<m> sin<+-m> = 0
            0.0
        }
    }
}

/// Smallest n0 such that the exact linear correlation vanishes for every
/// n0 <= n <= n_max.
pub fn correlation_vanishing_time(
    matrix: &[[i64; 3]; 3],
    phi: &Observable,
    psi: &Observable,
    n_max: usize,
) -> usize {
    let mut n0 = 1;
    for n in 1..=n_max {
        if character_correlation_oracle(matrix, phi, psi, n) != 0.0 {
            n0 = n + 1;
        }
    }
    n0
}

/// Green-Kubo CLT variance for a character under the linear map:
/// sigma^2 = C(0) + 2 sum_{n>=1} C(n) over the exact finite support.
pub fn green_kubo_oracle(matrix: &[[i64; 3]; 3], phi: &Observable, n_max: usize) -> f64 {
    let mut s = character_correlation_oracle(matrix, phi, phi, 0);
    for n in 1..=n_max {
        s += 2.0 * character_correlation_oracle(matrix, phi, phi, n);
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleMode {
    /// uniform random seeds, no transient: estimates the Lebesgue correlation
    Lebesgue,
    /// long transient so seeds are mu-distributed, then time autocovariance
    Measure,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub mode: EnsembleMode,
    pub n_seeds: usize,
    /// measure mode: transient before time averaging
    pub transient: usize,
    /// measure mode: per-seed orbit length
    pub orbit_length: usize,
    /// Lebesgue mode, perturbed map only: subtract the coupled linear orbit
    /// and add its exact character correlation back (control variate; same
    /// estimand, far smaller variance)
    pub control_variate: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub phi: Observable,
    pub psi: Observable,
    pub n_grid: Vec<usize>,
    pub c: Vec<f64>,
    /// per-lag 3-sigma sampling error of C(n)
    pub floor: Vec<f64>,
    /// worst per-lag floor, as a one-number summary
    pub noise_floor: f64,
    pub fit_d: f64,
    pub fit_r2: f64,
    pub fit_refused: bool,
}

/// Least squares of log|C| vs n on lags n >= 1 above their per-lag noise
/// floor; rate = -slope. Refused below 4 usable points.
pub fn fit_decay(n_grid: &[usize], c: &[f64], floor: &[f64]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = n_grid
        .iter()
        .zip(c.iter().zip(floor))
        .filter(|(&n, (&v, &f))| n >= 1 && v.abs() > f)
        .map(|(&n, (&v, _))| (n as f64, v.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::FitRefused(pts.len()));
    }
    let k = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in &pts {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok((0.0, 1.0));
    }
    Ok((-(sxy / sxx), sxy * sxy / (sxx * syy)))
}

struct LebesgueAcc {
    prod: Vec<f64>,
    prod2: Vec<f64>,
    psi_sum: Vec<f64>,
    phi_sum: f64,
    count: u64,
}

impl LebesgueAcc {
    fn new(n: usize) -> Self {
        Self {
            prod: vec![0.0; n],
            prod2: vec![0.0; n],
            psi_sum: vec![0.0; n],
            phi_sum: 0.0,
            count: 0,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for i in 0..self.prod.len() {
            self.prod[i] += other.prod[i];
            self.prod2[i] += other.prod2[i];
            self.psi_sum[i] += other.psi_sum[i];
        }
        self.phi_sum += other.phi_sum;
        self.count += other.count;
        self
    }
}

const CORR_CHUNK: u64 = 1 << 14;

fn lebesgue_correlation(
    map: &MapSpec,
    phi: &Observable,
    psi: &Observable,
    n_max: usize,
    params: &CorrelationParams,
    root: u64,
) -> (Vec<f64>, Vec<f64>) {
    let n_seeds = params.n_seeds as u64;
    let cv = params.control_variate && matches!(map, MapSpec::Mane(_));
    let n_chunks = n_seeds.div_ceil(CORR_CHUNK);
    let acc = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream_rng(root, chunk);
            let lo = chunk * CORR_CHUNK;
            let hi = ((chunk + 1) * CORR_CHUNK).min(n_seeds);
            let mut a = LebesgueAcc::new(n_max + 1);
            for _ in lo..hi {
                let x = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
                let ph = phi.eval(&x);
                a.phi_sum += ph;
                a.count += 1;
                let mut y = x;
                let mut z = x;
                for n in 0..=n_max {
                    // in cv mode, lags >= 1 record only the difference
                    // against the coupled linear orbit; the linear part is
                    // restored exactly afterwards
                    let v = if cv && n >= 1 {
                        ph * (psi.eval(&y) - psi.eval(&z))
                    } else {
                        ph * psi.eval(&y)
                    };
                    a.prod[n] += v;
                    a.prod2[n] += v * v;
                    a.psi_sum[n] += psi.eval(&y);
                    if n < n_max {
                        y = map.apply(&y);
                        if cv {
                            z = map.base().apply(&z);
                        }
                    }
                }
            }
            a
        })
        .reduce(|| LebesgueAcc::new(n_max + 1), LebesgueAcc::merge);
    let n = acc.count as f64;
    let phi_mean = acc.phi_sum / n;
    let mut c = Vec::with_capacity(n_max + 1);
    let mut floor = Vec::with_capacity(n_max + 1);
    for i in 0..=n_max {
        let pm = acc.prod[i] / n;
        let mut value = pm - phi_mean * (acc.psi_sum[i] / n);
        if cv && i >= 1 {
            // int phi dLeb = 0 for non-constant characters, so the exact
            // linear term carries the whole mean structure
            value = pm + character_correlation_oracle(map.base().matrix(), phi, psi, i);
        }
        let var = (acc.prod2[i] / n - pm * pm).max(0.0);
        floor.push(3.0 * (var / n).sqrt());
        c.push(value);
    }
    (c, floor)
}

fn measure_correlation(
    map: &MapSpec,
    phi: &Observable,
    psi: &Observable,
    n_max: usize,
    params: &CorrelationParams,
    root: u64,
) -> (Vec<f64>, Vec<f64>) {
    let per_seed: Vec<Vec<f64>> = (0..params.n_seeds as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(root, i);
            let mut x = TorusPoint::new(rng.gen(), rng.gen(), rng.gen());
            for _ in 0..params.transient {
                x = map.apply(&x);
            }
            let t = params.orbit_length;
            let mut ring = vec![0.0f64; n_max + 1];
            let mut cross = vec![0.0f64; n_max + 1];
            let mut sp = 0.0f64;
            let mut sq = 0.0f64;
            for step in 0..t {
                let ph = phi.eval(&x);
                let ps = psi.eval(&x);
                ring[step % (n_max + 1)] = ph;
                sp += ph;
                sq += ps;
                if step >= n_max {
                    for n in 0..=n_max {
                        cross[n] += ring[(step - n) % (n_max + 1)] * ps;
                    }
                }
                x = map.apply(&x);
            }
            let cnt = (t - n_max) as f64;
            let (mp, mq) = (sp / t as f64, sq / t as f64);
            cross.iter().map(|s| s / cnt - mp * mq).collect()
        })
        .collect();
    let k = per_seed.len() as f64;
    let mut c = vec![0.0f64; n_max + 1];
    let mut floor = vec![0.0f64; n_max + 1];
    for n in 0..=n_max {
        let mean = per_seed.iter().map(|v| v[n]).sum::<f64>() / k;
        c[n] = mean;
        if per_seed.len() >= 2 {
            let var = per_seed
                .iter()
                .map(|v| (v[n] - mean) * (v[n] - mean))
                .sum::<f64>()
                / (k - 1.0);
            floor[n] = 3.0 * (var / k).sqrt();
        }
    }
    (c, floor)
}

/// Correlation series C(n), n = 0..n_max, with noise floor and decay fit.
pub fn correlation(
    map: &MapSpec,
    phi: &Observable,
    psi: &Observable,
    n_max: usize,
    params: &CorrelationParams,
    rng: &mut ChaCha8Rng,
) -> Result<CorrelationSeries> {
    match params.mode {
        EnsembleMode::Lebesgue if params.n_seeds < 200 => {
            return Err(Error::Precondition(format!(
                "Lebesgue ensemble needs >= 200 seeds, got {}",
                params.n_seeds
            )));
        }
        EnsembleMode::Measure if params.n_seeds < 2 => {
            return Err(Error::Precondition(
                "measure-mode ensemble needs >= 2 seeds for the noise floor".into(),
            ));
        }
        EnsembleMode::Measure if params.orbit_length <= n_max => {
            return Err(Error::Precondition(
                "measure-mode orbit_length must exceed n_max".into(),
            ));
        }
        _ => {}
    }
    let root: u64 = rng.gen();
    let (c, floor) = match params.mode {
        EnsembleMode::Lebesgue => lebesgue_correlation(map, phi, psi, n_max, params, root),
        EnsembleMode::Measure => measure_correlation(map, phi, psi, n_max, params, root),
    };
    let n_grid: Vec<usize> = (0..=n_max).collect();
    let (fit_d, fit_r2, fit_refused) = match fit_decay(&n_grid, &c, &floor) {
        Ok((d, r2)) => (d, r2, false),
        Err(Error::FitRefused(_)) => (0.0, 0.0, true),
        Err(e) => return Err(e),
    };
    let noise_floor = floor.iter().skip(1).fold(0.0f64, |a, &b| a.max(b));
    Ok(CorrelationSeries {
        phi: phi.clone(),
        psi: psi.clone(),
        n_grid,
        c,
        floor,
        noise_floor,
        fit_d,
        fit_r2,
        fit_refused,
    })
}

/// Batch-means CLT variance estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltReport {
    pub sigma2: f64,
    pub std_error: f64,
    pub batch_count: usize,
    pub batch_length: usize,
    pub mean: f64,
}

/// Batch-means estimator on a scalar series: sigma^2 ~ L * Var(batch means).
pub fn clt_variance_of_series(values: &[f64], batch_count: usize) -> Result<CltReport> {
    if batch_count < 20 {
        return Err(Error::Precondition(format!(
            "batch_count {batch_count} below the minimum of 20"
        )));
    }
    let l = values.len() / batch_count;
    if l == 0 {
        return Err(Error::Precondition("series shorter than batch_count".into()));
    }
    let used = &values[..l * batch_count];
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    let batch_means: Vec<f64> = used.chunks_exact(l).map(|b| b.iter().sum::<f64>() / l as f64).collect();
    let k = batch_count as f64;
    let var = batch_means
        .iter()
        .map(|m| (m - mean) * (m - mean))
        .sum::<f64>()
        / (k - 1.0);
    let sigma2 = l as f64 * var;
    Ok(CltReport {
        sigma2,
        std_error: sigma2 * (2.0 / (k - 1.0)).sqrt(),
        batch_count,
        batch_length: l,
        mean,
    })
}

/// CLT variance of a character along one orbit after a transient.
pub fn clt_variance(
    map: &MapSpec,
    phi: &Observable,
    x: &TorusPoint,
    n_total: usize,
    batch_count: usize,
    transient: usize,
) -> Result<CltReport> {
    let mut y = *x;
    for _ in 0..transient {
        y = map.apply(&y);
    }
    let mut values = Vec::with_capacity(n_total);
    for _ in 0..n_total {
        values.push(phi.eval(&y));
        y = map.apply(&y);
    }
    clt_variance_of_series(&values, batch_count)
}

/// Which parameter of the perturbation a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SweepKind {
    /// bump radius grid, default strength
    BumpRadius,
    /// strength grid at a fixed bump radius
    Strength { bump_radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameter: f64,
    pub skipped: bool,
    pub note: String,
    pub cluster_count: usize,
    pub fingerprint: Option<EmpiricalMeasure>,
    /// sup distance to the fingerprint of the previous non-skipped point
    pub distance_to_previous: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SweepParams {
    pub n_seeds: usize,
    pub birkhoff: BirkhoffParams,
    pub epsilon: f64,
    pub validation_grid: usize,
}

/// Physical-measure fingerprints along a monotone parameter grid; points
/// failing spec validation are skipped and flagged.
pub fn parameter_sweep(
    base: &AnosovSpec,
    kind: SweepKind,
    grid: &[f64],
    params: &SweepParams,
    rng: &mut ChaCha8Rng,
) -> Result<SweepReport> {
    if grid.len() < 2 {
        return Err(Error::Precondition("sweep grid needs at least 2 points".into()));
    }
    let increasing = grid.windows(2).all(|w| w[1] >= w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] <= w[0]);
    if !increasing && !decreasing {
        return Err(Error::Precondition("sweep grid must be monotone".into()));
    }
    // all seeds drawn up front so skipped points do not shift the stream
    let seeds: Vec<Vec<TorusPoint>> = grid
        .iter()
        .map(|_| {
            (0..params.n_seeds)
                .map(|_| TorusPoint::new(rng.gen(), rng.gen(), rng.gen()))
                .collect()
        })
        .collect();
    let mut points = Vec::with_capacity(grid.len());
    let mut previous: Option<EmpiricalMeasure> = None;
    for (gi, &value) in grid.iter().enumerate() {
        let built: Result<MapSpec> = match kind {
            SweepKind::BumpRadius if value == 0.0 => Ok(MapSpec::Anosov(base.clone())),
            SweepKind::BumpRadius => {
                ManeDASpec::new(base.clone(), value).map(MapSpec::Mane)
            }
            SweepKind::Strength { bump_radius } => {
                ManeDASpec::with_strength(base.clone(), bump_radius, value).map(MapSpec::Mane)
            }
        };
        let map = match built {
            Ok(m) => m,
            Err(e) => {
                points.push(SweepPoint {
                    parameter: value,
                    skipped: true,
                    note: e.to_string(),
                    cluster_count: 0,
                    fingerprint: None,
                    distance_to_previous: None,
                });
                continue;
            }
        };
        if let MapSpec::Mane(spec) = &map {
            match crate::maps::validate_mane_spec(spec, params.validation_grid) {
                Ok(v) if v.passed => {}
                Ok(v) => {
                    points.push(SweepPoint {
                        parameter: value,
                        skipped: true,
                        note: format!(
                            "validation failed: min center derivative {:.3e}",
                            v.min_center_derivative
                        ),
                        cluster_count: 0,
                        fingerprint: None,
                        distance_to_previous: None,
                    });
                    continue;
                }
                Err(e) => return Err(e),
            }
        }
        let measures: Vec<EmpiricalMeasure> = seeds[gi]
            .par_iter()
            .map(|s| birkhoff(&map, s, &params.birkhoff))
            .collect();
        let report = cluster_measures(&measures, params.epsilon)?;
        let fingerprint = report
            .cluster_fingerprints
            .first()
            .cloned()
            .unwrap_or_else(|| EmpiricalMeasure::mean(&measures));
        let distance_to_previous = previous.as_ref().map(|p| p.sup_distance(&fingerprint));
        previous = Some(fingerprint.clone());
        points.push(SweepPoint {
            parameter: value,
            skipped: false,
            note: String::new(),
            cluster_count: report.cluster_count,
            fingerprint: Some(fingerprint),
            distance_to_previous,
        });
    }
    Ok(SweepReport { kind, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::AnosovSpec;

    fn anosov() -> MapSpec {
        MapSpec::Anosov(AnosovSpec::default_example())
    }

    #[test]
    fn dictionary_has_124_canonical_entries() {
        let d = dictionary();
        assert_eq!(d.len(), 124);
        assert_eq!(canonical_frequencies().len(), 62);
        // canonical: first nonzero component positive, so no +/- duplicates
        for m in canonical_frequencies() {
            let neg = [-m[0], -m[1], -m[2]];
            assert!(!canonical_frequencies().contains(&neg));
        }
    }

    #[test]
    fn histogram_mass_conservation() {
        let map = anosov();
        let m = birkhoff(
            &map,
            &TorusPoint::new(0.3, 0.5, 0.7),
            &BirkhoffParams {
                n_transient: 10,
                n_avg: 1000,
            },
        );
        let s: f64 = m.histogram.iter().sum();
        assert!((s - 1.0).abs() <= 1e-12);
        assert!(m.averages.iter().all(|a| a.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn combining_halves_matches_whole_orbit() {
        let map = anosov();
        let x = TorusPoint::new(0.12, 0.34, 0.56);
        let p1 = BirkhoffParams {
            n_transient: 0,
            n_avg: 500,
        };
        let whole = birkhoff(
            &map,
            &x,
            &BirkhoffParams {
                n_transient: 0,
                n_avg: 1000,
            },
        );
        let first = birkhoff(&map, &x, &p1);
        // second half starts where the first ended
        let second = birkhoff(
            &map,
            &x,
            &BirkhoffParams {
                n_transient: 500,
                n_avg: 500,
            },
        );
        let combined = EmpiricalMeasure::combine(&first, &second);
        assert!(combined.sup_distance(&whole) <= 1e-12);
    }

    #[test]
    fn cluster_synthetic_populations() {
        let mut a = EmpiricalMeasure::lebesgue();
        a.n_avg = 1;
        let mut b = a.clone();
        b.averages[0] = 0.5; // displaced by 10 epsilon at epsilon = 0.05
        let mut measures = Vec::new();
        for _ in 0..10 {
            measures.push(a.clone());
            measures.push(b.clone());
        }
        let report = cluster_measures(&measures, 0.05).unwrap();
        assert_eq!(report.cluster_count, 2);
        assert_eq!(report.coverage, 1.0);

        let identical = vec![a.clone(); 20];
        let report = cluster_measures(&identical, 0.05).unwrap();
        assert_eq!(report.cluster_count, 1);
        assert_eq!(report.coverage, 1.0);
    }

    #[test]
    fn cluster_count_monotone_in_epsilon() {
        let mut measures = Vec::new();
        for i in 0..30 {
            let mut m = EmpiricalMeasure::lebesgue();
            m.n_avg = 1;
            m.averages[0] = (i % 3) as f64 * 0.3;
            measures.push(m);
        }
        let mut last = usize::MAX;
        for eps in [0.01, 0.1, 0.4, 1.0] {
            let k = cluster_measures(&measures, eps).unwrap().cluster_count;
            assert!(k <= last);
            last = k;
        }
    }

    #[test]
    fn fit_decay_exact_exponential() {
        let n_grid: Vec<usize> = (0..=10).collect();
        let c: Vec<f64> = n_grid.iter().map(|&n| (-0.3 * n as f64).exp()).collect();
        let (rate, r2) = fit_decay(&n_grid, &c, &vec![1e-12; c.len()]).unwrap();
        assert!((rate - 0.3).abs() <= 1e-6);
        assert!(r2 >= 0.999_999);
    }

    #[test]
    fn fit_decay_refuses_noise() {
        let n_grid: Vec<usize> = (0..=10).collect();
        let c = vec![1e-7; 11];
        assert!(matches!(
            fit_decay(&n_grid, &c, &vec![1e-4; c.len()]),
            Err(Error::FitRefused(_))
        ));
    }

    #[test]
    fn character_oracle_escape() {
        let base = AnosovSpec::default_example();
        let phi = Observable::cos([1, 0, 0]).unwrap();
        // A^T never returns (1,0,0) to +-(1,0,0): hyperbolic, no unit-root
        for n in 1..=30 {
            assert_eq!(
                character_correlation_oracle(base.matrix(), &phi, &phi, n),
                0.0
            );
        }
        assert_eq!(
            character_correlation_oracle(base.matrix(), &phi, &phi, 0),
            0.5
        );
        assert_eq!(correlation_vanishing_time(base.matrix(), &phi, &phi, 30), 1);
        // cross pair: A^T (1,0,0) = (0,0,1), so psi = cos(2 pi x1) correlates
        // with phi = cos(2 pi x3) exactly at lag 1
        let phi3 = Observable::cos([0, 0, 1]).unwrap();
        assert_eq!(
            character_correlation_oracle(base.matrix(), &phi3, &phi, 1),
            0.5
        );
        assert_eq!(correlation_vanishing_time(base.matrix(), &phi3, &phi, 30), 2);
    }

    #[test]
    fn clt_variance_iid() {
        // uniform +-1 coin flips: sigma^2 = 1
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let values: Vec<f64> = (0..200_000)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let r = clt_variance_of_series(&values, 100).unwrap();
        assert!((r.sigma2 - 1.0).abs() <= 4.0 * r.std_error.max(0.02));
    }

    #[test]
    fn clt_variance_coboundary_vanishes() {
        // phi = psi o f - psi telescopes: batch sums are O(1), sigma^2 -> 0
        let map = anosov();
        let psi = Observable::cos([1, 0, 0]).unwrap();
        let mut x = TorusPoint::new(0.21, 0.43, 0.65);
        let mut values = Vec::with_capacity(100_000);
        for _ in 0..100_000 {
            let fx = map.apply(&x);
            values.push(psi.eval(&fx) - psi.eval(&x));
            x = fx;
        }
        let r = clt_variance_of_series(&values, 50).unwrap();
        assert!(r.sigma2.abs() <= 0.01);
    }

    #[test]
    fn constant_observable_averages_to_one() {
        let map = anosov();
        let one = Observable::cos([0, 0, 0]).unwrap();
        let avg = time_average(
            &map,
            &TorusPoint::new(0.3, 0.1, 0.9),
            &one,
            &BirkhoffParams {
                n_transient: 0,
                n_avg: 10_000,
            },
        );
        assert_eq!(avg, 1.0);
    }
}
