//! Hyperbolic-time detection, Pliss densities, expansion-time functions and
//! their tail distributions along center-unstable co-norm series.

use crate::cocycle::ContractionSeries;
use crate::error::{Error, Result};
use crate::maps::MapSpec;
use crate::torus::TorusPoint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Indices n such that every backward window average of the series ending at
/// n is <= -b.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperbolicTimeReport {
    pub b: f64,
    /// ascending, 1-based
    pub times: Vec<usize>,
    pub density: f64,
    pub first_time: Option<usize>,
}

/// Prefix sums S_n = sum_{j<=n} (a_j + b), S_0 = 0. n is a b-hyperbolic time
/// iff S_n <= S_m for every 0 <= m < n, which a single pass detects by
/// tracking the running prefix minimum.
pub fn detect_hyperbolic_times(series: &[f64], b: f64) -> Result<HyperbolicTimeReport> {
    if b <= 0.0 || !b.is_finite() {
        return Err(Error::Precondition(format!("threshold b = {b} must be positive")));
    }
    if series.is_empty() {
        return Err(Error::Precondition("series must be non-empty".into()));
    }
    let mut times = Vec::new();
    let mut s = 0.0f64;
    let mut prefix_min = 0.0f64;
    for (i, a) in series.iter().enumerate() {
        s += a + b;
        if s <= prefix_min {
            times.push(i + 1);
        }
        prefix_min = prefix_min.min(s);
    }
    let density = times.len() as f64 / series.len() as f64;
    let first_time = times.first().copied();
    Ok(HyperbolicTimeReport {
        b,
        times,
        density,
        first_time,
    })
}

/// Density of b-hyperbolic times on [1, L].
pub fn pliss_density(series: &ContractionSeries, b: f64) -> Result<f64> {
    Ok(detect_hyperbolic_times(&series.values, b)?.density)
}

/// Expansion time: minimal N such that all forward prefix averages from N on
/// stay below -b/2, or censored at the orbit horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionTime {
    At(usize),
    Censored,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionTimeRecord {
    pub b: f64,
    pub value: ExpansionTime,
    pub orbit_length: usize,
}

impl ExpansionTimeRecord {
    /// Survival indicator: is the expansion time larger than n? Censored
    /// records count as exceeding any n up to the horizon.
    pub fn exceeds(&self, n: usize) -> bool {
        match self.value {
            ExpansionTime::At(v) => v > n,
            ExpansionTime::Censored => true,
        }
    }
}

pub fn expansion_time(series: &[f64], b: f64) -> Result<ExpansionTimeRecord> {
    if series.is_empty() {
        return Err(Error::Precondition("series must be non-empty".into()));
    }
    let half = 0.5 * b;
    let mut t = 0.0f64;
    let mut last_violation: Option<usize> = None;
    for (i, a) in series.iter().enumerate() {
        t += a;
        if t >= -half * (i + 1) as f64 {
            last_violation = Some(i + 1);
        }
    }
    let value = match last_violation {
        None => ExpansionTime::At(1),
        Some(n) if n == series.len() => ExpansionTime::Censored,
        Some(n) => ExpansionTime::At(n + 1),
    };
    Ok(ExpansionTimeRecord {
        b,
        value,
        orbit_length: series.len(),
    })
}

/// Survival curve of the expansion-time distribution over a disk sample,
/// with exponential (tau = 1) and stretched-exponential fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailCurve {
    pub b: f64,
    pub n_grid: Vec<usize>,
    pub survival: Vec<f64>,
    pub censored: usize,
    pub sample_size: usize,
    /// rate of the tau = 1 fit: survival ~ exp(const - fit_c * n)
    pub fit_c: f64,
    pub fit_tau: f64,
    pub fit_r2: f64,
    /// free-tau stretched fit survival ~ exp(const - c * n^tau)
    pub stretched_c: f64,
    pub stretched_tau: f64,
    pub stretched_r2: f64,
    /// set when survival already vanished at n = 1
    pub immediate_expansion: bool,
}

fn weighted_linear_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> (f64, f64, f64) {
    let wsum: f64 = ws.iter().sum();
    let xm = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let ym = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - xm) * (x - xm);
        sxy += w * (x - xm) * (y - ym);
        syy += w * (y - ym) * (y - ym);
    }
    if sxx == 0.0 || syy == 0.0 {
        return (0.0, ym, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = (sxy * sxy) / (sxx * syy);
    (slope, ym - slope * xm, r2)
}

/// Tail of the expansion-time distribution over a sample of disk points.
///
/// `orbit_length` bounds the series length per point (censoring horizon);
/// the survival grid runs over n = 1..n_max.
pub fn tail_distribution(
    map: &MapSpec,
    disk: &[TorusPoint],
    b: f64,
    n_max: usize,
    orbit_length: usize,
    warmup: usize,
) -> Result<TailCurve> {
    if disk.len() < 2 {
        return Err(Error::Precondition("disk sample too small".into()));
    }
    if n_max == 0 || orbit_length < n_max {
        return Err(Error::Precondition(
            "need n_max >= 1 and orbit_length >= n_max".into(),
        ));
    }
    let records: Vec<ExpansionTimeRecord> = disk
        .par_iter()
        .map(|p| {
            let series = crate::cocycle::contraction_series(map, p, orbit_length, warmup)?;
            expansion_time(&series.values, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let censored = records
        .iter()
        .filter(|r| r.value == ExpansionTime::Censored)
        .count();
    if censored == disk.len() {
        return Err(Error::AllCensored);
    }
    let n_grid: Vec<usize> = (1..=n_max).collect();
    let m = disk.len() as f64;
    let survival: Vec<f64> = n_grid
        .iter()
        .map(|&n| records.iter().filter(|r| r.exceeds(n)).count() as f64 / m)
        .collect();
    let immediate = survival[0] == 0.0;

    // fit on the part of the curve above the noise floor
    let floor = 5.0 / m;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (&n, &s) in n_grid.iter().zip(&survival) {
        if s >= floor {
            xs.push(n as f64);
            ys.push(s.ln());
            ws.push(s * m); // weight by surviving counts
        }
    }
    let (fit_c, fit_tau, fit_r2, stretched_c, stretched_tau, stretched_r2) = if xs.len() >= 4 {
        let (slope, _, r2) = weighted_linear_fit(&xs, &ys, &ws);
        // stretched fit: grid search over tau, linear LS in n^tau
        let mut best = (0.0, 1.0, -1.0);
        for i in 1..=20 {
            let tau = i as f64 / 20.0;
            let xst: Vec<f64> = xs.iter().map(|x| x.powf(tau)).collect();
            let (sl, _, r2t) = weighted_linear_fit(&xst, &ys, &ws);
            if r2t > best.2 {
                best = (-sl, tau, r2t);
            }
        }
        (-slope, 1.0, r2, best.0, best.1, best.2)
    } else {
        (0.0, 1.0, 0.0, 0.0, 1.0, 0.0)
    };
    Ok(TailCurve {
        b,
        n_grid,
        survival,
        censored,
        sample_size: disk.len(),
        fit_c,
        fit_tau,
        fit_r2,
        stretched_c,
        stretched_tau,
        stretched_r2,
        immediate_expansion: immediate,
    })
}

/// Backward contraction check at a hyperbolic time (per-step ratio list).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionCheck {
    /// ratio_k = d(f^{n-k}x, f^{n-k}y) / (e^{-k b/2} d(f^n x, f^n y)), k = 1..n
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Verify d(f^{n-k}x, f^{n-k}y) <= e^{-k b/2} d(f^n x, f^n y) for 1 <= k <= n,
/// for y on the same cu-disk with d(f^n x, f^n y) <= r.
pub fn check_contraction_at_ht(
    map: &MapSpec,
    x: &TorusPoint,
    y: &TorusPoint,
    n: usize,
    b: f64,
    r: f64,
) -> Result<ContractionCheck> {
    if n == 0 {
        return Err(Error::Precondition("hyperbolic time must be >= 1".into()));
    }
    let mut dx = *x;
    let mut dy = *y;
    let mut dists = Vec::with_capacity(n + 1);
    dists.push(dx.dist(&dy));
    for _ in 0..n {
        dx = map.apply(&dx);
        dy = map.apply(&dy);
        dists.push(dx.dist(&dy));
    }
    let dn = dists[n];
    if dn > r {
        return Err(Error::Precondition(format!(
            "d(f^n x, f^n y) = {dn:.3e} exceeds the configured radius {r}"
        )));
    }
    let mut ratios = Vec::with_capacity(n);
    for k in 1..=n {
        let bound = (-(k as f64) * 0.5 * b).exp() * dn;
        let ratio = if dists[n - k] == 0.0 && bound == 0.0 {
            0.0
        } else {
            dists[n - k] / bound
        };
        ratios.push(ratio);
    }
    let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
    Ok(ContractionCheck { ratios, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;

    // small deterministic LCG so the oracle check needs no external seed data
    struct Lcg(u64);
    impl Lcg {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    fn brute_force_times(series: &[f64], b: f64) -> Vec<usize> {
        // same prefix values, quadratic comparison
        let mut s = vec![0.0f64];
        for a in series {
            s.push(s.last().unwrap() + a + b);
        }
        (1..=series.len())
            .filter(|&n| (0..n).all(|m| s[n] <= s[m]))
            .collect()
    }

    #[test]
    fn detector_matches_brute_force() {
        let mut rng = Lcg(42);
        for _ in 0..200 {
            let len = 1 + (rng.next_f64() * 200.0) as usize;
            let b = 0.05 + rng.next_f64();
            let series: Vec<f64> = (0..len).map(|_| rng.next_f64() * 2.0 - 1.5).collect();
            let fast = detect_hyperbolic_times(&series, b).unwrap().times;
            assert_eq!(fast, brute_force_times(&series, b));
        }
    }

    #[test]
    fn hyperbolic_times_shrink_with_b() {
        let mut rng = Lcg(7);
        let series: Vec<f64> = (0..500).map(|_| rng.next_f64() * 2.0 - 1.6).collect();
        let loose = detect_hyperbolic_times(&series, 0.2).unwrap().times;
        let tight = detect_hyperbolic_times(&series, 0.6).unwrap().times;
        for t in &tight {
            assert!(loose.contains(t));
        }
    }

    #[test]
    fn expansion_time_cases() {
        // uniformly good series: immediate expansion
        let good = vec![-1.0; 50];
        assert_eq!(expansion_time(&good, 0.4).unwrap().value, ExpansionTime::At(1));
        // three early positives: T_n > -0.2n through n = 5 (0.5 > -1.0),
        // first satisfied at n = 6 (-1.5 <= -1.2)
        let mut mid = vec![-1.0; 50];
        mid[0] = 0.5;
        mid[1] = 0.5;
        mid[2] = 0.5;
        let r = expansion_time(&mid, 0.4).unwrap();
        assert_eq!(r.value, ExpansionTime::At(6));
        assert!(r.exceeds(5) && !r.exceeds(6));
        // violation at the horizon: censored
        let mut late = vec![-1.0; 50];
        late[49] = 60.0;
        assert_eq!(expansion_time(&late, 0.4).unwrap().value, ExpansionTime::Censored);
    }

    #[test]
    fn contraction_check_on_linear_center() {
        use crate::maps::AnosovSpec;
        let map = MapSpec::Anosov(AnosovSpec::default_example());
        let x = TorusPoint::new(0.3, 0.6, 0.9);
        let v2 = map.base().eigen().vectors[1];
        let y = TorusPoint::from_vector(&(x.to_vector() + v2 * 1e-7));
        // along v2 the distance grows by k2 each step, so with
        // b < 2 log k2 every backward ratio stays below 1
        let r = check_contraction_at_ht(&map, &x, &y, 12, 0.4, 1e-3).unwrap();
        assert!(r.max_ratio <= 1.0 + 1e-9);
        assert_eq!(r.ratios.len(), 12);
    }
}
