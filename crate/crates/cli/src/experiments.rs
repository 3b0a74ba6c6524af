//! The ten experiments: parameter schemas, dispatch, CSV layouts and the
//! embedded acceptance checks recorded in the manifest.
//!
//! Every experiment is a pure function of (config, rng_seed); data files
//! contain no timestamps, so reruns are byte-identical at any worker count.

use crate::config::{CliError, Config, ParseError, ValidationError};
use crate::output::{fmt_f, CsvFile};
use meclab_core::{
    basin_map, birkhoff, clt_variance, cluster_measures, contraction_series, correlation,
    correlation_vanishing_time, detect_hyperbolic_times, expansion_time, find_periodic, ftle,
    green_kubo_oracle, intlin, parameter_sweep, skeleton_candidates, stream_rng,
    tail_distribution, unstable_disk, BasinParams, BirkhoffParams, CorrelationParams,
    EnsembleMode, ExpansionTime, MapSpec, Observable, ObservableKind, PeriodicOrbit,
    SkeletonParams, SweepKind, SweepParams, TorusPoint,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::Path;

/// Data files written, manifest summary, and the embedded pass flag.
pub type Outcome = (Vec<String>, Value, bool);

pub fn run(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    match config.name() {
        "lyapunov" => lyapunov(config, map, dir),
        "hyp-times" => hyp_times(config, map, dir),
        "periodic" => periodic(config, map, dir),
        "skeleton" => skeleton(config, map, dir, seed),
        "measures" => measures(config, map, dir, seed),
        "basin" => basin(config, map, dir, seed),
        "correlation" => correlation_exp(config, map, dir, seed),
        "tail" => tail(config, map, dir, seed),
        "clt" => clt(config, map, dir),
        "sweep" => sweep(config, map, dir, seed),
        other => Err(CliError::Parse(ParseError(format!("unknown experiment `{other}`")))),
    }
}

/// Typed access to `[params]` with per-experiment schemas; leftover keys are
/// a parse error so misspelled parameters cannot silently use defaults.
struct Params<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Params<'a> {
    fn new(config: &'a Config, allowed: &[&str]) -> Result<Self, CliError> {
        for key in config.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Parse(ParseError(format!(
                    "unknown key `{key}` in [params] for experiment `{}`; known keys: {}",
                    config.name(),
                    allowed.join(", ")
                ))));
            }
        }
        Ok(Self { map: &config.params })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Positive count (>= 1).
    fn count(&self, key: &str, default: usize) -> Result<usize, CliError> {
        let v = self.usize(key, default)?;
        if v == 0 {
            return Err(CliError::Validation(ValidationError(format!(
                "[params] {key} must be positive"
            ))));
        }
        Ok(v)
    }

    /// Non-negative count (0 allowed, e.g. transients).
    fn usize(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                CliError::Parse(ParseError(format!("[params] {key} `{s}` is not an integer")))
            }),
        }
    }

    fn f64(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                CliError::Parse(ParseError(format!("[params] {key} `{s}` is not a number")))
            }),
        }
    }

    /// Positive real, for thresholds like b and epsilon.
    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.f64(key, default)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(CliError::Validation(ValidationError(format!(
                "[params] {key} must be positive, got {v}"
            ))));
        }
        Ok(v)
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(s) => Err(CliError::Parse(ParseError(format!(
                "[params] {key} `{s}` is not true/false"
            )))),
        }
    }

    fn point(&self, key: &str, default: [f64; 3]) -> Result<TorusPoint, CliError> {
        let c = match self.raw(key) {
            None => default,
            Some(s) => {
                let v = self.f64_list_of(s, key)?;
                if v.len() != 3 {
                    return Err(CliError::Parse(ParseError(format!(
                        "[params] {key} needs 3 coordinates, got {}",
                        v.len()
                    ))));
                }
                [v[0], v[1], v[2]]
            }
        };
        Ok(TorusPoint::new(c[0], c[1], c[2]))
    }

    fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => self.f64_list_of(s, key),
        }
    }

    fn f64_list_of(&self, s: &str, key: &str) -> Result<Vec<f64>, CliError> {
        s.split_whitespace()
            .map(|e| {
                e.parse().map_err(|_| {
                    CliError::Parse(ParseError(format!("[params] {key} entry `{e}` is not a number")))
                })
            })
            .collect()
    }

    /// Observable literal: `cos 1 0 0` or `sin 0 -1 2`.
    fn observable(&self, key: &str, default: &str) -> Result<Observable, CliError> {
        let s = self.raw(key).unwrap_or(default);
        let parts: Vec<&str> = s.split_whitespace().collect();
        let bad = || CliError::Parse(ParseError(format!(
            "[params] {key} `{s}` is not of the form `cos m1 m2 m3` or `sin m1 m2 m3`"
        )));
        if parts.len() != 4 {
            return Err(bad());
        }
        let kind = match parts[0] {
            "cos" => ObservableKind::Cos,
            "sin" => ObservableKind::Sin,
            _ => return Err(bad()),
        };
        let mut m = [0i64; 3];
        for (i, p) in parts[1..].iter().enumerate() {
            m[i] = p.parse().map_err(|_| bad())?;
        }
        Observable::new(m, kind).map_err(CliError::Core)
    }
}

fn uniform_point(rng: &mut impl Rng) -> TorusPoint {
    TorusPoint::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>())
}

/// First hyperbolic index-1 saddle in the period-`n` census.
fn index_one_saddle(map: &MapSpec, n: usize) -> Result<PeriodicOrbit, CliError> {
    let pool = find_periodic(map, n)?;
    pool.into_iter()
        .find(|o| o.hyperbolic && o.stable_index == 1)
        .ok_or_else(|| {
            CliError::Validation(ValidationError(format!(
                "no hyperbolic index-1 saddle among periodic points of period dividing {n}"
            )))
        })
}

// --- lyapunov ---------------------------------------------------------

/// CSV `ftle.csv`: lambda1,lambda2,lambda3,orbit_length,warmup (one row).
fn lyapunov(config: &Config, map: &MapSpec, dir: &Path) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["x", "n", "warmup"])?;
    let x = p.point("x", [0.3, 0.7, 0.1])?;
    let n = p.count("n", 10_000)?;
    let warmup = p.usize("warmup", 1000)?;
    let report = ftle(map, &x, n, warmup)?;
    let [l1, l2, l3] = report.exponents;

    let mut csv = CsvFile::new(dir, "ftle.csv", &["lambda1", "lambda2", "lambda3", "orbit_length", "warmup"]);
    csv.row(&[fmt_f(l1), fmt_f(l2), fmt_f(l3), n.to_string(), warmup.to_string()]);
    let files = vec![csv.write()?];

    // embedded acceptance: exact spectrum for the linear map, positive
    // top/center pair (mostly expanding) for the perturbation
    let (pass, oracle) = match map {
        MapSpec::Anosov(a) => {
            let k = a.eigen().values;
            let target = [k[2].ln(), k[1].ln(), k[0].ln()];
            let ok = (l1 - target[0]).abs() <= 1e-6
                && (l2 - target[1]).abs() <= 1e-6
                && (l3 - target[2]).abs() <= 1e-6
                && (l1 + l2 + l3).abs() <= 1e-9;
            (ok, json!([target[0], target[1], target[2]]))
        }
        MapSpec::Mane(_) => (l1 > 0.0 && l1 >= l2 && l2 >= l3, Value::Null),
    };
    let summary = json!({
        "exponents": [l1, l2, l3],
        "sum": l1 + l2 + l3,
        "oracle_log_eigenvalues": oracle,
    });
    Ok((files, summary, pass))
}

// --- hyp-times --------------------------------------------------------

/// CSV `series.csv`: n,a_n,is_ht (one row per orbit step).
fn hyp_times(config: &Config, map: &MapSpec, dir: &Path) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["x", "length", "warmup", "b"])?;
    let x = p.point("x", [0.3, 0.7, 0.1])?;
    let length = p.count("length", 2000)?;
    let warmup = p.usize("warmup", 100)?;
    let b = p.positive("b", 0.4)?;

    let series = contraction_series(map, &x, length, warmup)?;
    let report = detect_hyperbolic_times(&series.values, b)?;
    let exp = expansion_time(&series.values, b)?;

    let mut csv = CsvFile::new(dir, "series.csv", &["n", "a_n", "is_ht"]);
    let mut next = report.times.iter().peekable();
    for (i, a) in series.values.iter().enumerate() {
        let n = i + 1;
        let is_ht = next.peek() == Some(&&n);
        if is_ht {
            next.next();
        }
        csv.row(&[n.to_string(), fmt_f(*a), (is_ht as u8).to_string()]);
    }
    let files = vec![csv.write()?];

    let (exp_value, censored) = match exp.value {
        ExpansionTime::At(n) => (json!(n), false),
        ExpansionTime::Censored => (Value::Null, true),
    };
    let summary = json!({
        "b": b,
        "density": report.density,
        "first_time": report.first_time,
        "count": report.times.len(),
        "expansion_time": exp_value,
        "expansion_censored": censored,
    });
    Ok((files, summary, report.density > 0.0))
}

// --- periodic ---------------------------------------------------------

/// CSV `periodic.csv`: period,x1,x2,x3,m1,m2,m3,stable_index,hyperbolic,residual
/// (one row per periodic point, representative coordinates).
fn periodic(config: &Config, map: &MapSpec, dir: &Path) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["n"])?;
    let n = p.count("n", 2)?;
    let orbits = find_periodic(map, n)?;

    let mut csv = CsvFile::new(
        dir,
        "periodic.csv",
        &["period", "x1", "x2", "x3", "m1", "m2", "m3", "stable_index", "hyperbolic", "residual"],
    );
    for o in &orbits {
        let c = o.representative().coords();
        csv.row(&[
            o.period.to_string(),
            fmt_f(c[0]),
            fmt_f(c[1]),
            fmt_f(c[2]),
            fmt_f(o.multipliers[0]),
            fmt_f(o.multipliers[1]),
            fmt_f(o.multipliers[2]),
            o.stable_index.to_string(),
            (o.hyperbolic as u8).to_string(),
            fmt_f(o.residual),
        ]);
    }
    let files = vec![csv.write()?];

    let worst = orbits.iter().map(|o| o.residual).fold(0.0f64, f64::max);
    let residuals_ok = worst <= 1e-10;
    // integer oracle |det(A^n - I)| counts the points of the linear map
    let m = map.base().matrix();
    let mut im: intlin::IMat =
        std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] as i128));
    im = intlin::mat_pow(&im, n as u32);
    for i in 0..3 {
        im[i][i] -= 1;
    }
    let census_oracle = intlin::det(&im).unsigned_abs();
    let pass = match map {
        MapSpec::Anosov(_) => residuals_ok && orbits.len() as u128 == census_oracle,
        MapSpec::Mane(_) => residuals_ok,
    };
    let summary = json!({
        "period": n,
        "count": orbits.len(),
        "census_oracle_linear": census_oracle as u64,
        "max_residual": worst,
    });
    Ok((files, summary, pass))
}

// --- skeleton ---------------------------------------------------------

/// JSON `skeleton.json`: the full SkeletonCandidate record.
fn skeleton(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(
        config,
        &["pool_period", "disk_radius", "disk_samples", "seeds_per_saddle", "n_transient", "n_avg", "epsilon"],
    )?;
    let pool_period = p.count("pool_period", 2)?;
    let params = SkeletonParams {
        disk_radius: p.positive("disk_radius", 0.02)?,
        disk_samples: p.count("disk_samples", 200)?,
        seeds_per_saddle: p.count("seeds_per_saddle", 20)?,
        birkhoff: BirkhoffParams {
            n_transient: p.usize("n_transient", 1000)?,
            n_avg: p.count("n_avg", 100_000)?,
        },
        epsilon: p.positive("epsilon", 0.05)?,
    };
    let pool = find_periodic(map, pool_period)?;
    let mut rng = stream_rng(seed, 0);
    let candidate = skeleton_candidates(map, &pool, &params, &mut rng)?;

    let path = dir.join("skeleton.json");
    let text = serde_json::to_string_pretty(&candidate).map_err(std::io::Error::other)?;
    std::fs::write(&path, text + "\n")?;
    let files = vec!["skeleton.json".to_string()];

    let summary = json!({
        "pool_period": pool_period,
        "pool_size": pool.len(),
        "representatives": candidate.representatives.len(),
        "period_product": candidate.period_product,
        "empty": candidate.empty,
    });
    Ok((files, summary, !candidate.empty))
}

// --- measures ---------------------------------------------------------

/// CSV `fingerprints.csv`: seed,x1,x2,x3,cluster,avg0..avg{D-1} (one row per
/// seed; avg columns follow the dictionary order of the fingerprint).
fn measures(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["n_seeds", "n_transient", "n_avg", "epsilon"])?;
    let n_seeds = p.count("n_seeds", 200)?;
    let birkhoff_params = BirkhoffParams {
        n_transient: p.usize("n_transient", 1000)?,
        n_avg: p.count("n_avg", 100_000)?,
    };
    let epsilon = p.positive("epsilon", 0.05)?;

    let seeds: Vec<TorusPoint> = (0..n_seeds)
        .map(|i| uniform_point(&mut stream_rng(seed, i as u64)))
        .collect();
    let fingerprints: Vec<_> = seeds
        .par_iter()
        .map(|s| birkhoff(map, s, &birkhoff_params))
        .collect();
    let report = cluster_measures(&fingerprints, epsilon)?;

    let dict = fingerprints[0].averages.len();
    let mut header: Vec<String> = ["seed", "x1", "x2", "x3", "cluster"].map(String::from).to_vec();
    header.extend((0..dict).map(|i| format!("avg{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvFile::new(dir, "fingerprints.csv", &header_refs);
    for (i, (s, fp)) in seeds.iter().zip(&fingerprints).enumerate() {
        let c = s.coords();
        let mut row = vec![
            i.to_string(),
            fmt_f(c[0]),
            fmt_f(c[1]),
            fmt_f(c[2]),
            report.assignment[i].map(|k| k.to_string()).unwrap_or_default(),
        ];
        row.extend(fp.averages.iter().map(|v| fmt_f(*v)));
        csv.row(&row);
    }
    let files = vec![csv.write()?];

    let summary = json!({
        "n_seeds": n_seeds,
        "epsilon": epsilon,
        "cluster_count": report.cluster_count,
        "coverage": report.coverage,
        "undersampled": report.undersampled,
    });
    let pass = report.cluster_count == 1 && report.coverage >= 0.95;
    Ok((files, summary, pass))
}

// --- basin ------------------------------------------------------------

/// CSV `basin.csv`: seed_index,cluster (empty cluster field = unassigned).
fn basin(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["grid", "epsilon", "n_transient", "n_avg"])?;
    let params = BasinParams {
        grid: p.count("grid", 6)?,
        epsilon: p.positive("epsilon", 0.05)?,
        birkhoff: BirkhoffParams {
            n_transient: p.usize("n_transient", 1000)?,
            n_avg: p.count("n_avg", 100_000)?,
        },
    };
    let mut rng = stream_rng(seed, 0);
    let report = basin_map(map, &params, &mut rng)?;

    let mut csv = CsvFile::new(dir, "basin.csv", &["seed_index", "cluster"]);
    for (i, a) in report.assignment.iter().enumerate() {
        csv.row(&[i.to_string(), a.map(|k| k.to_string()).unwrap_or_default()]);
    }
    let files = vec![csv.write()?];

    let summary = json!({
        "grid": params.grid,
        "epsilon": params.epsilon,
        "cluster_count": report.cluster_count,
        "coverage": report.coverage,
        "undersampled": report.undersampled,
    });
    let pass = report.cluster_count >= 1 && report.coverage >= 0.95 && !report.undersampled;
    Ok((files, summary, pass))
}

// --- correlation ------------------------------------------------------

/// CSV `correlation.csv`: n,C,floor (per lag; floor is the 3-sigma error).
fn correlation_exp(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(
        config,
        &["phi", "psi", "n_max", "mode", "n_seeds", "transient", "orbit_length", "control_variate"],
    )?;
    let phi = p.observable("phi", "cos 1 0 0")?;
    let psi = p.observable("psi", "cos 1 0 0")?;
    let n_max = p.count("n_max", 8)?;
    let mode = match p.raw("mode").unwrap_or("lebesgue") {
        "lebesgue" => EnsembleMode::Lebesgue,
        "measure" => EnsembleMode::Measure,
        other => {
            return Err(CliError::Parse(ParseError(format!(
                "[params] mode `{other}` is not lebesgue or measure"
            ))))
        }
    };
    let params = CorrelationParams {
        mode,
        n_seeds: p.count("n_seeds", 1000)?,
        transient: p.usize("transient", 1000)?,
        orbit_length: p.count("orbit_length", 100_000)?,
        control_variate: p.bool("control_variate", false)?,
    };
    let mut rng = stream_rng(seed, 0);
    let series = correlation(map, &phi, &psi, n_max, &params, &mut rng)?;

    let mut csv = CsvFile::new(dir, "correlation.csv", &["n", "C", "floor"]);
    for ((n, c), f) in series.n_grid.iter().zip(&series.c).zip(&series.floor) {
        csv.row(&[n.to_string(), fmt_f(*c), fmt_f(*f)]);
    }
    let files = vec![csv.write()?];

    // embedded acceptance: the linear map must agree with the exact
    // character oracle past its vanishing time; the perturbed map must
    // admit a positive exponential-decay fit
    let pass = match map {
        MapSpec::Anosov(a) => {
            let n0 = correlation_vanishing_time(a.matrix(), &phi, &psi, n_max);
            series
                .n_grid
                .iter()
                .zip(series.c.iter().zip(&series.floor))
                .all(|(&n, (&c, &f))| n < n0 || c.abs() <= f)
        }
        MapSpec::Mane(_) => !series.fit_refused && series.fit_d > 0.0 && series.fit_r2 >= 0.8,
    };
    let summary = json!({
        "n_max": n_max,
        "noise_floor": series.noise_floor,
        "fit_d": series.fit_d,
        "fit_r2": series.fit_r2,
        "fit_refused": series.fit_refused,
    });
    Ok((files, summary, pass))
}

// --- tail -------------------------------------------------------------

/// CSV `tail.csv`: n,survival,censored_count per grid point; the fit lives
/// in a trailing `# fit {...}` JSON footer record.
fn tail(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(
        config,
        &["saddle_period", "disk_radius", "disk_samples", "b", "n_max", "orbit_length", "warmup"],
    )?;
    let saddle_period = p.count("saddle_period", 2)?;
    let r = p.positive("disk_radius", 0.02)?;
    let m = p.count("disk_samples", 1000)?;
    let b = p.positive("b", 0.87)?;
    let n_max = p.count("n_max", 400)?;
    let orbit_length = p.count("orbit_length", 2000)?;
    let warmup = p.usize("warmup", 200)?;

    let saddle = index_one_saddle(map, saddle_period)?;
    let mut rng = stream_rng(seed, 0);
    let (disk, _) = unstable_disk(map, &saddle, r, m, &mut rng)?;
    let curve = tail_distribution(map, &disk, b, n_max, orbit_length, warmup)?;

    let mut csv = CsvFile::new(dir, "tail.csv", &["n", "survival", "censored_count"]);
    for (n, s) in curve.n_grid.iter().zip(&curve.survival) {
        csv.row(&[n.to_string(), fmt_f(*s), curve.censored.to_string()]);
    }
    csv.footer(
        "fit",
        &json!({
            "fit_c": curve.fit_c,
            "fit_tau": curve.fit_tau,
            "fit_r2": curve.fit_r2,
            "stretched_c": curve.stretched_c,
            "stretched_tau": curve.stretched_tau,
            "stretched_r2": curve.stretched_r2,
            "sample_size": curve.sample_size,
        }),
    );
    let files = vec![csv.write()?];

    let monotone = curve.survival.windows(2).all(|w| w[1] <= w[0]);
    let summary = json!({
        "b": b,
        "saddle_period": saddle.period,
        "sample_size": curve.sample_size,
        "censored": curve.censored,
        "fit_c": curve.fit_c,
        "fit_r2": curve.fit_r2,
        "monotone": monotone,
    });
    let pass = monotone && curve.fit_c > 0.0 && curve.fit_r2 >= 0.9;
    Ok((files, summary, pass))
}

// --- clt --------------------------------------------------------------

/// CSV `clt.csv`: sigma2,std_error,batch_count,batch_length,mean (one row).
fn clt(config: &Config, map: &MapSpec, dir: &Path) -> Result<Outcome, CliError> {
    let p = Params::new(config, &["phi", "x", "n_total", "batch_count", "transient", "oracle_n_max"])?;
    let phi = p.observable("phi", "cos 1 0 0")?;
    let x = p.point("x", [0.3, 0.7, 0.1])?;
    let n_total = p.count("n_total", 100_000)?;
    let batch_count = p.count("batch_count", 50)?;
    let transient = p.usize("transient", 1000)?;
    let oracle_n_max = p.count("oracle_n_max", 50)?;

    let report = clt_variance(map, &phi, &x, n_total, batch_count, transient)?;

    let mut csv = CsvFile::new(dir, "clt.csv", &["sigma2", "std_error", "batch_count", "batch_length", "mean"]);
    csv.row(&[
        fmt_f(report.sigma2),
        fmt_f(report.std_error),
        report.batch_count.to_string(),
        report.batch_length.to_string(),
        fmt_f(report.mean),
    ]);
    let files = vec![csv.write()?];

    // embedded acceptance: Green-Kubo closed form for the linear map
    let (pass, oracle) = match map {
        MapSpec::Anosov(a) => {
            let s2 = green_kubo_oracle(a.matrix(), &phi, oracle_n_max);
            ((report.sigma2 - s2).abs() <= 3.0 * report.std_error, json!(s2))
        }
        MapSpec::Mane(_) => (report.sigma2.is_finite() && report.sigma2 > 0.0, Value::Null),
    };
    let summary = json!({
        "sigma2": report.sigma2,
        "std_error": report.std_error,
        "mean": report.mean,
        "green_kubo_oracle": oracle,
    });
    Ok((files, summary, pass))
}

// --- sweep ------------------------------------------------------------

/// CSV `sweep.csv`: parameter,skipped,cluster_count,distance_to_previous,note
/// (one row per grid point; empty distance on the first and skipped points).
fn sweep(config: &Config, map: &MapSpec, dir: &Path, seed: u64) -> Result<Outcome, CliError> {
    let p = Params::new(
        config,
        &["kind", "grid", "fixed_bump_radius", "n_seeds", "n_transient", "n_avg", "epsilon", "validation_grid"],
    )?;
    let kind = match p.raw("kind").unwrap_or("bump_radius") {
        "bump_radius" => SweepKind::BumpRadius,
        "strength" => SweepKind::Strength {
            bump_radius: p.positive("fixed_bump_radius", 0.05)?,
        },
        other => {
            return Err(CliError::Parse(ParseError(format!(
                "[params] kind `{other}` is not bump_radius or strength"
            ))))
        }
    };
    let grid = p.f64_list("grid", &[0.0, 0.01, 0.02, 0.03, 0.04, 0.05])?;
    let params = SweepParams {
        n_seeds: p.count("n_seeds", 40)?,
        birkhoff: BirkhoffParams {
            n_transient: p.usize("n_transient", 1000)?,
            n_avg: p.count("n_avg", 200_000)?,
        },
        epsilon: p.positive("epsilon", 0.05)?,
        validation_grid: p.count("validation_grid", 64)?,
    };
    let mut rng = stream_rng(seed, 0);
    let report = parameter_sweep(map.base(), kind, &grid, &params, &mut rng)?;

    let mut csv = CsvFile::new(
        dir,
        "sweep.csv",
        &["parameter", "skipped", "cluster_count", "distance_to_previous", "note"],
    );
    for pt in &report.points {
        csv.row(&[
            fmt_f(pt.parameter),
            (pt.skipped as u8).to_string(),
            pt.cluster_count.to_string(),
            pt.distance_to_previous.map(fmt_f).unwrap_or_default(),
            csv_quote(&pt.note),
        ]);
    }
    let files = vec![csv.write()?];

    let all_single = report.points.iter().all(|pt| !pt.skipped && pt.cluster_count == 1);
    let max_step = report
        .points
        .iter()
        .filter_map(|pt| pt.distance_to_previous)
        .fold(0.0f64, f64::max);
    let summary = json!({
        "grid": grid,
        "points": report.points.len(),
        "skipped": report.points.iter().filter(|pt| pt.skipped).count(),
        "max_step_distance": max_step,
    });
    Ok((files, summary, all_single && max_step <= params.epsilon))
}

/// RFC-4180 quoting for free-text fields.
fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
