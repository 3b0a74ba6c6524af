//! Periodic-orbit search (exact integer enumeration for the linear map,
//! Newton refinement for the perturbed one), Floquet classification,
//! quasi-hyperbolic recurrence, shadowing, skeleton candidates and local
//! unstable disks.

use crate::cocycle::ContractionStream;
use crate::error::{Error, Result};
use crate::intlin::{self, IMat};
use crate::maps::MapSpec;
use crate::measure::{birkhoff, BirkhoffParams, EmpiricalMeasure};
use crate::torus::TorusPoint;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const MERGE_DIST: f64 = 1e-8;
const RESIDUAL_TOL: f64 = 1e-10;

/// A periodic point with its orbit, Floquet multipliers and stable index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    pub period: usize,
    pub points: Vec<TorusPoint>,
    /// Floquet multiplier moduli of the period map, ascending
    pub multipliers: [f64; 3],
    /// number of multipliers with modulus < 1
    pub stable_index: usize,
    pub hyperbolic: bool,
    pub residual: f64,
}

impl PeriodicOrbit {
    pub fn representative(&self) -> TorusPoint {
        self.points[0]
    }
}

/// Multiplier moduli and stable index of the derivative product along an orbit.
pub fn classify(map: &MapSpec, points: &[TorusPoint]) -> (usize, [f64; 3], bool) {
    let mut d = Matrix3::identity();
    for p in points {
        d = map.derivative(p) * d;
    }
    let eig = d.complex_eigenvalues();
    let mut mods = [eig[0].norm(), eig[1].norm(), eig[2].norm()];
    mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let stable_index = mods.iter().filter(|&&m| m < 1.0 - 1e-8).count();
    let hyperbolic = mods.iter().all(|&m| !(1.0 - 1e-8..=1.0 + 1e-8).contains(&m));
    (stable_index, mods, hyperbolic)
}

/// Orbit record from a refined cycle. The residual is the largest one-step
/// closure error max_i d(f(x_i), x_{i+1}); iterating f^n naively would
/// amplify machine noise by k3^n and say nothing about the cycle quality.
fn build_orbit(map: &MapSpec, cycle: &[TorusPoint]) -> PeriodicOrbit {
    let n = cycle.len();
    let period = (1..n)
        .filter(|d| n % d == 0)
        .find(|&d| (0..n).all(|i| cycle[i].dist(&cycle[(i + d) % n]) <= MERGE_DIST))
        .unwrap_or(n);
    let points: Vec<TorusPoint> = cycle[..period].to_vec();
    let residual = (0..period)
        .map(|i| map.apply(&points[i]).dist(&points[(i + 1) % period]))
        .fold(0.0f64, f64::max);
    let (stable_index, multipliers, hyperbolic) = classify(map, &points);
    PeriodicOrbit {
        period,
        points,
        multipliers,
        stable_index,
        hyperbolic,
        residual,
    }
}

/// Multiple-shooting Newton on the n-cycle, wrap-aware.
///
/// Unknowns are all n orbit points at once, equations f(x_i) = x_{i+1}
/// (cyclic). Unlike Newton on f^n - id, whose Jacobian condition number
/// grows like k3^n, the cyclic system stays conditioned like the shadowing
/// constant, so long periods are refinable.
pub fn refine_cycle(
    map: &MapSpec,
    seed: &TorusPoint,
    n: usize,
    max_iter: usize,
) -> Result<Vec<TorusPoint>> {
    if max_iter == 0 {
        return Err(Error::Precondition("max_iter must be >= 1".into()));
    }
    // the whole solve runs on unwrapped lifts: wrapping into [0,1) between
    // iterations would inject absolute eps-sized noise into points lying
    // near a lattice point, which the degenerate (cubic) zero at the bump
    // centre cannot tolerate
    let reduce = |v: Vector3<f64>| v.map(|c| c - c.round());
    let mut pts: Vec<Vector3<f64>> = Vec::with_capacity(n);
    let mut y = seed.lift_near_origin();
    for _ in 0..n {
        pts.push(y);
        y = reduce(map.apply_lifted(&y));
    }
    let dim = 3 * n;
    let mut best: Option<(Vec<Vector3<f64>>, f64)> = None;
    let mut stalled = 0usize;
    for _ in 0..max_iter {
        let mut rhs = DVector::zeros(dim);
        let mut rn = 0.0f64;
        for i in 0..n {
            let e = reduce(map.apply_lifted(&pts[i]) - pts[(i + 1) % n]);
            rn = rn.max(e.norm());
            for k in 0..3 {
                rhs[3 * i + k] = -e[k];
            }
        }
        if best.as_ref().is_none_or(|(_, b)| rn < *b) {
            best = Some((pts.clone(), rn));
            stalled = 0;
        } else {
            // once the residual stops improving, Newton is rattling around
            // the floating-point noise floor; the divided noise-step grows
            // like 1/‖J⁻¹‖ and would kick the iterate away from the root
            stalled += 1;
            if stalled >= 10 {
                break;
            }
        }
        // block row i: Df(x_i) d_i - d_{i+1} = -e_i
        let mut jac = DMatrix::zeros(dim, dim);
        for i in 0..n {
            let d = map.derivative(&TorusPoint::from_vector(&pts[i]));
            let j = (i + 1) % n;
            for r in 0..3 {
                for c in 0..3 {
                    jac[(3 * i + r, 3 * i + c)] = d[(r, c)];
                }
                jac[(3 * i + r, 3 * j + r)] -= 1.0;
            }
        }
        // a singular solve means the Jacobian degenerated under the iterate
        // (center eigenvalue ~ t^2 underflowing); settle for the best point
        let Some(delta) = jac.lu().solve(&rhs) else {
            break;
        };
        let mut step = 0.0f64;
        for (i, p) in pts.iter_mut().enumerate() {
            let s = Vector3::new(delta[3 * i], delta[3 * i + 1], delta[3 * i + 2]);
            step = step.max(s.norm());
            *p = reduce(*p + s);
        }
        if step <= 1e-13 {
            return Ok(pts.iter().map(TorusPoint::from_vector).collect());
        }
    }
    match best {
        Some((pts, rn)) if rn <= 1e-12 => {
            Ok(pts.iter().map(TorusPoint::from_vector).collect())
        }
        Some((_, rn)) => Err(Error::NewtonDiverged {
            iterations: max_iter,
            residual: rn,
        }),
        None => unreachable!("max_iter >= 1 guarantees one residual evaluation"),
    }
}

/// First point of the refined n-cycle through the seed.
pub fn refine_periodic(
    map: &MapSpec,
    seed: &TorusPoint,
    n: usize,
    max_iter: usize,
) -> Result<TorusPoint> {
    Ok(refine_cycle(map, seed, n, max_iter)?[0])
}

/// All points x with f^n(x) = x.
///
/// Linear case: exact enumeration of the |det(A^n - I)| torus solutions of
/// (A^n - I) x ∈ Z^3 via integer diagonalization. Perturbed case: Newton
/// refinement of the linear solutions plus a seed grid inside the bump ball;
/// non-convergent seeds are dropped. One entry per periodic point, minimal
/// period recorded.
pub fn find_periodic(map: &MapSpec, n: usize) -> Result<Vec<PeriodicOrbit>> {
    if n == 0 || n > 6 {
        return Err(Error::Precondition(format!(
            "period {n} outside the supported range 1..=6"
        )));
    }
    let base = map.base();
    let m: IMat = std::array::from_fn(|i| std::array::from_fn(|j| base.matrix()[i][j] as i128));
    let mut pw = intlin::mat_pow(&m, n as u32);
    for (i, row) in pw.iter_mut().enumerate() {
        row[i] -= 1;
    }
    let (d, t) = intlin::smith_normal_form(&pw);
    let tf = Matrix3::from_fn(|r, c| t[r][c] as f64);
    let mut linear_pts = Vec::new();
    for j0 in 0..d[0].max(1) {
        for j1 in 0..d[1].max(1) {
            for j2 in 0..d[2].max(1) {
                let z = Vector3::new(
                    j0 as f64 / d[0].max(1) as f64,
                    j1 as f64 / d[1].max(1) as f64,
                    j2 as f64 / d[2].max(1) as f64,
                );
                linear_pts.push(TorusPoint::from_vector(&(tf * z)));
            }
        }
    }

    let mut cycles: Vec<Vec<TorusPoint>> = Vec::new();
    match map {
        MapSpec::Anosov(_) => {
            // polish the floating-point enumeration back to machine precision
            for p in linear_pts {
                if let Ok(c) = refine_cycle(map, &p, n, 8) {
                    cycles.push(c);
                }
            }
        }
        MapSpec::Mane(spec) => {
            let rho = spec.bump_radius;
            let mut seeds = linear_pts;
            if rho > 0.0 {
                let g = 32;
                let cell = 2.0 * rho / g as f64;
                for i in 0..g {
                    for j in 0..g {
                        for k in 0..g {
                            let p = TorusPoint::new(
                                -rho + cell * (i as f64 + 0.5),
                                -rho + cell * (j as f64 + 0.5),
                                -rho + cell * (k as f64 + 0.5),
                            );
                            if p.lift_near_origin().norm() < rho {
                                seeds.push(p);
                            }
                        }
                    }
                }
            }
            // the cubic degeneracy at the non-hyperbolic point slows Newton
            // to a linear rate (step ratio 2/3), hence the generous budget
            let refined: Vec<Option<Vec<TorusPoint>>> = seeds
                .par_iter()
                .map(|s| refine_cycle(map, s, n, 120).ok())
                .collect();
            cycles.extend(refined.into_iter().flatten());
        }
    }

    // deterministic dedup: sort by first point, then merge at MERGE_DIST
    cycles.sort_by(|a, b| a[0].coords().partial_cmp(&b[0].coords()).unwrap());
    let mut merged: Vec<Vec<TorusPoint>> = Vec::new();
    for c in cycles {
        if !merged.iter().any(|q| q[0].dist(&c[0]) < MERGE_DIST) {
            merged.push(c);
        }
    }
    let orbits: Vec<PeriodicOrbit> = merged
        .iter()
        .map(|c| build_orbit(map, c))
        .filter(|o| o.residual <= RESIDUAL_TOL)
        .collect();
    Ok(orbits)
}

/// A finite orbit segment whose endpoint nearly returns and along which the
/// cu co-norm products contract at rate lambda.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasiHyperbolicSegment {
    pub start: TorusPoint,
    pub length: usize,
    pub lambda: f64,
    pub endpoint_gap: f64,
}

/// Scan the orbit of x for pairs of hyperbolic times at most `max_length`
/// apart whose orbit points rho-return, yielding quasi-hyperbolic segments.
///
/// The gap bound keeps the candidate periods short enough for the cyclic
/// Newton refinement downstream; near-returns at every length scale occur
/// with per-step probability about the volume of the rho-ball.
pub fn quasi_hyperbolic_recurrence(
    map: &MapSpec,
    x: &TorusPoint,
    lambda: f64,
    rho: f64,
    orbit_length: usize,
    max_length: usize,
    max_segments: usize,
) -> Result<Vec<QuasiHyperbolicSegment>> {
    if !(0.0..1.0).contains(&lambda) || lambda == 0.0 {
        return Err(Error::Precondition(format!("lambda = {lambda} not in (0,1)")));
    }
    if rho > 0.05 {
        return Err(Error::Precondition(format!("rho = {rho} above the 0.05 cap")));
    }
    if max_length == 0 {
        return Err(Error::Precondition("max_length must be >= 1".into()));
    }
    let b = -lambda.ln();
    let mut stream = ContractionStream::new(map, x, 200)?;
    // sliding window of recent hyperbolic-time orbit points
    let mut window: std::collections::VecDeque<(usize, TorusPoint)> = Default::default();
    let mut s = 0.0f64;
    let mut prefix_min = 0.0f64;
    let mut segments = Vec::new();
    for n in 1..=orbit_length {
        s += stream.step()? + b;
        let next = stream.position();
        let is_ht = s <= prefix_min;
        prefix_min = prefix_min.min(s);
        if is_ht {
            while window.front().is_some_and(|&(m, _)| m + max_length < n) {
                window.pop_front();
            }
            for &(m, ref pm) in &window {
                let gap = pm.dist(&next);
                if gap <= rho {
                    segments.push(QuasiHyperbolicSegment {
                        start: *pm,
                        length: n - m,
                        lambda,
                        endpoint_gap: gap,
                    });
                    if segments.len() >= max_segments {
                        return Ok(segments);
                    }
                }
            }
            window.push_back((n, next));
        }
    }
    Ok(segments)
}

/// Outcome of shadowing a quasi-hyperbolic segment by a genuine periodic orbit.
///
/// Distances are measured in the adapted metric (eigenbasis coordinates of
/// the linear base), where the closed-form shadowing constant
/// 1/(1-k1) + 1/(k2-1) lives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowResult {
    pub orbit: PeriodicOrbit,
    /// max_i d(f^i(start), f^i(p)) over the segment, adapted metric
    pub shadow_distance: f64,
    /// endpoint gap d(f^n(start), start), adapted metric
    pub adapted_gap: f64,
    /// shadow_distance / adapted_gap
    pub l_shadow: f64,
}

/// Closed-form shadowing constant of the linear base map.
pub fn shadowing_constant(map: &MapSpec) -> f64 {
    let v = map.base().eigen().values;
    1.0 / (1.0 - v[0]) + 1.0 / (v[1] - 1.0)
}

/// Cyclic Newton refinement seeded along the segment orbit.
pub fn shadow_to_periodic(
    map: &MapSpec,
    segment: &QuasiHyperbolicSegment,
) -> Result<ShadowResult> {
    let n = segment.length;
    if n == 0 {
        return Err(Error::Precondition("segment length must be >= 1".into()));
    }
    let vinv = *map.base().basis_inv();
    let adist =
        |a: &TorusPoint, b: &TorusPoint| -> f64 { (vinv * a.displacement_from(b)).norm() };
    let cycle = refine_cycle(map, &segment.start, n, 60)?;
    let orbit = build_orbit(map, &cycle);
    let adapted_gap = adist(&map.iterate(&segment.start, n), &segment.start);
    // pseudo-orbit against the refined cycle points, not naive iterates of
    // cycle[0], which would drift off the orbit at rate k3 per step
    let mut a = segment.start;
    let mut dist = adist(&a, &cycle[0]);
    for q in cycle.iter().cycle().skip(1).take(n) {
        a = map.apply(&a);
        dist = dist.max(adist(&a, q));
    }
    let l_shadow = if adapted_gap > 0.0 {
        dist / adapted_gap
    } else {
        0.0
    };
    Ok(ShadowResult {
        orbit,
        shadow_distance: dist,
        adapted_gap,
        l_shadow,
    })
}

/// Sample of a local unstable 2-disk at a hyperbolic saddle of stable index 1.
///
/// Seeds a small anisotropic ellipse in the expanding eigenplane of the
/// period map, pushes it forward and keeps points landing in the r-ball
/// around the saddle.
pub fn unstable_disk(
    map: &MapSpec,
    saddle: &PeriodicOrbit,
    r: f64,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<TorusPoint>, f64)> {
    if !saddle.hyperbolic || saddle.stable_index != 1 {
        return Err(Error::Precondition(
            "unstable disk needs a hyperbolic saddle with stable index 1".into(),
        ));
    }
    if r > 0.05 {
        return Err(Error::Precondition(format!("disk radius {r} above the 0.05 cap")));
    }
    let p = saddle.representative();
    if m == 1 || r == 0.0 {
        return Ok((vec![p], 0.0));
    }
    let period = saddle.period;
    let d = map.derivative_power(&p, period);
    // expanding eigen-directions of the period map
    let eig = d.complex_eigenvalues();
    let mut lam: Vec<f64> = (0..3).map(|i| eig[i].norm()).collect();
    lam.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (l2, l3) = (lam[1], lam[2]);
    let dir = |l: f64| -> Vector3<f64> {
        let b = d - Matrix3::identity() * l;
        let rows: [Vector3<f64>; 3] =
            std::array::from_fn(|i| Vector3::new(b[(i, 0)], b[(i, 1)], b[(i, 2)]));
        let mut best = Vector3::zeros();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = rows[i].cross(&rows[j]);
            if c.norm() > best.norm() {
                best = c;
            }
        }
        best.normalize()
    };
    let e2 = dir(l2);
    let e3 = dir(l3);
    let plane_normal = e2.cross(&e3).normalize();

    // push the seed ellipse through k iterations of the period map so it
    // reaches the target radius in both expanding directions
    let k = ((r / 1e-6).ln() / l2.ln()).ceil().min(40.0).max(1.0) as usize;
    let r2 = (r / l2.powi(k as i32)).min(r);
    let r3 = (r / l3.powi(k as i32)).min(r);
    let mut out = Vec::with_capacity(m);
    let mut residual = 0.0f64;
    let budget = 400 * m;
    let mut attempts = 0;
    while out.len() < m && attempts < budget {
        attempts += 1;
        let (a, b) = loop {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            if a * a + b * b <= 1.0 {
                break (a, b);
            }
        };
        let z = TorusPoint::from_vector(&(p.to_vector() + e2 * (a * r2) + e3 * (b * r3)));
        let mut y = z;
        for _ in 0..(k * period) {
            y = map.apply(&y);
        }
        if y.dist(&p) <= r {
            residual = residual.max(y.displacement_from(&p).dot(&plane_normal).abs());
            out.push(y);
        }
    }
    if out.len() < m {
        return Err(Error::TrimStarvation(r));
    }
    Ok((out, residual))
}

/// A skeleton candidate: one saddle per empirically related group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonCandidate {
    pub representatives: Vec<PeriodicOrbit>,
    /// pairwise empirical relation over the input pool
    pub related: Vec<Vec<bool>>,
    /// product of representative periods
    pub period_product: usize,
    pub empty: bool,
}

pub struct SkeletonParams {
    pub disk_radius: f64,
    pub disk_samples: usize,
    pub seeds_per_saddle: usize,
    pub birkhoff: BirkhoffParams,
    pub epsilon: f64,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            disk_radius: 0.02,
            disk_samples: 64,
            seeds_per_saddle: 8,
            birkhoff: BirkhoffParams {
                n_transient: 1000,
                n_avg: 100_000,
            },
            epsilon: 0.05,
        }
    }
}

/// Group saddles of stable index 1 by closeness of the empirical measures
/// generated from their unstable disks; return one representative per group.
pub fn skeleton_candidates(
    map: &MapSpec,
    pool: &[PeriodicOrbit],
    params: &SkeletonParams,
    rng: &mut ChaCha8Rng,
) -> Result<SkeletonCandidate> {
    let saddles: Vec<&PeriodicOrbit> = pool
        .iter()
        .filter(|o| o.hyperbolic && o.stable_index == 1)
        .collect();
    if saddles.is_empty() {
        return Ok(SkeletonCandidate {
            representatives: Vec::new(),
            related: Vec::new(),
            period_product: 0,
            empty: true,
        });
    }
    // one fingerprint per saddle: average of empirical measures from random
    // disk seeds
    let mut fingerprints: Vec<EmpiricalMeasure> = Vec::with_capacity(saddles.len());
    for s in &saddles {
        let (disk, _) = unstable_disk(map, s, params.disk_radius, params.disk_samples, rng)?;
        let idx: Vec<usize> = (0..params.seeds_per_saddle)
            .map(|_| rng.gen_range(0..disk.len()))
            .collect();
        let measures: Vec<EmpiricalMeasure> = idx
            .par_iter()
            .map(|&i| birkhoff(map, &disk[i], &params.birkhoff))
            .collect();
        fingerprints.push(EmpiricalMeasure::mean(&measures));
    }
    let n = saddles.len();
    let mut related = vec![vec![false; n]; n];
    for i in 0..n {
        related[i][i] = true;
        for j in (i + 1)..n {
            let close = fingerprints[i].sup_distance(&fingerprints[j]) <= params.epsilon;
            related[i][j] = close;
            related[j][i] = close;
        }
    }
    // union-find over the relation
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
            if related[i][j] {
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
    let mut representatives: Vec<PeriodicOrbit> = groups
        .values()
        .map(|members| {
            // lowest period, then lexicographically smallest representative
            let best = members
                .iter()
                .min_by(|&&a, &&b| {
                    (saddles[a].period, saddles[a].representative().coords())
                        .partial_cmp(&(saddles[b].period, saddles[b].representative().coords()))
                        .unwrap()
                })
                .unwrap();
            saddles[*best].clone()
        })
        .collect();
    representatives.sort_by(|a, b| {
        (a.period, a.representative().coords())
            .partial_cmp(&(b.period, b.representative().coords()))
            .unwrap()
    });
    let period_product = representatives.iter().map(|o| o.period).product();
    Ok(SkeletonCandidate {
        representatives,
        related,
        period_product,
        empty: false,
    })
}
