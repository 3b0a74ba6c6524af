//! The linear Anosov automorphism on T^3 and its Mañé-type local perturbation.
//!
//! Both maps carry exact pointwise derivatives. The perturbed map is
//! f0 = A ∘ h where h displaces points along the center eigendirection inside
//! a small ball around the origin, calibrated so the center derivative is >= 1
//! everywhere with equality exactly at the origin.

use crate::error::{Error, Result};
use crate::intlin::{self, IMat};
use crate::torus::TorusPoint;
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Eigendata of an integer Anosov matrix with three simple positive real
/// eigenvalues 0 < k1 < 1 < k2 < k3.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenData {
    pub values: [f64; 3],
    /// unit eigenvectors, columns ordered to match `values`
    pub vectors: [Vector3<f64>; 3],
}

/// Evaluate t^3 - c2 t^2 + c1 t - c0 and its derivative.
fn cubic_eval(c2: f64, c1: f64, c0: f64, t: f64) -> (f64, f64) {
    let p = ((t - c2) * t + c1) * t - c0;
    let dp = (3.0 * t - 2.0 * c2) * t + c1;
    (p, dp)
}

fn polish_root(c2: f64, c1: f64, c0: f64, mut lo: f64, mut hi: f64) -> f64 {
    // bisection to tight bracket, then Newton to machine precision
    let (plo, _) = cubic_eval(c2, c1, c0, lo);
    let sign_lo = plo.signum();
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (pm, _) = cubic_eval(c2, c1, c0, mid);
        if pm.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..8 {
        let (p, dp) = cubic_eval(c2, c1, c0, t);
        let step = p / dp;
        t -= step;
        if step.abs() <= 1e-17 * t.abs() {
            break;
        }
    }
    t
}

/// Eigenvalues and unit eigenvectors of an integer 3x3 matrix, rejecting any
/// matrix that is not a valid hyperbolic automorphism with three simple
/// positive real eigenvalues straddling 1.
pub fn eigen_data(matrix: &[[i64; 3]; 3]) -> Result<EigenData> {
    let m: IMat = std::array::from_fn(|i| std::array::from_fn(|j| matrix[i][j] as i128));
    let (c2, c1, c0) = intlin::char_poly(&m);
    if intlin::det(&m).abs() != 1 {
        return Err(Error::InvalidAnosov(format!(
            "|det| = {} but a torus automorphism needs |det| = 1",
            intlin::det(&m)
        )));
    }
    let disc = intlin::cubic_discriminant(-c2, c1, -c0);
    if disc == 0 {
        return Err(Error::InvalidAnosov(
            "characteristic polynomial has a repeated root".into(),
        ));
    }
    if disc < 0 {
        return Err(Error::InvalidAnosov(
            "characteristic polynomial has complex roots".into(),
        ));
    }
    // with three real roots, all positive iff all coefficients alternate in sign
    if c2 <= 0 || c1 <= 0 || c0 <= 0 {
        return Err(Error::InvalidAnosov(
            "characteristic polynomial has a non-positive root".into(),
        ));
    }
    // p(1) = 0 means an eigenvalue on the unit circle; p(1) < 0 means two
    // roots below 1, which is not the splitting form required here
    let p1 = 1 - c2 + c1 - c0;
    if p1 == 0 {
        return Err(Error::InvalidAnosov("eigenvalue 1 on the unit circle".into()));
    }
    if p1 < 0 {
        return Err(Error::InvalidAnosov(
            "two eigenvalues below 1 (need exactly one contracting direction)".into(),
        ));
    }

    let (c2f, c1f, c0f) = (c2 as f64, c1 as f64, c0 as f64);
    // critical points of the cubic separate the three roots
    let disc_q = (4 * c2 * c2 - 12 * c1) as f64;
    let tm = (2.0 * c2f - disc_q.sqrt()) / 6.0;
    let tp = (2.0 * c2f + disc_q.sqrt()) / 6.0;
    let hi = 1.0 + c2f.abs().max(c1f.abs()).max(c0f.abs());
    let k1 = polish_root(c2f, c1f, c0f, 0.0, tm);
    let k2 = polish_root(c2f, c1f, c0f, tm, tp);
    let k3 = polish_root(c2f, c1f, c0f, tp, hi);
    let values = [k1, k2, k3];
    for k in values {
        if (k - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidAnosov("eigenvalue within 1e-12 of 1".into()));
        }
    }

    let a = Matrix3::from_fn(|i, j| matrix[i][j] as f64);
    let mut vectors = [Vector3::zeros(); 3];
    for (idx, &k) in values.iter().enumerate() {
        let b = a - Matrix3::identity() * k;
        // kernel direction via the largest cross product of two rows
        let rows: [Vector3<f64>; 3] =
            std::array::from_fn(|i| Vector3::new(b[(i, 0)], b[(i, 1)], b[(i, 2)]));
        let mut best = Vector3::zeros();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = rows[i].cross(&rows[j]);
            if c.norm() > best.norm() {
                best = c;
            }
        }
        let mut v = best.normalize();
        // refine by one inverse-iteration style correction and fix the sign
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        let residual = (a * v - v * k).norm();
        if residual > 1e-12 {
            return Err(Error::InvalidAnosov(format!(
                "eigenvector residual {residual:.3e} exceeds 1e-12 for eigenvalue {k}"
            )));
        }
        vectors[idx] = v;
    }
    Ok(EigenData { values, vectors })
}

/// A linear Anosov automorphism of T^3 with splitting dimensions (1,1,1).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 3]; 3]", into = "[[i64; 3]; 3]")]
pub struct AnosovSpec {
    matrix: [[i64; 3]; 3],
    eigen: EigenData,
    matrix_f: Matrix3<f64>,
    inverse_f: Matrix3<f64>,
    /// columns are the unit eigenvectors v1, v2, v3
    basis: Matrix3<f64>,
    basis_inv: Matrix3<f64>,
}

impl TryFrom<[[i64; 3]; 3]> for AnosovSpec {
    type Error = Error;
    fn try_from(matrix: [[i64; 3]; 3]) -> Result<Self> {
        Self::new(matrix)
    }
}

impl From<AnosovSpec> for [[i64; 3]; 3] {
    fn from(spec: AnosovSpec) -> Self {
        spec.matrix
    }
}

impl AnosovSpec {
    pub fn new(matrix: [[i64; 3]; 3]) -> Result<Self> {
        let eigen = eigen_data(&matrix)?;
        let mut spec = Self {
            matrix,
            eigen,
            matrix_f: Matrix3::zeros(),
            inverse_f: Matrix3::zeros(),
            basis: Matrix3::zeros(),
            basis_inv: Matrix3::zeros(),
        };
        spec.rebuild_cache();
        Ok(spec)
    }

    /// The default Anosov base: companion matrix of t^3 - 5 t^2 + 6 t - 1.
    pub fn default_example() -> Self {
        Self::new([[0, 0, 1], [1, 0, -6], [0, 1, 5]]).expect("default matrix is valid")
    }

    pub(crate) fn rebuild_cache(&mut self) {
        let m: IMat =
            std::array::from_fn(|i| std::array::from_fn(|j| self.matrix[i][j] as i128));
        let d = intlin::det(&m);
        let adj = intlin::adjugate(&m);
        // |det| = 1, so the inverse is integer: adj / det
        self.matrix_f = Matrix3::from_fn(|i, j| self.matrix[i][j] as f64);
        self.inverse_f = Matrix3::from_fn(|i, j| (adj[i][j] / d) as f64);
        self.basis = Matrix3::from_columns(&self.eigen.vectors);
        self.basis_inv = self.basis.try_inverse().expect("eigenbasis is invertible");
    }

    pub fn matrix(&self) -> &[[i64; 3]; 3] {
        &self.matrix
    }

    pub fn matrix_f(&self) -> &Matrix3<f64> {
        &self.matrix_f
    }

    pub fn inverse_f(&self) -> &Matrix3<f64> {
        &self.inverse_f
    }

    pub fn eigen(&self) -> &EigenData {
        &self.eigen
    }

    /// Change-of-basis matrix with eigenvector columns.
    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    pub fn basis_inv(&self) -> &Matrix3<f64> {
        &self.basis_inv
    }

    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        TorusPoint::from_vector(&(self.matrix_f * x.to_vector()))
    }

    pub fn inverse_apply(&self, y: &TorusPoint) -> TorusPoint {
        TorusPoint::from_vector(&(self.inverse_f * y.to_vector()))
    }

    /// Half the minimal torus distance between distinct points of period <= 2.
    /// Upper bound for admissible bump radii of the perturbed map.
    pub fn low_period_separation(&self) -> f64 {
        let m: IMat =
            std::array::from_fn(|i| std::array::from_fn(|j| self.matrix[i][j] as i128));
        let mut pts: Vec<TorusPoint> = Vec::new();
        for n in 1..=2u32 {
            let pw = intlin::mat_pow(&m, n);
            let mut mm = pw;
            for (i, row) in mm.iter_mut().enumerate() {
                row[i] -= 1;
            }
            let (d, t) = intlin::smith_normal_form(&mm);
            for j0 in 0..d[0].max(1) {
                for j1 in 0..d[1].max(1) {
                    for j2 in 0..d[2].max(1) {
                        let z = Vector3::new(
                            j0 as f64 / d[0].max(1) as f64,
                            j1 as f64 / d[1].max(1) as f64,
                            j2 as f64 / d[2].max(1) as f64,
                        );
                        let tf = Matrix3::from_fn(|r, c| t[r][c] as f64);
                        let p = TorusPoint::from_vector(&(tf * z));
                        if !pts.iter().any(|q| q.dist(&p) < 1e-9) {
                            pts.push(p);
                        }
                    }
                }
            }
        }
        let mut dmin = f64::INFINITY;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                dmin = dmin.min(p.dist(q));
            }
        }
        0.5 * dmin
    }
}

/// Mañé-type derived-from-Anosov perturbation: f0 = A ∘ h with
/// h(x) = x - delta * beta(r/rho) * sin(2 pi b) / (2 pi) * v2,
/// where r = d(x, p), b = <x - p, v2>, beta(s) = (1 - s^2)^2 on [0, 1].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManeDASpec {
    pub base: AnosovSpec,
    /// support radius of the bump; 0 degenerates to the linear map
    pub bump_radius: f64,
    /// perturbation strength; 1 - 1/k2 makes the center derivative exactly 1 at p
    pub strength: f64,
}

impl ManeDASpec {
    pub fn new(base: AnosovSpec, bump_radius: f64) -> Result<Self> {
        let strength = 1.0 - 1.0 / base.eigen().values[1];
        Self::with_strength(base, bump_radius, strength)
    }

    pub fn with_strength(base: AnosovSpec, bump_radius: f64, strength: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&bump_radius) || !bump_radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bump_radius {bump_radius} out of range"
            )));
        }
        let cap = base.low_period_separation();
        if bump_radius >= cap {
            return Err(Error::InvalidParameter(format!(
                "bump_radius {bump_radius} >= {cap:.6}, half the minimal distance \
                 between low-period points"
            )));
        }
        if !strength.is_finite() || strength < 0.0 || strength >= 2.0 {
            return Err(Error::InvalidParameter(format!("strength {strength} out of range")));
        }
        Ok(Self {
            base,
            bump_radius,
            strength,
        })
    }

    /// The perturbed fixed point (the origin).
    pub fn fixed_point(&self) -> TorusPoint {
        TorusPoint::origin()
    }

    fn v2(&self) -> Vector3<f64> {
        self.base.eigen().vectors[1]
    }

    /// The displacement map h (identity outside the bump ball).
    pub fn pre_shear(&self, x: &TorusPoint) -> Vector3<f64> {
        self.pre_shear_lifted(&x.lift_near_origin())
    }

    /// h on an already-lifted representative near the lattice.
    pub fn pre_shear_lifted(&self, z: &Vector3<f64>) -> Vector3<f64> {
        let z = *z;
        let r = z.norm();
        if r >= self.bump_radius || self.bump_radius == 0.0 {
            return z;
        }
        let s = r / self.bump_radius;
        let beta = (1.0 - s * s).powi(2);
        let b = z.dot(&self.v2());
        let g = beta * (TAU * b).sin() / TAU;
        z - self.v2() * (self.strength * g)
    }

    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        let h = self.pre_shear(x);
        TorusPoint::from_vector(&(self.base.matrix_f() * h))
    }

    /// Exact Jacobian of h at x.
    pub fn pre_shear_derivative(&self, x: &TorusPoint) -> Matrix3<f64> {
        let z = x.lift_near_origin();
        let r = z.norm();
        let mut d = Matrix3::identity();
        if r >= self.bump_radius || self.bump_radius == 0.0 {
            return d;
        }
        let v2 = self.v2();
        let s = r / self.bump_radius;
        let beta = (1.0 - s * s).powi(2);
        let beta_p = -4.0 * s * (1.0 - s * s);
        let b = z.dot(&v2);
        let mut grad = v2 * (beta * (TAU * b).cos());
        if r > 0.0 {
            grad += z * (beta_p / self.bump_radius * (TAU * b).sin() / TAU / r);
        }
        d -= v2 * grad.transpose() * self.strength;
        d
    }

    pub fn derivative(&self, x: &TorusPoint) -> Matrix3<f64> {
        self.base.matrix_f() * self.pre_shear_derivative(x)
    }

    /// Newton solve of f0(x) = y on the lift, seeded by the linear inverse.
    pub fn inverse_apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        // f0 = A ∘ h, so x solves h(x) = A^{-1} y
        let target = self.base.inverse_apply(y);
        if self.bump_radius == 0.0 {
            return Ok(target);
        }
        // h displaces only inside the bump ball, by at most delta/(2 pi)
        let mut x = target;
        for iter in 0..60 {
            let h = self.pre_shear(&x);
            let res = TorusPoint::from_vector(&h).displacement_from(&target);
            if res.norm() <= 1e-14 {
                return Ok(x);
            }
            let j = self.pre_shear_derivative(&x);
            let step = j
                .lu()
                .solve(&res)
                .ok_or(Error::NewtonDiverged {
                    iterations: iter,
                    residual: res.norm(),
                })?;
            x = TorusPoint::from_vector(&(x.to_vector() - step));
        }
        let res = TorusPoint::from_vector(&self.pre_shear(&x))
            .displacement_from(&target)
            .norm();
        if res <= 1e-12 {
            Ok(x)
        } else {
            Err(Error::NewtonDiverged {
                iterations: 60,
                residual: res,
            })
        }
    }
}

/// Report of the grid validation of a Mañé spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManeValidation {
    pub grid_n: usize,
    pub min_center_derivative: f64,
    pub argmin: [f64; 3],
    /// distance of the argmin from p, in units of grid cells
    pub argmin_cells_from_p: f64,
    pub min_abs_jacobian_det: f64,
    pub passed: bool,
    /// grid points violating the center-derivative lower bound
    pub violations: Vec<[f64; 3]>,
}

/// Grid check of the defining inequalities of the perturbation: center
/// derivative >= 1 - 1e-9 everywhere, equal to 1 (within 1e-6) only near p,
/// Jacobian determinant bounded away from zero.
pub fn validate_mane_spec(spec: &ManeDASpec, grid_n: usize) -> Result<ManeValidation> {
    if grid_n < 64 {
        return Err(Error::Precondition(format!(
            "grid_n = {grid_n}, need at least 64 cells per axis"
        )));
    }
    let rho = spec.bump_radius;
    let v2 = spec.base.eigen().vectors[1];
    let k2 = spec.base.eigen().values[1];
    if rho == 0.0 {
        // zero-size bump degenerates to the linear map
        return Ok(ManeValidation {
            grid_n,
            min_center_derivative: k2,
            argmin: [0.0; 3],
            argmin_cells_from_p: 0.0,
            min_abs_jacobian_det: 1.0,
            passed: true,
            violations: Vec::new(),
        });
    }
    let cell = 2.0 * rho / grid_n as f64;
    let mut min_center = f64::INFINITY;
    let mut argmin = [0.0f64; 3];
    let mut min_det = f64::INFINITY;
    let mut violations = Vec::new();
    let mut passed = true;
    for i in 0..grid_n {
        for j in 0..grid_n {
            for k in 0..grid_n {
                let x = TorusPoint::new(
                    -rho + cell * (i as f64 + 0.5),
                    -rho + cell * (j as f64 + 0.5),
                    -rho + cell * (k as f64 + 0.5),
                );
                let z = x.lift_near_origin();
                let r = z.norm();
                if r >= rho {
                    continue;
                }
                let d = spec.derivative(&x);
                let center = (d * v2).norm();
                let det = d.determinant().abs();
                if center < min_center {
                    min_center = center;
                    argmin = x.coords();
                }
                min_det = min_det.min(det);
                if center < 1.0 - 1e-9 || det < 1e-9 {
                    passed = false;
                    if violations.len() < 64 {
                        violations.push(x.coords());
                    }
                }
                // equality with 1 must only happen close to p
                if (center - 1.0).abs() <= 1e-6 && r > 0.1 * rho {
                    passed = false;
                    if violations.len() < 64 {
                        violations.push(x.coords());
                    }
                }
            }
        }
    }
    // the exact minimum sits at p itself; the grid argmin must land next to it
    let argmin_cells = TorusPoint::new(argmin[0], argmin[1], argmin[2])
        .lift_near_origin()
        .norm()
        / cell;
    if argmin_cells > 2.0 {
        passed = false;
    }
    Ok(ManeValidation {
        grid_n,
        min_center_derivative: min_center,
        argmin,
        argmin_cells_from_p: argmin_cells,
        min_abs_jacobian_det: min_det,
        passed,
        violations,
    })
}

/// Tagged dispatch over the two map variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum MapSpec {
    Anosov(AnosovSpec),
    Mane(ManeDASpec),
}

impl MapSpec {
    pub fn base(&self) -> &AnosovSpec {
        match self {
            MapSpec::Anosov(a) => a,
            MapSpec::Mane(m) => &m.base,
        }
    }

    pub fn apply(&self, x: &TorusPoint) -> TorusPoint {
        match self {
            MapSpec::Anosov(a) => a.apply(x),
            MapSpec::Mane(m) => m.apply(x),
        }
    }

    pub fn derivative(&self, x: &TorusPoint) -> Matrix3<f64> {
        match self {
            MapSpec::Anosov(a) => *a.matrix_f(),
            MapSpec::Mane(m) => m.derivative(x),
        }
    }

    /// Image of a lifted representative, unwrapped.
    ///
    /// Wrapping into [0,1) stores points near a lattice point with absolute
    /// (not relative) rounding; Newton refinement around a degenerate zero
    /// needs the relative precision of the unwrapped lift, so this variant
    /// never touches TorusPoint.
    pub fn apply_lifted(&self, w: &Vector3<f64>) -> Vector3<f64> {
        let z = w.map(|c| c - c.round());
        match self {
            MapSpec::Anosov(a) => a.matrix_f() * z,
            MapSpec::Mane(m) => m.base.matrix_f() * m.pre_shear_lifted(&z),
        }
    }

    pub fn inverse_apply(&self, y: &TorusPoint) -> Result<TorusPoint> {
        match self {
            MapSpec::Anosov(a) => Ok(a.inverse_apply(y)),
            MapSpec::Mane(m) => m.inverse_apply(y),
        }
    }

    pub fn iterate(&self, x: &TorusPoint, n: usize) -> TorusPoint {
        let mut y = *x;
        for _ in 0..n {
            y = self.apply(&y);
        }
        y
    }

    /// Derivative of f^n at x (chain-rule product).
    pub fn derivative_power(&self, x: &TorusPoint, n: usize) -> Matrix3<f64> {
        let mut y = *x;
        let mut d = Matrix3::identity();
        for _ in 0..n {
            d = self.derivative(&y) * d;
            y = self.apply(&y);
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // roots of t^3 - 5 t^2 + 6 t - 1 by bisection, independent of eigen_data
    fn bisect_root(mut lo: f64, mut hi: f64) -> f64 {
        let p = |t: f64| ((t - 5.0) * t + 6.0) * t - 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(lo) * p(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn default_eigenvalues_match_bisection() {
        let spec = AnosovSpec::default_example();
        let k = spec.eigen().values;
        let oracle = [bisect_root(0.1, 0.3), bisect_root(1.0, 2.0), bisect_root(3.0, 4.0)];
        for i in 0..3 {
            assert!((k[i] - oracle[i]).abs() < 1e-12, "k{i}: {} vs {}", k[i], oracle[i]);
        }
        // volume preservation: log-sum vanishes
        let s: f64 = k.iter().map(|v| v.ln()).sum();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn eigenvector_residuals() {
        let spec = AnosovSpec::default_example();
        let a = spec.matrix_f();
        for i in 0..3 {
            let v = spec.eigen().vectors[i];
            let r = (a * v - v * spec.eigen().values[i]).norm();
            assert!(r < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_matrices() {
        // determinant 2
        assert!(AnosovSpec::new([[2, 0, 0], [0, 1, 0], [0, 0, 1]]).is_err());
        // eigenvalue 1 (partially hyperbolic along a fixed line)
        assert!(AnosovSpec::new([[2, 1, 0], [1, 1, 0], [0, 0, 1]]).is_err());
        // complex pair (rotation block)
        assert!(AnosovSpec::new([[0, -1, 0], [1, 0, 0], [0, 0, 1]]).is_err());
        // all roots negative (sign-flipped companion)
        assert!(AnosovSpec::new([[0, 0, -1], [-1, 0, 6], [0, -1, -5]]).is_err());
    }

    #[test]
    fn low_period_separation_is_3_over_26() {
        let spec = AnosovSpec::default_example();
        assert!((spec.low_period_separation() - 3.0 / 26.0).abs() < 1e-9);
    }

    #[test]
    fn mane_parameter_validation() {
        let base = AnosovSpec::default_example;
        assert!(ManeDASpec::new(base(), 0.05).is_ok());
        assert!(ManeDASpec::new(base(), 0.2).is_err()); // above the cap
        assert!(ManeDASpec::with_strength(base(), 0.05, 2.0).is_err());
        assert!(ManeDASpec::with_strength(base(), 0.05, -0.1).is_err());
    }

    #[test]
    fn mane_fixed_point_and_center_multiplier() {
        let spec = ManeDASpec::new(AnosovSpec::default_example(), 0.05).unwrap();
        let p = spec.fixed_point();
        assert!(spec.apply(&p).dist(&p) < 1e-15);
        // at p the center derivative is exactly 1: Df(p) v2 = v2
        let v2 = spec.base.eigen().vectors[1];
        assert!((spec.derivative(&p) * v2 - v2).norm() < 1e-12);
    }

    #[test]
    fn mane_derivative_matches_finite_differences() {
        let spec = ManeDASpec::new(AnosovSpec::default_example(), 0.05).unwrap();
        let pts = [
            TorusPoint::new(0.01, 0.005, -0.02),
            TorusPoint::new(-0.03, 0.01, 0.012),
            TorusPoint::new(0.3, 0.7, 0.1), // outside the bump
        ];
        let h = 1e-6;
        for x in pts {
            let d = spec.derivative(&x);
            for j in 0..3 {
                let mut cp = x.coords();
                let mut cm = x.coords();
                cp[j] += h;
                cm[j] -= h;
                let fp = spec.apply(&TorusPoint::new(cp[0], cp[1], cp[2]));
                let fm = spec.apply(&TorusPoint::new(cm[0], cm[1], cm[2]));
                let col = fp.displacement_from(&fm) / (2.0 * h);
                for i in 0..3 {
                    assert!(
                        (d[(i, j)] - col[i]).abs() < 1e-6,
                        "entry ({i},{j}) analytic {} fd {}",
                        d[(i, j)],
                        col[i]
                    );
                }
            }
        }
    }

    #[test]
    fn mane_inverse_roundtrip() {
        let spec = ManeDASpec::new(AnosovSpec::default_example(), 0.05).unwrap();
        let pts = [
            TorusPoint::new(0.02, 0.01, 0.995),
            TorusPoint::new(0.4, 0.6, 0.25),
            TorusPoint::new(0.99, 0.03, 0.01),
        ];
        for y in pts {
            let x = spec.inverse_apply(&y).unwrap();
            assert!(spec.apply(&x).dist(&y) < 1e-12);
        }
    }

    #[test]
    fn validation_rejects_oversized_strength() {
        let spec =
            ManeDASpec::with_strength(AnosovSpec::default_example(), 0.05, 1.5).unwrap();
        let report = validate_mane_spec(&spec, 64).unwrap();
        assert!(!report.passed);
        assert!(report.min_center_derivative < 1.0 - 1e-9);
    }

    #[test]
    fn spec_serde_roundtrip() {
        let spec = AnosovSpec::default_example();
        let json = serde_json::to_string(&spec).unwrap();
        let back: AnosovSpec = serde_json::from_str(&json).unwrap();
        let x = TorusPoint::new(0.3, 0.4, 0.5);
        assert!(back.apply(&x).dist(&spec.apply(&x)) < 1e-15);
        assert_eq!(back.matrix(), spec.matrix());
    }
}
