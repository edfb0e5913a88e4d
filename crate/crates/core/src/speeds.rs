//! Effective soliton speeds from the collision linear system.
//!
//! In a stationary background with per-size densities `ρ_i`, a tagged
//! size-`i` soliton moves at bare speed `i` between collisions and is
//! displaced `±2(i∧j)` per overtaking collision with a size-`j` soliton.
//! Balancing displacements gives the fixed point
//! `v_i = i + Σ_j 2(i∧j) ρ_j (v_i − v_j)`, i.e. the linear system
//! `M v = v^bare` with `M_ij = 2(i∧j)ρ_j` off the diagonal and
//! `M_ii = 1 − Σ_{j≠i} 2(i∧j)ρ_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-size soliton densities `ρ_1 … ρ_I`; admissible when `Σ i·ρ_i < 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DensityVector {
    rho: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DensityVector {
    type Error = Error;
    fn try_from(rho: Vec<f64>) -> Result<Self> {
        Self::new(rho)
    }
}

impl From<DensityVector> for Vec<f64> {
    fn from(d: DensityVector) -> Self {
        d.rho
    }
}

impl DensityVector {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        for (idx, &r) in rho.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "density rho_{} = {r} must be finite and non-negative",
                    idx + 1
                )));
            }
        }
        let v = Self { rho };
        let s = v.weighted_sum();
        if s >= 0.5 {
            return Err(Error::DensityTooLarge(format!(
                "sum of i*rho_i = {s} must stay below 1/2"
            )));
        }
        Ok(v)
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    /// Largest species index `I`.
    pub fn max_size(&self) -> usize {
        self.rho.len()
    }

    /// `Σ i·ρ_i`, the ball density of the background.
    pub fn weighted_sum(&self) -> f64 {
        self.rho.iter().enumerate().map(|(k, &r)| (k + 1) as f64 * r).sum()
    }

    /// Distance to the admissibility boundary, `1/2 − Σ i·ρ_i`.
    pub fn slack(&self) -> f64 {
        0.5 - self.weighted_sum()
    }
}

/// Dense row-major square matrix with just enough linear algebra for the
/// collision system: LU with partial pivoting, one refinement pass, and the
/// determinant from the factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    n: usize,
    a: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![0.0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    fn lu(&self) -> Result<Lu> {
        let n = self.n;
        let mut a = self.a.clone();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0f64;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&r, &s| a[r * n + k].abs().total_cmp(&a[s * n + k].abs()))
                .unwrap();
            if a[p * n + k].abs() < 1e-300 {
                return Err(Error::Internal("collision matrix is singular".into()));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
                sign = -sign;
            }
            for r in (k + 1)..n {
                let f = a[r * n + k] / a[k * n + k];
                a[r * n + k] = f;
                for j in (k + 1)..n {
                    a[r * n + j] -= f * a[k * n + j];
                }
            }
        }
        Ok(Lu { n, a, piv, sign })
    }

    /// Solves `self · x = b` by LU followed by one iterative-refinement step.
    pub fn solve_refined(&self, b: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.n);
        let lu = self.lu()?;
        let mut x = lu.solve(b);
        let ax = self.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, axi)| bi - axi).collect();
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        Ok(x)
    }

    pub fn det(&self) -> Result<f64> {
        Ok(self.lu()?.det())
    }
}

struct Lu {
    n: usize,
    a: Vec<f64>,
    piv: Vec<usize>,
    sign: f64,
}

impl Lu {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            for j in 0..i {
                x[i] -= self.a[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.a[i * n + j] * x[j];
            }
            x[i] /= self.a[i * n + i];
        }
        x
    }

    fn det(&self) -> f64 {
        self.sign * (0..self.n).map(|i| self.a[i * self.n + i]).product::<f64>()
    }
}

/// Builds the collision matrix `M` and its dual `M*_ij = 2(i∧j)ρ_i` (same
/// diagonal).  The dual is the exact transpose — entry for entry, the same
/// floating-point products — and this is asserted.
pub fn build_matrices(densities: &DensityVector) -> (Mat, Mat) {
    let rho = densities.rho();
    let n = rho.len();
    let mut m = Mat::zeros(n);
    let mut dual = Mat::zeros(n);
    for i in 0..n {
        let mut diag = 1.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let c = 2.0 * ((i.min(j) + 1) as f64);
            m.set(i, j, c * rho[j]);
            dual.set(i, j, c * rho[i]);
            diag -= c * rho[j];
        }
        m.set(i, i, diag);
        dual.set(i, i, diag);
    }
    assert_eq!(dual, m.transpose(), "dual collision matrix must equal the transpose exactly");
    (m, dual)
}

/// Bare speeds `v^bare_i = i`.
pub fn bare_speeds(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64).collect()
}

/// Effective speeds with the residual and determinant certificates attached.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeedReport {
    pub speeds: Vec<f64>,
    /// `‖M v − v^bare‖_∞` after refinement.
    pub matrix_residual: f64,
    /// Sup over `i` of the defect in `v_i = i + Σ_j 2(i∧j)ρ_j (v_i − v_j)`.
    pub fixed_point_residual: f64,
    pub det: f64,
    /// `Π_{i=2}^{I} (1 − Σ_j 2(i∧j)ρ_j)`, a proven lower bound for `det`.
    pub det_lower_bound: f64,
}

/// Solves `M v = v^bare` and certifies the solution: both residuals must be
/// below `1e-10` and the determinant must clear its lower bound.
pub fn effective_speeds(densities: &DensityVector) -> Result<SpeedReport> {
    let n = densities.max_size();
    let rho = densities.rho();
    let (m, _) = build_matrices(densities);
    let bare = bare_speeds(n);
    let speeds = m.solve_refined(&bare)?;

    let ax = m.mul_vec(&speeds);
    let matrix_residual = ax
        .iter()
        .zip(&bare)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let fixed_point_residual = (0..n)
        .map(|i| {
            let drift: f64 = (0..n)
                .map(|j| 2.0 * ((i.min(j) + 1) as f64) * rho[j] * (speeds[i] - speeds[j]))
                .sum();
            (speeds[i] - bare[i] - drift).abs()
        })
        .fold(0.0f64, f64::max);

    let det = m.det()?;
    let det_lower_bound: f64 = (2..=n)
        .map(|i| {
            1.0 - (0..n)
                .map(|j| 2.0 * ((i - 1).min(j) + 1) as f64 * rho[j])
                .sum::<f64>()
        })
        .product();

    if matrix_residual >= 1e-10 || fixed_point_residual >= 1e-10 {
        return Err(Error::Internal(format!(
            "speed residuals too large: matrix {matrix_residual:e}, fixed point {fixed_point_residual:e}"
        )));
    }
    if det + 1e-12 < det_lower_bound {
        return Err(Error::Internal(format!(
            "determinant {det} fell below its certificate {det_lower_bound}"
        )));
    }
    Ok(SpeedReport { speeds, matrix_residual, fixed_point_residual, det, det_lower_bound })
}

/// Solves the collision system for caller-supplied bare values (tracer
/// velocities, higher conserved currents, …).
pub fn dressed_speeds(densities: &DensityVector, bare: &[f64]) -> Result<Vec<f64>> {
    if bare.len() != densities.max_size() {
        return Err(Error::InvalidInput(format!(
            "bare vector has length {}, expected {}",
            bare.len(),
            densities.max_size()
        )));
    }
    if bare.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("bare values must be finite".into()));
    }
    let (m, _) = build_matrices(densities);
    m.solve_refined(bare)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(rho: &[f64]) -> DensityVector {
        DensityVector::new(rho.to_vec()).unwrap()
    }

    #[test]
    fn two_species_matrix_entries() {
        let (m, dual) = build_matrices(&dv(&[0.1, 0.05]));
        assert_eq!(m.get(0, 0), 0.9);
        assert_eq!(m.get(0, 1), 0.1);
        assert_eq!(m.get(1, 0), 0.2);
        assert_eq!(m.get(1, 1), 0.8);
        assert_eq!(dual.get(0, 1), 0.2);
        assert_eq!(dual.get(1, 0), 0.1);
    }

    #[test]
    fn two_species_speeds_and_certificate() {
        let report = effective_speeds(&dv(&[0.1, 0.05])).unwrap();
        assert!((report.speeds[0] - 6.0 / 7.0).abs() < 1e-13);
        assert!((report.speeds[1] - 16.0 / 7.0).abs() < 1e-13);
        assert!((report.det - 0.7).abs() < 1e-14);
        assert!((report.det_lower_bound - 0.6).abs() < 1e-14);
        assert!(report.matrix_residual < 1e-12);
        assert!(report.fixed_point_residual < 1e-12);
    }

    #[test]
    fn vacuum_background_keeps_bare_speeds() {
        let report = effective_speeds(&dv(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(report.speeds, vec![1.0, 2.0, 3.0]);
        assert_eq!(report.det, 1.0);
        assert_eq!(report.det_lower_bound, 1.0);
    }

    #[test]
    fn single_species_is_unaffected_by_itself() {
        let report = effective_speeds(&dv(&[0.3])).unwrap();
        assert!((report.speeds[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn density_at_capacity_is_rejected() {
        assert!(matches!(
            DensityVector::new(vec![0.5]),
            Err(Error::DensityTooLarge(_))
        ));
        assert!(matches!(
            DensityVector::new(vec![0.1, 0.2]),
            Err(Error::DensityTooLarge(_))
        ));
        assert!(matches!(
            DensityVector::new(vec![-0.1]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn dressed_speeds_accept_custom_bare_values() {
        let v = dressed_speeds(&dv(&[0.1, 0.05]), &[0.0, 0.0]).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-14));
    }

    fn arb_density() -> impl Strategy<Value = DensityVector> {
        proptest::collection::vec(0.0f64..0.4, 1..=8).prop_map(|raw| {
            let s: f64 = raw.iter().enumerate().map(|(k, &r)| (k + 1) as f64 * r).sum();
            let scale = if s > 0.45 { 0.45 / s } else { 1.0 };
            DensityVector::new(raw.into_iter().map(|r| r * scale).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn residuals_stay_certified(d in arb_density()) {
            let report = effective_speeds(&d).unwrap();
            prop_assert!(report.matrix_residual < 1e-10);
            prop_assert!(report.fixed_point_residual < 1e-10);
            prop_assert!(report.det + 1e-12 >= report.det_lower_bound);
            prop_assert!(report.det_lower_bound > 0.0);
        }

        #[test]
        fn constant_bare_values_dress_to_themselves(d in arb_density()) {
            // row sums of M are exactly 1, so M⁻¹ fixes constant vectors
            let ones = vec![1.0; d.max_size()];
            let dressed = dressed_speeds(&d, &ones).unwrap();
            for v in dressed {
                prop_assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }
}
