//! Hydrodynamic density profiles and their exact flow.
//!
//! Initial data is a finite sum of smooth bumps per species.  Densities can
//! be sampled to a uniform grid, turned into integrated profiles, pushed
//! through the scattering flow, and differentiated back; residuals of the
//! governing transport equations are measured with an exact smooth
//! evaluator, and an independent finite-volume scheme provides a
//! cross-check that never touches the scattering transform.

mod fv;
mod smooth;

pub use fv::fv_integrate;
pub use smooth::SmoothFlow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plf::PiecewiseLinear;
use crate::scattering::{self, DomainReport, Frame};
use crate::speeds::{bare_speeds, dressed_speeds, DensityVector};

/// One smooth density bump `ρ(u) = c·((1 − cos θ)/2)²` with
/// `θ = 2π(u−a)/(b−a)` on `[a, b]`, zero outside.  The square makes the
/// profile C³ across the support edges, which the residual convergence
/// checks rely on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Bump {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite() && 0.0 <= a && a < b && c >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "bump needs 0 ≤ a < b and c ≥ 0, got a={a}, b={b}, c={c}"
            )));
        }
        Ok(Self { a, b, c })
    }

    fn width(&self) -> f64 {
        self.b - self.a
    }

    pub fn rho(&self, u: f64) -> f64 {
        if u <= self.a || u >= self.b {
            return 0.0;
        }
        let theta = 2.0 * std::f64::consts::PI * (u - self.a) / self.width();
        let base = (1.0 - theta.cos()) / 2.0;
        self.c * base * base
    }

    /// `∫_0^u ρ`, in closed form.
    pub fn psi(&self, u: f64) -> f64 {
        let w = self.width();
        let x = (u - self.a).clamp(0.0, w);
        let theta = 2.0 * std::f64::consts::PI * x / w;
        self.c
            * (1.5 * x - (w / std::f64::consts::PI) * theta.sin()
                + (w / (8.0 * std::f64::consts::PI)) * (2.0 * theta).sin())
            / 4.0
    }

    /// Total mass `3c(b−a)/8`.
    pub fn mass(&self) -> f64 {
        3.0 * self.c * self.width() / 8.0
    }
}

/// Smooth multi-species initial data: `species[i-1]` is the list of bumps
/// whose sum is `ρ_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityRepr", into = "DensityRepr")]
pub struct SmoothDensity {
    species: Vec<Vec<Bump>>,
}

#[derive(Serialize, Deserialize)]
struct DensityRepr {
    species: Vec<Vec<Bump>>,
}

impl TryFrom<DensityRepr> for SmoothDensity {
    type Error = Error;
    fn try_from(r: DensityRepr) -> Result<Self> {
        Self::new(r.species)
    }
}

impl From<SmoothDensity> for DensityRepr {
    fn from(d: SmoothDensity) -> Self {
        DensityRepr { species: d.species }
    }
}

impl SmoothDensity {
    pub fn new(species: Vec<Vec<Bump>>) -> Result<Self> {
        for row in &species {
            for bump in row {
                Bump::new(bump.a, bump.b, bump.c)?;
            }
        }
        Ok(Self { species })
    }

    pub fn max_size(&self) -> usize {
        self.species.len()
    }

    /// `ρ_i(u)`, 1-based.
    pub fn rho(&self, i: usize, u: f64) -> f64 {
        self.species[i - 1].iter().map(|b| b.rho(u)).sum()
    }

    /// `ψ_i(u) = ∫_0^u ρ_i`, 1-based.
    pub fn psi(&self, i: usize, u: f64) -> f64 {
        self.species[i - 1].iter().map(|b| b.psi(u)).sum()
    }

    /// Total mass of species `i`.
    pub fn mass(&self, i: usize) -> f64 {
        self.species[i - 1].iter().map(|b| b.mass()).sum()
    }

    /// Right edge of the union of all supports.
    pub fn support_end(&self) -> f64 {
        self.species
            .iter()
            .flatten()
            .map(|b| b.b)
            .fold(0.0, f64::max)
    }
}

/// Effective speeds for one local density vector.
pub(crate) fn local_speeds(rho: &[f64]) -> Result<Vec<f64>> {
    let dv = DensityVector::new(rho.to_vec())?;
    dressed_speeds(&dv, &bare_speeds(rho.len()))
}

/// Number of sample points used to bound suprema of smooth densities.
const DOMAIN_SAMPLES: usize = 20_000;

/// Contraction-domain check for smooth data: the per-species ratios
/// `sup_u ρ_i/φ_i'` are bounded on a dense sample of the support and must
/// leave the margin `1/2 − Σ i·r_i` at least `1e-8`.
pub fn check_density_domain(density: &SmoothDensity) -> Result<DomainReport> {
    let n = density.max_size();
    let end = density.support_end();
    let mut per = vec![0.0f64; n];
    for k in 0..=DOMAIN_SAMPLES {
        let u = end * k as f64 / DOMAIN_SAMPLES as f64;
        let rho: Vec<f64> = (1..=n).map(|i| density.rho(i, u)).collect();
        for i in 1..=n {
            let dphi = 1.0
                - (1..=n)
                    .map(|j| 2.0 * i.min(j) as f64 * rho[j - 1])
                    .sum::<f64>();
            if dphi <= 0.0 {
                return Err(Error::NotInDensityDomain(format!(
                    "phi_{i}' = {dphi:.3e} at u = {u:.6}; density saturates the lattice"
                )));
            }
            per[i - 1] = per[i - 1].max(rho[i - 1] / dphi);
        }
    }
    let sum: f64 = per.iter().enumerate().map(|(k, &r)| (k + 1) as f64 * r).sum();
    let margin = 0.5 - sum;
    if margin < 1e-8 {
        return Err(Error::NotInDensityDomain(format!(
            "contraction margin {margin:.3e} is below 1e-8"
        )));
    }
    Ok(DomainReport { member: true, margin, per_size_ratio: per })
}

/// Per-species densities sampled on the uniform grid `u = k·h`;
/// `values[i-1][k] = ρ_i(k·h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityGrid {
    h: f64,
    values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn new(h: f64, values: Vec<Vec<f64>>) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {h}")));
        }
        let len = values.first().map_or(0, Vec::len);
        if len < 2 {
            return Err(Error::InvalidInput("grid needs at least two nodes".into()));
        }
        for (idx, row) in values.iter().enumerate() {
            if row.len() != len {
                return Err(Error::InvalidInput(format!(
                    "species {} has {} nodes, expected {len}",
                    idx + 1,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "species {} holds a negative or non-finite density",
                    idx + 1
                )));
            }
        }
        Ok(Self { h, values })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn max_size(&self) -> usize {
        self.values.len()
    }

    pub fn len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn u_max(&self) -> f64 {
        (self.len() - 1) as f64 * self.h
    }

    /// `ρ_i` row, 1-based.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i - 1]
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Samples smooth data pointwise onto a grid covering `[0, u_max]`.
pub fn sample_density(density: &SmoothDensity, h: f64, u_max: f64) -> Result<DensityGrid> {
    if !(h > 0.0 && u_max > h && h.is_finite() && u_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "need 0 < h < u_max, got h={h}, u_max={u_max}"
        )));
    }
    let n = (u_max / h).round() as usize + 1;
    let values = (1..=density.max_size())
        .map(|i| (0..n).map(|k| density.rho(i, k as f64 * h)).collect())
        .collect();
    DensityGrid::new(h, values)
}

/// Integrates a sampled density into a frame of piecewise-linear profiles by
/// the trapezoid rule; past the grid each profile continues at its final
/// sampled density.
pub fn density_to_integrated(grid: &DensityGrid) -> Result<Frame> {
    let n = grid.len();
    let xs: Vec<f64> = (0..n).map(|k| k as f64 * grid.h()).collect();
    let mut psi = Vec::with_capacity(grid.max_size());
    for i in 1..=grid.max_size() {
        let row = grid.row(i);
        let mut ys = Vec::with_capacity(n);
        let mut acc = 0.0;
        ys.push(0.0);
        for k in 1..n {
            acc += 0.5 * (row[k - 1] + row[k]) * grid.h();
            ys.push(acc);
        }
        psi.push(
            PiecewiseLinear::try_new(xs.clone(), ys, *row.last().unwrap())
                .map_err(|e| Error::Internal(format!("integrated profile invalid: {e}")))?,
        );
    }
    let frame = Frame::new(psi)?;
    // fail fast if the sampled data already saturates the lattice
    scattering::effective_coords(&frame)?;
    Ok(frame)
}

/// Extracts a density grid from a frame by central differences at the
/// nodes (one-sided at the ends).
pub fn differentiate_frame(frame: &Frame, h: f64, n: usize) -> Result<DensityGrid> {
    let values = (1..=frame.max_size())
        .map(|i| {
            let psi = frame.psi(i);
            (0..n)
                .map(|k| {
                    let u = k as f64 * h;
                    let d = if k == 0 {
                        psi.eval(h) - psi.eval(0.0)
                    } else if k == n - 1 {
                        psi.eval(u) - psi.eval(u - h)
                    } else {
                        (psi.eval(u + h) - psi.eval(u - h)) / 2.0
                    };
                    (d / h).max(0.0)
                })
                .collect()
        })
        .collect();
    DensityGrid::new(h, values)
}

/// Evolves a sampled density for time `t` through the scattering flow of its
/// integrated profile, then differentiates back onto a (possibly longer)
/// grid with the same spacing.
pub fn flow_density(grid: &DensityGrid, t: f64) -> Result<DensityGrid> {
    let frame = density_to_integrated(grid)?;
    let out = scattering::flow(&frame, t)?;
    let reach = (1..=out.max_size())
        .map(|i| out.psi(i).last_x())
        .fold(grid.u_max(), f64::max);
    let n = (reach / grid.h()).ceil() as usize + 2;
    differentiate_frame(&out, grid.h(), n)
}

/// `Σ_i i·ρ_i` per node: the density of occupied sites.
pub fn particle_density(grid: &DensityGrid) -> Vec<f64> {
    let mut out = vec![0.0; grid.len()];
    for i in 1..=grid.max_size() {
        for (o, &r) in out.iter_mut().zip(grid.row(i)) {
            *o += i as f64 * r;
        }
    }
    out
}

/// Sup-norm residuals of the three transport identities satisfied by the
/// flow, measured with centred differences: step `h` in `u`, `delta` in `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeResiduals {
    /// `∂_t ψ_i + v_i^eff(∂_u ψ) ∂_u ψ_i`
    pub integrated: f64,
    /// `∂_t ρ_i + ∂_u (v_i^eff(ρ) ρ_i)`
    pub density: f64,
    /// `∂_t Σ i ρ_i + ∂_u Σ i v_i^eff(ρ) ρ_i`
    pub particle: f64,
}

/// Measures the PDE residuals of the exact flow at time `t` on the interior
/// of `(0, u_max)` with spatial step `h` and temporal step `delta`.  Values
/// shrink at second order when both steps halve, for C³ initial data.
pub fn pde_residual(
    density: &SmoothDensity,
    t: f64,
    h: f64,
    delta: f64,
    u_max: f64,
) -> Result<PdeResiduals> {
    if !(h > 0.0 && delta > 0.0 && t > delta && u_max > 4.0 * h) {
        return Err(Error::InvalidInput(format!(
            "need 0 < delta < t, h > 0, and u_max > 4h, got h={h}, delta={delta}, t={t}, u_max={u_max}"
        )));
    }
    check_density_domain(density)?;
    let flow = SmoothFlow::new(density)?;
    let n_species = density.max_size();
    let us: Vec<f64> = (1..)
        .map(|k| k as f64 * h)
        .take_while(|&u| u < u_max)
        .collect();
    let k_total = us.len();

    let fields = |tt: f64| -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        use rayon::prelude::*;
        let rows: Vec<(Vec<f64>, Vec<f64>)> =
            us.par_iter().map(|&u| flow.fields_at(u, tt)).collect();
        rows.into_iter().unzip()
    };
    let (pm, rm) = fields(t - delta);
    let (pp, rp) = fields(t + delta);
    let (p0, r0) = fields(t);

    let v0: Vec<Vec<f64>> = r0.iter().map(|row| local_speeds(row)).collect::<Result<_>>()?;
    let flux_rho: Vec<Vec<f64>> = (0..k_total)
        .map(|k| (0..n_species).map(|i| v0[k][i] * r0[k][i]).collect())
        .collect();
    let flux_part: Vec<f64> = (0..k_total)
        .map(|k| (0..n_species).map(|i| (i + 1) as f64 * v0[k][i] * r0[k][i]).sum())
        .collect();

    let mut res = PdeResiduals { integrated: 0.0, density: 0.0, particle: 0.0 };
    for k in 1..k_total - 1 {
        let du_psi: Vec<f64> = (0..n_species)
            .map(|i| (p0[k + 1][i] - p0[k - 1][i]) / (2.0 * h))
            .collect();
        let vd = local_speeds(&du_psi)?;
        let mut particle = 0.0;
        for i in 0..n_species {
            let dt_psi = (pp[k][i] - pm[k][i]) / (2.0 * delta);
            let dt_rho = (rp[k][i] - rm[k][i]) / (2.0 * delta);
            let du_flux = (flux_rho[k + 1][i] - flux_rho[k - 1][i]) / (2.0 * h);
            res.integrated = res.integrated.max((dt_psi + vd[i] * du_psi[i]).abs());
            res.density = res.density.max((dt_rho + du_flux).abs());
            particle += (i + 1) as f64 * dt_rho;
        }
        particle += (flux_part[k + 1] - flux_part[k - 1]) / (2.0 * h);
        res.particle = res.particle.max(particle.abs());
    }
    Ok(res)
}
