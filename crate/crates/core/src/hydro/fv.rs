//! First-order upwind finite-volume integrator for the density system.
//!
//! Integrates `∂_t ρ_i + ∂_u (v_i^eff(ρ) ρ_i) = 0` directly, with no use of
//! the scattering transform: cells centred on the grid nodes, effective
//! speeds recomputed per cell per step, explicit CFL-limited time steps,
//! zero inflow on the left, and automatic growth on the right whenever mass
//! reaches the final cell.  Positivity is preserved exactly because every
//! update is a convex combination of non-negative cell values.

use rayon::prelude::*;

use super::{local_speeds, DensityGrid};
use crate::error::{Error, Result};

pub fn fv_integrate(initial: &DensityGrid, t_end: f64, cfl: f64) -> Result<DensityGrid> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidInput(format!("end time must be finite and ≥ 0, got {t_end}")));
    }
    if !(cfl > 0.0 && cfl < 1.0) {
        return Err(Error::InvalidInput(format!("CFL number must lie in (0, 1), got {cfl}")));
    }
    let n_species = initial.max_size();
    if n_species == 0 {
        return Err(Error::InvalidInput("need at least one species".into()));
    }
    let h = initial.h();
    let mut cells = initial.len();
    // cell-major state: state[k*n_species + i]
    let mut state: Vec<f64> = (0..cells)
        .flat_map(|k| (1..=n_species).map(move |i| initial.row(i)[k]))
        .collect();

    let mut t = 0.0;
    let mut steps = 0usize;
    while t < t_end - 1e-14 {
        steps += 1;
        if steps > 20_000_000 {
            return Err(Error::Internal("finite-volume step guard exceeded".into()));
        }
        if state[(cells - 1) * n_species..].iter().any(|&r| r > 1e-14) {
            let add = (cells / 8).max(64);
            state.extend(std::iter::repeat(0.0).take(add * n_species));
            cells += add;
        }
        let speeds: Vec<Vec<f64>> = state
            .par_chunks(n_species)
            .map(local_speeds)
            .collect::<Result<_>>()
            .map_err(|e| {
                Error::MidIntegrationViolation(format!("at t = {t:.6}: {e}"))
            })?;
        let mut vmax = 0.0f64;
        for row in &speeds {
            for &v in row {
                if v < -1e-12 {
                    return Err(Error::MidIntegrationViolation(format!(
                        "negative effective speed {v:.3e} at t = {t:.6}"
                    )));
                }
                vmax = vmax.max(v.abs());
            }
        }
        let dt = (cfl * h / vmax.max(1e-9)).min(t_end - t);
        let state_ref = &state;
        let speeds_ref = &speeds;
        let next: Vec<f64> = (0..cells)
            .into_par_iter()
            .flat_map_iter(|k| {
                (0..n_species).map(move |i| {
                    let out = speeds_ref[k][i] * state_ref[k * n_species + i];
                    let inflow = if k > 0 {
                        speeds_ref[k - 1][i] * state_ref[(k - 1) * n_species + i]
                    } else {
                        0.0
                    };
                    state_ref[k * n_species + i] - (dt / h) * (out - inflow)
                })
            })
            .collect();
        state = next;
        t += dt;
    }

    let values = (0..n_species)
        .map(|i| (0..cells).map(|k| state[k * n_species + i]).collect())
        .collect();
    DensityGrid::new(h, values)
}
