//! Random microscopic configurations and hydrodynamic convergence sweeps.
//!
//! Randomness comes from a keyed counter generator: every drawn number is a
//! pure function of `(seed, key…)`, so experiments are reproducible
//! bit-for-bit across platforms, threads, and reruns.  Slot contents are
//! sampled as independent Bernoulli variables with slowly varying rates,
//! the microscopic dynamics is run as a slot shift, and the empirical
//! integrated profiles are compared in sup norm against the exact
//! piecewise-linear flow of the rate integrals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bbs::{self, BallConfig};
use crate::codec::{
    decompose_fast, reconstruct, shift_slots, slot_decompose, slot_profile_from_marks,
    SlotDecomposition,
};
use crate::error::{Error, Result};
use crate::plf::PiecewiseLinear;
use crate::scattering::{free_shift, unscatter, ScatteredFrame};

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` determined entirely by `(seed, key…)`.
pub fn keyed_unit(seed: u64, key: &[u64]) -> f64 {
    let mut h = splitmix64(seed);
    for &k in key {
        h = splitmix64(h ^ k);
    }
    (splitmix64(h) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Piecewise-constant rate `z ↦ p(z)`: `rates[k]` on `[cuts[k], cuts[k+1])`,
/// zero before the first cut and after the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StepRatesRepr", into = "StepRatesRepr")]
pub struct StepRates {
    cuts: Vec<f64>,
    rates: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StepRatesRepr {
    cuts: Vec<f64>,
    rates: Vec<f64>,
}

impl TryFrom<StepRatesRepr> for StepRates {
    type Error = Error;
    fn try_from(r: StepRatesRepr) -> Result<Self> {
        Self::new(r.cuts, r.rates)
    }
}

impl From<StepRates> for StepRatesRepr {
    fn from(r: StepRates) -> Self {
        StepRatesRepr { cuts: r.cuts, rates: r.rates }
    }
}

impl StepRates {
    pub fn new(cuts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if cuts.len() != rates.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} rates need {} cut points, got {}",
                rates.len(),
                rates.len() + 1,
                cuts.len()
            )));
        }
        if cuts.iter().any(|c| !c.is_finite()) || cuts.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("cut points must be finite and strictly increasing".into()));
        }
        if cuts[0] < 0.0 {
            return Err(Error::InvalidInput("rates live on the non-negative axis".into()));
        }
        if rates.iter().any(|r| !r.is_finite() || !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput("rates are probabilities in [0, 1]".into()));
        }
        Ok(Self { cuts, rates })
    }

    /// Constant rate `p` on `[lo, hi)`.
    pub fn constant(lo: f64, hi: f64, p: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![p])
    }

    pub fn eval(&self, z: f64) -> f64 {
        if self.cuts.is_empty() || z < self.cuts[0] || z >= *self.cuts.last().unwrap() {
            return 0.0;
        }
        let k = self.cuts.partition_point(|&c| c <= z) - 1;
        self.rates[k]
    }

    pub fn sup(&self) -> f64 {
        self.rates.iter().fold(0.0f64, |a, &r| a.max(r))
    }

    /// Right edge of the support.
    pub fn end(&self) -> f64 {
        self.cuts.last().copied().unwrap_or(0.0)
    }

    /// `z ↦ ∫_0^z p`, exactly.
    pub fn integral(&self) -> PiecewiseLinear {
        let mut pts = vec![(0.0, 0.0)];
        let mut acc = 0.0;
        for (k, &r) in self.rates.iter().enumerate() {
            if self.cuts[k] > pts.last().unwrap().0 {
                pts.push((self.cuts[k], acc));
            }
            acc += r * (self.cuts[k + 1] - self.cuts[k]);
            pts.push((self.cuts[k + 1], acc));
        }
        PiecewiseLinear::from_points(&pts, 0.0).expect("rate integral is monotone")
    }
}

/// Per-size slot-filling rates `p̄_1 … p̄_I`; admissible when
/// `Σ_i i·sup p̄_i < 1/2`, which keeps every sampled profile inside the
/// contraction domain regardless of how the suprema align.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateSpecRepr", into = "RateSpecRepr")]
pub struct SlotRateSpec {
    rates: Vec<StepRates>,
}

#[derive(Serialize, Deserialize)]
struct RateSpecRepr {
    rates: Vec<StepRates>,
}

impl TryFrom<RateSpecRepr> for SlotRateSpec {
    type Error = Error;
    fn try_from(r: RateSpecRepr) -> Result<Self> {
        Self::new(r.rates)
    }
}

impl From<SlotRateSpec> for RateSpecRepr {
    fn from(s: SlotRateSpec) -> Self {
        RateSpecRepr { rates: s.rates }
    }
}

impl SlotRateSpec {
    pub fn new(rates: Vec<StepRates>) -> Result<Self> {
        let load: f64 = rates.iter().enumerate().map(|(k, r)| (k + 1) as f64 * r.sup()).sum();
        if load >= 0.5 {
            return Err(Error::DensityTooLarge(format!(
                "sum of i·sup p̄_i = {load} must stay below 1/2"
            )));
        }
        Ok(Self { rates })
    }

    /// Two well-separated species: size 2 fills slots over `[0,1)`, size 1
    /// over `[1,2)`, both at rate 0.15.
    pub fn two_species_default() -> Self {
        Self::new(vec![
            StepRates::constant(1.0, 2.0, 0.15).unwrap(),
            StepRates::constant(0.0, 1.0, 0.15).unwrap(),
        ])
        .expect("default rates are admissible")
    }

    pub fn max_size(&self) -> usize {
        self.rates.len()
    }

    /// `p̄_i`, 1-based.
    pub fn rate(&self, i: usize) -> &StepRates {
        &self.rates[i - 1]
    }

    /// The exact scattered profile of the rates, `ψ̄_i = ∫ p̄_i`.
    pub fn scattered_profile(&self) -> ScatteredFrame {
        ScatteredFrame::new(self.rates.iter().map(StepRates::integral).collect())
            .expect("rate integrals are admissible scattered profiles")
    }
}

/// Fills slot `m` of each size-`i` row by an independent Bernoulli draw with
/// rate `p̄_i((m−1)/n)`, for `m = 1 ..= ⌈n·end_i⌉`.
pub fn sample_slot_bernoulli(
    spec: &SlotRateSpec,
    n: u64,
    seed: u64,
    trial: u64,
) -> SlotDecomposition {
    let rows = (1..=spec.max_size())
        .map(|i| {
            let rate = spec.rate(i);
            let m_max = (n as f64 * rate.end()).ceil() as u64;
            (1..=m_max)
                .map(|m| {
                    let p = rate.eval((m - 1) as f64 / n as f64);
                    u32::from(keyed_unit(seed, &[n, trial, i as u64, m]) < p)
                })
                .collect()
        })
        .collect();
    SlotDecomposition::new(rows)
}

/// Independent occupancies `P(η(x) = 1) = p` over a window; admissible only
/// for `p < 1/2`.
pub fn sample_iid_balls(sites: usize, p: f64, seed: u64, trial: u64) -> Result<BallConfig> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::DensityTooLarge(format!(
            "ball density {p} must lie in [0, 1/2)"
        )));
    }
    let occ = (0..sites)
        .map(|x| u8::from(keyed_unit(seed, &[trial, x as u64]) < p))
        .collect();
    BallConfig::new(occ, None)
}

/// Which representation advances the microscopic dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvolutionPath {
    /// `k` carrier passes over the window.
    Carrier,
    /// Decompose once, shift every slot row, reconstruct.
    SlotShift,
    /// Run both and require byte-identical supports.
    BothAsserted,
}

/// Advances a configuration `k` steps along the chosen path.
pub fn evolve_via(config: &BallConfig, k: usize, path: EvolutionPath) -> Result<BallConfig> {
    let by_slots = |config: &BallConfig| -> Result<BallConfig> {
        Ok(reconstruct(&shift_slots(&slot_decompose(config)?, k)))
    };
    match path {
        EvolutionPath::Carrier => Ok(bbs::evolve(config, k)),
        EvolutionPath::SlotShift => by_slots(config),
        EvolutionPath::BothAsserted => {
            let direct = bbs::evolve(config, k);
            let shifted = by_slots(config)?;
            if direct != shifted {
                return Err(Error::Internal(format!(
                    "carrier and slot-shift evolutions disagree after {k} steps"
                )));
            }
            Ok(direct)
        }
    }
}

/// Cumulative soliton-start counts: `counts[i-1][x]` is the number of
/// size-`i` solitons whose least site is `≤ x`.
pub fn soliton_start_counts(config: &BallConfig) -> Result<Vec<Vec<u32>>> {
    let pe = bbs::carrier(config);
    let marks = decompose_fast(config)?;
    let i_max = marks.max_size().max(config.max_size_hint().unwrap_or(0));
    let mut counts = vec![vec![0u32; pe.len() + 1]; i_max];
    for sol in marks.solitons() {
        counts[sol.size - 1][sol.start()] += 1;
    }
    for row in &mut counts {
        for x in 1..row.len() {
            row[x] += row[x - 1];
        }
    }
    Ok(counts)
}

/// Worst absolute defects of the three counting identities that tie the
/// microscopic picture to the hydrodynamic one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleBoundReport {
    pub i_max: usize,
    /// `(x+1) − R(x) − Σ_j 2j·n_j(x)`, bounded by `I(2I−1)`.
    pub worst_site_identity: u64,
    /// `S_i(x) − (x+1) + Σ_j 2(i∧j)·n_j(x)`, bounded by `4I²`.
    pub worst_slot_identity: u64,
    /// `balls(x) − Σ_j j·n_j(x)`, bounded by `I²`.
    pub worst_particle_identity: u64,
}

/// Verifies the deterministic counting identities at every site of the
/// window; a violated bound is an internal error, never a data error.
pub fn check_scale_bounds(config: &BallConfig) -> Result<ScaleBoundReport> {
    let pe = bbs::carrier(config);
    let marks = decompose_fast(config)?;
    let profile = slot_profile_from_marks(config, &pe, &marks);
    let i_max = profile.i_max();
    let counts = {
        let mut counts = vec![vec![0i64; pe.len() + 1]; i_max];
        for sol in marks.solitons() {
            counts[sol.size - 1][sol.start()] += 1;
        }
        for row in &mut counts {
            for x in 1..row.len() {
                row[x] += row[x - 1];
            }
        }
        counts
    };
    let bound_site = (i_max * (2 * i_max).saturating_sub(1)) as i64;
    let bound_slot = (4 * i_max * i_max) as i64;
    let bound_particle = (i_max * i_max) as i64;

    let mut report = ScaleBoundReport {
        i_max,
        worst_site_identity: 0,
        worst_slot_identity: 0,
        worst_particle_identity: 0,
    };
    let mut balls = 0i64;
    for x in 0..=pe.len() {
        balls += config.bit(x) as i64;
        let sites: i64 = (1..=i_max).map(|j| 2 * j as i64 * counts[j - 1][x]).sum();
        let d1 = (x as i64 + 1) - pe.records_up_to(x) - sites;
        let d3 = balls - (1..=i_max).map(|j| j as i64 * counts[j - 1][x]).sum::<i64>();
        if d1.abs() > bound_site || d3.abs() > bound_particle {
            return Err(Error::Internal(format!(
                "counting identity broke at site {x}: site defect {d1}, particle defect {d3}"
            )));
        }
        report.worst_site_identity = report.worst_site_identity.max(d1.unsigned_abs());
        report.worst_particle_identity = report.worst_particle_identity.max(d3.unsigned_abs());
        for i in 1..=i_max {
            let weighted: i64 = (1..=i_max)
                .map(|j| 2 * i.min(j) as i64 * counts[j - 1][x])
                .sum();
            let d2 = profile.s_row(i)[x] as i64 - (x as i64 + 1) + weighted;
            if d2.abs() > bound_slot {
                return Err(Error::Internal(format!(
                    "slot identity broke at site {x} for size {i}: defect {d2}"
                )));
            }
            report.worst_slot_identity = report.worst_slot_identity.max(d2.unsigned_abs());
        }
    }
    Ok(report)
}

/// Inputs of a hydrodynamic convergence sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepParams {
    pub rates: SlotRateSpec,
    pub scales: Vec<u64>,
    pub times: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    /// Right edge of the comparison window in macroscopic coordinates.
    pub u_max: f64,
}

/// One measured error: empirical integrated profile of one species against
/// the exact flow, in sup norm over `[0, u_max]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub trial: u64,
    pub size: usize,
    pub t: f64,
    pub sup_error: f64,
}

/// Runs the sweep: every `(n, trial)` samples slots once, evolves by slot
/// shifts to each requested time, and measures per-species sup errors.
/// Rows come back sorted by `(n, trial, size, t)`.
pub fn convergence_sweep(params: &SweepParams) -> Result<Vec<SweepRow>> {
    if params.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidInput("sweep times must be finite and ≥ 0".into()));
    }
    if !(params.u_max > 0.0 && params.u_max.is_finite()) {
        return Err(Error::InvalidInput("u_max must be positive".into()));
    }
    if params.scales.iter().any(|&n| n == 0) {
        return Err(Error::InvalidInput("scales must be ≥ 1".into()));
    }
    let sc = params.rates.scattered_profile();
    let targets: Vec<Vec<PiecewiseLinear>> = params
        .times
        .iter()
        .map(|&t| {
            let frame = unscatter(&free_shift(&sc, t)?)?;
            Ok((1..=frame.max_size()).map(|i| frame.psi(i).clone()).collect())
        })
        .collect::<Result<_>>()?;

    let cases: Vec<(u64, u64)> = params
        .scales
        .iter()
        .flat_map(|&n| (0..params.trials).map(move |trial| (n, trial)))
        .collect();
    let mut rows: Vec<SweepRow> = cases
        .par_iter()
        .map(|&(n, trial)| {
            let zeta = sample_slot_bernoulli(&params.rates, n, params.seed, trial);
            let mut out = Vec::new();
            for (t_idx, &t) in params.times.iter().enumerate() {
                let k = (n as f64 * t).round() as usize;
                let config = reconstruct(&shift_slots(&zeta, k));
                let counts = soliton_start_counts(&config)?;
                let x_max = (n as f64 * params.u_max).ceil() as usize;
                for size in 1..=params.rates.max_size() {
                    let psi_t = &targets[t_idx][size - 1];
                    let row = counts.get(size - 1);
                    let mut sup = 0.0f64;
                    for x in 0..=x_max {
                        let c = row.map_or(0, |r| r[x.min(r.len() - 1)]);
                        let err = (c as f64 / n as f64 - psi_t.eval(x as f64 / n as f64)).abs();
                        sup = sup.max(err);
                    }
                    out.push(SweepRow { n, trial, size, t, sup_error: sup });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<Vec<SweepRow>>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        (a.n, a.trial, a.size)
            .cmp(&(b.n, b.trial, b.size))
            .then(a.t.total_cmp(&b.t))
    });
    Ok(rows)
}
