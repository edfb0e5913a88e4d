//! Scattering transform for multi-species profiles and the resulting flow.
//!
//! A direct-side frame collects the integrated densities
//! `ψ_i(u) = ∫_0^u ρ_i`.  The effective coordinate of species `i` is
//! `φ_i = id − Σ_j 2(i∧j) ψ_j`; pushing each `ψ_i` through its own `φ_i`
//! gives the scattering coordinates `ψ̄_i = ψ_i ∘ φ_i⁻¹`, in which the
//! dynamics is a rigid drift of species `i` at its bare speed `i`.  The
//! inverse map rebuilds `ψ_i = ψ̄_i ∘ γ_i ∘ γ_0⁻¹` from the downward
//! recursion `γ_I = id`, `γ_i = id + Σ_{j>i} 2(j−i)·(ψ̄_j ∘ γ_j)`.
//!
//! The flow is contractive on the domain where
//! `Σ_i i · sup dψ̄_i/dz < 1/2`; the reports returned by the domain checks
//! carry that margin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plf::{PiecewiseLinear, MERGE_TOL};

/// Direct-side frame: one integrated density per species, `psi[i-1] = ψ_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<PiecewiseLinear>", into = "Vec<PiecewiseLinear>")]
pub struct Frame {
    psi: Vec<PiecewiseLinear>,
}

impl TryFrom<Vec<PiecewiseLinear>> for Frame {
    type Error = Error;
    fn try_from(psi: Vec<PiecewiseLinear>) -> Result<Self> {
        Self::new(psi)
    }
}

impl From<Frame> for Vec<PiecewiseLinear> {
    fn from(f: Frame) -> Self {
        f.psi
    }
}

fn check_profiles(kind: &str, psi: &[PiecewiseLinear]) -> Result<()> {
    for (idx, p) in psi.iter().enumerate() {
        if !p.is_continuous() {
            return Err(Error::InvalidInput(format!(
                "{kind} profile {} must be continuous",
                idx + 1
            )));
        }
        if p.tail_slope().is_infinite() {
            return Err(Error::InvalidInput(format!(
                "{kind} profile {} must have a finite tail slope",
                idx + 1
            )));
        }
    }
    Ok(())
}

impl Frame {
    pub fn new(psi: Vec<PiecewiseLinear>) -> Result<Self> {
        check_profiles("integrated density", &psi)?;
        Ok(Self { psi })
    }

    /// Number of species `I`.
    pub fn max_size(&self) -> usize {
        self.psi.len()
    }

    /// `ψ_i`, 1-based.
    pub fn psi(&self, i: usize) -> &PiecewiseLinear {
        &self.psi[i - 1]
    }

    pub fn profiles(&self) -> &[PiecewiseLinear] {
        &self.psi
    }
}

/// Scattering-side frame, `psibar[i-1] = ψ̄_i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<PiecewiseLinear>", into = "Vec<PiecewiseLinear>")]
pub struct ScatteredFrame {
    psibar: Vec<PiecewiseLinear>,
}

impl TryFrom<Vec<PiecewiseLinear>> for ScatteredFrame {
    type Error = Error;
    fn try_from(psibar: Vec<PiecewiseLinear>) -> Result<Self> {
        Self::new(psibar)
    }
}

impl From<ScatteredFrame> for Vec<PiecewiseLinear> {
    fn from(f: ScatteredFrame) -> Self {
        f.psibar
    }
}

impl ScatteredFrame {
    pub fn new(psibar: Vec<PiecewiseLinear>) -> Result<Self> {
        check_profiles("scattered", &psibar)?;
        Ok(Self { psibar })
    }

    pub fn max_size(&self) -> usize {
        self.psibar.len()
    }

    /// `ψ̄_i`, 1-based.
    pub fn psibar(&self, i: usize) -> &PiecewiseLinear {
        &self.psibar[i - 1]
    }

    pub fn profiles(&self) -> &[PiecewiseLinear] {
        &self.psibar
    }
}

/// The effective coordinates `φ_1 … φ_I` of a frame.
#[derive(Debug, Clone)]
pub struct EffectiveCoords {
    phi: Vec<PiecewiseLinear>,
}

impl EffectiveCoords {
    /// `φ_i`, 1-based.
    pub fn phi(&self, i: usize) -> &PiecewiseLinear {
        &self.phi[i - 1]
    }

    /// `φ_I`, the steepest contraction.
    pub fn top(&self) -> &PiecewiseLinear {
        self.phi.last().expect("at least one species")
    }
}

/// `φ_i = id − Σ_j 2(i∧j) ψ_j` for every species; the frame is admissible
/// only when `φ_I` is strictly increasing.
pub fn effective_coords(frame: &Frame) -> Result<EffectiveCoords> {
    let n = frame.max_size();
    let mut phi = Vec::with_capacity(n);
    for i in 1..=n {
        let terms: Vec<(f64, &PiecewiseLinear)> = frame
            .profiles()
            .iter()
            .enumerate()
            .map(|(jdx, p)| (-2.0 * (i.min(jdx + 1)) as f64, p))
            .collect();
        let f = PiecewiseLinear::linear_combination(1.0, &terms)
            .map_err(|e| Error::NotInDomainF(format!("phi_{i} is not monotone: {e}")))?;
        phi.push(f);
    }
    if let Some(top) = phi.last() {
        if !top.is_strictly_increasing() {
            return Err(Error::NotInDomainF(format!(
                "phi_{n} is not strictly increasing"
            )));
        }
    }
    Ok(EffectiveCoords { phi })
}

/// Pushes every species into its scattering coordinate, `ψ̄_i = ψ_i ∘ φ_i⁻¹`.
pub fn scatter(frame: &Frame) -> Result<ScatteredFrame> {
    let coords = effective_coords(frame)?;
    let psibar: Vec<PiecewiseLinear> = (1..=frame.max_size())
        .map(|i| frame.psi(i).compose(&coords.phi(i).inverse()))
        .collect();
    ScatteredFrame::new(psibar)
        .map_err(|e| Error::NotInDomainF(format!("scattering produced an inadmissible profile: {e}")))
}

/// The inverse-side change of coordinates `γ_0, γ_1, …, γ_I` together with
/// the cached compositions `ψ̄_i ∘ γ_i`.
#[derive(Debug, Clone)]
pub struct GammaCoords {
    gamma: Vec<PiecewiseLinear>,
    gamma0: PiecewiseLinear,
    through: Vec<PiecewiseLinear>,
}

impl GammaCoords {
    /// `γ_i` for `0 ≤ i ≤ I`.
    pub fn gamma(&self, i: usize) -> &PiecewiseLinear {
        if i == 0 {
            &self.gamma0
        } else {
            &self.gamma[i - 1]
        }
    }

    pub fn gamma0(&self) -> &PiecewiseLinear {
        &self.gamma0
    }

    /// `ψ̄_i ∘ γ_i`, 1-based.
    pub fn through(&self, i: usize) -> &PiecewiseLinear {
        &self.through[i - 1]
    }
}

/// Runs the downward recursion `γ_I = id`,
/// `γ_i = id + Σ_{j>i} 2(j−i)·(ψ̄_j ∘ γ_j)`, finishing with `γ_0`.
pub fn gamma_coords(sc: &ScatteredFrame) -> Result<GammaCoords> {
    let n = sc.max_size();
    let mut gamma = vec![PiecewiseLinear::identity(); n];
    let mut through = vec![PiecewiseLinear::zero(); n];
    for i in (1..=n).rev() {
        let terms: Vec<(f64, &PiecewiseLinear)> = ((i + 1)..=n)
            .map(|j| (2.0 * (j - i) as f64, &through[j - 1]))
            .collect();
        let g = PiecewiseLinear::linear_combination(1.0, &terms)
            .map_err(|e| Error::Internal(format!("gamma_{i} failed to assemble: {e}")))?;
        through[i - 1] = sc.psibar(i).compose(&g);
        gamma[i - 1] = g;
    }
    let terms: Vec<(f64, &PiecewiseLinear)> =
        (1..=n).map(|j| (2.0 * j as f64, &through[j - 1])).collect();
    let gamma0 = PiecewiseLinear::linear_combination(1.0, &terms)
        .map_err(|e| Error::Internal(format!("gamma_0 failed to assemble: {e}")))?;
    Ok(GammaCoords { gamma, gamma0, through })
}

/// Inverts the scattering transform, `ψ_i = (ψ̄_i ∘ γ_i) ∘ γ_0⁻¹`.
pub fn unscatter(sc: &ScatteredFrame) -> Result<Frame> {
    let gc = gamma_coords(sc)?;
    // γ_0 has slope ≥ 1 everywhere, so it is always invertible
    if !gc.gamma0.is_strictly_increasing() {
        return Err(Error::Internal("gamma_0 lost strict monotonicity".into()));
    }
    let g0_inv = gc.gamma0.inverse();
    let psi: Vec<PiecewiseLinear> = (1..=sc.max_size())
        .map(|i| gc.through(i).compose(&g0_inv))
        .collect();
    Frame::new(psi).map_err(|e| Error::Internal(format!("unscattered frame invalid: {e}")))
}

/// The free dynamics in scattering coordinates: species `i` drifts right by
/// `i·t`, with new mass held at zero behind the front.
pub fn free_shift(sc: &ScatteredFrame, t: f64) -> Result<ScatteredFrame> {
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    let psibar = (1..=sc.max_size())
        .map(|i| sc.psibar(i).shift_floor(i as f64 * t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScatteredFrame { psibar })
}

/// Admissibility report: the contraction margin `1/2 − Σ_i i·r_i` where
/// `r_i` is the supremum of `dψ̄_i/dz` for species `i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainReport {
    pub member: bool,
    pub margin: f64,
    pub per_size_ratio: Vec<f64>,
}

fn margin_report(per_size_ratio: Vec<f64>) -> DomainReport {
    let sum: f64 = per_size_ratio
        .iter()
        .enumerate()
        .map(|(k, &r)| (k + 1) as f64 * r)
        .sum();
    let margin = 0.5 - sum;
    DomainReport { member: margin > 0.0, margin, per_size_ratio }
}

/// Checks contraction-domain membership of a direct frame without leaving
/// the direct side: on every common linearity cell, `dψ̄_i/dz = Δψ_i/Δφ_i`,
/// and the supremum over cells equals the supremum over the whole line.
pub fn check_domain(frame: &Frame) -> Result<DomainReport> {
    let coords = effective_coords(frame)?;
    let n = frame.max_size();
    let mut grid: Vec<f64> = vec![0.0];
    for p in frame.profiles() {
        grid.extend_from_slice(p.xs());
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|b, a| *b - *a <= MERGE_TOL);

    let mut per = Vec::with_capacity(n);
    for i in 1..=n {
        let psi = frame.psi(i);
        let phi = coords.phi(i);
        let mut ratio = 0.0f64;
        for pair in grid.windows(2) {
            let (x0, x1) = (pair[0], pair[1]);
            if x1 - x0 <= 10.0 * MERGE_TOL {
                continue;
            }
            let dpsi = psi.eval(x1) - psi.eval(x0);
            let dphi = phi.eval(x1) - phi.eval(x0);
            if dphi > 0.0 {
                ratio = ratio.max(dpsi / dphi);
            } else if dpsi > 0.0 {
                ratio = f64::INFINITY;
            }
        }
        let (tp, tf) = (psi.tail_slope(), phi.tail_slope());
        if tp > 0.0 {
            ratio = if tf > 0.0 { ratio.max(tp / tf) } else { f64::INFINITY };
        }
        per.push(ratio);
    }
    Ok(margin_report(per))
}

/// Same margin computed on the scattering side, where the ratios are plain
/// slopes.
pub fn check_scattered_domain(sc: &ScatteredFrame) -> DomainReport {
    margin_report((1..=sc.max_size()).map(|i| sc.psibar(i).max_slope()).collect())
}

/// Evolves a frame for time `t ≥ 0`: scatter, drift every species at its
/// bare speed, unscatter.  Membership in the contraction domain is checked
/// before and after.
pub fn flow(frame: &Frame, t: f64) -> Result<Frame> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and ≥ 0, got {t}")));
    }
    let pre = check_domain(frame)?;
    if !pre.member {
        return Err(Error::NotInDomainD(format!(
            "contraction margin is {:.6e}; the flow needs a positive margin",
            pre.margin
        )));
    }
    let shifted = free_shift(&scatter(frame)?, t)?;
    let out = unscatter(&shifted)?;
    let post = check_domain(&out)?;
    if !post.member {
        return Err(Error::Internal(format!(
            "flow left the contraction domain (margin {:.6e})",
            post.margin
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lin(slope: f64) -> PiecewiseLinear {
        PiecewiseLinear::linear(slope)
    }

    fn two_species() -> Frame {
        Frame::new(vec![lin(0.1), lin(0.05)]).unwrap()
    }

    #[test]
    fn constant_background_effective_coords() {
        let coords = effective_coords(&two_species()).unwrap();
        assert!(coords.phi(1).approx_eq(&lin(0.7), 1e-12));
        assert!(coords.phi(2).approx_eq(&lin(0.6), 1e-12));
    }

    #[test]
    fn constant_background_scatters_to_linear_profiles() {
        let sc = scatter(&two_species()).unwrap();
        assert!(sc.psibar(1).approx_eq(&lin(1.0 / 7.0), 1e-12));
        assert!(sc.psibar(2).approx_eq(&lin(1.0 / 12.0), 1e-12));
    }

    #[test]
    fn constant_background_gamma_recursion() {
        let gc = gamma_coords(&scatter(&two_species()).unwrap()).unwrap();
        assert!(gc.gamma(2).approx_eq(&lin(1.0), 1e-12));
        assert!(gc.gamma(1).approx_eq(&lin(7.0 / 6.0), 1e-12));
        assert!(gc.gamma0().approx_eq(&lin(5.0 / 3.0), 1e-12));
    }

    #[test]
    fn gamma_carries_top_coordinate_to_each_species() {
        let frame = two_species();
        let coords = effective_coords(&frame).unwrap();
        let gc = gamma_coords(&scatter(&frame).unwrap()).unwrap();
        for i in 1..=2 {
            let composed = gc.gamma(i).compose(coords.top());
            assert!(composed.approx_eq(coords.phi(i), 1e-12));
        }
        assert!(gc.gamma0().compose(coords.top()).approx_eq(&lin(1.0), 1e-12));
    }

    #[test]
    fn scatter_then_unscatter_restores_constant_background() {
        let frame = two_species();
        let back = unscatter(&scatter(&frame).unwrap()).unwrap();
        for i in 1..=2 {
            assert!(back.psi(i).approx_eq(frame.psi(i), 1e-12));
        }
    }

    #[test]
    fn sparse_single_species_margin() {
        let report = check_domain(&Frame::new(vec![lin(0.1)]).unwrap()).unwrap();
        assert!(report.member);
        assert!((report.margin - 0.375).abs() < 1e-12);
        assert!((report.per_size_ratio[0] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn dense_single_species_is_outside_the_contraction_domain() {
        let report = check_domain(&Frame::new(vec![lin(0.3)]).unwrap()).unwrap();
        assert!(!report.member);
        assert!((report.per_size_ratio[0] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn saturated_density_is_not_even_in_f() {
        assert!(matches!(
            effective_coords(&Frame::new(vec![lin(0.6)]).unwrap()),
            Err(Error::NotInDomainF(_))
        ));
        assert!(matches!(
            effective_coords(&Frame::new(vec![lin(0.5)]).unwrap()),
            Err(Error::NotInDomainF(_))
        ));
    }

    #[test]
    fn constant_density_flow_has_closed_form() {
        // ψ(u) = 0.1u evolves to ψ_t(u) = 0.1·(u − t)⁺
        let frame = Frame::new(vec![lin(0.1)]).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let out = flow(&frame, t).unwrap();
            let expect =
                PiecewiseLinear::from_points(&[(0.0, 0.0), (t, 0.0)], 0.1).unwrap();
            assert!(out.psi(1).approx_eq(&expect, 1e-12));
        }
    }

    #[test]
    fn negative_or_infinite_time_is_rejected() {
        let frame = Frame::new(vec![lin(0.1)]).unwrap();
        assert!(flow(&frame, -1.0).is_err());
        assert!(flow(&frame, f64::NAN).is_err());
    }

    fn bump(a: f64, b: f64, mass: f64) -> PiecewiseLinear {
        PiecewiseLinear::from_points(&[(0.0, 0.0), (a, 0.0), (b, mass)], 0.0).unwrap()
    }

    #[test]
    fn flow_is_a_semigroup_on_bumps() {
        let frame = Frame::new(vec![bump(0.5, 2.0, 0.12), bump(1.0, 3.0, 0.05)]).unwrap();
        let one = flow(&flow(&frame, 0.7).unwrap(), 0.5).unwrap();
        let direct = flow(&frame, 1.2).unwrap();
        for i in 1..=2 {
            assert!(one.psi(i).approx_eq(direct.psi(i), 1e-9));
        }
    }

    fn arb_frame() -> impl Strategy<Value = Frame> {
        // up to 3 species of bounded density, safely inside the domain
        (1usize..=3, proptest::collection::vec((0.1f64..2.0, 0.0f64..1.0), 1..6)).prop_map(
            |(n, cells)| {
                let mut psi = Vec::new();
                for i in 1..=n {
                    let cap = 0.08 / (i as f64 * n as f64);
                    let mut pts = vec![(0.0, 0.0)];
                    let (mut x, mut y) = (0.0, 0.0);
                    for (dx, frac) in &cells {
                        x += dx;
                        y += frac * cap * dx;
                        pts.push((x, y));
                    }
                    psi.push(PiecewiseLinear::from_points(&pts, 0.0).unwrap());
                }
                Frame::new(psi).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn random_frames_round_trip(frame in arb_frame()) {
            prop_assert!(check_domain(&frame).unwrap().member);
            let back = unscatter(&scatter(&frame).unwrap()).unwrap();
            for i in 1..=frame.max_size() {
                prop_assert!(back.psi(i).approx_eq(frame.psi(i), 1e-9));
            }
        }

        #[test]
        fn zero_time_flow_is_the_identity(frame in arb_frame()) {
            let out = flow(&frame, 0.0).unwrap();
            for i in 1..=frame.max_size() {
                prop_assert!(out.psi(i).approx_eq(frame.psi(i), 1e-9));
            }
        }

        #[test]
        fn gamma_links_effective_coordinates(frame in arb_frame()) {
            let coords = effective_coords(&frame).unwrap();
            let gc = gamma_coords(&scatter(&frame).unwrap()).unwrap();
            for i in 1..=frame.max_size() {
                let composed = gc.gamma(i).compose(coords.top());
                prop_assert!(composed.approx_eq(coords.phi(i), 1e-9));
            }
        }

        #[test]
        fn drift_does_not_shrink_the_scattered_margin(frame in arb_frame(), t in 0.0f64..3.0) {
            let sc = scatter(&frame).unwrap();
            let before = check_scattered_domain(&sc);
            let after = check_scattered_domain(&free_shift(&sc, t).unwrap());
            prop_assert!(after.margin >= before.margin - 1e-12);
        }
    }
}
