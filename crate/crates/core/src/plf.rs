//! Exact algebra of non-decreasing piecewise-linear functions on `[0, ∞)`.
//!
//! Every integrated profile in the crate (spatial, effective, empirical) is a
//! [`PiecewiseLinear`]: breakpoints starting at the origin, linear pieces in
//! between, and a constant `tail_slope` after the last breakpoint.  Two
//! consecutive breakpoints may share an abscissa — a *vertical riser* — which
//! encodes a right-continuous jump.  Continuum objects never contain risers
//! (see [`PiecewiseLinear::is_continuous`]); they exist so that
//! right-continuous inverses of functions with flat segments, and empirical
//! step profiles with `1/N` jumps, live in the same carrier type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Breakpoints closer than this (in either coordinate) are merged by
/// canonicalization; collinearity is tested against the same tolerance.
pub const MERGE_TOL: f64 = 1e-12;
/// Sup-norm tolerance for function equality in tests and round-trip checks.
pub const EQ_TOL: f64 = 1e-9;
/// A segment counts as strictly increasing when its slope is at least this;
/// used by the increasing-class membership test.
pub const STRICT_MIN_SLOPE: f64 = 1e-10;

/// Non-decreasing piecewise-linear function with `f(0) = 0`.
///
/// Invariants (enforced by [`PiecewiseLinear::try_new`] and preserved by all
/// operations): `xs` and `ys` are equal-length, non-empty, finite and
/// non-decreasing, `xs[0] = ys[0] = 0`, at most two consecutive entries of
/// `xs` are equal, and `tail_slope ≥ 0` (`+∞` marks a function that is
/// undefined/infinite past its last breakpoint, the sentinel produced by
/// inverting a bounded function).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PlfRepr", into = "PlfRepr")]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tail_slope: f64,
}

/// Serialized form: breakpoint pairs plus the slope past the last one.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlfRepr {
    breakpoints: Vec<(f64, f64)>,
    tail_slope: f64,
}

impl TryFrom<PlfRepr> for PiecewiseLinear {
    type Error = Error;
    fn try_from(r: PlfRepr) -> Result<Self> {
        let (xs, ys) = r.breakpoints.into_iter().unzip();
        PiecewiseLinear::try_new(xs, ys, r.tail_slope)
    }
}

impl From<PiecewiseLinear> for PlfRepr {
    fn from(f: PiecewiseLinear) -> Self {
        PlfRepr {
            breakpoints: f.xs.into_iter().zip(f.ys).collect(),
            tail_slope: f.tail_slope,
        }
    }
}

impl PiecewiseLinear {
    /// Validates, snaps sub-`MERGE_TOL` monotonicity noise, and canonicalizes.
    pub fn try_new(mut xs: Vec<f64>, mut ys: Vec<f64>, tail_slope: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidInput(
                "breakpoint abscissae and values must be non-empty and equal-length".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite breakpoint".into()));
        }
        if tail_slope.is_nan() || tail_slope < 0.0 {
            return Err(Error::InvalidInput("tail slope must be ≥ 0".into()));
        }
        let xscale = 1.0 + xs.last().unwrap().abs();
        let yscale = 1.0 + ys.last().unwrap().abs();
        if xs[0].abs() > MERGE_TOL * xscale || ys[0].abs() > MERGE_TOL * yscale {
            return Err(Error::InvalidInput("function must start at (0, 0)".into()));
        }
        xs[0] = 0.0;
        ys[0] = 0.0;
        for k in 1..xs.len() {
            if xs[k] < xs[k - 1] {
                if xs[k - 1] - xs[k] > MERGE_TOL * xscale {
                    return Err(Error::InvalidInput("abscissae must be non-decreasing".into()));
                }
                xs[k] = xs[k - 1];
            }
            if ys[k] < ys[k - 1] {
                if ys[k - 1] - ys[k] > MERGE_TOL * yscale {
                    return Err(Error::InvalidInput("values must be non-decreasing".into()));
                }
                ys[k] = ys[k - 1];
            }
        }
        Ok(Self { xs, ys, tail_slope }.canonical())
    }

    pub fn from_points(points: &[(f64, f64)], tail_slope: f64) -> Result<Self> {
        let (xs, ys) = points.iter().copied().unzip();
        Self::try_new(xs, ys, tail_slope)
    }

    /// `u ↦ slope · u`.
    pub fn linear(slope: f64) -> Self {
        Self { xs: vec![0.0], ys: vec![0.0], tail_slope: slope }
    }

    pub fn identity() -> Self {
        Self::linear(1.0)
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn tail_slope(&self) -> f64 {
        self.tail_slope
    }

    pub fn last_x(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn last_y(&self) -> f64 {
        *self.ys.last().unwrap()
    }

    /// Right-continuous evaluation; returns `+∞` past the last breakpoint of
    /// an infinite-tail function.
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= -MERGE_TOL, "evaluation left of the origin: {u}");
        if u >= self.last_x() {
            if u == self.last_x() {
                return self.last_y();
            }
            return self.last_y() + self.tail_slope * (u - self.last_x());
        }
        let idx = self.xs.partition_point(|&x| x <= u);
        if idx == 0 {
            return self.ys[0];
        }
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (y0, y1) = (self.ys[idx - 1], self.ys[idx]);
        if x1 == x0 || u == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }

    /// Left limit `f(u⁻)`; differs from `eval` only at risers.
    pub fn eval_left(&self, u: f64) -> f64 {
        if u > self.last_x() {
            return self.eval(u);
        }
        let idx = self.xs.partition_point(|&x| x < u);
        if idx == 0 {
            return self.ys[0];
        }
        if idx < self.xs.len() && self.xs[idx] == u {
            return self.ys[idx];
        }
        self.eval(u)
    }

    /// True when the function has no vertical risers.
    pub fn is_continuous(&self) -> bool {
        self.xs.windows(2).all(|w| w[1] > w[0])
    }

    /// Slopes of the strictly-increasing-width segments, tail excluded.
    fn finite_slopes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.xs.len()).filter_map(move |k| {
            let dx = self.xs[k] - self.xs[k - 1];
            (dx > 0.0).then(|| (self.ys[k] - self.ys[k - 1]) / dx)
        })
    }

    /// Largest slope over all segments including the tail (`+∞` at risers).
    pub fn max_slope(&self) -> f64 {
        let mut m = self.tail_slope;
        if !self.is_continuous() {
            return f64::INFINITY;
        }
        for s in self.finite_slopes() {
            m = m.max(s);
        }
        m
    }

    /// Member of the strictly-increasing class: continuous, every slope
    /// (including the tail) at least [`STRICT_MIN_SLOPE`].
    pub fn is_strictly_increasing(&self) -> bool {
        self.is_continuous()
            && self.tail_slope >= STRICT_MIN_SLOPE
            && self.finite_slopes().all(|s| s >= STRICT_MIN_SLOPE)
    }

    /// Merges near-duplicate breakpoints and collinear interior points, and
    /// folds a final segment that already matches the tail slope. Idempotent.
    pub fn canonical(mut self) -> Self {
        // 1. cluster abscissae within MERGE_TOL; a cluster collapses to one
        //    point, or to an exact riser pair when its values genuinely jump.
        let n = self.xs.len();
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);
        let mut k = 0;
        while k < n {
            let mut j = k;
            while j + 1 < n && self.xs[j + 1] - self.xs[k] <= MERGE_TOL {
                j += 1;
            }
            let x = self.xs[k];
            let (ylo, yhi) = (self.ys[k], self.ys[j]);
            if yhi - ylo <= MERGE_TOL {
                pts.push((x, yhi));
            } else {
                pts.push((x, ylo));
                pts.push((x, yhi));
            }
            k = j + 1;
        }
        // 2. drop interior points collinear with their neighbours.
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for p in pts {
            out.push(p);
            while out.len() >= 3 {
                let (a, b, c) = (out[out.len() - 3], out[out.len() - 2], out[out.len() - 1]);
                let collinear = if c.0 > a.0 {
                    let interp = a.1 + (c.1 - a.1) * (b.0 - a.0) / (c.0 - a.0);
                    b.0 > a.0 && b.0 < c.0 && (b.1 - interp).abs() <= MERGE_TOL
                } else {
                    // triple riser: keep only its endpoints
                    true
                };
                if collinear {
                    out.remove(out.len() - 2);
                } else {
                    break;
                }
            }
        }
        // 3. fold trailing segments that already have the tail slope.
        while out.len() >= 2 && self.tail_slope.is_finite() {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            if b.0 > a.0 && ((b.1 - a.1) / (b.0 - a.0) - self.tail_slope).abs() <= MERGE_TOL {
                out.pop();
            } else {
                break;
            }
        }
        self.xs = out.iter().map(|p| p.0).collect();
        self.ys = out.iter().map(|p| p.1).collect();
        self.xs[0] = 0.0;
        self.ys[0] = 0.0;
        self
    }

    /// Exact right-continuous inverse `z ↦ inf { u : f(u) > z }`.
    ///
    /// Coordinate swap: flats become risers and vice versa.  A `tail_slope`
    /// of zero turns into the `+∞` sentinel tail — evaluating the inverse
    /// beyond `sup f` yields `+∞`.
    pub fn inverse(&self) -> Self {
        let tail = if self.tail_slope == 0.0 {
            f64::INFINITY
        } else if self.tail_slope.is_infinite() {
            0.0
        } else {
            1.0 / self.tail_slope
        };
        Self { xs: self.ys.clone(), ys: self.xs.clone(), tail_slope: tail }.canonical()
    }

    /// Exact composition `self ∘ inner`.
    ///
    /// Breakpoints of the result are the breakpoints of `inner` together with
    /// the preimages under `inner` of the breakpoints of `self`.  Where
    /// `inner` strictly crosses a jump of `self`, the jump is reproduced as a
    /// riser; an inner function merely touching an outer jump location is
    /// resolved right-continuously.
    pub fn compose(&self, inner: &PiecewiseLinear) -> Self {
        let (f, g) = (self, inner);
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(f.xs.len() + g.xs.len());
        let mut push_value = |z: f64, w: f64, interior: bool| {
            // interior crossings of an outer jump get both sides of the jump
            let (lo, hi) = (f.eval_left(w), f.eval(w));
            if interior && hi - lo > 0.0 {
                pts.push((z, lo));
            }
            pts.push((z, hi));
        };
        for k in 0..g.xs.len() {
            push_value(g.xs[k], g.ys[k], false);
            if k + 1 < g.xs.len() {
                let (z0, z1) = (g.xs[k], g.xs[k + 1]);
                let (w0, w1) = (g.ys[k], g.ys[k + 1]);
                if z1 > z0 && w1 > w0 {
                    let lo = f.xs.partition_point(|&u| u <= w0);
                    let hi = f.xs.partition_point(|&u| u < w1);
                    for &u in &f.xs[lo..hi] {
                        let z = z0 + (u - w0) * (z1 - z0) / (w1 - w0);
                        push_value(z, u, true);
                    }
                }
            }
        }
        let mut tail;
        if g.tail_slope == 0.0 {
            tail = 0.0;
        } else if g.tail_slope.is_infinite() {
            // inner jumps to +∞ past its last breakpoint: climb through the
            // rest of the outer function at that abscissa
            push_value(g.last_x(), f.last_x().max(g.last_y()), true);
            tail = if f.tail_slope == 0.0 { 0.0 } else { f64::INFINITY };
        } else {
            let lo = f.xs.partition_point(|&u| u <= g.last_y());
            for &u in &f.xs[lo..] {
                let z = g.last_x() + (u - g.last_y()) / g.tail_slope;
                push_value(z, u, true);
            }
            tail = f.tail_slope * g.tail_slope;
            if tail.is_nan() {
                tail = f64::INFINITY; // 0 · ∞: outer flat past inner's reach
            }
        }
        Self { xs: pts.iter().map(|p| p.0).collect(), ys: pts.iter().map(|p| p.1).collect(), tail_slope: tail }
            .canonical()
    }

    /// `z ↦ f((z − s) ∨ 0)`: a flat prefix of length `s` followed by `f`.
    pub fn shift_floor(&self, s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::Precondition(format!("shift must be ≥ 0, got {s}")));
        }
        if s == 0.0 {
            return Ok(self.clone());
        }
        let mut xs = Vec::with_capacity(self.xs.len() + 1);
        let mut ys = Vec::with_capacity(self.ys.len() + 1);
        xs.push(0.0);
        ys.push(0.0);
        for (&x, &y) in self.xs.iter().zip(&self.ys) {
            xs.push(x + s);
            ys.push(y);
        }
        Ok(Self { xs, ys, tail_slope: self.tail_slope }.canonical())
    }

    /// `u ↦ id_coef·u + Σ coef·fᵢ(u)` on the union of all breakpoints.
    ///
    /// Inputs must be continuous; fails if the combination is not
    /// non-decreasing (up to `MERGE_TOL` snapping).
    pub fn linear_combination(id_coef: f64, terms: &[(f64, &PiecewiseLinear)]) -> Result<Self> {
        debug_assert!(terms.iter().all(|(_, f)| f.is_continuous()));
        let mut grid: Vec<f64> = vec![0.0];
        for (_, f) in terms {
            grid.extend_from_slice(&f.xs);
        }
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|b, a| *b - *a <= MERGE_TOL);
        let ys = grid
            .iter()
            .map(|&u| id_coef * u + terms.iter().map(|(c, f)| c * f.eval(u)).sum::<f64>())
            .collect();
        let tail = id_coef + terms.iter().map(|(c, f)| c * f.tail_slope).sum::<f64>();
        Self::try_new(grid, ys, tail)
    }

    /// `sup_{0 ≤ u ≤ u_max} |f(u) − g(u)|`, checking both one-sided limits at
    /// every breakpoint of either function.
    pub fn sup_distance(&self, other: &PiecewiseLinear, u_max: f64) -> f64 {
        let mut worst: f64 = 0.0;
        let mut check = |u: f64| {
            let d = (self.eval(u) - other.eval(u)).abs();
            let dl = (self.eval_left(u) - other.eval_left(u)).abs();
            worst = worst.max(d).max(dl);
        };
        check(0.0);
        check(u_max);
        for &u in self.xs.iter().chain(other.xs.iter()) {
            if u > 0.0 && u < u_max {
                check(u);
            }
        }
        worst
    }

    /// Equality within `tol` in sup-norm over both domains, tail slopes
    /// compared directly.
    pub fn approx_eq(&self, other: &PiecewiseLinear, tol: f64) -> bool {
        let u_max = self.last_x().max(other.last_x());
        let tails = if self.tail_slope.is_infinite() || other.tail_slope.is_infinite() {
            self.tail_slope == other.tail_slope
        } else {
            (self.tail_slope - other.tail_slope).abs() <= tol
        };
        tails && self.sup_distance(other, u_max) <= tol
    }
}
