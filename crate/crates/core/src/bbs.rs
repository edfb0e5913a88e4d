//! Finite box-ball configurations and the carrier dynamics.
//!
//! A configuration is a 0/1 occupancy row over sites `x = 1, 2, …` with
//! finitely many balls; site `0` is always empty.  One update step moves a
//! carrier left to right: it picks up every ball it meets and drops one on
//! every empty site while loaded.  The equivalent path encoding walks
//! `S(x) − S(x−1) = 1 − 2η(x)`, tracks the running maximum `M`, and reads the
//! carrier load as `W = M − S`; *records* are the sites where `M` strictly
//! increases (plus `x = 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite 0/1 occupancy row, site 1 first. `occupancy[x-1] = η(x)`.
///
/// The stored window is kept verbatim (trailing empty sites are meaningful
/// for text round-trips); equality compares ball support only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallConfig {
    occupancy: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_size_hint: Option<usize>,
}

impl BallConfig {
    pub fn new(occupancy: Vec<u8>, max_size_hint: Option<usize>) -> Result<Self> {
        if occupancy.iter().any(|&b| b > 1) {
            return Err(Error::InvalidInput("occupancy entries must be 0 or 1".into()));
        }
        if max_size_hint == Some(0) {
            return Err(Error::InvalidInput("max size hint must be ≥ 1".into()));
        }
        Ok(Self { occupancy, max_size_hint })
    }

    /// Parses a line of `0`/`1` characters, site 1 first.
    pub fn from_text(line: &str) -> Result<Self> {
        let mut occ = Vec::with_capacity(line.len());
        for ch in line.trim().chars() {
            match ch {
                '0' => occ.push(0),
                '1' => occ.push(1),
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "configuration text may only contain 0/1, found {ch:?}"
                    )))
                }
            }
        }
        Self::new(occ, None)
    }

    pub fn to_text(&self) -> String {
        self.occupancy.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// Occupancy of site `x ≥ 0` (0 outside the stored window).
    pub fn bit(&self, x: usize) -> u8 {
        if x == 0 || x > self.occupancy.len() {
            0
        } else {
            self.occupancy[x - 1]
        }
    }

    pub fn occupancy(&self) -> &[u8] {
        &self.occupancy
    }

    /// Stored window length (may include trailing empty sites).
    pub fn window_len(&self) -> usize {
        self.occupancy.len()
    }

    /// Window length with trailing empty sites dropped.
    pub fn support_len(&self) -> usize {
        let mut n = self.occupancy.len();
        while n > 0 && self.occupancy[n - 1] == 0 {
            n -= 1;
        }
        n
    }

    pub fn ball_count(&self) -> usize {
        self.occupancy.iter().map(|&b| b as usize).sum()
    }

    pub fn max_size_hint(&self) -> Option<usize> {
        self.max_size_hint
    }

    pub fn with_hint(mut self, hint: Option<usize>) -> Self {
        self.max_size_hint = hint;
        self
    }
}

impl PartialEq for BallConfig {
    /// Support equality: the windows may differ by trailing empty sites.
    fn eq(&self, other: &Self) -> bool {
        let n = self.support_len();
        n == other.support_len() && self.occupancy[..n] == other.occupancy[..n]
    }
}

impl Eq for BallConfig {}

/// Walk/maximum/load arrays of a configuration over `x = 0 ..= l_ext`, where
/// `l_ext` extends the stored window just far enough that the final site is a
/// record (so every excursion is closed).
#[derive(Debug, Clone)]
pub struct PathEncoding {
    s: Vec<i64>,
    m: Vec<i64>,
    w: Vec<i64>,
    records: Vec<usize>,
}

impl PathEncoding {
    pub fn s(&self) -> &[i64] {
        &self.s
    }

    pub fn m(&self) -> &[i64] {
        &self.m
    }

    /// Carrier load `W(x) = M(x) − S(x)`.
    pub fn w(&self) -> &[i64] {
        &self.w
    }

    /// Record sites in increasing order; always starts with 0 and ends with
    /// the last encoded site.
    pub fn records(&self) -> &[usize] {
        &self.records
    }

    /// Number of records up to and including `x` (the running maximum plus 1).
    pub fn records_up_to(&self, x: usize) -> i64 {
        self.m[x] + 1
    }

    /// Last encoded site index (`l_ext`).
    pub fn len(&self) -> usize {
        self.s.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.s.len() <= 1
    }
}

/// Carrier load over the stored window only: `w[x]` for `x = 0 ..= len`.
fn carrier_loads(config: &BallConfig) -> Vec<i64> {
    let mut w = Vec::with_capacity(config.window_len() + 1);
    w.push(0);
    for x in 1..=config.window_len() {
        let prev = w[x - 1];
        w.push(match (config.bit(x), prev) {
            (0, 0) => 0,
            (0, _) => prev - 1,
            _ => prev + 1,
        });
    }
    w
}

/// Builds the path encoding, extending past the stored window until the walk
/// closes at a record.  The load is computed both by the carrier recursion
/// and as `M − S`; the two must agree exactly.
pub fn carrier(config: &BallConfig) -> PathEncoding {
    let l = config.window_len();
    let w_stored = carrier_loads(config);
    let l_ext = if l == 0 {
        0
    } else if w_stored[l] > 0 {
        l + w_stored[l] as usize + 1
    } else if w_stored[l - 1] == 0 {
        l
    } else {
        l + 1
    };

    let mut s = Vec::with_capacity(l_ext + 1);
    let mut m = Vec::with_capacity(l_ext + 1);
    let mut w = Vec::with_capacity(l_ext + 1);
    let mut records = vec![0];
    s.push(0);
    m.push(0);
    w.push(0);
    let mut w_rec = 0i64;
    for x in 1..=l_ext {
        s.push(s[x - 1] + 1 - 2 * config.bit(x) as i64);
        let new_max = s[x] > m[x - 1];
        m.push(m[x - 1].max(s[x]));
        w.push(m[x] - s[x]);
        w_rec = match (config.bit(x), w_rec) {
            (0, 0) => 0,
            (0, _) => w_rec - 1,
            _ => w_rec + 1,
        };
        assert_eq!(w_rec, w[x], "carrier recursion disagrees with M − S at site {x}");
        if new_max {
            records.push(x);
        }
    }
    debug_assert!(l_ext == 0 || *records.last().unwrap() == l_ext);
    PathEncoding { s, m, w, records }
}

/// One carrier pass.  The output window grows by the final carrier load so
/// that no ball is dropped off the edge.
pub fn step(config: &BallConfig) -> BallConfig {
    let l = config.window_len();
    let w = carrier_loads(config);
    let drained = w[l] as usize;
    let mut out = Vec::with_capacity(l + drained);
    for x in 1..=l {
        out.push(((1 - config.bit(x)) as i64).min(w[x - 1]) as u8);
    }
    out.extend(std::iter::repeat(1).take(drained));
    BallConfig { occupancy: out, max_size_hint: config.max_size_hint }
}

/// `k` carrier passes.
pub fn evolve(config: &BallConfig, k: usize) -> BallConfig {
    let mut cur = config.clone();
    for _ in 0..k {
        cur = step(&cur);
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 19-site walkthrough configuration used across the crate's tests.
    pub(crate) const WALKTHROUGH: &str = "1101100110001110000";

    #[test]
    fn walkthrough_carrier_loads_and_records() {
        let cfg = BallConfig::from_text(WALKTHROUGH).unwrap();
        let pe = carrier(&cfg);
        let expect_w = [0, 1, 2, 1, 2, 3, 2, 1, 2, 3, 2, 1, 0, 1, 2, 3, 2, 1, 0, 0];
        assert_eq!(pe.w(), &expect_w);
        assert_eq!(pe.records(), &[0, 19]);
        assert_eq!(pe.len(), 19);
    }

    #[test]
    fn walkthrough_single_step() {
        let cfg = BallConfig::from_text(WALKTHROUGH).unwrap();
        let next = step(&cfg);
        assert_eq!(next.to_text(), "0010011001110001110");
    }

    #[test]
    fn window_grows_with_final_load() {
        let cfg = BallConfig::from_text("111000010").unwrap();
        let mut cur = cfg;
        for _ in 0..3 {
            cur = step(&cur);
        }
        let balls: Vec<usize> =
            (1..=cur.window_len()).filter(|&x| cur.bit(x) == 1).collect();
        assert_eq!(balls, vec![9, 12, 13, 14]);
    }

    #[test]
    fn trailing_record_is_appended_when_needed() {
        // single ball: walk never closes inside the window, so the encoding
        // extends to x = 3 where W(2) = W(3) = 0
        let cfg = BallConfig::from_text("1").unwrap();
        let pe = carrier(&cfg);
        assert_eq!(pe.len(), 3);
        assert_eq!(pe.records(), &[0, 3]);
    }

    #[test]
    fn empty_window_of_zeros_is_all_records() {
        let cfg = BallConfig::from_text("000").unwrap();
        let pe = carrier(&cfg);
        assert_eq!(pe.records(), &[0, 1, 2, 3]);
    }

    #[test]
    fn support_equality_ignores_trailing_zeros() {
        let a = BallConfig::from_text("10100").unwrap();
        let b = BallConfig::from_text("101").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, BallConfig::from_text("1011").unwrap());
    }

    fn arb_config() -> impl Strategy<Value = BallConfig> {
        proptest::collection::vec(0u8..=1, 0..200)
            .prop_map(|occ| BallConfig::new(occ, None).unwrap())
    }

    proptest! {
        #[test]
        fn step_conserves_balls(cfg in arb_config()) {
            prop_assert_eq!(step(&cfg).ball_count(), cfg.ball_count());
        }

        #[test]
        fn evolve_composes(cfg in arb_config(), a in 0usize..6, b in 0usize..6) {
            prop_assert_eq!(evolve(&evolve(&cfg, a), b), evolve(&cfg, a + b));
        }

        #[test]
        fn load_is_max_minus_walk(cfg in arb_config()) {
            let pe = carrier(&cfg);
            for x in 0..=pe.len() {
                prop_assert_eq!(pe.w()[x], pe.m()[x] - pe.s()[x]);
                prop_assert!(pe.w()[x] >= 0);
            }
            // records are exactly the sites where the load vanishes twice
            for x in 1..=pe.len() {
                let is_rec = pe.records().contains(&x);
                prop_assert_eq!(is_rec, pe.w()[x] == 0 && pe.w()[x - 1] == 0);
            }
        }
    }
}
