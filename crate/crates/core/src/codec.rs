//! Soliton decomposition, slot coordinates, and the slot-shift dynamics.
//!
//! Within each excursion between consecutive records, the decomposition
//! repeatedly takes the left-most run (of 0s or 1s) whose following run is at
//! least as long and groups it with the matching prefix of that run: a
//! size-`i` soliton occupying `2i` (not necessarily adjacent) sites.  Each
//! site of a size-`i` soliton carries a slot value in `{0, …, i−1}`; records
//! carry `∞`.  Counting sites with slot value `≥ i` yields the slot
//! numbering `S_i`, and recording each size-`i` soliton under the slot
//! number of its least site gives the slot decomposition `ζ`, on which the
//! dynamics acts as the linear shift `ζ_i(m) ↦ ζ_i(m − i·k)`.

use serde::{Deserialize, Serialize};

use crate::bbs::{carrier, BallConfig, PathEncoding};
use crate::error::{Error, Result};

/// One soliton: its size and the ascending list of its `2·size` sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Soliton {
    pub size: usize,
    pub sites: Vec<usize>,
}

impl Soliton {
    /// Least occupied site; the soliton is marked there.
    pub fn start(&self) -> usize {
        self.sites[0]
    }
}

/// Complete soliton decomposition of a configuration, sorted by start site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolitonMarks {
    solitons: Vec<Soliton>,
}

impl SolitonMarks {
    pub fn solitons(&self) -> &[Soliton] {
        &self.solitons
    }

    /// Largest size present (0 for the empty decomposition).
    pub fn max_size(&self) -> usize {
        self.solitons.iter().map(|s| s.size).max().unwrap_or(0)
    }

    /// Start sites of all size-`i` solitons, ascending.
    pub fn starts_of_size(&self, size: usize) -> Vec<usize> {
        self.solitons.iter().filter(|s| s.size == size).map(|s| s.start()).collect()
    }
}

/// Per-site slot values and the slot numbering rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotProfile {
    /// `nu[x]` for `x = 0 ..= l_ext`; `None` encodes `∞` (records).
    nu: Vec<Option<usize>>,
    /// `s_rows[i-1][x] = S_i(x)`, the number of `i`-slots among `0 ..= x`.
    s_rows: Vec<Vec<usize>>,
}

impl SlotProfile {
    pub fn nu(&self) -> &[Option<usize>] {
        &self.nu
    }

    pub fn s_row(&self, size: usize) -> &[usize] {
        &self.s_rows[size - 1]
    }

    pub fn i_max(&self) -> usize {
        self.s_rows.len()
    }
}

/// Slot-indexed soliton counts `ζ_i(m)`, stored densely per size with
/// trailing zeros trimmed; `rows[i-1][m-1] = ζ_i(m)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SlotRepr", into = "SlotRepr")]
pub struct SlotDecomposition {
    rows: Vec<Vec<u32>>,
}

/// Serialized form: sparse `[slot, count]` pairs per size row.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct SlotRepr {
    #[serde(rename = "I")]
    i_max: usize,
    rows: Vec<Vec<(usize, u32)>>,
}

impl TryFrom<SlotRepr> for SlotDecomposition {
    type Error = Error;
    fn try_from(r: SlotRepr) -> Result<Self> {
        if r.rows.len() != r.i_max {
            return Err(Error::InvalidInput(format!(
                "expected {} slot rows, found {}",
                r.i_max,
                r.rows.len()
            )));
        }
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); r.i_max];
        for (row, pairs) in rows.iter_mut().zip(&r.rows) {
            for &(m, count) in pairs {
                if m == 0 {
                    return Err(Error::InvalidInput("slot numbers are 1-based".into()));
                }
                if m > row.len() {
                    row.resize(m, 0);
                }
                row[m - 1] = row[m - 1]
                    .checked_add(count)
                    .ok_or_else(|| Error::InvalidInput("slot count overflow".into()))?;
            }
        }
        Ok(SlotDecomposition::new(rows))
    }
}

impl From<SlotDecomposition> for SlotRepr {
    fn from(z: SlotDecomposition) -> Self {
        let rows = z
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(idx, &c)| (idx + 1, c))
                    .collect()
            })
            .collect();
        SlotRepr { i_max: z.rows.len(), rows }
    }
}

impl SlotDecomposition {
    pub fn new(mut rows: Vec<Vec<u32>>) -> Self {
        for row in &mut rows {
            while row.last() == Some(&0) {
                row.pop();
            }
        }
        Self { rows }
    }

    pub fn i_max(&self) -> usize {
        self.rows.len()
    }

    /// `ζ_size(m)`; zero outside the stored support.
    pub fn count(&self, size: usize, m: usize) -> u32 {
        self.rows
            .get(size - 1)
            .and_then(|row| row.get(m - 1))
            .copied()
            .unwrap_or(0)
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    pub fn total_solitons(&self) -> u64 {
        self.rows.iter().flatten().map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }
}

/// A maximal run of equal symbols; `sites` stays ascending even after the
/// merges performed during matching.
#[derive(Debug, Clone)]
struct Run {
    bit: u8,
    sites: Vec<usize>,
}

/// Splits the sites of one excursion (strictly between two records) into
/// alternating runs.
fn excursion_runs(config: &BallConfig, lo: usize, hi: usize) -> Vec<Run> {
    let mut runs: Vec<Run> = Vec::new();
    for x in (lo + 1)..hi {
        let b = config.bit(x);
        match runs.last_mut() {
            Some(run) if run.bit == b => run.sites.push(x),
            _ => runs.push(Run { bit: b, sites: vec![x] }),
        }
    }
    runs
}

/// Pops the matched pair at `idx`: emits the soliton, drains the prefix of
/// the following run, and merges any remainder into the left neighbour.
fn take_match(runs: &mut Vec<Run>, idx: usize, out: &mut Vec<Soliton>) {
    let size = runs[idx].sites.len();
    let mut sites = std::mem::take(&mut runs[idx].sites);
    sites.extend(runs[idx + 1].sites.drain(..size));
    out.push(Soliton { size, sites });
    let right = runs.remove(idx + 1);
    runs.remove(idx);
    if !right.sites.is_empty() {
        if idx > 0 {
            debug_assert_eq!(runs[idx - 1].bit, right.bit);
            runs[idx - 1].sites.extend(right.sites);
        } else {
            runs.insert(0, right);
        }
    }
}

fn decompose_excursion_literal(mut runs: Vec<Run>, out: &mut Vec<Soliton>) -> Result<()> {
    while !runs.is_empty() {
        let idx = (0..runs.len() - 1)
            .find(|&k| runs[k].sites.len() <= runs[k + 1].sites.len())
            .ok_or_else(|| {
                Error::Internal("excursion left unmatched runs (unbalanced walk)".into())
            })?;
        take_match(&mut runs, idx, out);
    }
    Ok(())
}

/// Single pass with a stack of strictly shortening runs; emits exactly the
/// matches the literal scan would, in amortized linear time.
fn decompose_excursion_stack(runs: Vec<Run>, out: &mut Vec<Soliton>) -> Result<()> {
    let mut stack: Vec<Run> = Vec::new();
    for run in runs {
        let mut cur = run;
        while let Some(top) = stack.last_mut() {
            if cur.sites.len() < top.sites.len() {
                break;
            }
            let size = top.sites.len();
            let mut sites = std::mem::take(&mut top.sites);
            sites.extend(cur.sites.drain(..size));
            out.push(Soliton { size, sites });
            stack.pop();
            if cur.sites.is_empty() {
                break;
            }
            if let Some(below) = stack.pop() {
                debug_assert_eq!(below.bit, cur.bit);
                let mut merged = below;
                merged.sites.extend(std::mem::take(&mut cur.sites));
                cur = merged;
            }
        }
        if !cur.sites.is_empty() {
            stack.push(cur);
        }
    }
    if !stack.is_empty() {
        return Err(Error::Internal("excursion left unmatched runs (unbalanced walk)".into()));
    }
    Ok(())
}

fn decompose_with(
    config: &BallConfig,
    per_excursion: fn(Vec<Run>, &mut Vec<Soliton>) -> Result<()>,
) -> Result<SolitonMarks> {
    let pe = carrier(config);
    let mut out = Vec::new();
    for pair in pe.records().windows(2) {
        let runs = excursion_runs(config, pair[0], pair[1]);
        if !runs.is_empty() {
            per_excursion(runs, &mut out)?;
        }
    }
    out.sort_by_key(|s| s.start());
    let marks = SolitonMarks { solitons: out };
    if let Some(hint) = config.max_size_hint() {
        let found = marks.max_size();
        if found > hint {
            return Err(Error::Precondition(format!(
                "max size hint {hint} exceeded: found a size-{found} soliton"
            )));
        }
    }
    Ok(marks)
}

/// Left-most-run soliton decomposition (the defining scan, O(n²) worst case).
pub fn decompose(config: &BallConfig) -> Result<SolitonMarks> {
    decompose_with(config, decompose_excursion_literal)
}

/// Stack-based decomposition, linear time; agrees with [`decompose`] exactly.
pub fn decompose_fast(config: &BallConfig) -> Result<SolitonMarks> {
    decompose_with(config, decompose_excursion_stack)
}

/// Slot values and slot numbering from an existing decomposition.
pub fn slot_profile_from_marks(
    config: &BallConfig,
    pe: &PathEncoding,
    marks: &SolitonMarks,
) -> SlotProfile {
    let l_ext = pe.len();
    let mut nu: Vec<Option<usize>> = vec![None; l_ext + 1];
    let mut covered = 0usize;
    for sol in marks.solitons() {
        for (p, &x) in sol.sites.iter().enumerate() {
            debug_assert!(nu[x].is_none());
            nu[x] = Some(p % sol.size);
        }
        covered += sol.sites.len();
    }
    assert_eq!(
        covered + pe.records().len(),
        l_ext + 1,
        "decomposition must cover every non-record site exactly once"
    );
    let i_max = marks.max_size().max(config.max_size_hint().unwrap_or(0));
    let mut s_rows = vec![vec![0usize; l_ext + 1]; i_max];
    for (i_idx, row) in s_rows.iter_mut().enumerate() {
        let mut acc = 0usize;
        for x in 0..=l_ext {
            if nu[x].map_or(true, |v| v >= i_idx + 1) {
                acc += 1;
            }
            row[x] = acc;
        }
    }
    SlotProfile { nu, s_rows }
}

/// Slot values `ν` and numbering rows `S_i` for a configuration.
pub fn slot_profile(config: &BallConfig) -> Result<SlotProfile> {
    let pe = carrier(config);
    let marks = decompose(config)?;
    Ok(slot_profile_from_marks(config, &pe, &marks))
}

/// Counts each size-`i` soliton under the `i`-slot number of its start site.
pub fn slot_decompose(config: &BallConfig) -> Result<SlotDecomposition> {
    let pe = carrier(config);
    let marks = decompose_fast(config)?;
    let profile = slot_profile_from_marks(config, &pe, &marks);
    Ok(slot_counts(&marks, &profile))
}

/// ζ from a decomposition and its slot profile.
pub fn slot_counts(marks: &SolitonMarks, profile: &SlotProfile) -> SlotDecomposition {
    let mut rows = vec![Vec::new(); profile.i_max()];
    for sol in marks.solitons() {
        let m = profile.s_row(sol.size)[sol.start()];
        let row = &mut rows[sol.size - 1];
        if m > row.len() {
            row.resize(m, 0);
        }
        row[m - 1] += 1;
    }
    SlotDecomposition::new(rows)
}

/// `k` steps of the linearized dynamics: row `i` shifts right by `i·k` slots.
pub fn shift_slots(zeta: &SlotDecomposition, k: usize) -> SlotDecomposition {
    let rows = zeta
        .rows
        .iter()
        .enumerate()
        .map(|(i_idx, row)| {
            if row.is_empty() {
                Vec::new()
            } else {
                let shift = (i_idx + 1) * k;
                let mut shifted = vec![0u32; shift + row.len()];
                shifted[shift..].copy_from_slice(row);
                shifted
            }
        })
        .collect();
    SlotDecomposition::new(rows)
}

/// Inverts the slot decomposition: rebuilds the unique configuration whose
/// slot counts are `ζ`, excursion by excursion.
///
/// For each excursion, sizes are processed in strictly decreasing order; for
/// each size `j`, the available `j`-slot anchors are the leading record plus
/// every site of the partial excursion with slot value `≥ j`, and `ζ_j(m)`
/// solitons are spliced in directly after the `m`-th anchor — as the string
/// `1…10…0`, flipped to `0…01…1` when the anchor site holds a ball.  The
/// excursion then closes with a record site, and each row's slot cursor
/// advances past the anchors it exposed.
pub fn reconstruct(zeta: &SlotDecomposition) -> BallConfig {
    let i_max = zeta.i_max();
    let last: Vec<Option<usize>> = zeta
        .rows
        .iter()
        .map(|row| row.iter().rposition(|&c| c > 0))
        .collect();
    let mut cursor = vec![0usize; i_max];
    let mut eta: Vec<u8> = Vec::new();

    let unfinished = |cursor: &[usize]| {
        (0..i_max).any(|i| last[i].is_some_and(|lz| lz >= cursor[i]))
    };
    while unfinished(&cursor) {
        // seg holds (occupancy, slot value) for the excursion under way
        let mut seg: Vec<(u8, usize)> = Vec::new();
        for j in (1..=i_max).rev() {
            // anchors of the j-slots exposed by the sizes already placed;
            // index 0 is the record opening the excursion
            let anchors: Vec<Option<usize>> = std::iter::once(None)
                .chain(
                    seg.iter()
                        .enumerate()
                        .filter(|(_, &(_, nu))| nu >= j)
                        .map(|(p, _)| Some(p)),
                )
                .collect();
            // splice from the right-most anchor down so positions stay valid
            for (m_idx, anchor) in anchors.iter().enumerate().rev() {
                let count = zeta.count(j, cursor[j - 1] + m_idx + 1) as usize;
                if count == 0 {
                    continue;
                }
                let (at, flip) = match anchor {
                    None => (0, false),
                    Some(p) => (p + 1, seg[*p].0 == 1),
                };
                let mut unit: Vec<(u8, usize)> = Vec::with_capacity(2 * j);
                for half in 0..2 {
                    let bit = if (half == 0) != flip { 1 } else { 0 };
                    unit.extend((0..j).map(|v| (bit, v)));
                }
                for _ in 0..count {
                    seg.splice(at..at, unit.iter().copied());
                }
            }
            cursor[j - 1] += anchors.len();
        }
        eta.extend(seg.iter().map(|p| p.0));
        eta.push(0); // the record closing this excursion
    }
    BallConfig::new(eta, if i_max > 0 { Some(i_max) } else { None })
        .expect("reconstructed occupancy is 0/1 by construction")
}
