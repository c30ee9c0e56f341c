//! Transfer-matrix basis states: planar connectivity patterns of the `L`
//! periodic time-slice points with `l` marked blocks, and the column-update
//! machinery that evolves them.
//!
//! A marked block records a bridge: a connectivity component attached to the
//! initial time slice. Marks carry distinguishable labels `0..l`, so the
//! level-`l` space has dimension `l! * n_tor(L, l)`.
//!
//! There is no simple static criterion for which mark placements are
//! realizable on the torus (marks on mutually separated blocks can be
//! obstructed by planarity), so the space is generated operationally: the
//! closure of the all-singleton seed states under the level-preserving
//! column update of the generic (triangular) lattice and under mark
//! permutations. The closure size is checked against the published
//! dimension formula and generation fails loudly on any disagreement.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::lattice::LatticeKind;

const DEAD: u8 = u8::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    /// The generated closure disagrees with `l! * n_tor(L, l)`. This would
    /// mean the operational realizability definition and the published count
    /// diverge; it must be reported, never papered over.
    #[error("state closure for L={width}, l={level} has {generated} states, formula gives {expected}")]
    CountMismatch {
        width: usize,
        level: usize,
        generated: usize,
        expected: usize,
    },
}

/// Binomial coefficient as u64 (small arguments only).
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    (num / den) as u64
}

/// Number of level-`l` connectivity states with indistinguishable marks on a
/// width-`L` torus slice.
pub fn n_tor(width: usize, level: usize) -> u64 {
    let w = width as u64;
    if level > width {
        return 0;
    }
    match level {
        0 => binomial(2 * w, w) / (w + 1),
        1 => binomial(2 * w - 1, w - 1),
        l => binomial(2 * w, w - l as u64),
    }
}

/// A connectivity state: partition of points `0..L-1` on the slice circle,
/// with `l` distinguishable marks on distinct blocks.
///
/// Canonical form: block ids are assigned by first occurrence scanning the
/// points in order; `marks[m]` is the block id carrying mark label `m`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct MarkedState {
    blocks: Vec<u8>,
    marks: Vec<u8>,
}

impl MarkedState {
    /// Build from an arbitrary block labelling; relabels to canonical form.
    pub fn new(blocks: &[u8], marks: &[u8]) -> Self {
        let mut map: HashMap<u8, u8> = HashMap::new();
        let mut canon = Vec::with_capacity(blocks.len());
        for &b in blocks {
            let next = map.len() as u8;
            canon.push(*map.entry(b).or_insert(next));
        }
        let marks = marks.iter().map(|m| map[m]).collect();
        Self { blocks: canon, marks }
    }

    pub fn width(&self) -> usize {
        self.blocks.len()
    }

    pub fn level(&self) -> usize {
        self.marks.len()
    }

    pub fn blocks(&self) -> &[u8] {
        &self.blocks
    }

    pub fn marks(&self) -> &[u8] {
        &self.marks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.iter().map(|&b| b as usize + 1).max().unwrap_or(0)
    }

    /// Injective, deterministic byte encoding.
    pub fn canonical_encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.blocks.len() + self.marks.len() + 2);
        out.push(self.blocks.len() as u8);
        out.push(self.marks.len() as u8);
        out.extend_from_slice(&self.blocks);
        out.extend_from_slice(&self.marks);
        out
    }

    /// Relabel marks by a permutation: the mark labelled `m` becomes
    /// `perm[m]`. The partition is unchanged.
    pub fn apply_mark_permutation(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.marks.len());
        let mut marks = vec![0u8; self.marks.len()];
        for (m, &block) in self.marks.iter().enumerate() {
            marks[perm[m]] = block;
        }
        Self { blocks: self.blocks.clone(), marks }
    }

    /// A state is standard when mark labels increase with the first point of
    /// their block; every state is a unique mark permutation of a standard
    /// one.
    pub fn is_standard(&self) -> bool {
        self.marks.windows(2).all(|w| {
            let a = self.blocks.iter().position(|&b| b == w[0]);
            let b = self.blocks.iter().position(|&b| b == w[1]);
            a < b
        })
    }
}

// ---------------------------------------------------------------------------
// Column update plan
// ---------------------------------------------------------------------------

/// One elementary step of a column update, acting on working slots.
#[derive(Clone, Copy, Debug)]
pub(crate) enum ElemOp {
    /// Create a fresh singleton point in `slot`.
    New { slot: usize },
    /// Lattice bond between the points in two slots: absent (weight 1) or
    /// present (weight `v`, blocks joined). A join of two distinct marked
    /// blocks would lower the level and is dropped.
    Bond { a: usize, b: usize },
    /// The point in `slot` leaves the slice. If its block becomes empty an
    /// unmarked block contributes a completed cluster (weight `q`); a marked
    /// block dying would lower the level, so the term is dropped.
    Kill { slot: usize },
}

/// Precomputed op sequence for one column of a given lattice, plus the slot
/// layout of the new points afterwards.
#[derive(Clone, Debug)]
pub struct ColumnPlan {
    pub(crate) ops: Vec<ElemOp>,
    pub(crate) final_order: Vec<usize>,
    pub width: usize,
    pub num_slots: usize,
}

impl ColumnPlan {
    /// Ops for one column move: `L` horizontal bonds (old row y to new row
    /// y), the vertical ring on the new column, and for the triangular
    /// lattice one diagonal per row from old `y` to new `y+1 (mod L)`. Old
    /// points retire as soon as every bond touching them has been emitted.
    pub fn new(kind: LatticeKind, width: usize) -> Self {
        let l = width;
        assert!(l >= 2);
        let num_slots = l + 2;
        let mut ops = Vec::new();
        let mut new_slot = vec![usize::MAX; l];
        match kind {
            LatticeKind::Square => {
                let mut free = l;
                for y in 0..l {
                    ops.push(ElemOp::New { slot: free });
                    ops.push(ElemOp::Bond { a: free, b: y });
                    ops.push(ElemOp::Kill { slot: y });
                    new_slot[y] = free;
                    free = y;
                }
            }
            LatticeKind::Triangular => {
                // Old row y must stay alive until new row y+1 exists, because
                // of the diagonal bond between them.
                ops.push(ElemOp::New { slot: l });
                ops.push(ElemOp::Bond { a: l, b: 0 });
                new_slot[0] = l;
                let mut free = l + 1;
                for y in 1..l {
                    ops.push(ElemOp::New { slot: free });
                    ops.push(ElemOp::Bond { a: free, b: y }); // horizontal
                    ops.push(ElemOp::Bond { a: free, b: y - 1 }); // diagonal
                    ops.push(ElemOp::Kill { slot: y - 1 });
                    new_slot[y] = free;
                    free = y - 1;
                }
                // Wrapping diagonal from old row L-1 to new row 0.
                ops.push(ElemOp::Bond { a: new_slot[0], b: l - 1 });
                ops.push(ElemOp::Kill { slot: l - 1 });
            }
        }
        for y in 0..l {
            ops.push(ElemOp::Bond { a: new_slot[y], b: new_slot[(y + 1) % l] });
        }
        Self { ops, final_order: new_slot, width: l, num_slots }
    }
}

// ---------------------------------------------------------------------------
// Evolution engine
// ---------------------------------------------------------------------------

/// Working state during a column sweep: a partition of the alive slots.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub(crate) struct Work {
    /// Block id per slot, `DEAD` for dead slots; canonical by first
    /// occurrence over alive slots.
    blocks: Vec<u8>,
    marks: Vec<u8>,
}

impl Work {
    fn start(state: &MarkedState, num_slots: usize) -> Self {
        let mut blocks = vec![DEAD; num_slots];
        blocks[..state.width()].copy_from_slice(&state.blocks);
        Self { blocks, marks: state.marks.clone() }
    }

    fn canonicalize(&mut self) {
        let mut map = [DEAD; 256];
        let mut next = 0u8;
        for b in self.blocks.iter_mut() {
            if *b == DEAD {
                continue;
            }
            if map[*b as usize] == DEAD {
                map[*b as usize] = next;
                next += 1;
            }
            *b = map[*b as usize];
        }
        for m in self.marks.iter_mut() {
            *m = map[*m as usize];
        }
    }

    fn is_marked(&self, block: u8) -> bool {
        self.marks.contains(&block)
    }

    fn finish(&self, order: &[usize]) -> MarkedState {
        let blocks: Vec<u8> = order.iter().map(|&s| self.blocks[s]).collect();
        debug_assert!(blocks.iter().all(|&b| b != DEAD));
        MarkedState::new(&blocks, &self.marks)
    }
}

/// Weight of an evolution path: the accumulated powers of `q` (completed
/// clusters) and `v` (occupied bonds).
pub(crate) type Monomial = (u32, u32);

/// Apply one column update, keeping exact path weights.
///
/// Returns the aggregated image: for each reachable final state, the
/// multiset of `(q_power, v_power)` path weights with multiplicities.
pub(crate) fn evolve_weighted(
    plan: &ColumnPlan,
    state: &MarkedState,
) -> HashMap<MarkedState, HashMap<Monomial, u64>> {
    let mut terms: HashMap<Work, HashMap<Monomial, u64>> = HashMap::new();
    terms.insert(Work::start(state, plan.num_slots), HashMap::from([((0, 0), 1)]));
    for op in &plan.ops {
        let mut next: HashMap<Work, HashMap<Monomial, u64>> = HashMap::new();
        let mut emit = |w: Work, weights: &HashMap<Monomial, u64>, dq: u32, dv: u32| {
            let slot = next.entry(w).or_default();
            for (&(a, b), &count) in weights {
                *slot.entry((a + dq, b + dv)).or_insert(0) += count;
            }
        };
        for (work, weights) in &terms {
            match *op {
                ElemOp::New { slot } => {
                    let mut w = work.clone();
                    debug_assert_eq!(w.blocks[slot], DEAD);
                    let fresh = w.blocks.iter().filter(|&&b| b != DEAD).max().map_or(0, |&m| m + 1);
                    w.blocks[slot] = fresh;
                    w.canonicalize();
                    emit(w, weights, 0, 0);
                }
                ElemOp::Bond { a, b } => {
                    // Absent bond.
                    emit(work.clone(), weights, 0, 0);
                    // Present bond.
                    let (ba, bb) = (work.blocks[a], work.blocks[b]);
                    debug_assert!(ba != DEAD && bb != DEAD);
                    if ba == bb {
                        emit(work.clone(), weights, 0, 1);
                    } else if work.is_marked(ba) && work.is_marked(bb) {
                        // Joining two bridges lowers the level: dropped.
                    } else {
                        let mut w = work.clone();
                        let (keep, gone) = (ba.min(bb), ba.max(bb));
                        for blk in w.blocks.iter_mut() {
                            if *blk == gone {
                                *blk = keep;
                            }
                        }
                        for m in w.marks.iter_mut() {
                            if *m == gone {
                                *m = keep;
                            }
                        }
                        w.canonicalize();
                        emit(w, weights, 0, 1);
                    }
                }
                ElemOp::Kill { slot } => {
                    let block = work.blocks[slot];
                    debug_assert!(block != DEAD);
                    let mut w = work.clone();
                    w.blocks[slot] = DEAD;
                    let survives = w.blocks.iter().any(|&b| b == block);
                    if survives {
                        w.canonicalize();
                        emit(w, weights, 0, 0);
                    } else if work.is_marked(block) {
                        // A bridge died: belongs to a lower level, dropped.
                    } else {
                        // A completed trivial cluster.
                        w.canonicalize();
                        emit(w, weights, 1, 0);
                    }
                }
            }
        }
        terms = next;
    }
    let mut out: HashMap<MarkedState, HashMap<Monomial, u64>> = HashMap::new();
    for (work, weights) in terms {
        let state = work.finish(&plan.final_order);
        let slot = out.entry(state).or_default();
        for (mono, count) in weights {
            *slot.entry(mono).or_insert(0) += count;
        }
    }
    out
}

/// Reachable successor states under one column update (weights dropped).
pub(crate) fn evolve_states(plan: &ColumnPlan, state: &MarkedState) -> HashSet<MarkedState> {
    let mut terms: HashSet<Work> = HashSet::new();
    terms.insert(Work::start(state, plan.num_slots));
    for op in &plan.ops {
        let mut next: HashSet<Work> = HashSet::new();
        for work in &terms {
            match *op {
                ElemOp::New { slot } => {
                    let mut w = work.clone();
                    let fresh = w.blocks.iter().filter(|&&b| b != DEAD).max().map_or(0, |&m| m + 1);
                    w.blocks[slot] = fresh;
                    w.canonicalize();
                    next.insert(w);
                }
                ElemOp::Bond { a, b } => {
                    next.insert(work.clone());
                    let (ba, bb) = (work.blocks[a], work.blocks[b]);
                    if ba == bb {
                        // Join within a block changes nothing.
                    } else if work.is_marked(ba) && work.is_marked(bb) {
                        // Dropped.
                    } else {
                        let mut w = work.clone();
                        let (keep, gone) = (ba.min(bb), ba.max(bb));
                        for blk in w.blocks.iter_mut() {
                            if *blk == gone {
                                *blk = keep;
                            }
                        }
                        for m in w.marks.iter_mut() {
                            if *m == gone {
                                *m = keep;
                            }
                        }
                        w.canonicalize();
                        next.insert(w);
                    }
                }
                ElemOp::Kill { slot } => {
                    let block = work.blocks[slot];
                    let mut w = work.clone();
                    w.blocks[slot] = DEAD;
                    let survives = w.blocks.iter().any(|&b| b == block);
                    if survives || !work.is_marked(block) {
                        w.canonicalize();
                        next.insert(w);
                    }
                }
            }
        }
        terms = next;
    }
    terms.into_iter().map(|w| w.finish(&plan.final_order)).collect()
}

// ---------------------------------------------------------------------------
// State space
// ---------------------------------------------------------------------------

/// The level-`l` state space for width `L`: an indexed list of all
/// `l! * n_tor(L, l)` marked states, closed under the column update and
/// under mark permutations.
pub struct StateSpace {
    pub width: usize,
    pub level: usize,
    pub states: Vec<MarkedState>,
    index: HashMap<Vec<u8>, usize>,
    /// Indices of the standard (mark-ordered) states, one per orbit.
    pub standard: Vec<usize>,
}

impl StateSpace {
    /// Generate the space as the closure of the all-singleton seeds under
    /// the triangular column update and mark permutations.
    pub fn generate(width: usize, level: usize) -> Result<Self, StateError> {
        assert!(level <= width && width <= 6, "generate_states needs 0 <= l <= L <= 6");
        let plan = ColumnPlan::new(LatticeKind::Triangular, width);
        let perms = crate::symgroup::permutations(level);
        let mut seen: HashSet<MarkedState> = HashSet::new();
        let mut queue: VecDeque<MarkedState> = VecDeque::new();

        // Seeds: all-singleton partition, marks on every l-subset of points
        // in every label order. These are realizable by a single column with
        // horizontal bonds at the marked rows only.
        let singleton: Vec<u8> = (0..width as u8).collect();
        let mut choose = Vec::new();
        subsets(width, level, &mut choose, &mut |subset| {
            for perm in &perms {
                let marks: Vec<u8> = perm.iter().map(|&i| subset[i]).collect();
                let s = MarkedState::new(&singleton, &marks);
                if seen.insert(s.clone()) {
                    queue.push_back(s);
                }
            }
        });

        while let Some(state) = queue.pop_front() {
            for succ in evolve_states(&plan, &state) {
                if seen.insert(succ.clone()) {
                    queue.push_back(succ.clone());
                }
            }
            for perm in &perms {
                let permuted = state.apply_mark_permutation(perm);
                if seen.insert(permuted.clone()) {
                    queue.push_back(permuted);
                }
            }
        }

        let expected =
            (crate::symgroup::factorial(level) * n_tor(width, level)) as usize;
        if seen.len() != expected {
            return Err(StateError::CountMismatch {
                width,
                level,
                generated: seen.len(),
                expected,
            });
        }

        let mut states: Vec<MarkedState> = seen.into_iter().collect();
        states.sort();
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.canonical_encode(), i))
            .collect();
        let standard = states
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_standard())
            .map(|(i, _)| i)
            .collect();
        Ok(Self { width, level, states, index, standard })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &MarkedState) -> usize {
        self.index[&state.canonical_encode()]
    }
}

fn subsets(n: usize, k: usize, current: &mut Vec<u8>, f: &mut impl FnMut(&[u8])) {
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<u8>, f: &mut impl FnMut(&[u8])) {
        if current.len() == k {
            f(current);
            return;
        }
        for i in start..n {
            current.push(i as u8);
            rec(i + 1, n, k, current, f);
            current.pop();
        }
    }
    rec(0, n, k, current, f);
}

/// Convenience wrapper used by the CLI and tests.
pub fn generate_states(width: usize, level: usize) -> Result<StateSpace, StateError> {
    StateSpace::generate(width, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symgroup::{factorial, permutations};

    #[test]
    fn n_tor_values() {
        assert_eq!(n_tor(4, 0), 14);
        assert_eq!(n_tor(4, 1), 35);
        assert_eq!(n_tor(4, 2), 28);
        assert_eq!(n_tor(4, 3), 8);
        assert_eq!(n_tor(4, 4), 1);
        assert_eq!(n_tor(2, 2), 1);
        assert_eq!(n_tor(5, 7), 0);
    }

    #[test]
    fn canonical_encoding_ignores_block_labels() {
        let a = MarkedState::new(&[0, 1, 0, 2], &[1]);
        let b = MarkedState::new(&[5, 3, 5, 7], &[3]);
        assert_eq!(a.canonical_encode(), b.canonical_encode());
        // Mark swaps are distinguishable.
        let c = MarkedState::new(&[0, 1, 0, 2], &[1, 2]);
        let d = MarkedState::new(&[0, 1, 0, 2], &[2, 1]);
        assert_ne!(c.canonical_encode(), d.canonical_encode());
    }

    #[test]
    fn mark_permutation_is_group_action() {
        let s = MarkedState::new(&[0, 1, 2, 3], &[0, 2, 3]);
        let id = vec![0, 1, 2];
        assert_eq!(s.apply_mark_permutation(&id), s);
        let swap = vec![1, 0, 2];
        assert_eq!(s.apply_mark_permutation(&swap).apply_mark_permutation(&swap), s);
        let p = vec![2, 0, 1];
        let pinv = crate::symgroup::invert_perm(&p);
        assert_eq!(s.apply_mark_permutation(&p).apply_mark_permutation(&pinv), s);
    }

    #[test]
    fn state_counts_small() {
        // Counts pinned by the dimension formula; 14/35/56 are the width-4
        // anchors.
        assert_eq!(generate_states(4, 0).unwrap().len(), 14);
        assert_eq!(generate_states(4, 1).unwrap().len(), 35);
        assert_eq!(generate_states(4, 2).unwrap().len(), 56);
        assert_eq!(generate_states(2, 1).unwrap().len(), 3);
        assert_eq!(generate_states(3, 2).unwrap().len(), 12);
    }

    #[test]
    fn spaces_closed_under_square_moves_and_perms() {
        for (w, l) in [(2, 1), (3, 1), (3, 2), (4, 2), (4, 4)] {
            let space = StateSpace::generate(w, l).unwrap();
            let square = ColumnPlan::new(LatticeKind::Square, w);
            let perms = permutations(l);
            for s in &space.states {
                for succ in evolve_states(&square, s) {
                    assert!(space.index.contains_key(&succ.canonical_encode()));
                }
                for p in &perms {
                    let ps = s.apply_mark_permutation(p);
                    assert!(space.index.contains_key(&ps.canonical_encode()));
                }
            }
        }
    }

    #[test]
    fn standard_states_cover_orbits() {
        let space = StateSpace::generate(4, 2).unwrap();
        assert_eq!(space.standard.len() as u64, n_tor(4, 2));
        // Every state is a unique permutation of a unique standard state.
        let perms = permutations(2);
        let mut reached = HashSet::new();
        for &si in &space.standard {
            for p in &perms {
                assert!(reached.insert(space.states[si].apply_mark_permutation(p)));
            }
        }
        assert_eq!(reached.len(), space.len());
    }

    #[test]
    fn closure_count_matches_formula_all_small() {
        for width in 2..=5 {
            for level in 0..=width {
                let space = generate_states(width, level).unwrap();
                assert_eq!(
                    space.len() as u64,
                    factorial(level) * n_tor(width, level),
                    "count at L={width}, l={level}"
                );
                // Encoding is injective across the space by construction of
                // the index; double-check.
                let codes: HashSet<_> =
                    space.states.iter().map(|s| s.canonical_encode()).collect();
                assert_eq!(codes.len(), space.len());
            }
        }
    }
}
