//! Independent ground truth: exhaustive enumeration of edge subsets on small
//! tori, cluster analysis via a union-find with winding potentials, and the
//! topological split of the partition function into `Z_0` and the
//! `Z_{j,n1}`.
//!
//! Winding is detected by carrying lifted coordinates: every edge stores its
//! displacement `(dx, dy)` on the universal cover, and a cycle closing with
//! a potential mismatch `m` winds the torus `m / N` times horizontally. The
//! number of branches `n1` of a percolating cluster is the gcd of its cycle
//! mismatches divided by `N`; a cluster whose cycles also wind vertically
//! (a degenerate cluster) automatically reports `n1 = 1` because cutting it
//! along a column leaves its strands connected through the vertical ring.
//!
//! The enumeration walks the subset tree depth-first, adding one edge on
//! entry and rolling it back on exit, so classification state is maintained
//! incrementally; the top of the tree is fanned out across threads.

use std::collections::BTreeMap;

use num_integer::Integer;
use thiserror::Error;

use crate::lattice::{LatticeKind, LatticeSpec};
use crate::poly::{rat, BivarPoly};

/// Hard cap: enumeration is 2^|E|.
pub const MAX_EDGES: usize = 28;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{edges} edges exceed the enumeration cap of {MAX_EDGES}")]
    TooLarge { edges: usize },
    /// Two percolating clusters in one configuration reported different
    /// branch counts, or a horizontal percolator coexists with a vertical
    /// one. Planarity forbids both; this must never fire.
    #[error("inconsistent cluster topology: {detail}")]
    InconsistentTopology { detail: String },
}

#[derive(Clone, Copy, Debug)]
pub struct Edge {
    pub u: u32,
    pub w: u32,
    /// Lifted displacement from `u` to `w`; cycles accumulate `N` per
    /// horizontal wind and `L` per vertical wind.
    pub dx: i32,
    pub dy: i32,
    /// True for horizontal/diagonal edges from column `N-1` back to column 0.
    pub crosses_seam: bool,
}

/// The `L x N` torus as an explicit multigraph; vertex id is `x * L + y`.
pub struct TorusGraph {
    pub lat: LatticeSpec,
    pub edges: Vec<Edge>,
}

impl TorusGraph {
    pub fn new(lat: LatticeSpec) -> Self {
        let (l, n) = (lat.width, lat.length);
        let vid = |x: usize, y: usize| (x * l + y) as u32;
        let mut edges = Vec::with_capacity(lat.num_edges());
        for x in 0..n {
            let xn = (x + 1) % n;
            let seam = x == n - 1;
            for y in 0..l {
                let yn = (y + 1) % l;
                edges.push(Edge { u: vid(x, y), w: vid(x, yn), dx: 0, dy: 1, crosses_seam: false });
                edges.push(Edge { u: vid(x, y), w: vid(xn, y), dx: 1, dy: 0, crosses_seam: seam });
                if lat.kind == LatticeKind::Triangular {
                    edges.push(Edge {
                        u: vid(x, y),
                        w: vid(xn, yn),
                        dx: 1,
                        dy: 1,
                        crosses_seam: seam,
                    });
                }
            }
        }
        Self { lat, edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.lat.num_vertices()
    }
}

// ---------------------------------------------------------------------------
// Union-find with winding potentials and rollback
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Undo {
    /// A union happened: detach `child` and restore the parent's bookkeeping.
    Union { child: u32, parent: u32, parent_gx: i32, parent_gy: i32 },
    /// A cycle closed inside one component: restore the root's gcds.
    Cycle { root: u32, gx: i32, gy: i32 },
}

/// Aggregate topology counters, maintained incrementally.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
struct Aggregates {
    clusters: usize,
    /// Number of horizontally percolating clusters.
    j: usize,
    /// Sum and sum of squares of n1 over percolating clusters; all n1 are
    /// equal iff j * n1_sq == n1_sum^2.
    n1_sum: i64,
    n1_sq: i64,
    /// Clusters winding vertically but not horizontally.
    vert_only: usize,
}

struct WindingUf {
    parent: Vec<u32>,
    size: Vec<u32>,
    px: Vec<i32>,
    py: Vec<i32>,
    /// Per-root gcd of horizontal/vertical cycle mismatches (raw lift
    /// units: multiples of N resp. L); 0 means no winding cycle yet.
    gx: Vec<i32>,
    gy: Vec<i32>,
    agg: Aggregates,
    length: i32,
    log: Vec<(Undo, Aggregates)>,
}

impl WindingUf {
    fn new(num_vertices: usize, length: usize) -> Self {
        Self {
            parent: (0..num_vertices as u32).collect(),
            size: vec![1; num_vertices],
            px: vec![0; num_vertices],
            py: vec![0; num_vertices],
            gx: vec![0; num_vertices],
            gy: vec![0; num_vertices],
            agg: Aggregates { clusters: num_vertices, j: 0, n1_sum: 0, n1_sq: 0, vert_only: 0 },
            length: length as i32,
            log: Vec::with_capacity(64),
        }
    }

    /// Root of `v` plus the lifted offsets of `v` relative to it. No path
    /// compression: rollback needs the tree intact.
    fn find(&self, v: u32) -> (u32, i32, i32) {
        let (mut at, mut ox, mut oy) = (v, 0, 0);
        while self.parent[at as usize] != at {
            ox += self.px[at as usize];
            oy += self.py[at as usize];
            at = self.parent[at as usize];
        }
        (at, ox, oy)
    }

    fn root_contribution(&self, root: u32) -> (usize, i64, usize) {
        let (gx, gy) = (self.gx[root as usize], self.gy[root as usize]);
        if gx != 0 {
            debug_assert_eq!(gx % self.length, 0);
            (1, (gx / self.length) as i64, 0)
        } else if gy != 0 {
            (0, 0, 1)
        } else {
            (0, 0, 0)
        }
    }

    fn remove_contribution(&mut self, root: u32) {
        let (j, n1, vo) = self.root_contribution(root);
        self.agg.j -= j;
        self.agg.n1_sum -= n1;
        self.agg.n1_sq -= n1 * n1;
        self.agg.vert_only -= vo;
    }

    fn add_contribution(&mut self, root: u32) {
        let (j, n1, vo) = self.root_contribution(root);
        self.agg.j += j;
        self.agg.n1_sum += n1;
        self.agg.n1_sq += n1 * n1;
        self.agg.vert_only += vo;
    }

    fn add_edge(&mut self, e: &Edge) {
        let snapshot = self.agg;
        let (ru, oxu, oyu) = self.find(e.u);
        let (rw, oxw, oyw) = self.find(e.w);
        if ru == rw {
            let mx = (oxu + e.dx - oxw).abs();
            let my = (oyu + e.dy - oyw).abs();
            self.log.push((
                Undo::Cycle { root: ru, gx: self.gx[ru as usize], gy: self.gy[ru as usize] },
                snapshot,
            ));
            self.remove_contribution(ru);
            self.gx[ru as usize] = self.gx[ru as usize].gcd(&mx);
            self.gy[ru as usize] = self.gy[ru as usize].gcd(&my);
            self.add_contribution(ru);
        } else {
            // Attach the smaller tree; orient the potential so that
            // pot(u) + d = pot(w) holds in the merged component.
            let (child, parent, cx, cy) = if self.size[ru as usize] < self.size[rw as usize] {
                (ru, rw, oxw - e.dx - oxu, oyw - e.dy - oyu)
            } else {
                (rw, ru, oxu + e.dx - oxw, oyu + e.dy - oyw)
            };
            self.log.push((
                Undo::Union {
                    child,
                    parent,
                    parent_gx: self.gx[parent as usize],
                    parent_gy: self.gy[parent as usize],
                },
                snapshot,
            ));
            self.remove_contribution(child);
            self.remove_contribution(parent);
            self.parent[child as usize] = parent;
            self.px[child as usize] = cx;
            self.py[child as usize] = cy;
            self.size[parent as usize] += self.size[child as usize];
            self.gx[parent as usize] = self.gx[parent as usize].gcd(&self.gx[child as usize]);
            self.gy[parent as usize] = self.gy[parent as usize].gcd(&self.gy[child as usize]);
            self.agg.clusters -= 1;
            self.add_contribution(parent);
        }
    }

    fn rollback(&mut self) {
        let (undo, agg) = self.log.pop().expect("rollback without matching add_edge");
        match undo {
            Undo::Cycle { root, gx, gy } => {
                self.gx[root as usize] = gx;
                self.gy[root as usize] = gy;
            }
            Undo::Union { child, parent, parent_gx, parent_gy } => {
                self.size[parent as usize] -= self.size[child as usize];
                self.gx[parent as usize] = parent_gx;
                self.gy[parent as usize] = parent_gy;
                self.parent[child as usize] = child;
                self.px[child as usize] = 0;
                self.py[child as usize] = 0;
                self.agg.clusters += 1;
            }
        }
        self.agg = agg;
    }

    /// `(clusters, j, n1)` after checking topological consistency.
    fn read(&self) -> Result<(usize, usize, usize), OracleError> {
        let a = &self.agg;
        if a.j > 0 {
            if a.j as i64 * a.n1_sq != a.n1_sum * a.n1_sum {
                return Err(OracleError::InconsistentTopology {
                    detail: format!("percolating clusters disagree on n1: {a:?}"),
                });
            }
            if a.vert_only > 0 {
                return Err(OracleError::InconsistentTopology {
                    detail: format!("horizontal and vertical-only percolators coexist: {a:?}"),
                });
            }
            Ok((a.clusters, a.j, (a.n1_sum / a.j as i64) as usize))
        } else {
            Ok((a.clusters, 0, 0))
        }
    }
}

// ---------------------------------------------------------------------------
// Classification of a single configuration
// ---------------------------------------------------------------------------

/// Topological classification of one edge subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterClassification {
    pub bonds: usize,
    pub clusters: usize,
    /// Number of horizontally percolating non-trivial clusters.
    pub j: usize,
    /// Common branch count of the percolating clusters (0 when `j = 0`).
    pub n1: usize,
    /// Whether the branch permutation was extracted and is a single
    /// `n1`-cycle; `None` when the piece structure was too tangled to read a
    /// permutation off (hooks re-crossing the seam).
    pub branch_cycle_ok: Option<bool>,
    /// Constant cyclic shift of the branch permutation, when extracted.
    pub shift: Option<usize>,
}

/// Classify one configuration given as an edge bitmask.
pub fn classify_config(g: &TorusGraph, subset: u64) -> Result<ClusterClassification, OracleError> {
    let mut uf = WindingUf::new(g.num_vertices(), g.lat.length);
    let mut bonds = 0;
    for (i, e) in g.edges.iter().enumerate() {
        if subset >> i & 1 == 1 {
            uf.add_edge(e);
            bonds += 1;
        }
    }
    let (clusters, j, n1) = uf.read()?;
    let (branch_cycle_ok, shift) = if j > 0 {
        match extract_branch_permutation(g, subset, j, n1) {
            Some((ok, k)) => (Some(ok), k),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    Ok(ClusterClassification { bonds, clusters, j, n1, branch_cycle_ok, shift })
}

/// Read the branch permutation off the pieces of the cut cylinder.
///
/// Pieces are the connected components after deleting seam edges; a branch
/// is a piece attached to present seam edges on both of its ends. Following
/// each branch through its forward seam edges yields the permutation.
/// Anything irregular (several forward targets, piece counts not matching
/// `j` and `n1`) returns `None` rather than guessing; the caller reports
/// such configurations as unrefined.
fn extract_branch_permutation(
    g: &TorusGraph,
    subset: u64,
    j: usize,
    n1: usize,
) -> Option<(bool, Option<usize>)> {
    let nv = g.num_vertices();
    let l = g.lat.width;
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    // Pieces: bulk edges only. Clusters: all edges (to group the pieces).
    let mut piece: Vec<usize> = (0..nv).collect();
    let mut cluster: Vec<usize> = (0..nv).collect();
    for (i, e) in g.edges.iter().enumerate() {
        if subset >> i & 1 == 0 {
            continue;
        }
        let (cu, cw) = (find(&mut cluster, e.u as usize), find(&mut cluster, e.w as usize));
        if cu != cw {
            cluster[cu] = cw;
        }
        if !e.crosses_seam {
            let (pu, pw) = (find(&mut piece, e.u as usize), find(&mut piece, e.w as usize));
            if pu != pw {
                piece[pu] = pw;
            }
        }
    }
    let mut fwd_target: Vec<Option<usize>> = vec![None; nv];
    let mut fwd_seen = vec![false; nv];
    let mut bwd_seen = vec![false; nv];
    for (i, e) in g.edges.iter().enumerate() {
        if subset >> i & 1 == 0 || !e.crosses_seam {
            continue;
        }
        let pu = find(&mut piece, e.u as usize);
        let pw = find(&mut piece, e.w as usize);
        fwd_seen[pu] = true;
        bwd_seen[pw] = true;
        match fwd_target[pu] {
            None => fwd_target[pu] = Some(pw),
            Some(t) if t == pw => {}
            Some(_) => return None,
        }
    }
    // Branches grouped per cluster.
    let mut per_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for p in 0..nv {
        if find(&mut piece, p) == p && fwd_seen[p] && bwd_seen[p] {
            let c = find(&mut cluster, p);
            per_cluster.entry(c).or_default().push(p);
        }
    }
    if per_cluster.len() != j {
        return None;
    }
    let mut common_shift: Option<usize> = None;
    for branches in per_cluster.values() {
        if branches.len() != n1 {
            return None;
        }
        // Order branches by their lowest row in column 0 (vertices 0..L-1).
        let mut ordered: Vec<(usize, usize)> = branches
            .iter()
            .map(|&b| {
                let min_row = (0..l).find(|&y| find(&mut piece, y) == b).unwrap_or(usize::MAX);
                (min_row, b)
            })
            .collect();
        if ordered.iter().any(|&(r, _)| r == usize::MAX) {
            return None;
        }
        ordered.sort_unstable();
        let mut shift: Option<usize> = None;
        for (pos, &(_, b)) in ordered.iter().enumerate() {
            let target = find(&mut piece, fwd_target[b]?);
            let tpos = ordered.iter().position(|&(_, bb)| bb == target)?;
            let k = (tpos + n1 - pos) % n1;
            match shift {
                None => shift = Some(k),
                Some(s) if s == k => {}
                Some(_) => return Some((false, None)),
            }
        }
        let k = shift?;
        // A single n1-cycle iff the shift is coprime with n1.
        if n1 > 1 && k.gcd(&n1) != 1 {
            return Some((false, Some(k)));
        }
        match common_shift {
            None => common_shift = Some(k),
            Some(s) if s == k => {}
            Some(_) => return Some((false, None)),
        }
    }
    Some((true, common_shift))
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration
// ---------------------------------------------------------------------------

/// Histograms of `(clusters, bonds)` per topological sector `(j, n1)`.
struct Accumulator {
    width: usize,
    n_max: usize,
    b_max: usize,
    /// `hist[j * (L+1) + n1][n * (b_max+1) + b]`.
    hist: Vec<Vec<u64>>,
    error: Option<OracleError>,
}

impl Accumulator {
    fn new(lat: &LatticeSpec) -> Self {
        let l = lat.width;
        let n_max = lat.num_vertices();
        let b_max = lat.num_edges();
        Self {
            width: l,
            n_max,
            b_max,
            hist: vec![vec![0; (n_max + 1) * (b_max + 1)]; (l + 1) * (l + 1)],
            error: None,
        }
    }

    #[inline]
    fn record(&mut self, uf: &WindingUf, bonds: usize) {
        match uf.read() {
            Ok((clusters, j, n1)) => {
                self.hist[j * (self.width + 1) + n1][clusters * (self.b_max + 1) + bonds] += 1;
            }
            Err(e) => {
                if self.error.is_none() {
                    self.error = Some(e);
                }
            }
        }
    }

    fn merge(mut self, other: Accumulator) -> Accumulator {
        for (a, b) in self.hist.iter_mut().zip(other.hist) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        if self.error.is_none() {
            self.error = other.error;
        }
        self
    }

    fn sector_poly(&self, j: usize, n1: usize) -> BivarPoly {
        let mut p = BivarPoly::zero();
        let h = &self.hist[j * (self.width + 1) + n1];
        for n in 0..=self.n_max {
            for b in 0..=self.b_max {
                let count = h[n * (self.b_max + 1) + b];
                if count > 0 {
                    p.add_term(n as u32, b as u32, &rat(count as i64));
                }
            }
        }
        p
    }

    fn into_data(self, lat: LatticeSpec) -> Result<OracleData, OracleError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let l = lat.width;
        let z0 = self.sector_poly(0, 0);
        let mut restricted = BTreeMap::new();
        let mut z = z0.clone();
        for j in 1..=l {
            for n1 in 1..=l {
                let p = self.sector_poly(j, n1);
                if !p.is_zero() {
                    z = &z + &p;
                    restricted.insert((j, n1), p);
                }
            }
        }
        Ok(OracleData { lat, z, z0, restricted })
    }
}

fn dfs(edges: &[Edge], depth: usize, bonds: usize, uf: &mut WindingUf, acc: &mut Accumulator) {
    if depth == edges.len() {
        acc.record(uf, bonds);
        return;
    }
    dfs(edges, depth + 1, bonds, uf, acc);
    uf.add_edge(&edges[depth]);
    dfs(edges, depth + 1, bonds + 1, uf, acc);
    uf.rollback();
}

/// The oracle's output: the full partition function and its topological
/// restrictions, all exact.
#[derive(Clone, Debug)]
pub struct OracleData {
    pub lat: LatticeSpec,
    /// Full partition function `sum_{E'} q^{n(E')} v^{b(E')}`.
    pub z: BivarPoly,
    /// Configurations with no NTC, or with NTC percolating only vertically.
    pub z0: BivarPoly,
    /// `(j, n1) -> Z_{j,n1}` for `j >= 1`; empty sectors are absent.
    pub restricted: BTreeMap<(usize, usize), BivarPoly>,
}

impl OracleData {
    /// `Z_{j,n1}`, zero when the sector is empty.
    pub fn z_restricted(&self, j: usize, n1: usize) -> BivarPoly {
        self.restricted.get(&(j, n1)).cloned().unwrap_or_else(BivarPoly::zero)
    }

    /// `Z_{j,n1>1} = sum_{n1 >= 2} Z_{j,n1}`.
    pub fn z_multi_branch(&self, j: usize) -> BivarPoly {
        let mut out = BivarPoly::zero();
        for ((jj, n1), p) in &self.restricted {
            if *jj == j && *n1 >= 2 {
                out = &out + p;
            }
        }
        out
    }

    /// `Z_j`: all configurations with exactly `j` horizontal percolators;
    /// `Z_0` is [`OracleData::z0`] by convention.
    pub fn z_j(&self, j: usize) -> BivarPoly {
        if j == 0 {
            return self.z0.clone();
        }
        let mut out = BivarPoly::zero();
        for ((jj, _), p) in &self.restricted {
            if *jj == j {
                out = &out + p;
            }
        }
        out
    }
}

fn default_prefix_bits(ne: usize) -> usize {
    // Leave ~2^17 leaves per task; cap the fan-out at 2^10 tasks.
    ne.saturating_sub(17).min(10)
}

fn run_prefix_task(g: &TorusGraph, prefix_bits: usize, mask: u64) -> Accumulator {
    let mut uf = WindingUf::new(g.num_vertices(), g.lat.length);
    let mut acc = Accumulator::new(&g.lat);
    let mut bonds = 0;
    for i in 0..prefix_bits {
        if mask >> i & 1 == 1 {
            uf.add_edge(&g.edges[i]);
            bonds += 1;
        }
    }
    dfs(&g.edges[prefix_bits..], 0, bonds, &mut uf, &mut acc);
    acc
}

/// Enumerate all edge subsets and classify them; fans the subset tree out
/// across threads when the `parallel` feature is enabled (the default).
pub fn enumerate(g: &TorusGraph) -> Result<OracleData, OracleError> {
    let ne = g.edges.len();
    if ne > MAX_EDGES {
        return Err(OracleError::TooLarge { edges: ne });
    }
    let prefix_bits = default_prefix_bits(ne);
    let tasks: u64 = 1 << prefix_bits;

    #[cfg(feature = "parallel")]
    let merged = {
        use rayon::prelude::*;
        (0..tasks)
            .into_par_iter()
            .map(|mask| run_prefix_task(g, prefix_bits, mask))
            .reduce_with(Accumulator::merge)
            .expect("at least one task")
    };
    #[cfg(not(feature = "parallel"))]
    let merged = {
        let mut it = (0..tasks).map(|mask| run_prefix_task(g, prefix_bits, mask));
        let first = it.next().expect("at least one task");
        it.fold(first, Accumulator::merge)
    };

    merged.into_data(g.lat)
}

/// Single-threaded enumeration, independent of the thread pool. Kept as the
/// reference path for the parallel-vs-sequential benchmarks and tests.
pub fn enumerate_sequential(g: &TorusGraph) -> Result<OracleData, OracleError> {
    let ne = g.edges.len();
    if ne > MAX_EDGES {
        return Err(OracleError::TooLarge { edges: ne });
    }
    let mut uf = WindingUf::new(g.num_vertices(), g.lat.length);
    let mut acc = Accumulator::new(&g.lat);
    dfs(&g.edges, 0, 0, &mut uf, &mut acc);
    acc.into_data(g.lat)
}

/// Refined enumeration keyed by the branch-permutation shift: maps
/// `(j, n1, shift)` to the restricted partition function of the cleanly
/// classified configurations realizing that cyclic shift. The second return
/// value collects percolating configurations whose permutation could not be
/// read off the piece structure.
pub fn enumerate_by_class(
    g: &TorusGraph,
) -> Result<(BTreeMap<(usize, usize, usize), BivarPoly>, BivarPoly), OracleError> {
    let ne = g.edges.len();
    if ne > 22 {
        return Err(OracleError::TooLarge { edges: ne });
    }
    let mut by_class: BTreeMap<(usize, usize, usize), BivarPoly> = BTreeMap::new();
    let mut unrefined = BivarPoly::zero();
    for subset in 0u64..1 << ne {
        let c = classify_config(g, subset)?;
        if c.j == 0 {
            continue;
        }
        let term = BivarPoly::monomial(c.clusters as u32, c.bonds as u32, rat(1));
        match (c.branch_cycle_ok, c.shift) {
            (Some(true), Some(k)) => {
                let entry = by_class.entry((c.j, c.n1, k)).or_insert_with(BivarPoly::zero);
                *entry = &*entry + &term;
            }
            _ => unrefined = &unrefined + &term,
        }
    }
    Ok((by_class, unrefined))
}

/// Plain Fortuin-Kasteleyn sum over subsets of an arbitrary multigraph
/// (loops and parallel edges allowed). Used for deletion-contraction checks
/// independent of the torus structure.
pub fn enumerate_z_general(num_vertices: usize, edges: &[(usize, usize)]) -> BivarPoly {
    assert!(edges.len() <= MAX_EDGES);
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut z = BivarPoly::zero();
    for subset in 0u64..1 << edges.len() {
        let mut parent: Vec<usize> = (0..num_vertices).collect();
        let mut clusters = num_vertices;
        let mut bonds = 0;
        for (i, &(u, w)) in edges.iter().enumerate() {
            if subset >> i & 1 == 1 {
                bonds += 1;
                let (ru, rw) = (find(&mut parent, u), find(&mut parent, w));
                if ru != rw {
                    parent[ru] = rw;
                    clusters -= 1;
                }
            }
        }
        z.add_term(clusters as u32, bonds as u32, &rat(1));
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ratio;

    #[test]
    fn empty_full_and_ring_configs() {
        let g = TorusGraph::new(LatticeSpec::square(3, 3));
        let empty = classify_config(&g, 0).unwrap();
        assert_eq!((empty.bonds, empty.clusters, empty.j), (0, 9, 0));

        let full = classify_config(&g, (1 << g.edges.len()) - 1).unwrap();
        assert_eq!((full.clusters, full.j, full.n1), (1, 1, 1));

        // One full horizontal ring at row 1.
        let mut mask = 0u64;
        for (i, e) in g.edges.iter().enumerate() {
            if e.dx == 1 && e.u % 3 == 1 {
                mask |= 1 << i;
            }
        }
        let ring = classify_config(&g, mask).unwrap();
        assert_eq!((ring.bonds, ring.j, ring.n1), (3, 1, 1));
        assert_eq!(ring.clusters, 9 - 3 + 1);
        assert_eq!(ring.branch_cycle_ok, Some(true));
        assert_eq!(ring.shift, Some(0));

        // A vertical ring percolates only vertically: counts as j = 0.
        let mut mask = 0u64;
        for (i, e) in g.edges.iter().enumerate() {
            if e.dy == 1 && e.dx == 0 && e.u / 3 == 0 {
                mask |= 1 << i;
            }
        }
        let vring = classify_config(&g, mask).unwrap();
        assert_eq!(vring.j, 0);
    }

    #[test]
    fn z_specializations() {
        let g = TorusGraph::new(LatticeSpec::square(2, 2));
        let data = enumerate(&g).unwrap();
        let sites = 4u32;
        let ne = g.edges.len() as u32;
        // Z(q, 0) = q^{LN}: only the empty subset has v-degree 0.
        let v0_terms: Vec<_> = data.z.iter().filter(|(&(_, j), _)| j == 0).collect();
        assert_eq!(v0_terms.len(), 1);
        assert_eq!(*v0_terms[0].0, (sites, 0));
        // Coefficient of v^{|E|} is q (full subset, one cluster).
        assert_eq!(data.z.coeff(1, ne), rat(1));
        // Z(1, v) = (1+v)^{|E|}.
        let q1 = data.z.eval(&rat(1), &ratio(1, 2));
        assert_eq!(q1, ratio(3, 2).pow(ne as i32));
    }

    #[test]
    fn partition_property_and_divisibility() {
        for lat in [
            LatticeSpec::square(2, 3),
            LatticeSpec::square(3, 2),
            LatticeSpec::triangular(2, 2),
        ] {
            let g = TorusGraph::new(lat);
            let data = enumerate(&g).unwrap();
            let mut total = data.z0.clone();
            for ((j, _n1), p) in &data.restricted {
                // Each percolating sector is divisible by q^j.
                assert!(p.div_exact_q_power(*j as u32).is_ok(), "q^{j} divisibility on {lat}");
                total = &total + p;
            }
            assert_eq!(total, data.z, "partition property on {lat}");
        }
    }

    #[test]
    fn sequential_matches_parallel() {
        let g = TorusGraph::new(LatticeSpec::triangular(2, 2));
        let a = enumerate(&g).unwrap();
        let b = enumerate_sequential(&g).unwrap();
        assert_eq!(a.z, b.z);
        assert_eq!(a.z0, b.z0);
        assert_eq!(a.restricted, b.restricted);
    }

    #[test]
    fn square_lattice_has_no_multibranch_top_sector() {
        // j * n1 = L with n1 > 1 is impossible on the square lattice.
        let g = TorusGraph::new(LatticeSpec::square(4, 2));
        let data = enumerate(&g).unwrap();
        assert!(data.z_restricted(2, 2).is_zero());
        assert!(data.z_restricted(1, 4).is_zero());
        // The triangular lattice realizes multi-branch sectors.
        let g = TorusGraph::new(LatticeSpec::triangular(4, 2));
        let data = enumerate(&g).unwrap();
        assert!(!data.z_restricted(2, 2).is_zero());
        assert!(!data.z_restricted(1, 4).is_zero());
    }

    #[test]
    fn observed_shifts_are_admissible() {
        let g = TorusGraph::new(LatticeSpec::triangular(3, 2));
        let (by_class, unrefined) = enumerate_by_class(&g).unwrap();
        assert!(!by_class.is_empty());
        for (j, n1, k) in by_class.keys() {
            assert!(j * n1 <= 3);
            if *n1 > 1 {
                assert_eq!(k.gcd(n1), 1, "shift {k} with n1 = {n1}");
            }
        }
        // Refined sectors plus the unrefined remainder cover exactly the
        // percolating part of Z.
        let data = enumerate(&g).unwrap();
        let mut percolating = BivarPoly::zero();
        for p in data.restricted.values() {
            percolating = &percolating + p;
        }
        let mut sum = unrefined;
        for p in by_class.values() {
            sum = &sum + p;
        }
        assert_eq!(sum, percolating);
    }

    #[test]
    fn deletion_contraction_on_random_graphs() {
        // Z(G) = Z(G-e) + v Z(G/e) for the FK polynomial, over a
        // deterministic family of small pseudo-random multigraphs.
        let mut seed = 0x243f6a8885a308d3u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for case in 0..20 {
            let nv = 3 + (next() % 3) as usize;
            let ne = 4 + (next() % 5) as usize;
            let edges: Vec<(usize, usize)> = (0..ne)
                .map(|_| ((next() % nv as u64) as usize, (next() % nv as u64) as usize))
                .collect();
            let z = enumerate_z_general(nv, &edges);
            let Some(pos) = edges.iter().position(|&(u, w)| u != w) else {
                continue;
            };
            let (eu, ew) = edges[pos];
            let mut deleted = edges.clone();
            deleted.remove(pos);
            let z_del = enumerate_z_general(nv, &deleted);
            let contracted: Vec<(usize, usize)> = deleted
                .iter()
                .map(|&(u, w)| {
                    let m = |x: usize| if x == eu { ew } else { x };
                    (m(u), m(w))
                })
                .collect();
            // Contraction leaves one vertex label unused, which multiplies
            // Z(G/e) by exactly q; divide it back out.
            let z_con = enumerate_z_general(nv, &contracted).div_exact_q_power(1).unwrap();
            let rhs = &z_del + &(&BivarPoly::v() * &z_con);
            assert_eq!(z, rhs, "deletion-contraction failed on case {case}");
        }
    }
}
