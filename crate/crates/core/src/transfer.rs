//! Level-`l` transfer operators on marked connectivity states and the
//! character traces `K_l`, `K_{l,P}`, `K_{l,C}`, `K_{l,D}`.
//!
//! The operator for one column is assembled bond by bond (see
//! [`crate::connstates`]); joins that would merge two marked blocks and
//! deaths of marked blocks belong to lower levels of the block-trigonal full
//! transfer matrix and are simply dropped, which leaves exactly the
//! level-preserving diagonal block. Everything here is exact except
//! [`eigen_sample`], the one floating-point entry point in the crate.

use std::collections::HashMap;

use nalgebra::{Complex, DMatrix};
use thiserror::Error;

use crate::connstates::{evolve_weighted, ColumnPlan, StateSpace};
use crate::lattice::LatticeSpec;
use crate::poly::{rat, BivarPoly};
use crate::symgroup::{char_table, cycle_type, factorial, permutations, ClassLabel, YoungDiagram};

pub type Complex64 = Complex<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    /// Eigenvalues of a `T_{l,D}` block failed to group into the
    /// `dim(D)`-fold multiplets guaranteed by Schur's lemma, or a projector
    /// sanity check failed.
    #[error("ill-conditioned eigenproblem at level {level}, irrep {irrep}: {detail}")]
    IllConditioned {
        level: usize,
        irrep: String,
        detail: String,
    },
}

/// The level-preserving one-column transfer operator `T_l`, stored as sparse
/// columns of exact polynomials over the level-`l` state space.
pub struct LevelOperator {
    pub lat: LatticeSpec,
    pub level: usize,
    pub space: StateSpace,
    /// `cols[src]` lists `(dst, entry)` with entry a polynomial in `v` with
    /// nonnegative integer coefficients times powers of `q`.
    pub cols: Vec<Vec<(usize, BivarPoly)>>,
}

/// Build `T_l` for one column of the given lattice.
pub fn build_column_operator(lat: LatticeSpec, level: usize) -> LevelOperator {
    let space = StateSpace::generate(lat.width, level)
        .expect("state closure disagrees with the dimension formula");
    let plan = ColumnPlan::new(lat.kind, lat.width);
    let cols = space
        .states
        .iter()
        .map(|s| {
            let mut col: Vec<(usize, BivarPoly)> = evolve_weighted(&plan, s)
                .into_iter()
                .map(|(dst, weights)| {
                    let mut p = BivarPoly::zero();
                    for ((qp, vp), count) in weights {
                        p.add_term(qp, vp, &rat(count as i64));
                    }
                    (space.index_of(&dst), p)
                })
                .collect();
            col.sort_by_key(|&(dst, _)| dst);
            col
        })
        .collect();
    LevelOperator { lat, level, space, cols }
}

impl LevelOperator {
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    /// `out = T input`.
    pub fn apply(&self, input: &[BivarPoly]) -> Vec<BivarPoly> {
        let mut out = vec![BivarPoly::zero(); self.dim()];
        for (src, coeff) in input.iter().enumerate() {
            if coeff.is_zero() {
                continue;
            }
            for (dst, entry) in &self.cols[src] {
                out[*dst] = &out[*dst] + &(entry * coeff);
            }
        }
        out
    }

    /// Dense float matrix of the operator at `(q0, v0)`; `m[dst, src]`.
    pub fn to_f64(&self, q0: f64, v0: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (src, col) in self.cols.iter().enumerate() {
            for (dst, entry) in col {
                m[(*dst, src)] = entry.eval_f64(q0, v0);
            }
        }
        m
    }

    /// Index permutation of the state space induced by a mark permutation.
    pub fn state_permutation(&self, perm: &[usize]) -> Vec<usize> {
        self.space
            .states
            .iter()
            .map(|s| self.space.index_of(&s.apply_mark_permutation(perm)))
            .collect()
    }

    /// Exact check that the operator commutes with a mark permutation.
    pub fn commutes_with(&self, perm: &[usize]) -> bool {
        let sp = self.state_permutation(perm);
        // (T M_P) has column v equal to T's column at P(v); (M_P T) has
        // column v equal to T's column v with destinations relabelled.
        for v in 0..self.dim() {
            let mut lhs: HashMap<usize, &BivarPoly> = HashMap::new();
            for (dst, e) in &self.cols[sp[v]] {
                lhs.insert(*dst, e);
            }
            let mut rhs: HashMap<usize, &BivarPoly> = HashMap::new();
            for (dst, e) in &self.cols[v] {
                rhs.insert(sp[*dst], e);
            }
            if lhs != rhs {
                return false;
            }
        }
        true
    }
}

/// `T_l^N` applied to every standard state, with character traces read off
/// the resulting exact vectors.
pub struct KTraces {
    pub lat: LatticeSpec,
    pub level: usize,
    /// `evolved[i]` is `T_l^N |v_i>` for the i-th standard state.
    evolved: Vec<Vec<BivarPoly>>,
    standard: Vec<usize>,
    perms: Vec<Vec<usize>>,
    /// Index of `P . v_i` per permutation and standard state.
    perm_targets: Vec<Vec<usize>>,
}

impl KTraces {
    pub fn compute(op: &LevelOperator, length: usize) -> Self {
        assert!(length >= 1);
        let evolved: Vec<Vec<BivarPoly>> = op
            .space
            .standard
            .iter()
            .map(|&i| {
                let mut vec = vec![BivarPoly::zero(); op.dim()];
                vec[i] = BivarPoly::one();
                for _ in 0..length {
                    vec = op.apply(&vec);
                }
                vec
            })
            .collect();
        let perms = permutations(op.level);
        let perm_targets = perms
            .iter()
            .map(|p| {
                op.space
                    .standard
                    .iter()
                    .map(|&i| op.space.index_of(&op.space.states[i].apply_mark_permutation(p)))
                    .collect()
            })
            .collect();
        Self {
            lat: op.lat,
            level: op.level,
            evolved,
            standard: op.space.standard.clone(),
            perms,
            perm_targets,
        }
    }

    /// Build the operator and evolve over the lattice length in one go.
    pub fn for_lattice(lat: LatticeSpec, level: usize) -> Self {
        let op = build_column_operator(lat, level);
        Self::compute(&op, lat.length)
    }

    fn perm_index(&self, perm: &[usize]) -> usize {
        self.perms
            .iter()
            .position(|p| p == perm)
            .expect("permutation of the wrong degree")
    }

    /// `K_{l,P} = sum_i <v_i| P^{-1} T_l^N |v_i>`: the coefficient of the
    /// mark-permuted standard state in each evolved vector.
    pub fn k_perm(&self, perm: &[usize]) -> BivarPoly {
        let targets = &self.perm_targets[self.perm_index(perm)];
        let mut out = BivarPoly::zero();
        for (vec, &t) in self.evolved.iter().zip(targets) {
            out = &out + &vec[t];
        }
        out
    }

    /// `K_{l,C} = sum_{P in C} K_{l,P}`.
    pub fn k_class(&self, class: &ClassLabel) -> BivarPoly {
        assert_eq!(class.size(), self.level);
        let mut out = BivarPoly::zero();
        for (pi, perm) in self.perms.iter().enumerate() {
            if cycle_type(perm) == *class {
                for (vec, &t) in self.evolved.iter().zip(&self.perm_targets[pi]) {
                    out = &out + &vec[t];
                }
            }
        }
        out
    }

    /// `K_l = l! sum_i <v_i| T_l^N |v_i>`.
    pub fn k_l(&self) -> BivarPoly {
        let mut diag = BivarPoly::zero();
        for (vec, &i) in self.evolved.iter().zip(&self.standard) {
            diag = &diag + &vec[i];
        }
        diag.scale(&rat(factorial(self.level) as i64))
    }

    /// `K_{l,D} = dim(D) sum_C chi_D(C) K_{l,C}`.
    pub fn k_irrep(&self, diagram: &YoungDiagram) -> BivarPoly {
        assert_eq!(diagram.size(), self.level);
        let table = char_table(self.level);
        let mut out = BivarPoly::zero();
        for class in &table.labels {
            let chi = table.character(diagram, class);
            if chi != 0 {
                out = &out + &self.k_class(class).scale(&rat(chi));
            }
        }
        out.scale(&rat(table.dim(diagram) as i64))
    }
}

/// All character traces of one lattice: a [`KTraces`] bundle per level
/// `0..=L`, with the special multi-cycle classes addressed by `(n_P, n_1)`.
pub struct LatticeCharacters {
    pub lat: LatticeSpec,
    pub levels: Vec<KTraces>,
}

impl LatticeCharacters {
    pub fn compute(lat: LatticeSpec) -> Self {
        let levels = (0..=lat.width).map(|l| KTraces::for_lattice(lat, l)).collect();
        Self { lat, levels }
    }

    pub fn width(&self) -> usize {
        self.lat.width
    }

    pub fn k_l(&self, level: usize) -> BivarPoly {
        self.levels[level].k_l()
    }

    pub fn k_class(&self, level: usize, class: &ClassLabel) -> BivarPoly {
        self.levels[level].k_class(class)
    }

    pub fn k_irrep(&self, level: usize, diagram: &YoungDiagram) -> BivarPoly {
        self.levels[level].k_irrep(diagram)
    }

    /// `K_{(n_P, n_1)}`: the class of `n_P` cycles of length `n_1`, at level
    /// `n_P * n_1`. Zero when the level exceeds the width.
    pub fn k_cycles(&self, n_p: usize, n_1: usize) -> BivarPoly {
        let level = n_p * n_1;
        if level > self.width() {
            return BivarPoly::zero();
        }
        self.k_class(level, &crate::symgroup::Partition::cycles(n_p, n_1 as u8, false))
    }

    /// `K_{(n_P, n_1)'}`: same class with one extra fixed point, at level
    /// `n_P * n_1 + 1`.
    pub fn k_cycles_primed(&self, n_p: usize, n_1: usize) -> BivarPoly {
        let level = n_p * n_1 + 1;
        if level > self.width() {
            return BivarPoly::zero();
        }
        self.k_class(level, &crate::symgroup::Partition::cycles(n_p, n_1 as u8, true))
    }

    /// `K_{(n_P, n_1 > 1)} = sum_{n_1 >= 2} K_{(n_P, n_1)}`.
    pub fn k_multi_branch(&self, n_p: usize) -> BivarPoly {
        let mut out = BivarPoly::zero();
        let mut n_1 = 2;
        while n_p * n_1 <= self.width() {
            out = &out + &self.k_cycles(n_p, n_1);
            n_1 += 1;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Numeric eigenvalue sampling
// ---------------------------------------------------------------------------

/// The Young symmetrizer of the canonical tableau of `diagram`, as an
/// operator on the state space: `(dim/l!) sum_{r in R, c in C} sgn(c)
/// M_{r c}` with `R`/`C` the row/column stabilizers.
///
/// It is a primitive idempotent, so its image meets every copy of the irrep
/// `D` in a one-dimensional subspace: the image of the level-`l` space has
/// dimension exactly `dim(D) * n_tor(L, l)` and carries each eigenvalue of
/// `T_{l,D}` once per multiplicity slot, with the forced `dim(D)`-fold
/// Schur degeneracy divided out.
fn young_symmetrizer_matrix(op: &LevelOperator, diagram: &YoungDiagram) -> DMatrix<f64> {
    let l = op.level;
    let d = op.dim();
    // Canonical tableau: fill rows with 0..l-1 left to right.
    let rows: Vec<Vec<usize>> = {
        let mut next = 0;
        diagram
            .parts()
            .iter()
            .map(|&len| (0..len as usize).map(|_| { let v = next; next += 1; v }).collect())
            .collect()
    };
    let ncols = diagram.parts().first().copied().unwrap_or(0) as usize;
    let cols: Vec<Vec<usize>> = (0..ncols)
        .map(|c| rows.iter().filter_map(|r| r.get(c).copied()).collect())
        .collect();

    // All permutations fixing each group of positions setwise.
    fn stabilizer(groups: &[Vec<usize>], l: usize) -> Vec<Vec<usize>> {
        let mut out = vec![(0..l).collect::<Vec<usize>>()];
        for group in groups {
            let perms = permutations(group.len());
            let mut next = Vec::with_capacity(out.len() * perms.len());
            for base in &out {
                for p in &perms {
                    let mut perm = base.clone();
                    for (i, &pi) in p.iter().enumerate() {
                        perm[group[i]] = base[group[pi]];
                    }
                    next.push(perm);
                }
            }
            out = next;
        }
        out
    }
    let sign = |perm: &[usize]| -> f64 {
        let swaps: usize = cycle_type(perm).parts().iter().map(|&c| c as usize - 1).sum();
        if swaps % 2 == 0 { 1.0 } else { -1.0 }
    };

    let table = char_table(l);
    let norm = table.dim(diagram) as f64 / factorial(l) as f64;
    let mut e = DMatrix::<f64>::zeros(d, d);
    for r in stabilizer(&rows, l) {
        for c in stabilizer(&cols, l) {
            let rc: Vec<usize> = (0..l).map(|i| r[c[i]]).collect();
            let sp = op.state_permutation(&rc);
            let s = sign(&c) * norm;
            for (src, &dst) in sp.iter().enumerate() {
                e[(dst, src)] += s;
            }
        }
    }
    e
}

/// Test hook: raw symmetrizer matrix.
pub fn young_symmetrizer_public(op: &LevelOperator, diagram: &YoungDiagram) -> DMatrix<f64> {
    young_symmetrizer_matrix(op, diagram)
}

/// Test hook: idempotency residual and singular values of the symmetrizer.
pub fn debug_symmetrizer(op: &LevelOperator, diagram: &YoungDiagram) -> (f64, Vec<f64>) {
    let e = young_symmetrizer_matrix(op, diagram);
    let residual = (&e * &e - &e).norm();
    let svd = nalgebra::linalg::SVD::new(e, false, false);
    let mut svals: Vec<f64> = svd.singular_values.iter().cloned().collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (residual, svals)
}

/// Test hook: commutator and projector residuals for the symmetrizer image.
pub fn debug_invariance(op: &LevelOperator, diagram: &YoungDiagram, q0: f64, v0: f64) -> (f64, f64, usize) {
    let e = young_symmetrizer_matrix(op, diagram);
    let t = op.to_f64(q0, v0);
    let comm = (&t * &e - &e * &t).norm();
    let svd = nalgebra::linalg::SVD::new(e.clone(), true, false);
    let s_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let u = svd.u.as_ref().unwrap();
    let mut cols = Vec::new();
    for (k, &sv) in svd.singular_values.iter().enumerate() {
        if sv > 1e-9 * s_max.max(1.0) {
            cols.push(u.column(k).clone_owned());
        }
    }
    let w = nalgebra::DMatrix::from_columns(&cols);
    let span_residual = (&e - &w * (w.transpose() * &e)).norm();
    (comm, span_residual, cols.len())
}

/// Numeric eigenvalues of the `T_{l,D}` block at a probe point, with the
/// `dim(D)`-fold Schur multiplicity divided out.
///
/// Returns `dim(D) * n_tor(L, l)` values sorted by `(re, im)`; repeats among
/// them are genuine extra degeneracies of the block. `tol` bounds the
/// accepted invariance residual of the restriction.
pub fn eigen_sample(
    op: &LevelOperator,
    diagram: &YoungDiagram,
    q0: f64,
    v0: f64,
    tol: f64,
) -> Result<Vec<Complex64>, EigenError> {
    let table = char_table(op.level);
    let dim_d = table.dim(diagram) as usize;
    let expected_rank = dim_d * op.space.standard.len();

    let ill = |detail: String| EigenError::IllConditioned {
        level: op.level,
        irrep: diagram.to_string(),
        detail,
    };

    let e = young_symmetrizer_matrix(op, diagram);
    // Orthonormal basis of the symmetrizer's image via rank-revealing QR.
    // (An idempotent has all nonzero singular values >= 1, so the rank gap
    // is clean.)
    let qr = e.col_piv_qr();
    let r = qr.r();
    let r_max = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).fold(0.0f64, f64::max);
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > 1e-9 * r_max.max(1.0))
        .count();
    if rank != expected_rank {
        return Err(ill(format!("symmetrizer rank {rank} but expected {expected_rank}")));
    }
    if expected_rank == 0 {
        return Ok(Vec::new());
    }
    let q_full = qr.q();
    let basis_cols: Vec<_> = (0..rank).map(|k| q_full.column(k).clone_owned()).collect();
    let w = DMatrix::from_columns(&basis_cols);
    let t = op.to_f64(q0, v0);
    let tw = &t * &w;
    let m = w.transpose() * &tw;

    // The image is T-invariant; the residual ||T W - W M|| measures how well
    // the numeric restriction closed.
    let residual = (&tw - &w * &m).norm();
    let scale = m.norm().max(1.0);
    if residual > tol.max(1e-10) * scale * 1e2 {
        return Err(ill(format!("invariance residual {residual:.3e} at scale {scale:.3e}")));
    }

    let mut slots = schur_eigenvalues(m)
        .ok_or_else(|| ill("eigenvalue iteration failed to converge".into()))?;
    slots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).expect("non-finite eigenvalue"));
    Ok(slots)
}

/// Complex eigenvalues with bounded iteration. If the QR iteration stalls,
/// retry on an orthogonal similarity transform of the matrix, which has the
/// identical spectrum but a different iteration path.
fn schur_eigenvalues(m: DMatrix<f64>) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    let mut attempt = m;
    let mut rng_state = 0x9e3779b97f4a7c15u64;
    for round in 0..4 {
        if let Some(schur) = nalgebra::linalg::Schur::try_new(attempt.clone(), f64::EPSILON, 20_000)
        {
            let vals = schur.complex_eigenvalues().iter().cloned().collect();
            if round > 0 {
                // Eigenvalues are similarity-invariant; nothing to undo.
            }
            return Some(vals);
        }
        // Deterministic pseudo-random orthogonal similarity.
        let mut next = || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let rand = DMatrix::from_fn(n, n, |_, _| next());
        let q = rand.qr().q();
        attempt = q.transpose() * attempt * q;
    }
    None
}

/// Group values whose pairwise distance is at most `eps`, transitively.
pub fn cluster_values(values: &[Complex64], eps: f64) -> Vec<Vec<Complex64>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() <= eps {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<Complex64>> = HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(values[i]);
    }
    let mut out: Vec<Vec<Complex64>> = groups.into_values().collect();
    out.sort_by(|a, b| (a[0].re, a[0].im).partial_cmp(&(b[0].re, b[0].im)).unwrap());
    out
}
