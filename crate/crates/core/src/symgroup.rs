//! Symmetric-group data: integer partitions, conjugacy-class sizes,
//! irreducible characters via the Murnaghan-Nakayama rule, dimensions via
//! hook lengths, and the conversion coefficients `c(D, C) = |C| chi_D(C) / dim(D)`.
//!
//! Partitions serve double duty: as Young diagrams labelling irreps and as
//! cycle types labelling conjugacy classes. Character tables are computed
//! once per `l` and cached process-wide.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_integer::Integer;
use thiserror::Error;

/// A partition of `l`: weakly decreasing positive parts.
///
/// Used both as a Young diagram (irrep label) and as a cycle type
/// (conjugacy-class label).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition(Vec<u8>);

pub type YoungDiagram = Partition;
pub type ClassLabel = Partition;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymGroupError {
    #[error("parts must be weakly decreasing and positive: {0:?}")]
    BadShape(Vec<u8>),
    /// `|C| chi_D(C) / dim(D)` failed to be an integer; this would signal a
    /// character-table bug and must never happen for symmetric groups.
    #[error("c(D, C) non-integral for D={diagram}, C={class}")]
    NonIntegral { diagram: Partition, class: Partition },
}

impl Partition {
    pub fn new(parts: Vec<u8>) -> Result<Self, SymGroupError> {
        if parts.iter().any(|&p| p == 0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(SymGroupError::BadShape(parts));
        }
        Ok(Self(parts))
    }

    /// The empty partition of 0.
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Cycle type with `n` cycles of length `len` (and optionally one fixed
    /// point appended, giving the primed classes of level `n*len + 1`).
    pub fn cycles(n: usize, len: u8, fixed_point: bool) -> Self {
        let mut parts = vec![len; n];
        if fixed_point {
            parts.push(1);
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Self(parts)
    }

    pub fn identity_class(l: usize) -> Self {
        Self(vec![1; l])
    }

    pub fn parts(&self) -> &[u8] {
        &self.0
    }

    /// The integer being partitioned.
    pub fn size(&self) -> usize {
        self.0.iter().map(|&p| p as usize).sum()
    }

    pub fn is_identity_class(&self) -> bool {
        self.0.iter().all(|&p| p == 1)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// All partitions of `l` in reverse-lexicographic order: `[l]` first,
/// `[1,...,1]` last. The order is the stable index used everywhere.
pub fn partitions(l: usize) -> Vec<Partition> {
    assert!(l <= 12, "partitions(l) supported for l <= 12");
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(remaining: usize, max: usize, current: &mut Vec<u8>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition(current.clone()));
            return;
        }
        for part in (1..=remaining.min(max)).rev() {
            current.push(part as u8);
            rec(remaining - part, part, current, out);
            current.pop();
        }
    }
    rec(l, l, &mut current, &mut out);
    out
}

pub fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// Size of the conjugacy class with the given cycle type:
/// `l! / z_C` with `z_C = prod_m m^{a_m} a_m!` over cycle lengths `m` of
/// multiplicity `a_m`.
pub fn class_size(class: &ClassLabel) -> u64 {
    let l = class.size();
    let mut z: u64 = 1;
    let mut mult: HashMap<u8, u64> = HashMap::new();
    for &p in class.parts() {
        *mult.entry(p).or_insert(0) += 1;
    }
    for (m, a) in mult {
        z *= (m as u64).pow(a as u32) * factorial(a as usize);
    }
    factorial(l) / z
}

/// Irrep dimension via the hook-length formula.
pub fn dim_irrep(diagram: &YoungDiagram) -> u64 {
    let rows = diagram.parts();
    let l = diagram.size();
    let mut hooks: u64 = 1;
    for (r, &row_len) in rows.iter().enumerate() {
        for c in 0..row_len as usize {
            let arm = row_len as usize - c - 1;
            let leg = rows[r + 1..].iter().filter(|&&rr| rr as usize > c).count();
            hooks *= (arm + leg + 1) as u64;
        }
    }
    factorial(l) / hooks
}

/// Character table of `S_l`: rows are irreps, columns are classes, both in
/// the order of [`partitions`].
pub struct CharTable {
    pub l: usize,
    pub labels: Vec<Partition>,
    pub dims: Vec<u64>,
    pub class_sizes: Vec<u64>,
    /// `chars[irrep][class]`.
    pub chars: Vec<Vec<i64>>,
    index: HashMap<Partition, usize>,
}

impl CharTable {
    fn build(l: usize) -> Self {
        let labels = partitions(l);
        let index: HashMap<Partition, usize> =
            labels.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        let dims = labels.iter().map(dim_irrep).collect();
        let class_sizes = labels.iter().map(class_size).collect();
        let mut memo = HashMap::new();
        let chars = labels
            .iter()
            .map(|d| {
                labels
                    .iter()
                    .map(|c| mn_character(d.parts(), c.parts(), &mut memo))
                    .collect()
            })
            .collect();
        Self { l, labels, dims, class_sizes, chars, index }
    }

    pub fn index_of(&self, p: &Partition) -> usize {
        *self
            .index
            .get(p)
            .unwrap_or_else(|| panic!("{p} is not a partition of {}", self.l))
    }

    pub fn character(&self, diagram: &YoungDiagram, class: &ClassLabel) -> i64 {
        self.chars[self.index_of(diagram)][self.index_of(class)]
    }

    pub fn dim(&self, diagram: &YoungDiagram) -> u64 {
        self.dims[self.index_of(diagram)]
    }

    pub fn class_size(&self, class: &ClassLabel) -> u64 {
        self.class_sizes[self.index_of(class)]
    }
}

/// Cached character table for `S_l`.
pub fn char_table(l: usize) -> Arc<CharTable> {
    static TABLES: OnceLock<Mutex<HashMap<usize, Arc<CharTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().unwrap();
    guard.entry(l).or_insert_with(|| Arc::new(CharTable::build(l))).clone()
}

/// Murnaghan-Nakayama recursion over beta-numbers (first-column hook
/// lengths). Removing a rim hook of length `t` subtracts `t` from one beta
/// number, with sign given by the number of beta numbers jumped over.
fn mn_character(
    diagram: &[u8],
    cycles: &[u8],
    memo: &mut HashMap<(Vec<u8>, Vec<u8>), i64>,
) -> i64 {
    if cycles.is_empty() {
        return 1;
    }
    let key = (diagram.to_vec(), cycles.to_vec());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let t = cycles[0] as i64;
    let rest = &cycles[1..];
    let k = diagram.len();
    let betas: Vec<i64> = diagram
        .iter()
        .enumerate()
        .map(|(i, &p)| p as i64 + (k - 1 - i) as i64)
        .collect();
    let mut total = 0i64;
    for (i, &b) in betas.iter().enumerate() {
        let nb = b - t;
        if nb < 0 || betas.contains(&nb) {
            continue;
        }
        let jumped = betas.iter().filter(|&&x| nb < x && x < b).count();
        let sign = if jumped % 2 == 0 { 1 } else { -1 };
        let mut new_betas = betas.clone();
        new_betas[i] = nb;
        new_betas.sort_unstable_by(|a, b| b.cmp(a));
        // Convert back to a partition, dropping zero rows.
        let m = new_betas.len();
        let new_diagram: Vec<u8> = new_betas
            .iter()
            .enumerate()
            .map(|(r, &bb)| (bb - (m - 1 - r) as i64) as u8)
            .filter(|&p| p > 0)
            .collect();
        total += sign * mn_character(&new_diagram, rest, memo);
    }
    memo.insert(key, total);
    total
}

pub fn character(diagram: &YoungDiagram, class: &ClassLabel) -> i64 {
    assert_eq!(
        diagram.size(),
        class.size(),
        "character requires a diagram and class of the same l"
    );
    char_table(diagram.size()).character(diagram, class)
}

/// Conversion coefficient `c(D, C) = |C| chi_D(C) / dim(D)`, always an
/// integer for symmetric groups.
pub fn c_coeff(diagram: &YoungDiagram, class: &ClassLabel) -> Result<i64, SymGroupError> {
    let table = char_table(diagram.size());
    let num = table.class_size(class) as i64 * table.character(diagram, class);
    let dim = table.dim(diagram) as i64;
    if num.mod_floor(&dim) != 0 {
        return Err(SymGroupError::NonIntegral {
            diagram: diagram.clone(),
            class: class.clone(),
        });
    }
    Ok(num / dim)
}

/// All permutations of `{0, .., l-1}` in lexicographic order. `perm[i]` is
/// the image of `i`.
pub fn permutations(l: usize) -> Vec<Vec<usize>> {
    assert!(l <= 8, "permutations(l) supported for l <= 8");
    let mut out = Vec::with_capacity(factorial(l) as usize);
    let mut items: Vec<usize> = (0..l).collect();
    fn rec(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if k == items.len() {
            out.push(items.clone());
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            rec(items, k + 1, out);
            items.swap(k, i);
        }
    }
    rec(&mut items, 0, &mut out);
    out.sort();
    out
}

/// Cycle type of a permutation, as a [`ClassLabel`].
pub fn cycle_type(perm: &[usize]) -> ClassLabel {
    let mut seen = vec![false; perm.len()];
    let mut parts = Vec::new();
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0u8;
        let mut at = start;
        while !seen[at] {
            seen[at] = true;
            at = perm[at];
            len += 1;
        }
        parts.push(len);
    }
    parts.sort_unstable_by(|a, b| b.cmp(a));
    Partition(parts)
}

pub fn invert_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(parts: &[u8]) -> Partition {
        Partition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn permutation_basics() {
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(cycle_type(&[1, 2, 0, 3]), p(&[3, 1]));
        assert_eq!(cycle_type(&[1, 0, 3, 2]), p(&[2, 2]));
        assert_eq!(invert_perm(&[1, 2, 0]), vec![2, 0, 1]);
        // Class sizes from brute enumeration match the formula.
        for l in 1..=5 {
            let mut counts: HashMap<Partition, u64> = HashMap::new();
            for perm in permutations(l) {
                *counts.entry(cycle_type(&perm)).or_insert(0) += 1;
            }
            for (class, count) in counts {
                assert_eq!(count, class_size(&class), "class {class} in S_{l}");
            }
        }
    }

    #[test]
    fn partition_lists() {
        assert_eq!(partitions(1), vec![p(&[1])]);
        assert_eq!(partitions(4).len(), 5);
        assert_eq!(partitions(3), vec![p(&[3]), p(&[2, 1]), p(&[1, 1, 1])]);
        assert_eq!(partitions(8).len(), 22);
    }

    #[test]
    fn class_sizes() {
        assert_eq!(class_size(&p(&[2, 2])), 3);
        assert_eq!(class_size(&p(&[1, 1, 1, 1])), 1);
        assert_eq!(class_size(&p(&[4])), 6);
        assert_eq!(class_size(&p(&[2, 1, 1])), 6);
        assert_eq!(class_size(&p(&[3, 1])), 8);
    }

    #[test]
    fn dims_match_hook_formula() {
        assert_eq!(dim_irrep(&p(&[3, 1])), 3);
        assert_eq!(dim_irrep(&p(&[2, 2])), 2);
        assert_eq!(dim_irrep(&p(&[5])), 1);
        assert_eq!(dim_irrep(&p(&[1, 1, 1, 1])), 1);
        assert_eq!(dim_irrep(&p(&[2, 1, 1])), 3);
    }

    #[test]
    fn characters_s4() {
        // Trivial irrep is 1 on every class.
        for c in partitions(4) {
            assert_eq!(character(&p(&[4]), &c), 1);
        }
        assert_eq!(character(&p(&[3, 1]), &p(&[2, 2])), -1);
        assert_eq!(character(&p(&[1, 1, 1, 1]), &p(&[4])), -1);
        assert_eq!(character(&p(&[2, 2]), &p(&[2, 2])), 2);
        assert_eq!(character(&p(&[2, 2]), &p(&[4])), 0);
        assert_eq!(character(&p(&[2, 1, 1]), &p(&[4])), 1);
        // Sign irrep: parity of the permutation.
        assert_eq!(character(&p(&[1, 1, 1, 1]), &p(&[2, 1, 1])), -1);
    }

    #[test]
    fn c_coefficients() {
        assert_eq!(c_coeff(&p(&[4]), &p(&[2, 2])).unwrap(), 3);
        assert_eq!(c_coeff(&p(&[2, 2]), &p(&[2, 2])).unwrap(), 3);
        assert_eq!(c_coeff(&p(&[3, 1]), &p(&[1, 1, 1, 1])).unwrap(), 1);
        // c(D, Id) = 1 for every D.
        for d in partitions(5) {
            assert_eq!(c_coeff(&d, &Partition::identity_class(5)).unwrap(), 1);
        }
    }

    #[test]
    fn column_orthogonality_and_sum_rules_to_l8() {
        for l in 1..=8 {
            let t = char_table(l);
            let n = t.labels.len();
            let lfact = factorial(l) as i64;
            for ci in 0..n {
                for cj in 0..n {
                    let dot: i64 = (0..n).map(|d| t.chars[d][ci] * t.chars[d][cj]).sum();
                    let expected = if ci == cj {
                        lfact / t.class_sizes[ci] as i64
                    } else {
                        0
                    };
                    assert_eq!(dot, expected, "orthogonality failed at l={l}");
                }
            }
            // Regular representation: sum of dim^2 = l!.
            let dim_sq: i64 = t.dims.iter().map(|&d| (d * d) as i64).sum();
            assert_eq!(dim_sq, lfact);
            // sum_D dim(D)^2 c(D, C) = l! delta_{C, Id}, and c integral.
            let id = Partition::identity_class(l);
            for c in &t.labels {
                let s: i64 = t
                    .labels
                    .iter()
                    .map(|d| (t.dim(d) * t.dim(d)) as i64 * c_coeff(d, c).unwrap())
                    .sum();
                assert_eq!(s, if *c == id { lfact } else { 0 });
            }
        }
    }
}
