//! Skew-symmetric based matrices of strings: construction, primitive
//! reduction, homology invariants, involutions, and graded direct sums.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::IntPoly;
use crate::string::{OpenString, VirtualString};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix must be square, got row {0} of length {1} in a {2}x{2} matrix")]
    NotSquare(usize, usize, usize),
    #[error("matrix must be skew-symmetric: b[{0}][{1}] = {2} but b[{1}][{0}] = {3}")]
    NotSkew(usize, usize, i64, i64),
    #[error("basepoint index {0} out of range for size {1}")]
    BadBasepoint(usize, usize),
    #[error("grade must assign +/- to every non-basepoint index")]
    BadGrade,
}

/// A based skew-symmetric matrix `(G, s, b)` over the integers.
///
/// `G` is the index set `0..n`; `s` is the basepoint index; `b` is
/// skew-symmetric with zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasedMatrix {
    s: usize,
    b: Vec<Vec<i64>>,
}

/// A based matrix with a splitting of the non-basepoint elements into a
/// positive and a negative part.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GradedBasedMatrix {
    base: BasedMatrix,
    /// `+1` / `-1` per index; `0` at the basepoint.
    grade: Vec<i8>,
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    s: usize,
    b: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    grade: Option<Vec<String>>,
}

impl BasedMatrix {
    pub fn new(s: usize, b: Vec<Vec<i64>>) -> Result<Self, MatrixError> {
        let n = b.len();
        for (i, row) in b.iter().enumerate() {
            if row.len() != n {
                return Err(MatrixError::NotSquare(i, row.len(), n));
            }
        }
        for i in 0..n {
            for j in i..n {
                if b[i][j] != -b[j][i] {
                    return Err(MatrixError::NotSkew(i, j, b[i][j], b[j][i]));
                }
            }
        }
        if s >= n {
            return Err(MatrixError::BadBasepoint(s, n));
        }
        Ok(BasedMatrix { s, b })
    }

    /// The 1x1 zero matrix `({s}, s, 0)`.
    pub fn trivial() -> Self {
        BasedMatrix {
            s: 0,
            b: vec![vec![0]],
        }
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    pub fn s_index(&self) -> usize {
        self.s
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        self.b[i][j]
    }

    pub fn rows(&self) -> &[Vec<i64>] {
        &self.b
    }

    /// The based matrix `T(alpha)`: indices are `s` (first) then the arrows in
    /// id order; `b(e,s) = n(e)` and `b(e,f) = arc(e).arc(f) + linking(e,f)`.
    pub fn from_string(a: &VirtualString) -> Self {
        let m = a.rank();
        let ns = a.n_indices();
        let (tails, heads) = a.endpoints();
        let mut b = vec![vec![0i64; m + 1]; m + 1];
        for e in 0..m {
            b[e + 1][0] = ns[e];
            b[0][e + 1] = -ns[e];
            for f in 0..m {
                if e == f {
                    continue;
                }
                b[e + 1][f + 1] =
                    a.arcs_dot((tails[e], heads[e]), (tails[f], heads[f])) + a.linking(e, f);
            }
        }
        BasedMatrix { s: 0, b }
    }

    pub(crate) fn non_basepoint(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.size()).filter(move |&g| g != self.s)
    }

    fn is_annihilating(&self, g: usize) -> bool {
        g != self.s && self.b[g].iter().all(|&x| x == 0)
    }

    fn is_core(&self, g: usize) -> bool {
        g != self.s && self.b[g] == self.b[self.s]
    }

    fn is_complementary(&self, g1: usize, g2: usize) -> bool {
        g1 != self.s
            && g2 != self.s
            && g1 != g2
            && (0..self.size()).all(|h| self.b[g1][h] + self.b[g2][h] == self.b[self.s][h])
    }

    /// Submatrix obtained by deleting the given non-basepoint indices.
    pub fn delete(&self, remove: &[usize]) -> BasedMatrix {
        assert!(remove.iter().all(|&g| g != self.s));
        let keep: Vec<usize> = (0..self.size()).filter(|i| !remove.contains(i)).collect();
        let s = keep.iter().position(|&i| i == self.s).unwrap();
        let b = keep
            .iter()
            .map(|&i| keep.iter().map(|&j| self.b[i][j]).collect())
            .collect();
        BasedMatrix { s, b }
    }

    /// The primitive form: delete annihilating elements, then core elements,
    /// then complementary pairs, rescanning until none remain.  Unique up to
    /// isomorphism independently of the deletion order.
    pub fn primitive_reduce(&self) -> BasedMatrix {
        let mut cur = self.clone();
        'outer: loop {
            let elems: Vec<usize> = cur.non_basepoint().collect();
            for &g in &elems {
                if cur.is_annihilating(g) {
                    cur = cur.delete(&[g]);
                    continue 'outer;
                }
            }
            for &g in &elems {
                if cur.is_core(g) {
                    cur = cur.delete(&[g]);
                    continue 'outer;
                }
            }
            for &g1 in &elems {
                for &g2 in &elems {
                    if g1 < g2 && cur.is_complementary(g1, g2) {
                        cur = cur.delete(&[g1, g2]);
                        continue 'outer;
                    }
                }
            }
            return cur;
        }
    }

    pub fn is_primitive(&self) -> bool {
        self.size() == self.primitive_reduce().size()
    }

    /// The negation `-T`.
    pub fn negate(&self) -> BasedMatrix {
        let b = self
            .b
            .iter()
            .map(|row| row.iter().map(|&x| -x).collect())
            .collect();
        BasedMatrix { s: self.s, b }
    }

    /// The involution `T^-`: negate the basepoint row/column and set
    /// `b(g,h) := b(g,h) - b(g,s) - b(s,h)` off the basepoint.
    pub fn dash(&self) -> BasedMatrix {
        let n = self.size();
        let s = self.s;
        let mut b = vec![vec![0i64; n]; n];
        for g in 0..n {
            for h in 0..n {
                b[g][h] = if g == s || h == s {
                    -self.b[g][h]
                } else {
                    self.b[g][h] - self.b[g][s] - self.b[s][h]
                };
            }
        }
        BasedMatrix { s, b }
    }

    /// Rank of the full integer matrix (over the rationals), computed by
    /// fraction-free elimination in exact big integers.
    pub fn rank_b(&self) -> usize {
        rank_int(&self.b)
    }

    /// `u(T) = sum over g with b(g,s) != 0 of sign(b(g,s)) t^|b(g,s)|`.
    pub fn u_of_matrix(&self) -> IntPoly {
        let mut p = IntPoly::zero();
        for g in 0..self.size() {
            let v = self.b[g][self.s];
            if v != 0 {
                p.add_term(v.unsigned_abs() as u32, v.signum());
            }
        }
        p
    }

    /// `v_k`: the number of `g` with `b(g,s) = k`.
    pub fn v_k(&self, k: i64) -> usize {
        (0..self.size()).filter(|&g| self.b[g][self.s] == k).count()
    }

    /// `v_{k,A}`: the number of `g` with `b(g,s) = k` whose off-basepoint row
    /// equals the multiset `a`.
    pub fn v_ka(&self, k: i64, a: &[i64]) -> usize {
        let mut want = a.to_vec();
        want.sort_unstable();
        (0..self.size())
            .filter(|&g| {
                if self.b[g][self.s] != k {
                    return false;
                }
                let mut row: Vec<i64> = self
                    .non_basepoint()
                    .map(|h| self.b[g][h])
                    .collect();
                row.sort_unstable();
                row == want
            })
            .count()
    }

    /// Multiset signature of a non-basepoint element, used to prune the
    /// isomorphism search.
    fn signature(&self, g: usize) -> (i64, Vec<i64>) {
        let mut row: Vec<i64> = self.non_basepoint().map(|h| self.b[g][h]).collect();
        row.sort_unstable();
        (self.b[g][self.s], row)
    }

    /// Is there a bijection of index sets sending basepoint to basepoint and
    /// carrying one matrix to the other?
    pub fn is_isomorphic(&self, other: &BasedMatrix) -> bool {
        iso_search(self, other, None, None)
    }

    /// Add an annihilating element.
    pub fn extend_m1(&self) -> BasedMatrix {
        let n = self.size();
        let mut b = self.b.clone();
        for row in &mut b {
            row.push(0);
        }
        b.push(vec![0; n + 1]);
        BasedMatrix { s: self.s, b }
    }

    /// Add a core element.
    pub fn extend_m2(&self) -> BasedMatrix {
        let n = self.size();
        let mut b = self.b.clone();
        for (h, row) in b.iter_mut().enumerate() {
            row.push(-self.b[self.s][h]);
        }
        let mut new_row = self.b[self.s].clone();
        new_row.push(0);
        b.push(new_row);
        let _ = n;
        BasedMatrix { s: self.s, b }
    }

    /// Add a complementary pair; `row` gives `b(g1, h)` for every existing
    /// index `h`, the second element is then determined.
    pub fn extend_m3(&self, row: &[i64]) -> BasedMatrix {
        let n = self.size();
        assert_eq!(row.len(), n);
        // b(g2,h) = b(s,h) - b(g1,h); b(g1,g2) = b(g1,s) = row[s]
        let g2_row: Vec<i64> = (0..n).map(|h| self.b[self.s][h] - row[h]).collect();
        let mut b = self.b.clone();
        for (h, r) in b.iter_mut().enumerate() {
            r.push(-row[h]);
            r.push(-g2_row[h]);
        }
        let mut r1 = row.to_vec();
        r1.push(0);
        r1.push(row[self.s]);
        let mut r2 = g2_row;
        r2.push(-row[self.s]);
        r2.push(0);
        b.push(r1);
        b.push(r2);
        BasedMatrix { s: self.s, b }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixJson {
            s: self.s,
            b: self.b.clone(),
            grade: None,
        })
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let parsed: MatrixJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        BasedMatrix::new(parsed.s, parsed.b).map_err(|e| e.to_string())
    }
}

impl fmt::Display for BasedMatrix {
    /// Square-bracket display with the basepoint row/column first.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order: Vec<usize> = std::iter::once(self.s)
            .chain(self.non_basepoint())
            .collect();
        for &i in &order {
            let row: Vec<String> = order.iter().map(|&j| self.b[i][j].to_string()).collect();
            writeln!(f, "[{}]", row.join(" "))?;
        }
        Ok(())
    }
}

/// Rank over the rationals of an integer matrix, by Bareiss-style
/// fraction-free Gaussian elimination over big integers.
pub fn rank_int(m: &[Vec<i64>]) -> usize {
    let n = m.len();
    if n == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|row| row.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut rank = 0;
    let mut row = 0;
    let mut prev = BigInt::one();
    for col in 0..cols {
        if row >= n {
            break;
        }
        let Some(p) = (row..n).find(|&r| !a[r][col].is_zero()) else {
            continue;
        };
        a.swap(row, p);
        for r in row + 1..n {
            for c in col + 1..cols {
                a[r][c] = (&a[r][c] * &a[row][col] - &a[r][col] * &a[row][c]) / &prev;
            }
            a[r][col] = BigInt::zero();
        }
        prev = a[row][col].clone();
        rank += 1;
        row += 1;
    }
    rank
}

/// `rho(alpha)`: size of the primitive reduction of `T(alpha)` minus one.
pub fn rho(a: &VirtualString) -> usize {
    BasedMatrix::from_string(a).primitive_reduce().size() - 1
}

/// The genus of the canonical realization surface: half the rank of `b`.
pub fn genus(a: &VirtualString) -> usize {
    let r = BasedMatrix::from_string(a).rank_b();
    debug_assert!(r % 2 == 0, "skew-symmetric rank must be even");
    r / 2
}

/// Shared backtracking for based-matrix isomorphism; when grades are given
/// the bijection must preserve them.
fn iso_search(
    t1: &BasedMatrix,
    t2: &BasedMatrix,
    g1: Option<&[i8]>,
    g2: Option<&[i8]>,
) -> bool {
    if t1.size() != t2.size() {
        return false;
    }
    let left: Vec<usize> = t1.non_basepoint().collect();
    let right: Vec<usize> = t2.non_basepoint().collect();
    let key = |t: &BasedMatrix, gr: Option<&[i8]>, g: usize| {
        let (v, row) = t.signature(g);
        (v, row, gr.map(|gr| gr[g]).unwrap_or(0))
    };
    let mut sig1: Vec<_> = left.iter().map(|&g| key(t1, g1, g)).collect();
    let mut sig2: Vec<_> = right.iter().map(|&g| key(t2, g2, g)).collect();
    sig1.sort();
    sig2.sort();
    if sig1 != sig2 {
        return false;
    }
    // map[i] = image in `right` of left[i]
    fn extend(
        t1: &BasedMatrix,
        t2: &BasedMatrix,
        g1: Option<&[i8]>,
        g2: Option<&[i8]>,
        left: &[usize],
        right: &[usize],
        map: &mut Vec<usize>,
        used: &mut Vec<bool>,
    ) -> bool {
        let i = map.len();
        if i == left.len() {
            return true;
        }
        let a = left[i];
        for (j, &b) in right.iter().enumerate() {
            if used[j] {
                continue;
            }
            if t1.b[a][t1.s] != t2.b[b][t2.s] {
                continue;
            }
            if let (Some(g1), Some(g2)) = (g1, g2) {
                if g1[a] != g2[b] {
                    continue;
                }
            }
            if (0..i).any(|k| t1.b[a][left[k]] != t2.b[b][right[map[k]]]) {
                continue;
            }
            map.push(j);
            used[j] = true;
            if extend(t1, t2, g1, g2, left, right, map, used) {
                return true;
            }
            used[j] = false;
            map.pop();
        }
        false
    }
    let mut map = Vec::new();
    let mut used = vec![false; right.len()];
    extend(t1, t2, g1, g2, &left, &right, &mut map, &mut used)
}

impl GradedBasedMatrix {
    pub fn new(base: BasedMatrix, grade: Vec<i8>) -> Result<Self, MatrixError> {
        if grade.len() != base.size()
            || grade
                .iter()
                .enumerate()
                .any(|(i, &g)| if i == base.s { g != 0 } else { g != 1 && g != -1 })
        {
            return Err(MatrixError::BadGrade);
        }
        Ok(GradedBasedMatrix { base, grade })
    }

    pub fn trivial() -> Self {
        GradedBasedMatrix {
            base: BasedMatrix::trivial(),
            grade: vec![0],
        }
    }

    pub fn base(&self) -> &BasedMatrix {
        &self.base
    }

    pub fn grade(&self, g: usize) -> i8 {
        self.grade[g]
    }

    pub fn grades(&self) -> &[i8] {
        &self.grade
    }

    /// The graded matrix `T(mu)`: the matrix of the closure, graded by
    /// interval order (`+` when the tail precedes the head).
    pub fn from_open_string(mu: &OpenString) -> Self {
        let base = BasedMatrix::from_string(&mu.closure());
        let mut grade = vec![0i8];
        grade.extend(mu.positive_arrows().iter().map(|&p| if p { 1 } else { -1 }));
        GradedBasedMatrix { base, grade }
    }

    /// `-T`: negate all entries, keep the splitting.
    pub fn negate(&self) -> GradedBasedMatrix {
        GradedBasedMatrix {
            base: self.base.negate(),
            grade: self.grade.clone(),
        }
    }

    fn delete(&self, remove: &[usize]) -> GradedBasedMatrix {
        let base = self.base.delete(remove);
        let grade = self
            .grade
            .iter()
            .enumerate()
            .filter(|(i, _)| !remove.contains(i))
            .map(|(_, &g)| g)
            .collect();
        GradedBasedMatrix { base, grade }
    }

    /// Graded primitive reduction: annihilating elements must lie in the
    /// positive part, core elements in the negative part, and complementary
    /// pairs must split across the two parts.
    pub fn primitive_reduce(&self) -> GradedBasedMatrix {
        let mut cur = self.clone();
        'outer: loop {
            let elems: Vec<usize> = cur.base.non_basepoint().collect();
            for &g in &elems {
                if cur.grade[g] == 1 && cur.base.is_annihilating(g) {
                    cur = cur.delete(&[g]);
                    continue 'outer;
                }
            }
            for &g in &elems {
                if cur.grade[g] == -1 && cur.base.is_core(g) {
                    cur = cur.delete(&[g]);
                    continue 'outer;
                }
            }
            for &g1 in &elems {
                for &g2 in &elems {
                    if g1 < g2
                        && cur.grade[g1] != cur.grade[g2]
                        && cur.base.is_complementary(g1, g2)
                    {
                        cur = cur.delete(&[g1, g2]);
                        continue 'outer;
                    }
                }
            }
            return cur;
        }
    }

    /// The refined polynomials `(u^+, u^-)` of a graded matrix.
    pub fn u_pm(&self) -> (IntPoly, IntPoly) {
        let mut plus = IntPoly::zero();
        let mut minus = IntPoly::zero();
        for g in self.base.non_basepoint() {
            let v = self.base.b[g][self.base.s];
            if v == 0 {
                continue;
            }
            let k = v.unsigned_abs() as u32;
            // positive grade with v > 0 (or negative grade with v < 0)
            // contributes to u^+, the mirrored cases to u^-
            let target = if (v > 0) == (self.grade[g] == 1) {
                &mut plus
            } else {
                &mut minus
            };
            target.add_term(k, v.signum());
        }
        (plus, minus)
    }

    pub fn is_isomorphic(&self, other: &GradedBasedMatrix) -> bool {
        iso_search(
            &self.base,
            &other.base,
            Some(&self.grade),
            Some(&other.grade),
        )
    }

    /// Direct sum mimicking the product of open strings: disjoint union of
    /// the non-basepoint parts with cross terms determined by the basepoint
    /// rows, so that `T(mu) + T(nu) = T(mu nu)` exactly.
    pub fn graded_sum(&self, other: &GradedBasedMatrix) -> GradedBasedMatrix {
        let parts = [self, other];
        // joint index: (matrix, original index), basepoint first
        let mut index: Vec<(usize, usize)> = Vec::new();
        for (t, part) in parts.iter().enumerate() {
            for g in part.base.non_basepoint() {
                index.push((t, g));
            }
        }
        let n = index.len() + 1;
        let mut b = vec![vec![0i64; n]; n];
        let mut grade = vec![0i8; n];
        let eps = |t: usize, g: usize| -> i64 {
            // weight 1 on the negative part: the convention under which the
            // sum reproduces the matrix of a product of open strings
            if parts[t].grade[g] == -1 {
                1
            } else {
                0
            }
        };
        for (i, &(ti, gi)) in index.iter().enumerate() {
            let bi = &parts[ti].base;
            b[0][i + 1] = bi.b[bi.s][gi];
            b[i + 1][0] = bi.b[gi][bi.s];
            grade[i + 1] = parts[ti].grade[gi];
            for (j, &(tj, gj)) in index.iter().enumerate() {
                let bj = &parts[tj].base;
                b[i + 1][j + 1] = if ti == tj {
                    bi.b[gi][gj]
                } else {
                    eps(ti, gi) * bj.b[bj.s][gj] - eps(tj, gj) * bi.b[bi.s][gi]
                };
            }
        }
        GradedBasedMatrix {
            base: BasedMatrix { s: 0, b },
            grade,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixJson {
            s: self.base.s,
            b: self.base.b.clone(),
            grade: Some(
                self.grade
                    .iter()
                    .map(|&g| match g {
                        1 => "+".to_string(),
                        -1 => "-".to_string(),
                        _ => "s".to_string(),
                    })
                    .collect(),
            ),
        })
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let parsed: MatrixJson = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let base = BasedMatrix::new(parsed.s, parsed.b).map_err(|e| e.to_string())?;
        let grade = match parsed.grade {
            Some(gr) => gr
                .iter()
                .map(|g| match g.as_str() {
                    "+" => Ok(1),
                    "-" => Ok(-1),
                    "s" => Ok(0),
                    other => Err(format!("bad grade entry `{other}`")),
                })
                .collect::<Result<Vec<i8>, String>>()?,
            None => return Err("missing grade".to_string()),
        };
        GradedBasedMatrix::new(base, grade).map_err(|e| e.to_string())
    }
}

/// Deterministic pseudo-random skew-symmetric test matrices.
pub fn random_based_matrix(seed: u64, size: usize, bound: i64) -> BasedMatrix {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut b = vec![vec![0i64; size]; size];
    for i in 0..size {
        for j in i + 1..size {
            let v = (next() % (2 * bound as u64 + 1)) as i64 - bound;
            b[i][j] = v;
            b[j][i] = -v;
        }
    }
    BasedMatrix { s: 0, b }
}

/// Deterministic pseudo-random graded test matrices.
pub fn random_graded_matrix(seed: u64, size: usize, bound: i64) -> GradedBasedMatrix {
    let base = random_based_matrix(seed, size, bound);
    let mut grade = vec![0i8];
    for i in 1..size {
        grade.push(if (seed >> (i % 60)) & 1 == 0 { 1 } else { -1 });
    }
    GradedBasedMatrix { base, grade }
}

/// The off-diagonal values of `T(alpha_{p,q})` grouped for test use: the
/// entry at `(e_i, e_{p+j})`.
pub fn family_pq_entry(p: usize, q: usize, i: usize, j: usize) -> i64 {
    ((p - i) + (q - j) + 1) as i64
}

/// Group permutation-string matrices used in tests by their permutation.
pub fn matrix_of_perm(sigma: &[usize]) -> BasedMatrix {
    BasedMatrix::from_string(&VirtualString::family_perm(sigma))
}

/// Multiset of row signatures; equal for isomorphic matrices (used as a fast
/// pre-filter by callers that bucket many matrices).
pub fn signature_key(t: &BasedMatrix) -> Vec<(i64, Vec<i64>)> {
    let mut sigs: Vec<(i64, Vec<i64>)> = t.non_basepoint().map(|g| t.signature(g)).collect();
    sigs.sort();
    sigs
}

/// Bucket helper: map from signature keys to matrices, for corpus tests.
pub fn bucket_by_signature<'a>(
    ts: impl Iterator<Item = &'a BasedMatrix>,
) -> BTreeMap<Vec<(i64, Vec<i64>)>, Vec<&'a BasedMatrix>> {
    let mut map: BTreeMap<_, Vec<&BasedMatrix>> = BTreeMap::new();
    for t in ts {
        map.entry(signature_key(t)).or_default().push(t);
    }
    map
}
