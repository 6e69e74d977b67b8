//! Fillings of based matrices, the genus `sigma`, hyperbolicity,
//! cobordism of matrices, and the slice-obstruction pipeline.

use serde_json::json;

use crate::matrix::{rank_int, BasedMatrix};
use crate::poly::{higher_u, u, IntPoly};
use crate::string::VirtualString;

/// Default cap on the number of elements of a matrix admitted to the
/// simple-filling search.
pub const DEFAULT_SIZE_CAP: usize = 16;

/// Default cap on search nodes for tuple-filling enumeration.
pub const DEFAULT_NODE_BUDGET: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FillingError {
    #[error("matrix has {size} elements, exceeding the filling size cap {cap}")]
    SizeCapExceeded { size: usize, cap: usize },
    #[error("filling enumeration exceeded the node budget {budget}")]
    NodeBudgetExceeded { budget: u64 },
    #[error("modulus {p} is too small, need at least 2")]
    BadModulus { p: u64 },
}

/// A partition of the element set of a based matrix into blocks of size
/// at most two, with the basepoint alone in its block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleFilling {
    blocks: Vec<Vec<usize>>,
}

impl SimpleFilling {
    pub fn new(t: &BasedMatrix, blocks: Vec<Vec<usize>>) -> Self {
        let mut seen = vec![false; t.size()];
        let mut has_basepoint_block = false;
        for block in &blocks {
            assert!(!block.is_empty() && block.len() <= 2, "bad block size");
            for &g in block {
                assert!(g < t.size() && !seen[g], "blocks must partition");
                seen[g] = true;
            }
            if block == &[t.s_index()] {
                has_basepoint_block = true;
            }
        }
        assert!(seen.iter().all(|&x| x), "blocks must cover every element");
        assert!(has_basepoint_block, "basepoint must form its own block");
        SimpleFilling { blocks }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// The skew-symmetric matrix `(b(X_i, X_j))` of the filling.
    pub fn matrix_of(&self, t: &BasedMatrix) -> Vec<Vec<i64>> {
        let n = self.blocks.len();
        let mut m = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut v = 0;
                for &g in &self.blocks[i] {
                    for &h in &self.blocks[j] {
                        v += t.entry(g, h);
                    }
                }
                m[i][j] = v;
            }
        }
        m
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!(self.blocks)
    }
}

/// Half the rank of the filling matrix.
fn half_rank(m: &[Vec<i64>]) -> usize {
    let r = rank_int(m);
    debug_assert!(r % 2 == 0);
    r / 2
}

/// The genus of a based matrix together with a minimizing filling.
pub fn sigma_certificate(
    t: &BasedMatrix,
    size_cap: usize,
) -> Result<(usize, SimpleFilling), FillingError> {
    if t.size() > size_cap {
        return Err(FillingError::SizeCapExceeded {
            size: t.size(),
            cap: size_cap,
        });
    }
    let elems: Vec<usize> = t.non_basepoint().collect();
    let mut blocks: Vec<Vec<usize>> = vec![vec![t.s_index()]];
    let mut used = vec![false; elems.len()];
    let mut best: Option<(usize, Vec<Vec<usize>>)> = None;
    search_matchings(t, &elems, &mut used, &mut blocks, &mut best);
    let (value, blocks) = best.expect("at least one filling exists");
    Ok((value, SimpleFilling::new(t, blocks)))
}

fn search_matchings(
    t: &BasedMatrix,
    elems: &[usize],
    used: &mut Vec<bool>,
    blocks: &mut Vec<Vec<usize>>,
    best: &mut Option<(usize, Vec<Vec<usize>>)>,
) {
    if let Some((0, _)) = best {
        return;
    }
    let first = match used.iter().position(|&x| !x) {
        Some(i) => i,
        None => {
            let filling = SimpleFilling {
                blocks: blocks.clone(),
            };
            let value = half_rank(&filling.matrix_of(t));
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                *best = Some((value, blocks.clone()));
            }
            return;
        }
    };
    used[first] = true;
    blocks.push(vec![elems[first]]);
    search_matchings(t, elems, used, blocks, best);
    blocks.pop();
    for j in first + 1..elems.len() {
        if used[j] {
            continue;
        }
        used[j] = true;
        blocks.push(vec![elems[first], elems[j]]);
        search_matchings(t, elems, used, blocks, best);
        blocks.pop();
        used[j] = false;
    }
    used[first] = false;
}

/// The genus of a based matrix: the minimum over all simple fillings of
/// half the rank of the filling matrix.
pub fn sigma(t: &BasedMatrix, size_cap: usize) -> Result<usize, FillingError> {
    sigma_certificate(t, size_cap).map(|(v, _)| v)
}

/// Whether the matrix has genus zero; returns the zero-matrix filling
/// when it does.
pub fn is_hyperbolic(
    t: &BasedMatrix,
    size_cap: usize,
) -> Result<Option<SimpleFilling>, FillingError> {
    let (value, filling) = sigma_certificate(t, size_cap)?;
    Ok(if value == 0 { Some(filling) } else { None })
}

/// A filling of a tuple of based matrices: short vectors over the joint
/// basis, one of which is the sum of all basepoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleFilling {
    sizes: Vec<usize>,
    basepoints: Vec<usize>,
    vectors: Vec<Vec<i64>>,
}

impl TupleFilling {
    pub fn vectors(&self) -> &[Vec<i64>] {
        &self.vectors
    }

    fn joint_entry(&self, ts: &[BasedMatrix], i: usize, j: usize) -> i64 {
        let mut offset = 0;
        for (t, size) in ts.iter().zip(&self.sizes) {
            let in_block = |x: usize| x >= offset && x < offset + size;
            if in_block(i) {
                return if in_block(j) {
                    t.entry(i - offset, j - offset)
                } else {
                    0
                };
            }
            offset += size;
        }
        0
    }

    /// The skew-symmetric matrix `(b(lambda_i, lambda_j))` of the filling.
    pub fn matrix_of(&self, ts: &[BasedMatrix]) -> Vec<Vec<i64>> {
        let n = self.vectors.len();
        let dim: usize = self.sizes.iter().sum();
        let mut m = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut v = 0;
                for g in 0..dim {
                    if self.vectors[i][g] == 0 {
                        continue;
                    }
                    for h in 0..dim {
                        if self.vectors[j][h] != 0 {
                            v += self.vectors[i][g]
                                * self.vectors[j][h]
                                * self.joint_entry(ts, g, h);
                        }
                    }
                }
                m[i][j] = v;
            }
        }
        m
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "sizes": self.sizes,
            "basepoints": self.basepoints,
            "vectors": self.vectors,
        })
    }
}

struct TupleSearch<'a> {
    ts: &'a [BasedMatrix],
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    basepoints: Vec<usize>,
    elems: Vec<usize>,
    owner: Vec<usize>,
    coeff_bound: i64,
    budget: u64,
    nodes: u64,
}

impl<'a> TupleSearch<'a> {
    fn new(ts: &'a [BasedMatrix], coeff_bound: i64, budget: u64) -> Self {
        let sizes: Vec<usize> = ts.iter().map(|t| t.size()).collect();
        let mut offsets = vec![0usize];
        for s in &sizes {
            offsets.push(offsets.last().unwrap() + s);
        }
        let dim = *offsets.last().unwrap();
        let mut basepoints = Vec::new();
        let mut elems = Vec::new();
        let mut owner = vec![0usize; dim];
        for (t, m) in ts.iter().enumerate() {
            for g in 0..m.size() {
                let joint = offsets[t] + g;
                owner[joint] = t;
                if g == m.s_index() {
                    basepoints.push(joint);
                } else {
                    elems.push(joint);
                }
            }
        }
        TupleSearch {
            ts,
            sizes,
            offsets,
            basepoints,
            elems,
            owner,
            coeff_bound,
            budget,
            nodes: 0,
        }
    }

    fn joint_entry(&self, i: usize, j: usize) -> i64 {
        let t = self.owner[i];
        if t != self.owner[j] {
            return 0;
        }
        self.ts[t].entry(i - self.offsets[t], j - self.offsets[t])
    }

    fn pair_vectors(&self, x: &[i64], y: &[i64]) -> i64 {
        let mut v = 0;
        for (g, &xg) in x.iter().enumerate() {
            if xg == 0 {
                continue;
            }
            for (h, &yh) in y.iter().enumerate() {
                if yh != 0 {
                    v += xg * yh * self.joint_entry(g, h);
                }
            }
        }
        v
    }

    fn basepoint_sum(&self) -> Vec<i64> {
        let dim = *self.offsets.last().unwrap();
        let mut v = vec![0i64; dim];
        for &s in &self.basepoints {
            v[s] = 1;
        }
        v
    }

    fn coeff_tuples(&self) -> Vec<Vec<i64>> {
        let r = self.ts.len();
        let mut out = vec![Vec::new()];
        for _ in 0..r {
            let mut next = Vec::new();
            for prefix in &out {
                for c in -self.coeff_bound..=self.coeff_bound {
                    let mut v = prefix.clone();
                    v.push(c);
                    next.push(v);
                }
            }
            out = next;
        }
        out
    }

    fn make_vector(&self, g: usize, partner: Option<usize>, coeffs: &[i64]) -> Vec<i64> {
        let dim = *self.offsets.last().unwrap();
        let mut v = vec![0i64; dim];
        v[g] = 1;
        if let Some(h) = partner {
            v[h] = 1;
        }
        for (t, &c) in coeffs.iter().enumerate() {
            v[self.basepoints[t]] += c;
        }
        v
    }

    fn finish(&self, vectors: Vec<Vec<i64>>) -> TupleFilling {
        TupleFilling {
            sizes: self.sizes.clone(),
            basepoints: self.basepoints.clone(),
            vectors,
        }
    }

    /// Depth-first search for a filling whose matrix is zero.
    fn zero_search(
        &mut self,
        used: &mut Vec<bool>,
        vectors: &mut Vec<Vec<i64>>,
    ) -> Result<Option<TupleFilling>, FillingError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(FillingError::NodeBudgetExceeded {
                budget: self.budget,
            });
        }
        let first = match used.iter().position(|&x| !x) {
            Some(i) => i,
            None => return Ok(Some(self.finish(vectors.clone()))),
        };
        let g = self.elems[first];
        used[first] = true;
        let tuples = self.coeff_tuples();
        let mut partners: Vec<Option<usize>> = vec![None];
        partners.extend((first + 1..self.elems.len()).filter(|&j| !used[j]).map(Some));
        for partner_idx in partners {
            if let Some(j) = partner_idx {
                used[j] = true;
            }
            let partner = partner_idx.map(|j| self.elems[j]);
            for coeffs in &tuples {
                let v = self.make_vector(g, partner, coeffs);
                if vectors.iter().all(|w| self.pair_vectors(&v, w) == 0) {
                    vectors.push(v);
                    if let Some(found) = self.zero_search(used, vectors)? {
                        return Ok(Some(found));
                    }
                    vectors.pop();
                }
            }
            if let Some(j) = partner_idx {
                used[j] = false;
            }
        }
        used[first] = false;
        Ok(None)
    }

    /// Exhaustive minimum of half the filling-matrix rank over all
    /// fillings with bounded basepoint coefficients.
    fn min_search(
        &mut self,
        used: &mut Vec<bool>,
        vectors: &mut Vec<Vec<i64>>,
        best: &mut Option<(usize, Vec<Vec<i64>>)>,
    ) -> Result<(), FillingError> {
        if let Some((0, _)) = best {
            return Ok(());
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(FillingError::NodeBudgetExceeded {
                budget: self.budget,
            });
        }
        let first = match used.iter().position(|&x| !x) {
            Some(i) => i,
            None => {
                let filling = self.finish(vectors.clone());
                let value = half_rank(&filling.matrix_of(self.ts));
                if best.as_ref().is_none_or(|(v, _)| value < *v) {
                    *best = Some((value, vectors.clone()));
                }
                return Ok(());
            }
        };
        let g = self.elems[first];
        used[first] = true;
        let tuples = self.coeff_tuples();
        let mut partners: Vec<Option<usize>> = vec![None];
        partners.extend((first + 1..self.elems.len()).filter(|&j| !used[j]).map(Some));
        for partner_idx in partners {
            if let Some(j) = partner_idx {
                used[j] = true;
            }
            let partner = partner_idx.map(|j| self.elems[j]);
            for coeffs in &tuples {
                let v = self.make_vector(g, partner, coeffs);
                vectors.push(v);
                self.min_search(used, vectors, best)?;
                vectors.pop();
            }
            if let Some(j) = partner_idx {
                used[j] = false;
            }
        }
        used[first] = false;
        Ok(())
    }
}

/// Searches for a tuple filling of `ts` with zero matrix, with basepoint
/// coefficients bounded by `coeff_bound`.
pub fn zero_tuple_filling(
    ts: &[BasedMatrix],
    coeff_bound: i64,
    budget: u64,
) -> Result<Option<TupleFilling>, FillingError> {
    let mut search = TupleSearch::new(ts, coeff_bound, budget);
    let mut used = vec![false; search.elems.len()];
    let mut vectors = vec![search.basepoint_sum()];
    search.zero_search(&mut used, &mut vectors)
}

/// Upper bound for the tuple genus: the exact minimum over fillings with
/// basepoint coefficients bounded by `coeff_bound`.
pub fn tuple_sigma_upper(
    ts: &[BasedMatrix],
    coeff_bound: i64,
    budget: u64,
) -> Result<(usize, TupleFilling), FillingError> {
    if let Some(filling) = zero_tuple_filling(ts, coeff_bound, budget)? {
        return Ok((0, filling));
    }
    let mut search = TupleSearch::new(ts, coeff_bound, budget);
    let mut used = vec![false; search.elems.len()];
    let mut vectors = vec![search.basepoint_sum()];
    let mut best = None;
    search.min_search(&mut used, &mut vectors, &mut best)?;
    let (value, vectors) = best.expect("at least one filling exists");
    Ok((value, search.finish(vectors)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cobordism {
    Cobordant(TupleFilling),
    Unknown,
}

/// Decides whether two based matrices admit a zero-matrix filling of
/// `(T1, -T2)` within the coefficient bound.  `Cobordant` is sound;
/// `Unknown` is inconclusive (bound or budget too small, or genuinely
/// non-cobordant).
pub fn cobordant_matrices(t1: &BasedMatrix, t2: &BasedMatrix, coeff_bound: i64) -> Cobordism {
    let ts = [t1.clone(), t2.negate()];
    match zero_tuple_filling(&ts, coeff_bound, DEFAULT_NODE_BUDGET) {
        Ok(Some(filling)) => Cobordism::Cobordant(filling),
        _ => Cobordism::Unknown,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceWitness {
    NonzeroPolynomial { name: String, poly: IntPoly },
    NonHyperbolic { sigma: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SliceVerdict {
    NotSlice(SliceWitness),
    NoObstructionFound,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstructionReport {
    pub verdict: SliceVerdict,
    pub checked: Vec<(String, String)>,
}

impl ObstructionReport {
    pub fn to_json(&self) -> serde_json::Value {
        let verdict = match &self.verdict {
            SliceVerdict::NotSlice(w) => match w {
                SliceWitness::NonzeroPolynomial { name, poly } => json!({
                    "verdict": "NotSlice",
                    "witness": {"kind": "nonzero-polynomial", "name": name, "value": poly.to_text()},
                }),
                SliceWitness::NonHyperbolic { sigma } => json!({
                    "verdict": "NotSlice",
                    "witness": {"kind": "non-hyperbolic-matrix", "sigma": sigma},
                }),
            },
            SliceVerdict::NoObstructionFound => json!({"verdict": "NoObstructionFound"}),
        };
        let checked: Vec<serde_json::Value> = self
            .checked
            .iter()
            .map(|(k, v)| json!({"invariant": k, "value": v}))
            .collect();
        json!({"report": verdict, "checked": checked})
    }
}

fn cover_sequences(depth: u64, r_max: u64) -> Vec<Vec<u64>> {
    let mut out: Vec<Vec<u64>> = vec![Vec::new()];
    let mut level: Vec<Vec<u64>> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for prefix in &level {
            for r in 1..=r_max {
                let mut s = prefix.clone();
                s.push(r);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out.retain(|s| !s.is_empty());
    out
}

/// Runs the covering-polynomial and hyperbolicity obstructions against
/// sliceness of a string.
pub fn slice_obstruction(
    a: &VirtualString,
    cover_depth: u64,
    r_max: u64,
    size_cap: usize,
) -> Result<ObstructionReport, FillingError> {
    assert!(cover_depth >= 1 && r_max >= 1);
    let mut checked = Vec::new();
    for seq in cover_sequences(cover_depth, r_max) {
        let p = higher_u(a, &seq);
        let name = format!(
            "u^({})",
            seq.iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        checked.push((name.clone(), p.to_text()));
        if !p.is_zero() {
            return Ok(ObstructionReport {
                verdict: SliceVerdict::NotSlice(SliceWitness::NonzeroPolynomial { name, poly: p }),
                checked,
            });
        }
    }
    let t = BasedMatrix::from_string(a);
    let genus = sigma(&t.primitive_reduce(), size_cap)?;
    checked.push(("sigma".into(), genus.to_string()));
    if genus > 0 {
        return Ok(ObstructionReport {
            verdict: SliceVerdict::NotSlice(SliceWitness::NonHyperbolic { sigma: genus }),
            checked,
        });
    }
    Ok(ObstructionReport {
        verdict: SliceVerdict::NoObstructionFound,
        checked,
    })
}

fn modp(x: i64, p: i64) -> i64 {
    ((x % p) + p) % p
}

/// The substring of `a` keeping the arrows `e` with `B([e], h) = 0`
/// modulo `p`, where `B` is the based-matrix pairing and `h` is given in
/// the basis `s, e_1, ..., e_m`.
pub fn alpha_h(a: &VirtualString, p: u64, h: &[i64]) -> Result<VirtualString, FillingError> {
    if p < 2 {
        return Err(FillingError::BadModulus { p });
    }
    let p = p as i64;
    let t = BasedMatrix::from_string(a);
    assert_eq!(h.len(), t.size(), "h must have one entry per basis element");
    let m = a.rank();
    let keep: Vec<bool> = (0..m)
        .map(|e| {
            let row = e + 1;
            let pairing: i64 = (0..t.size()).map(|j| t.entry(row, j) * h[j]).sum();
            modp(pairing, p) == 0
        })
        .collect();
    Ok(a.substring(&keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagrangianScan {
    NotSlice,
    NoObstructionFound,
    BudgetExceeded,
}

fn inverse_mod(a: i64, p: i64) -> i64 {
    let mut t = (0i64, 1i64);
    let mut r = (p, modp(a, p));
    while r.1 != 0 {
        let q = r.0 / r.1;
        t = (t.1, t.0 - q * t.1);
        r = (r.1, r.0 - q * r.1);
    }
    assert_eq!(r.0, 1, "not invertible");
    modp(t.0, p)
}

/// Reduced row echelon form over the prime field of order `p`; zero rows
/// are dropped and rows are sorted by pivot column.
fn echelon_mod(rows: &[Vec<i64>], p: i64) -> Vec<Vec<i64>> {
    let mut rows: Vec<Vec<i64>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| modp(x, p)).collect())
        .collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut pivot_row = 0;
    for col in 0..cols {
        let Some(found) = (pivot_row..rows.len()).find(|&i| rows[i][col] != 0) else {
            continue;
        };
        rows.swap(pivot_row, found);
        let inv = inverse_mod(rows[pivot_row][col], p);
        for x in rows[pivot_row].iter_mut() {
            *x = modp(*x * inv, p);
        }
        for i in 0..rows.len() {
            if i != pivot_row && rows[i][col] != 0 {
                let factor = rows[i][col];
                for j in 0..cols {
                    rows[i][j] = modp(rows[i][j] - factor * rows[pivot_row][j], p);
                }
            }
        }
        pivot_row += 1;
        if pivot_row == rows.len() {
            break;
        }
    }
    rows.truncate(pivot_row);
    rows
}

fn in_span(span: &[Vec<i64>], v: &[i64], p: i64) -> bool {
    let mut v: Vec<i64> = v.iter().map(|&x| modp(x, p)).collect();
    for row in span {
        let col = row.iter().position(|&x| x != 0).unwrap();
        if v[col] != 0 {
            let factor = v[col];
            for j in 0..v.len() {
                v[j] = modp(v[j] - factor * row[j], p);
            }
        }
    }
    v.iter().all(|&x| x == 0)
}

/// Basis of the solutions of `m x = 0` over the prime field of order `p`.
fn nullspace_mod(m: &[Vec<i64>], cols: usize, p: i64) -> Vec<Vec<i64>> {
    let ech = echelon_mod(m, p);
    let pivots: Vec<usize> = ech
        .iter()
        .map(|r| r.iter().position(|&x| x != 0).unwrap())
        .collect();
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivots.contains(&free) {
            continue;
        }
        let mut v = vec![0i64; cols];
        v[free] = 1;
        for (row, &piv) in ech.iter().zip(&pivots) {
            v[piv] = modp(-row[free], p);
        }
        basis.push(v);
    }
    basis
}

fn span_elements(basis: &[Vec<i64>], cols: usize, p: i64) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0i64; cols]];
    for b in basis {
        let mut next = Vec::new();
        for prefix in &out {
            for c in 0..p {
                let v: Vec<i64> = prefix
                    .iter()
                    .zip(b)
                    .map(|(&x, &y)| modp(x + c * y, p))
                    .collect();
                next.push(v);
            }
        }
        out = next;
    }
    out
}

struct LagrangianSearch {
    pairing: Vec<Vec<i64>>,
    dim: usize,
    p: i64,
    target_dim: usize,
    budget: u64,
    nodes: u64,
    seen: std::collections::BTreeSet<Vec<Vec<i64>>>,
}

impl LagrangianSearch {
    /// Visits every Lagrangian containing the starting span; returns
    /// `Some(true)` if all visited Lagrangians contain a witness.
    fn run<F>(&mut self, span: Vec<Vec<i64>>, has_witness: &mut F) -> Option<bool>
    where
        F: FnMut(&[Vec<i64>]) -> bool,
    {
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        if span.len() == self.target_dim {
            return Some(has_witness(&span));
        }
        let constraint: Vec<Vec<i64>> = span
            .iter()
            .map(|v| {
                (0..self.dim)
                    .map(|j| {
                        modp(
                            (0..self.dim).map(|i| v[i] * self.pairing[i][j]).sum::<i64>(),
                            self.p,
                        )
                    })
                    .collect()
            })
            .collect();
        let ann = nullspace_mod(&constraint, self.dim, self.p);
        let mut all_fail = true;
        for v in span_elements(&ann, self.dim, self.p) {
            if v.iter().all(|&x| x == 0) || in_span(&span, &v, self.p) {
                continue;
            }
            let mut bigger = span.clone();
            bigger.push(v);
            let bigger = echelon_mod(&bigger, self.p);
            if !self.seen.insert(bigger.clone()) {
                continue;
            }
            match self.run(bigger, has_witness) {
                Some(true) => {}
                Some(false) => all_fail = false,
                None => return None,
            }
        }
        Some(all_fail)
    }
}

/// Scans all Lagrangians of the mod-`p` pairing that contain the core
/// class `s`, testing every element `h` via `u(alpha_h)` and the
/// hyperbolicity of the primitive matrix of `alpha_h`.
pub fn lagrangian_scan(a: &VirtualString, p: u64, budget: u64) -> LagrangianScan {
    assert!(p >= 2 && (2..p).all(|d| p % d != 0), "p must be prime");
    let pi = p as i64;
    let t = BasedMatrix::from_string(a);
    let dim = t.size();
    let pairing: Vec<Vec<i64>> = (0..dim)
        .map(|i| (0..dim).map(|j| modp(t.entry(i, j), pi)).collect())
        .collect();
    let rank2 = {
        let ech = echelon_mod(&pairing, pi);
        ech.len()
    };
    debug_assert!(rank2 % 2 == 0);
    let target_dim = dim - rank2 / 2;
    let radical = nullspace_mod(&pairing, dim, pi);
    let mut start = radical;
    let mut s_vec = vec![0i64; dim];
    s_vec[t.s_index()] = 1;
    start.push(s_vec);
    let start = echelon_mod(&start, pi);
    let mut search = LagrangianSearch {
        pairing,
        dim,
        p: pi,
        target_dim,
        budget,
        nodes: 0,
        seen: std::collections::BTreeSet::new(),
    };
    let mut has_witness = |span: &[Vec<i64>]| {
        for h in span_elements(span, dim, pi) {
            let sub = alpha_h(a, p, &h).expect("modulus checked");
            if !u(&sub).is_zero() {
                return true;
            }
            let ts = BasedMatrix::from_string(&sub).primitive_reduce();
            match sigma(&ts, DEFAULT_SIZE_CAP) {
                Ok(0) => {}
                _ => return true,
            }
        }
        false
    };
    match search.run(start, &mut has_witness) {
        None => LagrangianScan::BudgetExceeded,
        Some(true) => LagrangianScan::NotSlice,
        Some(false) => LagrangianScan::NoObstructionFound,
    }
}
