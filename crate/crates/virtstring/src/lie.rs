//! The Lie cobracket on string classes, the open-string comodule,
//! surgery along unlinked arrow sets, the tree function eta, and the
//! zeta expansion into arrow-diagram monomials.

use std::collections::{BTreeMap, HashMap};

use num_rational::Rational64;
use num_traits::Zero;

use crate::moves::{normalize, normalize_open, StringClassKey};
use crate::string::{ArrowDiagram, OpenString, Token, VirtualString};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LieError {
    #[error("arrows {e} and {f} are linked")]
    LinkedArrows { e: usize, f: usize },
    #[error("edge list does not form an oriented tree: {0}")]
    NotATree(String),
    #[error("too many vertices for the subset dynamic: {vertices}")]
    TooManyVertices { vertices: usize },
}

/// A tensor monomial (ordered factors) or a product monomial (sorted
/// factors), with an optional power of the variable z.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub z: u32,
    pub tensor: bool,
    pub factors: Vec<String>,
}

impl Monomial {
    pub fn tensor(z: u32, factors: Vec<String>) -> Monomial {
        Monomial {
            z,
            tensor: true,
            factors,
        }
    }

    pub fn product(z: u32, mut factors: Vec<String>) -> Monomial {
        factors.sort();
        Monomial {
            z,
            tensor: false,
            factors,
        }
    }
}

/// A rational combination of monomials; records the normalization
/// budget its class keys were computed with so that sums built under
/// different budgets are never compared silently.
#[derive(Debug, Clone)]
pub struct FormalSum {
    caps: u64,
    terms: BTreeMap<Monomial, Rational64>,
}

impl PartialEq for FormalSum {
    fn eq(&self, other: &FormalSum) -> bool {
        assert_eq!(
            self.caps, other.caps,
            "formal sums built with different normalization budgets are not comparable"
        );
        self.terms == other.terms
    }
}

impl Eq for FormalSum {}

impl FormalSum {
    pub fn zero(caps: u64) -> FormalSum {
        FormalSum {
            caps,
            terms: BTreeMap::new(),
        }
    }

    pub fn caps(&self) -> u64 {
        self.caps
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Rational64> {
        &self.terms
    }

    pub fn add_term(&mut self, mono: Monomial, coeff: Rational64) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry(mono).or_insert_with(Rational64::zero);
        *entry += coeff;
        if entry.is_zero() {
            let key = self
                .terms
                .iter()
                .find(|(_, c)| c.is_zero())
                .map(|(m, _)| m.clone())
                .expect("just inserted");
            self.terms.remove(&key);
        }
    }

    pub fn add(&mut self, other: &FormalSum) {
        assert_eq!(
            self.caps, other.caps,
            "formal sums built with different normalization budgets are not comparable"
        );
        for (mono, coeff) in &other.terms {
            self.add_term(mono.clone(), *coeff);
        }
    }

    pub fn neg(&self) -> FormalSum {
        FormalSum {
            caps: self.caps,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    /// Swaps the two factors of every binary tensor monomial.
    pub fn swap_tensor(&self) -> FormalSum {
        let mut out = FormalSum::zero(self.caps);
        for (mono, coeff) in &self.terms {
            assert!(mono.tensor && mono.factors.len() == 2);
            let swapped = Monomial::tensor(
                mono.z,
                vec![mono.factors[1].clone(), mono.factors[0].clone()],
            );
            out.add_term(swapped, *coeff);
        }
        out
    }

    /// Scales every coefficient.
    pub fn scale(&self, factor: Rational64) -> FormalSum {
        let mut out = FormalSum::zero(self.caps);
        for (mono, coeff) in &self.terms {
            out.add_term(mono.clone(), coeff * factor);
        }
        out
    }

    /// Raises the z-power of every monomial.
    pub fn shift_z(&self, by: u32) -> FormalSum {
        let mut out = FormalSum::zero(self.caps);
        for (mono, coeff) in &self.terms {
            let mut shifted = mono.clone();
            shifted.z += by;
            out.add_term(shifted, *coeff);
        }
        out
    }

    /// Multiplies two sums of product monomials.
    pub fn mul(&self, other: &FormalSum) -> FormalSum {
        assert_eq!(
            self.caps, other.caps,
            "formal sums built with different normalization budgets are not comparable"
        );
        let mut out = FormalSum::zero(self.caps);
        for (a, ca) in &self.terms {
            assert!(!a.tensor);
            for (b, cb) in &other.terms {
                assert!(!b.tensor);
                let mut factors = a.factors.clone();
                factors.extend(b.factors.iter().cloned());
                out.add_term(Monomial::product(a.z + b.z, factors), ca * cb);
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let list: Vec<serde_json::Value> = self
            .terms
            .iter()
            .map(|(mono, coeff)| {
                serde_json::json!({
                    "coeff": format!("{}/{}", coeff.numer(), coeff.denom()),
                    "z": mono.z,
                    "tensor": mono.tensor,
                    "factors": mono.factors,
                })
            })
            .collect();
        serde_json::Value::Array(list)
    }
}

pub(crate) fn class_key(key: &StringClassKey) -> Option<String> {
    match key {
        StringClassKey::Zero => None,
        StringClassKey::Code(code) => Some(code.key()),
    }
}

/// The Lie cobracket: each arrow splits the circle into two arcs, each
/// arc closes up into a string keeping the arrows it fully contains,
/// and the two pieces contribute an antisymmetrized tensor; terms with
/// a homotopically trivial piece vanish.
pub fn cobracket(s: &VirtualString, caps: u64) -> FormalSum {
    let mut out = FormalSum::zero(caps);
    let m = s.rank();
    let len = 2 * m;
    let (tails, heads) = s.endpoints();
    let inside = |lo: usize, hi: usize, i: usize| {
        i != lo && i != hi && (i + len - lo) % len < (hi + len - lo) % len
    };
    for e in 0..m {
        let (a, b) = (tails[e], heads[e]);
        let mut keep1 = vec![false; m];
        let mut keep2 = vec![false; m];
        for f in 0..m {
            if f == e {
                continue;
            }
            if inside(a, b, tails[f]) && inside(a, b, heads[f]) {
                keep1[f] = true;
            }
            if inside(b, a, tails[f]) && inside(b, a, heads[f]) {
                keep2[f] = true;
            }
        }
        let k1 = normalize(&s.substring(&keep1), caps);
        let k2 = normalize(&s.substring(&keep2), caps);
        let (Some(k1), Some(k2)) = (class_key(&k1), class_key(&k2)) else {
            continue;
        };
        out.add_term(Monomial::tensor(0, vec![k1.clone(), k2.clone()]), 1.into());
        out.add_term(Monomial::tensor(0, vec![k2, k1]), (-1).into());
    }
    out
}

/// Applies the cobracket to the last factor of every tensor monomial.
fn cobracket_on_last(sum: &FormalSum, caps: u64) -> FormalSum {
    let mut out = FormalSum::zero(caps);
    for (mono, coeff) in sum.terms() {
        let last = mono.factors.last().expect("tensor monomials are nonempty");
        let rep = VirtualString::parse(last).expect("class keys are parseable");
        for (inner, inner_coeff) in cobracket(&rep, caps).terms() {
            let mut factors = mono.factors[..mono.factors.len() - 1].to_vec();
            factors.extend(inner.factors.iter().cloned());
            out.add_term(Monomial::tensor(mono.z, factors), coeff * inner_coeff);
        }
    }
    out
}

/// The n-fold cobracket, expanding the last tensor factor at each step.
pub fn iterated_cobracket(s: &VirtualString, n: usize, caps: u64) -> FormalSum {
    assert!(n >= 1);
    let mut cur = cobracket(s, caps);
    for _ in 1..n {
        cur = cobracket_on_last(&cur, caps);
    }
    cur
}

/// Checks antisymmetry of the cobracket and the co-Jacobi identity:
/// the cyclic sum of (id (x) cobracket) applied to the cobracket
/// vanishes.
pub fn cojacobi_check(s: &VirtualString, caps: u64) -> bool {
    let nu = cobracket(s, caps);
    if nu.swap_tensor() != nu.neg() {
        return false;
    }
    let expanded = cobracket_on_last(&nu, caps);
    let mut total = FormalSum::zero(caps);
    for (mono, coeff) in expanded.terms() {
        let f = &mono.factors;
        for shift in 0..3 {
            let rotated: Vec<String> = (0..3).map(|i| f[(i + shift) % 3].clone()).collect();
            total.add_term(Monomial::tensor(mono.z, rotated), *coeff);
        }
    }
    total.is_zero()
}

const OPEN_PREFIX: &str = "open:";

/// The comodule structure on open-string classes: surgery along each
/// arrow splits the open string into a closed piece and an open piece,
/// signed by the orientation of the arrow.
pub fn comodule_rho(mu: &OpenString, caps: u64) -> FormalSum {
    let mut out = FormalSum::zero(caps);
    let code = mu.code();
    let m = mu.rank();
    let mut tail_pos = vec![0usize; m];
    let mut head_pos = vec![0usize; m];
    for (p, &(id, role)) in code.iter().enumerate() {
        if role == crate::string::Role::Tail {
            tail_pos[id] = p;
        } else {
            head_pos[id] = p;
        }
    }
    for e in 0..m {
        let (i, j) = (tail_pos[e], head_pos[e]);
        let (lo, hi) = (i.min(j), i.max(j));
        let mut keep_in = vec![false; m];
        let mut keep_out = vec![false; m];
        for f in 0..m {
            if f == e {
                continue;
            }
            let (tf, hf) = (tail_pos[f], head_pos[f]);
            if lo < tf && tf < hi && lo < hf && hf < hi {
                keep_in[f] = true;
            } else if (tf < lo || tf > hi) && (hf < lo || hf > hi) {
                keep_out[f] = true;
            }
        }
        let alpha = mu.substring(&keep_in).closure();
        let beta = mu.substring(&keep_out);
        let Some(closed_key) = class_key(&normalize(&alpha, caps)) else {
            continue;
        };
        let open_key = format!("{OPEN_PREFIX}{}", normalize_open(&beta, caps).key());
        let sign: Rational64 = if i < j { 1.into() } else { (-1).into() };
        out.add_term(Monomial::tensor(0, vec![closed_key, open_key]), sign);
    }
    out
}

/// Closes the open second factor of every comodule term, dropping terms
/// whose closure is trivial, and antisymmetrizes; the result equals the
/// cobracket of the closure.
pub fn close_comodule(rho: &FormalSum, caps: u64) -> FormalSum {
    let mut closed = FormalSum::zero(caps);
    for (mono, coeff) in rho.terms() {
        let open_text = mono.factors[1]
            .strip_prefix(OPEN_PREFIX)
            .expect("second comodule factor is an open class key");
        let beta = OpenString::parse(open_text).expect("class keys are parseable");
        let Some(key) = class_key(&normalize(&beta.closure(), caps)) else {
            continue;
        };
        closed.add_term(
            Monomial::tensor(mono.z, vec![mono.factors[0].clone(), key]),
            *coeff,
        );
    }
    let mut out = closed.clone();
    out.add(&closed.swap_tensor().neg());
    out
}

/// An oriented tree or forest given by a vertex count and directed
/// edges; the underlying undirected graph is acyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedTree {
    vertices: usize,
    edges: Vec<(usize, usize)>,
}

const VERTEX_CAP: usize = 24;

fn acyclic_components(vertices: usize, edges: &[(usize, usize)]) -> Result<usize, LieError> {
    let mut parent: Vec<usize> = (0..vertices).collect();
    fn root(parent: &mut Vec<usize>, mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    let mut components = vertices;
    for &(a, b) in edges {
        if a >= vertices || b >= vertices {
            return Err(LieError::NotATree(format!(
                "edge ({a},{b}) out of range for {vertices} vertices"
            )));
        }
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra == rb {
            return Err(LieError::NotATree(format!("edge ({a},{b}) closes a cycle")));
        }
        parent[ra] = rb;
        components -= 1;
    }
    Ok(components)
}

impl OrientedTree {
    pub fn new(vertices: usize, edges: Vec<(usize, usize)>) -> Result<OrientedTree, LieError> {
        if vertices > VERTEX_CAP {
            return Err(LieError::TooManyVertices { vertices });
        }
        if vertices == 0 {
            return Err(LieError::NotATree("a tree has at least one vertex".into()));
        }
        if acyclic_components(vertices, &edges)? != 1 {
            return Err(LieError::NotATree("the edge list is not connected".into()));
        }
        Ok(OrientedTree { vertices, edges })
    }

    /// A forest: acyclic but possibly disconnected.
    pub fn forest(vertices: usize, edges: Vec<(usize, usize)>) -> Result<OrientedTree, LieError> {
        if vertices > VERTEX_CAP {
            return Err(LieError::TooManyVertices { vertices });
        }
        acyclic_components(vertices, &edges)?;
        Ok(OrientedTree { vertices, edges })
    }

    pub fn single_vertex() -> OrientedTree {
        OrientedTree {
            vertices: 1,
            edges: Vec::new(),
        }
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn components(&self) -> usize {
        acyclic_components(self.vertices, &self.edges).expect("validated on construction")
    }

    pub fn reverse_edge(&self, k: usize) -> OrientedTree {
        let mut edges = self.edges.clone();
        let (a, b) = edges[k];
        edges[k] = (b, a);
        OrientedTree {
            vertices: self.vertices,
            edges,
        }
    }

    /// Contracts the k-th edge, identifying its endpoints.
    pub fn contract_edge(&self, k: usize) -> OrientedTree {
        let (a, b) = self.edges[k];
        let merge = |v: usize| {
            let v = if v == b { a } else { v };
            if v > b {
                v - 1
            } else {
                v
            }
        };
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, &(x, y))| (merge(x), merge(y)))
            .collect();
        OrientedTree {
            vertices: self.vertices - 1,
            edges,
        }
    }
}

/// The alternating level-count series of an oriented forest: for each
/// n, counts the surjective level functions onto {1..n} that increase
/// strictly along every edge, and sums them with weight (-1)^(n+1)/n.
pub fn eta(t: &OrientedTree) -> Rational64 {
    let v = t.vertices;
    if v == 0 {
        return Rational64::zero();
    }
    let full: u32 = (1u32 << v) - 1;
    let mut preds = vec![0u32; v];
    for &(a, b) in &t.edges {
        preds[b] |= 1 << a;
    }
    let mut level: HashMap<u32, i64> = HashMap::from([(0, 1)]);
    let mut out = Rational64::zero();
    for n in 1..=v as i64 {
        let mut next: HashMap<u32, i64> = HashMap::new();
        for (&mask, &count) in &level {
            let mut eligible: u32 = 0;
            for (b, &p) in preds.iter().enumerate() {
                if mask & (1 << b) == 0 && p & !mask == 0 {
                    eligible |= 1 << b;
                }
            }
            let mut sub = eligible;
            while sub != 0 {
                *next.entry(mask | sub).or_insert(0) += count;
                sub = (sub - 1) & eligible;
            }
        }
        level = next;
        if let Some(&count) = level.get(&full) {
            let sign = if n % 2 == 1 { 1 } else { -1 };
            out += Rational64::new(sign * count, n);
        }
    }
    out
}

pub(crate) fn arrows_linked(tails: &[usize], heads: &[usize], len: usize, e: usize, f: usize) -> bool {
    let between = |i: usize| {
        i != tails[e] && i != heads[e] && (i + len - tails[e]) % len < (heads[e] + len - tails[e]) % len
    };
    between(tails[f]) != between(heads[f])
}

/// All pairwise-unlinked arrow subsets, in increasing-index order.
pub fn special_subsets(s: &VirtualString) -> Vec<Vec<usize>> {
    let m = s.rank();
    let len = 2 * m;
    let (tails, heads) = s.endpoints();
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    fn grow(
        next: usize,
        m: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        linked: &dyn Fn(usize, usize) -> bool,
    ) {
        out.push(chosen.clone());
        for e in next..m {
            if chosen.iter().all(|&f| !linked(e, f)) {
                chosen.push(e);
                grow(e + 1, m, chosen, out, linked);
                chosen.pop();
            }
        }
    }
    let linked = |e: usize, f: usize| arrows_linked(&tails, &heads, len, e, f);
    grow(0, m, &mut chosen, &mut out, &linked);
    out
}

/// Performs surgery along every arrow of the pairwise-unlinked set `f`,
/// returning the resulting strings and the oriented tree whose edges
/// run from the piece on the tail side of each surgered arrow to the
/// piece on its head side.
pub fn surgery_special(
    s: &VirtualString,
    f: &[usize],
) -> Result<(Vec<VirtualString>, OrientedTree), LieError> {
    let m = s.rank();
    let len = 2 * m;
    let (tails, heads) = s.endpoints();
    for (i, &e) in f.iter().enumerate() {
        assert!(e < m, "arrow index out of range");
        for &g in &f[i + 1..] {
            assert_ne!(e, g, "duplicate arrow in the surgery set");
            if arrows_linked(&tails, &heads, len, e, g) {
                return Err(LieError::LinkedArrows { e, f: g });
            }
        }
    }
    if len == 0 {
        return Ok((vec![VirtualString::trivial()], OrientedTree::single_vertex()));
    }
    // The signature of the gap after position i records which surgered
    // chords have that gap on their tail-to-head side; gaps with equal
    // signatures end up on the same piece.
    let in_chord = |e: usize, i: usize| (i + len - tails[e]) % len < (heads[e] + len - tails[e]) % len;
    let signature = |i: usize| -> u64 {
        f.iter()
            .enumerate()
            .fold(0u64, |acc, (k, &e)| acc | ((in_chord(e, i) as u64) << k))
    };
    let mut piece_of_sig: BTreeMap<u64, usize> = BTreeMap::new();
    let mut gap_piece = vec![0usize; len];
    for i in 0..len {
        let sig = signature(i);
        let next = piece_of_sig.len();
        gap_piece[i] = *piece_of_sig.entry(sig).or_insert(next);
    }
    let pieces = piece_of_sig.len();
    let in_f = |e: usize| f.contains(&e);
    let arrow_piece = |e: usize| -> Option<usize> {
        if in_f(e) {
            return None;
        }
        let p = gap_piece[tails[e]];
        if p == gap_piece[heads[e]] {
            Some(p)
        } else {
            None
        }
    };
    let mut piece_tokens: Vec<Vec<Token>> = vec![Vec::new(); pieces];
    let code = s.code();
    for (pos, &(id, role)) in code.iter().enumerate() {
        if arrow_piece(id) == Some(gap_piece[pos]) {
            piece_tokens[gap_piece[pos]].push((id, role));
        }
    }
    let strings: Vec<VirtualString> = piece_tokens
        .into_iter()
        .map(|tokens| VirtualString::new(crate::moves::relabel_tokens(&tokens)))
        .collect();
    let edges: Vec<(usize, usize)> = f
        .iter()
        .map(|&e| (gap_piece[tails[e]], gap_piece[heads[e]]))
        .collect();
    let tree = OrientedTree::new(pieces, edges)?;
    Ok((strings, tree))
}

pub(crate) fn diagram_key(piece: &VirtualString) -> String {
    let (tokens, signs) = ArrowDiagram::all_plus(piece.clone()).canonical_key();
    ArrowDiagram::new(VirtualString::new(tokens), signs).serialize()
}

/// The expansion of a string into arrow-diagram monomials: one summand
/// per pairwise-unlinked arrow subset, weighted by eta of the surgery
/// tree and a power of z counting the surgered arrows.
pub fn zeta(s: &VirtualString) -> FormalSum {
    let mut out = FormalSum::zero(0);
    for f in special_subsets(s) {
        let (pieces, tree) = surgery_special(s, &f).expect("subsets are pairwise unlinked");
        let factors: Vec<String> = pieces.iter().map(diagram_key).collect();
        out.add_term(Monomial::product(f.len() as u32, factors), eta(&tree));
    }
    out
}

/// The number of raw summands of the zeta expansion.
pub fn zeta_terms(s: &VirtualString) -> usize {
    special_subsets(s).len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::{apply_move, legal_moves};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CAPS: u64 = 10_000;

    fn key_of(s: &VirtualString) -> String {
        class_key(&normalize(s, CAPS)).expect("nontrivial class")
    }

    fn tensor2(a: &str, b: &str) -> Monomial {
        Monomial::tensor(0, vec![a.to_string(), b.to_string()])
    }

    #[test]
    fn eta_small_examples() {
        assert_eq!(eta(&OrientedTree::single_vertex()), Rational64::from(1));
        let edge = OrientedTree::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(eta(&edge), Rational64::new(-1, 2));
        let path = OrientedTree::new(3, vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(eta(&path), Rational64::new(1, 3));
        let star = OrientedTree::new(3, vec![(0, 1), (0, 2)]).unwrap();
        assert_eq!(eta(&star), Rational64::new(1, 6));
    }

    fn random_tree(rng: &mut ChaCha8Rng, vertices: usize) -> OrientedTree {
        let mut edges = Vec::new();
        for v in 1..vertices {
            let other = rng.gen_range(0..v);
            if rng.gen_bool(0.5) {
                edges.push((other, v));
            } else {
                edges.push((v, other));
            }
        }
        OrientedTree::new(vertices, edges).unwrap()
    }

    #[test]
    fn eta_edge_reversal_and_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let size = rng.gen_range(2..=6);
            let t = random_tree(&mut rng, size);
            for k in 0..t.edges().len() {
                let sum = eta(&t) + eta(&t.reverse_edge(k)) + eta(&t.contract_edge(k));
                assert_eq!(sum, Rational64::zero(), "tree {t:?} edge {k}");
            }
        }
    }

    #[test]
    fn eta_edge_slide() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..40 {
            let size = rng.gen_range(3..=6);
            let t = random_tree(&mut rng, size);
            let edges = t.edges().to_vec();
            for i in 0..edges.len() {
                for j in 0..edges.len() {
                    if i == j || edges[i].0 != edges[j].0 {
                        continue;
                    }
                    let (a, b) = edges[i];
                    let c = edges[j].1;
                    let mut slid1 = edges.clone();
                    slid1[j] = (b, c);
                    let mut slid2 = edges.clone();
                    slid2[i] = (a, c);
                    slid2[j] = (c, b);
                    let t1 = OrientedTree::new(t.vertices(), slid1).unwrap();
                    let t2 = OrientedTree::new(t.vertices(), slid2).unwrap();
                    // Identify the two edge targets, merging ab and ac
                    // into a single edge.
                    let (keep, drop) = (b.min(c), b.max(c));
                    let merge = |v: usize| {
                        let v = if v == drop { keep } else { v };
                        if v > drop {
                            v - 1
                        } else {
                            v
                        }
                    };
                    let merged: Vec<(usize, usize)> = edges
                        .iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, &(x, y))| (merge(x), merge(y)))
                        .collect();
                    let u = OrientedTree::new(t.vertices() - 1, merged).unwrap();
                    assert_eq!(
                        eta(&t),
                        eta(&t1) + eta(&t2) + eta(&u),
                        "tree {t:?} edges {i},{j}"
                    );
                }
            }
        }
    }

    #[test]
    fn eta_disconnected_forest_vanishes() {
        let two_points = OrientedTree::forest(2, vec![]).unwrap();
        assert_eq!(eta(&two_points), Rational64::zero());
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let size_a = rng.gen_range(1..=3);
            let a = random_tree(&mut rng, size_a);
            let size_b = rng.gen_range(1..=3);
            let b = random_tree(&mut rng, size_b);
            let shift = a.vertices();
            let mut edges = a.edges().to_vec();
            edges.extend(b.edges().iter().map(|&(x, y)| (x + shift, y + shift)));
            let forest = OrientedTree::forest(shift + b.vertices(), edges).unwrap();
            assert_eq!(eta(&forest), Rational64::zero(), "forest {forest:?}");
        }
    }

    #[test]
    fn tree_validation_rejects_cycles_and_gaps() {
        assert!(matches!(
            OrientedTree::new(2, vec![(0, 1), (1, 0)]),
            Err(LieError::NotATree(_))
        ));
        assert!(matches!(
            OrientedTree::new(3, vec![(0, 1)]),
            Err(LieError::NotATree(_))
        ));
        assert!(OrientedTree::forest(3, vec![(0, 1)]).is_ok());
    }

    #[test]
    fn surgery_on_empty_set() {
        let s = VirtualString::family_pq(2, 1);
        let (pieces, tree) = surgery_special(&s, &[]).unwrap();
        assert_eq!(pieces, vec![s]);
        assert_eq!(tree, OrientedTree::single_vertex());
    }

    #[test]
    fn surgery_on_one_unlinked_arrow() {
        let s = VirtualString::parse("a b b' a'").unwrap();
        let (pieces, tree) = surgery_special(&s, &[0]).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!(tree.edges().len(), 1);
        let keys: Vec<String> = pieces.iter().map(|p| p.canonicalize().key()).collect();
        let inner = VirtualString::parse("b b'").unwrap().canonicalize().key();
        assert!(keys.contains(&inner));
        assert!(keys.contains(&VirtualString::trivial().canonicalize().key()));
        let (from, to) = tree.edges()[0];
        assert_eq!(pieces[from].canonicalize().key(), inner);
        assert_eq!(pieces[to], VirtualString::trivial());
    }

    #[test]
    fn surgery_rejects_linked_pairs() {
        let s = VirtualString::family_pq(1, 1);
        assert!(matches!(
            surgery_special(&s, &[0, 1]),
            Err(LieError::LinkedArrows { .. })
        ));
    }

    #[test]
    fn surgery_piece_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let p = rng.gen_range(1..=3);
            let q = rng.gen_range(1..=3);
            let s = VirtualString::family_pq(p, q);
            for f in special_subsets(&s) {
                let (pieces, tree) = surgery_special(&s, &f).unwrap();
                assert_eq!(pieces.len(), f.len() + 1);
                assert_eq!(tree.vertices(), f.len() + 1);
                assert_eq!(tree.components(), 1);
            }
        }
    }

    #[test]
    fn cobracket_vanishes_for_torus_families() {
        for p in 1..=3 {
            for q in 1..=3 {
                let s = VirtualString::family_pq(p, q);
                assert!(cobracket(&s, CAPS).is_zero(), "p={p} q={q}");
            }
        }
    }

    #[test]
    fn cobracket_vanishes_up_to_rank_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let base = VirtualString::family_perm(&[3, 1, 6, 2, 5, 7, 4]);
        for _ in 0..25 {
            let keep: Vec<bool> = (0..base.rank()).map(|_| rng.gen_bool(0.8)).collect();
            let s = base.substring(&keep);
            if s.rank() <= 6 {
                assert!(cobracket(&s, CAPS).is_zero(), "keep {keep:?}");
            }
        }
    }

    #[test]
    fn cobracket_golden_rank_seven() {
        let s = VirtualString::family_perm(&[2, 3, 1, 4, 7, 5, 6]);
        let nu = cobracket(&s, CAPS);
        let a12 = key_of(&VirtualString::family_pq(1, 2));
        let a21 = key_of(&VirtualString::family_pq(2, 1));
        let mut want = FormalSum::zero(CAPS);
        want.add_term(tensor2(&a12, &a21), 1.into());
        want.add_term(tensor2(&a21, &a12), (-1).into());
        assert_eq!(nu, want);
    }

    #[test]
    fn cobracket_golden_composite_family() {
        // p=1, q=2 on the first block, p'=2, q'=1 on the second.
        let s = VirtualString::family_perm(&[3, 1, 2, 4, 6, 7, 5]);
        let nu = cobracket(&s, CAPS);
        let a12 = key_of(&VirtualString::family_pq(1, 2));
        let a21 = key_of(&VirtualString::family_pq(2, 1));
        let mut want = FormalSum::zero(CAPS);
        want.add_term(tensor2(&a21, &a12), 1.into());
        want.add_term(tensor2(&a12, &a21), (-1).into());
        assert_eq!(nu, want);
        assert!(cojacobi_check(&s, CAPS));
    }

    #[test]
    fn cobracket_is_move_invariant() {
        let s = VirtualString::family_perm(&[2, 3, 1, 4, 7, 5, 6]);
        let nu = cobracket(&s, CAPS);
        for mv in legal_moves(&s, s.rank() + 1) {
            let t = apply_move(&s, &mv).unwrap();
            assert_eq!(cobracket(&t, CAPS), nu, "move {mv:?}");
        }
    }

    #[test]
    fn cojacobi_holds_on_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let base = VirtualString::family_perm(&[2, 3, 1, 4, 7, 5, 6]);
        assert!(cojacobi_check(&base, CAPS));
        for _ in 0..10 {
            let keep: Vec<bool> = (0..base.rank()).map(|_| rng.gen_bool(0.85)).collect();
            assert!(cojacobi_check(&base.substring(&keep), CAPS));
        }
    }

    #[test]
    fn iterated_cobracket_vanishes_at_low_rank() {
        let rank_two: [&[usize]; 2] = [&[2, 1], &[1, 2]];
        for sigma in rank_two {
            let s = VirtualString::family_perm(sigma);
            assert!(iterated_cobracket(&s, 2, CAPS).is_zero());
        }
        let rank_three: [&[usize]; 3] = [&[2, 3, 1], &[2, 1, 3], &[3, 1, 2]];
        for sigma in rank_three {
            let s = VirtualString::family_perm(sigma);
            assert!(iterated_cobracket(&s, 3, CAPS).is_zero());
        }
        let s = VirtualString::family_perm(&[2, 3, 1, 4, 7, 5, 6]);
        assert!(iterated_cobracket(&s, 7, CAPS).is_zero());
    }

    #[test]
    fn comodule_of_trivial_content_vanishes() {
        assert!(comodule_rho(&OpenString::trivial(), CAPS).is_zero());
        let mu = OpenString::parse("a b a' b'").unwrap();
        assert!(comodule_rho(&mu, CAPS).is_zero());
    }

    #[test]
    fn comodule_closure_consistency() {
        let samples = [
            "a b c a' b' c' d d'",
            "a b c d a' c' b' d'",
            "a b c d b' a' d' c'",
        ];
        for text in samples {
            let mu = OpenString::parse(text).unwrap();
            let lhs = close_comodule(&comodule_rho(&mu, CAPS), CAPS);
            assert_eq!(lhs, cobracket(&mu.closure(), CAPS), "{text}");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let base = OpenString::parse("a b c d e a' d' b' e' c'").unwrap();
        for _ in 0..10 {
            let keep: Vec<bool> = (0..base.rank()).map(|_| rng.gen_bool(0.8)).collect();
            let mu = base.substring(&keep);
            let lhs = close_comodule(&comodule_rho(&mu, CAPS), CAPS);
            assert_eq!(lhs, cobracket(&mu.closure(), CAPS), "keep {keep:?}");
        }
    }

    #[test]
    fn zeta_of_trivial_string() {
        let z = zeta(&VirtualString::trivial());
        assert_eq!(z.terms().len(), 1);
        let (mono, coeff) = z.terms().iter().next().unwrap();
        assert_eq!(*coeff, Rational64::from(1));
        assert_eq!(mono.z, 0);
        assert_eq!(mono.factors, vec![diagram_key(&VirtualString::trivial())]);
    }

    #[test]
    fn zeta_constant_term_is_the_string() {
        let s = VirtualString::family_pq(2, 1);
        let z = zeta(&s);
        let constant: Vec<_> = z.terms().iter().filter(|(m, _)| m.z == 0).collect();
        assert_eq!(constant.len(), 1);
        let (mono, coeff) = constant[0];
        assert_eq!(*coeff, Rational64::from(1));
        assert_eq!(mono.factors, vec![diagram_key(&s)]);
    }

    #[test]
    fn zeta_term_counts() {
        // Both arrows of the (1,1) family cross each other.
        let s = VirtualString::family_pq(1, 1);
        assert_eq!(zeta_terms(&s), 3);
        let nested = VirtualString::parse("a b b' a'").unwrap();
        assert_eq!(zeta_terms(&nested), 4);
        // Surgery along either arrow alone leaves one trivial piece and
        // one one-arrow piece, so those two summands share a monomial
        // and merge.
        let z = zeta(&nested);
        assert_eq!(z.terms().len(), 3);
        let one_arrow = Monomial::product(
            1,
            vec![
                diagram_key(&VirtualString::trivial()),
                diagram_key(&VirtualString::parse("a a'").unwrap()),
            ],
        );
        assert_eq!(z.terms()[&one_arrow], Rational64::from(-1));
        for sigma in [[2usize, 3, 1, 4].as_slice(), &[3, 1, 4, 2], &[2, 1, 4, 3]] {
            let s = VirtualString::family_perm(sigma);
            assert!(zeta(&s).terms().len() <= zeta_terms(&s));
        }
    }

    #[test]
    #[should_panic(expected = "different normalization budgets")]
    fn formal_sums_with_different_caps_do_not_compare() {
        let a = FormalSum::zero(10);
        let b = FormalSum::zero(20);
        let _ = a == b;
    }
}
