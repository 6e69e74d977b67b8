//! Arrow-diagram edges and labelings, diagram moves, the nabla
//! invariant and its two-variable specialization, skein-relation
//! verification, and comultiplication term enumeration.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use num_traits::Zero;

use crate::lie::{arrows_linked, class_key, FormalSum, Monomial};
use crate::moves::{
    b_clusters, c_pattern_ok, find_adjacent, normalize, swap_clusters, triple_positions_ok,
    MoveError, MoveSite,
};
use crate::poly::u;
use crate::string::{ArrowDiagram, Role, Token, VirtualString};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SkeinError {
    #[error("arrow {arrow} does not carry sign +")]
    NotPositive { arrow: usize },
}

/// The oriented arcs between consecutive arrow endpoints, listed as
/// (start endpoint, end endpoint) position pairs in cyclic order; a
/// rank-zero diagram has one closed edge.
pub fn edges(d: &ArrowDiagram) -> Vec<(usize, usize)> {
    let len = 2 * d.rank();
    if len == 0 {
        return vec![(0, 0)];
    }
    (0..len).map(|k| (k, (k + 1) % len)).collect()
}

/// An edge labeling of an arrow diagram; edge k starts at endpoint
/// position k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    pub labels: Vec<u32>,
    /// Arrows whose adjacent labels change, in increasing id order.
    pub cutting: Vec<usize>,
    /// Number of cutting arrows with sign -.
    pub minus: usize,
}

impl Labeling {
    pub fn size(&self) -> usize {
        self.cutting.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelingMode {
    /// Surjective labelings with exactly n-1 cutting arrows.
    Surjective,
    /// All labelings with pairwise-unlinked cutting arrows.
    Unlinked,
}

struct ArrowEdges {
    tail_in: usize,
    tail_out: usize,
    head_in: usize,
    head_out: usize,
}

fn arrow_edges(tails: &[usize], heads: &[usize], len: usize, e: usize) -> ArrowEdges {
    ArrowEdges {
        tail_in: (tails[e] + len - 1) % len,
        tail_out: tails[e],
        head_in: (heads[e] + len - 1) % len,
        head_out: heads[e],
    }
}

/// Full per-arrow labeling condition; `Some(true)` marks a cutting
/// arrow.
fn arrow_status(labels: &[u32], ae: &ArrowEdges, sign: i8) -> Option<bool> {
    let (ti, to) = (labels[ae.tail_in], labels[ae.tail_out]);
    let (hi, ho) = (labels[ae.head_in], labels[ae.head_out]);
    if ti == to && hi == ho {
        return Some(false);
    }
    if to == hi && ti == ho && ti != to {
        let s = if ti > to { 1 } else { -1 };
        if s == sign {
            return Some(true);
        }
    }
    None
}

fn all_labelings(d: &ArrowDiagram, n: u32) -> Vec<Labeling> {
    let m = d.rank();
    if m == 0 {
        return (1..=n)
            .map(|c| Labeling {
                labels: vec![c],
                cutting: Vec::new(),
                minus: 0,
            })
            .collect();
    }
    let len = 2 * m;
    let (tails, heads) = d.underlying().endpoints();
    let code = d.underlying().code();
    let arrow_edge_list: Vec<ArrowEdges> = (0..m)
        .map(|e| arrow_edges(&tails, &heads, len, e))
        .collect();
    // Arrows become fully checkable once their last adjacent edge has a
    // label.
    let mut check_at: Vec<Vec<usize>> = vec![Vec::new(); len];
    for (e, ae) in arrow_edge_list.iter().enumerate() {
        let last = ae.tail_in.max(ae.tail_out).max(ae.head_in).max(ae.head_out);
        check_at[last].push(e);
    }
    let mut labels = vec![0u32; len];
    let mut out = Vec::new();
    fn junction_ok(labels: &[u32], code: &[Token], signs: &[i8], len: usize, q: usize) -> bool {
        let before = labels[(q + len - 1) % len];
        let after = labels[q];
        if before == after {
            return true;
        }
        let (id, role) = code[q];
        let s = match role {
            Role::Tail => {
                if before > after {
                    1
                } else {
                    -1
                }
            }
            Role::Head => {
                if after > before {
                    1
                } else {
                    -1
                }
            }
        };
        s == signs[id]
    }
    #[allow(clippy::too_many_arguments)]
    fn assign(
        k: usize,
        n: u32,
        labels: &mut Vec<u32>,
        code: &[Token],
        signs: &[i8],
        arrow_edge_list: &[ArrowEdges],
        check_at: &[Vec<usize>],
        out: &mut Vec<Labeling>,
    ) {
        let len = labels.len();
        if k == len {
            if !junction_ok(labels, code, signs, len, 0) {
                return;
            }
            let mut cutting = Vec::new();
            for (e, ae) in arrow_edge_list.iter().enumerate() {
                match arrow_status(labels, ae, signs[e]) {
                    Some(true) => cutting.push(e),
                    Some(false) => {}
                    None => return,
                }
            }
            let minus = cutting.iter().filter(|&&e| signs[e] < 0).count();
            out.push(Labeling {
                labels: labels.clone(),
                cutting,
                minus,
            });
            return;
        }
        for value in 1..=n {
            labels[k] = value;
            let junction = k == 0 || junction_ok(labels, code, signs, len, k);
            let arrows = junction
                && check_at[k].iter().all(|&e| {
                    arrow_status(labels, &arrow_edge_list[e], signs[e]).is_some()
                });
            if arrows {
                assign(k + 1, n, labels, code, signs, arrow_edge_list, check_at, out);
            }
        }
        labels[k] = 0;
    }
    assign(
        0,
        n,
        &mut labels,
        code,
        d.signs(),
        &arrow_edge_list,
        &check_at,
        &mut out,
    );
    out
}

fn cutting_unlinked(d: &ArrowDiagram, cutting: &[usize]) -> bool {
    let len = 2 * d.rank();
    let (tails, heads) = d.underlying().endpoints();
    for (i, &e) in cutting.iter().enumerate() {
        for &f in &cutting[i + 1..] {
            if arrows_linked(&tails, &heads, len, e, f) {
                return false;
            }
        }
    }
    true
}

/// Valid n-labelings of the diagram in the requested mode.
pub fn enumerate_labelings(d: &ArrowDiagram, n: u32, mode: LabelingMode) -> Vec<Labeling> {
    all_labelings(d, n)
        .into_iter()
        .filter(|f| match mode {
            LabelingMode::Surjective => {
                let used: BTreeSet<u32> = f.labels.iter().copied().collect();
                used.len() as u32 == n
                    && used.iter().all(|&v| v >= 1 && v <= n)
                    && f.size() as u32 == n - 1
                    && cutting_unlinked(d, &f.cutting)
            }
            LabelingMode::Unlinked => cutting_unlinked(d, &f.cutting),
        })
        .collect()
}

#[cfg(test)]
fn raw_labelings(d: &ArrowDiagram, n: u32) -> Vec<Labeling> {
    all_labelings(d, n)
}

fn make_diagram(tokens: &[Token], sign_of: &BTreeMap<usize, i8>) -> ArrowDiagram {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    let mut code = Vec::with_capacity(tokens.len());
    for &(id, role) in tokens {
        let next = map.len();
        let new_id = *map.entry(id).or_insert(next);
        code.push((new_id, role));
    }
    let mut signs = vec![1i8; map.len()];
    for (old, new) in &map {
        signs[*new] = sign_of[old];
    }
    ArrowDiagram::new(VirtualString::new(code), signs)
}

/// Canonical text key of an arrow diagram.
pub fn diagram_text_key(d: &ArrowDiagram) -> String {
    let (tokens, signs) = d.canonical_key();
    ArrowDiagram::new(VirtualString::new(tokens), signs).serialize()
}

struct Circle {
    label: u32,
    tokens: Vec<Token>,
}

/// Traces the label-constant circles obtained by identifying the two
/// endpoints of every cutting arrow; the incoming edge at a tail
/// continues along the outgoing edge at the head and vice versa.
fn circles(d: &ArrowDiagram, f: &Labeling) -> Vec<Circle> {
    let m = d.rank();
    if m == 0 {
        return vec![Circle {
            label: f.labels[0],
            tokens: Vec::new(),
        }];
    }
    let len = 2 * m;
    let code = d.underlying().code();
    let (tails, heads) = d.underlying().endpoints();
    let cutting: BTreeSet<usize> = f.cutting.iter().copied().collect();
    let mut visited = vec![false; len];
    let mut out = Vec::new();
    for start in 0..len {
        if visited[start] {
            continue;
        }
        let mut tokens = Vec::new();
        let mut k = start;
        loop {
            visited[k] = true;
            let q = (k + 1) % len;
            let (id, role) = code[q];
            let next = if cutting.contains(&id) {
                match role {
                    Role::Tail => heads[id],
                    Role::Head => tails[id],
                }
            } else {
                tokens.push((id, role));
                q
            };
            k = next;
            if k == start {
                break;
            }
        }
        out.push(Circle {
            label: f.labels[start],
            tokens,
        });
    }
    out
}

/// The arrow diagrams carried by the circles of a labeling, paired
/// with their labels; arrows whose endpoints land on different circles
/// disappear.
fn circle_diagrams(d: &ArrowDiagram, f: &Labeling) -> Vec<(u32, ArrowDiagram)> {
    let cs = circles(d, f);
    let mut owner: BTreeMap<Token, usize> = BTreeMap::new();
    for (idx, c) in cs.iter().enumerate() {
        for &t in &c.tokens {
            owner.insert(t, idx);
        }
    }
    let signs: BTreeMap<usize, i8> = (0..d.rank()).map(|e| (e, d.sign(e))).collect();
    cs.iter()
        .map(|c| {
            let kept: Vec<Token> = c
                .tokens
                .iter()
                .copied()
                .filter(|&(id, _)| owner[&(id, Role::Tail)] == owner[&(id, Role::Head)])
                .collect();
            (c.label, make_diagram(&kept, &signs))
        })
        .collect()
}

/// The string invariant of a virtual knot: the double sum of Formula
/// (7), with one product monomial of nontrivial class keys per
/// surjective labeling; terms with a homotopically trivial piece
/// vanish.
pub fn nabla(d: &ArrowDiagram, caps: u64) -> FormalSum {
    let mut out = FormalSum::zero(caps);
    let edge_count = edges(d).len();
    let m = d.rank();
    let (tails, heads) = d.underlying().endpoints();
    let len = 2 * m;
    // A surjective labeling has n - 1 cutting arrows, so n never
    // exceeds the rank plus one.
    let arity_cap = edge_count.min(m + 1) as u32;
    for n in 1..=arity_cap {
        let mut factorial = 1i64;
        for v in 1..=n as i64 {
            factorial *= v;
        }
        'labelings: for f in enumerate_labelings(d, n, LabelingMode::Surjective) {
            let mut factors = Vec::with_capacity(n as usize);
            for i in 1..=n {
                let keep: Vec<bool> = (0..m)
                    .map(|e| {
                        let ae = arrow_edges(&tails, &heads, len, e);
                        [ae.tail_in, ae.tail_out, ae.head_in, ae.head_out]
                            .iter()
                            .all(|&k| f.labels[k] == i)
                    })
                    .collect();
                let piece = d.underlying().substring(&keep);
                match class_key(&normalize(&piece, caps)) {
                    Some(key) => factors.push(key),
                    None => continue 'labelings,
                }
            }
            let sign = if f.minus % 2 == 0 { 1 } else { -1 };
            out.add_term(
                Monomial::product(n - 1, factors),
                Rational64::new(sign, factorial),
            );
        }
    }
    out
}

/// A rational polynomial in z and t.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PolyZT {
    terms: BTreeMap<(u32, u32), Rational64>,
}

impl PolyZT {
    pub fn zero() -> PolyZT {
        PolyZT::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, z: u32, t: u32, coeff: Rational64) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.terms.entry((z, t)).or_insert_with(Rational64::zero);
        *entry += coeff;
        if entry.is_zero() {
            self.terms.remove(&(z, t));
        }
    }

    pub fn add(&mut self, other: &PolyZT) {
        for (&(z, t), &c) in &other.terms {
            self.add_term(z, t, c);
        }
    }

    pub fn mul(&self, other: &PolyZT) -> PolyZT {
        let mut out = PolyZT::zero();
        for (&(z1, t1), &c1) in &self.terms {
            for (&(z2, t2), &c2) in &other.terms {
                out.add_term(z1 + z2, t1 + t2, c1 * c2);
            }
        }
        out
    }

    pub fn shift_z(&self, by: u32) -> PolyZT {
        let mut out = PolyZT::zero();
        for (&(z, t), &c) in &self.terms {
            out.add_term(z + by, t, c);
        }
        out
    }

    pub fn terms(&self) -> &BTreeMap<(u32, u32), Rational64> {
        &self.terms
    }

    /// Text form with z-major term ordering.
    pub fn to_text(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (&(z, t), &c) in self.terms.iter().rev() {
            let mut piece = String::new();
            let abs = if c < Rational64::zero() { -c } else { c };
            if parts.is_empty() {
                if c < Rational64::zero() {
                    piece.push('-');
                }
            } else if c < Rational64::zero() {
                piece.push_str(" - ");
            } else {
                piece.push_str(" + ");
            }
            let mut vars = Vec::new();
            if z > 0 {
                vars.push(if z == 1 { "z".into() } else { format!("z^{z}") });
            }
            if t > 0 {
                vars.push(if t == 1 { "t".into() } else { format!("t^{t}") });
            }
            let coeff_text = if *abs.denom() == 1 {
                format!("{}", abs.numer())
            } else {
                format!("{}/{}", abs.numer(), abs.denom())
            };
            if vars.is_empty() {
                piece.push_str(&coeff_text);
            } else if abs == Rational64::from(1) {
                piece.push_str(&vars.join("*"));
            } else {
                piece.push_str(&format!("{}*{}", coeff_text, vars.join("*")));
            }
            parts.push(piece);
        }
        parts.concat()
    }
}

/// The two-variable specialization of nabla: every class key is
/// replaced by the u-polynomial of its representative.
pub fn nabla_ut(d: &ArrowDiagram, caps: u64) -> PolyZT {
    let mut out = PolyZT::zero();
    for (mono, coeff) in nabla(d, caps).terms() {
        let mut term = PolyZT::zero();
        term.add_term(mono.z, 0, *coeff);
        for factor in &mono.factors {
            let rep = VirtualString::parse(factor).expect("class keys are parseable");
            let mut up = PolyZT::zero();
            for (exp, c) in u(&rep).to_pairs() {
                up.add_term(0, exp, Rational64::from(c));
            }
            term = term.mul(&up);
        }
        out.add(&term);
    }
    out
}

/// The three diagrams of the skein relation at a +-signed arrow: the
/// sign-flipped diagram and the two halves cut off by the arrow.
pub fn skein_parts(
    d: &ArrowDiagram,
    e: usize,
) -> Result<(ArrowDiagram, ArrowDiagram, ArrowDiagram), SkeinError> {
    assert!(e < d.rank(), "arrow index out of range");
    if d.sign(e) != 1 {
        return Err(SkeinError::NotPositive { arrow: e });
    }
    let m = d.rank();
    let len = 2 * m;
    let (tails, heads) = d.underlying().endpoints();
    let (a, b) = (tails[e], heads[e]);
    let strictly_inside = |lo: usize, hi: usize, i: usize| {
        i != lo && i != hi && (i + len - lo) % len < (hi + len - lo) % len
    };
    let keep_ab: Vec<bool> = (0..m)
        .map(|f| strictly_inside(a, b, tails[f]) && strictly_inside(a, b, heads[f]))
        .collect();
    let keep_ba: Vec<bool> = (0..m)
        .map(|f| strictly_inside(b, a, tails[f]) && strictly_inside(b, a, heads[f]))
        .collect();
    Ok((
        d.with_sign(e, -1),
        d.subdiagram(&keep_ab),
        d.subdiagram(&keep_ba),
    ))
}

/// Verifies the skein relation at a +-signed arrow on the nabla level.
pub fn skein_check(d: &ArrowDiagram, e: usize, caps: u64) -> Result<bool, SkeinError> {
    let (flipped, half_ab, half_ba) = skein_parts(d, e)?;
    let mut rhs = nabla(&flipped, caps);
    rhs.add(&nabla(&half_ab, caps).mul(&nabla(&half_ba, caps)).shift_z(1));
    Ok(nabla(d, caps) == rhs)
}

/// The same identity for the two-variable specialization.
pub fn skein_check_ut(d: &ArrowDiagram, e: usize, caps: u64) -> Result<bool, SkeinError> {
    let (flipped, half_ab, half_ba) = skein_parts(d, e)?;
    let mut rhs = nabla_ut(&flipped, caps);
    rhs.add(
        &nabla_ut(&half_ab, caps)
            .mul(&nabla_ut(&half_ba, caps))
            .shift_z(1),
    );
    Ok(nabla_ut(d, caps) == rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagramMoveKind {
    /// Adds or removes one arrow spanning an endpoint-free arc.
    AAd { sign: i8 },
    /// Adds or removes two opposite-signed arrows between two arcs.
    BAd { form: u8, sign: i8 },
    /// The signed triple exchange.
    CAd,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramMove {
    pub kind: DiagramMoveKind,
    pub forward: bool,
    pub site: MoveSite,
}

fn signs_map(d: &ArrowDiagram) -> BTreeMap<usize, i8> {
    (0..d.rank()).map(|e| (e, d.sign(e))).collect()
}

/// Applies a single diagram move at the given site.
pub fn diagram_move(d: &ArrowDiagram, mv: &DiagramMove) -> Result<ArrowDiagram, MoveError> {
    let code = d.underlying().code();
    let len = code.len();
    let m = d.rank();
    match (&mv.kind, mv.forward, &mv.site) {
        (DiagramMoveKind::AAd { sign }, true, MoveSite::Gap(gap)) => {
            if *gap > len {
                return Err(MoveError::GapOutOfRange { gap: *gap, len });
            }
            let mut tokens = code.to_vec();
            tokens.splice(*gap..*gap, [(m, Role::Tail), (m, Role::Head)]);
            let mut signs = signs_map(d);
            signs.insert(m, *sign);
            Ok(make_diagram(&tokens, &signs))
        }
        (DiagramMoveKind::AAd { sign }, false, MoveSite::Arrow(e)) => {
            if *e >= m {
                return Err(MoveError::ArrowOutOfRange { arrow: *e });
            }
            if d.sign(*e) != *sign {
                return Err(MoveError::PatternMismatch(
                    "the removed arrow must carry the sign of the move".into(),
                ));
            }
            let pair = [(*e, Role::Tail), (*e, Role::Head)];
            let i = find_adjacent(code, pair).ok_or_else(|| {
                MoveError::PatternMismatch(
                    "the arrow must span an endpoint-free arc".into(),
                )
            })?;
            let tokens: Vec<Token> = (0..len)
                .filter(|&k| k != i && k != (i + 1) % len)
                .map(|k| code[k])
                .collect();
            Ok(make_diagram(&tokens, &signs_map(d)))
        }
        (DiagramMoveKind::BAd { form, sign }, true, MoveSite::GapPair(g1, g2)) => {
            if *g1 > len || *g2 > len {
                return Err(MoveError::GapOutOfRange {
                    gap: (*g1).max(*g2),
                    len,
                });
            }
            if g1 > g2 {
                return Err(MoveError::PatternMismatch(
                    "cluster gaps must be given in order".into(),
                ));
            }
            let (c1, c2) = b_clusters(m, m + 1, *form);
            let mut tokens = code.to_vec();
            tokens.splice(*g2..*g2, c2);
            tokens.splice(*g1..*g1, c1);
            let mut signs = signs_map(d);
            signs.insert(m, *sign);
            signs.insert(m + 1, -sign);
            Ok(make_diagram(&tokens, &signs))
        }
        (DiagramMoveKind::BAd { form, sign }, false, MoveSite::ArrowPair(e1, e2)) => {
            if *e1 >= m || *e2 >= m {
                return Err(MoveError::ArrowOutOfRange {
                    arrow: (*e1).max(*e2),
                });
            }
            if d.sign(*e1) != *sign || d.sign(*e2) != -sign {
                return Err(MoveError::PatternMismatch(
                    "the removed arrows must carry opposite signs".into(),
                ));
            }
            let (c1, c2) = b_clusters(*e1, *e2, *form);
            let (Some(i), Some(j)) = (find_adjacent(code, c1), find_adjacent(code, c2)) else {
                return Err(MoveError::PatternMismatch(
                    "both clusters of the form must occur as adjacent pairs".into(),
                ));
            };
            let cut: BTreeSet<usize> = [i, (i + 1) % len, j, (j + 1) % len].into_iter().collect();
            if cut.len() != 4 {
                return Err(MoveError::PatternMismatch(
                    "the two clusters must occupy disjoint arcs".into(),
                ));
            }
            let tokens: Vec<Token> = (0..len)
                .filter(|k| !cut.contains(k))
                .map(|k| code[k])
                .collect();
            Ok(make_diagram(&tokens, &signs_map(d)))
        }
        (DiagramMoveKind::CAd, forward, MoveSite::Triple(positions)) => {
            if !triple_positions_ok(len, positions) {
                return Err(MoveError::PatternMismatch(
                    "the three clusters must occupy disjoint arcs".into(),
                ));
            }
            let clusters: Vec<(Token, Token)> = positions
                .iter()
                .map(|&p| (code[p], code[(p + 1) % len]))
                .collect();
            if !c_pattern_ok(&clusters, forward) {
                return Err(MoveError::PatternMismatch(
                    "the clusters do not form the required arrow triple".into(),
                ));
            }
            let ids: BTreeSet<usize> = clusters.iter().map(|c| c.0 .0).collect();
            let minus = ids.iter().filter(|&&e| d.sign(e) < 0).count();
            if minus != 1 {
                return Err(MoveError::PatternMismatch(
                    "exactly one of the three arrows must carry sign -".into(),
                ));
            }
            let tokens = swap_clusters(code, positions);
            Ok(make_diagram(&tokens, &signs_map(d)))
        }
        _ => Err(MoveError::BadSite),
    }
}

/// All legal single diagram moves whose results stay within the rank
/// cap.
pub fn legal_diagram_moves(d: &ArrowDiagram, rank_cap: usize) -> Vec<DiagramMove> {
    let len = 2 * d.rank();
    let m = d.rank();
    let gaps = if len == 0 { 1 } else { len };
    let mut out = Vec::new();
    if m + 1 <= rank_cap {
        for g in 0..gaps {
            for sign in [1i8, -1] {
                out.push(DiagramMove {
                    kind: DiagramMoveKind::AAd { sign },
                    forward: true,
                    site: MoveSite::Gap(g),
                });
            }
        }
    }
    if m + 2 <= rank_cap {
        for g1 in 0..gaps {
            for g2 in g1..gaps {
                for form in 1..=4u8 {
                    for sign in [1i8, -1] {
                        out.push(DiagramMove {
                            kind: DiagramMoveKind::BAd { form, sign },
                            forward: true,
                            site: MoveSite::GapPair(g1, g2),
                        });
                    }
                }
            }
        }
    }
    for e in 0..m {
        let mv = DiagramMove {
            kind: DiagramMoveKind::AAd { sign: d.sign(e) },
            forward: false,
            site: MoveSite::Arrow(e),
        };
        if diagram_move(d, &mv).is_ok() {
            out.push(mv);
        }
    }
    for e1 in 0..m {
        for e2 in 0..m {
            if e1 == e2 {
                continue;
            }
            for form in 1..=4u8 {
                let mv = DiagramMove {
                    kind: DiagramMoveKind::BAd {
                        form,
                        sign: d.sign(e1),
                    },
                    forward: false,
                    site: MoveSite::ArrowPair(e1, e2),
                };
                if diagram_move(d, &mv).is_ok() {
                    out.push(mv);
                }
            }
        }
    }
    for i in 0..len {
        for j in i + 1..len {
            for k in j + 1..len {
                let positions = [i, j, k];
                if !triple_positions_ok(len, &positions) {
                    continue;
                }
                for forward in [true, false] {
                    let mv = DiagramMove {
                        kind: DiagramMoveKind::CAd,
                        forward,
                        site: MoveSite::Triple(positions),
                    };
                    if diagram_move(d, &mv).is_ok() {
                        out.push(mv);
                    }
                }
            }
        }
    }
    out
}

/// One comultiplication summand: a sign, a z-power, and one product of
/// diagram keys per tensor slot.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DeltaTerm {
    pub sign: i8,
    pub z: u32,
    pub slots: Vec<Vec<String>>,
}

/// The comultiplication terms of the diagram for tensor arity n, one
/// per labeling with pairwise-unlinked cutting arrows.
pub fn delta_terms(d: &ArrowDiagram, n: u32) -> Vec<DeltaTerm> {
    assert!(n >= 2);
    let mut out = Vec::new();
    for f in enumerate_labelings(d, n, LabelingMode::Unlinked) {
        let pieces = circle_diagrams(d, &f);
        let mut slots: Vec<Vec<String>> = vec![Vec::new(); n as usize];
        for (label, piece) in pieces {
            slots[(label - 1) as usize].push(diagram_text_key(&piece));
        }
        for slot in &mut slots {
            slot.sort();
        }
        out.push(DeltaTerm {
            sign: if f.minus % 2 == 0 { 1 } else { -1 },
            z: f.size() as u32,
            slots,
        });
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::StringClassKey;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const CAPS: u64 = 10_000;

    fn all_plus(text: &str) -> ArrowDiagram {
        ArrowDiagram::all_plus(VirtualString::parse(text).unwrap())
    }

    fn key_of(s: &VirtualString) -> String {
        match normalize(s, CAPS) {
            StringClassKey::Zero => panic!("trivial class"),
            StringClassKey::Code(code) => code.key(),
        }
    }

    fn random_diagram(rng: &mut ChaCha8Rng, m: usize) -> ArrowDiagram {
        let mut slots: Vec<Option<Token>> = vec![None; 2 * m];
        for e in 0..m {
            let mut free: Vec<usize> = (0..2 * m).filter(|&i| slots[i].is_none()).collect();
            let i = free.remove(rng.gen_range(0..free.len()));
            let j = free[rng.gen_range(0..free.len())];
            let (r1, r2) = if rng.gen_bool(0.5) {
                (Role::Tail, Role::Head)
            } else {
                (Role::Head, Role::Tail)
            };
            slots[i] = Some((e, r1));
            slots[j] = Some((e, r2));
        }
        let tokens: Vec<Token> = slots.into_iter().map(|t| t.unwrap()).collect();
        let signs: BTreeMap<usize, i8> = (0..m)
            .map(|e| (e, if rng.gen_bool(0.5) { 1 } else { -1 }))
            .collect();
        make_diagram(&tokens, &signs)
    }

    #[test]
    fn edge_counts() {
        assert_eq!(edges(&ArrowDiagram::trivial()).len(), 1);
        let d = all_plus("a b c a' c' b'");
        let es = edges(&d);
        assert_eq!(es.len(), 6);
        for (k, &(start, end)) in es.iter().enumerate() {
            assert_eq!(start, k);
            assert_eq!(end, (k + 1) % 6);
        }
    }

    #[test]
    fn single_one_labeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..10 {
            let size = rng.gen_range(0..=4);
            let d = random_diagram(&mut rng, size);
            let ls = enumerate_labelings(&d, 1, LabelingMode::Surjective);
            assert_eq!(ls.len(), 1);
            assert!(ls[0].cutting.is_empty());
        }
    }

    #[test]
    fn labelings_vanish_beyond_edge_count() {
        let d = all_plus("a b a' b'");
        for n in 5..=7 {
            assert!(enumerate_labelings(&d, n, LabelingMode::Surjective).is_empty());
        }
    }

    #[test]
    fn constant_labelings_and_circle_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..10 {
            let size = rng.gen_range(1..=4);
            let d = random_diagram(&mut rng, size);
            let ls = enumerate_labelings(&d, 2, LabelingMode::Unlinked);
            let constants: Vec<&Labeling> = ls
                .iter()
                .filter(|f| f.labels.iter().all(|&v| v == f.labels[0]))
                .collect();
            assert_eq!(constants.len(), 2);
            // Pairwise-unlinked cutting arrows are characterized by the
            // circle count identity.
            for f in raw_labelings(&d, 2) {
                let r_sum = circles(&d, &f).len();
                assert_eq!(
                    cutting_unlinked(&d, &f.cutting),
                    r_sum == f.size() + 1,
                    "labeling {f:?}"
                );
            }
        }
    }

    #[test]
    fn nabla_free_term_is_the_underlying_class() {
        let d = all_plus("a b c a' c' b'");
        let value = nabla(&d, CAPS);
        let want_key = key_of(&VirtualString::parse("a b c a' c' b'").unwrap());
        assert_eq!(value.terms().len(), 1);
        let (mono, coeff) = value.terms().iter().next().unwrap();
        assert_eq!(mono.z, 0);
        assert_eq!(mono.factors, vec![want_key]);
        assert_eq!(*coeff, Rational64::from(1));
    }

    #[test]
    fn nabla_vanishes_below_rank_three() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..10 {
            let size = rng.gen_range(0..=2);
            let d = random_diagram(&mut rng, size);
            assert!(nabla(&d, CAPS).is_zero());
            assert!(nabla_ut(&d, CAPS).is_zero());
        }
    }

    #[test]
    fn nabla_with_live_skein_term() {
        // One extra arrow separating two nontrivial rank-3 blocks.
        let d = all_plus("x a b c a' c' b' x' d e f e' d' f'");
        let value = nabla(&d, CAPS);
        let a12 = key_of(&VirtualString::family_pq(1, 2));
        let a21 = key_of(&VirtualString::family_pq(2, 1));
        let whole = key_of(d.underlying());
        let mut want = FormalSum::zero(CAPS);
        want.add_term(Monomial::product(0, vec![whole]), 1.into());
        want.add_term(
            Monomial::product(1, vec![a12, a21]),
            Rational64::new(1, 2),
        );
        assert_eq!(value, want);
        assert!(skein_check(&d, 0, CAPS).unwrap());
        assert!(skein_check_ut(&d, 0, CAPS).unwrap());
    }

    #[test]
    fn skein_relation_on_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..12 {
            let size = rng.gen_range(1..=4);
            let d = random_diagram(&mut rng, size);
            for e in 0..d.rank() {
                if d.sign(e) == 1 {
                    assert!(skein_check(&d, e, CAPS).unwrap(), "{}", diagram_text_key(&d));
                } else {
                    assert!(matches!(
                        skein_check(&d, e, CAPS),
                        Err(SkeinError::NotPositive { .. })
                    ));
                }
            }
        }
    }

    #[test]
    fn nabla_is_move_invariant() {
        let d = all_plus("a b c a' c' b'");
        let value = nabla(&d, CAPS);
        let value_ut = nabla_ut(&d, CAPS);
        for mv in legal_diagram_moves(&d, d.rank() + 1) {
            let moved = diagram_move(&d, &mv).unwrap();
            assert_eq!(nabla(&moved, CAPS), value, "move {mv:?}");
            assert_eq!(nabla_ut(&moved, CAPS), value_ut, "move {mv:?}");
        }
    }

    #[test]
    fn a_move_round_trip() {
        let d = ArrowDiagram::trivial();
        let mv = DiagramMove {
            kind: DiagramMoveKind::AAd { sign: -1 },
            forward: true,
            site: MoveSite::Gap(0),
        };
        let added = diagram_move(&d, &mv).unwrap();
        assert_eq!(added.rank(), 1);
        assert_eq!(added.sign(0), -1);
        let back = diagram_move(
            &added,
            &DiagramMove {
                kind: DiagramMoveKind::AAd { sign: -1 },
                forward: false,
                site: MoveSite::Arrow(0),
            },
        )
        .unwrap();
        assert_eq!(back, ArrowDiagram::trivial());
        assert!(matches!(
            diagram_move(
                &added,
                &DiagramMove {
                    kind: DiagramMoveKind::AAd { sign: 1 },
                    forward: false,
                    site: MoveSite::Arrow(0),
                },
            ),
            Err(MoveError::PatternMismatch(_))
        ));
    }

    #[test]
    fn b_move_adds_opposite_signs() {
        let d = ArrowDiagram::trivial();
        for form in 1..=4u8 {
            let mv = DiagramMove {
                kind: DiagramMoveKind::BAd { form, sign: 1 },
                forward: true,
                site: MoveSite::GapPair(0, 0),
            };
            let added = diagram_move(&d, &mv).unwrap();
            assert_eq!(added.rank(), 2);
            assert_eq!(added.sign(0) + added.sign(1), 0);
        }
    }

    #[test]
    fn c_move_needs_one_minus() {
        let base = VirtualString::parse("c' a a' b b' c").unwrap();
        let good = ArrowDiagram::new(base.clone(), vec![1, 1, -1]);
        let mv = DiagramMove {
            kind: DiagramMoveKind::CAd,
            forward: true,
            site: MoveSite::Triple([0, 2, 4]),
        };
        let moved = diagram_move(&good, &mv).unwrap();
        assert_eq!(moved.rank(), 3);
        assert_eq!(nabla_ut(&moved, CAPS), nabla_ut(&good, CAPS));
        let bad = ArrowDiagram::new(base, vec![1, 1, 1]);
        assert!(matches!(
            diagram_move(&bad, &mv),
            Err(MoveError::PatternMismatch(_))
        ));
    }

    #[test]
    fn covering_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        for _ in 0..10 {
            let size = rng.gen_range(0..=4);
            let d = random_diagram(&mut rng, size);
            assert_eq!(d.knot_covering(1), d);
            for r in 2..=3 {
                assert_eq!(
                    d.knot_covering(r).underlying(),
                    &d.underlying().covering(r)
                );
            }
        }
    }

    #[test]
    fn delta_on_trivial_diagram() {
        let d = ArrowDiagram::trivial();
        let terms = delta_terms(&d, 2);
        assert_eq!(terms.len(), 2);
        let key = diagram_text_key(&d);
        let mut slots: Vec<Vec<Vec<String>>> = terms.iter().map(|t| t.slots.clone()).collect();
        slots.sort();
        assert_eq!(
            slots,
            vec![
                vec![vec![], vec![key.clone()]],
                vec![vec![key], vec![]],
            ]
        );
        for t in &terms {
            assert_eq!(t.sign, 1);
            assert_eq!(t.z, 0);
        }
    }

    #[test]
    fn delta_term_count_matches_labelings() {
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        for _ in 0..8 {
            let size = rng.gen_range(1..=3);
            let d = random_diagram(&mut rng, size);
            let count = enumerate_labelings(&d, 2, LabelingMode::Unlinked).len();
            assert_eq!(delta_terms(&d, 2).len(), count);
        }
    }

    #[test]
    fn delta_is_coassociative_at_the_term_level() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..6 {
            let size = rng.gen_range(1..=3);
            let d = random_diagram(&mut rng, size);
            // Left side: expand the second slot of every 2-term by a
            // further comultiplication, multiplicatively over its
            // diagram factors.
            let mut lhs: BTreeMap<(u32, Vec<Vec<String>>), i64> = BTreeMap::new();
            for term in delta_terms(&d, 2) {
                let mut expansions: Vec<(i64, u32, Vec<String>, Vec<String>)> =
                    vec![(1, 0, Vec::new(), Vec::new())];
                for key in &term.slots[1] {
                    let piece = ArrowDiagram::parse(key).unwrap();
                    let mut next = Vec::new();
                    for sub in delta_terms(&piece, 2) {
                        for (sign, z, left, right) in &expansions {
                            let mut left = left.clone();
                            left.extend(sub.slots[0].iter().cloned());
                            let mut right = right.clone();
                            right.extend(sub.slots[1].iter().cloned());
                            next.push((sign * sub.sign as i64, z + sub.z, left, right));
                        }
                    }
                    expansions = next;
                }
                for (sign, z, mut mid, mut last) in expansions {
                    mid.sort();
                    last.sort();
                    let slots = vec![term.slots[0].clone(), mid, last];
                    *lhs.entry((term.z + z, slots)).or_insert(0) += term.sign as i64 * sign;
                }
            }
            lhs.retain(|_, c| *c != 0);
            let mut rhs: BTreeMap<(u32, Vec<Vec<String>>), i64> = BTreeMap::new();
            for term in delta_terms(&d, 3) {
                *rhs.entry((term.z, term.slots)).or_insert(0) += term.sign as i64;
            }
            rhs.retain(|_, c| *c != 0);
            assert_eq!(lhs, rhs, "{}", diagram_text_key(&d));
        }
    }
}
