//! The homotopy moves on virtual strings, bounded homotopy decision,
//! class-representative normalization, and small-rank classification.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::matrix::{rho, BasedMatrix};
use crate::poly::{higher_u, u};
use crate::string::{CanonicalCode, OpenString, Role, Token, VirtualString};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveKind {
    A,
    APlus,
    B { form: u8 },
    C,
    CPlus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveSite {
    /// Insertion point for a rank-raising `a`-move.
    Gap(usize),
    /// Arrow removed by an inverse `a`-move.
    Arrow(usize),
    /// Insertion points for the two clusters of a `b`-move; the first
    /// cluster goes first when the gaps coincide.
    GapPair(usize, usize),
    /// Arrows removed by an inverse `b`-move, in pattern order.
    ArrowPair(usize, usize),
    /// Start positions of the three clusters of a `c`-move.
    Triple([usize; 3]),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoveInstance {
    pub kind: MoveKind,
    pub forward: bool,
    pub site: MoveSite,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MoveError {
    #[error("gap {gap} out of range for a code of length {len}")]
    GapOutOfRange { gap: usize, len: usize },
    #[error("arrow {arrow} out of range")]
    ArrowOutOfRange { arrow: usize },
    #[error("site does not carry the pattern required by the move: {0}")]
    PatternMismatch(String),
    #[error("site shape does not match the move kind")]
    BadSite,
    #[error("enumeration rank {m} exceeds the cap {cap}")]
    EnumerationCapExceeded { m: usize, cap: usize },
}

/// Relabels arrow ids by first occurrence.
pub(crate) fn relabel_tokens(tokens: &[Token]) -> Vec<Token> {
    let mut relabel: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(tokens.len());
    for &(id, role) in tokens {
        let next = relabel.len();
        let new_id = *relabel.entry(id).or_insert(next);
        out.push((new_id, role));
    }
    out
}

fn make_string(tokens: Vec<Token>) -> VirtualString {
    VirtualString::new(relabel_tokens(&tokens))
}

fn make_open(tokens: &[Token]) -> OpenString {
    OpenString::new(relabel_tokens(tokens))
}

pub(crate) fn b_clusters(e1: usize, e2: usize, form: u8) -> ([Token; 2], [Token; 2]) {
    let t1 = (e1, Role::Tail);
    let h1 = (e1, Role::Head);
    let t2 = (e2, Role::Tail);
    let h2 = (e2, Role::Head);
    match form {
        1 => ([t1, h2], [h1, t2]),
        2 => ([t1, h2], [t2, h1]),
        3 => ([h2, t1], [h1, t2]),
        4 => ([h2, t1], [t2, h1]),
        _ => panic!("b-move form must be 1..=4"),
    }
}

pub(crate) fn find_adjacent(code: &[Token], pair: [Token; 2]) -> Option<usize> {
    let len = code.len();
    (0..len).find(|&i| code[i] == pair[0] && code[(i + 1) % len] == pair[1])
}

/// Shape check for the three clusters of a `c`-move in the given
/// direction: every cluster is head-then-tail (forward) or
/// tail-then-head (inverse) and the head arrows map to the tail arrows
/// by a fixed-point-free bijection on three distinct arrows.
pub(crate) fn c_pattern_ok(clusters: &[(Token, Token)], forward: bool) -> bool {
    let (first_role, second_role) = if forward {
        (Role::Head, Role::Tail)
    } else {
        (Role::Tail, Role::Head)
    };
    let mut heads = BTreeSet::new();
    let mut tails = BTreeSet::new();
    for &((id_a, role_a), (id_b, role_b)) in clusters {
        if role_a != first_role || role_b != second_role || id_a == id_b {
            return false;
        }
        let (head, tail) = if forward { (id_a, id_b) } else { (id_b, id_a) };
        heads.insert(head);
        tails.insert(tail);
    }
    heads.len() == 3 && heads == tails
}

/// Shape check for a `c⁺`-move site: one tail-tail, one mixed, and one
/// head-head cluster wired as in the move definition.
fn c_plus_pattern_ok(clusters: &[(Token, Token)], forward: bool) -> bool {
    let mut tt = None;
    let mut mixed = None;
    let mut hh = None;
    for &c in clusters {
        match (c.0 .1, c.1 .1) {
            (Role::Tail, Role::Tail) if tt.is_none() => tt = Some(c),
            (Role::Head, Role::Head) if hh.is_none() => hh = Some(c),
            (Role::Head, Role::Tail) if forward && mixed.is_none() => mixed = Some(c),
            (Role::Tail, Role::Head) if !forward && mixed.is_none() => mixed = Some(c),
            _ => return false,
        }
    }
    let (Some(tt), Some(mixed), Some(hh)) = (tt, mixed, hh) else {
        return false;
    };
    let (x, y, z) = if forward {
        // (x,T)(y,T) ; (x,H)(z,T) ; (y,H)(z,H)
        let (x, y) = (tt.0 .0, tt.1 .0);
        if mixed.0 .0 != x || hh.0 .0 != y || mixed.1 .0 != hh.1 .0 {
            return false;
        }
        (x, y, mixed.1 .0)
    } else {
        // (y,T)(x,T) ; (z,T)(x,H) ; (z,H)(y,H)
        let (y, x) = (tt.0 .0, tt.1 .0);
        if mixed.1 .0 != x || hh.1 .0 != y || mixed.0 .0 != hh.0 .0 {
            return false;
        }
        (x, y, mixed.0 .0)
    };
    x != y && y != z && x != z
}

pub(crate) fn swap_clusters(code: &[Token], positions: &[usize; 3]) -> Vec<Token> {
    let len = code.len();
    let mut out = code.to_vec();
    for &p in positions {
        out.swap(p, (p + 1) % len);
    }
    out
}

pub(crate) fn triple_positions_ok(len: usize, positions: &[usize; 3]) -> bool {
    let mut occupied = BTreeSet::new();
    for &p in positions {
        if p >= len {
            return false;
        }
        occupied.insert(p);
        occupied.insert((p + 1) % len);
    }
    occupied.len() == 6
}

/// Applies a single homotopy move at the given site.
pub fn apply_move(s: &VirtualString, mv: &MoveInstance) -> Result<VirtualString, MoveError> {
    let code = s.code();
    let len = code.len();
    let m = s.rank();
    match (&mv.kind, mv.forward, &mv.site) {
        (MoveKind::A | MoveKind::APlus, true, MoveSite::Gap(gap)) => {
            if *gap > len {
                return Err(MoveError::GapOutOfRange { gap: *gap, len });
            }
            let pair = if mv.kind == MoveKind::A {
                [(m, Role::Tail), (m, Role::Head)]
            } else {
                [(m, Role::Head), (m, Role::Tail)]
            };
            let mut out = code.to_vec();
            out.splice(gap..gap, pair);
            Ok(make_string(out))
        }
        (MoveKind::A | MoveKind::APlus, false, MoveSite::Arrow(e)) => {
            if *e >= m {
                return Err(MoveError::ArrowOutOfRange { arrow: *e });
            }
            let pair = if mv.kind == MoveKind::A {
                [(*e, Role::Tail), (*e, Role::Head)]
            } else {
                [(*e, Role::Head), (*e, Role::Tail)]
            };
            let i = find_adjacent(code, pair).ok_or_else(|| {
                MoveError::PatternMismatch(
                    "the two endpoints of the arrow must be adjacent in the removal order".into(),
                )
            })?;
            let out: Vec<Token> = (0..len)
                .filter(|&k| k != i && k != (i + 1) % len)
                .map(|k| code[k])
                .collect();
            Ok(make_string(out))
        }
        (MoveKind::B { form }, true, MoveSite::GapPair(g1, g2)) => {
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
            let mut out = code.to_vec();
            out.splice(g2..g2, c2);
            out.splice(g1..g1, c1);
            Ok(make_string(out))
        }
        (MoveKind::B { form }, false, MoveSite::ArrowPair(e1, e2)) => {
            if *e1 >= m || *e2 >= m {
                return Err(MoveError::ArrowOutOfRange {
                    arrow: (*e1).max(*e2),
                });
            }
            let (c1, c2) = b_clusters(*e1, *e2, *form);
            let i = find_adjacent(code, c1);
            let j = find_adjacent(code, c2);
            let (Some(i), Some(j)) = (i, j) else {
                return Err(MoveError::PatternMismatch(
                    "both clusters of the form must occur as adjacent pairs".into(),
                ));
            };
            let cut: BTreeSet<usize> =
                [i, (i + 1) % len, j, (j + 1) % len].into_iter().collect();
            if cut.len() != 4 {
                return Err(MoveError::PatternMismatch(
                    "the two clusters must occupy disjoint arcs".into(),
                ));
            }
            let out: Vec<Token> = (0..len)
                .filter(|k| !cut.contains(k))
                .map(|k| code[k])
                .collect();
            Ok(make_string(out))
        }
        (MoveKind::C | MoveKind::CPlus, forward, MoveSite::Triple(positions)) => {
            if !triple_positions_ok(len, positions) {
                return Err(MoveError::PatternMismatch(
                    "the three clusters must occupy disjoint arcs".into(),
                ));
            }
            let clusters: Vec<(Token, Token)> = positions
                .iter()
                .map(|&p| (code[p], code[(p + 1) % len]))
                .collect();
            let ok = match mv.kind {
                MoveKind::C => c_pattern_ok(&clusters, forward),
                _ => c_plus_pattern_ok(&clusters, forward),
            };
            if !ok {
                return Err(MoveError::PatternMismatch(
                    "the clusters do not form the required arrow triple".into(),
                ));
            }
            Ok(make_string(swap_clusters(code, positions)))
        }
        _ => Err(MoveError::BadSite),
    }
}

/// All legal single-move instances on `s` whose results stay within the
/// rank cap.
pub fn legal_moves(s: &VirtualString, rank_cap: usize) -> Vec<MoveInstance> {
    let code = s.code();
    let len = code.len();
    let m = s.rank();
    let mut out = Vec::new();
    let gaps = if len == 0 { 1 } else { len };
    if m + 1 <= rank_cap {
        for g in 0..gaps {
            out.push(MoveInstance {
                kind: MoveKind::A,
                forward: true,
                site: MoveSite::Gap(g),
            });
            out.push(MoveInstance {
                kind: MoveKind::APlus,
                forward: true,
                site: MoveSite::Gap(g),
            });
        }
    }
    if m + 2 <= rank_cap {
        for g1 in 0..gaps {
            for g2 in g1..gaps {
                for form in 1..=4u8 {
                    out.push(MoveInstance {
                        kind: MoveKind::B { form },
                        forward: true,
                        site: MoveSite::GapPair(g1, g2),
                    });
                }
            }
        }
    }
    for e in 0..m {
        for kind in [MoveKind::A, MoveKind::APlus] {
            let pair = if kind == MoveKind::A {
                [(e, Role::Tail), (e, Role::Head)]
            } else {
                [(e, Role::Head), (e, Role::Tail)]
            };
            if find_adjacent(code, pair).is_some() {
                out.push(MoveInstance {
                    kind,
                    forward: false,
                    site: MoveSite::Arrow(e),
                });
            }
        }
    }
    for e1 in 0..m {
        for e2 in 0..m {
            if e1 == e2 {
                continue;
            }
            for form in 1..=4u8 {
                let mv = MoveInstance {
                    kind: MoveKind::B { form },
                    forward: false,
                    site: MoveSite::ArrowPair(e1, e2),
                };
                if apply_move(s, &mv).is_ok() {
                    out.push(mv);
                }
            }
        }
    }
    for i in 0..len {
        for j in 0..len {
            for k in 0..len {
                if !(i < j && j < k) {
                    continue;
                }
                let positions = [i, j, k];
                if !triple_positions_ok(len, &positions) {
                    continue;
                }
                for (kind, forward) in [
                    (MoveKind::C, true),
                    (MoveKind::C, false),
                    (MoveKind::CPlus, true),
                    (MoveKind::CPlus, false),
                ] {
                    let mv = MoveInstance {
                        kind,
                        forward,
                        site: MoveSite::Triple(positions),
                    };
                    if apply_move(s, &mv).is_ok() {
                        out.push(mv);
                    }
                }
            }
        }
    }
    out
}

/// Canonical codes reachable from `s` by one legal move within the
/// rank cap.
pub fn neighbors(s: &VirtualString, rank_cap: usize) -> BTreeSet<CanonicalCode> {
    legal_moves(s, rank_cap)
        .iter()
        .map(|mv| apply_move(s, mv).expect("legal move").canonicalize())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BfsStatus {
    Equal { path_length: usize },
    Distinct { invariant: String },
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BfsVerdict {
    pub status: BfsStatus,
    pub nodes: u64,
    pub rank_cap: usize,
}

/// Names an implemented homotopy invariant on which the two strings
/// differ, if any.
pub fn distinct_witness(a: &VirtualString, b: &VirtualString) -> Option<String> {
    if u(a) != u(b) {
        return Some("u".into());
    }
    for r1 in 1..=3u64 {
        if higher_u(a, &[r1]) != higher_u(b, &[r1]) {
            return Some(format!("u^({r1})"));
        }
        for r2 in 1..=3u64 {
            if higher_u(a, &[r1, r2]) != higher_u(b, &[r1, r2]) {
                return Some(format!("u^({r1},{r2})"));
            }
        }
    }
    if rho(a) != rho(b) {
        return Some("rho".into());
    }
    let ta = BasedMatrix::from_string(a).primitive_reduce();
    let tb = BasedMatrix::from_string(b).primitive_reduce();
    if !ta.is_isomorphic(&tb) {
        return Some("primitive-matrix".into());
    }
    None
}

fn string_of(code: &CanonicalCode) -> VirtualString {
    VirtualString::new(code.tokens.clone())
}

/// Bidirectional bounded search for a move path between two strings.
pub fn bfs_equal(
    a: &VirtualString,
    b: &VirtualString,
    rank_cap: usize,
    node_budget: u64,
) -> BfsVerdict {
    if let Some(invariant) = distinct_witness(a, b) {
        return BfsVerdict {
            status: BfsStatus::Distinct { invariant },
            nodes: 0,
            rank_cap,
        };
    }
    let start = a.canonicalize();
    let goal = b.canonicalize();
    let mut dist: [BTreeMap<CanonicalCode, usize>; 2] = [BTreeMap::new(), BTreeMap::new()];
    dist[0].insert(start.clone(), 0);
    dist[1].insert(goal.clone(), 0);
    let mut frontier: [VecDeque<CanonicalCode>; 2] =
        [VecDeque::from([start]), VecDeque::from([goal])];
    let mut nodes = 0u64;
    loop {
        if let Some(code) = dist[0].keys().find(|c| dist[1].contains_key(*c)) {
            let path_length = dist[0][code] + dist[1][code];
            return BfsVerdict {
                status: BfsStatus::Equal { path_length },
                nodes,
                rank_cap,
            };
        }
        if frontier.iter().all(|f| f.is_empty()) || nodes >= node_budget {
            return BfsVerdict {
                status: BfsStatus::Unknown,
                nodes,
                rank_cap,
            };
        }
        let side = if frontier[1].is_empty()
            || (!frontier[0].is_empty() && frontier[0].len() <= frontier[1].len())
        {
            0
        } else {
            1
        };
        let mut progressed = false;
        let level: Vec<CanonicalCode> = frontier[side].drain(..).collect();
        for code in level {
            let depth = dist[side][&code];
            for next in neighbors(&string_of(&code), rank_cap) {
                nodes += 1;
                if !dist[side].contains_key(&next) {
                    dist[side].insert(next.clone(), depth + 1);
                    frontier[side].push_back(next);
                    progressed = true;
                }
                if nodes >= node_budget {
                    break;
                }
            }
            if nodes >= node_budget {
                break;
            }
        }
        let _ = progressed;
    }
}

/// Canonical key of the homotopy class as computed by `normalize`; the
/// zero key marks the class of the trivial string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StringClassKey {
    Zero,
    Code(CanonicalCode),
}

/// One pass of rank-reducing moves: removes every available inverse-`a`
/// and inverse-`b` pattern until none is left.
pub fn fully_reduce(s: &VirtualString) -> VirtualString {
    let mut cur = s.clone();
    'outer: loop {
        for mv in legal_moves(&cur, cur.rank()) {
            let reducing = matches!(
                (&mv.kind, mv.forward),
                (MoveKind::A | MoveKind::APlus, false) | (MoveKind::B { .. }, false)
            );
            if reducing {
                cur = apply_move(&cur, &mv).expect("legal move");
                continue 'outer;
            }
        }
        return cur;
    }
}

fn rank_preserving_neighbors(s: &VirtualString) -> BTreeSet<CanonicalCode> {
    legal_moves(s, 0)
        .iter()
        .filter(|mv| matches!(mv.kind, MoveKind::C | MoveKind::CPlus))
        .map(|mv| apply_move(s, mv).expect("legal move").canonicalize())
        .collect()
}

/// Deterministic class representative: reduces the rank greedily,
/// explores the closure under the rank-preserving moves (reducing again
/// whenever possible), and returns the lexicographically minimal
/// canonical code found; the zero key whenever the rank drops to two or
/// below.
pub fn normalize(s: &VirtualString, node_budget: u64) -> StringClassKey {
    let start = fully_reduce(s);
    if start.rank() <= 2 {
        return StringClassKey::Zero;
    }
    let start = start.canonicalize();
    let mut visited: BTreeSet<CanonicalCode> = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    let mut best = start;
    let mut nodes = 0u64;
    while let Some(code) = queue.pop_front() {
        nodes += 1;
        if nodes > node_budget {
            break;
        }
        let cur = string_of(&code);
        for next in rank_preserving_neighbors(&cur) {
            let reduced = fully_reduce(&string_of(&next));
            if reduced.rank() <= 2 {
                return StringClassKey::Zero;
            }
            let key = reduced.canonicalize();
            if visited.insert(key.clone()) {
                if key < best {
                    best = key.clone();
                }
                queue.push_back(key);
            }
        }
    }
    StringClassKey::Code(best)
}

fn find_adjacent_open(code: &[Token], pair: [Token; 2]) -> Option<usize> {
    (0..code.len().saturating_sub(1)).find(|&i| code[i] == pair[0] && code[i + 1] == pair[1])
}

/// One rank-reducing move on an open string, if any pattern is present;
/// adjacency never crosses the endpoints of the core interval.
fn open_reduce_once(s: &OpenString) -> Option<OpenString> {
    let code = s.code();
    let len = code.len();
    for i in 0..len.saturating_sub(1) {
        if code[i].0 == code[i + 1].0 {
            let keep: Vec<Token> = (0..len)
                .filter(|&k| k != i && k != i + 1)
                .map(|k| code[k])
                .collect();
            return Some(make_open(&keep));
        }
    }
    let m = s.rank();
    for e1 in 0..m {
        for e2 in 0..m {
            if e1 == e2 {
                continue;
            }
            for form in 1..=4u8 {
                let (c1, c2) = b_clusters(e1, e2, form);
                let (Some(i), Some(j)) = (
                    find_adjacent_open(code, c1),
                    find_adjacent_open(code, c2),
                ) else {
                    continue;
                };
                let cut: BTreeSet<usize> = [i, i + 1, j, j + 1].into_iter().collect();
                if cut.len() == 4 {
                    let keep: Vec<Token> = (0..len)
                        .filter(|k| !cut.contains(k))
                        .map(|k| code[k])
                        .collect();
                    return Some(make_open(&keep));
                }
            }
        }
    }
    None
}

/// Removes rank-reducing patterns from an open string until none is left.
pub fn open_fully_reduce(s: &OpenString) -> OpenString {
    let mut cur = s.clone();
    while let Some(next) = open_reduce_once(&cur) {
        cur = next;
    }
    cur
}

fn open_c_neighbors(s: &OpenString) -> BTreeSet<CanonicalCode> {
    let code = s.code();
    let len = code.len();
    let mut out = BTreeSet::new();
    for i in 0..len {
        for j in (i + 2)..len {
            for k in (j + 2)..len {
                if k + 1 >= len {
                    continue;
                }
                let positions = [i, j, k];
                let clusters: Vec<(Token, Token)> = positions
                    .iter()
                    .map(|&p| (code[p], code[p + 1]))
                    .collect();
                for forward in [true, false] {
                    if c_pattern_ok(&clusters, forward) || c_plus_pattern_ok(&clusters, forward) {
                        let mut swapped = code.to_vec();
                        for &p in &positions {
                            swapped.swap(p, p + 1);
                        }
                        out.insert(make_open(&swapped).canonicalize());
                    }
                }
            }
        }
    }
    out
}

/// Deterministic open-string class representative: reduces the rank
/// greedily, explores the closure under the rank-preserving moves
/// (reducing again whenever possible), and returns the
/// lexicographically minimal canonical code found; the empty code marks
/// the trivial open string.
pub fn normalize_open(mu: &OpenString, node_budget: u64) -> CanonicalCode {
    let start = open_fully_reduce(mu).canonicalize();
    let mut visited: BTreeSet<CanonicalCode> = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    let mut best = start;
    let mut nodes = 0u64;
    while let Some(code) = queue.pop_front() {
        nodes += 1;
        if nodes > node_budget {
            break;
        }
        let cur = OpenString::new(code.tokens.clone());
        for next in open_c_neighbors(&cur) {
            let reduced = open_fully_reduce(&OpenString::new(next.tokens.clone())).canonicalize();
            if visited.insert(reduced.clone()) {
                if reduced < best {
                    best = reduced.clone();
                }
                queue.push_back(reduced);
            }
        }
    }
    best
}

/// Default rank-enumeration cap.
pub const DEFAULT_ENUM_CAP: usize = 5;

/// All homeomorphism classes of strings of rank `m`.
pub fn enumerate_strings(m: usize, cap: usize) -> Result<Vec<CanonicalCode>, MoveError> {
    if m > cap {
        return Err(MoveError::EnumerationCapExceeded { m, cap });
    }
    let mut out = BTreeSet::new();
    let mut slots: Vec<Option<Token>> = vec![None; 2 * m];
    fill_slots(&mut slots, 0, &mut out);
    Ok(out.into_iter().collect())
}

fn fill_slots(slots: &mut Vec<Option<Token>>, next_arrow: usize, out: &mut BTreeSet<CanonicalCode>) {
    let Some(first) = slots.iter().position(|t| t.is_none()) else {
        let tokens: Vec<Token> = slots.iter().map(|t| t.unwrap()).collect();
        out.insert(make_string(tokens).canonicalize());
        return;
    };
    for second in first + 1..slots.len() {
        if slots[second].is_some() {
            continue;
        }
        for (r1, r2) in [(Role::Tail, Role::Head), (Role::Head, Role::Tail)] {
            slots[first] = Some((next_arrow, r1));
            slots[second] = Some((next_arrow, r2));
            fill_slots(slots, next_arrow + 1, out);
        }
        slots[first] = None;
        slots[second] = None;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassBucket {
    pub key: StringClassKey,
    pub members: Vec<CanonicalCode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub classes: Vec<ClassBucket>,
    /// Pairs of class indices that share all implemented invariants but
    /// could not be proven equal within the budget.
    pub unknown_pairs: Vec<(usize, usize)>,
}

/// Groups all rank-`m` homeomorphism classes into homotopy classes.
pub fn classify_rank(
    m: usize,
    rank_cap_slack: usize,
    node_budget: u64,
) -> Result<Classification, MoveError> {
    let all = enumerate_strings(m, DEFAULT_ENUM_CAP)?;
    let mut buckets: BTreeMap<StringClassKey, Vec<CanonicalCode>> = BTreeMap::new();
    for code in all {
        let key = normalize(&string_of(&code), node_budget);
        buckets.entry(key).or_default().push(code);
    }
    let mut classes: Vec<ClassBucket> = buckets
        .into_iter()
        .map(|(key, members)| ClassBucket { key, members })
        .collect();
    let mut unknown_pairs = Vec::new();
    let mut i = 0;
    while i < classes.len() {
        let mut j = i + 1;
        while j < classes.len() {
            let a = string_of(&representative(&classes[i]));
            let b = string_of(&representative(&classes[j]));
            if distinct_witness(&a, &b).is_some() {
                j += 1;
                continue;
            }
            let cap = a.rank().max(b.rank()) + rank_cap_slack;
            match bfs_equal(&a, &b, cap, node_budget).status {
                BfsStatus::Equal { .. } => {
                    let merged = classes.remove(j);
                    classes[i].members.extend(merged.members);
                    if merged.key < classes[i].key {
                        classes[i].key = merged.key;
                    }
                }
                BfsStatus::Distinct { .. } => j += 1,
                BfsStatus::Unknown => {
                    unknown_pairs.push((i, j));
                    j += 1;
                }
            }
        }
        i += 1;
    }
    Ok(Classification {
        classes,
        unknown_pairs,
    })
}

fn representative(bucket: &ClassBucket) -> CanonicalCode {
    match &bucket.key {
        StringClassKey::Zero => VirtualString::trivial().canonicalize(),
        StringClassKey::Code(code) => code.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::u;

    fn family_1342() -> VirtualString {
        VirtualString::family_perm(&[3, 1, 4, 2])
    }

    #[test]
    fn a_move_on_trivial() {
        let mv = MoveInstance {
            kind: MoveKind::A,
            forward: true,
            site: MoveSite::Gap(0),
        };
        let s = apply_move(&VirtualString::trivial(), &mv).unwrap();
        assert_eq!(s.rank(), 1);
        assert_eq!(s.n_index(0), 0);
        let back = apply_move(
            &s,
            &MoveInstance {
                kind: MoveKind::A,
                forward: false,
                site: MoveSite::Arrow(0),
            },
        )
        .unwrap();
        assert_eq!(back, VirtualString::trivial());
    }

    #[test]
    fn b_move_on_trivial() {
        for form in 1..=4u8 {
            let mv = MoveInstance {
                kind: MoveKind::B { form },
                forward: true,
                site: MoveSite::GapPair(0, 0),
            };
            let s = apply_move(&VirtualString::trivial(), &mv).unwrap();
            assert_eq!(s.rank(), 2);
            assert_eq!(normalize(&s, 1000), StringClassKey::Zero);
        }
    }

    #[test]
    fn c_move_preserves_n() {
        let s = family_1342();
        for mv in legal_moves(&s, s.rank()) {
            if !matches!(mv.kind, MoveKind::C | MoveKind::CPlus) {
                continue;
            }
            if mv.kind == MoveKind::CPlus {
                continue;
            }
            let t = apply_move(&s, &mv).unwrap();
            let mut before = s.n_indices();
            let mut after = t.n_indices();
            before.sort_unstable();
            after.sort_unstable();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn pattern_mismatch_is_reported() {
        let s = VirtualString::family_pq(2, 1);
        let mv = MoveInstance {
            kind: MoveKind::A,
            forward: false,
            site: MoveSite::Arrow(0),
        };
        assert!(matches!(
            apply_move(&s, &mv),
            Err(MoveError::PatternMismatch(_))
        ));
    }

    #[test]
    fn neighbors_are_symmetric() {
        let s = VirtualString::family_pq(1, 1);
        let cap = s.rank() + 2;
        for next in neighbors(&s, cap) {
            let t = string_of(&next);
            assert!(
                neighbors(&t, cap).contains(&s.canonicalize()),
                "move to {} has no inverse",
                next.key()
            );
        }
    }

    #[test]
    fn u_constant_across_neighbors() {
        let s = VirtualString::family_pq(2, 1);
        for next in neighbors(&s, s.rank() + 2) {
            assert_eq!(u(&string_of(&next)), u(&s));
        }
    }

    #[test]
    fn rank_one_strings_from_a_moves() {
        let got = neighbors(&VirtualString::trivial(), 1);
        let want: BTreeSet<CanonicalCode> = ["a a'", "a' a"]
            .iter()
            .map(|t| VirtualString::parse(t).unwrap().canonicalize())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn trivializes_family_1342() {
        assert_eq!(normalize(&family_1342(), 10_000), StringClassKey::Zero);
        let verdict = bfs_equal(&family_1342(), &VirtualString::trivial(), 6, 200_000);
        assert!(matches!(verdict.status, BfsStatus::Equal { .. }));
    }

    #[test]
    fn distinct_by_u() {
        let verdict = bfs_equal(
            &VirtualString::family_pq(1, 2),
            &VirtualString::family_pq(2, 1),
            5,
            1000,
        );
        assert_eq!(
            verdict.status,
            BfsStatus::Distinct {
                invariant: "u".into()
            }
        );
    }

    #[test]
    fn distinct_from_inverse_by_matrix() {
        let s = VirtualString::family_perm(&[3, 2, 4, 1, 5]);
        let verdict = bfs_equal(&s, &s.inverse(), 7, 1000);
        assert_eq!(
            verdict.status,
            BfsStatus::Distinct {
                invariant: "primitive-matrix".into()
            }
        );
    }

    #[test]
    fn normalize_move_invariant() {
        let s = VirtualString::family_pq(2, 1);
        let key = normalize(&s, 10_000);
        assert_ne!(key, StringClassKey::Zero);
        for mv in legal_moves(&s, s.rank() + 2) {
            let t = apply_move(&s, &mv).unwrap();
            assert_eq!(normalize(&t, 10_000), key);
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_strings(0, 5).unwrap().len(), 1);
        // one arrow on a circle: head-after-tail and tail-after-head are
        // rotations of each other
        assert_eq!(enumerate_strings(1, 5).unwrap().len(), 1);
        assert_eq!(enumerate_strings(2, 5).unwrap().len(), 4);
        assert!(matches!(
            enumerate_strings(6, 5),
            Err(MoveError::EnumerationCapExceeded { .. })
        ));
    }

    #[test]
    fn rank_one_all_trivial() {
        let classification = classify_rank(1, 2, 10_000).unwrap();
        assert_eq!(classification.classes.len(), 1);
        assert_eq!(classification.classes[0].key, StringClassKey::Zero);
    }

    #[test]
    fn rank_three_classification() {
        let classification = classify_rank(3, 2, 50_000).unwrap();
        assert!(classification.unknown_pairs.is_empty());
        assert_eq!(classification.classes.len(), 3);
        let keys: BTreeSet<StringClassKey> = classification
            .classes
            .iter()
            .map(|c| c.key.clone())
            .collect();
        assert!(keys.contains(&StringClassKey::Zero));
        assert!(keys.contains(&normalize(&VirtualString::family_pq(1, 2), 10_000)));
        assert!(keys.contains(&normalize(&VirtualString::family_pq(2, 1), 10_000)));
    }

    #[test]
    fn open_normalize_reduces_and_distinguishes() {
        let trivialized = ["a a'", "a' a", "a b b' a'"];
        for text in &trivialized {
            let mu = OpenString::parse(text).unwrap();
            assert!(
                normalize_open(&mu, 1000).tokens.is_empty(),
                "{text} should reduce to the trivial open string"
            );
        }
        let crossed = OpenString::parse("a b a' b'").unwrap();
        let key = normalize_open(&crossed, 1000);
        assert_eq!(key.tokens.len(), 4);
        let padded = OpenString::parse("a c c' b a' b'").unwrap();
        assert_eq!(normalize_open(&padded, 1000), key);
    }

    #[test]
    fn fixed_last_point_reduces() {
        let cases: [(&[usize], &[usize]); 3] =
            [(&[1, 2, 3], &[1, 2]), (&[2, 1, 3], &[2, 1]), (&[1], &[])];
        for (sigma, tau) in cases {
            let s = VirtualString::family_perm(sigma);
            let t = VirtualString::family_perm(tau);
            let verdict = bfs_equal(&s, &t, s.rank() + 2, 100_000);
            assert!(
                matches!(verdict.status, BfsStatus::Equal { .. }),
                "sigma {sigma:?}"
            );
        }
    }
}
