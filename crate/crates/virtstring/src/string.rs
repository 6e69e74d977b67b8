//! Core combinatorial objects: virtual strings, open strings, arrow diagrams.
//!
//! A closed virtual string of rank `m` is stored as a cyclic sequence of `2m`
//! tokens, each token being an (arrow id, role) pair; arrow ids are dense
//! integers `0..m`.  Open strings use the same representation with a linear
//! (non-cyclic) token order.  Arrow diagrams add a sign to every arrow.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Role of an endpoint token: the tail or the head of its arrow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Tail,
    Head,
}

pub type Token = (usize, Role);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("token `{0}`: label may not be empty")]
    EmptyLabel(String),
    #[error("token `{0}`: invalid character in label")]
    BadLabel(String),
    #[error("token `{0}`: sign suffix only allowed on tail tokens of diagrams")]
    UnexpectedSign(String),
    #[error("token `{0}`: diagram tail tokens need a `+` or `-` sign suffix")]
    MissingSign(String),
    #[error("label `{0}`: duplicate {1:?} token")]
    DuplicateRole(String, Role),
    #[error("label `{0}`: appears only as {1:?}")]
    MissingRole(String, Role),
}

/// A closed virtual string: cyclic code of `2m` endpoint tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VirtualString {
    code: Vec<Token>,
}

/// An open virtual string: the same code read linearly on an interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpenString {
    code: Vec<Token>,
}

/// A virtual string whose arrows carry signs; represents a virtual knot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ArrowDiagram {
    underlying: VirtualString,
    signs: Vec<i8>,
}

/// Rotation-minimal relabeled code; equal iff the strings are homeomorphic.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode {
    pub tokens: Vec<Token>,
}

impl CanonicalCode {
    pub fn key(&self) -> String {
        serialize_tokens(&self.tokens, None)
    }
}

fn validate(code: &[Token], labels: &[String]) -> Result<(), ParseError> {
    let mut seen = vec![[false; 2]; labels.len()];
    for &(id, role) in code {
        let slot = &mut seen[id][(role == Role::Head) as usize];
        if *slot {
            return Err(ParseError::DuplicateRole(labels[id].clone(), role));
        }
        *slot = true;
    }
    for (id, s) in seen.iter().enumerate() {
        if !s[0] {
            return Err(ParseError::MissingRole(labels[id].clone(), Role::Head));
        }
        if !s[1] {
            return Err(ParseError::MissingRole(labels[id].clone(), Role::Tail));
        }
    }
    Ok(())
}

fn parse_tokens(text: &str, diagram: bool) -> Result<(Vec<Token>, Vec<String>, Vec<i8>), ParseError> {
    let mut code = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut signs: Vec<i8> = Vec::new();
    for raw in text.split_whitespace() {
        let mut tok = raw;
        let role = if let Some(rest) = tok.strip_suffix('\'') {
            tok = rest;
            Role::Head
        } else {
            Role::Tail
        };
        let mut sign = 0i8;
        if let Some(rest) = tok.strip_suffix('+') {
            tok = rest;
            sign = 1;
        } else if let Some(rest) = tok.strip_suffix('-') {
            tok = rest;
            sign = -1;
        }
        if sign != 0 && (!diagram || role == Role::Head) {
            return Err(ParseError::UnexpectedSign(raw.to_string()));
        }
        if diagram && role == Role::Tail && sign == 0 {
            return Err(ParseError::MissingSign(raw.to_string()));
        }
        if tok.is_empty() {
            return Err(ParseError::EmptyLabel(raw.to_string()));
        }
        if !tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ParseError::BadLabel(raw.to_string()));
        }
        let id = match labels.iter().position(|l| l == tok) {
            Some(i) => i,
            None => {
                labels.push(tok.to_string());
                signs.push(0);
                labels.len() - 1
            }
        };
        if sign != 0 {
            signs[id] = sign;
        }
        code.push((id, role));
    }
    validate(&code, &labels)?;
    Ok((code, labels, signs))
}

fn label_for(id: usize) -> String {
    // a..z, then a1, b1, ...
    let letter = (b'a' + (id % 26) as u8) as char;
    if id < 26 {
        letter.to_string()
    } else {
        format!("{}{}", letter, id / 26)
    }
}

fn serialize_tokens(code: &[Token], signs: Option<&[i8]>) -> String {
    code.iter()
        .map(|&(id, role)| {
            let mut s = label_for(id);
            if role == Role::Tail {
                if let Some(signs) = signs {
                    s.push(if signs[id] >= 0 { '+' } else { '-' });
                }
            } else {
                s.push('\'');
            }
            s
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Shared combinatorics over a token code; `closed` selects cyclic reading.
fn canonical_tokens(code: &[Token], closed: bool) -> Vec<Token> {
    let n = code.len();
    if n == 0 {
        return Vec::new();
    }
    let relabel = |start: usize| -> Vec<Token> {
        let m = n / 2;
        let mut map = vec![usize::MAX; m];
        let mut next = 0;
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let (id, role) = code[(start + k) % n];
            if map[id] == usize::MAX {
                map[id] = next;
                next += 1;
            }
            out.push((map[id], role));
        }
        out
    };
    if !closed {
        return relabel(0);
    }
    (0..n).map(relabel).min().unwrap()
}

fn positions(code: &[Token]) -> (Vec<usize>, Vec<usize>) {
    let m = code.len() / 2;
    let mut tails = vec![0; m];
    let mut heads = vec![0; m];
    for (pos, &(id, role)) in code.iter().enumerate() {
        match role {
            Role::Tail => tails[id] = pos,
            Role::Head => heads[id] = pos,
        }
    }
    (tails, heads)
}

/// Is position `x` in the open arc running forward from `from` to `to`?
/// All three positions are assumed distinct.
fn in_arc(x: usize, from: usize, to: usize, len: usize) -> bool {
    let fwd = |a: usize, b: usize| (b + len - a) % len;
    fwd(from, x) < fwd(from, to)
}

fn linking_by_pos(e: (usize, usize), f: (usize, usize), len: usize) -> i64 {
    let (a, b) = e;
    let (c, d) = f;
    if in_arc(c, a, b, len) && in_arc(d, b, a, len) {
        1
    } else if in_arc(c, b, a, len) && in_arc(d, a, b, len) {
        -1
    } else {
        0
    }
}

impl VirtualString {
    pub fn new(code: Vec<Token>) -> Self {
        let ids = code.len() / 2;
        let labels: Vec<String> = (0..ids).map(label_for).collect();
        assert!(code.iter().all(|&(id, _)| id < ids), "arrow id out of range");
        validate(&code, &labels).expect("invalid code");
        VirtualString { code }
    }

    pub fn trivial() -> Self {
        VirtualString { code: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (code, _, _) = parse_tokens(text, false)?;
        Ok(VirtualString { code })
    }

    pub fn serialize(&self) -> String {
        serialize_tokens(&self.code, None)
    }

    /// Number of arrows.
    pub fn rank(&self) -> usize {
        self.code.len() / 2
    }

    pub fn code(&self) -> &[Token] {
        &self.code
    }

    pub fn canonicalize(&self) -> CanonicalCode {
        CanonicalCode {
            tokens: canonical_tokens(&self.code, true),
        }
    }

    pub fn is_homeomorphic(&self, other: &VirtualString) -> bool {
        self.canonicalize() == other.canonicalize()
    }

    /// Tail and head positions per arrow id.
    pub fn endpoints(&self) -> (Vec<usize>, Vec<usize>) {
        positions(&self.code)
    }

    /// Linking sign of arrow `f` with respect to arrow `e`.
    ///
    /// `+1` when the tail of `f` lies on the tail-to-head arc of `e` and the
    /// head of `f` on the complementary arc; `-1` in the mirrored
    /// configuration; `0` when unlinked or `e == f`.
    pub fn linking(&self, e: usize, f: usize) -> i64 {
        assert!(e < self.rank() && f < self.rank(), "unknown arrow id");
        if e == f {
            return 0;
        }
        let (tails, heads) = self.endpoints();
        linking_by_pos((tails[e], heads[e]), (tails[f], heads[f]), self.code.len())
    }

    /// Algebraic number of arrows linking `e`.
    pub fn n_index(&self, e: usize) -> i64 {
        assert!(e < self.rank(), "unknown arrow id");
        let (tails, heads) = self.endpoints();
        let len = self.code.len();
        (0..self.rank())
            .filter(|&f| f != e)
            .map(|f| linking_by_pos((tails[e], heads[e]), (tails[f], heads[f]), len))
            .sum()
    }

    pub fn n_indices(&self) -> Vec<i64> {
        (0..self.rank()).map(|e| self.n_index(e)).collect()
    }

    /// The pairing of arcs: `ab . cd` counts arrows with tail in the interior
    /// of the first arc and head in the interior of the second, minus the
    /// opposite count.  Arcs are given by (start, end) positions on the code
    /// circle and run in the positive direction.
    pub fn arcs_dot(&self, arc1: (usize, usize), arc2: (usize, usize)) -> i64 {
        let len = self.code.len();
        let (tails, heads) = self.endpoints();
        let interior = |x: usize, arc: (usize, usize)| -> bool {
            x != arc.0 && x != arc.1 && in_arc(x, arc.0, arc.1, len)
        };
        let mut dot = 0;
        for e in 0..self.rank() {
            if interior(tails[e], arc1) && interior(heads[e], arc2) {
                dot += 1;
            }
            if interior(tails[e], arc2) && interior(heads[e], arc1) {
                dot -= 1;
            }
        }
        dot
    }

    /// The string with the opposite orientation of the core circle.
    pub fn opposite(&self) -> VirtualString {
        let code: Vec<Token> = self.code.iter().rev().copied().collect();
        VirtualString { code }
    }

    /// The string with every arrow reversed.
    pub fn inverse(&self) -> VirtualString {
        let code = self
            .code
            .iter()
            .map(|&(id, role)| {
                let role = match role {
                    Role::Tail => Role::Head,
                    Role::Head => Role::Tail,
                };
                (id, role)
            })
            .collect();
        VirtualString { code }
    }

    /// Product on disjoint consecutive arcs: concatenation of the codes.
    pub fn product(&self, other: &VirtualString) -> VirtualString {
        let off = self.rank();
        let mut code = self.code.clone();
        code.extend(other.code.iter().map(|&(id, role)| (id + off, role)));
        VirtualString { code }
    }

    /// Keep only the arrows with the given ids (re-indexed densely, in order
    /// of their original ids).
    pub fn substring(&self, keep: &[bool]) -> VirtualString {
        let mut map = vec![usize::MAX; self.rank()];
        let mut next = 0;
        for (id, &k) in keep.iter().enumerate() {
            if k {
                map[id] = next;
                next += 1;
            }
        }
        let code = self
            .code
            .iter()
            .filter(|&&(id, _)| keep[id])
            .map(|&(id, role)| (map[id], role))
            .collect();
        VirtualString { code }
    }

    /// The r-th covering: keep arrows with `n(e) == 0 (mod r)`.
    pub fn covering(&self, r: u64) -> VirtualString {
        assert!(r >= 1);
        let keep: Vec<bool> = self
            .n_indices()
            .iter()
            .map(|&n| n.rem_euclid(r as i64) == 0)
            .collect();
        self.substring(&keep)
    }

    /// The lattice string `alpha_{p,q}` of rank `p+q`.
    pub fn family_pq(p: usize, q: usize) -> VirtualString {
        assert!(p >= 1 && q >= 1);
        let m = p + q;
        let sigma: Vec<usize> = (1..=m).map(|i| if i <= p { i + q } else { i - p }).collect();
        Self::family_perm(&sigma)
    }

    /// The string `alpha_sigma` of a permutation of `{1..m}` (given as the
    /// vector of values `sigma(1), ..., sigma(m)`).
    ///
    /// Layout: tails `a_1..a_m` in index order followed by heads
    /// `b_m..b_1`; arrow `i` runs from `a_i` to `b_{sigma(i)}`.  With this
    /// layout `n(e_i) = sigma(i) - i`.
    pub fn family_perm(sigma: &[usize]) -> VirtualString {
        let m = sigma.len();
        let mut check = vec![false; m];
        for &v in sigma {
            assert!(v >= 1 && v <= m && !check[v - 1], "invalid permutation");
            check[v - 1] = true;
        }
        let mut code = vec![(usize::MAX, Role::Tail); 2 * m];
        for i in 1..=m {
            code[i - 1] = (i - 1, Role::Tail);
            code[2 * m - sigma[i - 1]] = (i - 1, Role::Head);
        }
        VirtualString { code }
    }

    /// The cable `r . alpha`: every arrow becomes `r` parallel arrows.
    pub fn cable(&self, r: usize) -> VirtualString {
        assert!(r >= 1);
        let m = self.rank();
        let mut code = Vec::with_capacity(2 * m * r);
        // copy k of arrow e gets id e*r + k; nested matching keeps the
        // parallel copies pairwise unlinked
        for &(id, role) in &self.code {
            for k in 0..r {
                let copy = match role {
                    Role::Tail => k,
                    Role::Head => r - 1 - k,
                };
                code.push((id * r + copy, role));
            }
        }
        VirtualString { code }
    }

    pub fn rotate(&self, by: usize) -> VirtualString {
        if self.code.is_empty() {
            return self.clone();
        }
        let n = self.code.len();
        let code = (0..n).map(|k| self.code[(by + k) % n]).collect();
        VirtualString { code }
    }

    /// Does the string admit an orientation-reversing involution of the core
    /// circle sending every arrow `(a, b)` to an arrow `(j(b), j(a))`?
    pub fn is_ribbon(&self) -> bool {
        let n = self.code.len();
        if n == 0 {
            return true;
        }
        let (tails, heads) = self.endpoints();
        let arrow_at: std::collections::HashSet<(usize, usize)> =
            (0..self.rank()).map(|e| (tails[e], heads[e])).collect();
        // reflections j(k) = c - k (mod 2m); c even would fix two endpoint
        // positions, so only odd axes are admissible
        (0..n).step_by(2).any(|c1| {
            let c = c1 + 1;
            (0..self.rank()).all(|e| {
                let jt = (c + n - tails[e] % n) % n;
                let jh = (c + n - heads[e] % n) % n;
                arrow_at.contains(&(jh, jt))
            })
        })
    }
}

impl fmt::Display for VirtualString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}

impl OpenString {
    pub fn new(code: Vec<Token>) -> Self {
        let ids = code.len() / 2;
        let labels: Vec<String> = (0..ids).map(label_for).collect();
        assert!(code.iter().all(|&(id, _)| id < ids), "arrow id out of range");
        validate(&code, &labels).expect("invalid code");
        OpenString { code }
    }

    pub fn trivial() -> Self {
        OpenString { code: Vec::new() }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (code, _, _) = parse_tokens(text, false)?;
        Ok(OpenString { code })
    }

    pub fn serialize(&self) -> String {
        serialize_tokens(&self.code, None)
    }

    pub fn rank(&self) -> usize {
        self.code.len() / 2
    }

    pub fn code(&self) -> &[Token] {
        &self.code
    }

    pub fn canonicalize(&self) -> CanonicalCode {
        CanonicalCode {
            tokens: canonical_tokens(&self.code, false),
        }
    }

    /// Glue the interval endpoints into a closed string.
    pub fn closure(&self) -> VirtualString {
        VirtualString {
            code: self.code.clone(),
        }
    }

    /// Concatenation of the core intervals.
    pub fn open_product(&self, other: &OpenString) -> OpenString {
        let off = self.rank();
        let mut code = self.code.clone();
        code.extend(other.code.iter().map(|&(id, role)| (id + off, role)));
        OpenString { code }
    }

    /// Reverse the core interval and all arrows.
    pub fn open_reverse(&self) -> OpenString {
        let code = self
            .code
            .iter()
            .rev()
            .map(|&(id, role)| {
                let role = match role {
                    Role::Tail => Role::Head,
                    Role::Head => Role::Tail,
                };
                (id, role)
            })
            .collect();
        OpenString { code }
    }

    /// Arrow ids whose tail precedes the head in the interval order.
    pub fn positive_arrows(&self) -> Vec<bool> {
        let (tails, heads) = positions(&self.code);
        (0..self.rank()).map(|e| tails[e] < heads[e]).collect()
    }

    pub fn substring(&self, keep: &[bool]) -> OpenString {
        OpenString {
            code: VirtualString {
                code: self.code.clone(),
            }
            .substring(keep)
            .code,
        }
    }

    /// The r-th covering, with `n` computed on the closure.
    pub fn covering(&self, r: u64) -> OpenString {
        assert!(r >= 1);
        let cl = self.closure();
        let keep: Vec<bool> = cl
            .n_indices()
            .iter()
            .map(|&n| n.rem_euclid(r as i64) == 0)
            .collect();
        self.substring(&keep)
    }

    /// Does the interval admit an orientation-reversing involution sending
    /// every arrow to a reversed arrow?
    pub fn is_ribbon_open(&self) -> bool {
        let n = self.code.len();
        if n == 0 {
            return true;
        }
        let (tails, heads) = positions(&self.code);
        let arrow_at: std::collections::HashSet<(usize, usize)> =
            (0..self.rank()).map(|e| (tails[e], heads[e])).collect();
        let j = |k: usize| n - 1 - k;
        (0..self.rank()).all(|e| arrow_at.contains(&(j(heads[e]), j(tails[e]))))
    }
}

impl fmt::Display for OpenString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}

impl ArrowDiagram {
    pub fn new(underlying: VirtualString, signs: Vec<i8>) -> Self {
        assert_eq!(signs.len(), underlying.rank());
        assert!(signs.iter().all(|&s| s == 1 || s == -1));
        ArrowDiagram { underlying, signs }
    }

    pub fn trivial() -> Self {
        ArrowDiagram {
            underlying: VirtualString::trivial(),
            signs: Vec::new(),
        }
    }

    pub fn all_plus(underlying: VirtualString) -> Self {
        let signs = vec![1; underlying.rank()];
        ArrowDiagram { underlying, signs }
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let (code, _, signs) = parse_tokens(text, true)?;
        Ok(ArrowDiagram {
            underlying: VirtualString { code },
            signs,
        })
    }

    pub fn serialize(&self) -> String {
        serialize_tokens(&self.underlying.code, Some(&self.signs))
    }

    pub fn rank(&self) -> usize {
        self.underlying.rank()
    }

    pub fn underlying(&self) -> &VirtualString {
        &self.underlying
    }

    pub fn sign(&self, e: usize) -> i8 {
        self.signs[e]
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn with_sign(&self, e: usize, sign: i8) -> ArrowDiagram {
        let mut signs = self.signs.clone();
        signs[e] = sign;
        ArrowDiagram {
            underlying: self.underlying.clone(),
            signs,
        }
    }

    pub fn subdiagram(&self, keep: &[bool]) -> ArrowDiagram {
        let underlying = self.underlying.substring(keep);
        let signs = self
            .signs
            .iter()
            .zip(keep)
            .filter(|&(_, &k)| k)
            .map(|(&s, _)| s)
            .collect();
        ArrowDiagram { underlying, signs }
    }

    /// Keep signed arrows with `n(e) == 0 (mod r)`.
    pub fn knot_covering(&self, r: u64) -> ArrowDiagram {
        assert!(r >= 1);
        let keep: Vec<bool> = self
            .underlying
            .n_indices()
            .iter()
            .map(|&n| n.rem_euclid(r as i64) == 0)
            .collect();
        self.subdiagram(&keep)
    }

    /// Canonical form: minimal relabeled rotation, signs carried along.
    pub fn canonical_key(&self) -> (Vec<Token>, Vec<i8>) {
        let n = self.underlying.code.len();
        if n == 0 {
            return (Vec::new(), Vec::new());
        }
        let m = n / 2;
        (0..n)
            .map(|start| {
                let mut map = vec![usize::MAX; m];
                let mut order = Vec::new();
                let mut out = Vec::with_capacity(n);
                for k in 0..n {
                    let (id, role) = self.underlying.code[(start + k) % n];
                    if map[id] == usize::MAX {
                        map[id] = order.len();
                        order.push(id);
                    }
                    out.push((map[id], role));
                }
                let signs: Vec<i8> = order.iter().map(|&id| self.signs[id]).collect();
                (out, signs)
            })
            .min()
            .unwrap()
    }

    pub fn is_homeomorphic(&self, other: &ArrowDiagram) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

impl fmt::Display for ArrowDiagram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.serialize())
    }
}
