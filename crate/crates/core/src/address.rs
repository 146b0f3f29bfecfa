//! Addresses of cells, vertices, bottom-edge dyadic points and the pair
//! algebra of bottom subintervals.
//!
//! Orientation: the bottom edge `I = [0, 1]` runs from `q₁` (t = 0) to `q₂`
//! (t = 1), so `F₁` and `F₂` restrict to `t ↦ t/2` and `t ↦ (t + 1)/2`.
//!
//! Vertices carry a dense index that is independent of the level: `q₀, q₁,
//! q₂` are `0, 1, 2`, and the vertices created at level `n ≥ 1` occupy the
//! block starting at [`level_offset`]`(n)`. Inside that block the midpoint of
//! the edge opposite corner `c` of the level-`(n−1)` cell with index `p` sits
//! at `3p + c`. A function on `V_m` is therefore a prefix of a function on
//! `V_{m+1}`.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the refinement level.
pub const DEFAULT_MAX_LEVEL: usize = 12;
/// Hard ceiling for [`set_max_level`]; indices stay well inside `usize`.
pub const HARD_MAX_LEVEL: usize = 20;

static MAX_LEVEL: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_LEVEL);

pub fn max_level() -> usize {
    MAX_LEVEL.load(Ordering::Relaxed)
}

/// Sets the process-wide level cap (clamped to [`HARD_MAX_LEVEL`]).
pub fn set_max_level(level: usize) -> usize {
    let level = level.min(HARD_MAX_LEVEL);
    MAX_LEVEL.store(level, Ordering::Relaxed);
    level
}

pub fn check_level(level: usize) -> Result<()> {
    let max = max_level();
    if level > max {
        Err(Error::LevelTooDeep { level, max })
    } else {
        Ok(())
    }
}

pub fn pow3(n: usize) -> usize {
    3usize.pow(n as u32)
}

/// `|V_m| = (3^{m+1} + 3) / 2`.
pub fn vertex_count(m: usize) -> usize {
    (pow3(m + 1) + 3) / 2
}

/// First dense index of `Ṽ_n` (`0` for `n = 0`).
pub fn level_offset(n: usize) -> usize {
    if n == 0 {
        0
    } else {
        (pow3(n) + 3) / 2
    }
}

/// Level at which the vertex with dense index `idx` is created.
pub fn level_of_index(idx: usize) -> usize {
    let mut n = 0;
    while vertex_count(n) <= idx {
        n += 1;
    }
    n
}

/// A finite word over `{0, 1, 2}`; the empty word is the identity map.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word(Vec<u8>);

impl Word {
    pub fn new(digits: Vec<u8>) -> Result<Self> {
        if let Some(d) = digits.iter().find(|&&d| d > 2) {
            return Err(Error::InvalidAddress(format!("digit {d} not in {{0,1,2}}")));
        }
        Ok(Word(digits))
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn digits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut d = self.0.clone();
        d.extend_from_slice(&other.0);
        Word(d)
    }

    pub fn push(&mut self, digit: u8) {
        assert!(digit <= 2);
        self.0.push(digit);
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Base-3 index of the cell `F_w SG` among the cells of its level.
    pub fn cell_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &d| acc * 3 + d as usize)
    }

    pub fn from_cell_index(level: usize, mut index: usize) -> Word {
        let mut d = vec![0u8; level];
        for slot in d.iter_mut().rev() {
            *slot = (index % 3) as u8;
            index /= 3;
        }
        Word(d)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                '2' => Ok(2),
                _ => Err(Error::InvalidAddress(format!("bad digit {c:?} in {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Ok(Word(digits))
    }
}

/// A bottom subinterval `[(k−1)/2^n, k/2^n] = F_{w(n,k)}([0,1])`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    n: usize,
    k: usize,
}

impl PairIndex {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > 62 || k < 1 || k > 1usize << n {
            return Err(Error::IndexOutOfRange(format!("pair ({n},{k})")));
        }
        Ok(PairIndex { n, k })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The word `w(n,k) ∈ {1,2}^n`: the binary digits of `k − 1`, with
    /// `0 ↦ 1` (left half) and `1 ↦ 2` (right half).
    pub fn word(&self) -> Word {
        let bits = self.k - 1;
        Word(
            (0..self.n)
                .rev()
                .map(|b| if (bits >> b) & 1 == 1 { 2 } else { 1 })
                .collect(),
        )
    }

    /// Index of the level-`n` cell `F_{w(n,k)} SG`.
    pub fn cell_index(&self) -> usize {
        let bits = self.k - 1;
        (0..self.n)
            .rev()
            .fold(0, |acc, b| acc * 3 + 1 + ((bits >> b) & 1))
    }

    /// Endpoints of the interval.
    pub fn interval(&self) -> (DyadicPoint, DyadicPoint) {
        (
            DyadicPoint {
                n: self.n,
                k: self.k - 1,
            },
            DyadicPoint {
                n: self.n,
                k: self.k,
            },
        )
    }
}

/// `w(n,k)` for a pair.
pub fn word_of(p: PairIndex) -> Word {
    p.word()
}

/// Pair concatenation: `w(p + q) = w(p) w(q)`.
pub fn pair_add(p: PairIndex, q: PairIndex) -> PairIndex {
    PairIndex {
        n: p.n + q.n,
        k: ((p.k - 1) << q.n) + q.k,
    }
}

/// `p ≥ q` iff the interval of `p` lies inside the interval of `q`.
pub fn pair_geq(p: PairIndex, q: PairIndex) -> bool {
    p.n >= q.n && ((p.k - 1) >> (p.n - q.n)) == q.k - 1
}

/// A dyadic point `k / 2^n` of the bottom edge.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DyadicPoint {
    n: usize,
    k: usize,
}

impl DyadicPoint {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > 62 || k > 1usize << n {
            return Err(Error::IndexOutOfRange(format!("dyadic point {k}/2^{n}")));
        }
        Ok(DyadicPoint { n, k })
    }

    pub fn zero() -> Self {
        DyadicPoint { n: 0, k: 0 }
    }

    pub fn one() -> Self {
        DyadicPoint { n: 0, k: 1 }
    }

    /// Reduced form: odd `k`, or `n = 0`.
    pub fn reduced(&self) -> DyadicPoint {
        let (mut n, mut k) = (self.n, self.k);
        if k == 0 {
            return DyadicPoint { n: 0, k: 0 };
        }
        while n > 0 && k % 2 == 0 {
            n -= 1;
            k /= 2;
        }
        DyadicPoint { n, k }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Level of the reduced form: the first level whose grid contains it.
    pub fn level(&self) -> usize {
        self.reduced().n
    }

    pub fn value(&self) -> f64 {
        self.k as f64 / (1u64 << self.n) as f64
    }

    /// Grid index of this point at level `m`, if the point lies on that grid.
    pub fn index_at(&self, m: usize) -> Option<usize> {
        let r = self.reduced();
        (r.n <= m).then(|| r.k << (m - r.n))
    }
}

impl PartialEq for DyadicPoint {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.reduced(), other.reduced());
        a.n == b.n && a.k == b.k
    }
}

impl Eq for DyadicPoint {}

impl fmt::Display for DyadicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.reduced();
        if r.n == 0 {
            write!(f, "{}", r.k)
        } else {
            write!(f, "{}/{}", r.k, 1u64 << r.n)
        }
    }
}

/// A vertex of `V_*`, held in canonical form.
///
/// A vertex created at level `n ≥ 1` has two raw addresses of length `n`,
/// `F_{w'a} q_b = F_{w'b} q_a` with `a ≠ b`; the canonical one is the
/// lexicographically smaller, i.e. the one whose last word digit is smaller
/// than its corner. Boundary vertices have the empty word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId {
    word: Word,
    corner: u8,
}

impl VertexId {
    /// Canonicalizes the raw address `F_w q_corner`.
    pub fn new(word: Word, corner: u8) -> Result<Self> {
        if corner > 2 {
            return Err(Error::InvalidAddress(format!(
                "corner {corner} not in {{0,1,2}}"
            )));
        }
        let mut d = word.0;
        while d.last() == Some(&corner) {
            d.pop();
        }
        match d.last().copied() {
            None => Ok(VertexId {
                word: Word(d),
                corner,
            }),
            Some(a) if a < corner => Ok(VertexId {
                word: Word(d),
                corner,
            }),
            Some(a) => {
                *d.last_mut().expect("nonempty") = corner;
                Ok(VertexId {
                    word: Word(d),
                    corner: a,
                })
            }
        }
    }

    pub fn boundary(i: u8) -> Self {
        assert!(i <= 2);
        VertexId {
            word: Word::empty(),
            corner: i,
        }
    }

    pub fn word(&self) -> &Word {
        &self.word
    }

    pub fn corner(&self) -> u8 {
        self.corner
    }

    /// Creation level (`0` for `V₀`).
    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn is_boundary(&self) -> bool {
        self.word.is_empty()
    }

    pub fn index(&self) -> usize {
        let d = self.word.digits();
        match d.split_last() {
            None => self.corner as usize,
            Some((&a, parent)) => {
                let p = parent.iter().fold(0usize, |acc, &x| acc * 3 + x as usize);
                level_offset(d.len()) + 3 * p + (3 - a - self.corner) as usize
            }
        }
    }

    pub fn from_index(idx: usize) -> Self {
        if idx < 3 {
            return VertexId::boundary(idx as u8);
        }
        let n = level_of_index(idx);
        let r = idx - level_offset(n);
        let (p, opp) = (r / 3, (r % 3) as u8);
        let (a, b) = edge_of(opp);
        let mut word = Word::from_cell_index(n - 1, p);
        word.push(a);
        VertexId { word, corner: b }
    }

    /// Both raw addresses of minimal length (one for boundary vertices).
    pub fn raw_addresses(&self) -> Vec<(Word, u8)> {
        let mut out = vec![(self.word.clone(), self.corner)];
        if let Some(&a) = self.word.digits().last() {
            let mut d = self.word.digits().to_vec();
            *d.last_mut().expect("nonempty") = self.corner;
            out.push((Word(d), a));
        }
        out
    }

    /// The word `u` of minimal length with `self = F_u q_corner`, if any.
    pub fn address_with_corner(&self, corner: u8) -> Option<Word> {
        self.raw_addresses()
            .into_iter()
            .find(|(_, c)| *c == corner)
            .map(|(w, _)| w)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.word, self.corner)
    }
}

impl FromStr for VertexId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (w, c) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidAddress(format!("missing ':' in {s:?}")))?;
        let corner: u8 = c
            .parse()
            .map_err(|_| Error::InvalidAddress(format!("bad corner in {s:?}")))?;
        VertexId::new(w.parse()?, corner)
    }
}

/// The two corners of the edge opposite `opp`, in increasing order.
pub fn edge_of(opp: u8) -> (u8, u8) {
    match opp {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Dense index of corner `i` of the level-`level` cell with index `cell`.
pub fn cell_corner(level: usize, cell: usize, i: u8) -> usize {
    let (mut len, mut c) = (level, cell);
    while len > 0 && c % 3 == i as usize {
        c /= 3;
        len -= 1;
    }
    if len == 0 {
        return i as usize;
    }
    let a = (c % 3) as u8;
    level_offset(len) + 3 * (c / 3) + (3 - a - i) as usize
}

pub fn cell_corners(level: usize, cell: usize) -> [usize; 3] {
    [
        cell_corner(level, cell, 0),
        cell_corner(level, cell, 1),
        cell_corner(level, cell, 2),
    ]
}

/// Dense index of the midpoint opposite corner `opp` of a level-`level` cell.
pub fn cell_midpoint(level: usize, cell: usize, opp: u8) -> usize {
    level_offset(level + 1) + 3 * cell + opp as usize
}

/// The level-`m` cells containing the vertex `idx` (one for boundary
/// vertices, two otherwise), each with the corner the vertex occupies.
/// Requires `idx < vertex_count(m)`.
pub fn vertex_cells(idx: usize, m: usize) -> Vec<(usize, u8)> {
    debug_assert!(idx < vertex_count(m));
    let v = VertexId::from_index(idx);
    v.raw_addresses()
        .into_iter()
        .map(|(w, c)| {
            let pad = m - w.len();
            let cell = w.cell_index() * pow3(pad) + c as usize * (pow3(pad) - 1) / 2;
            (cell, c)
        })
        .collect()
}

/// Level-`m` graph neighbours of the vertex `idx`.
pub fn neighbors(idx: usize, m: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(4);
    for (cell, c) in vertex_cells(idx, m) {
        let corners = cell_corners(m, cell);
        for (i, &y) in corners.iter().enumerate() {
            if i != c as usize {
                out.push(y);
            }
        }
    }
    out
}

/// Maps the dense index of a vertex of a cell's own copy of `V_j` (local
/// coordinates, `local ≥ 3`) to the global dense index.
pub fn embed_local(cell_level: usize, cell: usize, local: usize) -> usize {
    debug_assert!(local >= 3);
    let nl = level_of_index(local);
    let r = local - level_offset(nl);
    let (p, opp) = (r / 3, r % 3);
    level_offset(cell_level + nl) + 3 * (cell * pow3(nl - 1) + p) + opp
}

/// Like [`embed_local`] but also accepts the cell's own corners
/// (`local < 3`).
pub fn embed_in_cell(cell_level: usize, cell: usize, local: usize) -> usize {
    if local < 3 {
        cell_corner(cell_level, cell, local as u8)
    } else {
        embed_local(cell_level, cell, local)
    }
}

/// Dense index of the bottom-edge vertex `j / 2^m`.
pub fn bottom_vertex_index(m: usize, j: usize) -> usize {
    let p = DyadicPoint { n: m, k: j }.reduced();
    match (p.n, p.k) {
        (0, 0) => 1,
        (0, _) => 2,
        (n, k) => {
            // Midpoint of the level-(n−1) bottom interval ((k−1)/2, (k+1)/2).
            let parent = PairIndex {
                n: n - 1,
                k: k.div_ceil(2),
            };
            cell_midpoint(n - 1, parent.cell_index(), 0)
        }
    }
}

/// `x_(n,k) = F_{w(n,k)} q₀`.
pub fn apex_index(p: PairIndex) -> usize {
    if p.n == 0 {
        return 0;
    }
    cell_corner(p.n, p.cell_index(), 0)
}

pub fn apex_vertex(p: PairIndex) -> VertexId {
    VertexId::from_index(apex_index(p))
}

/// Bottom-edge coordinate of a vertex, if it lies on `I`.
pub fn dyadic_of_vertex(v: &VertexId) -> Option<DyadicPoint> {
    let d = v.word().digits();
    match d.split_last() {
        None => match v.corner() {
            1 => Some(DyadicPoint::zero()),
            2 => Some(DyadicPoint::one()),
            _ => None,
        },
        Some((&1, parent)) if v.corner() == 2 && parent.iter().all(|&x| x != 0) => {
            // Midpoint of the bottom interval F_parent([0,1]).
            let n = parent.len();
            let j = parent
                .iter()
                .fold(0usize, |acc, &x| acc * 2 + (x as usize - 1));
            Some(DyadicPoint {
                n: n + 1,
                k: 2 * j + 1,
            })
        }
        _ => None,
    }
}

pub fn vertex_of_dyadic(p: DyadicPoint) -> VertexId {
    VertexId::from_index(bottom_vertex_index(p.n, p.k))
}

/// Subsets of `V_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexSet {
    /// `V_m`.
    All,
    /// `Ṽ_m = V_m \ V_{m−1}` (`V₀` for `m = 0`).
    New,
    /// `U_m = V_m ∩ I`, ordered by coordinate.
    Bottom,
    /// `NU_m = {x_(m,k)}`, ordered by `k`.
    Apexes,
}

pub fn enumerate_vertices(m: usize, set: VertexSet) -> Result<Vec<VertexId>> {
    check_level(m)?;
    let v = match set {
        VertexSet::All => (0..vertex_count(m)).map(VertexId::from_index).collect(),
        VertexSet::New => {
            let lo = if m == 0 { 0 } else { level_offset(m) };
            (lo..vertex_count(m)).map(VertexId::from_index).collect()
        }
        VertexSet::Bottom => (0..=1usize << m)
            .map(|j| VertexId::from_index(bottom_vertex_index(m, j)))
            .collect(),
        VertexSet::Apexes => (1..=1usize << m)
            .map(|k| apex_vertex(PairIndex { n: m, k }))
            .collect(),
    };
    Ok(v)
}

/// Applies a corner permutation (a symmetry of the gasket) to a vertex:
/// `F_w q_i ↦ F_{π(w)} q_{π(i)}`.
pub fn permute_vertex(idx: usize, perm: [u8; 3]) -> usize {
    let v = VertexId::from_index(idx);
    let word = Word(
        v.word()
            .digits()
            .iter()
            .map(|&d| perm[d as usize])
            .collect(),
    );
    VertexId::new(word, perm[v.corner() as usize])
        .expect("permuted address is valid")
        .index()
}
