//! Graph functions on `V_m`, the harmonic extension rule, harmonic and tent
//! functions, and bottom-edge traces of cell-wise harmonic functions.

use std::any::Any;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};

use crate::address::{
    self, cell_corners, check_level, level_offset, pow3, vertex_count, PairIndex, VertexId,
};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::scalar::{Rational, Scalar, ScalarMode};
use crate::traceops::LineFunction;

/// Cells handled per parallel work item during extension.
const CELLS_PER_TASK: usize = 243;

/// Values on the level-`m` vertex set, stored by dense vertex index.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFunction<S> {
    level: usize,
    values: Vec<S>,
}

impl<S: Scalar> GraphFunction<S> {
    pub fn new(level: usize, values: Vec<S>) -> Result<Self> {
        check_level(level)?;
        if values.len() != vertex_count(level) {
            return Err(Error::Inconsistent(format!(
                "{} values for the {} vertices of V_{level}",
                values.len(),
                vertex_count(level)
            )));
        }
        Ok(GraphFunction { level, values })
    }

    pub fn zeros(level: usize) -> Result<Self> {
        check_level(level)?;
        Ok(GraphFunction {
            level,
            values: vec![S::zero(); vertex_count(level)],
        })
    }

    pub fn from_fn(level: usize, f: impl Fn(usize) -> S) -> Result<Self> {
        check_level(level)?;
        Ok(GraphFunction {
            level,
            values: (0..vertex_count(level)).map(f).collect(),
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn mode(&self) -> ScalarMode {
        S::MODE
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn at(&self, idx: usize) -> &S {
        &self.values[idx]
    }

    pub fn get(&self, v: &VertexId) -> Option<&S> {
        (v.level() <= self.level).then(|| &self.values[v.index()])
    }

    pub fn set(&mut self, v: &VertexId, value: S) -> Result<()> {
        if v.level() > self.level {
            return Err(Error::IndexOutOfRange(format!(
                "{v} is not in V_{}",
                self.level
            )));
        }
        self.values[v.index()] = value;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, &S)> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, s)| (VertexId::from_index(i), s))
    }

    /// Restriction to `V_level`.
    pub fn truncate(&self, level: usize) -> Result<Self> {
        if level > self.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: level,
            });
        }
        Ok(GraphFunction {
            level,
            values: self.values[..vertex_count(level)].to_vec(),
        })
    }

    /// Corner values of a cell at level `cell_level ≤ self.level()`.
    pub fn cell_values(&self, cell_level: usize, cell: usize) -> [S; 3] {
        cell_corners(cell_level, cell).map(|i| self.values[i].clone())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Result<Self> {
        if self.level != other.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: other.level,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(a, b))
            .collect();
        Ok(GraphFunction {
            level: self.level,
            values,
        })
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn minus(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn scaled(&self, c: &S) -> Self {
        GraphFunction {
            level: self.level,
            values: self.values.iter().map(|a| a.clone() * c.clone()).collect(),
        }
    }

    /// `u ∘ π` for a corner permutation `π`.
    pub fn permuted(&self, perm: [u8; 3]) -> Self {
        let mut values = vec![S::zero(); self.values.len()];
        for (i, v) in self.values.iter().enumerate() {
            values[address::permute_vertex(i, perm)] = v.clone();
        }
        GraphFunction {
            level: self.level,
            values,
        }
    }

    /// Adds `coeff · v ∘ F_w^{-1}` on the level-`cell_level` cell `F_w SG`;
    /// requires `self.level() = cell_level + v.level()`.
    pub fn add_in_cell(
        &mut self,
        cell_level: usize,
        cell: usize,
        v: &Self,
        coeff: &S,
    ) -> Result<()> {
        if self.level != cell_level + v.level {
            return Err(Error::LevelMismatch {
                expected: self.level,
                found: cell_level + v.level,
            });
        }
        for (local, x) in v.values.iter().enumerate() {
            if !x.is_zero() {
                let g = address::embed_in_cell(cell_level, cell, local);
                self.values[g] = self.values[g].clone() + coeff.clone() * x.clone();
            }
        }
        Ok(())
    }

    /// `v ∘ F_w^{-1}` on `F_w SG`, zero elsewhere.
    pub fn placed_in_cell(v: &Self, cell_level: usize, cell: usize) -> Result<Self> {
        let mut out = GraphFunction::zeros(cell_level + v.level)?;
        out.add_in_cell(cell_level, cell, v, &S::one())?;
        Ok(out)
    }

    pub fn convert<T: Scalar>(&self) -> GraphFunction<T> {
        GraphFunction {
            level: self.level,
            values: self.values.iter().map(crate::scalar::convert).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let d = self.minus(other)?;
        Ok(d.values
            .iter()
            .map(|v| v.abs().to_f64_lossy())
            .fold(0.0, f64::max))
    }
}

/// A harmonic function given by `(h(q₀), h(q₁), h(q₂))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFunction<S> {
    pub boundary: [S; 3],
}

impl<S: Scalar> HarmonicFunction<S> {
    pub fn new(a: S, b: S, c: S) -> Self {
        HarmonicFunction {
            boundary: [a, b, c],
        }
    }

    pub fn eval(&self, v: &VertexId) -> S {
        harmonic_eval(self, v)
    }

    /// Values on `V_m`.
    pub fn on_level(&self, m: usize) -> Result<GraphFunction<S>> {
        let base = GraphFunction::new(0, self.boundary.to_vec())?;
        extend_to(&base, m)
    }

    /// Samples on the level-`m` grid of the bottom edge.
    pub fn trace(&self, m: usize) -> Result<LineFunction<S>> {
        harmonic_trace(self, m)
    }
}

/// The tent function `φ_x`, `x ∈ Ṽ_{level}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TentFunction {
    apex: VertexId,
}

impl TentFunction {
    pub fn new(apex: VertexId) -> Self {
        TentFunction { apex }
    }

    pub fn apex(&self) -> &VertexId {
        &self.apex
    }

    pub fn level(&self) -> usize {
        self.apex.level()
    }

    pub fn eval<S: Scalar>(&self, v: &VertexId) -> S {
        tent_eval(self, v)
    }

    /// `φ_x` on `V_m`, `m ≥ level`.
    pub fn on_level<S: Scalar>(&self, m: usize) -> Result<GraphFunction<S>> {
        if m < self.level() {
            return Err(Error::LevelMismatch {
                expected: self.level(),
                found: m,
            });
        }
        let mut base = GraphFunction::<S>::zeros(self.level())?;
        base.values[self.apex.index()] = S::one();
        extend_to(&base, m)
    }
}

/// Midpoint value on the edge `{i, j}` of a cell with corner values `c`,
/// where `k` is the third corner: `(2c_i + 2c_j + c_k) / 5`.
pub fn midpoint<S: Scalar>(c: &[S; 3], opposite: usize) -> S {
    let two = S::int(2);
    let (i, j) = match opposite {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    (two.clone() * c[i].clone() + two * c[j].clone() + c[opposite].clone()) / S::int(5)
}

/// Corner values of child cell `j` of a cell with corner values `c`.
pub fn child_values<S: Scalar>(c: &[S; 3], j: usize) -> [S; 3] {
    let mut out = [S::zero(), S::zero(), S::zero()];
    for (l, slot) in out.iter_mut().enumerate() {
        *slot = if l == j {
            c[j].clone()
        } else {
            midpoint(c, 3 - j - l)
        };
    }
    out
}

/// One step of the harmonic extension rule.
pub fn extend_once<S: Scalar>(u: &GraphFunction<S>) -> Result<GraphFunction<S>> {
    extend_to_with(u, u.level + 1, Execution::default())
}

pub fn extend_to<S: Scalar>(u: &GraphFunction<S>, m: usize) -> Result<GraphFunction<S>> {
    extend_to_with(u, m, Execution::default())
}

/// Cell-wise harmonic extension of `u` to `V_m`.
pub fn extend_to_with<S: Scalar>(
    u: &GraphFunction<S>,
    m: usize,
    exec: Execution,
) -> Result<GraphFunction<S>> {
    check_level(m)?;
    if m < u.level {
        return Err(Error::LevelMismatch {
            expected: u.level,
            found: m,
        });
    }
    if m == u.level {
        return Ok(u.clone());
    }
    if let Some(q) = (u as &dyn Any).downcast_ref::<GraphFunction<Rational>>() {
        let out: Box<dyn Any> = Box::new(extend_exact(q, m, exec));
        return Ok(*out
            .downcast::<GraphFunction<S>>()
            .expect("scalar type is Rational"));
    }
    let mut values = u.values.clone();
    for level in u.level..m {
        grow_level(&mut values, level, exec, |c: &[S; 3], opp| midpoint(c, opp));
    }
    Ok(GraphFunction { level: m, values })
}

/// Appends the `Ṽ_{level+1}` block, computing each midpoint from its cell's
/// corner values.
fn grow_level<T, F>(values: &mut Vec<T>, level: usize, exec: Execution, mid: F)
where
    T: Clone + Send + Sync + Zero,
    F: Fn(&[T; 3], usize) -> T + Sync + Send,
{
    debug_assert_eq!(values.len(), level_offset(level + 1));
    let cells = pow3(level);
    let mut block = vec![T::zero(); 3 * cells];
    {
        let old: &[T] = values;
        exec::for_each_chunk_mut(exec, &mut block, 3 * CELLS_PER_TASK, |t, chunk| {
            for (local, out) in chunk.chunks_mut(3).enumerate() {
                let cell = t * CELLS_PER_TASK + local;
                let c = cell_corners(level, cell).map(|i| old[i].clone());
                for (opp, slot) in out.iter_mut().enumerate() {
                    *slot = mid(&c, opp);
                }
            }
        });
    }
    values.extend(block);
}

/// Extension over a common denominator, avoiding a gcd per operation.
fn extend_exact(u: &GraphFunction<Rational>, m: usize, exec: Execution) -> GraphFunction<Rational> {
    let mut den = BigInt::one();
    for v in &u.values {
        den = den.lcm(v.denom());
    }
    let mut nums: Vec<BigInt> = u
        .values
        .iter()
        .map(|v| v.numer() * (&den / v.denom()))
        .collect();
    let five = BigInt::from(5);
    for level in u.level..m {
        grow_level(&mut nums, level, exec, |c: &[BigInt; 3], opp| {
            let (i, j) = match opp {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            ((&c[i] + &c[j]) << 1) + &c[opp]
        });
        let split = level_offset(level + 1);
        exec::for_each_chunk_mut(exec, &mut nums[..split], 4096, |_, chunk| {
            for x in chunk {
                *x *= &five;
            }
        });
        den *= &five;
    }
    let values = exec::map_slice(exec, &nums, |n| Rational::new(n.clone(), den.clone()));
    GraphFunction { level: m, values }
}

/// Value of a harmonic function at a vertex, by walking its address.
pub fn harmonic_eval<S: Scalar>(h: &HarmonicFunction<S>, v: &VertexId) -> S {
    eval_in_cell(h.boundary.clone(), v.word().digits(), v.corner() as usize)
}

fn eval_in_cell<S: Scalar>(mut c: [S; 3], digits: &[u8], corner: usize) -> S {
    for &d in digits {
        c = child_values(&c, d as usize);
    }
    c[corner].clone()
}

/// Value of the tent function `φ_x` at `v`.
pub fn tent_eval<S: Scalar>(t: &TentFunction, v: &VertexId) -> S {
    let m = t.level();
    if v.level() <= m {
        return if *v == t.apex { S::one() } else { S::zero() };
    }
    let digits = v.word().digits();
    let cell = address::Word::new(digits[..m].to_vec())
        .expect("valid digits")
        .cell_index();
    let apex = t.apex.index();
    let c = cell_corners(m, cell).map(|i| if i == apex { S::one() } else { S::zero() });
    if c.iter().all(|x| x.is_zero()) {
        return S::zero();
    }
    eval_in_cell(c, &digits[m..], v.corner() as usize)
}

/// Predicted value at `(2k−1)/2^n` of a function harmonic on the level-`(n−2)`
/// cell containing it, from its samples on the level-`(n−1)` grid.
pub fn midpoint_prediction<S: Scalar>(f: &LineFunction<S>, n: usize, k: usize) -> Result<S> {
    if n < 2 || k < 1 || k > 1usize << (n - 1) {
        return Err(Error::IndexOutOfRange(format!(
            "prediction index ({n},{k})"
        )));
    }
    let g = |j: usize| f.sample(n - 1, j);
    let (near, mid, far) = if k % 2 == 1 {
        (g(k - 1)?, g(k)?, g(k + 1)?)
    } else {
        (g(k)?, g(k - 1)?, g(k - 2)?)
    };
    Ok(S::ratio(4, 5) * mid + S::ratio(8, 25) * near - S::ratio(3, 25) * far)
}

/// Bottom-edge samples at level `m` of a harmonic function.
pub fn harmonic_trace<S: Scalar>(h: &HarmonicFunction<S>, m: usize) -> Result<LineFunction<S>> {
    let base = GraphFunction::new(0, h.boundary.to_vec())?;
    bottom_trace(&base, m)
}

/// Bottom-edge samples at level `m ≥ u.level()` of the cell-wise harmonic
/// extension of `u`, computed on bottom cells only.
pub fn bottom_trace<S: Scalar>(u: &GraphFunction<S>, m: usize) -> Result<LineFunction<S>> {
    check_level(m)?;
    let l = u.level;
    if m < l {
        return crate::traceops::restrict(u)?.downsample(m);
    }
    let mut cells: Vec<[S; 3]> = (1..=1usize << l)
        .map(|k| {
            let p = PairIndex::new(l, k).expect("valid pair");
            u.cell_values(l, p.cell_index())
        })
        .collect();
    for _ in l..m {
        cells = cells
            .iter()
            .flat_map(|c| [child_values(c, 1), child_values(c, 2)])
            .collect();
    }
    let mut samples: Vec<S> = cells.iter().map(|c| c[1].clone()).collect();
    samples.push(cells.last().expect("at least one cell")[2].clone());
    LineFunction::new(m, samples)
}
