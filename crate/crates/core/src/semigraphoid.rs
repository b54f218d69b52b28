//! Reasoning over sets of independence statements with symmetry and perfect
//! composition:
//!
//! ```text
//! X ⫫ (Y, Z) | W  ⇔  X ⫫ Y | (W, Z)  and  X ⫫ Z | W
//! ```
//!
//! The forward direction covers decomposition and weak union; the backward
//! direction is contraction. Closure is saturating but bounded by a
//! statement budget.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::statement::{CiStatement, VarSet};

pub const DEFAULT_BUDGET: usize = 10_000;

/// Universes are packed into 64-bit masks.
pub const MAX_UNIVERSE: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemigraphoidError {
    #[error("split of y must be two nonempty disjoint sets covering y")]
    InvalidPartition,
    #[error("statements do not unify under backward composition")]
    NotApplicable,
    #[error("variable {0} is not in the universe")]
    UnknownVariable(String),
    #[error("universe of {0} variables exceeds the supported maximum of 64")]
    UniverseTooLarge(usize),
}

/// Canonical statements, deduplicated up to symmetry.
pub type StatementSet = BTreeSet<CiStatement>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Rule {
    Member,
    Symmetry,
    CompositionForward,
    CompositionBackward,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivationTrace {
    pub conclusion: CiStatement,
    pub rule: Rule,
    pub premises: Vec<CiStatement>,
}

impl DerivationTrace {
    /// Re-applies the rule to the premises and checks the conclusion.
    pub fn replays(&self) -> bool {
        match (self.rule, self.premises.as_slice()) {
            (Rule::Member, [p]) => *p == self.conclusion,
            (Rule::Symmetry, [p]) => symmetry(p) == self.conclusion,
            (Rule::CompositionForward, [p]) => [p.clone(), p.swapped()].iter().any(|s| {
                proper_subsets(s.y()).into_iter().any(|y1| {
                    let y2: VarSet = s.y().difference(&y1).cloned().collect();
                    compose_forward(s, &y1, &y2)
                        .map(|(a, b)| a == self.conclusion || b == self.conclusion)
                        .unwrap_or(false)
                })
            }),
            (Rule::CompositionBackward, [p, q]) => orientations(p).iter().any(|s1| {
                orientations(q).iter().any(|s2| compose_backward(s1, s2).map(|c| c == self.conclusion).unwrap_or(false))
            }),
            _ => false,
        }
    }
}

fn orientations(s: &CiStatement) -> [CiStatement; 2] {
    [s.clone(), s.swapped()]
}

fn proper_subsets(set: &VarSet) -> Vec<VarSet> {
    let items: Vec<&String> = set.iter().collect();
    let n = items.len();
    if n < 2 {
        return Vec::new();
    }
    (1..(1u64 << n) - 1)
        .map(|m| items.iter().enumerate().filter(|(i, _)| m & (1 << i) != 0).map(|(_, v)| (*v).clone()).collect())
        .collect()
}

/// `X ⫫ Y | Z  ⇒  Y ⫫ X | Z`.
pub fn symmetry(s: &CiStatement) -> CiStatement {
    s.swapped()
}

/// `X ⫫ (Y1, Y2) | W  ⇒  (X ⫫ Y1 | W ∪ Y2,  X ⫫ Y2 | W)`.
pub fn compose_forward(s: &CiStatement, y1: &VarSet, y2: &VarSet) -> Result<(CiStatement, CiStatement), SemigraphoidError> {
    if y1.is_empty() || y2.is_empty() || !y1.is_disjoint(y2) {
        return Err(SemigraphoidError::InvalidPartition);
    }
    let union: VarSet = y1.union(y2).cloned().collect();
    if &union != s.y() {
        return Err(SemigraphoidError::InvalidPartition);
    }
    let z_plus: VarSet = s.z().union(y2).cloned().collect();
    let first = CiStatement::from_sets(s.x().clone(), y1.clone(), z_plus).expect("disjoint by construction");
    let second = CiStatement::from_sets(s.x().clone(), y2.clone(), s.z().clone()).expect("disjoint by construction");
    Ok((first, second))
}

/// `X ⫫ Y | W ∪ Z` and `X ⫫ Z | W`  ⇒  `X ⫫ (Y, Z) | W`.
///
/// Statements are matched in the orientation given; callers wanting
/// symmetric matches try the swapped forms.
pub fn compose_backward(s1: &CiStatement, s2: &CiStatement) -> Result<CiStatement, SemigraphoidError> {
    if s1.x() != s2.x() {
        return Err(SemigraphoidError::NotApplicable);
    }
    let z = s2.y();
    let w = s2.z();
    let expected: VarSet = w.union(z).cloned().collect();
    if !w.is_disjoint(z) || s1.z() != &expected {
        return Err(SemigraphoidError::NotApplicable);
    }
    let y: VarSet = s1.y().union(z).cloned().collect();
    CiStatement::from_sets(s1.x().clone(), y, w.clone()).map_err(|_| SemigraphoidError::NotApplicable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Packed {
    x: u64,
    y: u64,
    z: u64,
}

/// Lexicographic comparison of two index sets as sorted sequences, which
/// matches the ordering of the symbol sets they encode.
fn lex_less_eq(mut a: u64, mut b: u64) -> bool {
    loop {
        match (a, b) {
            (0, _) => return true,
            (_, 0) => return false,
            _ => {
                let (la, lb) = (a.trailing_zeros(), b.trailing_zeros());
                if la != lb {
                    return la < lb;
                }
                a &= a - 1;
                b &= b - 1;
            }
        }
    }
}

impl Packed {
    fn canonical(self) -> Packed {
        if lex_less_eq(self.x, self.y) {
            self
        } else {
            Packed { x: self.y, y: self.x, z: self.z }
        }
    }

    fn swapped(self) -> Packed {
        Packed { x: self.y, y: self.x, z: self.z }
    }
}

/// Iterates nonempty proper submasks of `m`.
fn proper_submasks(m: u64) -> impl Iterator<Item = u64> {
    let mut sub = m;
    core::iter::from_fn(move || {
        loop {
            if sub == 0 {
                return None;
            }
            sub = (sub - 1) & m;
            if sub == 0 {
                return None;
            }
            if sub != m {
                return Some(sub);
            }
        }
    })
}

/// Iterates nonempty submasks of `m` (including `m`).
fn nonempty_submasks(m: u64) -> impl Iterator<Item = u64> {
    core::iter::once(m).filter(|m| *m != 0).chain(proper_submasks(m))
}

#[derive(Debug, Clone)]
enum Origin {
    Base,
    Forward(usize),
    Backward(usize, usize),
}

/// Incremental closure over a fixed universe of variables.
#[derive(Debug, Clone)]
pub struct ClosureEngine {
    universe: Vec<String>,
    index: BTreeMap<String, u32>,
    statements: Vec<(Packed, Origin)>,
    lookup: BTreeMap<Packed, usize>,
    // (one side, conditioning set) -> other sides, over both orientations.
    by_side_and_z: BTreeMap<(u64, u64), Vec<u64>>,
    processed: usize,
    budget: usize,
    truncated: bool,
}

impl ClosureEngine {
    pub fn new(universe: &VarSet, budget: usize) -> Result<Self, SemigraphoidError> {
        if universe.len() > MAX_UNIVERSE {
            return Err(SemigraphoidError::UniverseTooLarge(universe.len()));
        }
        let universe: Vec<String> = universe.iter().cloned().collect();
        let index = universe.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        Ok(ClosureEngine {
            universe,
            index,
            statements: Vec::new(),
            lookup: BTreeMap::new(),
            by_side_and_z: BTreeMap::new(),
            processed: 0,
            budget,
            truncated: false,
        })
    }

    fn mask(&self, set: &VarSet) -> Result<u64, SemigraphoidError> {
        let mut m = 0u64;
        for v in set {
            let i = self.index.get(v).ok_or_else(|| SemigraphoidError::UnknownVariable(v.clone()))?;
            m |= 1 << i;
        }
        Ok(m)
    }

    fn pack(&self, s: &CiStatement) -> Result<Packed, SemigraphoidError> {
        Ok(Packed { x: self.mask(s.x())?, y: self.mask(s.y())?, z: self.mask(s.z())? })
    }

    fn unpack_set(&self, mut m: u64) -> VarSet {
        let mut out = VarSet::new();
        while m != 0 {
            out.insert(self.universe[m.trailing_zeros() as usize].clone());
            m &= m - 1;
        }
        out
    }

    fn unpack(&self, p: Packed) -> CiStatement {
        CiStatement::from_sets(self.unpack_set(p.x), self.unpack_set(p.y), self.unpack_set(p.z))
            .expect("packed statements are valid")
    }

    fn insert(&mut self, p: Packed, origin: Origin) -> bool {
        let p = p.canonical();
        if self.lookup.contains_key(&p) {
            return false;
        }
        if self.statements.len() >= self.budget {
            self.truncated = true;
            return false;
        }
        let idx = self.statements.len();
        self.statements.push((p, origin));
        self.lookup.insert(p, idx);
        self.by_side_and_z.entry((p.x, p.z)).or_default().push(p.y);
        if p.x != p.y {
            self.by_side_and_z.entry((p.y, p.z)).or_default().push(p.x);
        }
        true
    }

    pub fn add_base(&mut self, s: &CiStatement) -> Result<bool, SemigraphoidError> {
        let p = self.pack(s)?;
        Ok(self.insert(p, Origin::Base))
    }

    /// Applies every rule until nothing new appears or the budget is hit.
    pub fn saturate(&mut self) {
        while self.processed < self.statements.len() && !self.truncated {
            let i = self.processed;
            self.processed += 1;
            let s = self.statements[i].0;
            for o in [s, s.swapped()] {
                // Forward: every split of the y side.
                for y1 in proper_submasks(o.y) {
                    let y2 = o.y & !y1;
                    self.insert(Packed { x: o.x, y: y1, z: o.z | y2 }, Origin::Forward(i));
                    self.insert(Packed { x: o.x, y: y2, z: o.z }, Origin::Forward(i));
                }
                // Backward with `o` as the first premise X ⫫ Y | W ∪ Z.
                for zz in nonempty_submasks(o.z) {
                    let w = o.z & !zz;
                    let partner = Packed { x: o.x, y: zz, z: w }.canonical();
                    if let Some(&j) = self.lookup.get(&partner) {
                        self.insert(Packed { x: o.x, y: o.y | zz, z: w }, Origin::Backward(i, j));
                    }
                }
                // Backward with `o` as the second premise X ⫫ Z | W.
                let key = (o.x, o.z | o.y);
                if let Some(others) = self.by_side_and_z.get(&key).cloned() {
                    for y in others {
                        let first = Packed { x: o.x, y, z: o.z | o.y }.canonical();
                        if let Some(&j) = self.lookup.get(&first) {
                            self.insert(Packed { x: o.x, y: y | o.y, z: o.z }, Origin::Backward(j, i));
                        }
                    }
                }
            }
        }
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn contains(&self, s: &CiStatement) -> bool {
        self.pack(s).map(|p| self.lookup.contains_key(&p.canonical())).unwrap_or(false)
    }

    pub fn statements(&self) -> StatementSet {
        self.statements.iter().map(|(p, _)| self.unpack(*p)).collect()
    }

    fn trace_of(&self, i: usize) -> DerivationTrace {
        let (p, origin) = &self.statements[i];
        let conclusion = self.unpack(*p);
        match origin {
            Origin::Base => DerivationTrace { premises: vec![conclusion.clone()], conclusion, rule: Rule::Member },
            Origin::Forward(a) => DerivationTrace {
                conclusion,
                rule: Rule::CompositionForward,
                premises: vec![self.unpack(self.statements[*a].0)],
            },
            Origin::Backward(a, b) => DerivationTrace {
                conclusion,
                rule: Rule::CompositionBackward,
                premises: vec![self.unpack(self.statements[*a].0), self.unpack(self.statements[*b].0)],
            },
        }
    }

    /// One trace per statement, in derivation order.
    pub fn traces(&self) -> Vec<DerivationTrace> {
        (0..self.statements.len()).map(|i| self.trace_of(i)).collect()
    }

    /// The derivation of `s` from base members, premises before
    /// conclusions.
    pub fn derivation(&self, s: &CiStatement) -> Option<Vec<DerivationTrace>> {
        let p = self.pack(s).ok()?.canonical();
        let root = *self.lookup.get(&p)?;
        let mut needed = BTreeSet::new();
        let mut stack = vec![root];
        while let Some(i) = stack.pop() {
            if !needed.insert(i) {
                continue;
            }
            match self.statements[i].1 {
                Origin::Base => {}
                Origin::Forward(a) => stack.push(a),
                Origin::Backward(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        // Premises always have smaller indices than their conclusions.
        Some(needed.into_iter().map(|i| self.trace_of(i)).collect())
    }
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub statements: StatementSet,
    pub traces: Vec<DerivationTrace>,
    pub truncated: bool,
}

pub fn closure(base: &StatementSet, universe: &VarSet, max_statements: usize) -> Result<Closure, SemigraphoidError> {
    let mut engine = ClosureEngine::new(universe, max_statements.max(base.len()))?;
    for s in base {
        engine.add_base(s)?;
    }
    engine.saturate();
    Ok(Closure { statements: engine.statements(), traces: engine.traces(), truncated: engine.truncated() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Implication {
    Implied(Vec<DerivationTrace>),
    NotDerivable,
    BudgetExhausted,
}

impl Implication {
    pub fn is_implied(&self) -> bool {
        matches!(self, Implication::Implied(_))
    }
}

pub fn is_implied(
    candidate: &CiStatement,
    base: &StatementSet,
    universe: &VarSet,
    budget: usize,
) -> Result<Implication, SemigraphoidError> {
    if let Some(member) = base.get(candidate) {
        let rule = if member.same_orientation(candidate) { Rule::Member } else { Rule::Symmetry };
        return Ok(Implication::Implied(vec![DerivationTrace {
            conclusion: candidate.clone(),
            rule,
            premises: vec![member.clone()],
        }]));
    }
    let mut engine = ClosureEngine::new(universe, budget.max(base.len()))?;
    engine.pack(candidate)?;
    for s in base {
        engine.add_base(s)?;
    }
    engine.saturate();
    Ok(match engine.derivation(candidate) {
        Some(trace) => Implication::Implied(trace),
        None if engine.truncated() => Implication::BudgetExhausted,
        None => Implication::NotDerivable,
    })
}
