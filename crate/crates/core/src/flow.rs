//! Hierarchical flow graphs: a conserved mass moving through levels of
//! actors (vendors, sponsors, sites, ...), decomposed into root-to-leaf
//! path flows.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlowError {
    #[error("a flow graph needs at least two levels")]
    TooFewLevels,
    #[error("level {0} has no actors")]
    EmptyLevel(usize),
    #[error("actor label must be nonempty")]
    EmptyLabel,
    #[error("duplicate actor {label} on level {level}")]
    DuplicateActor { level: usize, label: String },
    #[error("unknown actor {0}")]
    UnknownActor(String),
    #[error("actor name {0} matches several actors; use z(l,j)")]
    AmbiguousActor(String),
    #[error("edge {0} does not join consecutive levels")]
    NonAdjacentEdge(String),
    #[error("actor {0} has no incoming or no outgoing edge")]
    Stranded(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid mass {0}")]
    BadMass(String),
    #[error("{actor} is on level {actual}, expected level {expected}")]
    WrongLevel { actor: String, expected: usize, actual: usize },
    #[error("action would leave {0:?} without supply")]
    DisconnectedResult(Vec<String>),
    #[error("malformed action: {0}")]
    Malformed(String),
}

/// Nonnegative exact quantity. Parses and prints decimals exactly; other
/// rationals print as `n/d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Mass(pub BigRational);

impl Mass {
    pub fn zero() -> Self {
        Mass(BigRational::zero())
    }

    pub fn from_integer(n: i64) -> Self {
        Mass(BigRational::from_integer(BigInt::from(n)))
    }

    /// Exact value of the shortest decimal that round-trips `x`.
    pub fn from_f64(x: f64) -> Result<Self, FlowError> {
        if !x.is_finite() {
            return Err(FlowError::BadMass(format!("{x}")));
        }
        format!("{x}").parse()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn is_negative(&self) -> bool {
        self.0.is_negative()
    }
}

impl core::ops::Add for Mass {
    type Output = Mass;
    fn add(self, rhs: Mass) -> Mass {
        Mass(self.0 + rhs.0)
    }
}

impl core::ops::AddAssign<&Mass> for Mass {
    fn add_assign(&mut self, rhs: &Mass) {
        self.0 += &rhs.0;
    }
}

impl core::ops::Sub for Mass {
    type Output = Mass;
    fn sub(self, rhs: Mass) -> Mass {
        Mass(self.0 - rhs.0)
    }
}

impl core::iter::Sum for Mass {
    fn sum<I: Iterator<Item = Mass>>(iter: I) -> Mass {
        iter.fold(Mass::zero(), |a, b| a + b)
    }
}

impl FromStr for Mass {
    type Err = FlowError;

    fn from_str(s: &str) -> Result<Self, FlowError> {
        let bad = || FlowError::BadMass(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            return Ok(Mass(BigRational::new(n, d)));
        }
        let (mantissa, exp) = match s.find(['e', 'E']) {
            Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
        if int.is_empty() && frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int}{frac}");
        let n: BigInt = match digits.as_str() {
            "" | "-" | "+" => return Err(bad()),
            d => d.parse().map_err(|_| bad())?,
        };
        let scale = exp - frac.len() as i32;
        let ten = BigInt::from(10);
        let value = if scale >= 0 {
            BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
        } else {
            BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
        };
        Ok(Mass(value))
    }
}

impl fmt::Display for Mass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.0;
        let mut d = r.denom().clone();
        let (two, five) = (BigInt::from(2), BigInt::from(5));
        let (mut twos, mut fives) = (0usize, 0usize);
        while (&d % &two).is_zero() {
            d /= &two;
            twos += 1;
        }
        while (&d % &five).is_zero() {
            d /= &five;
            fives += 1;
        }
        if !d.is_one() {
            return write!(f, "{}/{}", r.numer(), r.denom());
        }
        let places = twos.max(fives);
        if places == 0 {
            return write!(f, "{}", r.numer());
        }
        let scaled = (r * BigRational::from_integer(num_traits::pow(BigInt::from(10), places))).to_integer();
        let sign = if scaled.is_negative() { "-" } else { "" };
        let digits = scaled.abs().to_string();
        let digits = format!("{digits:0>width$}", width = places + 1);
        let (int, frac) = digits.split_at(digits.len() - places);
        write!(f, "{sign}{int}.{frac}")
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Mass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Mass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Mass;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a decimal string, n/d string or number")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Mass, E> {
                v.parse().map_err(E::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> Result<Mass, E> {
                Mass::from_f64(v).map_err(E::custom)
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Mass, E> {
                Ok(Mass(BigRational::from_integer(BigInt::from(v))))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Mass, E> {
                Ok(Mass::from_integer(v))
            }
        }
        d.deserialize_any(V)
    }
}

/// Actor `z(level + 1, index + 1)`; stored zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Actor {
    pub level: usize,
    pub index: usize,
}

impl fmt::Display for Actor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z({},{})", self.level + 1, self.index + 1)
    }
}

fn parse_z(s: &str) -> Option<Actor> {
    let inner = s.trim().strip_prefix("z(")?.strip_suffix(')')?;
    let (l, j) = inner.split_once(',')?;
    let (l, j): (usize, usize) = (l.trim().parse().ok()?, j.trim().parse().ok()?);
    (l >= 1 && j >= 1).then(|| Actor { level: l - 1, index: j - 1 })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowGraph {
    levels: Vec<Vec<String>>,
    edges: BTreeSet<(Actor, Actor)>,
}

impl FlowGraph {
    pub fn new(levels: Vec<Vec<String>>, edge_list: impl IntoIterator<Item = (Actor, Actor)>) -> Result<Self, FlowError> {
        if levels.len() < 2 {
            return Err(FlowError::TooFewLevels);
        }
        for (l, actors) in levels.iter().enumerate() {
            if actors.is_empty() {
                return Err(FlowError::EmptyLevel(l + 1));
            }
            for (j, a) in actors.iter().enumerate() {
                if a.trim().is_empty() {
                    return Err(FlowError::EmptyLabel);
                }
                if actors[..j].contains(a) {
                    return Err(FlowError::DuplicateActor { level: l + 1, label: a.clone() });
                }
            }
        }
        let g = FlowGraph { levels, edges: BTreeSet::new() };
        let mut edges = BTreeSet::new();
        for (a, b) in edge_list {
            for x in [a, b] {
                if !g.contains(x) {
                    return Err(FlowError::UnknownActor(x.to_string()));
                }
            }
            if b.level != a.level + 1 {
                return Err(FlowError::NonAdjacentEdge(format!("{a} -> {b}")));
            }
            edges.insert((a, b));
        }
        let g = FlowGraph { edges, ..g };
        for a in g.actors() {
            let last = a.level + 1 == g.levels.len();
            if (!last && g.children(a).next().is_none()) || (a.level > 0 && g.parents(a).next().is_none()) {
                return Err(FlowError::Stranded(g.describe(a)));
            }
        }
        Ok(g)
    }

    /// Builds from actor labels; edge endpoints are resolved with
    /// [`FlowGraph::resolve`] rules.
    pub fn from_labels(levels: Vec<Vec<String>>, edges: &[(&str, &str)]) -> Result<Self, FlowError> {
        let probe = FlowGraph { levels: levels.clone(), edges: BTreeSet::new() };
        let resolved = edges
            .iter()
            .map(|(a, b)| Ok((probe.resolve(a)?, probe.resolve(b)?)))
            .collect::<Result<Vec<_>, FlowError>>()?;
        FlowGraph::new(levels, resolved)
    }

    pub fn levels(&self) -> &[Vec<String>] {
        &self.levels
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn edges(&self) -> &BTreeSet<(Actor, Actor)> {
        &self.edges
    }

    pub fn label(&self, a: Actor) -> &str {
        &self.levels[a.level][a.index]
    }

    fn describe(&self, a: Actor) -> String {
        format!("{a} {}", self.label(a))
    }

    pub fn contains(&self, a: Actor) -> bool {
        a.level < self.levels.len() && a.index < self.levels[a.level].len()
    }

    pub fn actors(&self) -> impl Iterator<Item = Actor> + '_ {
        self.levels
            .iter()
            .enumerate()
            .flat_map(|(level, xs)| (0..xs.len()).map(move |index| Actor { level, index }))
    }

    pub fn children(&self, a: Actor) -> impl Iterator<Item = Actor> + '_ {
        self.edges.range((a, Actor { level: 0, index: 0 })..).take_while(move |(x, _)| *x == a).map(|(_, b)| *b)
    }

    pub fn parents(&self, b: Actor) -> impl Iterator<Item = Actor> + '_ {
        self.edges.iter().filter(move |(_, y)| *y == b).map(|(a, _)| *a)
    }

    /// Accepts `z(l,j)` or a label that is unique across levels.
    pub fn resolve(&self, name: &str) -> Result<Actor, FlowError> {
        if let Some(a) = parse_z(name) {
            return if self.contains(a) { Ok(a) } else { Err(FlowError::UnknownActor(name.into())) };
        }
        let mut hits = self.actors().filter(|a| self.label(*a) == name.trim());
        match (hits.next(), hits.next()) {
            (Some(a), None) => Ok(a),
            (Some(_), Some(_)) => Err(FlowError::AmbiguousActor(name.into())),
            _ => Err(FlowError::UnknownActor(name.into())),
        }
    }

    /// Every first-to-last-level path, as one actor index per level, in
    /// lexicographic index order.
    pub fn enumerate_paths(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for index in 0..self.levels[0].len() {
            let mut path = vec![index];
            self.extend(Actor { level: 0, index }, &mut path, &mut out);
        }
        out
    }

    fn extend(&self, a: Actor, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if a.level + 1 == self.levels.len() {
            out.push(path.clone());
            return;
        }
        for c in self.children(a) {
            path.push(c.index);
            self.extend(c, path, out);
            path.pop();
        }
    }

    pub fn is_path(&self, path: &[usize]) -> bool {
        path.len() == self.levels.len()
            && path.iter().enumerate().all(|(l, j)| *j < self.levels[l].len())
            && path.windows(2).enumerate().all(|(l, w)| {
                self.edges.contains(&(Actor { level: l, index: w[0] }, Actor { level: l + 1, index: w[1] }))
            })
    }

    pub fn path_labels(&self, path: &[usize]) -> Vec<String> {
        path.iter().enumerate().map(|(l, j)| self.levels[l][*j].clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathFlow {
    /// Actor index per level, zero-based.
    pub actors: Vec<usize>,
    pub mass: Mass,
}

impl PathFlow {
    pub fn new(actors: Vec<usize>, mass: Mass) -> Self {
        PathFlow { actors, mass }
    }

    /// `{z(1,1), z(2,1), z(3,2)}`
    pub fn display(&self) -> String {
        let parts: Vec<String> =
            self.actors.iter().enumerate().map(|(level, index)| Actor { level, index: *index }.to_string()).collect();
        format!("{{{}}}", parts.join(", "))
    }
}

/// The same mass on every path of `g`.
pub fn uniform_flows(g: &FlowGraph, mass: Mass) -> Vec<PathFlow> {
    g.enumerate_paths().into_iter().map(|p| PathFlow::new(p, mass.clone())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeStateVector {
    pub t: Option<usize>,
    /// `levels[l][j]` is the mass held by actor `z(l+1, j+1)`.
    pub levels: Vec<Vec<Mass>>,
}

/// Mass owned by each actor: the sum over paths through it.
pub fn node_states(g: &FlowGraph, flows: &[PathFlow], t: Option<usize>) -> Result<NodeStateVector, FlowError> {
    let mut levels: Vec<Vec<Mass>> = g.levels.iter().map(|xs| vec![Mass::zero(); xs.len()]).collect();
    for f in flows {
        if !g.is_path(&f.actors) {
            return Err(FlowError::InvalidPath(f.display()));
        }
        if f.mass.is_negative() {
            return Err(FlowError::BadMass(f.mass.to_string()));
        }
        for (l, j) in f.actors.iter().enumerate() {
            levels[l][*j] += &f.mass;
        }
    }
    Ok(NodeStateVector { t, levels })
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConservationReport {
    pub conserved: bool,
    pub totals: Vec<Mass>,
}

/// Level totals agree within 1e-9.
pub fn check_conservation(states: &NodeStateVector) -> ConservationReport {
    let totals: Vec<Mass> = states.levels.iter().map(|l| l.iter().cloned().sum()).collect();
    let tol = BigRational::new(BigInt::one(), BigInt::from(1_000_000_000u64));
    let conserved = match (totals.iter().min(), totals.iter().max()) {
        (Some(lo), Some(hi)) => (hi.0.clone() - lo.0.clone()) <= tol,
        _ => true,
    };
    ConservationReport { conserved, totals }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "action", rename_all = "snake_case"))]
pub enum Action {
    /// Every listed site is supplied through `sponsor`, created if new with
    /// supply from `vendors`.
    PartnerSponsor {
        sites: Vec<String>,
        sponsor: String,
        #[cfg_attr(feature = "serde", serde(default))]
        vendors: Vec<String>,
    },
    /// Replace the sponsors by one collective. With `vendor`, all of its
    /// supply comes from that vendor; otherwise each path keeps its supplier.
    MergeSponsors {
        sponsors: Vec<String>,
        label: String,
        #[cfg_attr(feature = "serde", serde(default))]
        vendor: Option<String>,
    },
    MergeSites { sites: Vec<String>, label: String },
    ChangeVendor { sponsor: String, old_vendor: String, new_vendor: String },
    TransferSites { from: String, to: String, sites: Vec<String> },
    /// Drop an actor; its mass moves to the other actors on its level that
    /// can carry it.
    RemoveActor { actor: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelledEdge {
    /// One-based level of `from`.
    pub level: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelledActor {
    pub level: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Merge {
    pub level: usize,
    pub from: Vec<String>,
    pub into: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PathChange {
    pub path: Vec<String>,
    pub before: Mass,
    pub after: Mass,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowDiff {
    pub edges_added: Vec<LabelledEdge>,
    pub edges_removed: Vec<LabelledEdge>,
    pub actors_added: Vec<LabelledActor>,
    pub actors_removed: Vec<LabelledActor>,
    pub actors_merged: Vec<Merge>,
    pub path_changes: Vec<PathChange>,
}

type Prefix = Vec<String>;

/// Label-keyed working copy used while rewriting.
#[derive(Clone)]
struct Work {
    levels: Vec<Vec<String>>,
    edges: BTreeSet<(usize, String, String)>,
    flows: BTreeMap<Vec<String>, BigRational>,
}

impl Work {
    fn from_graph(g: &FlowGraph, flows: &[PathFlow]) -> Result<Self, FlowError> {
        let mut map: BTreeMap<Vec<String>, BigRational> = BTreeMap::new();
        for f in flows {
            if !g.is_path(&f.actors) {
                return Err(FlowError::InvalidPath(f.display()));
            }
            if f.mass.is_negative() {
                return Err(FlowError::BadMass(f.mass.to_string()));
            }
            *map.entry(g.path_labels(&f.actors)).or_insert_with(BigRational::zero) += &f.mass.0;
        }
        Ok(Work {
            levels: g.levels.clone(),
            edges: g.edges.iter().map(|(a, b)| (a.level, g.label(*a).into(), g.label(*b).into())).collect(),
            flows: map,
        })
    }

    fn last(&self) -> usize {
        self.levels.len() - 1
    }

    fn has(&self, level: usize, label: &str) -> bool {
        self.levels[level].iter().any(|x| x == label)
    }

    fn edge(&mut self, level: usize, from: &str, to: &str) {
        self.edges.insert((level, from.into(), to.into()));
    }

    fn unedge(&mut self, level: usize, from: &str, to: &str) {
        self.edges.remove(&(level, from.into(), to.into()));
    }

    /// All level-0 prefixes ending just above (`level`, `label`) following
    /// edges.
    fn structural_prefixes(&self, level: usize, label: &str) -> Vec<Prefix> {
        if level == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for (_, from, _) in self.edges.iter().filter(|(l, _, to)| *l == level - 1 && to == label) {
            for mut p in self.structural_prefixes(level - 1, from) {
                p.push(from.clone());
                out.push(p);
            }
        }
        out
    }

    /// How mass arriving at (`level`, `label`) is sourced: existing shares
    /// if it carries mass, else an equal split over its supply chains.
    fn split(&self, level: usize, label: &str) -> Result<Vec<(Prefix, BigRational)>, FlowError> {
        let mut by_prefix: BTreeMap<Prefix, BigRational> = BTreeMap::new();
        for (p, m) in &self.flows {
            if p[level] == label && !m.is_zero() {
                *by_prefix.entry(p[..level].to_vec()).or_insert_with(BigRational::zero) += m;
            }
        }
        let total: BigRational = by_prefix.values().cloned().sum();
        if !total.is_zero() {
            return Ok(by_prefix.into_iter().map(|(p, m)| (p, m / &total)).collect());
        }
        let prefixes = self.structural_prefixes(level, label);
        if prefixes.is_empty() {
            return Err(FlowError::DisconnectedResult(vec![label.into()]));
        }
        let share = BigRational::new(BigInt::one(), BigInt::from(prefixes.len()));
        Ok(prefixes.into_iter().map(|p| (p, share.clone())).collect())
    }

    fn add_flow(flows: &mut BTreeMap<Vec<String>, BigRational>, path: Vec<String>, m: BigRational) {
        *flows.entry(path).or_insert_with(BigRational::zero) += m;
    }

    /// Moves every flow matching `select` so that it passes `actor` at
    /// `level`, sourcing the upstream part from `actor`'s split.
    fn reroute(&mut self, level: usize, actor: &str, select: impl Fn(&[String]) -> bool) -> Result<(), FlowError> {
        let split = self.split(level, actor)?;
        let old = core::mem::take(&mut self.flows);
        for (path, m) in old {
            if !select(&path) || path[level] == actor {
                Self::add_flow(&mut self.flows, path, m);
                continue;
            }
            for (prefix, share) in &split {
                let mut p = prefix.clone();
                p.push(actor.into());
                p.extend_from_slice(&path[level + 1..]);
                Self::add_flow(&mut self.flows, p, &m * share);
            }
        }
        Ok(())
    }

    fn used_edges(&self) -> BTreeSet<(usize, String, String)> {
        let mut used = BTreeSet::new();
        for (p, m) in &self.flows {
            if m.is_zero() {
                continue;
            }
            for l in 0..p.len() - 1 {
                used.insert((l, p[l].clone(), p[l + 1].clone()));
            }
        }
        used
    }

    /// Removes actors left without outgoing edges, then rejects the result
    /// if any actor below the first level lost all supply.
    fn settle(&mut self) -> Result<(), FlowError> {
        self.flows.retain(|_, m| !m.is_zero());
        loop {
            let idle: Vec<(usize, String)> = (0..self.last())
                .flat_map(|l| self.levels[l].iter().map(move |a| (l, a.clone())))
                .filter(|(l, a)| !self.edges.iter().any(|(el, from, _)| el == l && from == a))
                .collect();
            if idle.is_empty() {
                break;
            }
            for (l, a) in idle {
                self.levels[l].retain(|x| *x != a);
                self.edges.retain(|(el, _, to)| !(*el + 1 == l && *to == a));
            }
        }
        let stranded: Vec<String> = (1..self.levels.len())
            .flat_map(|l| self.levels[l].iter().map(move |a| (l, a)))
            .filter(|(l, a)| !self.edges.iter().any(|(el, _, to)| *el + 1 == *l && to == *a))
            .map(|(_, a)| a.clone())
            .collect();
        if !stranded.is_empty() {
            return Err(FlowError::DisconnectedResult(stranded));
        }
        if let Some(l) = self.levels.iter().position(|x| x.is_empty()) {
            return Err(FlowError::EmptyLevel(l + 1));
        }
        for (l, from, to) in self.used_edges() {
            if !self.edges.contains(&(l, from.clone(), to.clone())) {
                return Err(FlowError::Malformed(format!("mass left on removed edge {from} -> {to}")));
            }
        }
        Ok(())
    }

    fn into_graph(self) -> Result<(FlowGraph, Vec<PathFlow>), FlowError> {
        let index = |l: usize, a: &str| Actor { level: l, index: self.levels[l].iter().position(|x| x == a).unwrap() };
        let edges: Vec<(Actor, Actor)> = self.edges.iter().map(|(l, a, b)| (index(*l, a), index(l + 1, b))).collect();
        let g = FlowGraph::new(self.levels.clone(), edges)?;
        let mut flows = Vec::new();
        for p in g.enumerate_paths() {
            let labels = g.path_labels(&p);
            let m = self.flows.get(&labels).cloned().unwrap_or_else(BigRational::zero);
            flows.push(PathFlow::new(p, Mass(m)));
        }
        Ok((g, flows))
    }
}

fn level_of(g: &FlowGraph, name: &str, expected: usize) -> Result<String, FlowError> {
    let a = resolve_on(g, name, expected)?;
    Ok(g.label(a).into())
}

/// Resolves preferring actors on `expected`, so names shared across levels
/// work when the role is clear.
fn resolve_on(g: &FlowGraph, name: &str, expected: usize) -> Result<Actor, FlowError> {
    if let Some(a) = parse_z(name) {
        if !g.contains(a) {
            return Err(FlowError::UnknownActor(name.into()));
        }
        if a.level != expected {
            return Err(FlowError::WrongLevel { actor: name.into(), expected: expected + 1, actual: a.level + 1 });
        }
        return Ok(a);
    }
    if let Some(index) = g.levels.get(expected).and_then(|xs| xs.iter().position(|x| x == name.trim())) {
        return Ok(Actor { level: expected, index });
    }
    let a = g.resolve(name)?;
    Err(FlowError::WrongLevel { actor: name.into(), expected: expected + 1, actual: a.level + 1 })
}

fn sponsor_level(g: &FlowGraph) -> usize {
    g.level_count() - 2
}

fn vendor_level(g: &FlowGraph) -> Result<usize, FlowError> {
    sponsor_level(g).checked_sub(1).ok_or_else(|| FlowError::Malformed("graph has no vendor level".into()))
}

fn distinct(names: &[String]) -> Result<(), FlowError> {
    if names.is_empty() {
        return Err(FlowError::Malformed("empty actor list".into()));
    }
    let set: BTreeSet<&String> = names.iter().collect();
    if set.len() != names.len() {
        return Err(FlowError::Malformed("actor listed twice".into()));
    }
    Ok(())
}

/// Applies one action. Masses follow the sites; upstream supply for a
/// rerouted flow is taken in proportion to the receiving actor's existing
/// supply. Actors left with nothing to supply are removed. Nothing changes
/// on error.
pub fn intervene(g: &FlowGraph, flows: &[PathFlow], action: &Action) -> Result<(FlowGraph, Vec<PathFlow>, FlowDiff), FlowError> {
    let before = Work::from_graph(g, flows)?;
    let mut w = before.clone();
    let last = w.last();
    let mut merged = Vec::new();
    match action {
        Action::PartnerSponsor { sites, sponsor, vendors } => {
            distinct(sites)?;
            let sl = sponsor_level(g);
            let sites: Vec<String> = sites.iter().map(|s| level_of(g, s, last)).collect::<Result<_, _>>()?;
            let sponsor = match resolve_on(g, sponsor, sl) {
                Ok(a) => g.label(a).to_string(),
                Err(FlowError::UnknownActor(_)) => {
                    if sponsor.trim().is_empty() {
                        return Err(FlowError::EmptyLabel);
                    }
                    if sl > 0 && vendors.is_empty() {
                        return Err(FlowError::Malformed(format!("new sponsor {sponsor} needs at least one vendor")));
                    }
                    w.levels[sl].push(sponsor.trim().into());
                    sponsor.trim().into()
                }
                Err(e) => return Err(e),
            };
            if !vendors.is_empty() {
                let vl = vendor_level(g)?;
                for v in vendors {
                    let v = level_of(g, v, vl)?;
                    w.edge(vl, &v, &sponsor);
                }
            }
            for site in &sites {
                let others: Vec<String> = w
                    .edges
                    .iter()
                    .filter(|(l, from, to)| *l == sl && to == site && *from != sponsor)
                    .map(|(_, f, _)| f.clone())
                    .collect();
                for o in others {
                    w.unedge(sl, &o, site);
                }
                w.edge(sl, &sponsor, site);
            }
            let site_set: BTreeSet<String> = sites.into_iter().collect();
            w.reroute(sl, &sponsor, |p| site_set.contains(&p[last]))?;
        }
        Action::MergeSponsors { sponsors, label, vendor } => {
            let sl = sponsor_level(g);
            merged.push(merge_actors(g, &mut w, sl, sponsors, label)?);
            if let Some(v) = vendor {
                let vl = vendor_level(g)?;
                let v = level_of(g, v, vl)?;
                let label = label.trim().to_string();
                w.edges.retain(|(l, _, to)| !(*l == vl && *to == label));
                w.edge(vl, &v, &label);
                w.reroute(vl, &v, |p| p[sl] == label)?;
            }
        }
        Action::MergeSites { sites, label } => {
            merged.push(merge_actors(g, &mut w, last, sites, label)?);
        }
        Action::ChangeVendor { sponsor, old_vendor, new_vendor } => {
            let sl = sponsor_level(g);
            let vl = vendor_level(g)?;
            let sponsor = level_of(g, sponsor, sl)?;
            let old = level_of(g, old_vendor, vl)?;
            let new = level_of(g, new_vendor, vl)?;
            if old == new {
                return Err(FlowError::Malformed("old and new vendor coincide".into()));
            }
            if !w.edges.contains(&(vl, old.clone(), sponsor.clone())) {
                return Err(FlowError::Malformed(format!("{old} does not supply {sponsor}")));
            }
            w.unedge(vl, &old, &sponsor);
            w.edge(vl, &new, &sponsor);
            w.reroute(vl, &new, |p| p[sl] == sponsor && p[vl] == old)?;
        }
        Action::TransferSites { from, to, sites } => {
            distinct(sites)?;
            let sl = sponsor_level(g);
            let from = level_of(g, from, sl)?;
            let to = level_of(g, to, sl)?;
            if from == to {
                return Err(FlowError::Malformed("transfer to the same sponsor".into()));
            }
            let sites: BTreeSet<String> = sites.iter().map(|s| level_of(g, s, last)).collect::<Result<_, _>>()?;
            for s in &sites {
                if !w.edges.contains(&(sl, from.clone(), s.clone())) {
                    return Err(FlowError::Malformed(format!("{from} does not serve {s}")));
                }
                w.unedge(sl, &from, s);
                w.edge(sl, &to, s);
            }
            w.reroute(sl, &to, |p| p[sl] == from && sites.contains(&p[last]))?;
        }
        Action::RemoveActor { actor } => {
            let a = g.resolve(actor)?;
            remove_actor(&mut w, a.level, g.label(a))?;
        }
    }
    w.settle()?;
    let diff = diff(&before, &w, merged);
    let (graph, flows) = w.into_graph()?;
    Ok((graph, flows, diff))
}

fn merge_actors(g: &FlowGraph, w: &mut Work, level: usize, names: &[String], label: &str) -> Result<Merge, FlowError> {
    distinct(names)?;
    if names.len() < 2 {
        return Err(FlowError::Malformed("merging needs at least two actors".into()));
    }
    let label = label.trim().to_string();
    if label.is_empty() {
        return Err(FlowError::EmptyLabel);
    }
    let from: Vec<String> = names.iter().map(|n| level_of(g, n, level)).collect::<Result<_, _>>()?;
    if w.has(level, &label) && !from.contains(&label) {
        return Err(FlowError::DuplicateActor { level: level + 1, label });
    }
    let first = w.levels[level].iter().position(|x| from.contains(x)).unwrap();
    w.levels[level][first] = label.clone();
    w.levels[level].retain(|x| *x == label || !from.contains(x));
    let rename = |x: &String| if from.contains(x) { label.clone() } else { x.clone() };
    w.edges = w
        .edges
        .iter()
        .map(|(l, a, b)| {
            if *l == level {
                (*l, rename(a), b.clone())
            } else if *l + 1 == level {
                (*l, a.clone(), rename(b))
            } else {
                (*l, a.clone(), b.clone())
            }
        })
        .collect();
    let old = core::mem::take(&mut w.flows);
    for (mut p, m) in old {
        p[level] = rename(&p[level]);
        Work::add_flow(&mut w.flows, p, m);
    }
    Ok(Merge { level: level + 1, from, into: label })
}

fn remove_actor(w: &mut Work, level: usize, label: &str) -> Result<(), FlowError> {
    let last = w.last();
    let through: Vec<(Vec<String>, BigRational)> =
        w.flows.iter().filter(|(p, _)| p[level] == label).map(|(p, m)| (p.clone(), m.clone())).collect();
    w.levels[level].retain(|x| x != label);
    w.edges.retain(|(l, a, b)| !((*l == level && a == label) || (*l + 1 == level && b == label)));
    w.flows.retain(|p, _| p[level] != label);
    if level == last {
        // Demand at the closed site moves to the remaining sites in
        // proportion to what they already receive.
        let removed: BigRational = through.iter().map(|(_, m)| m.clone()).sum();
        if removed.is_zero() {
            return Ok(());
        }
        let rest: BigRational = w.flows.values().cloned().sum();
        if rest.is_zero() {
            return Err(FlowError::DisconnectedResult(vec![label.into()]));
        }
        let factor = (&rest + &removed) / &rest;
        for m in w.flows.values_mut() {
            *m = &*m * &factor;
        }
        return Ok(());
    }
    let mut stranded = BTreeSet::new();
    let snapshot = w.clone();
    for (path, m) in through {
        let next = &path[level + 1];
        let candidates: Vec<String> = snapshot
            .edges
            .iter()
            .filter(|(l, _, to)| *l == level && to == next)
            .map(|(_, from, _)| from.clone())
            .collect();
        if candidates.is_empty() {
            stranded.insert(next.clone());
            continue;
        }
        // Weight replacements by what they already send to `next`.
        let weights: Vec<BigRational> = candidates
            .iter()
            .map(|c| {
                snapshot.flows.iter().filter(|(p, _)| p[level] == *c && p[level + 1] == *next).map(|(_, m)| m.clone()).sum()
            })
            .collect();
        let total: BigRational = weights.iter().cloned().sum();
        for (c, wt) in candidates.iter().zip(weights) {
            let share = if total.is_zero() {
                BigRational::new(BigInt::one(), BigInt::from(candidates.len()))
            } else {
                wt / &total
            };
            for (prefix, up) in snapshot.split(level, c)? {
                let mut p = prefix;
                p.push(c.clone());
                p.extend_from_slice(&path[level + 1..]);
                Work::add_flow(&mut w.flows, p, &m * &share * &up);
            }
        }
    }
    if !stranded.is_empty() {
        return Err(FlowError::DisconnectedResult(stranded.into_iter().collect()));
    }
    Ok(())
}

fn diff(before: &Work, after: &Work, merged: Vec<Merge>) -> FlowDiff {
    let labelled = |(l, a, b): &(usize, String, String)| LabelledEdge { level: l + 1, from: a.clone(), to: b.clone() };
    let actors = |w: &Work| -> BTreeSet<(usize, String)> {
        w.levels.iter().enumerate().flat_map(|(l, xs)| xs.iter().map(move |a| (l + 1, a.clone()))).collect()
    };
    let (ab, aa) = (actors(before), actors(after));
    let keys: BTreeSet<&Vec<String>> = before.flows.keys().chain(after.flows.keys()).collect();
    let zero = BigRational::zero();
    let path_changes = keys
        .into_iter()
        .filter_map(|k| {
            let b = before.flows.get(k).unwrap_or(&zero);
            let a = after.flows.get(k).unwrap_or(&zero);
            (a != b).then(|| PathChange { path: k.clone(), before: Mass(b.clone()), after: Mass(a.clone()) })
        })
        .collect();
    FlowDiff {
        edges_added: after.edges.difference(&before.edges).map(labelled).collect(),
        edges_removed: before.edges.difference(&after.edges).map(labelled).collect(),
        actors_added: aa.difference(&ab).map(|(level, label)| LabelledActor { level: *level, label: label.clone() }).collect(),
        actors_removed: ab.difference(&aa).map(|(level, label)| LabelledActor { level: *level, label: label.clone() }).collect(),
        actors_merged: merged,
        path_changes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &str) -> String {
        x.into()
    }

    pub(crate) fn austin() -> FlowGraph {
        let levels = vec![
            vec![s("Revolution Foods"), s("Aramark")],
            vec![s("City Square"), s("Austin Independent School District"), s("Boys and Girls Club")],
            vec![
                s("Apartment complex A"),
                s("Apartment complex B"),
                s("Elementary School"),
                s("Intermediate School"),
                s("High School"),
                s("Boys and Girls Club site A"),
                s("Boys and Girls Club site B"),
            ],
        ];
        let e = [
            ("z(1,1)", "z(2,1)"),
            ("z(1,1)", "z(2,3)"),
            ("z(1,2)", "z(2,2)"),
            ("z(2,1)", "z(3,1)"),
            ("z(2,1)", "z(3,2)"),
            ("z(2,2)", "z(3,3)"),
            ("z(2,2)", "z(3,4)"),
            ("z(2,2)", "z(3,5)"),
            ("z(2,3)", "z(3,4)"),
            ("z(2,3)", "z(3,5)"),
            ("z(2,3)", "z(3,6)"),
            ("z(2,3)", "z(3,7)"),
        ];
        FlowGraph::from_labels(levels, &e).unwrap()
    }

    fn m(x: &str) -> Mass {
        x.parse().unwrap()
    }

    #[test]
    fn mass_text_round_trip() {
        for (text, shown) in [("12.5", "12.5"), ("3", "3"), ("0.10", "0.1"), ("1/3", "1/3"), ("-0.05", "-0.05"), ("2e3", "2000"), ("1.5e-2", "0.015")] {
            assert_eq!(m(text).to_string(), shown);
        }
        assert_eq!(Mass::from_f64(0.1).unwrap(), m("1/10"));
        for bad in ["", "abc", "1/0", "1.2.3", "."] {
            assert!(bad.parse::<Mass>().is_err(), "{bad}");
        }
    }

    #[test]
    fn austin_paths() {
        let g = austin();
        let paths = g.enumerate_paths();
        assert_eq!(paths.len(), 9);
        assert_eq!(paths[0], [0, 0, 0]);
        assert!(paths.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_graphs() {
        let chain = FlowGraph::from_labels(vec![vec![s("a")], vec![s("b")], vec![s("c")]], &[("a", "b"), ("b", "c")]).unwrap();
        assert_eq!(chain.enumerate_paths().len(), 1);
        let two = |p: &str| vec![format!("{p}1"), format!("{p}2")];
        let mut e = Vec::new();
        for (x, y) in [("a", "b"), ("b", "c")] {
            for i in 1..=2 {
                for j in 1..=2 {
                    e.push((format!("{x}{i}"), format!("{y}{j}")));
                }
            }
        }
        let refs: Vec<(&str, &str)> = e.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let full = FlowGraph::from_labels(vec![two("a"), two("b"), two("c")], &refs).unwrap();
        assert_eq!(full.enumerate_paths().len(), 8);
    }

    #[test]
    fn invalid_graphs() {
        let lv = || vec![vec![s("a")], vec![s("b"), s("c")]];
        assert_eq!(FlowGraph::from_labels(lv(), &[("a", "b")]), Err(FlowError::Stranded(s("z(2,2) c"))));
        assert!(matches!(FlowGraph::from_labels(vec![vec![s("a")]], &[]), Err(FlowError::TooFewLevels)));
        let three = vec![vec![s("a")], vec![s("b")], vec![s("c")]];
        assert!(matches!(
            FlowGraph::from_labels(three, &[("a", "c"), ("a", "b"), ("b", "c")]),
            Err(FlowError::NonAdjacentEdge(_))
        ));
    }

    #[test]
    fn states_of_single_path() {
        let g = austin();
        let st = node_states(&g, &[PathFlow::new(vec![0, 0, 1], Mass::from_integer(1))], None).unwrap();
        let one = Mass::from_integer(1);
        assert_eq!(st.levels[0], [one.clone(), Mass::zero()]);
        assert_eq!(st.levels[1][0], one);
        assert_eq!(st.levels[2][1], one);
        assert_eq!(st.levels[2].iter().filter(|x| !x.is_zero()).count(), 1);
        let uniform = node_states(&g, &uniform_flows(&g, one), Some(3)).unwrap();
        assert_eq!(uniform.levels[0], [Mass::from_integer(6), Mass::from_integer(3)]);
        let empty = node_states(&g, &[], None).unwrap();
        assert!(empty.levels.iter().flatten().all(Mass::is_zero));
        assert!(node_states(&g, &[PathFlow::new(vec![0, 1, 0], Mass::zero())], None).is_err());
    }

    #[test]
    fn conservation_tolerance() {
        let v = |xs: [&str; 3]| NodeStateVector { t: None, levels: xs.iter().map(|x| vec![m(x)]).collect() };
        assert!(!check_conservation(&v(["10", "10", "9"])).conserved);
        assert_eq!(check_conservation(&v(["10", "10", "9"])).totals[2], m("9"));
        assert!(check_conservation(&v(["10", "10.000000000001", "10"])).conserved);
    }

    #[test]
    fn change_vendor_reroots_city_square() {
        let g = austin();
        let flows: Vec<PathFlow> =
            g.enumerate_paths().into_iter().enumerate().map(|(i, p)| PathFlow::new(p, Mass::from_integer(i as i64 + 1))).collect();
        let act = Action::ChangeVendor { sponsor: s("City Square"), old_vendor: s("Revolution Foods"), new_vendor: s("Aramark") };
        let (g2, f2, d) = intervene(&g, &flows, &act).unwrap();
        let before = node_states(&g, &flows, None).unwrap();
        let after = node_states(&g2, &f2, None).unwrap();
        // City Square carries paths 1 and 2 (masses 1 and 2).
        assert_eq!(after.levels[0][0].clone(), before.levels[0][0].clone() - Mass::from_integer(3));
        assert_eq!(after.levels[0][1].clone(), before.levels[0][1].clone() + Mass::from_integer(3));
        assert!(check_conservation(&after).conserved);
        assert_eq!(d.edges_added, [LabelledEdge { level: 1, from: s("Aramark"), to: s("City Square") }]);
        assert_eq!(d.path_changes.len(), 4);
    }

    #[test]
    fn merge_sites_adds_masses() {
        let g = austin();
        let flows: Vec<PathFlow> = g
            .enumerate_paths()
            .into_iter()
            .map(|p| {
                let mass = match p[2] {
                    0 => "3",
                    1 => "5",
                    _ => "1",
                };
                PathFlow::new(p, m(mass))
            })
            .collect();
        let act = Action::MergeSites { sites: vec![s("Apartment complex A"), s("Apartment complex B")], label: s("Apartments") };
        let (g2, f2, d) = intervene(&g, &flows, &act).unwrap();
        let after = node_states(&g2, &f2, None).unwrap();
        assert_eq!(after.levels[2][0], m("8"));
        assert_eq!(g2.levels()[2].len(), 6);
        assert_eq!(check_conservation(&after).totals, vec![m("15"); 3]);
        assert_eq!(d.actors_merged[0].into, "Apartments");
    }

    #[test]
    fn transfer_leaves_elementary() {
        let g = austin();
        let flows = uniform_flows(&g, m("1"));
        let act = Action::TransferSites {
            from: s("Austin Independent School District"),
            to: s("Boys and Girls Club"),
            sites: vec![s("Intermediate School"), s("High School")],
        };
        let (g2, f2, _) = intervene(&g, &flows, &act).unwrap();
        let aisd = g2.resolve("Austin Independent School District").unwrap();
        let kids: Vec<&str> = g2.children(aisd).map(|c| g2.label(c)).collect();
        assert_eq!(kids, ["Elementary School"]);
        let after = node_states(&g2, &f2, None).unwrap();
        assert_eq!(check_conservation(&after).totals, vec![m("9"); 3]);
        // Sites keep their demand.
        let before = node_states(&g, &flows, None).unwrap();
        assert_eq!(before.levels[2], after.levels[2]);
    }

    #[test]
    fn removal_that_strands_is_rejected() {
        let g = austin();
        let flows = uniform_flows(&g, m("1"));
        let err = intervene(&g, &flows, &Action::RemoveActor { actor: s("Aramark") }).unwrap_err();
        assert_eq!(err, FlowError::DisconnectedResult(vec![s("Austin Independent School District")]));
        let err = intervene(&g, &flows, &Action::RemoveActor { actor: s("City Square") }).unwrap_err();
        assert!(matches!(err, FlowError::DisconnectedResult(ref v) if v.len() == 2));
        // Boys and Girls Club sites A and B have no other sponsor either.
        let err = intervene(&g, &flows, &Action::RemoveActor { actor: s("Boys and Girls Club") }).unwrap_err();
        assert!(matches!(err, FlowError::DisconnectedResult(_)));
    }

    #[test]
    fn unknown_actor() {
        let g = austin();
        let act = Action::TransferSites { from: s("Nobody"), to: s("City Square"), sites: vec![s("High School")] };
        assert!(matches!(intervene(&g, &[], &act), Err(FlowError::UnknownActor(_))));
    }
}
