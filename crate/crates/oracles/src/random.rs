//! Random inputs as plain data.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

/// Edges over `0..n`, oriented along a random ordering.
pub fn dag<R: Rng>(rng: &mut R, n: usize, density: f64) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                edges.push((order[i], order[j]));
            }
        }
    }
    edges
}

/// Parent lists of a random DAG, for building tables.
pub fn parents_of(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n];
    for &(a, b) in edges {
        out[b].push(a);
    }
    out
}

pub fn probability_vector<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

/// Event tree with vertex 0 as root. Every situation at depth `d` decides
/// variable `d`; its edges are labelled `0..k`.
#[derive(Debug, Clone)]
pub struct RawTree {
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    /// Per vertex, the probabilities of its out-edges in label order.
    pub probs: Vec<Vec<f64>>,
    /// Groups of situations sharing a stage (singletons omitted).
    pub stages: Vec<Vec<usize>>,
}

impl RawTree {
    /// Root-to-leaf paths as vertex sequences with their probabilities.
    pub fn paths(&self) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(vec![0usize], 1.0)];
        while let Some((path, p)) = stack.pop() {
            let v = *path.last().unwrap();
            if self.children[v].is_empty() {
                out.push((path, p));
                continue;
            }
            for (i, &c) in self.children[v].iter().enumerate() {
                let mut next = path.clone();
                next.push(c);
                stack.push((next, p * self.probs[v][i]));
            }
        }
        out
    }
}

/// A tree with at most `levels` levels of situations and at most
/// `branches` edges per situation, staged at random among situations of
/// equal depth and degree. Stage members share one probability vector.
pub fn staged_tree<R: Rng>(rng: &mut R, levels: usize, branches: usize) -> RawTree {
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut depth = vec![0];
    let mut frontier = vec![0];
    while let Some(v) = frontier.pop() {
        let d = depth[v];
        if d >= levels || (v != 0 && !rng.random_bool(0.7)) {
            continue;
        }
        let k = rng.random_range(2..=branches.max(2));
        for _ in 0..k {
            let c = children.len();
            children.push(Vec::new());
            depth.push(d + 1);
            children[v].push(c);
            frontier.push(c);
        }
    }
    let n = children.len();
    let mut probs = vec![Vec::new(); n];
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for v in 0..n {
        if !children[v].is_empty() {
            groups.entry((depth[v], children[v].len())).or_default().push(v);
        }
    }
    let mut stages = Vec::new();
    for ((_, k), mut members) in groups {
        members.shuffle(rng);
        let parts = rng.random_range(1..=members.len());
        let mut buckets = vec![Vec::new(); parts];
        for (i, v) in members.into_iter().enumerate() {
            let b = if i < parts { i } else { rng.random_range(0..parts) };
            buckets[b].push(v);
        }
        for mut b in buckets {
            b.sort();
            let p = probability_vector(rng, k);
            for &v in &b {
                probs[v] = p.clone();
            }
            if b.len() > 1 {
                stages.push(b);
            }
        }
    }
    RawTree { children, depth, probs, stages }
}

/// Specification of one series of a random multi-regression model.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub parents: Vec<usize>,
    pub g: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub v: f64,
    pub m0: DVector<f64>,
    pub c0: DMatrix<f64>,
}

pub fn psd<R: Rng>(rng: &mut R, p: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    (&a * a.transpose()) * (scale / p as f64) + DMatrix::identity(p, p) * (0.05 * scale)
}

/// `n` series, each with at most `max_dim - 1` parents among the earlier
/// ones.
pub fn mdm<R: Rng>(rng: &mut R, n: usize, max_dim: usize) -> Vec<RawSeries> {
    (0..n)
        .map(|r| {
            let mut earlier: Vec<usize> = (0..r).collect();
            earlier.shuffle(rng);
            let k = rng.random_range(0..=earlier.len().min(max_dim.saturating_sub(1)));
            let mut parents: Vec<usize> = earlier[..k].to_vec();
            parents.sort();
            let p = 1 + k;
            let g = DMatrix::identity(p, p) + DMatrix::from_fn(p, p, |_, _| rng.random_range(-0.2..0.2));
            let (w_scale, c_scale) = (rng.random_range(0.01..0.5), rng.random_range(0.5..2.0));
            RawSeries {
                parents,
                g,
                w: psd(rng, p, w_scale),
                v: rng.random_range(0.2..2.0),
                m0: DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0)),
                c0: psd(rng, p, c_scale),
            }
        })
        .collect()
}

/// `t` rows of standard-normal noise around a random level per series.
pub fn observations<R: Rng>(rng: &mut R, n: usize, t: usize) -> Vec<Vec<f64>> {
    let level: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    (0..t).map(|_| (0..n).map(|r| level[r] + rng.sample::<f64, _>(StandardNormal)).collect()).collect()
}
