//! Slow, obviously-correct reference computations. Nothing here depends on
//! the engine crates; tests feed both sides the same raw inputs.

pub mod random;

pub mod dsep {
    /// Every labelled DAG on `n` nodes, as edge lists over `0..n`.
    pub fn all_dags(n: usize) -> Vec<Vec<(usize, usize)>> {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let total = 3usize.pow(pairs.len() as u32);
        let mut out = Vec::new();
        for code in 0..total {
            let mut c = code;
            let mut edges = Vec::new();
            for &(i, j) in &pairs {
                match c % 3 {
                    1 => edges.push((i, j)),
                    2 => edges.push((j, i)),
                    _ => {}
                }
                c /= 3;
            }
            if is_acyclic(n, &edges) {
                out.push(edges);
            }
        }
        out
    }

    pub fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut indeg = vec![0; n];
        for &(_, b) in edges {
            indeg[b] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|v| indeg[*v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = stack.pop() {
            seen += 1;
            for &(a, b) in edges {
                if a == v {
                    indeg[b] -= 1;
                    if indeg[b] == 0 {
                        stack.push(b);
                    }
                }
            }
        }
        seen == n
    }

    fn descendants_or_self(n: usize, edges: &[(usize, usize)], v: usize) -> Vec<bool> {
        let mut mark = vec![false; n];
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if std::mem::replace(&mut mark[x], true) {
                continue;
            }
            stack.extend(edges.iter().filter(|e| e.0 == x).map(|e| e.1));
        }
        mark
    }

    /// True when no simple path between `a` and `b` is active given the
    /// nodes in `given`. Exponential; fine for a handful of nodes.
    pub fn separated_by_paths(n: usize, edges: &[(usize, usize)], a: usize, b: usize, given: &[usize]) -> bool {
        let in_s = |v: usize| given.contains(&v);
        let opens: Vec<bool> = (0..n).map(|v| descendants_or_self(n, edges, v).iter().enumerate().any(|(u, d)| *d && in_s(u))).collect();
        let adjacent = |x: usize, y: usize| edges.contains(&(x, y)) || edges.contains(&(y, x));
        let mut path = vec![a];
        !active(n, edges, &adjacent, &opens, &in_s, b, &mut path)
    }

    fn active(
        n: usize,
        edges: &[(usize, usize)],
        adjacent: &dyn Fn(usize, usize) -> bool,
        opens: &[bool],
        in_s: &dyn Fn(usize) -> bool,
        target: usize,
        path: &mut Vec<usize>,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == target {
            // Check every interior vertex.
            return (1..path.len() - 1).all(|i| {
                let (p, v, q) = (path[i - 1], path[i], path[i + 1]);
                let collider = edges.contains(&(p, v)) && edges.contains(&(q, v));
                if collider {
                    opens[v]
                } else {
                    !in_s(v)
                }
            });
        }
        for next in 0..n {
            if adjacent(last, next) && !path.contains(&next) {
                path.push(next);
                let hit = active(n, edges, adjacent, opens, in_s, target, path);
                path.pop();
                if hit {
                    return true;
                }
            }
        }
        false
    }
}

pub mod bn {
    /// Binary network; `tables[v][k]` is P(v = 1 | parent configuration k),
    /// with parent `parents[v][i]` contributing bit `i` of `k`.
    pub struct BinaryBn {
        pub parents: Vec<Vec<usize>>,
        pub tables: Vec<Vec<f64>>,
    }

    impl BinaryBn {
        /// Joint probability indexed by assignment bitmask.
        pub fn joint(&self) -> Vec<f64> {
            let n = self.parents.len();
            (0..1usize << n)
                .map(|x| {
                    (0..n)
                        .map(|v| {
                            let k = self.parents[v].iter().enumerate().fold(0, |k, (i, p)| k | (((x >> p) & 1) << i));
                            let p1 = self.tables[v][k];
                            if (x >> v) & 1 == 1 {
                                p1
                            } else {
                                1.0 - p1
                            }
                        })
                        .product()
                })
                .collect()
        }
    }

    /// Largest |P(a,b,s)P(s) - P(a,s)P(b,s)| over all values.
    pub fn ci_gap(joint: &[f64], a: usize, b: usize, given: &[usize]) -> f64 {
        let n = joint.len().trailing_zeros() as usize;
        let smask: usize = given.iter().map(|v| 1 << v).sum();
        let mut worst: f64 = 0.0;
        for s in 0..1usize << n {
            if s & !smask != 0 {
                continue;
            }
            let marg = |fixed: usize, vals: usize| -> f64 {
                joint.iter().enumerate().filter(|(x, _)| x & fixed == vals).map(|(_, p)| p).sum()
            };
            let ps = marg(smask, s);
            for va in 0..2usize {
                for vb in 0..2usize {
                    let abm = smask | 1 << a | 1 << b;
                    let abv = s | va << a | vb << b;
                    let pabs = marg(abm, abv);
                    let pas = marg(smask | 1 << a, s | va << a);
                    let pbs = marg(smask | 1 << b, s | vb << b);
                    worst = worst.max((pabs * ps - pas * pbs).abs());
                }
            }
        }
        worst
    }
}

pub mod table {
    use std::collections::BTreeMap;

    /// Largest |P(u,w,d)P(w) - P(u,w)P(w,d)| over a joint table given as
    /// (u, w, d, probability) rows. Zero when U and D are independent given W.
    pub fn factorization_gap<U: Ord + Clone, W: Ord + Clone, D: Ord + Clone>(rows: &[(U, W, D, f64)]) -> f64 {
        let mut uwd: BTreeMap<(U, W, D), f64> = BTreeMap::new();
        let mut uw: BTreeMap<(U, W), f64> = BTreeMap::new();
        let mut wd: BTreeMap<(W, D), f64> = BTreeMap::new();
        let mut w: BTreeMap<W, f64> = BTreeMap::new();
        for (u, ww, d, p) in rows {
            *uwd.entry((u.clone(), ww.clone(), d.clone())).or_default() += p;
            *uw.entry((u.clone(), ww.clone())).or_default() += p;
            *wd.entry((ww.clone(), d.clone())).or_default() += p;
            *w.entry(ww.clone()).or_default() += p;
        }
        let mut worst: f64 = 0.0;
        for ((u, ww, d), pw) in uw.keys().flat_map(|(u, ww)| {
            wd.keys().filter(move |(w2, _)| w2 == ww).map(move |(_, d)| ((u.clone(), ww.clone(), d.clone()), ww.clone()))
        }) {
            let joint = uwd.get(&(u.clone(), ww.clone(), d.clone())).copied().unwrap_or(0.0);
            let lhs = joint * w[&pw];
            let rhs = uw[&(u, ww.clone())] * wd[&(ww, d)];
            worst = worst.max((lhs - rhs).abs());
        }
        worst
    }
}

pub mod gaussian {
    use nalgebra::{DMatrix, DVector};

    /// One dynamic regression written out in full:
    /// θ_t = G_t θ_{t-1} + w_t, y_t = F_t'θ_t + v_t, θ_0 ~ N(m0, C0).
    #[derive(Debug, Clone)]
    pub struct Regression {
        pub m0: DVector<f64>,
        pub c0: DMatrix<f64>,
        pub g: Vec<DMatrix<f64>>,
        pub w: Vec<DMatrix<f64>>,
        pub v: Vec<f64>,
        pub f: Vec<DVector<f64>>,
    }

    impl Regression {
        pub fn dim(&self) -> usize {
            self.m0.len()
        }

        pub fn steps(&self) -> usize {
            self.f.len()
        }

        /// Mean and covariance of [θ_1, ..., θ_T, y_1, ..., y_T], built
        /// from the independent shocks [θ_0, w_1..w_T, v_1..v_T].
        pub fn joint(&self) -> (DVector<f64>, DMatrix<f64>) {
            let (p, t) = (self.dim(), self.steps());
            let shocks = p + t * p + t;
            let mut shock_mean = DVector::zeros(shocks);
            let mut shock_cov = DMatrix::zeros(shocks, shocks);
            shock_mean.rows_mut(0, p).copy_from(&self.m0);
            shock_cov.view_mut((0, 0), (p, p)).copy_from(&self.c0);
            for s in 0..t {
                let o = p + s * p;
                shock_cov.view_mut((o, o), (p, p)).copy_from(&self.w[s]);
                let o = p + t * p + s;
                shock_cov[(o, o)] = self.v[s];
            }
            // theta[s] = loading of θ_{s+1} on the shocks.
            let mut b = DMatrix::zeros(t * p + t, shocks);
            let mut prev = DMatrix::zeros(p, shocks);
            prev.view_mut((0, 0), (p, p)).fill_with_identity();
            for s in 0..t {
                let mut cur = &self.g[s] * &prev;
                let o = p + s * p;
                for i in 0..p {
                    cur[(i, o + i)] += 1.0;
                }
                b.view_mut((s * p, 0), (p, shocks)).copy_from(&cur);
                let mut y = self.f[s].transpose() * &cur;
                y[(0, p + t * p + s)] += 1.0;
                b.view_mut((t * p + s, 0), (1, shocks)).copy_from(&y);
                prev = cur;
            }
            (&b * shock_mean, &b * shock_cov * b.transpose())
        }
    }

    /// Several regressions side by side with independent shocks.
    pub fn stack(parts: &[(DVector<f64>, DMatrix<f64>)]) -> (DVector<f64>, DMatrix<f64>) {
        let n: usize = parts.iter().map(|p| p.0.len()).sum();
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        let mut o = 0;
        for (m, c) in parts {
            let k = m.len();
            mean.rows_mut(o, k).copy_from(m);
            cov.view_mut((o, o), (k, k)).copy_from(c);
            o += k;
        }
        (mean, cov)
    }

    /// Distribution of the entries `keep` given that entries `obs` equal
    /// `values`.
    pub fn condition(
        mean: &DVector<f64>,
        cov: &DMatrix<f64>,
        keep: &[usize],
        obs: &[usize],
        values: &[f64],
    ) -> (DVector<f64>, DMatrix<f64>) {
        let sub = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| cov[(r[i], c[j])]);
        let skk = sub(keep, keep);
        if obs.is_empty() {
            return (DVector::from_fn(keep.len(), |i, _| mean[keep[i]]), skk);
        }
        let sko = sub(keep, obs);
        let soo = sub(obs, obs);
        let resid = DVector::from_fn(obs.len(), |i, _| values[i] - mean[obs[i]]);
        let inv = soo.try_inverse().expect("observed block is invertible");
        let m = DVector::from_fn(keep.len(), |i, _| mean[keep[i]]) + &sko * &inv * resid;
        let c = skk - &sko * inv * sko.transpose();
        (m, c)
    }

    pub fn log_density(x: &[f64], mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
        let k = x.len();
        let chol = cov.clone().cholesky().expect("covariance is positive definite");
        let e = DVector::from_fn(k, |i, _| x[i] - mean[i]);
        let z = chol.solve(&e);
        let logdet: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + e.dot(&z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn dag_counts() {
        // Number of labelled DAGs on n nodes.
        let counts: Vec<usize> = (1..=4).map(|n| dsep::all_dags(n).len()).collect();
        assert_eq!(counts, [1, 3, 25, 543]);
    }

    #[test]
    fn collider() {
        let e = [(0, 2), (1, 2)];
        assert!(dsep::separated_by_paths(3, &e, 0, 1, &[]));
        assert!(!dsep::separated_by_paths(3, &e, 0, 1, &[2]));
        let chain = [(0, 1), (1, 2)];
        assert!(!dsep::separated_by_paths(3, &chain, 0, 2, &[]));
        assert!(dsep::separated_by_paths(3, &chain, 0, 2, &[1]));
    }

    #[test]
    fn chain_bn_ci() {
        let bn = bn::BinaryBn { parents: vec![vec![], vec![0], vec![1]], tables: vec![vec![0.3], vec![0.2, 0.9], vec![0.6, 0.1]] };
        let j = bn.joint();
        assert!((j.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(bn::ci_gap(&j, 0, 2, &[1]) < 1e-15);
        assert!(bn::ci_gap(&j, 0, 2, &[]) > 1e-3);
    }

    #[test]
    fn scalar_regression_matches_textbook_update() {
        let r = gaussian::Regression {
            m0: DVector::from_vec(vec![0.0]),
            c0: DMatrix::from_element(1, 1, 1.0),
            g: vec![DMatrix::from_element(1, 1, 1.0)],
            w: vec![DMatrix::from_element(1, 1, 0.5)],
            v: vec![2.0],
            f: vec![DVector::from_vec(vec![1.0])],
        };
        let (m, c) = r.joint();
        let (pm, pc) = gaussian::condition(&m, &c, &[0], &[1], &[3.0]);
        // R = 1.5, Q = 3.5, A = R/Q.
        assert!((pm[0] - 1.5 / 3.5 * 3.0).abs() < 1e-12);
        assert!((pc[(0, 0)] - (1.5 - 1.5 * 1.5 / 3.5)).abs() < 1e-12);
        let lp = gaussian::log_density(&[3.0], &DVector::from_vec(vec![m[1]]), &DMatrix::from_element(1, 1, c[(1, 1)]));
        assert!((lp - (-0.5 * ((2.0 * std::f64::consts::PI * 3.5).ln() + 9.0 / 3.5))).abs() < 1e-12);
    }

    #[test]
    fn independent_table() {
        let rows: Vec<(u8, u8, u8, f64)> =
            vec![(0, 0, 0, 0.1 * 0.2), (0, 0, 1, 0.1 * 0.8), (1, 0, 0, 0.3 * 0.2), (1, 0, 1, 0.3 * 0.8), (0, 1, 0, 0.6)];
        assert!(table::factorization_gap(&rows) < 1e-15);
        let dep: Vec<(u8, u8, u8, f64)> = vec![(0, 0, 0, 0.5), (1, 0, 1, 0.5)];
        assert!(table::factorization_gap(&dep) > 0.2);
    }
}
