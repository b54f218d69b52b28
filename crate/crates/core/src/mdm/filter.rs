use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::{MdmError, MdmSpec, Q_FLOOR};

/// Posterior moments of every series' state after `t` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub t: usize,
    pub m: Vec<DVector<f64>>,
    pub c: Vec<DMatrix<f64>>,
}

impl FilterState {
    pub fn prior(spec: &MdmSpec) -> Self {
        FilterState {
            t: 0,
            m: spec.nodes.iter().map(|n| n.m0.clone()).collect(),
            c: spec.nodes.iter().map(|n| n.c0.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesForecast {
    pub series: String,
    pub f: f64,
    pub q: f64,
    pub y: Option<f64>,
    pub std_residual: Option<f64>,
    pub log_density: Option<f64>,
    /// Set when a missing parent value was replaced by its forecast.
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepForecast {
    pub t: usize,
    pub series: Vec<SeriesForecast>,
    /// Sum of the per-series log densities that were scored.
    pub total_log_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub t: usize,
    pub series: String,
    pub y: Option<f64>,
    pub f: f64,
    pub q: f64,
    pub std_residual: Option<f64>,
    pub log_density: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<FilterState>,
    pub forecasts: Vec<StepForecast>,
}

impl Trajectory {
    pub fn residuals(&self) -> Vec<ResidualRow> {
        self.forecasts
            .iter()
            .flat_map(|step| {
                step.series.iter().map(move |s| ResidualRow {
                    t: step.t,
                    series: s.series.clone(),
                    y: s.y,
                    f: s.f,
                    q: s.q,
                    std_residual: s.std_residual,
                    log_density: s.log_density,
                })
            })
            .collect()
    }
}

pub fn log_normal_pdf(y: f64, mean: f64, var: f64) -> f64 {
    let e = y - mean;
    -0.5 * (libm::log(2.0 * core::f64::consts::PI * var) + e * e / var)
}

/// `[1, y_t(pa_1), ..., y_t(pa_k)]` in declared parent order. `y_t` is
/// indexed like `spec.nodes`.
pub fn design_vector(spec: &MdmSpec, r: usize, y_t: &[Option<f64>], t: usize) -> Result<DVector<f64>, MdmError> {
    let node = &spec.nodes[r];
    let mut f = DVector::zeros(node.dim());
    f[0] = 1.0;
    for (k, parent) in node.parents.iter().enumerate() {
        let j = spec.index_of(parent).ok_or_else(|| MdmError::UnknownSeries(parent.clone()))?;
        f[k + 1] = y_t.get(j).copied().flatten().ok_or_else(|| MdmError::MissingParentObservation {
            series: node.id.clone(),
            parent: parent.clone(),
            t,
        })?;
    }
    Ok(f)
}

struct Prior {
    a: DVector<f64>,
    r: DMatrix<f64>,
}

fn evolve(spec: &MdmSpec, state: &FilterState, r: usize, t: usize) -> Prior {
    let node = &spec.nodes[r];
    let g = node.g_at(t);
    Prior { a: g * &state.m[r], r: g * &state.c[r] * g.transpose() + node.w_at(t) }
}

fn predictive(prior: &Prior, f: &DVector<f64>, v: f64) -> (f64, f64) {
    let mean = f.dot(&prior.a);
    let q = (f.transpose() * &prior.r * f)[(0, 0)] + v;
    (mean, q.max(Q_FLOOR))
}

fn check_length(spec: &MdmSpec, y_t: &[Option<f64>]) -> Result<(), MdmError> {
    if y_t.len() != spec.nodes.len() {
        return Err(MdmError::ObservationLength { expected: spec.nodes.len(), got: y_t.len() });
    }
    Ok(())
}

/// Forecasts every series for time `state.t + 1` with realized parent
/// values plugged in. Each series is scored against its own observation, so
/// the joint predictive log density is the sum of the per-series terms.
/// Missing parent values are replaced by the parent's marginal forecast,
/// and the affected series is marked approximate and left unscored.
pub fn one_step_forecast(spec: &MdmSpec, state: &FilterState, y_t: &[Option<f64>]) -> Result<StepForecast, MdmError> {
    Ok(forecast_and_priors(spec, state, y_t)?.0)
}

fn forecast_and_priors(
    spec: &MdmSpec,
    state: &FilterState,
    y_t: &[Option<f64>],
) -> Result<(StepForecast, Vec<(Prior, Option<DVector<f64>>)>), MdmError> {
    check_length(spec, y_t)?;
    let t = state.t + 1;
    let mut marginal: Option<Vec<(f64, f64)>> = None;
    let mut series = Vec::with_capacity(spec.nodes.len());
    let mut priors = Vec::with_capacity(spec.nodes.len());
    let mut total = 0.0;
    for (r, node) in spec.nodes.iter().enumerate() {
        let prior = evolve(spec, state, r, t);
        let (f, q, design, approximate) = match design_vector(spec, r, y_t, t) {
            Ok(design) => {
                let (f, q) = predictive(&prior, &design, node.v_at(t));
                (f, q, Some(design), false)
            }
            Err(MdmError::MissingParentObservation { .. }) => {
                let m = match &marginal {
                    Some(m) => m,
                    None => marginal.insert(marginal_forecast(spec, state)?),
                };
                (m[r].0, m[r].1, None, true)
            }
            Err(e) => return Err(e),
        };
        if !f.is_finite() || !q.is_finite() {
            return Err(MdmError::NumericalBreakdown { series: node.id.clone(), t });
        }
        let y = y_t[r];
        let scored = y.filter(|_| !approximate);
        let log_density = scored.map(|y| log_normal_pdf(y, f, q));
        total += log_density.unwrap_or(0.0);
        series.push(SeriesForecast {
            series: node.id.clone(),
            f,
            q,
            y,
            std_residual: y.map(|y| (y - f) / libm::sqrt(q)),
            log_density,
            approximate,
        });
        priors.push((prior, design));
    }
    Ok((StepForecast { t, series, total_log_density: total }, priors))
}

/// One filtering step. Series with a missing observation or a missing
/// parent value keep their propagated prior.
pub fn step_filter(spec: &MdmSpec, state: &FilterState, y_t: &[Option<f64>]) -> Result<(FilterState, StepForecast), MdmError> {
    let (forecast, priors) = forecast_and_priors(spec, state, y_t)?;
    let mut next = FilterState { t: state.t + 1, m: Vec::new(), c: Vec::new() };
    for ((prior, design), fc) in priors.into_iter().zip(&forecast.series) {
        match (design, fc.y) {
            (Some(f), Some(y)) => {
                let rf = &prior.r * &f;
                let e = y - fc.f;
                let m = &prior.a + &rf * (e / fc.q);
                let c = &prior.r - &rf * rf.transpose() / fc.q;
                next.m.push(m);
                next.c.push((&c + c.transpose()) * 0.5);
            }
            _ => {
                next.m.push(prior.a);
                next.c.push(prior.r);
            }
        }
    }
    Ok((next, forecast))
}

/// Forecasts without any time-`t` values by substituting each parent's
/// forecast for its value. The variance adds parent uncertainty, treating
/// parents as uncorrelated with each other, so this is an approximation.
pub fn marginal_forecast(spec: &MdmSpec, state: &FilterState) -> Result<Vec<(f64, f64)>, MdmError> {
    let t = state.t + 1;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(spec.nodes.len());
    for (r, node) in spec.nodes.iter().enumerate() {
        let prior = evolve(spec, state, r, t);
        let p = node.dim();
        let mut mean_f = DVector::zeros(p);
        let mut var_f = vec![0.0; p];
        mean_f[0] = 1.0;
        for (k, parent) in node.parents.iter().enumerate() {
            let j = spec.index_of(parent).filter(|j| *j < r).ok_or_else(|| MdmError::UnknownSeries(parent.clone()))?;
            mean_f[k + 1] = out[j].0;
            var_f[k + 1] = out[j].1;
        }
        let (f, mut q) = predictive(&prior, &mean_f, node.v_at(t));
        // Var(F'θ) = E[F]'R E[F] + a' Σ_F a + tr(R Σ_F) with diagonal Σ_F.
        for k in 1..p {
            q += var_f[k] * (prior.a[k] * prior.a[k] + prior.r[(k, k)]);
        }
        out.push((f, q));
    }
    Ok(out)
}

/// Filters every row of `data` (rows are time steps, columns follow
/// `spec.nodes`).
pub fn run(spec: &MdmSpec, data: &[Vec<Option<f64>>]) -> Result<Trajectory, MdmError> {
    spec.ensure_valid()?;
    if data.is_empty() {
        return Err(MdmError::EmptyData);
    }
    let mut state = FilterState::prior(spec);
    let mut states = Vec::with_capacity(data.len());
    let mut forecasts = Vec::with_capacity(data.len());
    for row in data {
        let (next, fc) = step_filter(spec, &state, row)?;
        states.push(next.clone());
        forecasts.push(fc);
        state = next;
    }
    Ok(Trajectory { states, forecasts })
}

#[cfg(test)]
mod tests {
    use super::super::{MdmNodeSpec, StepOverride};
    use super::*;

    fn single(v: f64) -> MdmSpec {
        MdmSpec::new(vec![MdmNodeSpec::new("Y", &[], v)])
    }

    fn chain() -> MdmSpec {
        MdmSpec::new(vec![
            MdmNodeSpec::new("A", &[], 1.0),
            MdmNodeSpec::new("T", &["A"], 1.0),
            MdmNodeSpec::new("M", &["T"], 1.0),
        ])
    }

    #[test]
    fn hand_computed_update() {
        let spec = single(1.0);
        let (s, fc) = step_filter(&spec, &FilterState::prior(&spec), &[Some(1.0)]).unwrap();
        assert_eq!(fc.series[0].f, 0.0);
        assert_eq!(fc.series[0].q, 2.0);
        assert!((s.m[0][0] - 0.5).abs() < 1e-15);
        assert!((s.c[0][(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_limit() {
        let spec = single(1e-12);
        let mut state = FilterState::prior(&spec);
        for _ in 0..5 {
            state = step_filter(&spec, &state, &[Some(3.0)]).unwrap().0;
        }
        assert!((state.m[0][0] - 3.0).abs() < 1e-9);
        assert!(state.c[0][(0, 0)] < 1e-11);
    }

    #[test]
    fn design_vectors() {
        let spec = chain();
        let y = [Some(4.0), Some(2.0), None];
        assert_eq!(design_vector(&spec, 1, &y, 1).unwrap().as_slice(), &[1.0, 4.0]);
        assert_eq!(design_vector(&spec, 0, &y, 1).unwrap().as_slice(), &[1.0]);
        assert_eq!(design_vector(&spec, 0, &[None, None, None], 1).unwrap().as_slice(), &[1.0]);
        assert!(matches!(
            design_vector(&spec, 2, &[None, None, None], 7),
            Err(MdmError::MissingParentObservation { t: 7, .. })
        ));
    }

    #[test]
    fn missing_observation_skips_update() {
        let spec = chain();
        let prior = FilterState::prior(&spec);
        let (s, fc) = step_filter(&spec, &prior, &[Some(1.0), None, Some(2.0)]).unwrap();
        assert_eq!(s.m[1], prior.m[1]);
        assert_eq!(fc.series[1].log_density, None);
        // M's parent T is missing: forecast substituted and flagged.
        assert!(fc.series[2].approximate);
        assert_eq!(s.m[2], prior.m[2]);
        assert!(fc.series[0].log_density.is_some());
    }

    #[test]
    fn total_is_sum_of_terms() {
        let spec = chain();
        let y = [Some(1.0), Some(2.5), Some(-0.5)];
        let fc = one_step_forecast(&spec, &FilterState::prior(&spec), &y).unwrap();
        let sum: f64 = fc.series.iter().map(|s| log_normal_pdf(s.y.unwrap(), s.f, s.q)).sum();
        assert!((fc.total_log_density - sum).abs() < 1e-12);
    }

    #[test]
    fn single_observation_run_is_prior_predictive() {
        let spec = single(2.0);
        let traj = run(&spec, &[vec![Some(0.3)]]).unwrap();
        assert_eq!(traj.forecasts.len(), 1);
        assert_eq!((traj.forecasts[0].series[0].f, traj.forecasts[0].series[0].q), (0.0, 3.0));
        assert_eq!(traj.residuals().len(), 1);
    }

    #[test]
    fn overrides_apply_at_their_time() {
        let mut spec = single(1.0);
        spec.nodes[0].overrides.insert(2, StepOverride { v: Some(9.0), ..Default::default() });
        let traj = run(&spec, &[vec![Some(0.0)], vec![Some(0.0)]]).unwrap();
        assert!((traj.forecasts[1].series[0].q - 9.5).abs() < 1e-12);
    }

    #[test]
    fn marginal_adds_parent_variance() {
        let spec = chain();
        let m = marginal_forecast(&spec, &FilterState::prior(&spec)).unwrap();
        // A: f=0, Q=2. T: E[F]=[1,0], Q = 1 + 1 + 2*(0 + 1) = 4.
        assert_eq!(m[0], (0.0, 2.0));
        assert_eq!(m[1], (0.0, 4.0));
    }
}
