//! The monotone gradient semiflow of the action.
//!
//! Integrates `ẋ = −∇W` with an embedded Runge–Kutta 5(4) pair and
//! proportional step control. The flow is smooth and non-stiff at the
//! parameter scales used here, decreases the action along trajectories, and
//! preserves the componentwise order of initial conditions strictly — which
//! is what `monotone_check` and the unstable-manifold tracer exercise.

use crate::action;
use crate::configspace::{ConfigError, Configuration, OrderRelation};
use crate::model::GeneratingModel;
use crate::stationary::{self, RefineOptions, StationaryRecord};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("initial configurations are not weakly ordered")]
    NotWeaklyOrdered,
    #[error("final time must be positive")]
    NonPositiveTime,
    #[error("step size underflow at t={0}")]
    StepFailure(f64),
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("start is not a non-degenerate index-1 stationary state")]
    NotMinimax,
    #[error("flow did not reach a stationary state within the time budget")]
    NonConvergence,
    #[error("start has gradient residual {0:.3e}, too large for tracing")]
    NotStationary(f64),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

/// Adaptive step control for the integrator.
#[derive(Debug, Clone)]
pub struct StepControl {
    /// Local error target per step (max norm).
    pub abs_tol: f64,
    /// Below this step size the integration is abandoned.
    pub min_step: f64,
    /// Upper bound on the step size.
    pub max_step: f64,
    /// `‖∇W‖∞` below which the state counts as stationary.
    pub stationary_tol: f64,
    /// Hard cap on accepted steps.
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            min_step: 1e-14,
            max_step: 10.0,
            stationary_tol: 1e-11,
            max_steps: 400_000,
        }
    }
}

/// How an integration ended.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowStatus {
    ReachedTime,
    /// Stationarity was detected; the payload is the Newton-polished limit.
    Converged(Configuration),
    StepFailure,
}

/// A time-sampled trajectory of the gradient semiflow.
#[derive(Debug, Clone)]
pub struct FlowPath {
    pub samples: Vec<(f64, Configuration)>,
    pub status: FlowStatus,
}

impl FlowPath {
    /// The polished limit if the flow converged, otherwise the last sample.
    pub fn final_config(&self) -> &Configuration {
        match &self.status {
            FlowStatus::Converged(limit) => limit,
            _ => &self.samples.last().expect("paths contain the start").1,
        }
    }

    pub fn final_time(&self) -> f64 {
        self.samples.last().expect("paths contain the start").0
    }

    /// Checks that the samples form a strictly ordered chain in the given
    /// direction. Samples closer than `gap` to the last kept one are skipped
    /// so the test is not defeated by rounding-level motion near the limit.
    pub fn is_strict_chain(&self, increasing: bool, gap: f64) -> bool {
        let want = if increasing {
            OrderRelation::LessStrict
        } else {
            OrderRelation::GreaterStrict
        };
        let mut kept = match self.samples.first() {
            Some((_, c)) => c,
            None => return false,
        };
        for (_, c) in self.samples.iter().skip(1) {
            let dist: f64 = kept
                .coords()
                .iter()
                .zip(c.coords())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if dist <= gap {
                continue;
            }
            match kept.compare(c, 0.0) {
                Ok(rel) if rel == want => kept = c,
                _ => return false,
            }
        }
        true
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rhs(model: &GeneratingModel, c: &Configuration) -> Vec<f64> {
    action::gradient(model, c).iter().map(|g| -g).collect()
}

/// Integrates the gradient flow from `start` up to time `t_final`.
///
/// Stops early with `Converged` when `‖∇W‖∞` drops below the stationary
/// tolerance; the limit is then polished with one Newton refinement.
pub fn evolve(
    model: &GeneratingModel,
    start: &Configuration,
    t_final: f64,
    ctrl: &StepControl,
) -> Result<FlowPath, FlowError> {
    if t_final <= 0.0 {
        return Err(FlowError::NonPositiveTime);
    }
    let mut t = 0.0;
    let mut current = start.clone();
    let mut samples = vec![(t, current.clone())];

    let polish = |c: &Configuration| -> Configuration {
        let opts = RefineOptions::default();
        match stationary::refine(model, c, &opts) {
            // Keep the limit on the same translate as the trajectory; the
            // refine result is unit-cell normalized.
            Ok(rec) => {
                let j = (c.coords()[0] - rec.config.coords()[0]).round() as i64;
                rec.config.translate(0, j)
            }
            Err(_) => c.clone(),
        }
    };

    if action::gradient_inf_norm(model, &current) < ctrl.stationary_tol {
        let limit = polish(&current);
        return Ok(FlowPath { samples, status: FlowStatus::Converged(limit) });
    }

    let mut h = (t_final / 100.0).min(1e-2).max(ctrl.min_step);
    let mut steps = 0;
    while t < t_final {
        let remaining = t_final - t;
        if remaining <= ctrl.min_step {
            // Within step resolution of the target; rounding can leave t a
            // hair short after the clamped final step.
            break;
        }
        if steps >= ctrl.max_steps {
            return Ok(FlowPath { samples, status: FlowStatus::StepFailure });
        }
        h = h.min(remaining).min(ctrl.max_step);
        if h < ctrl.min_step {
            return Ok(FlowPath { samples, status: FlowStatus::StepFailure });
        }

        let y0 = current.coords().to_vec();
        let n = y0.len();
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        k.push(rhs(model, &current));
        // Near an equilibrium the field shrinks; scaling the accepted local
        // error with it keeps step noise below the stationarity threshold so
        // convergence detection can actually fire.
        let field = k[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err_allowed = (ctrl.abs_tol * field.min(1.0)).max(1e-16);
        for row in &A {
            let mut y = y0.clone();
            for (a, kj) in row.iter().zip(&k) {
                if *a != 0.0 {
                    for i in 0..n {
                        y[i] += h * a * kj[i];
                    }
                }
            }
            let c = current.with_coords(y)?;
            k.push(rhs(model, &c));
        }

        let mut y5 = y0.clone();
        let mut err = 0.0f64;
        for i in 0..n {
            let mut s5 = 0.0;
            let mut s4 = 0.0;
            for j in 0..7 {
                s5 += B5[j] * k[j][i];
                s4 += B4[j] * k[j][i];
            }
            y5[i] += h * s5;
            err = err.max((h * (s5 - s4)).abs());
        }

        if err <= err_allowed {
            t += h;
            current = current.with_coords(y5)?;
            samples.push((t, current.clone()));
            steps += 1;
            if action::gradient_inf_norm(model, &current) < ctrl.stationary_tol {
                let limit = polish(&current);
                return Ok(FlowPath { samples, status: FlowStatus::Converged(limit) });
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (err_allowed / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
    }
    Ok(FlowPath { samples, status: FlowStatus::ReachedTime })
}

/// Evolves a weakly ordered pair and reports whether the endpoints are
/// strictly ordered — the testable surrogate for strict monotonicity of the
/// semiflow.
pub fn monotone_check(
    model: &GeneratingModel,
    x: &Configuration,
    y: &Configuration,
    t_final: f64,
    ctrl: &StepControl,
    tie_tol: f64,
) -> Result<bool, FlowError> {
    let rel = x.compare(y, tie_tol)?;
    if !matches!(rel, OrderRelation::LessWeak | OrderRelation::LessStrict) {
        return Err(FlowError::NotWeaklyOrdered);
    }
    let px = evolve(model, x, t_final, ctrl)?;
    let py = evolve(model, y, t_final, ctrl)?;
    if px.status == FlowStatus::StepFailure || py.status == FlowStatus::StepFailure {
        return Err(FlowError::StepFailure(px.final_time().min(py.final_time())));
    }
    // Compare the integrated states at t = T (converged paths stopped at a
    // fixed point, which the flow would not leave).
    let fx = px.final_config();
    let fy = py.final_config();
    Ok(fx.compare(fy, tie_tol)? == OrderRelation::LessStrict)
}

#[derive(Debug, Clone)]
pub struct TraceOptions {
    /// Offset along the unstable eigenvector for the two starts.
    pub offset: f64,
    /// Time budget per branch.
    pub max_time: f64,
    pub step: StepControl,
    pub refine: RefineOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self {
            offset: 1e-6,
            max_time: 1e4,
            step: StepControl::default(),
            refine: RefineOptions::default(),
        }
    }
}

/// The two branches of the one-dimensional unstable manifold of an index-1
/// state, each run to its limiting stationary state.
#[derive(Debug, Clone)]
pub struct UnstablePair {
    /// Branch started at `y − δv`; order-decreasing.
    pub descending: FlowPath,
    /// Branch started at `y + δv`; order-increasing.
    pub ascending: FlowPath,
    pub lower_limit: StationaryRecord,
    pub upper_limit: StationaryRecord,
}

/// Traces the unstable manifold of a minimaximizer to its two adjacent
/// stationary limits.
pub fn trace_unstable(
    model: &GeneratingModel,
    saddle: &Configuration,
    opts: &TraceOptions,
) -> Result<UnstablePair, TraceError> {
    let res = action::gradient_inf_norm(model, saddle);
    if res > 1e-8 {
        return Err(TraceError::NotStationary(res));
    }
    let hess = action::hessian(model, saddle);
    let eig = action::eigen_sym(&hess).map_err(|e| TraceError::Eigen(e.to_string()))?;
    let (index, degenerate) =
        action::index_from_eigenvalues(&eig.values, opts.refine.degeneracy_tol);
    if index != 1 || degenerate {
        return Err(TraceError::NotMinimax);
    }

    // Unstable direction: eigenvector of the unique negative eigenvalue.
    // The negated Hessian has nonnegative off-diagonal couplings, so this
    // vector can be taken componentwise positive; normalize its sign by the
    // sum.
    let mut v = eig.vectors[0].clone();
    if v.iter().sum::<f64>() < 0.0 {
        for vi in &mut v {
            *vi = -*vi;
        }
    }

    let branch = |sign: f64| -> Result<FlowPath, TraceError> {
        let coords: Vec<f64> = saddle
            .coords()
            .iter()
            .zip(&v)
            .map(|(x, vi)| x + sign * opts.offset * vi)
            .collect();
        let start = saddle.with_coords(coords).map_err(FlowError::from)?;
        let path = evolve(model, &start, opts.max_time, &opts.step)?;
        match path.status {
            FlowStatus::Converged(_) => Ok(path),
            _ => Err(TraceError::NonConvergence),
        }
    };

    let ascending = branch(1.0)?;
    let descending = branch(-1.0)?;
    let upper_limit = stationary::refine(model, ascending.final_config(), &opts.refine)
        .map_err(|_| TraceError::NonConvergence)?;
    let lower_limit = stationary::refine(model, descending.final_config(), &opts.refine)
        .map_err(|_| TraceError::NonConvergence)?;
    Ok(UnstablePair { descending, ascending, lower_limit, upper_limit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeneratingModel;

    fn cfg(p: i64, q: usize, coords: &[f64]) -> Configuration {
        Configuration::new(p, q, coords.to_vec()).unwrap()
    }

    #[test]
    fn stationary_start_is_fixed() {
        let m = GeneratingModel::example4();
        let c = cfg(1, 2, &[0.0, 0.5]);
        let path = evolve(&m, &c, 1.0, &StepControl::default()).unwrap();
        assert!(matches!(path.status, FlowStatus::Converged(_)));
        assert!(path.final_config().group_distance(&c) < 1e-10);
    }

    #[test]
    fn flat_model_flow_matches_closed_form() {
        // For the zero potential and (p,q) = (1,2) the pair relaxes along
        // x₀(t) = −0.1 + 0.1 e^{−4t}, x₁(t) = 0.4 − 0.1 e^{−4t}.
        let m = GeneratingModel::standard(0.0);
        let path = evolve(&m, &cfg(1, 2, &[0.0, 0.3]), 0.25, &StepControl::default()).unwrap();
        assert_eq!(path.status, FlowStatus::ReachedTime);
        let f = path.final_config();
        let e = (-1.0f64).exp();
        assert!((f.coords()[0] - (-0.1 + 0.1 * e)).abs() < 1e-8);
        assert!((f.coords()[1] - (0.4 - 0.1 * e)).abs() < 1e-8);
    }

    #[test]
    fn flat_model_flow_long_time_limit() {
        let m = GeneratingModel::standard(0.0);
        let path = evolve(&m, &cfg(1, 2, &[0.0, 0.3]), 50.0, &StepControl::default()).unwrap();
        let f = path.final_config();
        assert!((f.coords()[0] + 0.1).abs() < 1e-8);
        assert!((f.coords()[1] - 0.4).abs() < 1e-8);
    }

    #[test]
    fn action_never_increases_along_paths() {
        let m = GeneratingModel::three_harmonic(1.2);
        let path = evolve(&m, &cfg(1, 2, &[0.1, 0.8]), 5.0, &StepControl::default()).unwrap();
        let mut last = f64::INFINITY;
        for (_, c) in &path.samples {
            let w = action::action(&m, c);
            assert!(w <= last + 1e-9, "action increased along the flow");
            last = w;
        }
        assert!(path.samples.len() > 2);
    }

    #[test]
    fn monotone_pair_stays_ordered() {
        let m = GeneratingModel::standard(0.0);
        let ok = monotone_check(
            &m,
            &cfg(1, 2, &[0.0, 0.3]),
            &cfg(1, 2, &[0.0, 0.31]),
            0.5,
            &StepControl::default(),
            1e-12,
        )
        .unwrap();
        assert!(ok);

        let e4 = GeneratingModel::example4();
        let ok = monotone_check(
            &e4,
            &cfg(1, 2, &[0.0, 0.4]),
            &cfg(1, 2, &[0.05, 0.45]),
            1.0,
            &StepControl::default(),
            1e-12,
        )
        .unwrap();
        assert!(ok);
    }

    #[test]
    fn monotone_check_rejects_equal_inputs() {
        let m = GeneratingModel::standard(1.0);
        let c = cfg(1, 2, &[0.1, 0.6]);
        assert!(matches!(
            monotone_check(&m, &c, &c, 1.0, &StepControl::default(), 1e-12),
            Err(FlowError::NotWeaklyOrdered)
        ));
    }

    #[test]
    fn trace_unstable_standard_one() {
        let m = GeneratingModel::standard(1.0);
        let saddle = cfg(1, 2, &[0.0, 0.5]);
        let pair = trace_unstable(&m, &saddle, &TraceOptions::default()).unwrap();
        assert_eq!(pair.lower_limit.index, 0);
        assert_eq!(pair.upper_limit.index, 0);
        let lo = pair.descending.final_config();
        let hi = pair.ascending.final_config();
        assert_eq!(lo.compare(&saddle, 1e-9).unwrap(), OrderRelation::LessStrict);
        assert_eq!(saddle.compare(hi, 1e-9).unwrap(), OrderRelation::LessStrict);
        // Limits are symmetric about the saddle.
        for i in 0..2 {
            let mid = 0.5 * (lo.coords()[i] + hi.coords()[i]);
            assert!((mid - saddle.coords()[i]).abs() < 1e-6);
        }
        assert!(pair.ascending.is_strict_chain(true, 1e-9));
        assert!(pair.descending.is_strict_chain(false, 1e-9));
    }

    #[test]
    fn trace_unstable_asymmetric_saddle() {
        // One of the asymmetric index-1 states of the three-harmonic map
        // with fixed amplitudes; samples must stay strictly ordered and the
        // limits must be the adjacent minimizers.
        let m = GeneratingModel::example4();
        let rec = crate::stationary::refine(
            &m,
            &Configuration::new(1, 2, vec![0.1, 0.4]).unwrap(),
            &crate::stationary::RefineOptions::default(),
        )
        .unwrap();
        assert_eq!(rec.index, 1);
        let pair = trace_unstable(&m, &rec.config, &TraceOptions::default()).unwrap();
        assert!(pair.ascending.is_strict_chain(true, 1e-9));
        assert!(pair.descending.is_strict_chain(false, 1e-9));
        assert_eq!(pair.lower_limit.index, 0);
        assert_eq!(pair.upper_limit.index, 0);
    }

    #[test]
    fn trace_rejects_non_saddles() {
        let m = GeneratingModel::example4();
        // Index-2 state.
        assert!(matches!(
            trace_unstable(&m, &cfg(1, 2, &[0.0, 0.5]), &TraceOptions::default()),
            Err(TraceError::NotMinimax)
        ));
        // Not stationary at all.
        assert!(matches!(
            trace_unstable(&m, &cfg(1, 2, &[0.1, 0.9]), &TraceOptions::default()),
            Err(TraceError::NotStationary(_))
        ));
    }

    #[test]
    fn flow_commutes_with_translations() {
        let m = GeneratingModel::three_harmonic(1.2);
        let c = cfg(1, 2, &[0.05, 0.62]);
        let ctrl = StepControl::default();
        let direct = evolve(&m, &c.translate(1, 2), 1.0, &ctrl).unwrap();
        let translated = evolve(&m, &c, 1.0, &ctrl).unwrap().final_config().translate(1, 2);
        assert!(direct.final_config().group_distance(&translated) < 1e-8);
        let d: f64 = direct
            .final_config()
            .coords()
            .iter()
            .zip(translated.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(d < 1e-8);
    }
}
