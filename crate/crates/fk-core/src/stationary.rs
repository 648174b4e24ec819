//! Finding, classifying and locating stationary (p,q)-configurations.
//!
//! `refine` runs damped Newton on the action gradient, `enumerate` multistarts
//! it over a seed lattice and returns one record per stationary state in the
//! fundamental domain `x₀ ∈ [0,1)` (index rotations count as distinct states;
//! overall integer shifts do not). `classify` assigns extremal and order
//! types, `locate` places each state relative to the minimizer set, and
//! `audit` checks the location laws that the order structure imposes.

use crate::action::{self, index_from_eigenvalues};
use crate::configspace::{
    in_interval, on_cone_boundary, ConfigError, Configuration, OrderRelation,
};
use crate::model::GeneratingModel;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("Newton iteration did not reach the residual target")]
    NoConvergence,
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("eigensolver failure: {0}")]
    Eigen(String),
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("no index-0 record found; cannot build a minimizer context")]
    NoMinimizerFound,
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
}

#[derive(Debug, Error)]
pub enum LocateError {
    #[error("minimizer context lacks a bracketing pair around x0={0}")]
    NoBracket(f64),
    #[error("minimizer translates are not totally ordered near x0={0}")]
    ChainBroken(f64),
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
}

/// Extremal type of a stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExtremalClass {
    #[serde(rename = "GLOBAL_MIN")]
    GlobalMin,
    #[serde(rename = "LOCAL_MIN")]
    LocalMin,
    #[serde(rename = "MINIMAX")]
    Minimax,
    #[serde(rename = "INDEX_K")]
    IndexK(usize),
}

/// Where a state sits relative to the minimizer/minimaximizer structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    #[serde(rename = "AT_MINIMIZER")]
    AtMinimizer,
    #[serde(rename = "AT_MINIMAX")]
    AtMinimax,
    #[serde(rename = "ORDERED_GAP")]
    OrderedGap,
    #[serde(rename = "UNORDERED_REGION")]
    UnorderedRegion,
    #[serde(rename = "BOUNDARY_VIOLATION")]
    BoundaryViolation,
    #[serde(rename = "FORBIDDEN_VIOLATION")]
    ForbiddenViolation,
    #[serde(rename = "DEGENERATE_UNCLASSIFIED")]
    DegenerateUnclassified,
}

/// A refined stationary state with its Morse data and, once classified,
/// its extremal/order/location labels.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryRecord {
    /// Fundamental-domain representative (x₀ shifted into the unit cell).
    pub config: Configuration,
    /// Representative modulo the full translation group; identifies the
    /// translation class across rotations.
    pub canonical: Configuration,
    pub grad_residual: f64,
    pub eigenvalues: Vec<f64>,
    pub index: usize,
    pub degenerate: bool,
    pub action: f64,
    pub extremal_class: Option<ExtremalClass>,
    pub cyclically_ordered: Option<bool>,
    pub ordered_wrt_minimizers: Option<bool>,
    pub region: Option<RegionLabel>,
}

impl StationaryRecord {
    /// Builds an unclassified record directly from a configuration, without
    /// refinement. Meant for fixtures and negative controls in tests.
    pub fn synthetic(model: &GeneratingModel, config: Configuration, degeneracy_tol: f64) -> Self {
        let config = config.shift_to_unit_cell();
        let eig = action::eigen_sym(&action::hessian(model, &config))
            .expect("hessian is symmetric by construction");
        let (index, degenerate) = index_from_eigenvalues(&eig.values, degeneracy_tol);
        StationaryRecord {
            canonical: config.canonicalize(),
            grad_residual: action::gradient_inf_norm(model, &config),
            eigenvalues: eig.values,
            index,
            degenerate,
            action: action::action(model, &config),
            extremal_class: None,
            cyclically_ordered: None,
            ordered_wrt_minimizers: None,
            region: None,
            config,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub max_halvings: u32,
    pub degeneracy_tol: f64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-12, max_iter: 100, max_halvings: 30, degeneracy_tol: 1e-9 }
    }
}

/// One damped Newton step direction from the eigendecomposition of the
/// Hessian; eigenvalues below the drop threshold are treated as zero, which
/// turns the solve into the least-squares step on singular Hessians.
fn newton_direction(
    model: &GeneratingModel,
    c: &Configuration,
    grad: &[f64],
) -> Result<Vec<f64>, RefineError> {
    let hess = action::hessian(model, c);
    let eig = action::eigen_sym(&hess).map_err(|e| RefineError::Eigen(e.to_string()))?;
    let scale = eig.values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let drop = 1e-12 * scale;
    let n = grad.len();
    let mut step = vec![0.0; n];
    for (lambda, vect) in eig.values.iter().zip(&eig.vectors) {
        if lambda.abs() <= drop {
            continue;
        }
        let coeff: f64 = grad.iter().zip(vect).map(|(g, v)| g * v).sum();
        let f = -coeff / lambda;
        for (s, v) in step.iter_mut().zip(vect) {
            *s += f * v;
        }
    }
    Ok(step)
}

/// Damped Newton refinement of a seed toward a zero of the action gradient.
///
/// Success requires `‖∇W‖∞ < grad_tol`; the result is normalized to the
/// fundamental domain and carries eigenvalues, Morse index and action.
pub fn refine(
    model: &GeneratingModel,
    seed: &Configuration,
    opts: &RefineOptions,
) -> Result<StationaryRecord, RefineError> {
    let mut x: Vec<f64> = seed.coords().to_vec();
    let mut current = seed.clone();
    let mut res = action::gradient_inf_norm(model, &current);

    let mut iter = 0;
    while res >= opts.grad_tol {
        if iter >= opts.max_iter {
            return Err(RefineError::NoConvergence);
        }
        iter += 1;
        let grad = action::gradient(model, &current);
        let step = newton_direction(model, &current, &grad)?;
        if step.iter().all(|s| s.abs() < 1e-300) {
            return Err(RefineError::NoConvergence);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> =
                x.iter().zip(&step).map(|(xi, si)| xi + alpha * si).collect();
            let cand = current.with_coords(trial.clone())?;
            let cand_res = action::gradient_inf_norm(model, &cand);
            if cand_res < res {
                x = trial;
                current = cand;
                res = cand_res;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(RefineError::NoConvergence);
        }
    }

    // Normalize into the unit cell; the periodic terms shift by whole
    // periods so the residual only moves at rounding level, but re-polish
    // if it landed above the target.
    let mut normalized = current.shift_to_unit_cell();
    let mut final_res = action::gradient_inf_norm(model, &normalized);
    for _ in 0..3 {
        if final_res < opts.grad_tol {
            break;
        }
        let grad = action::gradient(model, &normalized);
        let step = newton_direction(model, &normalized, &grad)?;
        let coords: Vec<f64> =
            normalized.coords().iter().zip(&step).map(|(xi, si)| xi + si).collect();
        normalized = normalized.with_coords(coords)?;
        final_res = action::gradient_inf_norm(model, &normalized);
    }
    if final_res >= opts.grad_tol {
        return Err(RefineError::NoConvergence);
    }

    let eig = action::eigen_sym(&action::hessian(model, &normalized))
        .map_err(|e| RefineError::Eigen(e.to_string()))?;
    let (index, degenerate) = index_from_eigenvalues(&eig.values, opts.degeneracy_tol);
    Ok(StationaryRecord {
        canonical: normalized.canonicalize(),
        grad_residual: final_res,
        eigenvalues: eig.values,
        index,
        degenerate,
        action: action::action(model, &normalized),
        extremal_class: None,
        cyclically_ordered: None,
        ordered_wrt_minimizers: None,
        region: None,
        config: normalized,
    })
}

#[derive(Debug, Clone)]
pub struct EnumerateOptions {
    pub refine: RefineOptions,
    /// States closer than this modulo integer shifts are merged.
    pub dedup_tol: f64,
    /// Offsets applied to each coordinate after the uniform p/q ramp.
    pub perturbations: Vec<f64>,
    /// Cap on perturbation combinations per base seed.
    pub max_combos: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        Self {
            refine: RefineOptions::default(),
            dedup_tol: 1e-8,
            perturbations: vec![-0.25, 0.0, 0.25],
            max_combos: 243,
        }
    }
}

fn seed_lattice(p: i64, q: usize, density: usize, opts: &EnumerateOptions) -> Vec<Configuration> {
    let rotation = p as f64 / q as f64;
    let n_pert = opts.perturbations.len().max(1);
    let combos: usize = n_pert
        .checked_pow((q - 1) as u32)
        .unwrap_or(usize::MAX)
        .min(opts.max_combos);
    let mut seeds = Vec::with_capacity(density * combos);
    for g in 0..density {
        let x0 = g as f64 / density as f64;
        for combo in 0..combos {
            let mut sel = combo;
            let mut coords = Vec::with_capacity(q);
            coords.push(x0);
            for k in 1..q {
                let pert = if opts.perturbations.is_empty() {
                    0.0
                } else {
                    opts.perturbations[sel % n_pert]
                };
                sel /= n_pert;
                coords.push(x0 + k as f64 * rotation + pert);
            }
            if let Ok(c) = Configuration::new(p, q, coords) {
                seeds.push(c);
            }
        }
    }
    seeds
}

/// Multistart search for every stationary state in the fundamental domain.
///
/// Seeds are refined in parallel; the merge (normalize, sort, dedup) is
/// deterministic, so the output does not depend on scheduling.
pub fn enumerate(
    model: &GeneratingModel,
    p: i64,
    q: usize,
    density: usize,
    opts: &EnumerateOptions,
) -> Vec<StationaryRecord> {
    let seeds = seed_lattice(p, q, density, opts);
    let mut found: Vec<StationaryRecord> = seeds
        .par_iter()
        .filter_map(|seed| refine(model, seed, &opts.refine).ok())
        .collect();

    found.sort_by(|a, b| lex_order(a.config.coords(), b.config.coords()));
    let mut kept: Vec<StationaryRecord> = Vec::new();
    for rec in found {
        let dup = kept
            .iter()
            .any(|k| k.config.shift_distance(&rec.config) <= opts.dedup_tol);
        if !dup {
            kept.push(rec);
        }
    }
    kept.sort_by(|a, b| {
        a.config.coords()[0]
            .partial_cmp(&b.config.coords()[0])
            .expect("finite coordinates")
            .then_with(|| lex_order(a.config.coords(), b.config.coords()))
    });
    kept
}

fn lex_order(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("finite coordinates") {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

#[derive(Debug, Clone)]
pub struct ClassifyOptions {
    /// Tie tolerance for order comparisons.
    pub order_tol: f64,
    /// Action tie tolerance admitting several translation classes into the
    /// global-minimizer set.
    pub action_tie_tol: f64,
    /// Group distance below which a state is identified with a context
    /// anchor.
    pub match_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self { order_tol: 1e-9, action_tie_tol: 1e-9, match_tol: 1e-7 }
    }
}

/// The minimizer and minimaximizer anchors of one model, with translate
/// generation for bracketing queries.
#[derive(Debug, Clone)]
pub struct MinimizerContext {
    minimizers: Vec<StationaryRecord>,
    minimaximizers: Vec<StationaryRecord>,
    /// Every ordered index-0 state, global or local: the sinks of the
    /// gradient flow that an ordered heteroclinic chain can end at.
    ordered_sinks: Vec<StationaryRecord>,
}

impl MinimizerContext {
    pub fn minimizers(&self) -> &[StationaryRecord] {
        &self.minimizers
    }

    pub fn minimaximizers(&self) -> &[StationaryRecord] {
        &self.minimaximizers
    }

    fn translates_in(base: &[StationaryRecord], lo: f64, hi: f64) -> Vec<Configuration> {
        let mut out = Vec::new();
        for rec in base {
            let x0 = rec.config.coords()[0];
            let j_lo = (lo - x0).ceil() as i64;
            let j_hi = (hi - x0).floor() as i64;
            for j in j_lo..=j_hi {
                out.push(rec.config.translate(0, j));
            }
        }
        out.sort_by(|a, b| lex_order(a.coords(), b.coords()));
        out
    }

    /// Minimizer translates with `x₀ ∈ [lo, hi]`, sorted by `x₀`.
    pub fn minimizer_translates(&self, lo: f64, hi: f64) -> Vec<Configuration> {
        Self::translates_in(&self.minimizers, lo, hi)
    }

    pub fn minimax_translates(&self, lo: f64, hi: f64) -> Vec<Configuration> {
        Self::translates_in(&self.minimaximizers, lo, hi)
    }

    pub fn sink_translates(&self, lo: f64, hi: f64) -> Vec<Configuration> {
        Self::translates_in(&self.ordered_sinks, lo, hi)
    }

    /// All extremal anchors (minimizers and minimaximizers) near a point.
    pub fn extremal_translates(&self, lo: f64, hi: f64) -> Vec<Configuration> {
        let mut out = self.minimizer_translates(lo, hi);
        out.extend(self.minimax_translates(lo, hi));
        out
    }

    pub fn is_minimizer(&self, c: &Configuration, match_tol: f64) -> bool {
        self.minimizers.iter().any(|m| m.config.group_distance(c) <= match_tol)
    }

    pub fn is_minimaximizer(&self, c: &Configuration, match_tol: f64) -> bool {
        self.minimaximizers.iter().any(|m| m.config.group_distance(c) <= match_tol)
    }

    /// True iff some coordinate of `z` coincides (mod 1, within `tol`) with
    /// some minimizer coordinate. For a state distinct from the minimizers a
    /// true result is a certificate of unorderedness.
    pub fn shares_minimizer_line(&self, z: &Configuration, tol: f64) -> bool {
        let mut lines: Vec<f64> = Vec::new();
        for m in &self.minimizers {
            for &c in m.config.coords() {
                lines.push(c);
            }
        }
        z.coords().iter().any(|&zc| {
            lines.iter().any(|&lc| {
                let d = (zc - lc).rem_euclid(1.0);
                d.min(1.0 - d) <= tol
            })
        })
    }
}

/// Assigns extremal classes and order flags, and builds the minimizer
/// context. Global minimizers are the index-0 records whose action ties the
/// least one within `action_tie_tol`.
pub fn classify(
    mut records: Vec<StationaryRecord>,
    opts: &ClassifyOptions,
) -> Result<(Vec<StationaryRecord>, MinimizerContext), ClassifyError> {
    let min_action = records
        .iter()
        .filter(|r| r.index == 0)
        .map(|r| r.action)
        .fold(f64::INFINITY, f64::min);
    if !min_action.is_finite() {
        return Err(ClassifyError::NoMinimizerFound);
    }

    for rec in &mut records {
        rec.extremal_class = Some(match rec.index {
            0 if rec.action <= min_action + opts.action_tie_tol => ExtremalClass::GlobalMin,
            0 => ExtremalClass::LocalMin,
            1 => ExtremalClass::Minimax,
            k => ExtremalClass::IndexK(k),
        });
        rec.cyclically_ordered = Some(rec.config.is_cyclically_ordered(opts.order_tol));
    }

    // Context anchors: the minimaximizer list holds only the cyclically
    // ordered index-1 states — those are the ones interlacing the
    // minimizers. Unordered saddles keep the MINIMAX extremal class on
    // their record but play no anchoring role.
    let ctx = MinimizerContext {
        minimizers: records
            .iter()
            .filter(|r| r.extremal_class == Some(ExtremalClass::GlobalMin))
            .cloned()
            .collect(),
        minimaximizers: records
            .iter()
            .filter(|r| {
                r.extremal_class == Some(ExtremalClass::Minimax)
                    && r.cyclically_ordered == Some(true)
            })
            .cloned()
            .collect(),
        ordered_sinks: records
            .iter()
            .filter(|r| r.index == 0 && r.cyclically_ordered == Some(true))
            .cloned()
            .collect(),
    };

    // Ordered with respect to the minimizer set: comparable with every
    // minimizer translate near enough that its interval could contain the
    // state.
    for rec in &mut records {
        let z = &rec.config;
        let z0 = z.coords()[0];
        let w = z.p().unsigned_abs() as f64 + 1.0;
        let mut ordered = true;
        for t in ctx.minimizer_translates(z0 - w, z0 + w) {
            if !z.compare(&t, opts.order_tol)?.is_comparable() {
                ordered = false;
                break;
            }
        }
        rec.ordered_wrt_minimizers = Some(ordered);
    }
    Ok((records, ctx))
}

/// True iff the unstable branches of the saddle run to the two given sinks.
/// This is the hypothesis under which the closed intervals [s, y] and
/// [y, s'] exclude other stationary states; an off-chain saddle can connect
/// elsewhere, in which case its intervals forbid nothing.
fn saddle_connects(
    model: &GeneratingModel,
    saddle: &Configuration,
    s_lo: &Configuration,
    s_hi: &Configuration,
) -> bool {
    let opts = crate::flow::TraceOptions::default();
    match crate::flow::trace_unstable(model, saddle, &opts) {
        Ok(pair) => {
            pair.lower_limit.config.shift_distance(s_lo) <= 1e-6
                && pair.upper_limit.config.shift_distance(s_hi) <= 1e-6
        }
        Err(_) => false,
    }
}

/// Places one record relative to the minimizer/minimaximizer structure.
pub fn locate(
    model: &GeneratingModel,
    record: &StationaryRecord,
    ctx: &MinimizerContext,
    opts: &ClassifyOptions,
) -> Result<RegionLabel, LocateError> {
    if record.degenerate {
        return Ok(RegionLabel::DegenerateUnclassified);
    }
    let z = &record.config;
    let z0 = z.coords()[0];
    if ctx.is_minimizer(z, opts.match_tol) {
        return Ok(RegionLabel::AtMinimizer);
    }
    if ctx.is_minimaximizer(z, opts.match_tol) {
        return Ok(RegionLabel::AtMinimax);
    }

    // A distinct stationary state on a cone boundary of an extremal state
    // would contradict the strict monotonicity of the gradient flow.
    let w = z.p().unsigned_abs() as f64 + 1.0;
    for anchor in ctx.extremal_translates(z0 - w, z0 + w) {
        if on_cone_boundary(z, &anchor, opts.order_tol)? {
            return Ok(RegionLabel::BoundaryViolation);
        }
    }

    // Bracketing pair of consecutive minimizer translates.
    let chain = ctx.minimizer_translates(z0 - w, z0 + w);
    if chain.len() < 2 {
        return Err(LocateError::NoBracket(z0));
    }
    for pair in chain.windows(2) {
        let ends = pair[0].compare(&pair[1], opts.order_tol)?;
        if ends != OrderRelation::LessStrict {
            return Err(LocateError::ChainBroken(z0));
        }
    }
    let hi_idx = chain
        .iter()
        .position(|c| c.coords()[0] > z0 + opts.order_tol)
        .ok_or(LocateError::NoBracket(z0))?;
    if hi_idx == 0 {
        return Err(LocateError::NoBracket(z0));
    }
    let lower = &chain[hi_idx - 1];
    let upper = &chain[hi_idx];

    if (lower.coords()[0] - z0).abs() <= opts.order_tol {
        // z sits on a minimizer's vertical line without being that
        // minimizer; it cannot be ordered (the boundary case was already
        // caught above).
        return Ok(RegionLabel::UnorderedRegion);
    }

    let rel_lo = lower.compare(z, opts.order_tol)?;
    let rel_hi = z.compare(upper, opts.order_tol)?;
    if !rel_lo.is_comparable() || !rel_hi.is_comparable() {
        return Ok(RegionLabel::UnorderedRegion);
    }
    if rel_lo == OrderRelation::LessStrict && rel_hi == OrderRelation::LessStrict {
        // Strictly inside [[lower, upper]]. Forbidden closed intervals hang
        // off every minimaximizer bracketed between consecutive sinks: the
        // saddle's unstable branches run to the adjacent sinks, so with
        // local minima in the gap the exclusion applies per sub-gap. If the
        // sinks in the gap are not totally ordered no ordered heteroclinic
        // chain exists and the exclusion gives no constraint.
        let x0_lo = lower.coords()[0];
        let x0_hi = upper.coords()[0];
        let sinks = ctx.sink_translates(x0_lo, x0_hi);
        let mut chain_ordered = true;
        for pair in sinks.windows(2) {
            if pair[0].compare(&pair[1], opts.order_tol)? != OrderRelation::LessStrict {
                chain_ordered = false;
                break;
            }
        }
        if chain_ordered {
            let near = |a: &Configuration, b: &Configuration| -> bool {
                a.coords()
                    .iter()
                    .zip(b.coords())
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0f64, f64::max)
                    <= opts.match_tol
            };
            for pair in sinks.windows(2) {
                let (s_lo, s_hi) = (&pair[0], &pair[1]);
                if near(z, s_lo) || near(z, s_hi) {
                    continue;
                }
                for y in ctx.minimax_translates(s_lo.coords()[0], s_hi.coords()[0]) {
                    if s_lo.compare(&y, opts.order_tol)? != OrderRelation::LessStrict
                        || y.compare(s_hi, opts.order_tol)? != OrderRelation::LessStrict
                        || near(z, &y)
                    {
                        continue;
                    }
                    if (in_interval(z, s_lo, &y, true, opts.order_tol)?
                        || in_interval(z, &y, s_hi, true, opts.order_tol)?)
                        && saddle_connects(model, &y, s_lo, s_hi)
                    {
                        return Ok(RegionLabel::ForbiddenViolation);
                    }
                }
            }
        }
        return Ok(RegionLabel::OrderedGap);
    }
    // Comparable but with a tie: that is a cone boundary of the bracketing
    // minimizer and was caught above; anything else left is unordered.
    Ok(RegionLabel::UnorderedRegion)
}

/// One named check of the location audit.
#[derive(Debug, Clone, Serialize)]
pub struct AuditCheck {
    pub name: String,
    pub pass: bool,
    pub offenders: Vec<AuditOffender>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditOffender {
    pub config: Configuration,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub all_pass: bool,
    pub checks: Vec<AuditCheck>,
}

/// Audits the non-degenerate record set against the location laws:
/// no state on an extremal cone boundary, none inside a forbidden closed
/// interval, every state in a minimizer interval cyclically ordered and
/// every cyclically unordered state incomparable with some minimizer, and
/// states on a minimizer's vertical line never comparable with the whole
/// minimizer set.
pub fn audit(
    records: &[StationaryRecord],
    ctx: &MinimizerContext,
    model: &GeneratingModel,
    opts: &ClassifyOptions,
) -> AuditReport {
    let mut boundary = Vec::new();
    let mut forbidden = Vec::new();
    let mut order_consistency = Vec::new();
    let mut shared_line = Vec::new();

    for rec in records.iter().filter(|r| !r.degenerate) {
        let label = match rec.region {
            Some(l) => Ok(l),
            None => locate(model, rec, ctx, opts),
        };
        let label = match label {
            Ok(l) => l,
            Err(e) => {
                boundary.push(AuditOffender {
                    config: rec.config.clone(),
                    detail: format!("locate failed: {e}"),
                });
                continue;
            }
        };
        match label {
            RegionLabel::BoundaryViolation => boundary.push(AuditOffender {
                config: rec.config.clone(),
                detail: "stationary state on an extremal cone boundary".into(),
            }),
            RegionLabel::ForbiddenViolation => forbidden.push(AuditOffender {
                config: rec.config.clone(),
                detail: "stationary state inside a forbidden closed interval".into(),
            }),
            _ => {}
        }

        let ordered = rec
            .cyclically_ordered
            .unwrap_or_else(|| rec.config.is_cyclically_ordered(opts.order_tol));
        let ordered_wrt_m = rec.ordered_wrt_minimizers.unwrap_or(true);
        let inside_gap = matches!(
            label,
            RegionLabel::AtMinimizer | RegionLabel::AtMinimax | RegionLabel::OrderedGap
        );
        if inside_gap && !ordered {
            order_consistency.push(AuditOffender {
                config: rec.config.clone(),
                detail: format!("state located {label:?} but not cyclically ordered"),
            });
        }
        // A state that fails cyclic order must be incomparable with some
        // minimizer and sit outside every minimizer interval. (The converse
        // does not hold: an ordered state can stick out of [x, x'] sideways
        // while staying comparable with all of its own translates.)
        if !ordered && (label != RegionLabel::UnorderedRegion || ordered_wrt_m) {
            order_consistency.push(AuditOffender {
                config: rec.config.clone(),
                detail: format!(
                    "unordered state located {label:?}, ordered_wrt_minimizers {ordered_wrt_m}"
                ),
            });
        }

        if !ctx.is_minimizer(&rec.config, opts.match_tol)
            && ctx.shares_minimizer_line(&rec.config, opts.order_tol)
            && ordered_wrt_m
        {
            shared_line.push(AuditOffender {
                config: rec.config.clone(),
                detail: "state on a minimizer's vertical line is comparable with every minimizer"
                    .into(),
            });
        }
    }

    let checks = vec![
        AuditCheck {
            name: "cone_boundary_exclusion".into(),
            pass: boundary.is_empty(),
            offenders: boundary,
        },
        AuditCheck {
            name: "forbidden_interval_exclusion".into(),
            pass: forbidden.is_empty(),
            offenders: forbidden,
        },
        AuditCheck {
            name: "interval_order_consistency".into(),
            pass: order_consistency.is_empty(),
            offenders: order_consistency,
        },
        AuditCheck {
            name: "shared_line_unordered".into(),
            pass: shared_line.is_empty(),
            offenders: shared_line,
        },
    ];
    AuditReport { all_pass: checks.iter().all(|c| c.pass), checks }
}

/// Options for the full enumerate → classify → locate → audit pipeline.
#[derive(Debug, Clone, Default)]
pub struct AnalysisOptions {
    pub enumerate: EnumerateOptions,
    pub classify: ClassifyOptions,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub records: Vec<StationaryRecord>,
    pub context: MinimizerContext,
    pub report: AuditReport,
}

/// Runs the whole stationary-state pipeline for one model.
pub fn analyze(
    model: &GeneratingModel,
    p: i64,
    q: usize,
    density: usize,
    opts: &AnalysisOptions,
) -> Result<Analysis, ClassifyError> {
    let records = enumerate(model, p, q, density, &opts.enumerate);
    let (mut records, context) = classify(records, &opts.classify)?;
    for rec in &mut records {
        rec.region = locate(model, rec, &context, &opts.classify).ok();
    }
    let report = audit(&records, &context, model, &opts.classify);
    Ok(Analysis { records, context, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GeneratingModel;

    fn cfg(p: i64, q: usize, coords: &[f64]) -> Configuration {
        Configuration::new(p, q, coords.to_vec()).unwrap()
    }

    #[test]
    fn refine_standard_one() {
        let m = GeneratingModel::standard(1.0);
        let rec = refine(&m, &cfg(1, 2, &[0.05, 0.45]), &RefineOptions::default()).unwrap();
        assert!(rec.grad_residual < 1e-12);
        assert!(rec.config.group_distance(&cfg(1, 2, &[0.0, 0.5])) < 1e-9);
        assert_eq!(rec.index, 1);
        assert!(!rec.degenerate);
    }

    #[test]
    fn refine_example4_exact_state() {
        let m = GeneratingModel::example4();
        let rec = refine(&m, &cfg(1, 2, &[0.01, 0.49]), &RefineOptions::default()).unwrap();
        assert!(rec.grad_residual < 1e-12);
        assert!(rec.config.group_distance(&cfg(1, 2, &[0.0, 0.5])) < 1e-9);
        assert_eq!(rec.index, 2);
    }

    #[test]
    fn refine_flat_model_hits_degenerate_family() {
        let m = GeneratingModel::standard(0.0);
        let rec = refine(&m, &cfg(1, 2, &[0.13, 0.77]), &RefineOptions::default()).unwrap();
        assert!(rec.degenerate);
        // Uniform spacing: gaps of 1/2.
        let gap = rec.config.extend(1) - rec.config.extend(0);
        assert!((gap - 0.5).abs() < 1e-10);
    }

    #[test]
    fn refine_is_idempotent_on_records() {
        let m = GeneratingModel::three_harmonic(1.2);
        let opts = RefineOptions::default();
        for rec in enumerate(&m, 1, 2, 16, &EnumerateOptions::default()) {
            let again = refine(&m, &rec.config, &opts).unwrap();
            assert!(again.config.group_distance(&rec.config) < 1e-10);
        }
    }

    #[test]
    fn enumerate_standard_one_finds_the_four_states() {
        let m = GeneratingModel::standard(1.0);
        let recs = enumerate(&m, 1, 2, 16, &EnumerateOptions::default());
        assert_eq!(recs.len(), 4);
        assert!(recs
            .iter()
            .any(|r| r.config.group_distance(&cfg(1, 2, &[0.0, 0.5])) < 1e-9 && r.index == 1));
        let n_min = recs.iter().filter(|r| r.index == 0).count();
        assert_eq!(n_min, 2);
    }

    #[test]
    fn classify_and_locate_example4() {
        let m = GeneratingModel::example4();
        let a = analyze(&m, 1, 2, 32, &AnalysisOptions::default()).unwrap();
        assert!(a.report.all_pass);
        let z = a
            .records
            .iter()
            .find(|r| r.config.group_distance(&cfg(1, 2, &[0.0, 0.5])) < 1e-9)
            .expect("the (0, 0.5) state is found");
        assert_eq!(z.index, 2);
        assert_eq!(z.extremal_class, Some(ExtremalClass::IndexK(2)));
        assert_eq!(z.cyclically_ordered, Some(true));
        assert_eq!(z.ordered_wrt_minimizers, Some(true));
        assert_eq!(z.region, Some(RegionLabel::OrderedGap));
        assert_eq!(a.context.minimizers().len(), 2);
        assert_eq!(a.context.minimaximizers().len(), 4);
    }

    #[test]
    fn unordered_states_of_strong_standard_map() {
        let m = GeneratingModel::standard(12.0);
        let a = analyze(&m, 1, 2, 64, &AnalysisOptions::default()).unwrap();
        assert!(a.report.all_pass);
        let unordered: Vec<_> = a
            .records
            .iter()
            .filter(|r| r.cyclically_ordered == Some(false))
            .collect();
        assert!(unordered.len() >= 2, "found {}", unordered.len());
        for rec in unordered {
            assert_eq!(rec.ordered_wrt_minimizers, Some(false));
            assert_eq!(rec.region, Some(RegionLabel::UnorderedRegion));
        }
    }

    #[test]
    fn synthetic_boundary_record_fails_audit() {
        let m = GeneratingModel::standard(1.0);
        let a = analyze(&m, 1, 2, 16, &AnalysisOptions::default()).unwrap();
        let minimizer = a.context.minimizers()[0].config.clone();
        let mut coords: Vec<f64> = minimizer.coords().to_vec();
        coords[1] += 0.05; // first coordinate tied, second strictly above
        let fake = StationaryRecord::synthetic(&m, minimizer.with_coords(coords).unwrap(), 1e-9);

        let mut records = a.records.clone();
        records.push(fake);
        let report = audit(&records, &a.context, &m, &ClassifyOptions::default());
        assert!(!report.all_pass);
        let check = report
            .checks
            .iter()
            .find(|c| c.name == "cone_boundary_exclusion")
            .unwrap();
        assert!(!check.pass);
        assert_eq!(check.offenders.len(), 1);
    }

    #[test]
    fn locate_labels_anchors() {
        let m = GeneratingModel::three_harmonic(1.2);
        let a = analyze(&m, 1, 2, 32, &AnalysisOptions::default()).unwrap();
        for rec in &a.records {
            match rec.extremal_class {
                Some(ExtremalClass::GlobalMin) => {
                    assert_eq!(rec.region, Some(RegionLabel::AtMinimizer))
                }
                Some(ExtremalClass::Minimax) => {
                    assert_eq!(rec.region, Some(RegionLabel::AtMinimax))
                }
                _ => {}
            }
        }
    }

    /// Independent completeness oracle for q = 2: scan a dense grid of the
    /// gradient norm over the fundamental strip, refine every grid-local
    /// minimum, and compare the deduplicated set against enumerate().
    fn dense_grid_states(model: &GeneratingModel, n: usize) -> Vec<Configuration> {
        let norm = |x0: f64, u: f64| -> f64 {
            let c = cfg(1, 2, &[x0, x0 + u]);
            action::gradient_inf_norm(model, &c)
        };
        let (u_lo, u_hi) = (-1.5, 2.5);
        let mut found: Vec<Configuration> = Vec::new();
        for i in 0..n {
            let x0 = i as f64 / n as f64;
            for j in 0..=(4 * n) {
                let u = u_lo + (u_hi - u_lo) * j as f64 / (4 * n) as f64;
                let here = norm(x0, u);
                let h = 1.0 / n as f64;
                let neighbors = [
                    norm(x0 - h, u),
                    norm(x0 + h, u),
                    norm(x0, u - h),
                    norm(x0, u + h),
                ];
                if neighbors.iter().all(|&v| here <= v) {
                    if let Ok(rec) =
                        refine(model, &cfg(1, 2, &[x0, x0 + u]), &RefineOptions::default())
                    {
                        let dup = found
                            .iter()
                            .any(|k| k.shift_distance(&rec.config) <= 1e-8);
                        if !dup {
                            found.push(rec.config);
                        }
                    }
                }
            }
        }
        found
    }

    #[test]
    fn enumerate_matches_dense_grid_scan() {
        for (name, m, density) in [
            ("standard(12)", GeneratingModel::standard(12.0), 64),
            ("example4", GeneratingModel::example4(), 32),
            ("threeharmonic(1.2)", GeneratingModel::three_harmonic(1.2), 32),
        ] {
            let enumerated = enumerate(&m, 1, 2, density, &EnumerateOptions::default());
            let scanned = dense_grid_states(&m, 60);
            for c in &scanned {
                let hit = enumerated
                    .iter()
                    .any(|r| r.config.shift_distance(c) <= 1e-7);
                assert!(hit, "{name}: enumerate misses {:?}", c.coords());
            }
            for r in &enumerated {
                let hit = scanned.iter().any(|c| c.shift_distance(&r.config) <= 1e-7);
                assert!(hit, "{name}: grid scan misses {:?}", r.config.coords());
            }
        }
    }

    #[test]
    fn no_minimizer_error() {
        // Only an index-1 record: classification cannot anchor a context.
        let m = GeneratingModel::standard(1.0);
        let rec = refine(&m, &cfg(1, 2, &[0.01, 0.51]), &RefineOptions::default()).unwrap();
        assert!(matches!(
            classify(vec![rec], &ClassifyOptions::default()),
            Err(ClassifyError::NoMinimizerFound)
        ));
    }
}
