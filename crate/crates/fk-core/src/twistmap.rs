//! The induced area-preserving twist map of the cylinder.
//!
//! For the quadratic-coupling family the map is explicit:
//! `x' = x + y + U′(x)`, `y' = y + U′(x)`, which inverts the implicit
//! generating relations `y = −h₁(x, x')`, `y' = h₂(x, x')` exactly.
//! Stationary configurations correspond to (p,q)-periodic orbits; this
//! module builds those orbits, measures their residues, finds symmetric
//! orbits on the reversor fixed lines, and sweeps a model family in ε to
//! detect the birth of asymmetric orbit pairs.

use crate::action;
use crate::configspace::Configuration;
use crate::model::GeneratingModel;
use crate::stationary::{
    self, AnalysisOptions, MinimizerContext, StationaryRecord,
};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("configuration is not stationary (residual {0:.3e})")]
    NotStationary(f64),
    #[error("p and q must be coprime with q >= 1")]
    BadRotation,
}

/// A (p,q)-periodic orbit of the lifted map: q points `(x_k, y_k)` with
/// `F^q(x₀, y₀) = (x₀ + p, y₀)`.
#[derive(Debug, Clone, Serialize)]
pub struct Orbit {
    pub p: i64,
    pub q: usize,
    pub points: Vec<(f64, f64)>,
}

/// One application of the lifted map.
pub fn apply(model: &GeneratingModel, x: f64, y: f64) -> (f64, f64) {
    let force = model.potential.deriv(x);
    (x + y + force, y + force)
}

/// Jacobian of the map at a point (it only depends on x):
/// `[[1 + U″, 1], [U″, 1]]`, determinant exactly 1.
pub fn jacobian(model: &GeneratingModel, x: f64) -> [[f64; 2]; 2] {
    let u2 = model.potential.second_deriv(x);
    [[1.0 + u2, 1.0], [u2, 1.0]]
}

/// Conjugate-variable lift of a stationary configuration:
/// points `(x_k, −h₁(x_k, x_{k+1}))`.
pub fn orbit_from_config(
    model: &GeneratingModel,
    c: &Configuration,
    residual_tol: f64,
) -> Result<Orbit, OrbitError> {
    let res = action::gradient_inf_norm(model, c);
    if res > residual_tol {
        return Err(OrbitError::NotStationary(res));
    }
    let points = (0..c.q() as i64)
        .map(|k| {
            let x = c.extend(k);
            let y = -model.h1(x, c.extend(k + 1));
            (x, y)
        })
        .collect();
    Ok(Orbit { p: c.p(), q: c.q(), points })
}

impl Orbit {
    /// The configuration carrying the orbit's x coordinates.
    pub fn configuration(&self) -> Result<Configuration, OrbitError> {
        let coords = self.points.iter().map(|&(x, _)| x).collect();
        Configuration::new(self.p, self.q, coords).map_err(|_| OrbitError::BadRotation)
    }

    /// Max deviation from the map relations along the orbit, including the
    /// periodic closure.
    pub fn closure_defect(&self, model: &GeneratingModel) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..self.q {
            let (x, y) = self.points[k];
            let (nx, ny) = apply(model, x, y);
            let (tx, ty) = if k + 1 < self.q {
                self.points[k + 1]
            } else {
                (self.points[0].0 + self.p as f64, self.points[0].1)
            };
            worst = worst.max((nx - tx).abs()).max((ny - ty).abs());
        }
        worst
    }
}

/// Whether `(x, y)` closes up to `(x + p, y)` after q applications.
pub fn is_pq_periodic(model: &GeneratingModel, x: f64, y: f64, p: i64, q: usize, tol: f64) -> bool {
    let (mut cx, mut cy) = (x, y);
    for _ in 0..q {
        let next = apply(model, cx, cy);
        cx = next.0;
        cy = next.1;
    }
    (cx - (x + p as f64)).abs() <= tol && (cy - y).abs() <= tol
}

/// Greene residue `R = (2 − tr M)/4` of the orbit, with `M` the ordered
/// product of the map Jacobians along the orbit.
pub fn residue(model: &GeneratingModel, orbit: &Orbit) -> f64 {
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for &(x, _) in &orbit.points {
        let j = jacobian(model, x);
        m = mat_mul(&j, &m);
    }
    (2.0 - (m[0][0] + m[1][1])) / 4.0
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Fixed-line components of the two reversors of the multiharmonic standard
/// map: two vertical lines and two lines parametrized by y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SymmetryLine {
    /// x = 0.
    XZero,
    /// x = 1/2.
    XHalf,
    /// x = y/2 (mod 1).
    HalfY,
    /// x = (y − 1)/2 (mod 1).
    HalfYMinusOne,
}

impl SymmetryLine {
    pub const ALL: [SymmetryLine; 4] = [
        SymmetryLine::XZero,
        SymmetryLine::XHalf,
        SymmetryLine::HalfY,
        SymmetryLine::HalfYMinusOne,
    ];

    /// Lift representative of the line point at height y.
    pub fn start_x(&self, y: f64) -> f64 {
        match self {
            SymmetryLine::XZero => 0.0,
            SymmetryLine::XHalf => 0.5,
            SymmetryLine::HalfY => y / 2.0,
            SymmetryLine::HalfYMinusOne => (y - 1.0) / 2.0,
        }
    }

    /// Membership of a phase point, with x compared mod 1.
    pub fn contains(&self, x: f64, y: f64, tol: f64) -> bool {
        let d = (x - self.start_x(y)).rem_euclid(1.0);
        d.min(1.0 - d) <= tol
    }
}

impl Orbit {
    /// A (p,q)-orbit is symmetric when it meets a fixed line of one of the
    /// reversors.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.points.iter().any(|&(x, y)| {
            SymmetryLine::ALL.iter().any(|line| line.contains(x, y, tol))
        })
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricSearchOptions {
    /// Grid samples over the y range.
    pub samples: usize,
    /// Bisection tolerance on y.
    pub root_tol: f64,
    /// Accepted closure defect of a verified orbit.
    pub closure_tol: f64,
}

impl Default for SymmetricSearchOptions {
    fn default() -> Self {
        Self { samples: 512, root_tol: 1e-12, closure_tol: 1e-10 }
    }
}

fn closure_residual(model: &GeneratingModel, line: SymmetryLine, y: f64, p: i64, q: usize) -> f64 {
    let x0 = line.start_x(y);
    let (mut x, mut cy) = (x0, y);
    for _ in 0..q {
        let next = apply(model, x, cy);
        x = next.0;
        cy = next.1;
    }
    x - x0 - p as f64
}

/// Scans a symmetry line for (p,q)-periodic orbits by bracketing sign
/// changes of the closure residual in y and bisecting. Returned orbits are
/// verified against the full closure condition.
pub fn find_symmetric_orbits(
    model: &GeneratingModel,
    p: i64,
    q: usize,
    line: SymmetryLine,
    y_range: (f64, f64),
    opts: &SymmetricSearchOptions,
) -> Vec<Orbit> {
    let mut roots: Vec<f64> = Vec::new();
    let (lo, hi) = y_range;
    let n = opts.samples.max(2);
    let mut prev_y = lo;
    let mut prev_r = closure_residual(model, line, prev_y, p, q);
    for i in 1..=n {
        let y = lo + (hi - lo) * i as f64 / n as f64;
        let r = closure_residual(model, line, y, p, q);
        if prev_r == 0.0 {
            roots.push(prev_y);
        } else if prev_r * r < 0.0 {
            let (mut a, mut b, mut ra) = (prev_y, y, prev_r);
            while b - a > opts.root_tol {
                let mid = 0.5 * (a + b);
                let rm = closure_residual(model, line, mid, p, q);
                if rm == 0.0 {
                    a = mid;
                    b = mid;
                } else if ra * rm < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    ra = rm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        prev_y = y;
        prev_r = r;
    }
    if prev_r == 0.0 {
        roots.push(prev_y);
    }

    let mut orbits = Vec::new();
    for y0 in roots {
        let x0 = line.start_x(y0);
        let mut points = Vec::with_capacity(q);
        let (mut x, mut y) = (x0, y0);
        for _ in 0..q {
            points.push((x, y));
            let next = apply(model, x, y);
            x = next.0;
            y = next.1;
        }
        let orbit = Orbit { p, q, points };
        if (x - x0 - p as f64).abs() <= opts.closure_tol && (y - y0).abs() <= opts.closure_tol {
            let dup = orbits.iter().any(|o: &Orbit| {
                (o.points[0].1 - orbit.points[0].1).abs() < 10.0 * opts.root_tol
            });
            if !dup {
                orbits.push(orbit);
            }
        }
    }
    orbits
}

/// Delegates the shared-vertical-line test to the minimizer context.
pub fn shares_minimizer_line(
    record: &StationaryRecord,
    ctx: &MinimizerContext,
    tol: f64,
) -> bool {
    ctx.shares_minimizer_line(&record.config, tol)
}

/// One (ε, orbit-family) sample of a bifurcation sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    pub eps: f64,
    pub family: usize,
    pub y0: f64,
    pub x0: f64,
    pub residue: f64,
    pub index: usize,
    pub symmetric: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanOutcome {
    pub records: Vec<ScanRecord>,
    /// Smallest grid ε at which an asymmetric stationary pair exists.
    pub first_asymmetric: Option<f64>,
    /// Grid points where enumeration or classification failed, with reasons.
    pub failures: Vec<(f64, String)>,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    pub density: usize,
    pub analysis: AnalysisOptions,
    pub search: SymmetricSearchOptions,
    /// Tolerance for deciding that an orbit touches a symmetry line.
    pub line_tol: f64,
    /// Family tracks are continued while (x₀ mod 1, y₀) moves less than
    /// this between consecutive ε.
    pub match_dist: f64,
    pub y_range: (f64, f64),
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            density: 24,
            analysis: AnalysisOptions::default(),
            search: SymmetricSearchOptions::default(),
            line_tol: 1e-8,
            match_dist: 0.2,
            y_range: (0.05, 0.95),
        }
    }
}

fn cylinder_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = (a.0 - b.0).rem_euclid(1.0);
    let dx = dx.min(1.0 - dx);
    dx.max((a.1 - b.1).abs())
}

/// Sweeps a one-parameter model family over an ascending ε grid.
///
/// At every ε the stationary set is enumerated (seeded afresh plus a
/// symmetric-line search on the vertical reversor lines, seeding windows
/// carried over from the previous ε) and each state is recorded with its
/// residue, Morse index and symmetry flag. Families are tracked between
/// grid points by phase-space continuation.
pub fn rimmer_scan<F>(
    family: F,
    p: i64,
    q: usize,
    eps_grid: &[f64],
    opts: &ScanOptions,
) -> ScanOutcome
where
    F: Fn(f64) -> GeneratingModel,
{
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut first_asymmetric = None;
    let mut tracks: Vec<(f64, f64)> = Vec::new(); // last seen (x0 mod 1, y0) per family id
    let mut prev_line_roots: Vec<f64> = Vec::new();

    for &eps in eps_grid {
        let model = family(eps);
        let analysis =
            match stationary::analyze(&model, p, q, opts.density, &opts.analysis) {
                Ok(a) => a,
                Err(e) => {
                    failures.push((eps, e.to_string()));
                    continue;
                }
            };

        // Vertical-line search with continuation seeding: re-bisect small
        // windows around the previous roots, then the full grid.
        let mut line_roots = Vec::new();
        for line in [SymmetryLine::XZero, SymmetryLine::XHalf] {
            for &y in &prev_line_roots {
                let window = (y - 0.02, y + 0.02);
                let mut narrow = opts.search.clone();
                narrow.samples = 32;
                for o in find_symmetric_orbits(&model, p, q, line, window, &narrow) {
                    line_roots.push(o.points[0].1);
                }
            }
            for o in find_symmetric_orbits(&model, p, q, line, opts.y_range, &opts.search) {
                line_roots.push(o.points[0].1);
            }
        }
        line_roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
        line_roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        prev_line_roots = line_roots;

        let mut eps_records = Vec::new();
        let mut asym_count = 0usize;
        for rec in &analysis.records {
            if rec.degenerate {
                continue;
            }
            let orbit = match orbit_from_config(&model, &rec.config, 1e-8) {
                Ok(o) => o,
                Err(e) => {
                    failures.push((eps, e.to_string()));
                    continue;
                }
            };
            let symmetric = orbit.is_symmetric(opts.line_tol);
            if !symmetric {
                asym_count += 1;
            }
            let (x0, y0) = orbit.points[0];
            eps_records.push(ScanRecord {
                eps,
                family: usize::MAX,
                y0,
                x0,
                residue: residue(&model, &orbit),
                index: rec.index,
                symmetric,
            });
        }

        // Continuation: match records to existing family tracks by phase
        // distance, create new tracks for births.
        let mut claimed = vec![false; tracks.len()];
        for r in &mut eps_records {
            let key = (r.x0.rem_euclid(1.0), r.y0);
            let mut best: Option<(usize, f64)> = None;
            for (id, pos) in tracks.iter().enumerate() {
                if claimed[id] {
                    continue;
                }
                let d = cylinder_dist(key, *pos);
                if d < opts.match_dist && best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((id, d));
                }
            }
            match best {
                Some((id, _)) => {
                    claimed[id] = true;
                    tracks[id] = key;
                    r.family = id;
                }
                None => {
                    tracks.push(key);
                    claimed.push(true);
                    r.family = tracks.len() - 1;
                }
            }
        }
        eps_records.sort_by_key(|r| r.family);

        if asym_count >= 2 && first_asymmetric.is_none() {
            first_asymmetric = Some(eps);
        }
        records.extend(eps_records);
    }

    ScanOutcome { records, first_asymmetric, failures }
}
