//! The order lattice of (p,q)-configurations.
//!
//! A configuration stores one period `(x₀, …, x_{q−1})` of a sequence obeying
//! `x_{n+q} = x_n + p`. The partial order is componentwise over the whole
//! sequence, which for fixed (p,q) reduces to the stored period. Translations
//! `τ_{ij}` shift the index by `i` and the values by `j`; they generate the
//! symmetry group of everything downstream.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("p and q must be coprime (got p={p}, q={q})")]
    NotCoprime { p: i64, q: usize },
    #[error("coordinate count {got} does not match q={q}")]
    LengthMismatch { got: usize, q: usize },
    #[error("q must be positive")]
    ZeroPeriod,
    #[error("coordinates must be finite")]
    NonFinite,
    #[error("configurations live in different (p,q) spaces")]
    SpaceMismatch,
    #[error("interval endpoints are not ordered")]
    UnorderedEndpoints,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// One period of a (p,q)-configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration")]
pub struct Configuration {
    p: i64,
    q: usize,
    coords: Vec<f64>,
}

#[derive(Deserialize)]
struct RawConfiguration {
    p: i64,
    q: usize,
    coords: Vec<f64>,
}

impl TryFrom<RawConfiguration> for Configuration {
    type Error = ConfigError;
    fn try_from(raw: RawConfiguration) -> Result<Self, ConfigError> {
        Configuration::new(raw.p, raw.q, raw.coords)
    }
}

/// Outcome of the componentwise comparison of two configurations.
///
/// `LessWeak` means `x ≤ y` with at least one tie and at least one strict
/// coordinate; `LessStrict` means every coordinate is strictly below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderRelation {
    Equal,
    LessStrict,
    LessWeak,
    GreaterStrict,
    GreaterWeak,
    Incomparable,
}

impl OrderRelation {
    pub fn is_comparable(self) -> bool {
        self != OrderRelation::Incomparable
    }

    /// `self ≤ other` in the weak sense (including equality).
    pub fn is_le(self) -> bool {
        matches!(
            self,
            OrderRelation::Equal | OrderRelation::LessStrict | OrderRelation::LessWeak
        )
    }

    pub fn is_ge(self) -> bool {
        matches!(
            self,
            OrderRelation::Equal | OrderRelation::GreaterStrict | OrderRelation::GreaterWeak
        )
    }

    pub fn reversed(self) -> Self {
        match self {
            OrderRelation::LessStrict => OrderRelation::GreaterStrict,
            OrderRelation::LessWeak => OrderRelation::GreaterWeak,
            OrderRelation::GreaterStrict => OrderRelation::LessStrict,
            OrderRelation::GreaterWeak => OrderRelation::LessWeak,
            other => other,
        }
    }
}

impl Configuration {
    pub fn new(p: i64, q: usize, coords: Vec<f64>) -> Result<Self, ConfigError> {
        if q == 0 {
            return Err(ConfigError::ZeroPeriod);
        }
        if coords.len() != q {
            return Err(ConfigError::LengthMismatch { got: coords.len(), q });
        }
        if gcd(p.unsigned_abs(), q as u64) != 1 {
            return Err(ConfigError::NotCoprime { p, q });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError::NonFinite);
        }
        Ok(Self { p, q, coords })
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn same_space(&self, other: &Self) -> bool {
        self.p == other.p && self.q == other.q
    }

    /// Replaces the coordinates, keeping (p,q).
    pub fn with_coords(&self, coords: Vec<f64>) -> Result<Self, ConfigError> {
        Self::new(self.p, self.q, coords)
    }

    /// `x_n` for any integer index, via `x_{n+q} = x_n + p` with floored
    /// division so the identity holds for negative `n` too.
    pub fn extend(&self, n: i64) -> f64 {
        let q = self.q as i64;
        let cell = n.div_euclid(q);
        let idx = n.rem_euclid(q) as usize;
        self.coords[idx] + (self.p * cell) as f64
    }

    /// `(τ_{ij} x)_k = x_{k+i} + j`.
    pub fn translate(&self, i: i64, j: i64) -> Self {
        let coords = (0..self.q as i64)
            .map(|k| self.extend(k + i) + j as f64)
            .collect();
        Self { p: self.p, q: self.q, coords }
    }

    /// Componentwise order with ties declared at `|x_k − y_k| ≤ tol`.
    pub fn compare(&self, other: &Self, tol: f64) -> Result<OrderRelation, ConfigError> {
        if !self.same_space(other) {
            return Err(ConfigError::SpaceMismatch);
        }
        let mut below = 0usize;
        let mut above = 0usize;
        let mut ties = 0usize;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            let d = b - a;
            if d.abs() <= tol {
                ties += 1;
            } else if d > 0.0 {
                below += 1;
            } else {
                above += 1;
            }
        }
        Ok(if below > 0 && above > 0 {
            OrderRelation::Incomparable
        } else if below > 0 && ties > 0 {
            OrderRelation::LessWeak
        } else if below > 0 {
            OrderRelation::LessStrict
        } else if above > 0 && ties > 0 {
            OrderRelation::GreaterWeak
        } else if above > 0 {
            OrderRelation::GreaterStrict
        } else {
            OrderRelation::Equal
        })
    }

    /// True iff the configuration is comparable with every integer translate
    /// of itself.
    ///
    /// Only index shifts `i ∈ {0,…,q−1}` need checking (τ_{q,−p} is the
    /// identity), and for each `i` only value shifts `j` inside the window
    /// where the difference sequence can change sign; outside it all
    /// differences share a sign and comparability is automatic.
    pub fn is_cyclically_ordered(&self, tol: f64) -> bool {
        for i in 0..self.q as i64 {
            let diffs: Vec<f64> = (0..self.q as i64)
                .map(|k| self.extend(k + i) - self.coords[k as usize])
                .collect();
            let dmax = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let dmin = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
            let j_lo = (-dmax).ceil() as i64 - 1;
            let j_hi = (-dmin).floor() as i64 + 1;
            for j in j_lo..=j_hi {
                let rel = self
                    .compare(&self.translate(i, j), tol)
                    .expect("translate stays in the same space");
                if !rel.is_comparable() {
                    return false;
                }
            }
        }
        true
    }

    /// Piecewise-linear interpolation of `(n, x_n)` at parameter `t`.
    pub fn aubry_value(&self, t: f64) -> f64 {
        let n = t.floor() as i64;
        let frac = t - n as f64;
        let a = self.extend(n);
        let b = self.extend(n + 1);
        a + frac * (b - a)
    }

    /// Canonical representative modulo the full translation group.
    ///
    /// Each of the q index rotations is shifted by the unique integer putting
    /// coordinate 0 into [0,1); the lexicographically smallest coordinate
    /// sequence wins. Idempotent.
    pub fn canonicalize(&self) -> Self {
        let mut best: Option<Vec<f64>> = None;
        for i in 0..self.q as i64 {
            let mut coords: Vec<f64> =
                (0..self.q as i64).map(|k| self.extend(k + i)).collect();
            let shift = coords[0].floor();
            for v in &mut coords {
                *v -= shift;
            }
            let better = match &best {
                None => true,
                Some(b) => lex_less(&coords, b),
            };
            if better {
                best = Some(coords);
            }
        }
        Self { p: self.p, q: self.q, coords: best.expect("q >= 1") }
    }

    /// Shifts all coordinates by an integer so `x₀ ∈ [−η, 1−η)`.
    ///
    /// The guard η keeps states refined to either side of an integer on the
    /// same representative, so downstream dedup and sorting stay stable.
    pub fn shift_to_unit_cell(&self) -> Self {
        const ETA: f64 = 1e-9;
        let j = (self.coords[0] + ETA).floor();
        let coords = self.coords.iter().map(|v| v - j).collect();
        Self { p: self.p, q: self.q, coords }
    }

    /// Max-norm distance minimized over integer value shifts of `self`.
    pub fn shift_distance(&self, other: &Self) -> f64 {
        if !self.same_space(other) {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let j0 = (other.coords[0] - self.coords[0]).round() as i64;
        for j in [j0 - 1, j0, j0 + 1] {
            let d = (0..self.q)
                .map(|k| (self.coords[k] + j as f64 - other.coords[k]).abs())
                .fold(0.0f64, f64::max);
            best = best.min(d);
        }
        best
    }

    /// Max-norm distance minimized over the full translation group τ_{ij}.
    pub fn group_distance(&self, other: &Self) -> f64 {
        if !self.same_space(other) {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for i in 0..self.q as i64 {
            let rotated = self.translate(i, 0);
            best = best.min(rotated.shift_distance(other));
        }
        best
    }
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// `z ∈ [x, y]` (closed) or `z ∈ [[x, y]]` (open), with the endpoints
/// required to be ordered.
pub fn in_interval(
    z: &Configuration,
    lo: &Configuration,
    hi: &Configuration,
    closed: bool,
    tol: f64,
) -> Result<bool, ConfigError> {
    let ends = lo.compare(hi, tol)?;
    if !ends.is_le() {
        return Err(ConfigError::UnorderedEndpoints);
    }
    let a = lo.compare(z, tol)?;
    let b = z.compare(hi, tol)?;
    Ok(if closed {
        a.is_le() && b.is_le()
    } else {
        a == OrderRelation::LessStrict && b == OrderRelation::LessStrict
    })
}

/// Which order cone of an apex a configuration is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeSign {
    Positive,
    Negative,
}

/// Membership of `z` in the (weak) order cone of `apex`.
pub fn in_cone(z: &Configuration, apex: &Configuration, sign: ConeSign, tol: f64) -> Result<bool, ConfigError> {
    let rel = apex.compare(z, tol)?;
    Ok(match sign {
        ConeSign::Positive => rel.is_le(),
        ConeSign::Negative => rel.is_ge(),
    })
}

/// True iff `z` lies on the boundary of either order cone of `apex`:
/// inside a cone with at least one tied coordinate (the apex itself counts).
pub fn on_cone_boundary(z: &Configuration, apex: &Configuration, tol: f64) -> Result<bool, ConfigError> {
    let rel = z.compare(apex, tol)?;
    Ok(matches!(
        rel,
        OrderRelation::Equal | OrderRelation::LessWeak | OrderRelation::GreaterWeak
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: i64, q: usize, coords: &[f64]) -> Configuration {
        Configuration::new(p, q, coords.to_vec()).unwrap()
    }

    #[test]
    fn extend_uses_floored_division() {
        let c = cfg(1, 2, &[0.0, 0.5]);
        assert_eq!(c.extend(2), 1.0);
        assert_eq!(c.extend(-1), -0.5);
        assert_eq!(c.extend(5), 2.5);
        assert_eq!(c.extend(0), 0.0);
    }

    #[test]
    fn translate_examples() {
        let c = cfg(1, 2, &[0.0, 0.5]);
        assert_eq!(c.translate(0, 1).coords(), &[1.0, 1.5]);
        assert_eq!(c.translate(1, 1).coords(), &[1.5, 2.0]);
        // τ_{q,−p} is the identity on the (p,q) space.
        let back = c.translate(2, -1);
        assert_eq!(back.coords(), c.coords());
    }

    #[test]
    fn compare_cases() {
        let tol = 1e-9;
        let a = cfg(1, 2, &[0.0, 0.5]);
        assert_eq!(a.compare(&cfg(1, 2, &[0.1, 0.6]), tol).unwrap(), OrderRelation::LessStrict);
        assert_eq!(a.compare(&cfg(1, 2, &[0.0, 0.6]), tol).unwrap(), OrderRelation::LessWeak);
        assert_eq!(
            cfg(1, 2, &[0.4, 0.1]).compare(&cfg(1, 2, &[0.1, 1.4]), tol).unwrap(),
            OrderRelation::Incomparable
        );
        assert_eq!(a.compare(&a, tol).unwrap(), OrderRelation::Equal);
        assert_eq!(
            a.compare(&cfg(1, 2, &[-0.1, 0.4]), tol).unwrap(),
            OrderRelation::GreaterStrict
        );
        assert!(a.compare(&cfg(0, 1, &[0.0]), tol).is_err());
    }

    #[test]
    fn cyclic_order_examples() {
        let tol = 1e-9;
        // Uniform spacing p/q is ordered for several (p,q).
        for (p, q) in [(1i64, 2usize), (1, 3), (2, 5), (3, 4)] {
            let coords: Vec<f64> = (0..q).map(|k| k as f64 * p as f64 / q as f64).collect();
            assert!(cfg(p, q, &coords).is_cyclically_ordered(tol), "uniform ({p},{q})");
        }
        assert!(cfg(1, 2, &[0.0, 0.5]).is_cyclically_ordered(tol));
        // τ₁₀ of (0.4, 0.1) is (0.1, 1.4), incomparable with it.
        assert!(!cfg(1, 2, &[0.4, 0.1]).is_cyclically_ordered(tol));
    }

    #[test]
    fn aubry_interpolation() {
        let c = cfg(1, 2, &[0.0, 0.5]);
        assert!((c.aubry_value(0.5) - 0.25).abs() < 1e-15);
        assert!((c.aubry_value(2.0) - 1.0).abs() < 1e-15);
        assert!((c.aubry_value(-0.5) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn canonicalize_examples() {
        // (1.5, 2.0) is a translate of (0, 0.5): the shift −1 gives
        // (0.5, 1.0) and the rotation of that wins lexicographically.
        let c = cfg(1, 2, &[1.5, 2.0]);
        assert_eq!(c.canonicalize().coords(), &[0.0, 0.5]);
        let base = cfg(1, 2, &[0.5, 1.0]);
        let rotated = base.translate(1, 0);
        assert_eq!(base.canonicalize(), rotated.canonicalize());
        let fixed = cfg(1, 2, &[0.0, 0.5]);
        assert_eq!(fixed.canonicalize(), fixed);
        // Idempotence.
        let canon = cfg(2, 3, &[0.9, 1.4, 2.2]).canonicalize();
        assert_eq!(canon.canonicalize(), canon);
    }

    #[test]
    fn region_membership() {
        let tol = 1e-9;
        let x = cfg(1, 2, &[0.0, 0.5]);
        let y = cfg(1, 2, &[0.25, 0.75]);
        let z = cfg(1, 2, &[0.1, 0.6]);
        assert!(in_interval(&z, &x, &y, false, tol).unwrap());
        assert!(in_interval(&z, &x, &y, true, tol).unwrap());
        assert!(!in_interval(&x, &x, &y, false, tol).unwrap());
        assert!(in_interval(&x, &x, &y, true, tol).unwrap());
        assert!(in_interval(&z, &y, &x, false, tol).is_err());

        assert!(on_cone_boundary(&cfg(1, 2, &[0.0, 0.6]), &x, tol).unwrap());
        assert!(!on_cone_boundary(&cfg(1, 2, &[0.1, 0.6]), &x, tol).unwrap());
        assert!(on_cone_boundary(&x, &x, tol).unwrap());

        assert!(!in_cone(&cfg(1, 2, &[0.1, 0.4]), &x, ConeSign::Positive, tol).unwrap());
        assert!(in_cone(&cfg(1, 2, &[0.1, 0.6]), &x, ConeSign::Positive, tol).unwrap());
        assert!(in_cone(&cfg(1, 2, &[-0.2, 0.4]), &x, ConeSign::Negative, tol).unwrap());
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(
            Configuration::new(2, 4, vec![0.0; 4]),
            Err(ConfigError::NotCoprime { .. })
        ));
        assert!(matches!(
            Configuration::new(1, 2, vec![0.0; 3]),
            Err(ConfigError::LengthMismatch { .. })
        ));
        assert!(matches!(Configuration::new(1, 0, vec![]), Err(ConfigError::ZeroPeriod)));
        assert!(matches!(
            Configuration::new(1, 2, vec![0.0, f64::NAN]),
            Err(ConfigError::NonFinite)
        ));
        // p = 0 needs q = 1.
        assert!(Configuration::new(0, 1, vec![0.3]).is_ok());
        assert!(Configuration::new(0, 2, vec![0.3, 0.4]).is_err());
    }

    #[test]
    fn distances_modulo_translations() {
        let a = cfg(1, 2, &[0.0, 0.5]);
        let b = a.translate(1, 3);
        assert!(a.group_distance(&b) < 1e-15);
        assert!(a.shift_distance(&a.translate(0, -2)) < 1e-15);
        assert!(a.shift_distance(&b) > 0.4);
        let c = cfg(1, 2, &[0.01, 0.52]);
        assert!((a.group_distance(&c) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn unit_cell_shift_is_stable_near_integers() {
        let tiny = cfg(1, 2, &[-1e-16, 0.5]);
        let s = tiny.shift_to_unit_cell();
        assert!(s.coords()[0].abs() < 1e-12);
        let high = cfg(1, 2, &[1.0 - 1e-16, 1.5]);
        let s = high.shift_to_unit_cell();
        assert!(s.coords()[0].abs() < 1e-12);
        let mid = cfg(1, 2, &[2.25, 2.75]);
        assert_eq!(mid.shift_to_unit_cell().coords(), &[0.25, 0.75]);
    }

    #[test]
    fn serde_round_trip() {
        let c = cfg(1, 2, &[0.0, 0.5]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"p":1,"q":2,"coords":[0.0,0.5]}"#);
        let back: Configuration = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad: Result<Configuration, _> =
            serde_json::from_str(r#"{"p":2,"q":4,"coords":[0,0,0,0]}"#);
        assert!(bad.is_err());
    }
}
