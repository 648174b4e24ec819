//! Generating functions of multiharmonic standard-type twist maps.
//!
//! The model family is `h(x, x') = ½(x − x')² + U(x)` with a 1-periodic
//! on-site potential `U(x) = Σ c_k cos(2πk x)`. The quadratic coupling is
//! fixed, which keeps the induced cylinder map explicit and makes the mixed
//! partial `h₁₂ ≡ −1`, so the twist condition holds everywhere.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("harmonic wavenumber must be >= 1")]
    ZeroWavenumber,
    #[error("duplicate harmonic wavenumber {0}")]
    DuplicateWavenumber(u32),
    #[error("non-finite amplitude for wavenumber {0}")]
    NonFiniteAmplitude(u32),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{0}` requires a strength parameter, e.g. `{0}:1.2`")]
    MissingStrength(String),
    #[error("preset `{0}` takes no strength parameter")]
    UnexpectedStrength(String),
    #[error("invalid strength parameter `{0}`")]
    BadStrength(String),
}

/// One cosine term `c · cos(2πk x)` of the on-site potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub k: u32,
    pub c: f64,
}

/// Multiharmonic on-site potential, stored as raw cosine amplitudes.
///
/// Presets convert any `ε·a_k`-style normalization into plain `c_k` so the
/// internal representation is unambiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPotential")]
pub struct PotentialSpec {
    harmonics: Vec<Harmonic>,
}

#[derive(Deserialize)]
struct RawPotential {
    harmonics: Vec<Harmonic>,
}

impl TryFrom<RawPotential> for PotentialSpec {
    type Error = ModelError;
    fn try_from(raw: RawPotential) -> Result<Self, ModelError> {
        PotentialSpec::new(raw.harmonics)
    }
}

/// Derivative order selector for [`PotentialSpec::eval`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivOrder {
    Value,
    First,
    Second,
}

impl PotentialSpec {
    /// Wavenumbers must be distinct and >= 1; amplitudes finite.
    pub fn new(harmonics: Vec<Harmonic>) -> Result<Self, ModelError> {
        let mut seen = Vec::with_capacity(harmonics.len());
        for h in &harmonics {
            if h.k == 0 {
                return Err(ModelError::ZeroWavenumber);
            }
            if seen.contains(&h.k) {
                return Err(ModelError::DuplicateWavenumber(h.k));
            }
            if !h.c.is_finite() {
                return Err(ModelError::NonFiniteAmplitude(h.k));
            }
            seen.push(h.k);
        }
        Ok(Self { harmonics })
    }

    pub fn zero() -> Self {
        Self { harmonics: Vec::new() }
    }

    pub fn harmonics(&self) -> &[Harmonic] {
        &self.harmonics
    }

    /// `U(x) = Σ c_k cos(2πk x)`.
    pub fn value(&self, x: f64) -> f64 {
        self.harmonics
            .iter()
            .map(|h| h.c * (TAU * h.k as f64 * x).cos())
            .sum()
    }

    /// `U′(x) = −Σ c_k · 2πk · sin(2πk x)`.
    pub fn deriv(&self, x: f64) -> f64 {
        -self
            .harmonics
            .iter()
            .map(|h| {
                let w = TAU * h.k as f64;
                h.c * w * (w * x).sin()
            })
            .sum::<f64>()
    }

    /// `U″(x) = −Σ c_k · (2πk)² · cos(2πk x)`.
    pub fn second_deriv(&self, x: f64) -> f64 {
        -self
            .harmonics
            .iter()
            .map(|h| {
                let w = TAU * h.k as f64;
                h.c * w * w * (w * x).cos()
            })
            .sum::<f64>()
    }

    pub fn eval(&self, x: f64, order: DerivOrder) -> f64 {
        match order {
            DerivOrder::Value => self.value(x),
            DerivOrder::First => self.deriv(x),
            DerivOrder::Second => self.second_deriv(x),
        }
    }
}

/// Partial-derivative selector for [`GeneratingModel::partial`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HPartial {
    Value,
    D1,
    D2,
    D11,
    D12,
    D22,
}

/// The generating function `h(x, x') = ½(x − x')² + U(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingModel {
    pub potential: PotentialSpec,
}

impl GeneratingModel {
    pub fn new(potential: PotentialSpec) -> Self {
        Self { potential }
    }

    /// Single-harmonic standard map: `c₁ = ε/(2π)²`.
    pub fn standard(eps: f64) -> Self {
        Self::new(
            PotentialSpec::new(vec![Harmonic { k: 1, c: eps / (TAU * TAU) }])
                .expect("single harmonic is always valid"),
        )
    }

    /// Three-harmonic map with amplitude ratios `(1, −0.3, 0.2)` scaled by
    /// `ε/(2πk)²`.
    pub fn three_harmonic(eps: f64) -> Self {
        let a = [1.0, -0.3, 0.2];
        let harmonics = a
            .iter()
            .enumerate()
            .map(|(i, ak)| {
                let k = (i + 1) as u32;
                let w = TAU * k as f64;
                Harmonic { k, c: eps * ak / (w * w) }
            })
            .collect();
        Self::new(PotentialSpec::new(harmonics).expect("distinct wavenumbers"))
    }

    /// Three-harmonic map with fixed amplitudes `(−0.18/2π, 0.42/4π, 0.11/6π)`.
    ///
    /// This system carries an ordered (1,2)-state at (0, 0.5) that is neither
    /// minimizing nor a minimaximizer.
    pub fn example4() -> Self {
        let harmonics = vec![
            Harmonic { k: 1, c: -0.18 / TAU },
            Harmonic { k: 2, c: 0.42 / (2.0 * TAU) },
            Harmonic { k: 3, c: 0.11 / (3.0 * TAU) },
        ];
        Self::new(PotentialSpec::new(harmonics).expect("distinct wavenumbers"))
    }

    pub fn h(&self, x: f64, xp: f64) -> f64 {
        0.5 * (x - xp) * (x - xp) + self.potential.value(x)
    }

    pub fn h1(&self, x: f64, xp: f64) -> f64 {
        (x - xp) + self.potential.deriv(x)
    }

    pub fn h2(&self, x: f64, xp: f64) -> f64 {
        xp - x
    }

    pub fn h11(&self, x: f64) -> f64 {
        1.0 + self.potential.second_deriv(x)
    }

    /// The mixed partial is identically −1: the twist condition.
    pub fn h12(&self) -> f64 {
        -1.0
    }

    pub fn h22(&self) -> f64 {
        1.0
    }

    pub fn partial(&self, x: f64, xp: f64, which: HPartial) -> f64 {
        match which {
            HPartial::Value => self.h(x, xp),
            HPartial::D1 => self.h1(x, xp),
            HPartial::D2 => self.h2(x, xp),
            HPartial::D11 => self.h11(x),
            HPartial::D12 => self.h12(),
            HPartial::D22 => self.h22(),
        }
    }
}

/// Built-in model presets, parsed from CLI-style `name[:strength]` tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    Standard(f64),
    ThreeHarmonic(f64),
    Example4,
}

impl Preset {
    /// Accepts `standard:EPS`, `threeharmonic:EPS` and `example4`.
    pub fn parse(token: &str) -> Result<Self, ModelError> {
        let (name, strength) = match token.split_once(':') {
            Some((n, s)) => (n, Some(s)),
            None => (token, None),
        };
        let need = |name: &str| -> Result<f64, ModelError> {
            let s = strength.ok_or_else(|| ModelError::MissingStrength(name.to_string()))?;
            s.parse::<f64>().map_err(|_| ModelError::BadStrength(s.to_string()))
        };
        match name {
            "standard" => Ok(Preset::Standard(need(name)?)),
            "threeharmonic" => Ok(Preset::ThreeHarmonic(need(name)?)),
            "example4" => {
                if strength.is_some() {
                    return Err(ModelError::UnexpectedStrength(name.to_string()));
                }
                Ok(Preset::Example4)
            }
            other => Err(ModelError::UnknownPreset(other.to_string())),
        }
    }

    pub fn model(&self) -> GeneratingModel {
        match *self {
            Preset::Standard(eps) => GeneratingModel::standard(eps),
            Preset::ThreeHarmonic(eps) => GeneratingModel::three_harmonic(eps),
            Preset::Example4 => GeneratingModel::example4(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    #[test]
    fn value_single_harmonic_at_zero() {
        let spec =
            PotentialSpec::new(vec![Harmonic { k: 1, c: 12.0 / (TAU * TAU) }]).unwrap();
        assert!((spec.value(0.0) - 12.0 / (TAU * TAU)).abs() < 1e-15);
    }

    #[test]
    fn example4_deriv_vanishes_at_half() {
        let m = GeneratingModel::example4();
        assert!(m.potential.deriv(0.5).abs() < 1e-14);
        assert!(m.potential.deriv(0.0).abs() < 1e-14);
    }

    #[test]
    fn example4_second_deriv_at_zero_and_half() {
        // Closed forms: U″(0) = −π(−0.36 + 1.68 + 0.66) = −1.98π and
        // U″(1/2) = −π(0.36 + 1.68 − 0.66) = −1.38π.
        let m = GeneratingModel::example4();
        assert!((m.potential.second_deriv(0.0) + 1.98 * PI).abs() < 1e-12);
        assert!((m.potential.second_deriv(0.5) + 1.38 * PI).abs() < 1e-12);
    }

    #[test]
    fn h_partials_match_definitions() {
        let zero = GeneratingModel::new(PotentialSpec::zero());
        assert!((zero.h1(0.0, 0.5) + 0.5).abs() < 1e-15);
        let m = GeneratingModel::example4();
        assert_eq!(m.partial(0.3, -1.2, HPartial::D12), -1.0);
        assert!((m.partial(0.0, 0.5, HPartial::D11) - (1.0 - 1.98 * PI)).abs() < 1e-12);
        assert!((m.h2(0.0, 0.5) - 0.5).abs() < 1e-15);
        assert_eq!(m.h22(), 1.0);
    }

    #[test]
    fn preset_amplitudes() {
        let m = GeneratingModel::three_harmonic(1.2);
        let hs = m.potential.harmonics();
        assert!((hs[0].c - 1.2 / (TAU * TAU)).abs() < 1e-16);
        assert!((hs[1].c - 1.2 * (-0.3) / (2.0 * TAU * 2.0 * TAU)).abs() < 1e-16);
        assert!((hs[2].c - 1.2 * 0.2 / (3.0 * TAU * 3.0 * TAU)).abs() < 1e-16);

        let e4 = GeneratingModel::example4();
        assert!((e4.potential.harmonics()[0].c - (-0.18 / TAU)).abs() < 1e-16);
        assert!((e4.potential.harmonics()[0].c + 0.028_647_889_756_541_16).abs() < 1e-12);

        let flat = GeneratingModel::standard(0.0);
        assert_eq!(flat.potential.harmonics()[0].c, 0.0);
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(Preset::parse("standard:12").unwrap(), Preset::Standard(12.0));
        assert_eq!(
            Preset::parse("threeharmonic:1.2").unwrap(),
            Preset::ThreeHarmonic(1.2)
        );
        assert_eq!(Preset::parse("example4").unwrap(), Preset::Example4);
        assert!(matches!(Preset::parse("standard"), Err(ModelError::MissingStrength(_))));
        assert!(matches!(Preset::parse("example4:1"), Err(ModelError::UnexpectedStrength(_))));
        assert!(matches!(Preset::parse("sawtooth:1"), Err(ModelError::UnknownPreset(_))));
        assert!(matches!(Preset::parse("standard:abc"), Err(ModelError::BadStrength(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(
            PotentialSpec::new(vec![Harmonic { k: 0, c: 1.0 }]),
            Err(ModelError::ZeroWavenumber)
        ));
        assert!(matches!(
            PotentialSpec::new(vec![Harmonic { k: 2, c: 1.0 }, Harmonic { k: 2, c: 0.5 }]),
            Err(ModelError::DuplicateWavenumber(2))
        ));
        assert!(matches!(
            PotentialSpec::new(vec![Harmonic { k: 1, c: f64::NAN }]),
            Err(ModelError::NonFiniteAmplitude(1))
        ));
    }

    #[test]
    fn periodicity_sampled() {
        let m = GeneratingModel::example4();
        for i in 0..100 {
            let x = -3.0 + 0.061 * i as f64;
            for order in [DerivOrder::Value, DerivOrder::First, DerivOrder::Second] {
                let a = m.potential.eval(x, order);
                let b = m.potential.eval(x + 1.0, order);
                assert!((a - b).abs() < 1e-12, "period violated at x={x}, {order:?}");
            }
        }
    }
}
