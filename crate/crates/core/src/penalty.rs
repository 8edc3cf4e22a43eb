//! Convex penalties `h₀(d)` on the Jacobian, infinite for `d ≤ 0`.

use serde::{Deserialize, Serialize};

use crate::numerics::{find_root, Bracket, DEFAULT_ROOT_TOL};

/// Built-in penalty families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    /// `1/(2d) + (d−1)²/2`
    Default,
    /// `1/d + (d−1)²/2`, for which `1 + h₀′(1) = 0`.
    NegControl,
}

impl std::str::FromStr for PenaltyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "default" => Ok(Self::Default),
            "negcontrol" => Ok(Self::NegControl),
            other => Err(format!("unknown penalty `{other}` (expected default or negcontrol)")),
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Default => "default",
            Self::NegControl => "negcontrol",
        })
    }
}

/// `h₀` with its first two derivatives and the growth parameters it satisfies.
///
/// Near zero, `(−1)^k h₀^{(k)}(d) ≍ d^{−s−k}` for `d < d0`; for `d ≥ d1`,
/// `h₀″(d) ≍ d^τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyFunction {
    pub kind: PenaltyKind,
    pub s: f64,
    pub tau: f64,
    pub d0: f64,
    pub d1: f64,
    /// Coefficient of the `1/d` term.
    pole: f64,
}

/// Sampled checks of the structural hypotheses on a penalty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyChecks {
    pub convex: bool,
    pub nonnegative: bool,
    /// Smallest and largest of `(−1)^k h₀^{(k)}(d) d^{s+k}` over `d < d0`, `k = 0, 1, 2`.
    pub near_zero_ratio: (f64, f64),
    /// Smallest and largest of `h₀″(d) / d^τ` over sampled `d ≥ d1`.
    pub far_ratio: (f64, f64),
}

impl PenaltyChecks {
    pub fn all_pass(&self) -> bool {
        self.convex
            && self.nonnegative
            && self.near_zero_ratio.0 > 0.0
            && self.near_zero_ratio.1.is_finite()
            && self.far_ratio.0 > 0.0
            && self.far_ratio.1.is_finite()
    }
}

impl PenaltyFunction {
    pub fn default_penalty() -> Self {
        Self { kind: PenaltyKind::Default, s: 1.0, tau: 0.0, d0: 0.5, d1: 1.0, pole: 0.5 }
    }

    pub fn negative_control() -> Self {
        Self { kind: PenaltyKind::NegControl, s: 1.0, tau: 0.0, d0: 0.5, d1: 1.0, pole: 1.0 }
    }

    pub fn from_kind(kind: PenaltyKind) -> Self {
        match kind {
            PenaltyKind::Default => Self::default_penalty(),
            PenaltyKind::NegControl => Self::negative_control(),
        }
    }

    /// `h₀(d)`; `+∞` for `d ≤ 0`.
    pub fn h(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        self.pole / d + 0.5 * (d - 1.0) * (d - 1.0)
    }

    pub fn dh(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::NEG_INFINITY;
        }
        -self.pole / (d * d) + (d - 1.0)
    }

    pub fn d2h(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        2.0 * self.pole / (d * d * d) + 1.0
    }

    /// `f(d) = d h₀′(d) − h₀(d)`.
    pub fn f(&self, d: f64) -> f64 {
        d * self.dh(d) - self.h(d)
    }

    /// Lower bound of `h₀″` on `(0, ∞)`.
    pub fn inf_d2h(&self) -> f64 {
        1.0
    }

    /// `sup_{s ≥ μ} |h₀″(s)|`.
    pub fn c_mu(&self, mu: f64) -> f64 {
        self.d2h(mu)
    }

    /// Root of `d + h₀′(d) = 0`: the Jacobian selected by a traction-free edge.
    pub fn natural_bc_root(&self) -> f64 {
        let g = |d: f64| d + self.dh(d);
        let br = Bracket::new(g, 0.1, 2.0).expect("d + h0'(d) changes sign on [0.1, 2]");
        find_root(g, br, DEFAULT_ROOT_TOL).expect("Brent converges on a bracketed smooth root")
    }

    pub fn check(&self) -> PenaltyChecks {
        let grid: Vec<f64> = (0..=400).map(|i| 10f64.powf(-6.0 + 10.0 * i as f64 / 400.0)).collect();
        let convex = grid.iter().all(|&d| self.d2h(d) > 0.0);
        let nonnegative = grid.iter().all(|&d| self.h(d) >= 0.0);
        let mut near = (f64::INFINITY, f64::NEG_INFINITY);
        let mut far = (f64::INFINITY, f64::NEG_INFINITY);
        for &d in &grid {
            if d < self.d0 {
                for (k, v) in [self.h(d), -self.dh(d), self.d2h(d)].into_iter().enumerate() {
                    let ratio = v * d.powf(self.s + k as f64);
                    near = (near.0.min(ratio), near.1.max(ratio));
                }
            }
            if d >= self.d1 {
                let ratio = self.d2h(d) / d.powf(self.tau);
                far = (far.0.min(ratio), far.1.max(ratio));
            }
        }
        PenaltyChecks { convex, nonnegative, near_zero_ratio: near, far_ratio: far }
    }

    /// Largest sampled `|h₀′(s)|/s` over `samples ≥ μ`, together with the
    /// constructive bound `2C_μ + |h₀′(μ)|/μ`.
    pub fn derivative_bound_check(&self, mu: f64, samples: &[f64]) -> (f64, f64) {
        let worst = samples.iter().filter(|&&s| s >= mu).map(|&s| self.dh(s).abs() / s).fold(0.0, f64::max);
        (worst, 2.0 * self.c_mu(mu) + self.dh(mu).abs() / mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::bisect;

    #[test]
    fn default_values_at_one() {
        let h = PenaltyFunction::default_penalty();
        assert_eq!(h.h(1.0), 0.5);
        assert_eq!(h.dh(1.0), -0.5);
        assert_eq!(h.d2h(1.0), 2.0);
        assert_eq!(1.0 + h.dh(1.0), 0.5);
        assert_eq!(h.h(0.0), f64::INFINITY);
        assert_eq!(h.h(-1.0), f64::INFINITY);
    }

    #[test]
    fn derivatives_match_differences() {
        for h in [PenaltyFunction::default_penalty(), PenaltyFunction::negative_control()] {
            for d in [0.05, 0.3, 1.0, 2.5, 10.0] {
                let e = 1e-5 * d;
                let dh = (h.h(d + e) - h.h(d - e)) / (2.0 * e);
                let d2h = (h.dh(d + e) - h.dh(d - e)) / (2.0 * e);
                assert!((dh - h.dh(d)).abs() < 1e-6 * (1.0 + dh.abs()));
                assert!((d2h - h.d2h(d)).abs() < 1e-6 * (1.0 + d2h.abs()));
            }
        }
    }

    #[test]
    fn hypotheses_hold_on_samples() {
        for h in [PenaltyFunction::default_penalty(), PenaltyFunction::negative_control()] {
            let c = h.check();
            assert!(c.all_pass(), "{c:?}");
        }
        // the d^{-1} asymptote: d h₀(d) → 1/2
        let h = PenaltyFunction::default_penalty();
        assert!((1e-8 * h.h(1e-8) - 0.5).abs() < 1e-7);
        for d in [1.0, 1.5, 3.0, 100.0] {
            assert!((1.0..=2.0).contains(&h.d2h(d)));
        }
    }

    #[test]
    fn natural_bc_roots() {
        let h = PenaltyFunction::default_penalty();
        let cubic = |d: f64| 4.0 * d * d * d - 2.0 * d * d - 1.0;
        let oracle = bisect(cubic, Bracket::new(cubic, 0.5, 1.0).unwrap(), 1e-14);
        assert!((h.natural_bc_root() - oracle).abs() < 1e-11);
        assert!((oracle - 0.8478).abs() < 1e-4);
        let neg = PenaltyFunction::negative_control();
        assert_eq!(neg.dh(1.0), -1.0);
        assert!((neg.natural_bc_root() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn derivative_bound() {
        let h = PenaltyFunction::default_penalty();
        let mu = 0.5;
        let samples: Vec<f64> = (0..1000).map(|i| mu * 10f64.powf(6.0 * i as f64 / 999.0)).collect();
        let (worst, bound) = h.derivative_bound_check(mu, &samples);
        assert!(worst <= bound);
        let (base, _) = h.derivative_bound_check(mu, &[mu]);
        assert_eq!(base, h.dh(mu).abs() / mu);
        // linear tail: |h₀′(s)|/s → 1
        assert!((h.dh(1e6).abs() / 1e6 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn parses_kinds() {
        assert_eq!("negcontrol".parse::<PenaltyKind>().unwrap(), PenaltyKind::NegControl);
        assert!("other".parse::<PenaltyKind>().is_err());
        assert_eq!(PenaltyKind::Default.to_string(), "default");
    }
}
