//! Diffusion/sensitivity pairs (φ, ψ) and the derived functionals G and H.
//!
//! `G(s) = ∫_{s₀}^s ∫_{s₀}^σ φ/ψ dτ dσ` is evaluated through the single
//! integral `∫_{s₀}^s (s − τ) φ(τ)/ψ(τ) dτ`, which is nonnegative on both
//! sides of the anchor `s₀`. `H(s) = ∫_{s₀}^s σ φ(σ)/ψ(σ) dσ`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::regime::AdmissibilityCertificate;

/// A pointwise evaluator `[0, ∞) → ℝ`.
pub type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Static problem definition: dimension, ball radius, growth exponents and
/// the comparison constants of the two-sided power-law bounds on φ and ψ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelParams {
    pub n: usize,
    pub radius: f64,
    pub m: f64,
    pub q1: f64,
    pub q2: f64,
    pub k_phi1: f64,
    pub k_phi2: f64,
    pub k_psi1: f64,
    pub k_psi2: f64,
    pub s0: f64,
}

impl ModelParams {
    /// Parameters of the pure power-law pair with `q1 = q2 = q` and unit constants.
    pub fn prototype(n: usize, radius: f64, m: f64, q: f64) -> Self {
        Self {
            n,
            radius,
            m,
            q1: q,
            q2: q,
            k_phi1: 1.0,
            k_phi2: 1.0,
            k_psi1: 1.0,
            k_psi2: 1.0,
            s0: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Precondition(format!("dimension n = {} must be >= 2", self.n)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Precondition(format!("radius {} must be positive", self.radius)));
        }
        if !self.m.is_finite() {
            return Err(Error::Precondition("exponent m must be finite".into()));
        }
        if !(self.q1 > 0.0 && self.q1.is_finite()) {
            return Err(Error::Precondition(format!("q1 = {} must be positive", self.q1)));
        }
        if !(self.q2 >= self.q1 && self.q2.is_finite()) {
            return Err(Error::Precondition(format!(
                "ordering 0 < q1 <= q2 of the psi bounds violated (q1 = {}, q2 = {})",
                self.q1, self.q2
            )));
        }
        for (name, k) in [
            ("K_phi1", self.k_phi1),
            ("K_phi2", self.k_phi2),
            ("K_psi1", self.k_psi1),
            ("K_psi2", self.k_psi2),
        ] {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::Precondition(format!("{name} = {k} must be positive")));
            }
        }
        if !(self.s0 > 1.0 && self.s0.is_finite()) {
            return Err(Error::Precondition(format!("anchor s0 = {} must exceed 1", self.s0)));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum MotilityKind {
    /// φ(s) = (s+1)^{m−1}, ψ(s) = s(s+1)^{q−1}.
    Prototype,
    /// φ(s) = (s+1)^{m−1}, ψ(s) = s(s+1)^{m−1} ln(s+e); planar only.
    PrototypeLog,
    /// User-supplied evaluators.
    Custom { phi: Evaluator, psi: Evaluator },
}

impl fmt::Debug for MotilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl MotilityKind {
    pub fn label(&self) -> &'static str {
        match self {
            MotilityKind::Prototype => "prototype",
            MotilityKind::PrototypeLog => "prototype-log",
            MotilityKind::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MotilityModel {
    kind: MotilityKind,
    params: ModelParams,
    admissibility: Option<AdmissibilityCertificate>,
}

impl MotilityModel {
    pub fn prototype(n: usize, radius: f64, m: f64, q: f64) -> Result<Self> {
        let params = ModelParams::prototype(n, radius, m, q);
        params.validate()?;
        Ok(Self {
            kind: MotilityKind::Prototype,
            params,
            admissibility: None,
        })
    }

    /// The logarithmically enhanced planar pair with `m = q`.
    ///
    /// The upper ψ-exponent is placed at `q2 = 1.25 q` and `K_{ψ,2}` is fitted
    /// so that `ln(s+e) ≤ K_{ψ,2}(s+1)^{q2−q}` on a dense sample of `[0, 10¹²]`.
    pub fn prototype_log(radius: f64, m: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(Error::Precondition(format!("log model needs m = q > 0, got {m}")));
        }
        let q2 = 1.25 * m;
        let gap = q2 - m;
        let k_psi2 = 1.05
            * std::iter::once(0.0)
                .chain(log_samples(1e-6, 1e12, 4000))
                .map(|s| (s + std::f64::consts::E).ln() / (s + 1.0).powf(gap))
                .fold(0.0, f64::max);
        let params = ModelParams {
            n: 2,
            radius,
            m,
            q1: m,
            q2,
            k_phi1: 1.0,
            k_phi2: 1.0,
            k_psi1: 1.0,
            k_psi2,
            s0: std::f64::consts::E,
        };
        params.validate()?;
        Ok(Self {
            kind: MotilityKind::PrototypeLog,
            params,
            admissibility: None,
        })
    }

    pub fn custom(params: ModelParams, phi: Evaluator, psi: Evaluator) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            kind: MotilityKind::Custom { phi, psi },
            params,
            admissibility: None,
        })
    }

    pub fn with_s0(mut self, s0: f64) -> Result<Self> {
        self.params.s0 = s0;
        self.params.validate()?;
        Ok(self)
    }

    pub fn with_certificate(mut self, cert: AdmissibilityCertificate) -> Self {
        self.admissibility = Some(cert);
        self
    }

    pub fn kind(&self) -> &MotilityKind {
        &self.kind
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn certificate(&self) -> Option<&AdmissibilityCertificate> {
        self.admissibility.as_ref()
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    /// Nominal chemotactic exponent q used by the regime classifier.
    pub fn q(&self) -> f64 {
        self.params.q1
    }

    fn check(s: f64) -> Result<()> {
        if s >= 0.0 && s.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("argument s = {s} must be finite and nonnegative")))
        }
    }

    pub fn phi(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        Ok(self.phi_unchecked(s))
    }

    pub fn psi(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        Ok(self.psi_unchecked(s))
    }

    /// φ(s) without the domain check; for hot loops over validated states.
    #[inline]
    pub fn phi_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            MotilityKind::Prototype | MotilityKind::PrototypeLog => {
                power_or_one(s + 1.0, self.params.m - 1.0)
            }
            MotilityKind::Custom { phi, .. } => phi(s),
        }
    }

    #[inline]
    pub fn psi_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            MotilityKind::Custom { psi, .. } => psi(s),
            _ => s * self.psi_over_s_unchecked(s),
        }
    }

    /// ψ(s)/s, extended continuously to s = 0.
    #[inline]
    pub fn psi_over_s_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            MotilityKind::Prototype => power_or_one(s + 1.0, self.params.q1 - 1.0),
            MotilityKind::PrototypeLog => {
                power_or_one(s + 1.0, self.params.q1 - 1.0) * (s + std::f64::consts::E).ln()
            }
            MotilityKind::Custom { psi, .. } => {
                let s = s.max(1e-12);
                psi(s) / s
            }
        }
    }

    /// s·φ(s)/ψ(s), the integrand of H; finite at s = 0.
    #[inline]
    pub fn s_phi_over_psi_unchecked(&self, s: f64) -> f64 {
        match &self.kind {
            MotilityKind::Prototype => power_or_one(s + 1.0, self.params.m - self.params.q1),
            MotilityKind::PrototypeLog => {
                power_or_one(s + 1.0, self.params.m - self.params.q1)
                    / (s + std::f64::consts::E).ln()
            }
            MotilityKind::Custom { .. } => self.phi_unchecked(s) / self.psi_over_s_unchecked(s),
        }
    }

    fn closed_form_g(&self) -> bool {
        matches!(self.kind, MotilityKind::Prototype) && self.params.m == self.params.q1
    }

    /// G(s); closed form for the prototype with m = q, quadrature otherwise.
    pub fn g(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        if s == self.params.s0 {
            return Ok(0.0);
        }
        if self.closed_form_g() {
            return Ok(g_equal_exponents(s, self.params.s0));
        }
        self.g_by_quadrature(s)
    }

    /// G(s) by adaptive quadrature regardless of model kind.
    pub fn g_by_quadrature(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        let s0 = self.params.s0;
        let tol = Tolerance::default();
        if s > s0 {
            quadrature::integrate_log(
                |t| (s / t - 1.0) * self.s_phi_over_psi_unchecked(t),
                s0,
                s,
                tol,
            )
        } else if s < s0 {
            // (τ − s)·φ/ψ = (1 − s/τ)·τφ/ψ, bounded near τ = 0.
            quadrature::integrate(
                |t| (1.0 - s / t) * self.s_phi_over_psi_unchecked(t),
                s,
                s0,
                4,
                tol,
            )
        } else {
            Ok(0.0)
        }
    }

    /// H(s); closed form for the prototype, quadrature otherwise.
    pub fn h(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        if s == self.params.s0 {
            return Ok(0.0);
        }
        match self.kind {
            MotilityKind::Prototype => {
                let e = self.params.m - self.params.q1 + 1.0;
                let s0 = self.params.s0;
                Ok(if e.abs() < 1e-14 {
                    ((s + 1.0) / (s0 + 1.0)).ln()
                } else {
                    ((s + 1.0).powf(e) - (s0 + 1.0).powf(e)) / e
                })
            }
            _ => self.h_by_quadrature(s),
        }
    }

    pub fn h_by_quadrature(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        let s0 = self.params.s0;
        let tol = Tolerance::default();
        if s > s0 {
            quadrature::integrate_log(|t| self.s_phi_over_psi_unchecked(t), s0, s, tol)
        } else {
            quadrature::integrate(|t| self.s_phi_over_psi_unchecked(t), s0, s, 4, tol)
        }
    }
}

/// x^p with an exact shortcut for p = 0.
#[inline]
fn power_or_one(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else if p == 1.0 {
        x
    } else {
        x.powf(p)
    }
}

/// G for φ/ψ = 1/τ: s·ln(s/s₀) − (s − s₀), continuous at s = 0.
fn g_equal_exponents(s: f64, s0: f64) -> f64 {
    if s == 0.0 {
        s0
    } else {
        s * (s / s0).ln() - (s - s0)
    }
}

/// `count` log-spaced points covering `[lo, hi]`, both included.
pub fn log_samples(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = count.max(2) - 1;
    (0..=last).map(move |k| {
        if k == last {
            hi
        } else {
            (a + (b - a) * k as f64 / last as f64).exp()
        }
    })
}
