//! Concentrated low-energy initial data
//!
//! ```text
//! u_η(r) = M_u a_η (r² + η²)^{−α/2}
//! v_η(r) = (ln(R/η))^{−γ} ln(2R²/(r² + η²))      n = 2
//! v_η(r) = η^{δ−γ} (r² + η²)^{−δ/2}               n ≥ 3
//! ```
//!
//! with a_η fixed so that the discrete mass of u_η is exactly M_u.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energetics::{compute_energy_terms, EnergyTerms};
use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::motility::MotilityModel;
use crate::regime::{mmq, AdmissibilityCertificate};

/// Slack used when testing the strict inequalities between exponents.
const EDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialDataSpec {
    pub n: usize,
    pub radius: f64,
    pub mass: f64,
    pub eta: Option<f64>,
    pub eta0: f64,
    pub alpha: f64,
    pub p: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Only used for n ≥ 3.
    pub delta: Option<f64>,
    /// θ the γ-interval was computed from.
    pub theta: f64,
}

/// User overrides for the exponent selection; `None` keeps the default rule.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterOverrides {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub delta: Option<f64>,
}

/// Open interval for α given p-independent β, or `None` when it is empty.
fn alpha_interval(n: f64, beta: f64, mq: f64, m_minus_q2: f64) -> Option<(f64, f64)> {
    if mq >= 1.0 {
        return Some((n, f64::INFINITY));
    }
    let den = n * m_minus_q2 + 1.0;
    if den <= 0.0 {
        return None;
    }
    let lo = n * beta / den;
    let hi = 2.0 / (1.0 - mq);
    (lo < hi - EDGE).then_some((lo.max(n), hi))
}

impl InitialDataSpec {
    /// Default exponent selection for the model, with optional overrides.
    pub fn choose(
        model: &MotilityModel,
        theta: f64,
        mass: f64,
        overrides: &ParameterOverrides,
    ) -> Result<Self> {
        let params = model.params();
        let n = params.n;
        let nf = n as f64;
        let radius = params.radius;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Precondition(format!("mass M_u = {mass} must be positive")));
        }
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Precondition(format!("θ = {theta} must lie in (0, 1)")));
        }
        let mq = mmq(params.m, params.q1, params.q2);
        let m_minus_q2 = params.m - params.q2;
        let p_cap = nf / (nf - 1.0);

        let mut p = overrides.p.unwrap_or(0.5 * (1.0 + p_cap));
        let mut beta = overrides.beta.unwrap_or(0.5 * (nf / p + nf));
        let alpha = match overrides.alpha {
            Some(a) => a,
            None => {
                let mut found = alpha_interval(nf, beta, mq, m_minus_q2);
                // Lower β toward n/p; if that is not enough, push p toward n/(n−1).
                let mut tries = 0;
                while found.is_none() && tries < 60 {
                    tries += 1;
                    if overrides.p.is_none() && tries > 1 {
                        p = p_cap - 0.5 * (p_cap - p);
                    }
                    let floor = nf / p;
                    let start = overrides.beta.unwrap_or(0.5 * (floor + nf));
                    beta = start;
                    for _ in 0..60 {
                        if let Some(iv) = alpha_interval(nf, beta, mq, m_minus_q2) {
                            found = Some(iv);
                            break;
                        }
                        if overrides.beta.is_some() {
                            break;
                        }
                        beta = floor + 0.5 * (beta - floor);
                    }
                    if overrides.beta.is_some() && overrides.p.is_some() {
                        break;
                    }
                }
                let (lo, hi) = found.ok_or_else(|| {
                    Error::Infeasible(format!(
                        "no α satisfies the concentration window for n = {n}, m = {}, q1 = {}, q2 = {}",
                        params.m, params.q1, params.q2
                    ))
                })?;
                if hi.is_infinite() {
                    nf + 1.0
                } else {
                    0.5 * (lo + hi)
                }
            }
        };

        let (gamma, delta) = if n == 2 {
            (overrides.gamma.unwrap_or(0.5 * (1.0 - theta)), None)
        } else {
            let lo = (1.0 - theta) * nf;
            let hi = nf - 2.0;
            (
                overrides.gamma.unwrap_or(0.5 * (lo + hi)),
                Some(overrides.delta.unwrap_or(nf + 2.0)),
            )
        };

        let spec = Self {
            n,
            radius,
            mass,
            eta: None,
            eta0: 1f64.min(0.5 * radius),
            alpha,
            p,
            beta,
            gamma,
            delta,
            theta,
        };
        spec.validate(mq, m_minus_q2)?;
        Ok(spec)
    }

    /// Checks every exponent window; `mq` and `m − q₂` come from the model.
    pub fn validate(&self, mq: f64, m_minus_q2: f64) -> Result<()> {
        let nf = self.n as f64;
        let p_cap = nf / (nf - 1.0);
        if !(self.p > 1.0 && self.p < p_cap) {
            return Err(Error::Infeasible(format!("p = {} outside (1, {p_cap})", self.p)));
        }
        if !(self.beta > nf / self.p && self.beta < nf) {
            return Err(Error::Infeasible(format!(
                "β = {} outside ({}, {nf})",
                self.beta,
                nf / self.p
            )));
        }
        let alpha_ok = if mq >= 1.0 {
            self.alpha > nf
        } else {
            let den = nf * m_minus_q2 + 1.0;
            den > 0.0
                && self.alpha > nf * self.beta / den
                && self.alpha < 2.0 / (1.0 - mq)
                && self.alpha > nf
        };
        if !alpha_ok {
            return Err(Error::Infeasible(format!(
                "α = {} violates the concentration window (M = {mq}, β = {})",
                self.alpha, self.beta
            )));
        }
        if self.n == 2 {
            if !(self.gamma > 0.0 && self.gamma < 1.0 - self.theta) {
                return Err(Error::Infeasible(format!(
                    "γ = {} outside (0, 1 − θ) with θ = {}",
                    self.gamma, self.theta
                )));
            }
        } else {
            let lo = (1.0 - self.theta) * nf;
            if !(self.gamma > lo && self.gamma < nf - 2.0) {
                return Err(Error::Infeasible(format!(
                    "γ = {} outside ({lo}, {}) with θ = {}",
                    self.gamma,
                    nf - 2.0,
                    self.theta
                )));
            }
            match self.delta {
                Some(d) if d > nf + 1.0 => {}
                d => return Err(Error::Infeasible(format!("δ = {d:?} must exceed n + 1"))),
            }
        }
        if let Some(eta) = self.eta {
            check_eta(eta, self.eta0)?;
        }
        Ok(())
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        check_eta(eta, self.eta0)?;
        Ok(Self {
            eta: Some(eta),
            ..self.clone()
        })
    }

    fn eta(&self) -> Result<f64> {
        self.eta
            .ok_or_else(|| Error::Precondition("initial data needs η; call with_eta first".into()))
    }

    /// Shape (1 + r²/η²)^{−α/2}; u_η is a positive multiple of it.
    fn u_shape(&self, r: f64, eta: f64) -> f64 {
        let x = r / eta;
        (1.0 + x * x).powf(-0.5 * self.alpha)
    }

    /// v_η at radius r.
    pub fn v_profile(&self, r: f64) -> Result<f64> {
        let eta = self.eta()?;
        let rr = r * r + eta * eta;
        Ok(if self.n == 2 {
            let big_r = self.radius;
            (big_r / eta).ln().powf(-self.gamma) * (2.0 * big_r * big_r / rr).ln()
        } else {
            let delta = self.delta.expect("validated for n >= 3");
            // η^{δ−γ}(r²+η²)^{−δ/2} = η^{−γ}(1 + r²/η²)^{−δ/2}
            eta.powf(-self.gamma) * (rr / (eta * eta)).powf(-0.5 * delta)
        })
    }

    /// Continuum normalizer a_η = 1/∫_{B_R}(|x|²+η²)^{−α/2} dx, by quadrature.
    pub fn continuum_a_eta(&self) -> Result<f64> {
        let eta = self.eta()?;
        let omega = crate::grid::unit_sphere_area(self.n);
        let nf = self.n as f64;
        // Integrate the scaled shape in x = r/η: η^{n−α} ∫_0^{R/η} xⁿ⁻¹(1+x²)^{−α/2} dx.
        let upper = self.radius / eta;
        let integrand = |x: f64| x.powf(nf - 1.0) * (1.0 + x * x).powf(-0.5 * self.alpha);
        let inner = crate::quadrature::integrate(
            integrand,
            0.0,
            upper,
            (upper.ceil() as usize).clamp(4, 256),
            crate::quadrature::Tolerance::default(),
        )?;
        Ok(1.0 / (omega * eta.powf(nf - self.alpha) * inner))
    }
}

fn check_eta(eta: f64, eta0: f64) -> Result<()> {
    if eta > 0.0 && eta < eta0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("η = {eta} must lie in (0, η₀ = {eta0})")))
    }
}

/// Default parameters for `model`, taking θ from the certificate.
pub fn choose_parameters(
    model: &MotilityModel,
    cert: &AdmissibilityCertificate,
    mass: f64,
    overrides: &ParameterOverrides,
) -> Result<InitialDataSpec> {
    InitialDataSpec::choose(model, cert.theta(), mass, overrides)
}

/// u_η at cell centers together with the discrete a_η.
#[derive(Debug, Clone)]
pub struct BuiltDensity {
    pub field: RadialField,
    pub a_eta: f64,
}

pub fn build_u0(spec: &InitialDataSpec, grid: &Arc<RadialGrid>) -> Result<BuiltDensity> {
    let eta = spec.eta()?;
    check_grid(spec, grid)?;
    let shape: Vec<f64> = grid.centers().iter().map(|&r| spec.u_shape(r, eta)).collect();
    let total = grid.integrate(&shape);
    let scale = spec.mass / total;
    let values = shape.into_iter().map(|w| w * scale).collect();
    Ok(BuiltDensity {
        field: RadialField::new(grid.clone(), values)?,
        // u = M a (r²+η²)^{−α/2} = M a η^{−α} w, so a = η^α / Σ vol·w.
        a_eta: eta.powf(spec.alpha) / total,
    })
}

pub fn build_v0(spec: &InitialDataSpec, grid: &Arc<RadialGrid>) -> Result<RadialField> {
    spec.eta()?;
    check_grid(spec, grid)?;
    let values = grid
        .centers()
        .iter()
        .map(|&r| spec.v_profile(r))
        .collect::<Result<Vec<_>>>()?;
    RadialField::new(grid.clone(), values)
}

fn check_grid(spec: &InitialDataSpec, grid: &RadialGrid) -> Result<()> {
    if grid.n() != spec.n || (grid.radius() - spec.radius).abs() > 1e-12 * spec.radius {
        return Err(Error::Precondition(format!(
            "grid (n = {}, R = {}) does not match data (n = {}, R = {})",
            grid.n(),
            grid.radius(),
            spec.n,
            spec.radius
        )));
    }
    Ok(())
}

/// η₀/2, η₀/4, …, η₀/2^halvings.
pub fn eta_ladder(eta0: f64, halvings: usize) -> Vec<f64> {
    (1..=halvings).map(|k| eta0 / 2f64.powi(k as i32)).collect()
}

/// Discrete norms of one family member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniformNorms {
    pub eta: f64,
    pub a_eta: f64,
    /// max_i r_i^α u_i
    pub weighted_sup_u: f64,
    /// (Σ vol|v|^p + Σ_faces vol_face |Δv/Δr|^p)^{1/p}
    pub v_w1p: f64,
    /// max|r^β v| + max|Δ(r^β v)/Δr|
    pub weighted_v_w1inf: f64,
}

/// Volume associated with interior face j: half of each adjacent cell.
fn face_volume(grid: &RadialGrid, j: usize) -> f64 {
    0.5 * (grid.volumes()[j - 1] + grid.volumes()[j])
}

pub fn discrete_norms(spec: &InitialDataSpec, grid: &Arc<RadialGrid>) -> Result<UniformNorms> {
    let u = build_u0(spec, grid)?;
    let v = build_v0(spec, grid)?;
    let vv = v.values();
    let r = grid.centers();
    let vols = grid.volumes();
    let p = spec.p;
    let mut lp = 0.0;
    for i in 0..grid.cells() {
        lp += vols[i] * vv[i].abs().powf(p);
    }
    let w: Vec<f64> = r.iter().zip(vv).map(|(&r, &v)| r.powf(spec.beta) * v).collect();
    let mut w_sup = w.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let mut w_grad: f64 = 0.0;
    for j in 1..grid.cells() {
        let gap = grid.center_gap(j);
        lp += face_volume(grid, j) * ((vv[j] - vv[j - 1]) / gap).abs().powf(p);
        w_grad = w_grad.max(((w[j] - w[j - 1]) / gap).abs());
    }
    w_sup += w_grad;
    Ok(UniformNorms {
        eta: spec.eta()?,
        a_eta: u.a_eta,
        weighted_sup_u: u.field.weighted_sup(spec.alpha),
        v_w1p: lp.powf(1.0 / p),
        weighted_v_w1inf: w_sup,
    })
}

/// Uniform-bound report over a family of η values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformityReport {
    pub norms: Vec<UniformNorms>,
    /// Max of the three quantities over the family.
    pub bound: f64,
    /// Largest consecutive ratio (per quantity) after the settle index.
    pub worst_growth: [f64; 3],
}

/// Evaluates the three norms for every η and checks that none grows by more
/// than `max_growth` per halving from index `settle` on (0-based).
pub fn verify_uniform_bounds(
    spec: &InitialDataSpec,
    etas: &[f64],
    grid: &Arc<RadialGrid>,
    settle: usize,
    max_growth: f64,
) -> Result<UniformityReport> {
    let norms = etas
        .par_iter()
        .map(|&eta| discrete_norms(&spec.with_eta(eta)?, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = [0.0f64; 3];
    let mut bound: f64 = 0.0;
    for (k, nm) in norms.iter().enumerate() {
        let values = [nm.weighted_sup_u, nm.v_w1p, nm.weighted_v_w1inf];
        bound = values.iter().fold(bound, |b, &x| b.max(x));
        if k == 0 || k < settle + 1 {
            continue;
        }
        let prev = &norms[k - 1];
        let before = [prev.weighted_sup_u, prev.v_w1p, prev.weighted_v_w1inf];
        let names = ["sup r^α u_η", "W^{1,p} norm of v_η", "W^{1,∞} norm of r^β v_η"];
        for q in 0..3 {
            let ratio = values[q] / before[q];
            worst[q] = worst[q].max(ratio);
            if !(ratio <= max_growth) {
                return Err(Error::Uniformity {
                    quantity: names[q].to_string(),
                    eta: nm.eta,
                    ratio,
                });
            }
        }
    }
    Ok(UniformityReport {
        norms,
        bound,
        worst_growth: worst,
    })
}

/// Energy of one family member, with its four terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyEnergy {
    pub eta: f64,
    pub terms: EnergyTerms,
}

pub fn energy_of_family(
    model: &MotilityModel,
    spec: &InitialDataSpec,
    etas: &[f64],
    grid: &Arc<RadialGrid>,
) -> Result<Vec<FamilyEnergy>> {
    etas.par_iter()
        .map(|&eta| {
            let s = spec.with_eta(eta)?;
            let u = build_u0(&s, grid)?.field;
            let v = build_v0(&s, grid)?;
            Ok(FamilyEnergy {
                eta,
                terms: compute_energy_terms(&u, &v, model)?,
            })
        })
        .collect()
}

/// Finite-sample divergence test: strictly decreasing over the last `tail`
/// steps and the last value below the first by more than `drop`.
pub fn check_divergence(energies: &[f64], tail: usize, drop: f64) -> bool {
    if energies.len() < 2 || energies.len() <= tail {
        return false;
    }
    let start = energies.len() - 1 - tail;
    let decreasing = energies[start..].windows(2).all(|w| w[1] < w[0]);
    decreasing && *energies.last().unwrap() < energies[0] - drop
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_with(n: usize, radius: f64, alpha: f64, gamma: f64, delta: Option<f64>, eta: f64) -> InitialDataSpec {
        let nf = n as f64;
        InitialDataSpec {
            n,
            radius,
            mass: 1.0,
            eta: Some(eta),
            eta0: 1f64.min(radius / 2.0),
            alpha,
            p: 0.5 * (1.0 + nf / (nf - 1.0)),
            beta: 0.5 * (nf / (0.5 * (1.0 + nf / (nf - 1.0))) + nf),
            gamma,
            delta,
            theta: 0.5,
        }
    }

    #[test]
    fn discrete_normalizer_matches_continuum() {
        let spec = spec_with(2, 1.0, 3.0, 0.25, None, 0.1);
        let grid = Arc::new(RadialGrid::graded(2, 1.0, 4096, 0.1 / 64.0).unwrap());
        let built = build_u0(&spec, &grid).unwrap();
        let exact = 1.0 / (2.0 * std::f64::consts::PI * (1.0 / 0.1 - (1.0 + 0.01f64).powf(-0.5)));
        assert!((exact - 0.017675).abs() < 1e-6);
        assert!((built.a_eta - exact).abs() / exact < 1e-3);
        assert!((spec.continuum_a_eta().unwrap() - exact).abs() / exact < 1e-9);
        assert!((built.field.integral() - 1.0).abs() < 1e-14);
        assert!(built.field.values().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn planar_signal_at_origin() {
        let spec = spec_with(2, 1.0, 3.0, 0.25, None, 0.1);
        let v0 = spec.v_profile(0.0).unwrap();
        assert!((v0 - 10f64.ln().powf(-0.25) * 200f64.ln()).abs() < 1e-14);
        assert!((v0 - 4.3011).abs() < 1e-4);
        let grid = Arc::new(RadialGrid::uniform(2, 1.0, 200).unwrap());
        let v = build_v0(&spec, &grid).unwrap();
        assert!(v.values().iter().all(|&x| x > 0.0));
        assert!(v.values().windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn higher_dimensional_signal_at_origin() {
        let spec = spec_with(3, 1.0, 4.0, 0.9, Some(5.0), 0.05);
        assert!((spec.v_profile(0.0).unwrap() - 0.05f64.powf(-0.9)).abs() < 1e-12);
    }

    #[test]
    fn midpoint_rules_three_dimensions() {
        let model = MotilityModel::prototype(3, 1.0, 1.0, 1.0).unwrap();
        let s = InitialDataSpec::choose(&model, 0.9, 1.0, &ParameterOverrides::default()).unwrap();
        assert!((s.p - 1.25).abs() < 1e-15);
        assert!((s.beta - 2.7).abs() < 1e-14);
        assert_eq!(s.alpha, 4.0);
        assert!((s.gamma - 0.5 * (0.3 + 1.0)).abs() < 1e-14);
        assert_eq!(s.delta, Some(5.0));
        assert_eq!(s.eta0, 0.5);
    }

    #[test]
    fn midpoint_rules_planar_large_mmq() {
        let model = MotilityModel::prototype(2, 1.0, 1.2, 1.0).unwrap();
        let s = InitialDataSpec::choose(&model, 0.5, 1.0, &ParameterOverrides::default()).unwrap();
        assert_eq!(s.p, 1.5);
        assert!((s.beta - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.alpha, 3.0);
        assert_eq!(s.gamma, 0.25);
    }

    #[test]
    fn beta_is_lowered_until_alpha_window_opens() {
        let model = MotilityModel::prototype(2, 1.0, 0.4, 0.6).unwrap();
        let s = InitialDataSpec::choose(&model, 0.5, 1.0, &ParameterOverrides::default()).unwrap();
        let lo = 2.0 * s.beta / 0.6;
        assert!(lo < 5.0);
        assert!((s.beta - (4.0 / 3.0 + 1.0 / 12.0)).abs() < 1e-12);
        assert!((s.alpha - 0.5 * (lo + 5.0)).abs() < 1e-12);
        assert!(s.alpha > 4.8 && s.alpha < 4.9);
    }

    #[test]
    fn infeasible_point_is_rejected() {
        // n(m − q₂) + 1 ≤ 0 closes the window.
        let model = MotilityModel::prototype(2, 1.0, 0.0, 0.6).unwrap();
        assert!(matches!(
            InitialDataSpec::choose(&model, 0.5, 1.0, &ParameterOverrides::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn eta_must_lie_below_cap() {
        let spec = spec_with(3, 1.0, 4.0, 0.9, Some(5.0), 0.1);
        assert!(spec.with_eta(0.5).is_err());
        assert!(spec.with_eta(0.0).is_err());
        assert!(spec.with_eta(0.25).is_ok());
    }

    #[test]
    fn pointwise_envelope_bound_at_cap() {
        let spec = spec_with(3, 1.0, 4.0, 0.9, Some(5.0), 0.1);
        let grid = Arc::new(RadialGrid::graded(3, 1.0, 1024, 1e-3).unwrap());
        let cap = build_u0(&spec.with_eta(0.49).unwrap(), &grid).unwrap().a_eta;
        for eta in eta_ladder(0.5, 6) {
            let s = spec.with_eta(eta).unwrap();
            let u = build_u0(&s, &grid).unwrap();
            assert!(u.field.weighted_sup(4.0) <= cap * 1.0001);
        }
    }

    #[test]
    fn divergence_rule() {
        assert!(check_divergence(&[0.0, -1.0, -5.0, -9.0, -12.0], 3, 10.0));
        assert!(!check_divergence(&[0.0, -1.0, -5.0, -9.0, -9.5], 3, 10.0));
        assert!(!check_divergence(&[0.0, -20.0, -15.0, -16.0, -17.0], 3, 10.0));
    }
}
