//! Lyapunov functional, dissipation, and the ODI blow-up-time bound.
//!
//! ```text
//! F(u, v) = ½∫|∇v|² + ½∫v² − ∫uv + ∫G(u)
//! D(u, v) = ∫f² + ∫g²,   f = Δv − v + u,   g = (φ(u)∇u − ψ(u)∇v)/√ψ(u)
//! ```
//!
//! Gradient quantities live on interior faces and are weighted with
//! `area · gap`; cell quantities are weighted with cell volumes. This is the
//! quadrature for which the semi-discrete scheme satisfies dF/dt = −D up to
//! the consistency error of G'.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RadialField;
use crate::motility::MotilityModel;
use crate::solver::StateSnapshot;

/// Floor on the argument of ψ inside the g-quotient.
pub const PSI_FLOOR_ARG: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    /// ½∫|∇v|²
    pub gradient: f64,
    /// ½∫v²
    pub v_square: f64,
    /// −∫uv
    pub coupling: f64,
    /// ∫G(u)
    pub g_integral: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.gradient + self.v_square + self.coupling + self.g_integral
    }
}

pub fn compute_energy_terms(u: &RadialField, v: &RadialField, model: &MotilityModel) -> Result<EnergyTerms> {
    let grid = u.grid();
    let (uu, vv) = (u.values(), v.values());
    let vols = grid.volumes();
    let areas = grid.areas();
    let mut gradient = 0.0;
    for j in 1..grid.cells() {
        let dv = vv[j] - vv[j - 1];
        gradient += areas[j] * dv * dv / grid.center_gap(j);
    }
    let mut v_square = 0.0;
    let mut coupling = 0.0;
    let mut g_integral = 0.0;
    for i in 0..grid.cells() {
        v_square += vols[i] * vv[i] * vv[i];
        coupling -= vols[i] * uu[i] * vv[i];
        g_integral += vols[i] * model.g(uu[i])?;
    }
    Ok(EnergyTerms {
        gradient: 0.5 * gradient,
        v_square: 0.5 * v_square,
        coupling,
        g_integral,
    })
}

/// f on cells, g on faces (index j for face j; entries 0 and N are zero).
#[derive(Debug, Clone)]
pub struct Fields {
    pub f: RadialField,
    pub g: Vec<f64>,
    /// Faces where the ψ floor was active.
    pub regularized: usize,
}

pub fn compute_fields(state: &StateSnapshot, model: &MotilityModel) -> Result<Fields> {
    let grid = state.grid();
    let (u, v) = (state.u.values(), state.v.values());
    let cells = grid.cells();
    let vols = grid.volumes();
    let areas = grid.areas();
    let psi_floor = model.psi_unchecked(PSI_FLOOR_ARG);
    let mut g = vec![0.0; cells + 1];
    let mut lap = vec![0.0; cells];
    let mut regularized = 0;
    for j in 1..cells {
        let (l, r) = (j - 1, j);
        let gap = grid.center_gap(j);
        let du = (u[r] - u[l]) / gap;
        let dv = (v[r] - v[l]) / gap;
        let phi = 0.5 * (model.phi_unchecked(u[l]) + model.phi_unchecked(u[r]));
        let mut psi = 0.5 * (model.psi_unchecked(u[l]) + model.psi_unchecked(u[r]));
        if psi < psi_floor {
            psi = psi_floor;
            regularized += 1;
        }
        g[j] = (phi * du - psi * dv) / psi.sqrt();
        let flux = areas[j] * dv;
        lap[l] += flux;
        lap[r] -= flux;
    }
    let f = (0..cells).map(|i| lap[i] / vols[i] - v[i] + u[i]).collect();
    Ok(Fields {
        f: RadialField::new(grid.clone(), f)?,
        g,
        regularized,
    })
}

/// D = Σ vol f² + Σ_faces area·gap·g².
pub fn dissipation_of(fields: &Fields) -> f64 {
    let grid = fields.f.grid();
    let areas = grid.areas();
    let mut d: f64 = fields.f.values().iter().zip(grid.volumes()).map(|(f, w)| w * f * f).sum();
    for j in 1..grid.cells() {
        d += areas[j] * grid.center_gap(j) * fields.g[j] * fields.g[j];
    }
    d
}

pub fn compute_dissipation(state: &StateSnapshot, model: &MotilityModel) -> Result<f64> {
    Ok(dissipation_of(&compute_fields(state, model)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyRecord {
    pub t: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub terms: EnergyTerms,
    pub mass_u: f64,
    pub mass_v: f64,
}

pub fn energy_record(state: &StateSnapshot, model: &MotilityModel) -> Result<EnergyRecord> {
    let terms = compute_energy_terms(&state.u, &state.v, model)?;
    Ok(EnergyRecord {
        t: state.t,
        f: terms.total(),
        d: compute_dissipation(state, model)?,
        terms,
        mass_u: state.mass_u(),
        mass_v: state.mass_v(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityReport {
    pub median_residual: f64,
    pub max_residual: f64,
    pub samples: usize,
}

/// Residuals |dF/dt + D|/(|D| + 1) at interior records, dF/dt by centered differences.
pub fn energy_identity_residuals(trace: &[EnergyRecord]) -> Result<Vec<f64>> {
    if trace.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "energy identity needs at least 3 records, got {}",
            trace.len()
        )));
    }
    let mut out = Vec::with_capacity(trace.len() - 2);
    for w in trace.windows(3) {
        let dt = w[2].t - w[0].t;
        if !(dt > 0.0) {
            return Err(Error::Precondition("trace times must increase strictly".into()));
        }
        let dfdt = (w[2].f - w[0].f) / dt;
        out.push((dfdt + w[1].d).abs() / (w[1].d.abs() + 1.0));
    }
    Ok(out)
}

pub fn verify_energy_identity(trace: &[EnergyRecord]) -> Result<IdentityReport> {
    let mut res = energy_identity_residuals(trace)?;
    let max_residual = res.iter().copied().fold(0.0, f64::max);
    res.sort_by(f64::total_cmp);
    let k = res.len();
    let median_residual = if k % 2 == 1 {
        res[k / 2]
    } else {
        0.5 * (res[k / 2 - 1] + res[k / 2])
    };
    Ok(IdentityReport {
        median_residual,
        max_residual,
        samples: k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub c1_hat: f64,
    pub gamma_hat: f64,
    pub r_squared: f64,
    pub samples: usize,
    /// (n+2)/(n+4)
    pub gamma_floor: f64,
    pub floor_consistent: bool,
}

/// Least squares of ln(−F) on ln D over records with −F > 2 and D > 1.
pub fn fit_f_d_scaling(trace: &[EnergyRecord], n: usize) -> Result<ScalingFit> {
    let pts: Vec<(f64, f64)> = trace
        .iter()
        .filter(|r| -r.f > 2.0 && r.d > 1.0 && r.d.is_finite() && r.f.is_finite())
        .map(|r| (r.d.ln(), (-r.f).ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "scaling fit needs 10 records with −F > 2 and D > 1, found {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("dissipation is constant over the fit range".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let nf = n as f64;
    let gamma_floor = (nf + 2.0) / (nf + 4.0);
    Ok(ScalingFit {
        c1_hat: intercept.exp(),
        gamma_hat: slope,
        r_squared,
        samples: pts.len(),
        gamma_floor,
        floor_consistent: slope >= gamma_floor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdiParams {
    pub c1: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl OdiParams {
    pub fn new(c1: f64, gamma: f64) -> Result<Self> {
        if !(c1 > 0.0 && c1.is_finite()) {
            return Err(Error::Precondition(format!("c1 = {c1} must be positive")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Precondition(format!("γ = {gamma} must lie in (0, 1)")));
        }
        Ok(Self {
            c1,
            gamma,
            lambda: (1.0 - gamma) / gamma,
        })
    }
}

/// Smallest λ for which the bound is still reported.
pub const LAMBDA_MIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdiBound {
    pub t_bound: f64,
    pub lambda: f64,
    /// (2c₁)^{−λ}
    pub start: f64,
}

impl OdiBound {
    /// Lower comparison curve ((2c₁)^{−λ} − λt)^{−1/λ} for −F; infinite at and after `t_bound`.
    pub fn comparison(&self, t: f64) -> f64 {
        let base = self.start - self.lambda * t;
        if base > 0.0 {
            base.powf(-1.0 / self.lambda)
        } else {
            f64::INFINITY
        }
    }
}

/// T_bound = (2c₁)^{−λ}/λ when F0 < −2c₁ and λ ≥ [`LAMBDA_MIN`].
pub fn odi_blowup_bound(f0: f64, odi: &OdiParams) -> Option<OdiBound> {
    if !(f0 < -2.0 * odi.c1) || odi.lambda < LAMBDA_MIN {
        return None;
    }
    let start = (2.0 * odi.c1).powf(-odi.lambda);
    Some(OdiBound {
        t_bound: start / odi.lambda,
        lambda: odi.lambda,
        start,
    })
}
