//! Explicit finite-volume integrator for the radial system
//!
//! ```text
//! u_t = r^{1−n} (r^{n−1} [φ(u) u_r − ψ(u) v_r])_r
//! v_t = r^{1−n} (r^{n−1} v_r)_r − v + u
//! ```
//!
//! with zero flux at r = 0 (symmetry) and r = R (Neumann). The u-update is in
//! flux form, so Σ vol_i u_i changes only by roundoff.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::motility::MotilityModel;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSnapshot {
    pub t: f64,
    pub u: RadialField,
    pub v: RadialField,
}

impl StateSnapshot {
    pub fn new(t: f64, u: RadialField, v: RadialField) -> Result<Self> {
        if !Arc::ptr_eq(u.grid(), v.grid()) && u.grid() != v.grid() {
            return Err(Error::Precondition("u and v live on different grids".into()));
        }
        if let Some(x) = u.values().iter().chain(v.values()).find(|&&x| x < 0.0) {
            return Err(Error::Domain(format!("state has negative entry {x}")));
        }
        Ok(Self { t, u, v })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.u.grid()
    }

    pub fn mass_u(&self) -> f64 {
        self.u.integral()
    }

    pub fn mass_v(&self) -> f64 {
        self.v.integral()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub cfl_safety: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub u_blowup_threshold: f64,
    pub t_end: f64,
    pub monitor_alpha: f64,
    pub monitor_kappa: f64,
    /// Multiplier on ψ; 0 turns the chemotactic drift off.
    pub chemotaxis_switch: f64,
    /// Maximum number of clipped cells·steps before the run aborts.
    pub clip_budget: u64,
    /// Safety stop on the number of accepted steps.
    pub max_steps: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cfl_safety: 0.9,
            dt_min: 1e-13,
            dt_max: 1e-2,
            u_blowup_threshold: 1e8,
            t_end: 1.0,
            monitor_alpha: 1.0,
            monitor_kappa: 1.0,
            chemotaxis_switch: 1.0,
            clip_budget: 1_000_000,
            max_steps: u64::MAX,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cfl_safety", self.cfl_safety),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
            ("u_blowup_threshold", self.u_blowup_threshold),
            ("monitor_alpha", self.monitor_alpha),
            ("monitor_kappa", self.monitor_kappa),
        ];
        for (name, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("solver.{name} = {x} must be positive")));
            }
        }
        if self.cfl_safety > 1.0 {
            return Err(Error::Config(format!(
                "solver.cfl_safety = {} must lie in (0, 1]",
                self.cfl_safety
            )));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("solver.t_end = {} must be >= 0", self.t_end)));
        }
        if !(0.0..=1.0).contains(&self.chemotaxis_switch) {
            return Err(Error::Config(format!(
                "solver.chemotaxis_switch = {} must lie in [0, 1]",
                self.chemotaxis_switch
            )));
        }
        if self.dt_min > self.dt_max {
            return Err(Error::Config("solver.dt_min exceeds solver.dt_max".into()));
        }
        Ok(())
    }
}

/// Reusable scratch space for [`Stepper`].
#[derive(Debug, Clone)]
pub struct Stepper {
    flux_u: Vec<f64>,
    flux_v: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    psi_over_u: Vec<f64>,
    rate: Vec<f64>,
    /// Clipped cells·steps so far.
    pub clip_events: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepResult {
    Advanced { dt: f64 },
    /// The admissible step fell below `dt_min`; the state is left untouched.
    Underflow { dt: f64 },
}

impl Stepper {
    pub fn new(cells: usize) -> Self {
        Self {
            flux_u: vec![0.0; cells + 1],
            flux_v: vec![0.0; cells + 1],
            phi: vec![0.0; cells],
            psi: vec![0.0; cells],
            psi_over_u: vec![0.0; cells],
            rate: vec![0.0; cells],
            clip_events: 0,
        }
    }

    /// Largest stable step for the current state (before the CFL safety factor).
    ///
    /// Every cell's explicit update is a nonnegative combination of old
    /// values when `dt · rate_i ≤ 1`, where `rate_i` is the total outflow
    /// coefficient of the cell (diffusion through both faces, upwinded drift
    /// out of the cell, and the linear decay of v).
    fn stable_dt(&mut self, state: &StateSnapshot, model: &MotilityModel, chi: f64) -> f64 {
        let grid = state.grid();
        let u = state.u.values();
        let v = state.v.values();
        let areas = grid.areas();
        let vols = grid.volumes();
        let cells = grid.cells();
        for i in 0..cells {
            self.phi[i] = model.phi_unchecked(u[i]);
            self.psi_over_u[i] = model.psi_over_s_unchecked(u[i]);
            self.psi[i] = u[i] * self.psi_over_u[i];
        }
        self.rate.iter_mut().for_each(|r| *r = 0.0);
        let mut rate_v = vec![0.0; cells];
        for j in 1..cells {
            let (l, r) = (j - 1, j);
            let gap = grid.center_gap(j);
            let a = areas[j];
            let diff = a * 0.5 * (self.phi[l] + self.phi[r]) / gap;
            let lap = a / gap;
            let drift = a * chi * (v[r] - v[l]) / gap;
            self.rate[l] += diff;
            self.rate[r] += diff;
            if drift > 0.0 {
                self.rate[l] += drift * self.psi_over_u[l];
            } else {
                self.rate[r] += -drift * self.psi_over_u[r];
            }
            rate_v[l] += lap;
            rate_v[r] += lap;
        }
        let mut worst: f64 = 0.0;
        for i in 0..cells {
            worst = worst.max(self.rate[i] / vols[i]).max(rate_v[i] / vols[i] + 1.0);
        }
        if worst > 0.0 {
            1.0 / worst
        } else {
            f64::INFINITY
        }
    }

    /// Advances `state` by one explicit step, capped so that `t` does not pass `t_end`.
    pub fn step(
        &mut self,
        state: &mut StateSnapshot,
        model: &MotilityModel,
        cfg: &SolverConfig,
    ) -> Result<StepResult> {
        let chi = cfg.chemotaxis_switch;
        let mut dt = (cfg.cfl_safety * self.stable_dt(state, model, chi)).min(cfg.dt_max);
        if dt < cfg.dt_min {
            return Ok(StepResult::Underflow { dt });
        }
        let remaining = cfg.t_end - state.t;
        if remaining < dt {
            dt = remaining;
        }
        self.apply(state, chi, dt, cfg)?;
        Ok(StepResult::Advanced { dt })
    }

    /// Forward-Euler update with a prescribed `dt`; coefficients from `stable_dt`.
    fn apply(&mut self, state: &mut StateSnapshot, chi: f64, dt: f64, cfg: &SolverConfig) -> Result<()> {
        let grid = state.grid().clone();
        let cells = grid.cells();
        let areas = grid.areas();
        let vols = grid.volumes();
        {
            let u = state.u.values();
            let v = state.v.values();
            // Outward fluxes times face area; faces 0 and N stay zero.
            for j in 1..cells {
                let (l, r) = (j - 1, j);
                let gap = grid.center_gap(j);
                let dv = v[r] - v[l];
                let upwind = if dv > 0.0 { self.psi[l] } else { self.psi[r] };
                let phi_face = 0.5 * (self.phi[l] + self.phi[r]);
                self.flux_u[j] = areas[j] * (-phi_face * (u[r] - u[l]) + chi * upwind * dv) / gap;
                self.flux_v[j] = -areas[j] * dv / gap;
            }
            self.flux_u[0] = 0.0;
            self.flux_u[cells] = 0.0;
            self.flux_v[0] = 0.0;
            self.flux_v[cells] = 0.0;
        }
        let mass_before = if cfg.clip_budget > 0 { state.u.integral() } else { 0.0 };
        let u_old: Vec<f64> = state.u.values().to_vec();
        let mut negatives = false;
        {
            let u = state.u.values_mut();
            for i in 0..cells {
                u[i] += dt * (self.flux_u[i] - self.flux_u[i + 1]) / vols[i];
                if u[i] < 0.0 {
                    negatives = true;
                }
            }
        }
        {
            let v = state.v.values_mut();
            for i in 0..cells {
                let lap = (self.flux_v[i] - self.flux_v[i + 1]) / vols[i];
                v[i] += dt * (lap - v[i] + u_old[i]);
                if v[i] < 0.0 {
                    v[i] = 0.0;
                }
            }
        }
        state.t += dt;
        if negatives {
            self.clip(state, mass_before, cfg)?;
        }
        Ok(())
    }

    /// Clips negative densities to zero and rescales u to restore the pre-step mass.
    fn clip(&mut self, state: &mut StateSnapshot, mass_before: f64, cfg: &SolverConfig) -> Result<()> {
        let u = state.u.values_mut();
        let mut counted = 0u64;
        for x in u.iter_mut() {
            if *x < 0.0 {
                if *x < -1e-12 {
                    counted += 1;
                }
                *x = 0.0;
            }
        }
        let mass_after = state.u.integral();
        if mass_after > 0.0 {
            let scale = mass_before / mass_after;
            state.u.values_mut().iter_mut().for_each(|x| *x *= scale);
        }
        self.clip_events += counted;
        if self.clip_events > cfg.clip_budget {
            return Err(Error::ClipBudget {
                budget: cfg.clip_budget,
                t: state.t,
            });
        }
        Ok(())
    }
}

/// One explicit step on a fresh scratch buffer; see [`Stepper::step`].
pub fn step(state: &StateSnapshot, model: &MotilityModel, cfg: &SolverConfig) -> Result<(StateSnapshot, StepResult)> {
    let mut next = state.clone();
    let mut stepper = Stepper::new(state.grid().cells());
    let result = stepper.step(&mut next, model, cfg)?;
    Ok((next, result))
}

/// Discrete suprema `(max_i r_i^α u_i, max_i r_i^κ v_i)`.
pub fn envelope_monitor(state: &StateSnapshot, alpha: f64, kappa: f64) -> (f64, f64) {
    (state.u.weighted_sup(alpha), state.v.weighted_sup(kappa))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    BlowupDetected,
    DtUnderflow,
}

impl Outcome {
    /// Both detection routes count as numerical blow-up.
    pub fn is_blowup(self) -> bool {
        !matches!(self, Outcome::Completed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub outcome: Outcome,
    pub t_final: f64,
    pub steps: u64,
    pub dt_last: f64,
    pub peak_sup_u: f64,
    pub peak_sup_v: f64,
    pub initial_envelope_u: f64,
    pub initial_envelope_v: f64,
    /// Running maximum of max_i r_i^α u_i.
    pub peak_envelope_u: f64,
    /// Running maximum of max_i r_i^κ v_i.
    pub peak_envelope_v: f64,
    /// Largest envelope ratio to its initial value, over steps before the final 1% of the run.
    pub envelope_ratio_before_final_percent: [f64; 2],
    pub clip_events: u64,
    pub mass_initial: f64,
    pub mass_final: f64,
}

/// Per-step hook: `(state, step index, dt of the step just taken, is_last)`.
/// Called once at t = 0 with `dt = 0` and once after every accepted step.
pub trait RunObserver {
    fn observe(&mut self, state: &StateSnapshot, step: u64, dt: f64, last: bool) -> Result<()>;
}

impl<F> RunObserver for F
where
    F: FnMut(&StateSnapshot, u64, f64, bool) -> Result<()>,
{
    fn observe(&mut self, state: &StateSnapshot, step: u64, dt: f64, last: bool) -> Result<()> {
        self(state, step, dt, last)
    }
}

/// Integrates until `t_end`, blow-up of ‖u‖_∞, or step underflow.
pub fn run(
    initial: StateSnapshot,
    model: &MotilityModel,
    cfg: &SolverConfig,
    observer: &mut dyn RunObserver,
) -> Result<(RunSummary, StateSnapshot)> {
    cfg.validate()?;
    let mut state = initial;
    let mut stepper = Stepper::new(state.grid().cells());
    let mass_initial = state.mass_u();
    let (env_u0, env_v0) = envelope_monitor(&state, cfg.monitor_alpha, cfg.monitor_kappa);
    let mut peak_env = [env_u0, env_v0];
    let mut peak_sup = [state.u.max(), state.v.max()];
    // Envelope history (t, env_u, env_v) to evaluate the final-1% window once t_final is known.
    let mut env_history: Vec<(f64, f64, f64)> = vec![(state.t, env_u0, env_v0)];
    let mut steps = 0u64;
    let mut dt_last = 0.0;

    let mut outcome = if state.u.max() >= cfg.u_blowup_threshold {
        Some(Outcome::BlowupDetected)
    } else if state.t >= cfg.t_end {
        Some(Outcome::Completed)
    } else {
        None
    };
    observer.observe(&state, 0, 0.0, outcome.is_some())?;

    while outcome.is_none() {
        if steps >= cfg.max_steps {
            return Err(Error::Precondition(format!(
                "step limit {} reached at t = {:e}",
                cfg.max_steps, state.t
            )));
        }
        match stepper.step(&mut state, model, cfg)? {
            StepResult::Underflow { dt } => {
                dt_last = dt;
                outcome = Some(Outcome::DtUnderflow);
                observer.observe(&state, steps, dt, true)?;
                break;
            }
            StepResult::Advanced { dt } => {
                steps += 1;
                dt_last = dt;
                let sup_u = state.u.max();
                let (eu, ev) = envelope_monitor(&state, cfg.monitor_alpha, cfg.monitor_kappa);
                peak_env[0] = peak_env[0].max(eu);
                peak_env[1] = peak_env[1].max(ev);
                peak_sup[0] = peak_sup[0].max(sup_u);
                peak_sup[1] = peak_sup[1].max(state.v.max());
                env_history.push((state.t, eu, ev));
                if sup_u >= cfg.u_blowup_threshold {
                    outcome = Some(Outcome::BlowupDetected);
                } else if state.t >= cfg.t_end {
                    outcome = Some(Outcome::Completed);
                }
                observer.observe(&state, steps, dt, outcome.is_some())?;
            }
        }
    }

    let t_final = state.t;
    let cutoff = 0.99 * t_final;
    let mut ratio: [f64; 2] = [0.0, 0.0];
    for &(t, eu, ev) in &env_history {
        if t <= cutoff || t == 0.0 {
            ratio[0] = ratio[0].max(safe_ratio(eu, env_u0));
            ratio[1] = ratio[1].max(safe_ratio(ev, env_v0));
        }
    }

    let summary = RunSummary {
        outcome: outcome.expect("loop exits with an outcome"),
        t_final,
        steps,
        dt_last,
        peak_sup_u: peak_sup[0],
        peak_sup_v: peak_sup[1],
        initial_envelope_u: env_u0,
        initial_envelope_v: env_v0,
        peak_envelope_u: peak_env[0],
        peak_envelope_v: peak_env[1],
        envelope_ratio_before_final_percent: ratio,
        clip_events: stepper.clip_events,
        mass_initial,
        mass_final: state.mass_u(),
    };
    Ok((summary, state))
}

fn safe_ratio(x: f64, base: f64) -> f64 {
    if base > 0.0 {
        x / base
    } else if x > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(grid: &Arc<RadialGrid>, u: impl Fn(f64) -> f64, v: impl Fn(f64) -> f64) -> StateSnapshot {
        StateSnapshot::new(
            0.0,
            RadialField::from_fn(grid.clone(), u).unwrap(),
            RadialField::from_fn(grid.clone(), v).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn homogeneous_u_is_bitwise_stationary() {
        let grid = Arc::new(RadialGrid::uniform(3, 1.0, 32).unwrap());
        let model = MotilityModel::prototype(3, 1.0, 0.7, 0.9).unwrap();
        let mut s = state(&grid, |_| 1.7, |_| 0.3);
        let cfg = SolverConfig {
            t_end: 0.5,
            ..Default::default()
        };
        let mut stepper = Stepper::new(32);
        let mut gap_prev = (0.3f64 - 1.7).abs();
        for _ in 0..50 {
            stepper.step(&mut s, &model, &cfg).unwrap();
            assert!(s.u.values().iter().all(|&x| x == 1.7));
            let v0 = s.v.values()[0];
            assert!(s.v.values().iter().all(|&x| x == v0));
            let gap = (v0 - 1.7).abs();
            assert!(gap < gap_prev);
            gap_prev = gap;
        }
    }

    #[test]
    fn heat_step_obeys_max_principle_and_conserves_mass() {
        let grid = Arc::new(RadialGrid::graded(2, 1.0, 64, 1e-3).unwrap());
        let model = MotilityModel::prototype(2, 1.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            chemotaxis_switch: 0.0,
            t_end: 1.0,
            ..Default::default()
        };
        // Pseudo-random but deterministic data.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64
        };
        let u: Vec<f64> = (0..64).map(|_| next() * 5.0).collect();
        let v: Vec<f64> = (0..64).map(|_| next()).collect();
        let mut s = StateSnapshot::new(
            0.0,
            RadialField::new(grid.clone(), u).unwrap(),
            RadialField::new(grid.clone(), v).unwrap(),
        )
        .unwrap();
        let m0 = s.mass_u();
        let mut stepper = Stepper::new(64);
        let mut max_prev = s.u.max();
        for _ in 0..200 {
            stepper.step(&mut s, &model, &cfg).unwrap();
            let max = s.u.max();
            assert!(max <= max_prev * (1.0 + 1e-15));
            max_prev = max;
        }
        assert!((s.mass_u() - m0).abs() / m0 < 1e-14);
        assert_eq!(stepper.clip_events, 0);
    }

    #[test]
    fn zero_horizon_completes_with_one_observation() {
        let grid = Arc::new(RadialGrid::uniform(2, 1.0, 8).unwrap());
        let model = MotilityModel::prototype(2, 1.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            t_end: 0.0,
            ..Default::default()
        };
        let mut calls = 0;
        let mut obs = |_: &StateSnapshot, _: u64, _: f64, last: bool| {
            calls += 1;
            assert!(last);
            Ok(())
        };
        let (summary, _) = run(state(&grid, |_| 1.0, |_| 1.0), &model, &cfg, &mut obs).unwrap();
        assert_eq!(summary.outcome, Outcome::Completed);
        assert_eq!(summary.steps, 0);
        assert_eq!(calls, 1);
    }

    #[test]
    fn dt_floor_reports_underflow() {
        let grid = Arc::new(RadialGrid::uniform(2, 1.0, 8).unwrap());
        let model = MotilityModel::prototype(2, 1.0, 1.0, 1.0).unwrap();
        let cfg = SolverConfig {
            dt_min: 1.0,
            dt_max: 1.0,
            ..Default::default()
        };
        let mut obs = |_: &StateSnapshot, _: u64, _: f64, _: bool| Ok(());
        let (summary, _) = run(state(&grid, |_| 1.0, |_| 1.0), &model, &cfg, &mut obs).unwrap();
        assert_eq!(summary.outcome, Outcome::DtUnderflow);
        assert!(summary.outcome.is_blowup());
    }

    #[test]
    fn envelope_of_zero_density() {
        let grid = Arc::new(RadialGrid::uniform(3, 1.0, 10).unwrap());
        let s = state(&grid, |_| 0.0, |r| 1.0 + r);
        let (eu, ev) = envelope_monitor(&s, 2.0, 1.5);
        assert_eq!(eu, 0.0);
        let expect = grid
            .centers()
            .iter()
            .map(|&r| r.powf(1.5) * (1.0 + r))
            .fold(0.0, f64::max);
        assert_eq!(ev, expect);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            cfl_safety: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            chemotaxis_switch: -0.1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
