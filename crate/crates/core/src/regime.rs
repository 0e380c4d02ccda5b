//! Parameter-regime classification and sample-based admissibility certificates.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::motility::{log_samples, MotilityModel};

/// Absolute tolerance for "exactly on the critical line" and "denominator is zero".
const EDGE_TOL: f64 = 1e-12;

/// Safety factor applied to fitted constants.
const FIT_SAFETY: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Regime {
    /// Globally bounded.
    #[serde(rename = "GB")]
    Gb,
    /// Global, possibly unbounded as t → ∞.
    #[serde(rename = "IFTBU")]
    Iftbu,
    /// Finite-time blow-up possible.
    #[serde(rename = "FTBU")]
    Ftbu,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Gb => "GB",
            Regime::Iftbu => "IFTBU",
            Regime::Ftbu => "FTBU",
            Regime::Unknown => "UNKNOWN",
        })
    }
}

/// Left side of the main exponent condition, or the zero-denominator convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum MainConditionValue {
    Evaluated(f64),
    ZeroDenominator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub regime: Regime,
    pub n: usize,
    pub m: f64,
    pub q: f64,
    /// m − q − (n−2)/n; negative means supercritical.
    pub supercritical_margin: f64,
    pub cond_supercritical: bool,
    pub cond_main: bool,
    pub cond_main_value: MainConditionValue,
    pub cond_q_positive: bool,
    pub notes: Vec<String>,
}

fn critical_exponent(n: usize) -> f64 {
    (n as f64 - 2.0) / n as f64
}

/// 𝑀(m, q) = max{q₁, m + q₁ − q₂}.
pub fn mmq(m: f64, q1: f64, q2: f64) -> f64 {
    q1.max(m + q1 - q2)
}

fn main_condition(n: usize, m: f64, q1: f64, q2: f64) -> (bool, MainConditionValue) {
    let nf = n as f64;
    let gap = 1.0 - mmq(m, q1, q2);
    let denominator = (nf * (m - q2) + 1.0).max(0.0);
    if denominator <= EDGE_TOL {
        (gap <= 0.0, MainConditionValue::ZeroDenominator)
    } else {
        let lhs = gap * nf * (nf - 1.0) / denominator;
        (lhs < 2.0, MainConditionValue::Evaluated(lhs))
    }
}

/// Evaluates `(1 − 𝑀) n(n−1)/(n(m−q₂)+1)₊ < 2` for general `q₁ ≤ q₂`.
///
/// With a vanishing denominator the convention `a·n(n−1)/0 < 2 ⇔ a ≤ 0` applies.
pub fn check_growth_condition(
    n: usize,
    m: f64,
    q1: f64,
    q2: f64,
) -> Result<(bool, MainConditionValue)> {
    if n < 2 {
        return Err(Error::Precondition(format!("n = {n} must be >= 2")));
    }
    if !(q1 > 0.0) {
        return Err(Error::Precondition(format!("q1 = {q1} must be positive")));
    }
    if q2 < q1 {
        return Err(Error::Precondition(format!("q2 = {q2} must be >= q1 = {q1}")));
    }
    Ok(main_condition(n, m, q1, q2))
}

/// Classifies the power-law pair with exponents (m, q) on the n-ball.
pub fn classify(n: usize, m: f64, q: f64) -> RegimeVerdict {
    classify_general(n, m, q, q)
}

/// Classification using the lower/upper sensitivity exponents `q₁ ≤ q₂`.
///
/// Supercriticality is tested with `q₂` and the positivity requirement with `q₁`;
/// for `q₁ = q₂ = q` this is exactly [`classify`].
pub fn classify_general(n: usize, m: f64, q1: f64, q2: f64) -> RegimeVerdict {
    let margin = m - q2 - critical_exponent(n);
    let on_critical_line = margin.abs() <= EDGE_TOL;
    let cond_supercritical = margin < 0.0 && !on_critical_line;
    let cond_q_positive = q1 > 0.0;
    let (cond_main, cond_main_value) = main_condition(n, m, q1, q2);
    let mut notes = Vec::new();

    let regime = if on_critical_line {
        notes.push("m - q = (n-2)/n: critical line, neither regime result applies".to_string());
        Regime::Unknown
    } else if !cond_supercritical {
        notes.push("m - q > (n-2)/n: all solutions global and bounded".to_string());
        Regime::Gb
    } else if !cond_q_positive {
        notes.push("q <= 0: solutions global, unbounded ones blow up in infinite time".to_string());
        Regime::Iftbu
    } else if cond_main {
        if mmq(m, q1, q2) >= 1.0 {
            notes.push("max{m, q} >= 1: main condition holds trivially".to_string());
        }
        notes.push("supercritical with q > 0 and main condition: finite-time blow-up".to_string());
        Regime::Ftbu
    } else {
        notes.push("supercritical with q > 0 but main condition fails: open".to_string());
        Regime::Unknown
    };

    RegimeVerdict {
        regime,
        n,
        m,
        q: q1,
        supercritical_margin: margin,
        cond_supercritical,
        cond_main,
        cond_main_value,
        cond_q_positive,
        notes,
    }
}

/// Classification for a constructed model (uses its q₁, q₂).
pub fn classify_model(model: &MotilityModel) -> RegimeVerdict {
    let p = model.params();
    classify_general(p.n, p.m, p.q1, p.q2)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionGrid {
    pub n: usize,
    pub m_axis: Vec<f64>,
    pub q_axis: Vec<f64>,
    /// Row-major: `cells[iq * m_axis.len() + im]`.
    pub cells: Vec<Regime>,
}

impl RegionGrid {
    pub fn at(&self, im: usize, iq: usize) -> Regime {
        self.cells[iq * self.m_axis.len() + im]
    }

    /// `(m, q, regime)` triples in row-major order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, Regime)> + '_ {
        self.q_axis.iter().enumerate().flat_map(move |(iq, &q)| {
            self.m_axis
                .iter()
                .enumerate()
                .map(move |(im, &m)| (m, q, self.at(im, iq)))
        })
    }
}

fn axis(range: [f64; 2], resolution: usize) -> Vec<f64> {
    let last = resolution - 1;
    (0..resolution)
        .map(|k| {
            if k == last {
                range[1]
            } else {
                range[0] + (range[1] - range[0]) * k as f64 / last as f64
            }
        })
        .collect()
}

/// Classifies a `resolution × resolution` grid (endpoints included).
pub fn scan_region(
    n: usize,
    m_range: [f64; 2],
    q_range: [f64; 2],
    resolution: usize,
) -> Result<RegionGrid> {
    use rayon::prelude::*;
    if resolution < 2 {
        return Err(Error::Precondition(format!("resolution {resolution} must be >= 2")));
    }
    if n < 2 {
        return Err(Error::Precondition(format!("n = {n} must be >= 2")));
    }
    let m_axis = axis(m_range, resolution);
    let q_axis = axis(q_range, resolution);
    let cells = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| classify(n, m_axis[k % resolution], q_axis[k / resolution]).regime)
        .collect();
    Ok(RegionGrid {
        n,
        m_axis,
        q_axis,
        cells,
    })
}

/// Growth constants found by fitting the G/H inequalities on samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "dimension", rename_all = "snake_case")]
pub enum GrowthConstants {
    /// `G ≤ a s ln^θ s`, `H ≤ b s / ln s`.
    Planar { a: f64, theta: f64, b: f64 },
    /// `G ≤ a s^{2−θ}`, `H ≤ (n−2−ϑ)/n · G + K(s+1)`.
    Higher {
        a: f64,
        theta: f64,
        vartheta: f64,
        k: f64,
    },
}

impl GrowthConstants {
    pub fn theta(&self) -> f64 {
        match *self {
            GrowthConstants::Planar { theta, .. } | GrowthConstants::Higher { theta, .. } => theta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityCertificate {
    pub mmq: f64,
    pub main_condition_holds: bool,
    /// m − q₂ < (n−2)/n, which the growth bounds imply.
    pub subcritical_q2: bool,
    pub constants: GrowthConstants,
    pub sample_range: [f64; 2],
    pub samples: usize,
    /// Largest `lhs/rhs − 1` over all checked inequalities; ≤ 0 when every sample holds.
    pub max_residual: f64,
}

impl AdmissibilityCertificate {
    pub fn theta(&self) -> f64 {
        self.constants.theta()
    }
}

/// A sampled ratio is "bounded" if its maximum is attained before the last tenth of the samples.
fn bounded_trend(ratios: &[f64]) -> bool {
    let Some((argmax, max)) = ratios
        .iter()
        .copied()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return false;
    };
    max.is_finite() && (argmax as f64) < 0.9 * ratios.len() as f64
}

fn fitted(max_ratio: f64) -> f64 {
    if max_ratio > 0.0 {
        FIT_SAFETY * max_ratio
    } else {
        1e-12
    }
}

fn fail(inequality: &str, at: f64) -> Error {
    Error::Certification {
        inequality: inequality.to_string(),
        at,
    }
}

/// Numerically certifies the structural hypotheses on (φ, ψ) over samples in `[0, s_max]`.
///
/// Checks positivity, the two-sided power-law bounds, and fits the growth
/// constants of G and H. `theta` overrides the growth exponent (planar
/// default 1/2; for n ≥ 3 the largest admissible of 10³ candidates in
/// (2/n, 1) is used).
pub fn certify_admissibility(
    model: &MotilityModel,
    s_max: f64,
    samples: usize,
    theta: Option<f64>,
) -> Result<AdmissibilityCertificate> {
    let p = model.params();
    let n = p.n;
    let nf = n as f64;
    if samples < 100 {
        return Err(Error::Precondition(format!("samples = {samples} must be >= 100")));
    }
    if !(s_max > p.s0) {
        return Err(Error::Precondition(format!("S_max = {s_max} must exceed s0 = {}", p.s0)));
    }

    let mut worst = f64::NEG_INFINITY;
    let mut track = |lhs: f64, rhs: f64| {
        worst = worst.max(lhs / rhs - 1.0);
    };

    // Positivity and power-law sandwich on [0, S_max].
    for s in std::iter::once(0.0).chain(log_samples(1e-8, s_max, samples)) {
        let phi = model.phi_unchecked(s);
        let pos = model.psi_over_s_unchecked(s);
        if !(phi > 0.0) {
            return Err(fail("phi(s) > 0", s));
        }
        if !(pos > 0.0) {
            return Err(fail("psi(s)/s > 0", s));
        }
        let base = (s + 1.0).powf(p.m - 1.0);
        let rel = 1e-12;
        if phi < p.k_phi1 * base * (1.0 - rel) || phi > p.k_phi2 * base * (1.0 + rel) {
            return Err(fail("K_phi1 (s+1)^(m-1) <= phi(s) <= K_phi2 (s+1)^(m-1)", s));
        }
        let lo = p.k_psi1 * (s + 1.0).powf(p.q1 - 1.0);
        let hi = p.k_psi2 * (s + 1.0).powf(p.q2 - 1.0);
        if pos < lo * (1.0 - rel) || pos > hi * (1.0 + rel) {
            return Err(fail("K_psi1 s(s+1)^(q1-1) <= psi(s) <= K_psi2 s(s+1)^(q2-1)", s));
        }
        track(p.k_phi1 * base, phi);
        track(phi, p.k_phi2 * base);
        track(lo, pos);
        track(pos, hi);
    }

    let (main_condition_holds, _) = main_condition(n, p.m, p.q1, p.q2);
    let subcritical_q2 = p.m - p.q2 < critical_exponent(n);

    let grid: Vec<f64> = log_samples(p.s0, s_max, samples).skip(1).collect();
    let g: Vec<f64> = grid.iter().map(|&s| model.g(s)).collect::<Result<_>>()?;
    let h: Vec<f64> = grid.iter().map(|&s| model.h(s)).collect::<Result<_>>()?;

    let constants = if n == 2 {
        let theta = theta.unwrap_or(0.5);
        if !(theta > 0.0 && theta < 1.0) {
            return Err(fail("theta in (0, 1)", theta));
        }
        let g_ratio: Vec<f64> = grid
            .iter()
            .zip(&g)
            .map(|(&s, &g)| g / (s * s.ln().powf(theta)))
            .collect();
        if !bounded_trend(&g_ratio) {
            return Err(fail("G(s) <= a s ln^theta s (ratio still growing)", s_max));
        }
        let h_ratio: Vec<f64> = grid.iter().zip(&h).map(|(&s, &h)| h * s.ln() / s).collect();
        if !bounded_trend(&h_ratio) {
            return Err(fail("H(s) <= b s / ln s (ratio still growing)", s_max));
        }
        let a = fitted(g_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        let b = fitted(h_ratio.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        for ((&s, &g), &h) in grid.iter().zip(&g).zip(&h) {
            track(g, a * s * s.ln().powf(theta));
            if h > 0.0 {
                track(h, b * s / s.ln());
            }
        }
        GrowthConstants::Planar { a, theta, b }
    } else {
        let lower = 2.0 / nf;
        let g_ratio = |theta: f64| -> Vec<f64> {
            grid.iter()
                .zip(&g)
                .map(|(&s, &g)| g / s.powf(2.0 - theta))
                .collect()
        };
        let theta = match theta {
            Some(t) => {
                if !(t > lower && t < 1.0) {
                    return Err(fail("theta in (2/n, 1)", t));
                }
                if !bounded_trend(&g_ratio(t)) {
                    return Err(fail("G(s) <= a s^(2-theta) (ratio still growing)", s_max));
                }
                t
            }
            None => (1..=1000)
                .rev()
                .map(|k| lower + (1.0 - lower) * k as f64 / 1001.0)
                .find(|&t| bounded_trend(&g_ratio(t)))
                .ok_or_else(|| fail("G(s) <= a s^(2-theta) for some theta in (2/n, 1)", s_max))?,
        };
        let a = fitted(g_ratio(theta).into_iter().fold(f64::NEG_INFINITY, f64::max));

        let k_ratio = |vartheta: f64| -> Vec<f64> {
            let c = (nf - 2.0 - vartheta) / nf;
            grid.iter()
                .zip(&g)
                .zip(&h)
                .map(|((&s, &g), &h)| (h - c * g) / (s + 1.0))
                .collect()
        };
        let vartheta = (1..=1000)
            .rev()
            .map(|k| k as f64 / 1001.0)
            .find(|&v| bounded_trend(&k_ratio(v)))
            .ok_or_else(|| fail("H <= (n-2-vartheta)/n G + K(s+1) for some vartheta in (0, 1)", s_max))?;
        let k = fitted(k_ratio(vartheta).into_iter().fold(f64::NEG_INFINITY, f64::max));
        let c = (nf - 2.0 - vartheta) / nf;
        for ((&s, &g), &h) in grid.iter().zip(&g).zip(&h) {
            track(g, a * s.powf(2.0 - theta));
            let rhs = c * g + k * (s + 1.0);
            if h > 0.0 && rhs > 0.0 {
                track(h, rhs);
            }
        }
        GrowthConstants::Higher {
            a,
            theta,
            vartheta,
            k,
        }
    };

    if !subcritical_q2 {
        return Err(fail("m - q2 < (n-2)/n (implied by the growth bounds)", s_max));
    }

    Ok(AdmissibilityCertificate {
        mmq: mmq(p.m, p.q1, p.q2),
        main_condition_holds,
        subcritical_q2,
        constants,
        sample_range: [p.s0, s_max],
        samples,
        max_residual: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(3, 1.0, 1.0).regime, Regime::Ftbu);
        assert_eq!(classify(2, 1.2, 0.5).regime, Regime::Gb);
        assert_eq!(classify(2, -0.5, -0.2).regime, Regime::Iftbu);
        let v = classify(2, 0.4, 0.6);
        assert_eq!(v.regime, Regime::Ftbu);
        match v.cond_main_value {
            MainConditionValue::Evaluated(x) => assert!((x - 0.8 / 0.6).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        let v = classify(2, 0.3, 0.9);
        assert_eq!(v.regime, Regime::Unknown);
        assert_eq!(v.cond_main_value, MainConditionValue::ZeroDenominator);
    }

    #[test]
    fn critical_line_is_unknown() {
        assert_eq!(classify(2, 0.5, 0.5).regime, Regime::Unknown);
        assert_eq!(classify(3, 1.0, 2.0 / 3.0).regime, Regime::Unknown);
        assert_eq!(classify(4, 0.5, 0.0).regime, Regime::Unknown);
    }

    #[test]
    fn condition_examples() {
        assert_eq!(
            check_growth_condition(3, 1.0, 1.0, 1.0).unwrap(),
            (true, MainConditionValue::Evaluated(0.0))
        );
        let (ok, v) = check_growth_condition(3, 0.8, 0.5, 0.5).unwrap();
        assert!(ok);
        match v {
            MainConditionValue::Evaluated(x) => assert!((x - 1.2 / 1.9).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            check_growth_condition(2, 0.2, 0.7, 0.7).unwrap(),
            (false, MainConditionValue::ZeroDenominator)
        );
    }

    #[test]
    fn condition_precondition_errors() {
        assert!(matches!(check_growth_condition(2, 0.5, 0.0, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(check_growth_condition(2, 0.5, 0.6, 0.5), Err(Error::Precondition(_))));
    }

    #[test]
    fn degenerate_scan_matches_corners() {
        let g = scan_region(2, [-1.0, 1.4], [-1.0, 1.4], 2).unwrap();
        assert_eq!(g.cells.len(), 4);
        for (m, q, r) in g.rows() {
            assert_eq!(r, classify(2, m, q).regime);
        }
        assert!(scan_region(2, [0.0, 1.0], [0.0, 1.0], 1).is_err());
    }

    #[test]
    fn planar_prototype_certificate() {
        let model = MotilityModel::prototype(2, 1.0, 0.4, 0.6).unwrap();
        let cert = certify_admissibility(&model, 1e6, 400, Some(0.5)).unwrap();
        match cert.constants {
            GrowthConstants::Planar { a, b, theta } => {
                assert!(a.is_finite() && a > 0.0);
                assert!(b.is_finite() && b > 0.0);
                assert_eq!(theta, 0.5);
            }
            ref other => panic!("{other:?}"),
        }
        assert!(cert.main_condition_holds && cert.subcritical_q2);
        assert!(cert.max_residual <= 0.0);
    }

    #[test]
    fn log_model_certificate_uses_half() {
        let model = MotilityModel::prototype_log(1.0, 1.0).unwrap();
        let cert = certify_admissibility(&model, 1e6, 400, None).unwrap();
        assert_eq!(cert.theta(), 0.5);
        assert!(cert.main_condition_holds);
    }

    #[test]
    fn higher_dimensional_certificate_with_m_above_q() {
        let model = MotilityModel::prototype(3, 1.0, 1.01, 1.0).unwrap();
        let cert = certify_admissibility(&model, 1e6, 400, None).unwrap();
        match cert.constants {
            GrowthConstants::Higher { theta, vartheta, k, .. } => {
                assert!(theta > 2.0 / 3.0 && theta < 1.0);
                assert!(vartheta > 0.0 && vartheta < 1.0);
                assert!(k > 0.0);
            }
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_admissible_pair_fails_with_location() {
        // Planar m = q: H(s) = s − s0 outgrows s/ln s.
        let model = MotilityModel::prototype(2, 1.0, 0.8, 0.8).unwrap();
        let err = certify_admissibility(&model, 1e6, 200, None).unwrap_err();
        assert!(matches!(err, Error::Certification { .. }), "{err}");
        // Bounded-regime point in 3-D: G grows like s^1.7.
        let model = MotilityModel::prototype(3, 1.0, 1.2, 0.5).unwrap();
        assert!(certify_admissibility(&model, 1e6, 200, None).is_err());
    }
}
