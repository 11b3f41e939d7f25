//! Calibration of the parametric gain from output photon numbers measured
//! at several pump powers, fitting `N = m·sinh²(c·√P) + b·P` for `c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-spaced starting grid, expressed as the gain reached at the highest power.
const GRID_GAIN_MIN: f64 = 1e-3;
const GRID_GAIN_MAX: f64 = 10.0;
const GRID_POINTS: usize = 400;
const GOLDEN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub pump_power: f64,
    pub mean_photons: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl PowerPoint {
    pub fn new(pump_power: f64, mean_photons: f64) -> Self {
        Self {
            pump_power,
            mean_photons,
            weight: None,
        }
    }
}

/// Default weights for points without an explicit `weight`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    /// `1/N_j`, for shot-noise-like heteroscedastic data.
    InversePhotons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// The best fit sits at `c → 0`: the data carry no gain beyond background.
    ZeroGainBoundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFit {
    pub gain_coefficient: f64,
    /// `sqrt(Σ w_j r_j²)` at the optimum.
    pub residual_norm: f64,
    /// `Γ_j = c·√P_j`, in input order.
    pub gains: Vec<f64>,
    pub warnings: Vec<FitWarning>,
}

pub fn fit_gain_curve(points: &[PowerPoint], modes: u64, background_slope: f64) -> Result<GainFit> {
    fit_gain_curve_weighted(points, modes, background_slope, Weighting::Uniform)
}

/// Coarse log-grid search over `c` followed by golden-section refinement of
/// the bracketing cell and a Newton polish of the stationarity condition.
pub fn fit_gain_curve_weighted(
    points: &[PowerPoint],
    modes: u64,
    background_slope: f64,
    weighting: Weighting,
) -> Result<GainFit> {
    let problem = Problem::new(points, modes, background_slope, weighting)?;
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| {
            let t = i as f64 / (GRID_POINTS - 1) as f64;
            GRID_GAIN_MIN * (GRID_GAIN_MAX / GRID_GAIN_MIN).powf(t)
        })
        .collect();
    let values: Vec<f64> = grid.iter().map(|&x| problem.objective(x)).collect();
    let best = values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::NoBracket("objective is not finite anywhere on the grid".into()))?;

    let mut warnings = Vec::new();
    // A top-of-grid value tied with the best also covers objectives that are
    // flat to rounding because the data dwarf anything the grid can reach.
    let x = if best == GRID_POINTS - 1 || values[GRID_POINTS - 1] <= values[best] {
        return Err(Error::NoBracket(format!(
            "objective still decreasing at gain {GRID_GAIN_MAX} for the highest pump power"
        )));
    } else if best == 0 {
        warnings.push(FitWarning::ZeroGainBoundary);
        golden_section(
            |x| problem.objective(x),
            0.0,
            grid[1],
            GOLDEN_TOLERANCE * grid[1],
        )
    } else {
        let (lo, hi) = (grid[best - 1], grid[best + 1]);
        let x = golden_section(
            |x| problem.objective(x),
            lo,
            hi,
            GOLDEN_TOLERANCE * grid[best],
        );
        problem.polish(x, lo, hi)
    };

    let gain_coefficient = x / problem.max_power.sqrt();
    Ok(GainFit {
        gain_coefficient,
        residual_norm: problem.objective(x).sqrt(),
        gains: points
            .iter()
            .map(|p| gain_coefficient * p.pump_power.sqrt())
            .collect(),
        warnings,
    })
}

/// Weighted residual norm of the gain law at `gain_coefficient`, evaluated
/// directly in pump-power units.
pub fn residual_norm(
    points: &[PowerPoint],
    modes: u64,
    background_slope: f64,
    gain_coefficient: f64,
    weighting: Weighting,
) -> f64 {
    points
        .iter()
        .map(|p| {
            let model = modes as f64 * (gain_coefficient * p.pump_power.sqrt()).sinh().powi(2)
                + background_slope * p.pump_power;
            weight_of(p, weighting) * (p.mean_photons - model).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn weight_of(point: &PowerPoint, weighting: Weighting) -> f64 {
    match (point.weight, weighting) {
        (Some(w), _) => w,
        (None, Weighting::Uniform) => 1.0,
        (None, Weighting::InversePhotons) => 1.0 / point.mean_photons.max(f64::MIN_POSITIVE),
    }
}

/// The fit expressed in `x = c·√P_max`, so the grid is unit-free.
struct Problem {
    /// `(√(P_j/P_max), N_j − b·P_j, w_j)`
    terms: Vec<(f64, f64, f64)>,
    modes: f64,
    max_power: f64,
}

impl Problem {
    fn new(
        points: &[PowerPoint],
        modes: u64,
        background_slope: f64,
        weighting: Weighting,
    ) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if modes == 0 {
            return Err(Error::invalid("modes", "must be at least 1"));
        }
        if !(background_slope.is_finite() && background_slope >= 0.0) {
            return Err(Error::invalid(
                "background_slope",
                "must be finite and >= 0",
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.pump_power.is_finite() && p.pump_power > 0.0) {
                return Err(Error::invalid(
                    format!("points[{i}].power"),
                    "must be finite and > 0",
                ));
            }
            if !(p.mean_photons.is_finite() && p.mean_photons >= 0.0) {
                return Err(Error::invalid(
                    format!("points[{i}].photons"),
                    "must be finite and >= 0",
                ));
            }
            if let Some(w) = p.weight {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::invalid(
                        format!("points[{i}].weight"),
                        "must be finite and >= 0",
                    ));
                }
            }
        }
        let max_power = points.iter().map(|p| p.pump_power).fold(0.0, f64::max);
        let min_power = points
            .iter()
            .map(|p| p.pump_power)
            .fold(f64::INFINITY, f64::min);
        if min_power == max_power {
            return Err(Error::Degenerate("all points share one pump power".into()));
        }
        let terms = points
            .iter()
            .map(|p| {
                (
                    (p.pump_power / max_power).sqrt(),
                    p.mean_photons - background_slope * p.pump_power,
                    weight_of(p, weighting),
                )
            })
            .collect();
        Ok(Self {
            terms,
            modes: modes as f64,
            max_power,
        })
    }

    fn objective(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(s, target, w)| w * (target - self.modes * (x * s).sinh().powi(2)).powi(2))
            .sum()
    }

    /// First and second derivatives of the objective in `x`.
    fn derivatives(&self, x: f64) -> (f64, f64) {
        self.terms
            .iter()
            .fold((0.0, 0.0), |(d1, d2), &(s, target, w)| {
                let gain = x * s;
                let r = target - self.modes * gain.sinh().powi(2);
                let dr = -self.modes * (2.0 * gain).sinh() * s;
                let ddr = -2.0 * self.modes * (2.0 * gain).cosh() * s * s;
                (d1 + 2.0 * w * r * dr, d2 + 2.0 * w * (dr * dr + r * ddr))
            })
    }

    /// Newton iterations on `F'(x) = 0`, confined to the bracket.
    fn polish(&self, mut x: f64, lo: f64, hi: f64) -> f64 {
        for _ in 0..30 {
            let (d1, d2) = self.derivatives(x);
            if d2.is_nan() || d2 <= 0.0 {
                break;
            }
            let next = x - d1 / d2;
            if !(next > lo && next < hi) {
                break;
            }
            let converged = (next - x).abs() <= 4.0 * f64::EPSILON * x;
            x = next;
            if converged {
                break;
            }
        }
        x
    }
}

/// Golden-section minimisation of a unimodal `f` on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tolerance: f64) -> f64 {
    let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tolerance {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn synthetic(c: f64, modes: u64, b: f64, powers: &[f64]) -> Vec<PowerPoint> {
        powers
            .iter()
            .map(|&p| PowerPoint::new(p, modes as f64 * (c * p.sqrt()).sinh().powi(2) + b * p))
            .collect()
    }

    fn powers() -> Vec<f64> {
        (1..=12).map(|i| 2.0 * i as f64).collect()
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let x = golden_section(|x| (x - 1.3).powi(2), 0.0, 4.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-9);
    }

    #[test]
    fn recovers_noiseless_coefficient() {
        let points = synthetic(0.4, 3750, 0.0, &powers());
        let fit = fit_gain_curve(&points, 3750, 0.0).unwrap();
        assert_relative_eq!(fit.gain_coefficient, 0.4, max_relative = 1e-6);
        assert!(fit.warnings.is_empty());
        assert_relative_eq!(fit.gains[11], 0.4 * 24f64.sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn recovers_with_background() {
        let points = synthetic(0.3, 500, 40.0, &powers());
        let fit = fit_gain_curve(&points, 500, 40.0).unwrap();
        assert_relative_eq!(fit.gain_coefficient, 0.3, max_relative = 1e-6);
    }

    #[test]
    fn pure_background_hits_zero_boundary() {
        let points: Vec<_> = powers()
            .iter()
            .map(|&p| PowerPoint::new(p, 7.0 * p))
            .collect();
        let fit = fit_gain_curve(&points, 100, 7.0).unwrap();
        assert_eq!(fit.warnings, vec![FitWarning::ZeroGainBoundary]);
        assert!(fit.gain_coefficient < 1e-6);
    }

    #[test]
    fn residual_norm_matches_independent_evaluation() {
        let mut points = synthetic(0.35, 1000, 2.0, &powers());
        for (i, p) in points.iter_mut().enumerate() {
            p.mean_photons *= 1.0 + 0.03 * ((i as f64) * 1.7).sin();
        }
        for weighting in [Weighting::Uniform, Weighting::InversePhotons] {
            let fit = fit_gain_curve_weighted(&points, 1000, 2.0, weighting).unwrap();
            let again = residual_norm(&points, 1000, 2.0, fit.gain_coefficient, weighting);
            assert_relative_eq!(fit.residual_norm, again, max_relative = 1e-12);
        }
    }

    #[test]
    fn invariant_under_power_units() {
        let mut points = synthetic(0.35, 1000, 0.0, &powers());
        for (i, p) in points.iter_mut().enumerate() {
            p.mean_photons *= 1.0 + 0.04 * ((i as f64) * 2.3).cos();
        }
        let scale = 1000.0;
        let scaled: Vec<_> = points
            .iter()
            .map(|p| PowerPoint::new(p.pump_power * scale, p.mean_photons))
            .collect();
        let a = fit_gain_curve(&points, 1000, 0.0).unwrap();
        let b = fit_gain_curve(&scaled, 1000, 0.0).unwrap();
        assert_relative_eq!(
            b.gain_coefficient * scale.sqrt(),
            a.gain_coefficient,
            max_relative = 1e-9
        );
        for (ga, gb) in a.gains.iter().zip(&b.gains) {
            assert_relative_eq!(ga, gb, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let points = synthetic(0.4, 10, 0.0, &powers());
        assert!(fit_gain_curve(&points[..2], 10, 0.0).is_err());
        assert!(fit_gain_curve(&points, 0, 0.0).is_err());
        assert!(fit_gain_curve(&points, 10, -1.0).is_err());
        let same: Vec<_> = (0..4).map(|_| PowerPoint::new(3.0, 5.0)).collect();
        assert!(fit_gain_curve(&same, 10, 0.0).is_err());
        let mut bad = points.clone();
        bad[3].pump_power = 0.0;
        assert!(fit_gain_curve(&bad, 10, 0.0).is_err());
    }

    #[test]
    fn gain_beyond_grid_has_no_bracket() {
        let points = synthetic(4.0, 10, 0.0, &powers());
        assert!(matches!(
            fit_gain_curve(&points, 10, 0.0),
            Err(Error::NoBracket(_))
        ));

        // Far enough out that the objective is flat to rounding over the whole grid.
        let huge: Vec<PowerPoint> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&p| PowerPoint::new(p, p * 1e30))
            .collect();
        assert!(matches!(
            fit_gain_curve(&huge, 10, 0.0),
            Err(Error::NoBracket(_))
        ));
    }
}
