//! Scalar diagnostics: fidelity, parity, cat coherence and decoherence-time fits.

use crate::error::{Error, Result};
use crate::fock::{coherent_state, FieldDensity, FockConfig, Parity, PureFieldState, C64};

/// ⟨ψ|ρ|ψ⟩ for a pure target.
pub fn fidelity(rho: &FieldDensity, target: &PureFieldState) -> f64 {
    let psi = target.amplitudes();
    let value = psi.dotc(&(rho.matrix() * psi)).re;
    value.clamp(0.0, 1.0)
}

/// tr(ρ (P_even − P_odd)).
pub fn parity_expectation(rho: &FieldDensity) -> f64 {
    (0..rho.dim()).map(|n| Parity::of(n).sign() * rho.population(n)).sum()
}

/// Interference weight between the lobes at ±α_t:
/// 2|⟨α_t|ρ|−α_t⟩| / (⟨α_t|ρ|α_t⟩ + ⟨−α_t|ρ|−α_t⟩), clipped to [0, 1].
pub fn cat_coherence(rho: &FieldDensity, alpha_t: C64) -> Result<f64> {
    let cfg = FockConfig::new(rho.dim())?;
    let plus = coherent_state(alpha_t, &cfg);
    let minus = coherent_state(-alpha_t, &cfg);
    let m = rho.matrix();
    let (p, q) = (plus.amplitudes(), minus.amplitudes());
    let cross = p.dotc(&(m * q)).norm();
    let denom = p.dotc(&(m * p)).re + q.dotc(&(m * q)).re;
    if denom < 1e-12 {
        return Err(Error::DegenerateDenominator(denom));
    }
    let raw = 2.0 * cross / denom;
    if raw > 1.0 {
        log::debug!("cat_coherence clipped from {raw}");
    }
    Ok(raw.min(1.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecoherenceEstimate {
    /// t_dec in units of 1/γ; infinite when the fit window shows no decay.
    pub t_dec_gamma_units: f64,
    /// RMS residual of the log-coherence fit.
    pub fit_residual: f64,
    pub points_used: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    /// Window: leading points with coherence above this value.
    pub threshold: f64,
    /// Fit ln C = −t/t_dec + q·t² instead of the pure linear model, so the
    /// curvature of the decay does not bias the initial slope.
    pub curvature: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { threshold: 0.2, curvature: true }
    }
}

/// Slopes of ln C within this of zero count as no measurable decay.
const NO_DECAY_SLOPE: f64 = 1e-12;

/// Least-squares fit of the initial exponential decay of a (γt, coherence) series.
pub fn estimate_decoherence_time(series: &[(f64, f64)], opts: FitOptions) -> Result<DecoherenceEstimate> {
    if series.len() < 4 {
        return Err(Error::FitRejected(format!("need at least 4 points, got {}", series.len())));
    }
    let window: Vec<(f64, f64)> = series.iter().cloned().take_while(|&(_, c)| c > opts.threshold).collect();
    if window.is_empty() {
        return Err(Error::FitRejected("all points below threshold".into()));
    }
    for pair in window.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(Error::FitRejected("time axis not increasing".into()));
        }
        if pair[1].1 > pair[0].1 * (1.0 + 1e-9) {
            return Err(Error::FitRejected(format!("coherence not monotone at γt = {}", pair[1].0)));
        }
    }
    let (t0, c0) = window[0];
    let pts: Vec<(f64, f64)> = window.iter().map(|&(t, c)| (t - t0, (c / c0).ln())).collect();
    let informative = pts.iter().filter(|(t, _)| *t > 0.0).count();
    if informative < 1 {
        return Err(Error::FitRejected("window holds a single time point".into()));
    }
    let use_curvature = opts.curvature && informative >= 2;

    let (slope, quad) = if use_curvature {
        // normal equations for y = s·t + q·t² (through the origin)
        let (mut s2, mut s3, mut s4, mut sy1, mut sy2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y) in &pts {
            s2 += t * t;
            s3 += t * t * t;
            s4 += t * t * t * t;
            sy1 += t * y;
            sy2 += t * t * y;
        }
        let det = s2 * s4 - s3 * s3;
        if det.abs() <= f64::EPSILON * s2 * s4 {
            return Err(Error::FitRejected("degenerate fit window".into()));
        }
        ((sy1 * s4 - sy2 * s3) / det, (s2 * sy2 - s3 * sy1) / det)
    } else {
        let s2: f64 = pts.iter().map(|(t, _)| t * t).sum();
        let sy: f64 = pts.iter().map(|(t, y)| t * y).sum();
        (sy / s2, 0.0)
    };
    if slope.is_nan() || slope > NO_DECAY_SLOPE {
        return Err(Error::FitRejected(format!("fitted slope {slope} is not a decay")));
    }
    let rss: f64 = pts.iter().map(|&(t, y)| (y - slope * t - quad * t * t).powi(2)).sum();
    // a flat window (e.g. coherence held at 1 by feedback) has no finite t_dec
    let t_dec = if slope >= -NO_DECAY_SLOPE { f64::INFINITY } else { -1.0 / slope };
    Ok(DecoherenceEstimate {
        t_dec_gamma_units: t_dec,
        fit_residual: (rss / pts.len() as f64).sqrt(),
        points_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{cat_state, coherent_coefficients, CMatrix, ZERO};
    use approx::assert_abs_diff_eq;

    fn cfg() -> FockConfig {
        FockConfig::new(40).unwrap()
    }

    #[test]
    fn fidelity_pure_and_orthogonal() {
        let c = cfg();
        let psi = cat_state(C64::new(1.0, 1.0), Parity::Odd, &c).unwrap();
        assert_abs_diff_eq!(fidelity(&psi.density(), &psi), 1.0, epsilon = 1e-14);
        let phi = cat_state(C64::new(1.0, 1.0), Parity::Even, &c).unwrap();
        assert_abs_diff_eq!(fidelity(&phi.density(), &psi), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn fidelity_and_parity_ignore_global_phase() {
        let c = cfg();
        let psi = cat_state(C64::new(0.9, -0.3), Parity::Odd, &c).unwrap();
        let rotated = PureFieldState::new(psi.amplitudes() * C64::from_polar(1.0, 1.234)).unwrap();
        let rho = crate::fock::coherent_state(C64::new(0.5, 0.1), &c).density();
        assert_abs_diff_eq!(fidelity(&rho, &psi), fidelity(&rho, &rotated), epsilon = 1e-15);
        assert_abs_diff_eq!(
            parity_expectation(&psi.density()),
            parity_expectation(&rotated.density()),
            epsilon = 1e-14
        );
    }

    #[test]
    fn parity_examples() {
        let c = FockConfig::new(6).unwrap();
        assert_eq!(parity_expectation(&FieldDensity::vacuum(&c)), 1.0);
        let odd = cat_state(C64::from(1.5), Parity::Odd, &cfg()).unwrap();
        assert_abs_diff_eq!(parity_expectation(&odd.density()), -1.0, epsilon = 1e-14);
        let mut m = CMatrix::zeros(6, 6);
        m[(0, 0)] = C64::from(0.5);
        m[(1, 1)] = C64::from(0.5);
        assert_eq!(parity_expectation(&FieldDensity::from_matrix(m).unwrap()), 0.0);
    }

    #[test]
    fn coherence_of_pure_cat_and_mixture() {
        let c = cfg();
        let alpha = C64::from(3.3f64.sqrt());
        let cat = cat_state(alpha, Parity::Odd, &c).unwrap();
        assert_abs_diff_eq!(cat_coherence(&cat.density(), alpha).unwrap(), 1.0, epsilon = 1e-10);

        let plus = coherent_state(alpha, &c).density();
        let minus = coherent_state(-alpha, &c).density();
        let mix = FieldDensity::from_matrix((plus.into_matrix() + minus.into_matrix()) * C64::from(0.5)).unwrap();
        let coh = cat_coherence(&mix, alpha).unwrap();
        // 2s/(1+s²) with s = ⟨α|−α⟩ = e^{−2|α|²}
        let s = (-6.6f64).exp();
        assert_abs_diff_eq!(coh, 2.0 * s / (1.0 + s * s), epsilon = 1e-12);
        assert!(coh < 2e-2);
    }

    #[test]
    fn coherence_degenerate_denominator() {
        // a Fock state far from the lobes
        let mut v = coherent_coefficients(ZERO, 40);
        v[0] = ZERO;
        v[39] = C64::from(1.0);
        let rho = PureFieldState::new(v).unwrap().density();
        assert!(matches!(cat_coherence(&rho, C64::from(0.01)), Err(Error::DegenerateDenominator(_))));
    }

    #[test]
    fn synthetic_exponential_fit() {
        let series: Vec<(f64, f64)> = (0..20)
            .map(|k| {
                let t = k as f64 * 0.05;
                (t, (-t / 0.5).exp())
            })
            .collect();
        let est = estimate_decoherence_time(&series, FitOptions::default()).unwrap();
        assert_abs_diff_eq!(est.t_dec_gamma_units, 0.5, epsilon = 1e-6);
        let lin = estimate_decoherence_time(&series, FitOptions { curvature: false, ..Default::default() }).unwrap();
        assert_abs_diff_eq!(lin.t_dec_gamma_units, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn fit_rejections() {
        let short = [(0.0, 1.0), (0.1, 0.9), (0.2, 0.8)];
        assert!(estimate_decoherence_time(&short, FitOptions::default()).is_err());
        let low = [(0.0, 0.1), (0.1, 0.09), (0.2, 0.08), (0.3, 0.07)];
        assert!(estimate_decoherence_time(&low, FitOptions::default()).is_err());
        let bumpy = [(0.0, 1.0), (0.1, 0.8), (0.2, 0.9), (0.3, 0.7)];
        assert!(estimate_decoherence_time(&bumpy, FitOptions::default()).is_err());
    }

    #[test]
    fn flat_series_has_unbounded_decoherence_time() {
        let flat: Vec<(f64, f64)> = (0..6).map(|k| (k as f64 * 0.1, 1.0)).collect();
        let est = estimate_decoherence_time(&flat, FitOptions::default()).unwrap();
        assert!(est.t_dec_gamma_units.is_infinite());
        assert_eq!(est.fit_residual, 0.0);
    }
}
