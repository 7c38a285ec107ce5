use super::gaussian::{normal_pdf, normal_quantile};
use super::quantile::{merged_cells, quantile};
use super::DiscreteMeasure;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `W_ρ` between two one-dimensional measures, integrating `|F₁⁻¹ − F₂⁻¹|^ρ` cell by cell.
pub fn w_rho_1d<T: Scalar>(
    m1: &DiscreteMeasure<T>,
    m2: &DiscreteMeasure<T>,
    rho: f64,
) -> Result<f64> {
    if !(rho >= 1.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "rho must be at least 1, got {rho}"
        )));
    }
    let cells = merged_cells(&quantile(m1)?, &quantile(m2)?);
    let total: f64 = cells
        .iter()
        .map(|c| {
            let gap = (c.v1.clone() - c.v2.clone()).abs().to_f64_lossy();
            (c.hi.clone() - c.lo.clone()).to_f64_lossy() * gap.powf(rho)
        })
        .sum();
    Ok(total.powf(1.0 / rho))
}

/// `W₂` between `m` and `N(0, σ²)` in closed form.
///
/// With cumulative weights `P_i` and `σ ∫_{P_{i-1}}^{P_i} N⁻¹ = σ(φ(N⁻¹(P_{i-1})) − φ(N⁻¹(P_i)))`,
/// `W₂² = σ² + Σ p_i Z_i² − 2 Σ Z_i σ(φ(N⁻¹(P_{i-1})) − φ(N⁻¹(P_i)))`.
pub fn w2_vs_gaussian<T: Scalar>(m: &DiscreteMeasure<T>, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "variance must be positive, got {sigma2}"
        )));
    }
    let xs = m.support_1d()?;
    let sigma = sigma2.sqrt();
    let mut second = 0.0;
    let mut cross = 0.0;
    let mut cum = 0.0;
    let mut phi_prev = 0.0;
    for (i, (x, w)) in xs.iter().zip(m.weights()).enumerate() {
        let (z, p) = (x.to_f64_lossy(), w.to_f64_lossy());
        cum += p;
        let phi = if i + 1 == xs.len() {
            0.0
        } else {
            normal_pdf(normal_quantile(cum.min(1.0)))
        };
        second += p * z * z;
        cross += z * (phi_prev - phi);
        phi_prev = phi;
    }
    Ok((sigma2 + second - 2.0 * sigma * cross).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::GaussianQuantile;

    #[test]
    fn point_masses() {
        let a = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        let b = DiscreteMeasure::dirac(vec![3.0]).unwrap();
        assert!((w_rho_1d(&a, &b, 2.0).unwrap() - 3.0).abs() < 1e-15);
        let pm = DiscreteMeasure::uniform_1d(vec![-1.0, 1.0]).unwrap();
        assert!((w_rho_1d(&pm, &a, 2.0).unwrap() - 1.0).abs() < 1e-15);
        let u = DiscreteMeasure::uniform_1d(vec![0.0, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_eq!(w_rho_1d(&u, &u, 1.7).unwrap(), 0.0);
        assert!(w_rho_1d(&u, &u, 0.5).is_err());
    }

    #[test]
    fn gaussian_against_dirac_is_sigma() {
        let d = DiscreteMeasure::dirac(vec![0.0]).unwrap();
        assert!((w2_vs_gaussian(&d, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((w2_vs_gaussian(&d, 4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(w2_vs_gaussian(&d, 0.0).is_err());
    }

    #[test]
    fn gaussian_closed_form_matches_quadrature() {
        let a = (2.0 / std::f64::consts::PI).sqrt();
        let m = DiscreteMeasure::uniform_1d(vec![-a, a]).unwrap();
        // midpoint rule on a 10⁶-point quantile grid
        let n = 1_000_000;
        let g = GaussianQuantile::new(1.0).unwrap();
        let quad: f64 = (0..n)
            .map(|k| {
                let p = (k as f64 + 0.5) / n as f64;
                let f = if p <= 0.5 { -a } else { a };
                (g.eval(p) - f).powi(2)
            })
            .sum::<f64>()
            / n as f64;
        let frozen = 0.602_810_274_989_087;
        assert!((quad.sqrt() - frozen).abs() < 1e-5);
        assert!((w2_vs_gaussian(&m, 1.0).unwrap() - frozen).abs() < 1e-12);
        assert!((frozen - (1.0 - 2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn shrinking_gaussian_tends_to_spread() {
        let m = DiscreteMeasure::uniform_1d(vec![-1.0, 1.0]).unwrap();
        assert!((w2_vs_gaussian(&m, 1e-14).unwrap() - 1.0).abs() < 1e-6);
    }
}
