//! Haar weight factors `P` and the artificial potential of the `√P` transform.

use serde::{Deserialize, Serialize};

use super::ModelKind;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightFamily {
    /// `Π |sh(q^a - q^b)|`
    Hyperbolic,
    /// `Π |(Q^a)² - (Q^b)²|`
    Rational,
    /// `Π |sin(q^a - q^b)|`
    Trigonometric,
}

impl WeightFamily {
    fn pair(self, qa: f64, qb: f64) -> f64 {
        match self {
            WeightFamily::Hyperbolic => (qa - qb).sinh().abs(),
            WeightFamily::Rational => (qa * qa - qb * qb).abs(),
            WeightFamily::Trigonometric => (qa - qb).sin().abs(),
        }
    }

    /// First and second derivative of `ln |pair|` with respect to `qa`.
    fn pair_log_derivs(self, qa: f64, qb: f64) -> (f64, f64) {
        match self {
            WeightFamily::Hyperbolic => {
                let d = qa - qb;
                let s = d.sinh();
                (d.cosh() / s, -1.0 / (s * s))
            }
            WeightFamily::Rational => {
                let den = qa * qa - qb * qb;
                (2.0 * qa / den, -2.0 * (qa * qa + qb * qb) / (den * den))
            }
            WeightFamily::Trigonometric => {
                let d = qa - qb;
                let s = d.sin();
                (d.cos() / s, -1.0 / (s * s))
            }
        }
    }
}

/// Product over unordered pairs `a < b` of the kind's pair factor; 0 at coincidences.
pub fn weight_factor(q: &[f64], kind: ModelKind) -> f64 {
    let fam = kind.family();
    let mut p = 1.0;
    for a in 0..q.len() {
        for b in a + 1..q.len() {
            p *= fam.pair(q[a], q[b]);
        }
    }
    p
}

/// Open Weyl chamber: `q¹ > … > qⁿ` (hyperbolic), `Q¹ > … > Q^{n-1} > |Qⁿ|` (rational),
/// `q¹ > … > qⁿ > q¹ - π` (trigonometric).
pub fn in_chamber(q: &[f64], kind: ModelKind) -> bool {
    let n = q.len();
    let ordered = q.windows(2).all(|w| w[0] > w[1]);
    match kind.family() {
        WeightFamily::Hyperbolic => ordered,
        WeightFamily::Rational => {
            q[..n - 1].windows(2).all(|w| w[0] > w[1]) && (n < 2 || q[n - 2] > q[n - 1].abs())
        }
        WeightFamily::Trigonometric => ordered && q[0] - q[n - 1] < std::f64::consts::PI,
    }
}

/// `mass_coeff · Σ_a [∂²_a h + (∂_a h)²]` with `h = ln √P`.
///
/// This is the potential `U` with `√P · D(P^{-1/2} g) = Δ g - U g`, so a kinetic term
/// `-c D f` becomes `-c Δ g + c U g` on `g = √P f`.
pub fn artificial_potential(q: &[f64], kind: ModelKind, mass_coeff: f64) -> Result<f64> {
    let fam = kind.family();
    if weight_factor(q, kind) == 0.0 {
        return Err(Error::Coincidence(format!("q = {q:?}")));
    }
    let mut total = 0.0;
    for a in 0..q.len() {
        let (mut d1, mut d2) = (0.0, 0.0);
        for b in 0..q.len() {
            if b != a {
                let (l1, l2) = fam.pair_log_derivs(q[a], q[b]);
                d1 += 0.5 * l1;
                d2 += 0.5 * l2;
            }
        }
        total += d2 + d1 * d1;
    }
    Ok(mass_coeff * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn weight_examples() {
        assert_abs_diff_eq!(weight_factor(&[0.0, 2f64.ln()], ModelKind::AffAff), 0.75, epsilon = 1e-15);
        for k in ModelKind::ALL {
            assert_eq!(weight_factor(&[0.4, 0.4, -1.0], k), 0.0);
        }
        let x = std::f64::consts::FRAC_PI_2;
        assert_abs_diff_eq!(weight_factor(&[0.0, x], ModelKind::UnitaryGroup), 1.0);
        assert_abs_diff_eq!(weight_factor(&[3.0, 1.0], ModelKind::DAlembert), 8.0);
    }

    #[test]
    fn potential_matches_closed_form_n2() {
        // P = sh x: U = 1/2 - csch²(x)/2
        let x: f64 = 1.0;
        let u = artificial_potential(&[x, 0.0], ModelKind::AffAff, 1.0).unwrap();
        assert_abs_diff_eq!(u, 0.5 - 0.5 / x.sinh().powi(2), epsilon = 1e-14);
        assert!(artificial_potential(&[1.0, 1.0], ModelKind::AffAff, 1.0).is_err());
    }

    #[test]
    fn potential_matches_finite_differences() {
        // Σ_a [h_aa + h_a²] with h = ½ ln P by central differences
        for kind in [ModelKind::AffAff, ModelKind::DAlembert, ModelKind::UnitaryGroup] {
            let q = [1.1, 0.45, -0.2];
            let h = |q: &[f64]| 0.5 * weight_factor(q, kind).ln();
            let e = 1e-4;
            let mut fd = 0.0;
            for a in 0..3 {
                let mut qp = q;
                let mut qm = q;
                qp[a] += e;
                qm[a] -= e;
                let d1 = (h(&qp) - h(&qm)) / (2.0 * e);
                let d2 = (h(&qp) - 2.0 * h(&q) + h(&qm)) / (e * e);
                fd += d2 + d1 * d1;
            }
            let u = artificial_potential(&q, kind, 1.0).unwrap();
            assert_abs_diff_eq!(u, fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn chambers() {
        assert!(in_chamber(&[1.0, 0.0, -1.0], ModelKind::AffAff));
        assert!(!in_chamber(&[0.0, 1.0], ModelKind::AffAff));
        assert!(in_chamber(&[2.0, 1.0, -0.5], ModelKind::DAlembert));
        assert!(!in_chamber(&[2.0, 1.0, -1.5], ModelKind::DAlembert));
        assert!(!in_chamber(&[3.5, 0.0], ModelKind::UnitaryGroup));
    }
}
