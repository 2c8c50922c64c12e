//! Symmetric quadrature on the reference triangle and Gauss–Legendre on edges.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Barycentric points with weights summing to the reference area `1/2`.
#[derive(Clone, Debug)]
pub struct QuadRule<T> {
    pub points: Vec<([T; 3], T)>,
}

fn orbit3(a: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
    let b = 1.0 - 2.0 * a;
    out.push(([a, a, b], w));
    out.push(([a, b, a], w));
    out.push(([b, a, a], w));
}

fn orbit6(a: f64, b: f64, w: f64, out: &mut Vec<([f64; 3], f64)>) {
    let c = 1.0 - a - b;
    for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
        out.push((p, w));
    }
}

/// Rule exact for polynomials of total degree `order` (2, 4 or 6).
pub fn quadrature_rule<T: Real>(order: usize) -> Result<QuadRule<T>> {
    let mut pts: Vec<([f64; 3], f64)> = Vec::new();
    match order {
        2 => orbit3(1.0 / 6.0, 1.0 / 3.0, &mut pts),
        4 => {
            orbit3(0.445_948_490_915_965, 0.223_381_589_678_011, &mut pts);
            orbit3(0.091_576_213_509_771, 0.109_951_743_655_322, &mut pts);
        }
        6 => {
            orbit3(0.249_286_745_170_910, 0.116_786_275_726_379, &mut pts);
            orbit3(0.063_089_014_491_502, 0.050_844_906_370_207, &mut pts);
            orbit6(0.310_352_451_033_784, 0.053_145_049_844_817, 0.082_851_075_618_374, &mut pts);
        }
        _ => return Err(Error::InvalidParameter(format!("unsupported quadrature order {order}"))),
    }
    // Tabulated weights sum to one; the reference triangle has area 1/2.
    let total: f64 = pts.iter().map(|p| p.1).sum();
    Ok(QuadRule {
        points: pts
            .into_iter()
            .map(|(b, w)| ([T::lit(b[0]), T::lit(b[1]), T::lit(b[2])], T::lit(0.5 * w / total)))
            .collect(),
    })
}

/// Three-point Gauss–Legendre rule on `[0, 1]` as `(s, weight)`.
pub fn gauss_legendre_3<T: Real>() -> [(T, T); 3] {
    let d = T::lit(0.6).sqrt() * T::lit(0.5);
    let half = T::lit(0.5);
    [
        (half - d, T::lit(5.0 / 18.0)),
        (half, T::lit(8.0 / 18.0)),
        (half + d, T::lit(5.0 / 18.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// ∫ x^a y^b over the reference triangle = a! b! / (a + b + 2)!
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    fn integrate(rule: &QuadRule<f64>, a: u32, b: u32) -> f64 {
        // reference coordinates: x = λ1, y = λ2
        rule.points.iter().map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32)).sum()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        for order in [2, 4, 6] {
            let r = quadrature_rule::<f64>(order).unwrap();
            let s: f64 = r.points.iter().map(|p| p.1).sum();
            assert!((s - 0.5).abs() < 1e-15);
        }
        assert!(quadrature_rule::<f64>(3).is_err());
    }

    #[test]
    fn exactness_up_to_order() {
        for order in [2u32, 4, 6] {
            let r = quadrature_rule::<f64>(order as usize).unwrap();
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let err = (integrate(&r, a, b) - exact_monomial(a, b)).abs();
                    assert!(err < 1e-14, "order {order} x^{a} y^{b}: {err}");
                }
            }
        }
        let r4 = quadrature_rule::<f64>(4).unwrap();
        assert!((integrate(&r4, 2, 2) - 1.0 / 180.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_is_degree_five() {
        let g = gauss_legendre_3::<f64>();
        for k in 0..=5 {
            let s: f64 = g.iter().map(|(x, w)| w * x.powi(k)).sum();
            assert!((s - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
