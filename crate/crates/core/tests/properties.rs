use proptest::prelude::*;

use coupling_core::chart::ops::{courant_bracket, exterior_derivative, lie_bracket, pairing, schouten_square, Sign};
use coupling_core::dual::{derivative, Dual};
use coupling_core::{CoordinateDomain, Field, SectionPair, Valence};

fn domain() -> CoordinateDomain {
    CoordinateDomain::cube(3, 2.0)
}

/// Component `i` is `c0 sin(c1 x_{i+1}) + c2 x_i x_{i+2} + c3`.
fn smooth(coeffs: [f64; 4], i: usize, x: &[Dual]) -> Dual {
    let n = x.len();
    (x[(i + 1) % n] * coeffs[1]).sin() * coeffs[0] + x[i % n] * x[(i + 2) % n] * coeffs[2] + coeffs[3]
}

fn vector(c: [f64; 4]) -> Field {
    Field::vector(domain(), move |x| (0..3).map(|i| smooth(c, i, x)).collect())
}

fn covector(c: [f64; 4]) -> Field {
    Field::covector(domain(), move |x| (0..3).map(|i| smooth(c, i + 1, x)).collect())
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.5f64..1.5)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 3)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn d_squared_vanishes(c in coeffs(), p in point()) {
        let f = Field::scalar(domain(), move |x| smooth(c, 0, x) * smooth(c, 1, x));
        let dd = exterior_derivative(&exterior_derivative(&f).unwrap()).unwrap();
        prop_assert!(max_abs(&dd.eval(&p)) < 1e-10);
        let a = covector(c);
        let dda = exterior_derivative(&exterior_derivative(&a).unwrap()).unwrap();
        prop_assert!(max_abs(&dda.eval(&p)) < 1e-10);
    }

    #[test]
    fn jacobi_identity(a in coeffs(), b in coeffs(), c in coeffs(), p in point()) {
        let (x, y, z) = (vector(a), vector(b), vector(c));
        let cyc = |u: &Field, v: &Field, w: &Field| lie_bracket(u, &lie_bracket(v, w).unwrap()).unwrap().eval(&p);
        let s: Vec<f64> = (0..3)
            .map(|i| cyc(&x, &y, &z)[i] + cyc(&y, &z, &x)[i] + cyc(&z, &x, &y)[i])
            .collect();
        prop_assert!(max_abs(&s) < 1e-9, "{s:?}");
    }

    #[test]
    fn pairing_symmetry(a in coeffs(), b in coeffs(), c in coeffs(), d in coeffs(), p in point()) {
        let s1 = SectionPair::new(vector(a), covector(b)).unwrap();
        let s2 = SectionPair::new(vector(c), covector(d)).unwrap();
        let plus = |u, v| pairing(u, v, Sign::Plus).unwrap().eval(&p)[0];
        let minus = |u, v| pairing(u, v, Sign::Minus).unwrap().eval(&p)[0];
        prop_assert!((plus(&s1, &s2) - plus(&s2, &s1)).abs() < 1e-12);
        prop_assert!((minus(&s1, &s2) + minus(&s2, &s1)).abs() < 1e-12);
    }

    #[test]
    fn courant_antisymmetry(a in coeffs(), b in coeffs(), c in coeffs(), d in coeffs(), p in point()) {
        let s1 = SectionPair::new(vector(a), covector(b)).unwrap();
        let s2 = SectionPair::new(vector(c), covector(d)).unwrap();
        let u = courant_bracket(&s1, &s2).unwrap().eval(&p);
        let v = courant_bracket(&s2, &s1).unwrap().eval(&p);
        let sum: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
        prop_assert!(max_abs(&sum) < 1e-10, "{sum:?}");
    }

    #[test]
    fn linear_bivectors_are_poisson(k in prop::array::uniform3(-2.0f64..2.0), p in point()) {
        // pi^{ij} = eps^{ijl} k_l x_l is Lie-Poisson for the diagonal structure constants
        let pi = Field::new(domain(), Valence::BIVECTOR, move |x| vec![x[2] * k[2], -(x[1] * k[1]), x[0] * k[0]]);
        prop_assert!(max_abs(&schouten_square(&pi).unwrap().eval(&p)) < 1e-12);
    }

    #[test]
    fn dual_derivatives_match_finite_differences(c in coeffs(), t in -1.5f64..1.5) {
        let f = |s: Dual| {
            let x = [s, s * 0.5 + 0.3, -s];
            vec![smooth(c, 0, &x) * (s * 0.4).exp() + (s * s + 1.0).ln()]
        };
        let (_, slope) = derivative(f, Dual::constant(t));
        let h = 1e-5;
        let fd = (f(Dual::constant(t + h))[0].re() - f(Dual::constant(t - h))[0].re()) / (2.0 * h);
        prop_assert!((slope[0].re() - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{} vs {fd}", slope[0].re());
    }
}
