//! Exterior calculus on a coordinate domain.
//!
//! Every operation returns a new [`Field`] whose evaluator differentiates its
//! inputs with a fresh dual generator, so results can be fed back into the
//! same operations.

use super::field::{alternating, combinations, rank, sort_with_sign, Field, SectionPair, Valence};
use crate::dual::{directional, jacobian, Dual};
use crate::error::{Error, Result};

/// Which of the two natural pairings on `TM + T*M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// `[X, Y]^i = X^j d_j Y^i - Y^j d_j X^i`.
pub fn lie_bracket(x: &Field, y: &Field) -> Result<Field> {
    x.expect(Valence::Vector)?;
    y.expect(Valence::Vector)?;
    x.ensure_same_domain(y)?;
    let (fx, fy) = (x.evaluator().clone(), y.evaluator().clone());
    Ok(Field::vector(x.domain().clone(), move |p| {
        let xv = fx(p);
        let yv = fy(p);
        let (_, dy_x) = directional(|q| fy(q), p, &xv);
        let (_, dx_y) = directional(|q| fx(q), p, &yv);
        dy_x.into_iter().zip(dx_y).map(|(a, b)| a - b).collect()
    }))
}

fn form_degree(w: &Field) -> Result<(usize, usize)> {
    match w.valence() {
        Valence::Scalar => Ok((0, 1)),
        Valence::Form(k) => Ok((k, 1)),
        Valence::ValuedForm { degree, values } => Ok((degree, values)),
        other => Err(Error::Valence { expected: "form".into(), found: other.to_string() }),
    }
}

fn form_valence(degree: usize, values: usize, valued: bool) -> Valence {
    if valued {
        Valence::ValuedForm { degree, values }
    } else {
        Valence::Form(degree)
    }
}

/// Exterior derivative of a scalar, a k-form or a vector-valued k-form.
pub fn exterior_derivative(w: &Field) -> Result<Field> {
    let (k, values) = form_degree(w)?;
    let n = w.dim();
    if k >= n {
        return Err(Error::DegreeTooHigh { degree: k, dim: n });
    }
    let valued = matches!(w.valence(), Valence::ValuedForm { .. });
    let f = w.evaluator().clone();
    let target = combinations(n, k + 1);
    Ok(Field::new(w.domain().clone(), form_valence(k + 1, values, valued), move |p| {
        // jac[c * values + a][l] = d_l w_{c, a}
        let jac = jacobian(|q| f(q), p);
        let mut out = Vec::with_capacity(target.len() * values);
        let mut face = Vec::with_capacity(k);
        for idx in &target {
            for a in 0..values {
                let mut acc = Dual::ZERO;
                for j in 0..=k {
                    face.clear();
                    face.extend(idx.iter().enumerate().filter(|(m, _)| *m != j).map(|(_, v)| *v));
                    let c = rank(n, &face);
                    let term = jac[c * values + a][idx[j]];
                    acc = if j % 2 == 0 { acc + term } else { acc - term };
                }
                out.push(acc);
            }
        }
        out
    }))
}

/// Interior product `(i_X w)(Y, ...) = w(X, Y, ...)`.
pub fn interior(x: &Field, w: &Field) -> Result<Field> {
    x.expect(Valence::Vector)?;
    x.ensure_same_domain(w)?;
    let (k, values) = form_degree(w)?;
    if k == 0 {
        return Err(Error::Invalid("interior product of a function".into()));
    }
    let n = w.dim();
    let valued = matches!(w.valence(), Valence::ValuedForm { .. });
    let valence = if k == 1 && !valued { Valence::Scalar } else { form_valence(k - 1, values, valued) };
    let (fx, fw) = (x.evaluator().clone(), w.evaluator().clone());
    let target = combinations(n, k - 1);
    Ok(Field::new(w.domain().clone(), valence, move |p| {
        let xv = fx(p);
        let wv = fw(p);
        contract_first(&xv, &wv, n, k, values, &target)
    }))
}

pub(crate) fn contract_first(
    xv: &[Dual],
    wv: &[Dual],
    n: usize,
    k: usize,
    values: usize,
    target: &[Vec<usize>],
) -> Vec<Dual> {
    let mut out = Vec::with_capacity(target.len() * values);
    let mut full = Vec::with_capacity(k);
    for rest in target {
        for a in 0..values {
            let mut acc = Dual::ZERO;
            for (j, xj) in xv.iter().enumerate() {
                full.clear();
                full.push(j);
                full.extend_from_slice(rest);
                let mut sorted = full.clone();
                if let Some(sign) = sort_with_sign(&mut sorted) {
                    acc += *xj * wv[rank(n, &sorted) * values + a] * sign;
                }
            }
            out.push(acc);
        }
    }
    out
}

/// Lie derivative of a form by Cartan's formula `i_X d + d i_X`.
pub fn lie_derivative(x: &Field, w: &Field) -> Result<Field> {
    let (k, _) = form_degree(w)?;
    if k == 0 {
        let dw = exterior_derivative(w)?;
        return interior(x, &dw);
    }
    let d_ix = exterior_derivative(&interior(x, w)?)?;
    if k >= w.dim() {
        return Ok(d_ix);
    }
    let i_dx = interior(x, &exterior_derivative(w)?)?;
    i_dx.add(&d_ix)
}

/// `(L_X pi)^{ij} = X^l d_l pi^{ij} - pi^{lj} d_l X^i - pi^{il} d_l X^j`.
pub fn lie_derivative_bivector(x: &Field, pi: &Field) -> Result<Field> {
    x.expect(Valence::Vector)?;
    pi.expect(Valence::BIVECTOR)?;
    x.ensure_same_domain(pi)?;
    let n = x.dim();
    let (fx, fp) = (x.evaluator().clone(), pi.evaluator().clone());
    let pairs = combinations(n, 2);
    Ok(Field::bivector(x.domain().clone(), move |p| {
        let xv = fx(p);
        let pv = fp(p);
        let (_, dpi_x) = directional(|q| fp(q), p, &xv);
        let jx = jacobian(|q| fx(q), p);
        pairs
            .iter()
            .enumerate()
            .map(|(c, ij)| {
                let (i, j) = (ij[0], ij[1]);
                let mut acc = dpi_x[c];
                for l in 0..n {
                    acc -= alternating(&pv, n, &[l, j]) * jx[i][l];
                    acc -= alternating(&pv, n, &[i, l]) * jx[j][l];
                }
                acc
            })
            .collect()
    }))
}

/// `[pi, pi]^{ijk} = 2 (pi^{il} d_l pi^{jk} + pi^{jl} d_l pi^{ki} + pi^{kl} d_l pi^{ij})`.
pub fn schouten_square(pi: &Field) -> Result<Field> {
    pi.expect(Valence::BIVECTOR)?;
    let n = pi.dim();
    let f = pi.evaluator().clone();
    let triples = combinations(n, 3);
    Ok(Field::new(pi.domain().clone(), Valence::Multivector(3), move |p| {
        let pv = f(p);
        let jac = jacobian(|q| f(q), p);
        let d = |a: usize, b: usize, l: usize| -> Dual {
            let mut idx = [a, b];
            match sort_with_sign(&mut idx) {
                Some(s) => jac[rank(n, &idx)][l] * s,
                None => Dual::ZERO,
            }
        };
        triples
            .iter()
            .map(|t| {
                let (i, j, k) = (t[0], t[1], t[2]);
                let mut acc = Dual::ZERO;
                for l in 0..n {
                    acc += alternating(&pv, n, &[i, l]) * d(j, k, l);
                    acc += alternating(&pv, n, &[j, l]) * d(k, i, l);
                    acc += alternating(&pv, n, &[k, l]) * d(i, j, l);
                }
                acc * 2.0
            })
            .collect()
    }))
}

/// `pi^#(alpha)^j = alpha_i pi^{ij}` at the level of component arrays.
pub fn sharp_values(pi: &[Dual], n: usize, alpha: &[Dual]) -> Vec<Dual> {
    (0..n)
        .map(|j| (0..n).map(|i| alpha[i] * alternating(pi, n, &[i, j])).sum())
        .collect()
}

/// The vector field `pi^#(alpha)`.
pub fn sharp(pi: &Field, alpha: &Field) -> Result<Field> {
    pi.expect(Valence::BIVECTOR)?;
    alpha.expect(Valence::COVECTOR)?;
    pi.ensure_same_domain(alpha)?;
    let n = pi.dim();
    let (fp, fa) = (pi.evaluator().clone(), alpha.evaluator().clone());
    Ok(Field::vector(pi.domain().clone(), move |p| sharp_values(&fp(p), n, &fa(p))))
}

/// The function `alpha(X)`.
pub fn contract(x: &Field, alpha: &Field) -> Result<Field> {
    x.expect(Valence::Vector)?;
    alpha.expect(Valence::COVECTOR)?;
    x.ensure_same_domain(alpha)?;
    let (fx, fa) = (x.evaluator().clone(), alpha.evaluator().clone());
    Ok(Field::scalar(x.domain().clone(), move |p| {
        fx(p).into_iter().zip(fa(p)).map(|(a, b)| a * b).sum()
    }))
}

/// `1/2 (alpha(Y) +- beta(X))` for `s1 = (X, alpha)`, `s2 = (Y, beta)`.
pub fn pairing(s1: &SectionPair, s2: &SectionPair, sign: Sign) -> Result<Field> {
    s1.domain().ensure_same(s2.domain())?;
    let a = contract(&s2.vector, &s1.form)?;
    let b = contract(&s1.vector, &s2.form)?;
    let s = sign.value();
    let (fa, fb) = (a.evaluator().clone(), b.evaluator().clone());
    Ok(Field::scalar(s1.domain().clone(), move |p| (fa(p)[0] + fb(p)[0] * s) * 0.5))
}

/// `([X, Y], L_X beta - L_Y alpha + d<s1, s2>_-)`.
pub fn courant_bracket(s1: &SectionPair, s2: &SectionPair) -> Result<SectionPair> {
    let vector = lie_bracket(&s1.vector, &s2.vector)?;
    let lx_beta = lie_derivative(&s1.vector, &s2.form)?;
    let ly_alpha = lie_derivative(&s2.vector, &s1.form)?;
    let d_pair = exterior_derivative(&pairing(s1, s2, Sign::Minus)?)?;
    let form = lx_beta.sub(&ly_alpha)?.add(&d_pair)?;
    SectionPair::new(vector, form)
}
