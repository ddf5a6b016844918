use std::fmt;
use std::sync::Arc;

use super::domain::CoordinateDomain;
use crate::dual::{constants, reals, Dual};
use crate::error::{Error, Result};

/// Evaluates the independent components of a field at a point.
pub type Evaluator = Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>;

/// What kind of tensor a [`Field`] carries.
///
/// Alternating tensors store only the components with strictly increasing
/// indices, in lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valence {
    Scalar,
    Vector,
    /// A k-form. `Form(1)` is a covector field.
    Form(usize),
    /// A k-vector. `Multivector(2)` is a bivector field.
    Multivector(usize),
    /// A k-form with values in a `values`-dimensional vector space, stored
    /// as `components[comb * values + a]`.
    ValuedForm { degree: usize, values: usize },
}

impl Valence {
    pub const COVECTOR: Valence = Valence::Form(1);
    pub const TWO_FORM: Valence = Valence::Form(2);
    pub const BIVECTOR: Valence = Valence::Multivector(2);

    pub fn components(&self, dim: usize) -> usize {
        match *self {
            Valence::Scalar => 1,
            Valence::Vector => dim,
            Valence::Form(k) | Valence::Multivector(k) => binomial(dim, k),
            Valence::ValuedForm { degree, values } => binomial(dim, degree) * values,
        }
    }
}

impl fmt::Display for Valence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valence::Scalar => write!(f, "scalar"),
            Valence::Vector => write!(f, "vector"),
            Valence::Form(1) => write!(f, "covector"),
            Valence::Form(k) => write!(f, "{k}-form"),
            Valence::Multivector(2) => write!(f, "bivector"),
            Valence::Multivector(k) => write!(f, "{k}-vector"),
            Valence::ValuedForm { degree, values } => write!(f, "R^{values}-valued {degree}-form"),
        }
    }
}

/// A smooth tensor field on a coordinate domain.
#[derive(Clone)]
pub struct Field {
    domain: CoordinateDomain,
    valence: Valence,
    eval: Evaluator,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("dim", &self.domain.dim())
            .field("valence", &self.valence)
            .finish()
    }
}

impl Field {
    pub fn new<F>(domain: CoordinateDomain, valence: Valence, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Field { domain, valence, eval: Arc::new(f) }
    }

    pub fn from_evaluator(domain: CoordinateDomain, valence: Valence, eval: Evaluator) -> Self {
        Field { domain, valence, eval }
    }

    pub fn scalar<F>(domain: CoordinateDomain, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Dual + Send + Sync + 'static,
    {
        Self::new(domain, Valence::Scalar, move |x| vec![f(x)])
    }

    pub fn vector<F>(domain: CoordinateDomain, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Self::new(domain, Valence::Vector, f)
    }

    pub fn covector<F>(domain: CoordinateDomain, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Self::new(domain, Valence::COVECTOR, f)
    }

    pub fn form<F>(domain: CoordinateDomain, degree: usize, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Self::new(domain, Valence::Form(degree), f)
    }

    pub fn bivector<F>(domain: CoordinateDomain, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Self::new(domain, Valence::BIVECTOR, f)
    }

    pub fn zero(domain: CoordinateDomain, valence: Valence) -> Self {
        let n = valence.components(domain.dim());
        Self::new(domain, valence, move |_| vec![Dual::ZERO; n])
    }

    pub fn constant(domain: CoordinateDomain, valence: Valence, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), valence.components(domain.dim()));
        Self::new(domain, valence, move |_| constants(&values))
    }

    /// The coordinate vector field `d/dx_i`.
    pub fn coordinate_vector(domain: CoordinateDomain, i: usize) -> Self {
        let n = domain.dim();
        Self::vector(domain, move |_| unit(n, i))
    }

    /// The coordinate differential `dx_i`.
    pub fn coordinate_covector(domain: CoordinateDomain, i: usize) -> Self {
        let n = domain.dim();
        Self::covector(domain, move |_| unit(n, i))
    }

    pub fn domain(&self) -> &CoordinateDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.eval
    }

    pub fn components(&self) -> usize {
        self.valence.components(self.dim())
    }

    #[inline]
    pub fn eval_dual(&self, x: &[Dual]) -> Vec<Dual> {
        (self.eval)(x)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        reals(&(self.eval)(&constants(x)))
    }

    pub fn expect(&self, valence: Valence) -> Result<()> {
        if self.valence != valence {
            return Err(Error::Valence { expected: valence.to_string(), found: self.valence.to_string() });
        }
        Ok(())
    }

    pub fn ensure_same_domain(&self, other: &Field) -> Result<()> {
        self.domain.ensure_same(&other.domain)
    }

    /// Pointwise `self + other`.
    pub fn add(&self, other: &Field) -> Result<Field> {
        self.combine(other, 1.0)
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Field, sign: f64) -> Result<Field> {
        self.ensure_same_domain(other)?;
        other.expect(self.valence)?;
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Ok(Field::new(self.domain.clone(), self.valence, move |x| {
            a(x).into_iter().zip(b(x)).map(|(p, q)| p + q * sign).collect()
        }))
    }

    pub fn scale(&self, factor: f64) -> Field {
        let a = self.eval.clone();
        Field::new(self.domain.clone(), self.valence, move |x| a(x).into_iter().map(|v| v * factor).collect())
    }

    /// Multiplies every component by a scalar field.
    pub fn times(&self, f: &Field) -> Result<Field> {
        self.ensure_same_domain(f)?;
        f.expect(Valence::Scalar)?;
        let (a, s) = (self.eval.clone(), f.eval.clone());
        Ok(Field::new(self.domain.clone(), self.valence, move |x| {
            let k = s(x)[0];
            a(x).into_iter().map(|v| v * k).collect()
        }))
    }

    /// Largest absolute component over a set of points.
    pub fn max_abs(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .flat_map(|p| self.eval(p))
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// A section `(X, alpha)` of the generalized tangent bundle.
#[derive(Clone, Debug)]
pub struct SectionPair {
    pub vector: Field,
    pub form: Field,
}

impl SectionPair {
    pub fn new(vector: Field, form: Field) -> Result<Self> {
        vector.expect(Valence::Vector)?;
        form.expect(Valence::COVECTOR)?;
        vector.ensure_same_domain(&form)?;
        Ok(SectionPair { vector, form })
    }

    pub fn domain(&self) -> &CoordinateDomain {
        self.vector.domain()
    }

    /// `(X(x), alpha(x))` concatenated, length `2 * dim`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.vector.eval(x);
        v.extend(self.form.eval(x));
        v
    }
}

pub(crate) fn unit(n: usize, i: usize) -> Vec<Dual> {
    let mut v = vec![Dual::ZERO; n];
    v[i] = Dual::ONE;
    v
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Strictly increasing index tuples of length `k` from `0..n`, in
/// lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(n, k));
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Lexicographic rank of a strictly increasing tuple.
pub fn rank(n: usize, idx: &[usize]) -> usize {
    let k = idx.len();
    let mut r = 0;
    let mut prev = 0;
    for (j, &i) in idx.iter().enumerate() {
        for v in prev..i {
            r += binomial(n - 1 - v, k - 1 - j);
        }
        prev = i + 1;
    }
    r
}

/// Sorts an index tuple in place; returns the permutation sign, or `None` if
/// an index repeats.
pub fn sort_with_sign(idx: &mut [usize]) -> Option<f64> {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in 0..idx.len() - 1 - i {
            if idx[j] > idx[j + 1] {
                idx.swap(j, j + 1);
                sign = -sign;
            } else if idx[j] == idx[j + 1] {
                return None;
            }
        }
    }
    if idx.windows(2).any(|w| w[0] == w[1]) {
        return None;
    }
    Some(sign)
}

/// Component `T_{i_1 ... i_k}` of an alternating tensor from its independent
/// components.
pub fn alternating(comps: &[Dual], n: usize, idx: &[usize]) -> Dual {
    let mut sorted = [0usize; 8];
    let k = idx.len();
    sorted[..k].copy_from_slice(idx);
    match sort_with_sign(&mut sorted[..k]) {
        Some(sign) => comps[rank(n, &sorted[..k])] * sign,
        None => Dual::ZERO,
    }
}

/// Alternating tensor evaluated on vectors: `T(v_1, ..., v_k)`.
pub fn alternating_apply(comps: &[Dual], n: usize, k: usize, vectors: &[&[Dual]]) -> Dual {
    debug_assert_eq!(vectors.len(), k);
    let mut total = Dual::ZERO;
    for (c, idx) in combinations(n, k).iter().enumerate() {
        // determinant of the k x k minor [v_j[idx_i]]
        let minor: Vec<Vec<Dual>> = (0..k).map(|j| idx.iter().map(|&i| vectors[j][i]).collect()).collect();
        total += comps[c] * determinant(minor);
    }
    total
}

fn determinant(mut m: Vec<Vec<Dual>>) -> Dual {
    match m.len() {
        0 => Dual::ONE,
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        _ => {
            // cofactor expansion along the first row; k <= 4 in practice
            let first = m.remove(0);
            let mut total = Dual::ZERO;
            for (j, a) in first.iter().enumerate() {
                let minor: Vec<Vec<Dual>> = m
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                    .collect();
                let term = *a * determinant(minor);
                total = if j % 2 == 0 { total + term } else { total - term };
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_matches_enumeration() {
        for n in 1..7 {
            for k in 0..=n {
                for (r, c) in combinations(n, k).iter().enumerate() {
                    assert_eq!(rank(n, c), r, "n={n} k={k} c={c:?}");
                }
            }
        }
    }

    #[test]
    fn sign_of_permutations() {
        assert_eq!(sort_with_sign(&mut [2, 0, 1]), Some(1.0));
        assert_eq!(sort_with_sign(&mut [1, 0, 2]), Some(-1.0));
        assert_eq!(sort_with_sign(&mut [1, 1]), None);
    }

    #[test]
    fn alternating_access_is_antisymmetric() {
        let comps = constants(&[1.0, 2.0, 3.0]); // 01, 02, 12 in dim 3
        assert_eq!(alternating(&comps, 3, &[2, 0]).re(), -2.0);
        assert_eq!(alternating(&comps, 3, &[1, 2]).re(), 3.0);
        assert_eq!(alternating(&comps, 3, &[1, 1]).re(), 0.0);
    }

    #[test]
    fn two_form_on_vectors() {
        // dx^dy on R^2 evaluated on (a, b)
        let comps = constants(&[1.0]);
        let a = constants(&[1.0, 2.0]);
        let b = constants(&[3.0, 5.0]);
        assert_eq!(alternating_apply(&comps, 2, 2, &[&a, &b]).re(), 5.0 - 6.0);
    }

    #[test]
    fn valence_component_counts() {
        assert_eq!(Valence::Form(2).components(4), 6);
        assert_eq!(Valence::Multivector(3).components(3), 1);
        assert_eq!(Valence::ValuedForm { degree: 1, values: 3 }.components(2), 6);
    }
}
