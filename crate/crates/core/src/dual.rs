//! Hyper-dual numbers for nested forward-mode differentiation.
//!
//! A [`Dual`] is an element of the truncated algebra generated by up to
//! [`MAX_GENERATORS`] nilpotent units `e_0, e_1, ...` with `e_i^2 = 0`. One
//! generator is plain forward mode; adding a fresh generator on top of an
//! already-seeded input is the same thing as nesting `Dual<Dual<f64>>`, so
//! fields built out of other differentiated fields can themselves be
//! differentiated. Coefficients are indexed by the bitmask of generators.
//!
//! Differentiation never has to know how deep it is: [`next_generator`]
//! picks the first generator not in use by any input.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

/// Maximum nesting depth supported by [`Dual`].
pub const MAX_GENERATORS: usize = 4;
const SLOTS: usize = 1 << MAX_GENERATORS;

#[derive(Clone, Copy)]
pub struct Dual {
    c: [f64; SLOTS],
    order: u8,
}

impl Dual {
    pub const ZERO: Dual = Dual { c: [0.0; SLOTS], order: 0 };
    pub const ONE: Dual = Dual::constant(1.0);

    pub const fn constant(value: f64) -> Self {
        let mut c = [0.0; SLOTS];
        c[0] = value;
        Dual { c, order: 0 }
    }

    /// `value + e_generator`.
    pub fn variable(value: f64, generator: usize) -> Self {
        Self::constant(value).seeded(Dual::ONE, generator)
    }

    /// `self + direction * e_generator`. The generator must be unused by both
    /// operands.
    pub fn seeded(self, direction: Dual, generator: usize) -> Self {
        assert!(
            generator < MAX_GENERATORS,
            "differentiation nested deeper than {MAX_GENERATORS} levels"
        );
        debug_assert!(self.order as usize <= generator && direction.order as usize <= generator);
        let mut out = self;
        let bit = 1 << generator;
        for mask in 0..(1usize << direction.order) {
            out.c[mask | bit] += direction.c[mask];
        }
        out.order = (generator + 1) as u8;
        out
    }

    /// Real part.
    #[inline]
    pub fn re(&self) -> f64 {
        self.c[0]
    }

    /// Number of generators this value may depend on.
    pub fn order(&self) -> usize {
        self.order as usize
    }

    /// Coefficient of the given generator mask.
    pub fn coefficient(&self, mask: usize) -> f64 {
        self.c[mask]
    }

    /// Derivative part along `generator`, as a dual number in the remaining
    /// generators.
    pub fn deriv(&self, generator: usize) -> Dual {
        let bit = 1usize << generator;
        if generator >= self.order as usize {
            return Dual::ZERO;
        }
        let mut out = Dual::ZERO;
        for mask in 0..(1usize << self.order) {
            if mask & bit != 0 {
                out.c[mask & !bit] = self.c[mask];
            }
        }
        out.order = self.order;
        out.normalize()
    }

    /// The part of `self` that does not involve `generator`.
    pub fn without(&self, generator: usize) -> Dual {
        let bit = 1usize << generator;
        let mut out = *self;
        for mask in 0..(1usize << self.order) {
            if mask & bit != 0 {
                out.c[mask] = 0.0;
            }
        }
        out.normalize()
    }

    fn normalize(mut self) -> Self {
        while self.order > 0 {
            let top = 1usize << (self.order - 1);
            let span = 1usize << self.order;
            if (top..span).all(|m| self.c[m] == 0.0) {
                self.order -= 1;
            } else {
                break;
            }
        }
        self
    }

    /// Evaluates a smooth function given its derivatives at the real part:
    /// `derivs[m] = f^(m)(re)`, which must have at least `order + 1` entries.
    fn lift(self, derivs: &[f64]) -> Dual {
        let n = self.order as usize;
        if n == 0 {
            return Dual::constant(derivs[0]);
        }
        let mut nil = self;
        nil.c[0] = 0.0;
        let mut out = Dual::constant(derivs[0]);
        let mut power = Dual::ONE;
        let mut factorial = 1.0;
        for (m, d) in derivs.iter().enumerate().take(n + 1).skip(1) {
            power *= nil;
            factorial *= m as f64;
            out += power * (d / factorial);
        }
        out
    }

    pub fn exp(self) -> Dual {
        let e = self.re().exp();
        self.lift(&[e; MAX_GENERATORS + 1])
    }

    pub fn sin(self) -> Dual {
        let (s, c) = self.re().sin_cos();
        self.lift(&[s, c, -s, -c, s])
    }

    pub fn cos(self) -> Dual {
        let (s, c) = self.re().sin_cos();
        self.lift(&[c, -s, -c, s, c])
    }

    pub fn ln(self) -> Dual {
        let a = self.re();
        self.lift(&[a.ln(), 1.0 / a, -1.0 / (a * a), 2.0 / (a * a * a), -6.0 / (a * a * a * a)])
    }

    pub fn recip(self) -> Dual {
        let a = self.re();
        let inv = 1.0 / a;
        let mut derivs = [0.0; MAX_GENERATORS + 1];
        let mut term = inv;
        for (m, d) in derivs.iter_mut().enumerate() {
            *d = term;
            term *= -((m + 1) as f64) * inv;
        }
        self.lift(&derivs)
    }

    pub fn powf(self, p: f64) -> Dual {
        let a = self.re();
        let mut derivs = [0.0; MAX_GENERATORS + 1];
        let mut coef = 1.0;
        for (m, d) in derivs.iter_mut().enumerate() {
            *d = coef * a.powf(p - m as f64);
            coef *= p - m as f64;
        }
        self.lift(&derivs)
    }

    pub fn sqrt(self) -> Dual {
        self.powf(0.5)
    }

    pub fn powi(self, n: i32) -> Dual {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Dual::ONE;
        let mut base = self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                out *= base;
            }
            base = base * base;
            k >>= 1;
        }
        out
    }

    pub fn tanh(self) -> Dual {
        let t = self.re().tanh();
        let s = 1.0 - t * t;
        self.lift(&[
            t,
            s,
            -2.0 * t * s,
            s * (6.0 * t * t - 2.0),
            8.0 * t * s * (2.0 - 3.0 * t * t),
        ])
    }
}

impl Default for Dual {
    fn default() -> Self {
        Dual::ZERO
    }
}

impl From<f64> for Dual {
    fn from(v: f64) -> Self {
        Dual::constant(v)
    }
}

impl fmt::Debug for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dual({:?}", self.c[0])?;
        for mask in 1..(1usize << self.order) {
            if self.c[mask] != 0.0 {
                write!(f, ", e{mask:b}: {:?}", self.c[mask])?;
            }
        }
        write!(f, ")")
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.c[0])
    }
}

impl Add for Dual {
    type Output = Dual;
    #[inline]
    fn add(mut self, rhs: Dual) -> Dual {
        let n = self.order.max(rhs.order);
        for m in 0..(1usize << n) {
            self.c[m] += rhs.c[m];
        }
        self.order = n;
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    #[inline]
    fn sub(mut self, rhs: Dual) -> Dual {
        let n = self.order.max(rhs.order);
        for m in 0..(1usize << n) {
            self.c[m] -= rhs.c[m];
        }
        self.order = n;
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        let n = self.order.max(rhs.order);
        if n == 0 {
            return Dual::constant(self.c[0] * rhs.c[0]);
        }
        let mut out = Dual { c: [0.0; SLOTS], order: n };
        for s in 0..(1usize << n) {
            // sum over submasks of s
            let mut a = s;
            let mut acc = 0.0;
            loop {
                acc += self.c[a] * rhs.c[s ^ a];
                if a == 0 {
                    break;
                }
                a = (a - 1) & s;
            }
            out.c[s] = acc;
        }
        out
    }
}

impl Div for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        if rhs.order == 0 {
            return self / rhs.c[0];
        }
        self * rhs.recip()
    }
}

impl Neg for Dual {
    type Output = Dual;
    #[inline]
    fn neg(mut self) -> Dual {
        for m in 0..(1usize << self.order) {
            self.c[m] = -self.c[m];
        }
        self
    }
}

impl Add<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn add(mut self, rhs: f64) -> Dual {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn sub(mut self, rhs: f64) -> Dual {
        self.c[0] -= rhs;
        self
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn mul(mut self, rhs: f64) -> Dual {
        for m in 0..(1usize << self.order) {
            self.c[m] *= rhs;
        }
        self
    }
}

impl Div<f64> for Dual {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: f64) -> Dual {
        self * (1.0 / rhs)
    }
}

impl Add<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn add(self, rhs: Dual) -> Dual {
        rhs + self
    }
}

impl Sub<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn sub(self, rhs: Dual) -> Dual {
        -rhs + self
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn mul(self, rhs: Dual) -> Dual {
        rhs * self
    }
}

impl Div<Dual> for f64 {
    type Output = Dual;
    #[inline]
    fn div(self, rhs: Dual) -> Dual {
        rhs.recip() * self
    }
}

macro_rules! assign_ops {
    ($($tr:ident $method:ident $op:tt),*) => {$(
        impl $tr for Dual {
            #[inline]
            fn $method(&mut self, rhs: Dual) { *self = *self $op rhs; }
        }
        impl $tr<f64> for Dual {
            #[inline]
            fn $method(&mut self, rhs: f64) { *self = *self $op rhs; }
        }
    )*};
}
assign_ops!(AddAssign add_assign +, SubAssign sub_assign -, MulAssign mul_assign *, DivAssign div_assign /);

impl Sum for Dual {
    fn sum<I: Iterator<Item = Dual>>(iter: I) -> Dual {
        iter.fold(Dual::ZERO, |a, b| a + b)
    }
}

/// First generator not used by any of the given values.
pub fn next_generator<'a>(values: impl IntoIterator<Item = &'a Dual>) -> usize {
    values.into_iter().map(Dual::order).max().unwrap_or(0)
}

pub fn constants(xs: &[f64]) -> Vec<Dual> {
    xs.iter().copied().map(Dual::constant).collect()
}

pub fn reals(xs: &[Dual]) -> Vec<f64> {
    xs.iter().map(Dual::re).collect()
}

/// Directional derivative of a vector-valued map: returns `(f(x), Df(x)·v)`.
pub fn directional<F>(f: F, x: &[Dual], v: &[Dual]) -> (Vec<Dual>, Vec<Dual>)
where
    F: Fn(&[Dual]) -> Vec<Dual>,
{
    let g = next_generator(x.iter().chain(v));
    let seeded: Vec<Dual> = x.iter().zip(v).map(|(xi, vi)| xi.seeded(*vi, g)).collect();
    let y = f(&seeded);
    let value = y.iter().map(|yi| yi.without(g)).collect();
    let slope = y.iter().map(|yi| yi.deriv(g)).collect();
    (value, slope)
}

/// Jacobian `J[i][j] = d f_i / d x_j`, one forward pass per input direction.
pub fn jacobian<F>(f: F, x: &[Dual]) -> Vec<Vec<Dual>>
where
    F: Fn(&[Dual]) -> Vec<Dual>,
{
    let n = x.len();
    let g = next_generator(x);
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let seeded: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(k, xk)| if k == j { xk.seeded(Dual::ONE, g) } else { *xk })
            .collect();
        columns.push(f(&seeded).into_iter().map(|y| y.deriv(g)).collect::<Vec<_>>());
    }
    let m = columns.first().map_or(0, Vec::len);
    (0..m).map(|i| (0..n).map(|j| columns[j][i]).collect()).collect()
}

/// Gradient of a scalar map.
pub fn gradient<F>(f: F, x: &[Dual]) -> Vec<Dual>
where
    F: Fn(&[Dual]) -> Dual,
{
    let g = next_generator(x);
    (0..x.len())
        .map(|j| {
            let seeded: Vec<Dual> = x
                .iter()
                .enumerate()
                .map(|(k, xk)| if k == j { xk.seeded(Dual::ONE, g) } else { *xk })
                .collect();
            f(&seeded).deriv(g)
        })
        .collect()
}

/// Derivative of a map of one real parameter.
pub fn derivative<F>(f: F, t: Dual) -> (Vec<Dual>, Vec<Dual>)
where
    F: Fn(Dual) -> Vec<Dual>,
{
    let g = t.order();
    let y = f(t.seeded(Dual::ONE, g));
    (y.iter().map(|v| v.without(g)).collect(), y.iter().map(|v| v.deriv(g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn first_derivatives_of_elementary_functions() {
        let x = Dual::variable(0.7, 0);
        let cases: [(Dual, f64); 6] = [
            (x.sin(), 0.7f64.cos()),
            (x.cos(), -0.7f64.sin()),
            (x.exp(), 0.7f64.exp()),
            (x.ln(), 1.0 / 0.7),
            (x.sqrt(), 0.5 / 0.7f64.sqrt()),
            (x.tanh(), 1.0 - 0.7f64.tanh().powi(2)),
        ];
        for (y, expected) in cases {
            assert!(close(y.deriv(0).re(), expected, 1e-14), "{y:?} vs {expected}");
        }
    }

    #[test]
    fn nested_generators_give_second_derivatives() {
        // f(x) = x^3 sin(x); f'' = 6x sin x + 6x^2 cos x - x^3 sin x
        let x0 = 1.3f64;
        let x = Dual::variable(x0, 0).seeded(Dual::ONE, 1);
        let y = x.powi(3) * x.sin();
        let expected = 6.0 * x0 * x0.sin() + 6.0 * x0 * x0 * x0.cos() - x0.powi(3) * x0.sin();
        assert!(close(y.deriv(0).deriv(1).re(), expected, 1e-13));
    }

    #[test]
    fn third_derivative_of_reciprocal() {
        let x0 = 0.8f64;
        let x = Dual::variable(x0, 0).seeded(Dual::ONE, 1).seeded(Dual::ONE, 2);
        let y = 1.0 / x;
        let d3 = y.deriv(0).deriv(1).deriv(2).re();
        assert!(close(d3, -6.0 / x0.powi(4), 1e-13));
    }

    #[test]
    fn jacobian_of_polar_map() {
        let f = |x: &[Dual]| vec![x[0] * x[1].cos(), x[0] * x[1].sin()];
        let j = jacobian(f, &constants(&[2.0, 0.3]));
        assert!(close(j[0][0].re(), 0.3f64.cos(), 1e-15));
        assert!(close(j[0][1].re(), -2.0 * 0.3f64.sin(), 1e-15));
        assert!(close(j[1][1].re(), 2.0 * 0.3f64.cos(), 1e-15));
    }

    #[test]
    fn constant_has_zero_derivative() {
        let g = gradient(|_x| Dual::constant(3.0), &constants(&[1.0, 2.0]));
        assert!(g.iter().all(|d| d.re() == 0.0));
    }

    #[test]
    fn integer_power_matches_float_power() {
        let x = Dual::variable(-1.7, 0);
        let a = x.powi(-3);
        assert!(close(a.re(), (-1.7f64).powi(-3), 1e-14));
        assert!(close(a.deriv(0).re(), -3.0 * (-1.7f64).powi(-4), 1e-14));
    }
}
