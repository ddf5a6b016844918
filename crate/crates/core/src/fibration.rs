//! Trivialized fibrations `E = B x F`, Ehresmann connections and parallel
//! transport.
//!
//! Points of `E` are stored base coordinates first. A connection is encoded
//! by its coefficient matrix: the horizontal lift of `v` at `(b, x)` is
//! `(v, A(b, x) v)`.

use std::fmt;
use std::sync::Arc;

use crate::chart::field::{alternating_apply, combinations, rank, unit, Field, Valence};
use crate::chart::CoordinateDomain;
use crate::dual::{constants, directional, reals, Dual};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FiberedSpace {
    base: CoordinateDomain,
    fiber: CoordinateDomain,
    total: CoordinateDomain,
}

impl FiberedSpace {
    pub fn new(base: CoordinateDomain, fiber: CoordinateDomain) -> Self {
        let total = base.product(&fiber);
        FiberedSpace { base, fiber, total }
    }

    pub fn base(&self) -> &CoordinateDomain {
        &self.base
    }

    pub fn fiber(&self) -> &CoordinateDomain {
        &self.fiber
    }

    pub fn total(&self) -> &CoordinateDomain {
        &self.total
    }

    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.dim()
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// The projection `p(b, x) = b`.
    pub fn project<'a, T>(&self, e: &'a [T]) -> &'a [T] {
        &e[..self.base_dim()]
    }

    pub fn split<'a, T>(&self, e: &'a [T]) -> (&'a [T], &'a [T]) {
        e.split_at(self.base_dim())
    }

    pub fn join<T: Clone>(&self, b: &[T], x: &[T]) -> Vec<T> {
        let mut e = b.to_vec();
        e.extend_from_slice(x);
        e
    }

    /// Sample points of `E`.
    pub fn samples(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        self.total.samples(count, seed)
    }
}

/// `(b, x) -> A`, stored row-major as `A[a * base_dim + i]`.
pub type CoefficientFn = Arc<dyn Fn(&[Dual], &[Dual]) -> Vec<Dual> + Send + Sync>;

/// An Ehresmann connection on a trivialized fibration.
#[derive(Clone)]
pub struct Connection {
    space: FiberedSpace,
    coeff: CoefficientFn,
}

impl fmt::Debug for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Connection").field("space", &self.space).finish()
    }
}

impl Connection {
    /// Connection given by its coefficient matrix.
    pub fn new<F>(space: FiberedSpace, coeff: F) -> Self
    where
        F: Fn(&[Dual], &[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        Connection { space, coeff: Arc::new(coeff) }
    }

    /// The trivial connection `A = 0`.
    pub fn flat(space: FiberedSpace) -> Self {
        let size = space.base_dim() * space.fiber_dim();
        Self::new(space, move |_, _| vec![Dual::ZERO; size])
    }

    /// Builds a connection from `(b, x, v) -> A(b, x) v`, checking linearity
    /// in `v` at sample points.
    pub fn from_fn<F>(space: FiberedSpace, apply: F) -> Result<Self>
    where
        F: Fn(&[Dual], &[Dual], &[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        let (m, n) = (space.base_dim(), space.fiber_dim());
        let apply = Arc::new(apply);
        let probe = apply.clone();
        let mut defect: f64 = 0.0;
        for (k, e) in space.samples(32, 0x11).iter().enumerate() {
            let (b, x) = space.split(e);
            let (b, x) = (constants(b), constants(x));
            let u: Vec<Dual> = (0..m).map(|i| Dual::constant(((i + k) as f64 * 0.37).sin())).collect();
            let w: Vec<Dual> = (0..m).map(|i| Dual::constant(((i * 3 + k) as f64 * 0.71).cos())).collect();
            let lambda = 1.7 + k as f64 * 0.1;
            let combo: Vec<Dual> = u.iter().zip(&w).map(|(a, c)| *a * lambda + *c).collect();
            let lhs = probe(&b, &x, &combo);
            let (au, aw) = (probe(&b, &x, &u), probe(&b, &x, &w));
            for a in 0..n {
                let rhs = au[a] * lambda + aw[a];
                defect = defect.max((lhs[a] - rhs).re().abs());
            }
        }
        if defect > 1e-12 {
            return Err(Error::NonlinearConnection { defect });
        }
        Ok(Self::new(space, move |b, x| {
            let mut out = vec![Dual::ZERO; n * m];
            for i in 0..m {
                let col = apply(b, x, &unit(m, i));
                for a in 0..n {
                    out[a * m + i] = col[a];
                }
            }
            out
        }))
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn coefficient_fn(&self) -> &CoefficientFn {
        &self.coeff
    }

    pub fn coefficients(&self, b: &[Dual], x: &[Dual]) -> Vec<Dual> {
        (self.coeff)(b, x)
    }

    /// `A(b, x) v`.
    pub fn apply(&self, b: &[Dual], x: &[Dual], v: &[Dual]) -> Vec<Dual> {
        let m = self.space.base_dim();
        let a = self.coefficients(b, x);
        (0..self.space.fiber_dim())
            .map(|r| (0..m).map(|i| a[r * m + i] * v[i]).sum())
            .collect()
    }

    /// Horizontal lift of a base tangent vector at a point of `E`.
    pub fn lift_at(&self, e: &[Dual], v: &[Dual]) -> Vec<Dual> {
        let (b, x) = self.space.split(e);
        let mut out = v.to_vec();
        out.extend(self.apply(b, x, v));
        out
    }

    /// Vertical projection of a tangent vector of `E`: `w - A(b, x) p_* w`.
    pub fn vertical_part(&self, e: &[Dual], w: &[Dual]) -> Vec<Dual> {
        let (b, x) = self.space.split(e);
        let m = self.space.base_dim();
        let av = self.apply(b, x, &w[..m]);
        w[m..].iter().zip(av).map(|(a, c)| *a - c).collect()
    }

    /// Largest coefficient over sample points; zero means the supplied
    /// trivialization is parallel.
    pub fn max_coefficient(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .flat_map(|e| {
                let (b, x) = self.space.split(e);
                reals(&self.coefficients(&constants(b), &constants(x)))
            })
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `h(v)(b, x) = (v(b), A(b, x) v(b))` as a vector field on `E`.
pub fn horizontal_lift(conn: &Connection, v: &Field) -> Result<Field> {
    v.expect(Valence::Vector)?;
    conn.space.base.ensure_same(v.domain())?;
    let c = conn.clone();
    let fv = v.evaluator().clone();
    let m = conn.space.base_dim();
    Ok(Field::vector(conn.space.total.clone(), move |e| c.lift_at(e, &fv(&e[..m]))))
}

/// Horizontal lift of the coordinate field `d/db_i`.
pub fn coordinate_lift(conn: &Connection, i: usize) -> Field {
    let c = conn.clone();
    let m = conn.space.base_dim();
    Field::vector(conn.space.total.clone(), move |e| c.lift_at(e, &unit(m, i)))
}

/// `Curv(u, v) = [h(u), h(v)] - h([u, v])`, a vector field on `E` whose base
/// components vanish.
pub fn curvature(conn: &Connection, u: &Field, v: &Field) -> Result<Field> {
    use crate::chart::ops::lie_bracket;
    let hu = horizontal_lift(conn, u)?;
    let hv = horizontal_lift(conn, v)?;
    let h_uv = horizontal_lift(conn, &lie_bracket(u, v)?)?;
    lie_bracket(&hu, &hv)?.sub(&h_uv)
}

/// Fiber components of `Curv(d/db_i, d/db_j)` at a point.
pub fn curvature_coordinates(conn: &Connection, e: &[Dual], i: usize, j: usize) -> Vec<Dual> {
    let m = conn.space.base_dim();
    let hi = conn.lift_at(e, &unit(m, i));
    let hj = conn.lift_at(e, &unit(m, j));
    let coeff_col = |k: usize| {
        let c = conn.clone();
        move |q: &[Dual]| {
            let (b, x) = c.space.split(q);
            c.apply(b, x, &unit(m, k))
        }
    };
    let (_, hi_aj) = directional(coeff_col(j), e, &hi);
    let (_, hj_ai) = directional(coeff_col(i), e, &hj);
    hi_aj.into_iter().zip(hj_ai).map(|(a, b)| a - b).collect()
}

/// A k-form on the base whose coefficients are functions on `E`, stored by
/// increasing base index tuples.
#[derive(Clone)]
pub struct HorizontalForm {
    space: FiberedSpace,
    degree: usize,
    eval: Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>,
}

impl fmt::Debug for HorizontalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HorizontalForm").field("degree", &self.degree).finish()
    }
}

impl HorizontalForm {
    pub fn new<F>(space: FiberedSpace, degree: usize, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        HorizontalForm { space, degree, eval: Arc::new(f) }
    }

    pub fn zero(space: FiberedSpace, degree: usize) -> Self {
        let n = combinations(space.base_dim(), degree).len();
        Self::new(space, degree, move |_| vec![Dual::ZERO; n])
    }

    /// `f(b, x) * p^* w` for a base form `w` and a function `f` on `E`.
    pub fn scaled_base_form<F>(space: FiberedSpace, w: &Field, f: F) -> Result<Self>
    where
        F: Fn(&[Dual]) -> Dual + Send + Sync + 'static,
    {
        let degree = match w.valence() {
            Valence::Form(k) => k,
            other => return Err(Error::Valence { expected: "form".into(), found: other.to_string() }),
        };
        space.base.ensure_same(w.domain())?;
        let m = space.base_dim();
        let fw = w.evaluator().clone();
        Ok(Self::new(space, degree, move |e| {
            let s = f(e);
            fw(&e[..m]).into_iter().map(|c| c * s).collect()
        }))
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval_dual(&self, e: &[Dual]) -> Vec<Dual> {
        (self.eval)(e)
    }

    pub fn eval(&self, e: &[f64]) -> Vec<f64> {
        reals(&(self.eval)(&constants(e)))
    }

    /// The form evaluated on base vectors `w(v_1, ..., v_k)` at `e`.
    pub fn apply(&self, e: &[Dual], vectors: &[&[Dual]]) -> Dual {
        alternating_apply(&self.eval_dual(e), self.space.base_dim(), self.degree, vectors)
    }

    /// The same form regarded as a form on the total space that vanishes on
    /// vertical vectors after horizontal projection: `w~(X, ...) = w(p_* X, ...)`.
    /// Horizontal lifts of `v` and `v` itself evaluate identically.
    pub fn as_total_form(&self) -> Field {
        let m = self.space.base_dim();
        let n = self.space.dim();
        let k = self.degree;
        let f = self.eval.clone();
        let total = combinations(n, k);
        Field::form(self.space.total.clone(), k, move |e| {
            let comps = f(e);
            total
                .iter()
                .map(|idx| {
                    if idx.iter().all(|&i| i < m) {
                        comps[rank(m, idx)]
                    } else {
                        Dual::ZERO
                    }
                })
                .collect()
        })
    }

    pub fn sub(&self, other: &HorizontalForm) -> HorizontalForm {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self::new(self.space.clone(), self.degree, move |e| {
            a(e).into_iter().zip(b(e)).map(|(p, q)| p - q).collect()
        })
    }
}

/// Exterior covariant differential on coordinate fields (whose brackets
/// vanish): `(d_G w)_{i_0..i_k} = sum_j (-1)^j h(d_{i_j}) w_{..^i_j..}`.
pub fn covariant_differential(conn: &Connection, w: &HorizontalForm) -> Result<HorizontalForm> {
    let m = conn.space.base_dim();
    let k = w.degree;
    if k >= m {
        return Err(Error::DegreeTooHigh { degree: k, dim: m });
    }
    if k > 2 {
        return Err(Error::Unsupported(format!("covariant differential of a {k}-form")));
    }
    let c = conn.clone();
    let f = w.eval.clone();
    let target = combinations(m, k + 1);
    Ok(HorizontalForm::new(conn.space.clone(), k + 1, move |e| {
        let derivs: Vec<Vec<Dual>> = (0..m)
            .map(|i| {
                let h = c.lift_at(e, &unit(m, i));
                directional(|q| f(q), e, &h).1
            })
            .collect();
        let mut face = Vec::with_capacity(k);
        target
            .iter()
            .map(|idx| {
                let mut acc = Dual::ZERO;
                for j in 0..=k {
                    face.clear();
                    face.extend(idx.iter().enumerate().filter(|(t, _)| *t != j).map(|(_, v)| *v));
                    let term = derivs[idx[j]][rank(m, &face)];
                    acc = if j % 2 == 0 { acc + term } else { acc - term };
                }
                acc
            })
            .collect()
    }))
}

/// Max over sample points and coordinate pairs of
/// `|d_G^2 f(d_i, d_j) - Curv(d_i, d_j) f|`.
pub fn covariant_square_residual(conn: &Connection, f: &Field, points: &[Vec<f64>]) -> Result<f64> {
    f.expect(Valence::Scalar)?;
    conn.space.total.ensure_same(f.domain())?;
    let ff = f.evaluator().clone();
    let w = HorizontalForm::new(conn.space.clone(), 0, move |e| ff(e));
    let d1 = covariant_differential(conn, &w)?;
    let d2 = covariant_differential(conn, &d1)?;
    let m = conn.space.base_dim();
    let n = conn.space.fiber_dim();
    let mut worst: f64 = 0.0;
    for p in points {
        let e = constants(p);
        let dd = d2.eval_dual(&e);
        let grad = crate::dual::gradient(|q| f.eval_dual(q)[0], &e);
        for (c, ij) in combinations(m, 2).iter().enumerate() {
            let curv = curvature_coordinates(conn, &e, ij[0], ij[1]);
            let lie: Dual = (0..n).map(|a| curv[a] * grad[m + a]).sum();
            worst = worst.max((dd[c] - lie).re().abs());
        }
    }
    Ok(worst)
}

/// A path in the base with an exact velocity.
#[derive(Clone)]
pub struct BasePath {
    dim: usize,
    position: Arc<dyn Fn(Dual) -> Vec<Dual> + Send + Sync>,
    steps: usize,
}

impl fmt::Debug for BasePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasePath").field("dim", &self.dim).field("steps", &self.steps).finish()
    }
}

/// Default number of RK4 steps over the unit interval.
pub const DEFAULT_STEPS: usize = 1000;

impl BasePath {
    pub fn new<F>(dim: usize, position: F) -> Self
    where
        F: Fn(Dual) -> Vec<Dual> + Send + Sync + 'static,
    {
        BasePath { dim, position: Arc::new(position), steps: DEFAULT_STEPS }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        assert!(steps > 0);
        self.steps = steps;
        self
    }

    /// The straight segment from `a` to `b`.
    pub fn line(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self::new(a.len(), move |t| a.iter().zip(&b).map(|(p, q)| (1.0 - t) * *p + t * *q).collect())
    }

    /// The loop `center + radius (cos 2 pi t, sin 2 pi t)` in coordinates `(i, j)`.
    pub fn circle(center: Vec<f64>, radius: f64, i: usize, j: usize) -> Self {
        Self::new(center.len(), move |t| {
            let a = t * (2.0 * std::f64::consts::PI);
            let mut p = constants(&center);
            p[i] += a.cos() * radius;
            p[j] += a.sin() * radius;
            p
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn position(&self, t: Dual) -> Vec<Dual> {
        (self.position)(t)
    }

    pub fn at(&self, t: f64) -> Vec<f64> {
        reals(&self.position(Dual::constant(t)))
    }

    pub fn velocity(&self, t: Dual) -> Vec<Dual> {
        crate::dual::derivative(|s| self.position(s), t).1
    }

    /// `t -> self(1 - t)`.
    pub fn reversed(&self) -> Self {
        let p = self.position.clone();
        BasePath { dim: self.dim, position: Arc::new(move |t| p(1.0 - t)), steps: self.steps }
    }

    /// Runs `self` on `[0, 1/2]` and `next` on `[1/2, 1]`.
    pub fn then(&self, next: &BasePath) -> Self {
        let (p, q) = (self.position.clone(), next.position.clone());
        BasePath {
            dim: self.dim,
            position: Arc::new(move |t| if t.re() <= 0.5 { p(t * 2.0) } else { q(t * 2.0 - 1.0) }),
            steps: self.steps + next.steps,
        }
    }

    /// Reparameterizes by a smooth map of the unit interval onto itself.
    pub fn reparameterize<F>(&self, tau: F) -> Self
    where
        F: Fn(Dual) -> Dual + Send + Sync + 'static,
    {
        let p = self.position.clone();
        BasePath { dim: self.dim, position: Arc::new(move |t| p(tau(t))), steps: self.steps }
    }

    /// Max deviation of the velocity from central differences.
    pub fn velocity_defect(&self, count: usize) -> f64 {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for k in 0..count {
            let t = (k as f64 + 0.5) / count as f64;
            let v = reals(&self.velocity(Dual::constant(t)));
            let (a, b) = (self.at(t + h), self.at(t - h));
            for i in 0..self.dim {
                worst = worst.max((v[i] - (a[i] - b[i]) / (2.0 * h)).abs());
            }
        }
        worst
    }
}

fn transport_rhs(conn: &Connection, path: &BasePath, s: f64, x: &[Dual]) -> Vec<Dual> {
    let sd = Dual::constant(s);
    let b = path.position(sd);
    let v = path.velocity(sd);
    conn.apply(&b, x, &v)
}

fn rk4_step(conn: &Connection, path: &BasePath, s: f64, h: f64, x: &[Dual]) -> Vec<Dual> {
    let add = |x: &[Dual], k: &[Dual], c: f64| -> Vec<Dual> { x.iter().zip(k).map(|(a, b)| *a + *b * c).collect() };
    let k1 = transport_rhs(conn, path, s, x);
    let k2 = transport_rhs(conn, path, s + h / 2.0, &add(x, &k1, h / 2.0));
    let k3 = transport_rhs(conn, path, s + h / 2.0, &add(x, &k2, h / 2.0));
    let k4 = transport_rhs(conn, path, s + h, &add(x, &k3, h));
    x.iter()
        .enumerate()
        .map(|(a, xa)| *xa + (k1[a] + k2[a] * 2.0 + k3[a] * 2.0 + k4[a]) * (h / 6.0))
        .collect()
}

fn check_inside(conn: &Connection, x: &[Dual], time: f64) -> Result<()> {
    let xr = reals(x);
    if conn.space.fiber.contains(&xr) {
        Ok(())
    } else {
        Err(Error::IncompleteTransport { time })
    }
}

/// Fiber transport `phi_{t,s}(x)` along a base path, by RK4 with the path's
/// step size. Works on dual inputs so the transport can be differentiated.
pub fn transport_between(conn: &Connection, path: &BasePath, x: &[Dual], s: f64, t: f64) -> Result<Vec<Dual>> {
    let span = t - s;
    let n = ((span.abs() * path.steps as f64).round() as usize).max(1);
    let h = span / n as f64;
    let mut cur = x.to_vec();
    check_inside(conn, &cur, s)?;
    for k in 0..n {
        let time = s + k as f64 * h;
        cur = rk4_step(conn, path, time, h, &cur);
        check_inside(conn, &cur, time + h)?;
    }
    Ok(cur)
}

/// `phi_{t,0}(x0)`.
pub fn parallel_transport(conn: &Connection, path: &BasePath, x0: &[Dual], t: f64) -> Result<Vec<Dual>> {
    transport_between(conn, path, x0, 0.0, t)
}

/// `phi_{t_i,0}(x0)` at the uniform nodes `t_i = i / steps`.
pub fn transport_trajectory(conn: &Connection, path: &BasePath, x0: &[Dual], steps: usize) -> Result<Vec<Vec<Dual>>> {
    let h = 1.0 / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut cur = x0.to_vec();
    check_inside(conn, &cur, 0.0)?;
    out.push(cur.clone());
    for k in 0..steps {
        cur = rk4_step(conn, path, k as f64 * h, h, &cur);
        check_inside(conn, &cur, (k + 1) as f64 * h)?;
        out.push(cur.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_space() -> FiberedSpace {
        FiberedSpace::new(CoordinateDomain::cube(1, 5.0), CoordinateDomain::cube(1, 50.0))
    }

    #[test]
    fn trivial_lift() {
        let conn = Connection::flat(line_space());
        let v = Field::coordinate_vector(CoordinateDomain::cube(1, 5.0), 0);
        let h = horizontal_lift(&conn, &v).unwrap();
        assert_eq!(h.eval(&[0.3, 1.2]), vec![1.0, 0.0]);
    }

    #[test]
    fn linear_lift() {
        let conn = Connection::new(line_space(), |_, x| vec![x[0]]);
        let v = Field::coordinate_vector(CoordinateDomain::cube(1, 5.0), 0);
        let h = horizontal_lift(&conn, &v).unwrap();
        assert_eq!(h.eval(&[0.3, 1.2]), vec![1.0, 1.2]);
    }

    #[test]
    fn from_fn_rejects_nonlinear() {
        let r = Connection::from_fn(line_space(), |_, _, v| vec![v[0] * v[0]]);
        assert!(matches!(r, Err(Error::NonlinearConnection { .. })));
        let ok = Connection::from_fn(line_space(), |_, x, v| vec![v[0] * x[0]]).unwrap();
        assert_eq!(reals(&ok.coefficients(&constants(&[0.1]), &constants(&[2.0]))), vec![2.0]);
    }

    #[test]
    fn unit_shift_transport() {
        let conn = Connection::new(line_space(), |_, _| vec![Dual::ONE]);
        let path = BasePath::line(vec![0.0], vec![1.0]);
        let x = parallel_transport(&conn, &path, &constants(&[0.4]), 0.7).unwrap();
        assert!((x[0].re() - 1.1).abs() < 1e-12);
    }

    #[test]
    fn transport_escape_is_reported() {
        let space = FiberedSpace::new(CoordinateDomain::cube(1, 5.0), CoordinateDomain::cube(1, 1.0));
        let conn = Connection::new(space, |_, _| vec![Dual::constant(3.0)]);
        let path = BasePath::line(vec![0.0], vec![1.0]);
        match parallel_transport(&conn, &path, &constants(&[0.0]), 1.0) {
            Err(Error::IncompleteTransport { time }) => assert!((time - 1.0 / 3.0).abs() < 2e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        // dx/ds = x: exact e^t
        let conn = Connection::new(line_space(), |_, x| vec![x[0]]);
        let err = |steps| {
            let path = BasePath::line(vec![0.0], vec![1.0]).with_steps(steps);
            let x = parallel_transport(&conn, &path, &constants(&[1.0]), 1.0).unwrap();
            (x[0].re() - 1f64.exp()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(ratio > 14.0 && ratio < 18.0, "{ratio}");
    }

    #[test]
    fn curvature_of_a_shear() {
        // A = (0, b_1) on B = R^2, F = R: h_1 = d_1, h_2 = d_2 + b_1 d_x
        let space = FiberedSpace::new(CoordinateDomain::cube(2, 2.0), CoordinateDomain::cube(1, 2.0));
        let conn = Connection::new(space, |b, _| vec![Dual::ZERO, b[0]]);
        let base = CoordinateDomain::cube(2, 2.0);
        let c = curvature(&conn, &Field::coordinate_vector(base.clone(), 0), &Field::coordinate_vector(base, 1)).unwrap();
        assert_eq!(c.eval(&[0.1, 0.2, 0.3]), vec![0.0, 0.0, 1.0]);
        let cc = curvature_coordinates(&conn, &constants(&[0.1, 0.2, 0.3]), 0, 1);
        assert_eq!(cc[0].re(), 1.0);
    }

    #[test]
    fn covariant_square_is_curvature() {
        let space = FiberedSpace::new(CoordinateDomain::cube(2, 2.0), CoordinateDomain::cube(2, 2.0));
        let conn = Connection::new(space.clone(), |b, x| vec![x[1] * b[1], b[0].sin(), x[0] * x[1], b[0] * b[1]]);
        let f = Field::scalar(space.total().clone(), |e| e[2] * e[3].exp() + e[0] * e[2]);
        let r = covariant_square_residual(&conn, &f, &space.samples(20, 1)).unwrap();
        assert!(r < 1e-12, "{r}");
    }
}
