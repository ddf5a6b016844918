//! Geometric data `(pi_V, Gamma, omega_H)` and the Dirac structures they
//! determine.
//!
//! Conventions: `i_X w = w(X, .)`, `pi^#(alpha) = pi(alpha, .)`, so that
//! `(pi^# alpha)^b = alpha_a pi^{ab}`. A vertical covector `alpha` is embedded
//! in `T*E` as the element of `Hor^0` restricting to `alpha` on `Vert`, with
//! base components `-A^T alpha`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chart::field::{alternating, combinations, unit, Field, SectionPair, Valence};
use crate::chart::ops::{courant_bracket, lie_bracket, lie_derivative_bivector, schouten_square};
use crate::dual::{constants, directional, gradient, jacobian, reals, Dual};
use crate::error::{Error, Result};
use crate::fibration::{
    coordinate_lift, covariant_differential, curvature_coordinates, horizontal_lift, Connection, FiberedSpace,
    HorizontalForm,
};
use crate::linalg::{column_basis, null_space, principal_sines, projection_residual, rank};

/// Default tolerance for identities computed with exact derivatives.
pub const EXACT_TOLERANCE: f64 = 1e-8;
/// Default tolerance for identities that go through ODE solves.
pub const ODE_TOLERANCE: f64 = 1e-6;
/// Threshold on principal-angle sines for rank decisions.
pub const ANGLE_THRESHOLD: f64 = 1e-8;

/// A bivector tangent to the fibers, stored by increasing fiber index pairs
/// and evaluated at points of `E`.
#[derive(Clone)]
pub struct VerticalBivector {
    space: FiberedSpace,
    eval: Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>,
}

impl fmt::Debug for VerticalBivector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VerticalBivector").field("fiber_dim", &self.space.fiber_dim()).finish()
    }
}

impl VerticalBivector {
    pub fn new<F>(space: FiberedSpace, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        VerticalBivector { space, eval: Arc::new(f) }
    }

    pub fn zero(space: FiberedSpace) -> Self {
        let n = combinations(space.fiber_dim(), 2).len();
        Self::new(space, move |_| vec![Dual::ZERO; n])
    }

    pub fn constant(space: FiberedSpace, comps: Vec<f64>) -> Self {
        assert_eq!(comps.len(), combinations(space.fiber_dim(), 2).len());
        Self::new(space, move |_| constants(&comps))
    }

    /// The same bivector for every base point, given as a function of the
    /// fiber coordinates only.
    pub fn fiberwise<F>(space: FiberedSpace, f: F) -> Self
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        let m = space.base_dim();
        Self::new(space, move |e| f(&e[m..]))
    }

    pub fn space(&self) -> &FiberedSpace {
        &self.space
    }

    pub fn eval_dual(&self, e: &[Dual]) -> Vec<Dual> {
        (self.eval)(e)
    }

    /// `pi^{ab}` at `e`.
    pub fn entry(&self, comps: &[Dual], a: usize, b: usize) -> Dual {
        alternating(comps, self.space.fiber_dim(), &[a, b])
    }

    /// `(pi^# alpha)^b = alpha_a pi^{ab}` on fiber components.
    pub fn sharp(&self, e: &[Dual], alpha: &[Dual]) -> Vec<Dual> {
        let comps = self.eval_dual(e);
        crate::chart::ops::sharp_values(&comps, self.space.fiber_dim(), alpha)
    }

    /// Full antisymmetric matrix `P[a][b] = pi^{ab}` at a real point.
    pub fn matrix(&self, e: &[f64]) -> DMatrix<f64> {
        let n = self.space.fiber_dim();
        let comps = self.eval_dual(&constants(e));
        DMatrix::from_fn(n, n, |a, b| self.entry(&comps, a, b).re())
    }

    /// The bivector as a field on the total space.
    pub fn as_total_field(&self) -> Field {
        let (m, n) = (self.space.base_dim(), self.space.fiber_dim());
        let f = self.eval.clone();
        let total = combinations(m + n, 2);
        Field::bivector(self.space.total().clone(), move |e| {
            let comps = f(e);
            total
                .iter()
                .map(|ij| {
                    if ij[0] >= m {
                        alternating(&comps, n, &[ij[0] - m, ij[1] - m])
                    } else {
                        Dual::ZERO
                    }
                })
                .collect()
        })
    }
}

/// The triple `(pi_V, Gamma, omega_H)` on a trivialized fibration.
#[derive(Clone, Debug)]
pub struct GeometricData {
    pub pi_v: VerticalBivector,
    pub connection: Connection,
    pub omega_h: HorizontalForm,
}

impl GeometricData {
    pub fn new(pi_v: VerticalBivector, connection: Connection, omega_h: HorizontalForm) -> Result<Self> {
        let space = connection.space();
        if pi_v.space() != space || omega_h.space() != space {
            return Err(Error::DomainMismatch("geometric data on different fibrations".into()));
        }
        if omega_h.degree() != 2 {
            return Err(Error::Valence { expected: "horizontal 2-form".into(), found: format!("degree {}", omega_h.degree()) });
        }
        Ok(GeometricData { pi_v, connection, omega_h })
    }

    /// All three pieces zero: `L = Hor + Hor^0` for the product connection.
    pub fn trivial(space: FiberedSpace) -> Self {
        GeometricData {
            pi_v: VerticalBivector::zero(space.clone()),
            connection: Connection::flat(space.clone()),
            omega_h: HorizontalForm::zero(space, 2),
        }
    }

    pub fn space(&self) -> &FiberedSpace {
        self.connection.space()
    }

    /// Base components `-A^T alpha` and fiber components `alpha`.
    pub fn embed_covector(&self, e: &[Dual], alpha: &[Dual]) -> Vec<Dual> {
        let (m, n) = (self.space().base_dim(), self.space().fiber_dim());
        let (b, x) = self.space().split(e);
        let a = self.connection.coefficients(b, x);
        let mut out: Vec<Dual> = (0..m).map(|i| -(0..n).map(|r| a[r * m + i] * alpha[r]).sum::<Dual>()).collect();
        out.extend_from_slice(alpha);
        out
    }

    /// Rows of the frame of `L` at `e`: `h^*(d/db_i)` followed by the
    /// embedded `dx_a`, each as `(X, alpha)` of length `2 dim E`.
    pub fn frame_rows(&self, e: &[Dual]) -> Vec<Vec<Dual>> {
        let (m, n) = (self.space().base_dim(), self.space().fiber_dim());
        let dim = m + n;
        let omega = self.omega_h.eval_dual(e);
        let mut rows = Vec::with_capacity(dim);
        for i in 0..m {
            let mut row = self.connection.lift_at(e, &unit(m, i));
            row.extend((0..m).map(|j| alternating(&omega, m, &[i, j])));
            row.extend(std::iter::repeat_n(Dual::ZERO, n));
            rows.push(row);
        }
        for a in 0..n {
            let alpha = unit(n, a);
            let mut row = vec![Dual::ZERO; m];
            row.extend(self.pi_v.sharp(e, &alpha));
            row.extend(self.embed_covector(e, &alpha));
            rows.push(row);
        }
        rows
    }

    /// Section `h^*(v) = (h(v), i_{h(v)} omega_H)`.
    pub fn cohorizontal_lift(&self, v: &Field) -> Result<SectionPair> {
        let hv = horizontal_lift(&self.connection, v)?;
        let m = self.space().base_dim();
        let n = self.space().fiber_dim();
        let fv = v.evaluator().clone();
        let w = self.omega_h.clone();
        let form = Field::covector(self.space().total().clone(), move |e| {
            let vb = fv(&e[..m]);
            let omega = w.eval_dual(e);
            let mut out: Vec<Dual> =
                (0..m).map(|j| (0..m).map(|i| vb[i] * alternating(&omega, m, &[i, j])).sum()).collect();
            out.extend(std::iter::repeat_n(Dual::ZERO, n));
            out
        });
        SectionPair::new(hv, form)
    }

    /// Section `(pi^# alpha, alpha)` of `L` for a vertical covector field.
    pub fn vertical_section(&self, alpha: &Field) -> Result<SectionPair> {
        expect_vertical_covector(self.space(), alpha)?;
        let m = self.space().base_dim();
        let fa = alpha.evaluator().clone();
        let pi = self.pi_v.clone();
        let fa2 = fa.clone();
        let vector = Field::vector(self.space().total().clone(), move |e| {
            let mut out = vec![Dual::ZERO; m];
            out.extend(pi.sharp(e, &fa(e)));
            out
        });
        let me = self.clone();
        let form = Field::covector(self.space().total().clone(), move |e| me.embed_covector(e, &fa2(e)));
        SectionPair::new(vector, form)
    }

    /// The 2-form `omega_H (+) pi_V^{-1}` on `E`, defined when `pi_V` is
    /// invertible: `w(X, Y) = omega_H(p_* X, p_* Y) + s(vX, vY)` with
    /// `s = P^{-1}` and `v` the vertical projection.
    pub fn coupling_form_matrix(&self, e: &[f64]) -> Result<DMatrix<f64>> {
        let (m, n) = (self.space().base_dim(), self.space().fiber_dim());
        let p = self.pi_v.matrix(e);
        let s = p.clone().try_inverse().filter(|inv| inv.iter().all(|v| v.is_finite()));
        let s = match s {
            Some(s) if p.clone().svd(false, false).singular_values.min() > 1e-10 => s,
            _ => return Err(Error::NotInvertible { point: e.to_vec() }),
        };
        let ed = constants(e);
        let (b, x) = self.space().split(&ed);
        let a = reals(&self.connection.coefficients(b, x));
        let omega = self.omega_h.eval_dual(&ed);
        let mut proj = DMatrix::<f64>::zeros(m + n, m + n);
        for i in 0..m {
            proj[(i, i)] = 1.0;
        }
        for r in 0..n {
            proj[(m + r, m + r)] = 1.0;
            for i in 0..m {
                proj[(m + r, i)] = -a[r * m + i];
            }
        }
        let mut inner = DMatrix::<f64>::zeros(m + n, m + n);
        for i in 0..m {
            for j in 0..m {
                inner[(i, j)] = alternating(&omega, m, &[i, j]).re();
            }
        }
        inner.view_mut((m, m), (n, n)).copy_from(&s);
        Ok(proj.transpose() * inner * proj)
    }
}

/// A vertical covector field: an `R^n`-valued function on `E`.
pub fn vertical_covector<F>(space: &FiberedSpace, f: F) -> Field
where
    F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
{
    Field::new(space.total().clone(), Valence::ValuedForm { degree: 0, values: space.fiber_dim() }, f)
}

fn expect_vertical_covector(space: &FiberedSpace, alpha: &Field) -> Result<()> {
    space.total().ensure_same(alpha.domain())?;
    alpha.expect(Valence::ValuedForm { degree: 0, values: space.fiber_dim() })
}

/// A basis of `L_e` as the rows of a `dim E x 2 dim E` array `(X | alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracFrame {
    pub point: Vec<f64>,
    pub rows: DMatrix<f64>,
}

impl DiracFrame {
    pub fn new(point: Vec<f64>, rows: DMatrix<f64>) -> Result<Self> {
        if rows.ncols() != 2 * rows.nrows() {
            return Err(Error::Invalid(format!("frame of shape {}x{}", rows.nrows(), rows.ncols())));
        }
        Ok(DiracFrame { point, rows })
    }

    pub fn from_rows(point: Vec<f64>, rows: &[Vec<Dual>]) -> Self {
        let dim = rows.len();
        let m = DMatrix::from_fn(dim, 2 * dim, |r, c| rows[r][c].re());
        DiracFrame { point, rows: m }
    }

    /// `graph(w) = {(X, i_X w)}` for a 2-form matrix `w[i][j] = w(e_i, e_j)`.
    pub fn graph_form(point: Vec<f64>, w: &DMatrix<f64>) -> Self {
        let dim = w.nrows();
        let rows = DMatrix::from_fn(dim, 2 * dim, |r, c| {
            if c < dim {
                if r == c { 1.0 } else { 0.0 }
            } else {
                w[(r, c - dim)]
            }
        });
        DiracFrame { point, rows }
    }

    /// `graph(pi) = {(pi^# xi, xi)}` for `pi[i][j] = pi^{ij}`.
    pub fn graph_bivector(point: Vec<f64>, pi: &DMatrix<f64>) -> Self {
        let dim = pi.nrows();
        let rows = DMatrix::from_fn(dim, 2 * dim, |r, c| {
            if c < dim {
                pi[(r, c)]
            } else if r == c - dim {
                1.0
            } else {
                0.0
            }
        });
        DiracFrame { point, rows }
    }

    /// `Vert + Vert^0`.
    pub fn vertical_and_annihilator(point: Vec<f64>, space: &FiberedSpace) -> Self {
        let (m, dim) = (space.base_dim(), space.dim());
        let mut rows = DMatrix::zeros(dim, 2 * dim);
        for a in m..dim {
            rows[(a - m, a)] = 1.0;
        }
        for i in 0..m {
            rows[(dim - m + i, dim + i)] = 1.0;
        }
        DiracFrame { point, rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.nrows()
    }

    /// Max entry of the Gram matrix of `<.,.>_+`.
    pub fn isotropy_defect(&self) -> f64 {
        let d = self.dim();
        let x = self.rows.columns(0, d);
        let a = self.rows.columns(d, d);
        let gram = (a * x.transpose() + x * a.transpose()) * 0.5;
        gram.amax()
    }

    pub fn rank(&self) -> usize {
        rank(&self.rows.transpose(), 1e-10)
    }

    /// Orthonormal basis of `L_e` as columns of a `2 dim E` matrix.
    pub fn basis(&self) -> DMatrix<f64> {
        column_basis(&self.rows.transpose(), 1e-10)
    }

    /// Largest principal-angle sine between the two subspaces; zero when
    /// they coincide.
    pub fn distance(&self, other: &DiracFrame) -> f64 {
        let (a, b) = (self.basis(), other.basis());
        if a.ncols() != b.ncols() {
            return 1.0;
        }
        principal_sines(&a, &b).last().copied().unwrap_or(0.0)
    }

    /// Distance of a vector of `T_eE + T*_eE` from `L_e`.
    pub fn residual(&self, v: &[f64]) -> f64 {
        projection_residual(&self.rows.transpose(), v, 1e-10)
    }
}

/// The frame of the almost Dirac structure of the data at `e`.
pub fn assemble_dirac(data: &GeometricData, e: &[f64]) -> DiracFrame {
    DiracFrame::from_rows(e.to_vec(), &data.frame_rows(&constants(e)))
}

/// Per-point result of the fiber non-degeneracy test.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberReport {
    pub points: Vec<Vec<f64>>,
    /// Smallest principal-angle sine between `L` and `Vert + Vert^0`.
    pub min_sines: Vec<f64>,
    /// Dimension of `L ∩ (Vert + Vert^0)`.
    pub intersection_dims: Vec<usize>,
}

impl FiberReport {
    pub fn non_degenerate(&self) -> bool {
        self.intersection_dims.iter().all(|d| *d == 0)
    }

    pub fn first_degenerate(&self) -> Option<&[f64]> {
        self.intersection_dims.iter().position(|d| *d > 0).map(|i| self.points[i].as_slice())
    }
}

fn vertical_annihilator_basis(space: &FiberedSpace) -> DMatrix<f64> {
    DiracFrame::vertical_and_annihilator(Vec::new(), space).rows.transpose()
}

/// Checks `(Vert + Vert^0) ∩ L = {0}` at each point.
pub fn check_fiber_nondegenerate<F>(frames: F, space: &FiberedSpace, points: &[Vec<f64>]) -> Result<FiberReport>
where
    F: Fn(&[f64]) -> DiracFrame + Sync,
{
    let w = vertical_annihilator_basis(space);
    let per_point: Vec<Result<(f64, usize)>> = points
        .par_iter()
        .map(|p| {
            let frame = frames(p);
            let dim = frame.dim();
            if dim != space.dim() {
                return Err(Error::Invalid(format!("frame of dimension {dim} on a {}-dimensional space", space.dim())));
            }
            let r = frame.rank();
            if r < dim {
                return Err(Error::RankDeficient { rank: r, expected: dim });
            }
            let sines = principal_sines(&frame.basis(), &w);
            let inter = sines.iter().filter(|s| **s < ANGLE_THRESHOLD).count();
            Ok((sines.first().copied().unwrap_or(1.0), inter))
        })
        .collect();
    let mut report = FiberReport { points: points.to_vec(), min_sines: Vec::new(), intersection_dims: Vec::new() };
    for r in per_point {
        let (s, d) = r?;
        report.min_sines.push(s);
        report.intersection_dims.push(d);
    }
    Ok(report)
}

/// Geometric data recovered from a frame at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointData {
    /// `pi^{ab}` for `a < b`.
    pub pi: Vec<f64>,
    /// `A[a * base_dim + i]`.
    pub coefficients: Vec<f64>,
    /// `omega_H(d_i, d_j)` for `i < j`.
    pub omega: Vec<f64>,
}

fn smallest_singular(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().svd(false, false).singular_values.min()
}

/// Recovers `(pi_V, A, omega_H)` from a fiber non-degenerate frame.
pub fn extract_point(frame: &DiracFrame, space: &FiberedSpace) -> Result<PointData> {
    let (m, n) = (space.base_dim(), space.fiber_dim());
    let dim = m + n;
    let degenerate = || Error::Degenerate { point: frame.point.clone() };
    let rows = &frame.rows;

    // Hor: combinations whose covector kills Vert, normalized to X_B = I.
    let alpha_f = rows.view((0, dim + m), (dim, n)).into_owned();
    let k = null_space(&alpha_f.transpose(), 1e-10);
    if k.ncols() != m {
        return Err(degenerate());
    }
    let y = k.transpose() * rows;
    let xb = y.view((0, 0), (m, m)).into_owned();
    if smallest_singular(&xb) < ANGLE_THRESHOLD {
        return Err(degenerate());
    }
    let z = xb.try_inverse().ok_or_else(degenerate)? * y;
    let coefficients: Vec<f64> = (0..n).flat_map(|a| (0..m).map(move |i| (a, i))).map(|(a, i)| z[(i, m + a)]).collect();
    let omega: Vec<f64> = combinations(m, 2)
        .iter()
        .map(|ij| (0..dim).map(|c| z[(ij[0], dim + c)] * z[(ij[1], c)]).sum())
        .collect();

    // graph(pi_V): combinations with vertical X, normalized to alpha_F = I.
    let xb_all = rows.view((0, 0), (dim, m)).into_owned();
    let kv = null_space(&xb_all.transpose(), 1e-10);
    if kv.ncols() != n {
        return Err(degenerate());
    }
    let yv = kv.transpose() * rows;
    let af = yv.view((0, dim + m), (n, n)).into_owned();
    if smallest_singular(&af) < ANGLE_THRESHOLD {
        return Err(degenerate());
    }
    let zv = af.try_inverse().ok_or_else(degenerate)? * yv;
    let pi: Vec<f64> = combinations(n, 2).iter().map(|ab| zv[(ab[0], m + ab[1])]).collect();
    Ok(PointData { pi, coefficients, omega })
}

/// Geometric data sampled at points.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledGeometricData {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<PointData>,
}

impl SampledGeometricData {
    /// Largest deviation from the values of `data` at the same points.
    pub fn max_deviation(&self, data: &GeometricData) -> f64 {
        let space = data.space();
        let mut worst: f64 = 0.0;
        for (p, v) in self.points.iter().zip(&self.values) {
            let e = constants(p);
            let (b, x) = space.split(&e);
            let pairs = [
                (reals(&data.pi_v.eval_dual(&e)), &v.pi),
                (reals(&data.connection.coefficients(b, x)), &v.coefficients),
                (reals(&data.omega_h.eval_dual(&e)), &v.omega),
            ];
            for (a, b) in pairs {
                for (s, t) in a.iter().zip(b.iter()) {
                    worst = worst.max((s - t).abs());
                }
            }
        }
        worst
    }
}

/// Recovers the geometric data of a frame supplier at each point; aborts on
/// the first degenerate point.
pub fn extract_geometric_data<F>(frames: F, space: &FiberedSpace, points: &[Vec<f64>]) -> Result<SampledGeometricData>
where
    F: Fn(&[f64]) -> DiracFrame + Sync,
{
    let values: Vec<Result<PointData>> = points.par_iter().map(|p| extract_point(&frames(p), space)).collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SampledGeometricData { points: points.to_vec(), values })
}

/// Residuals of the four coupling conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    /// `[pi_V, pi_V]`, `L_{h(v)} pi_V`, `d_G omega_H`, curvature identity.
    pub residuals: [f64; 4],
    pub tolerance: f64,
}

impl CouplingReport {
    pub const NAMES: [&'static str; 4] =
        ["vertical-poisson", "parallel-poisson", "horizontal-closed", "curvature-identity"];

    pub fn is_coupling(&self) -> bool {
        self.residuals.iter().all(|r| *r < self.tolerance)
    }

    pub fn max(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, b| a.max(*b))
    }
}

fn par_max<F>(points: &[Vec<f64>], f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let values: Vec<f64> = points.par_iter().map(|p| f(p)).collect();
    values.into_iter().fold(0.0, f64::max)
}

fn field_max(field: &Field, points: &[Vec<f64>]) -> f64 {
    par_max(points, |p| field.eval(p).iter().fold(0.0, |a, b| a.max(b.abs())))
}

/// `Curv(d_i, d_j) - pi_V^# d_V(omega_H(h d_i, h d_j))`, fiber components.
pub fn curvature_identity_defect(data: &GeometricData, e: &[Dual], i: usize, j: usize) -> Vec<Dual> {
    let space = data.space();
    let (m, n) = (space.base_dim(), space.fiber_dim());
    let curv = curvature_coordinates(&data.connection, e, i, j);
    let c = crate::chart::field::rank(m, &[i.min(j), i.max(j)]);
    let sign = if i < j { 1.0 } else { -1.0 };
    let grad = gradient(|q| data.omega_h.eval_dual(q)[c] * sign, e);
    let dv: Vec<Dual> = grad[m..].to_vec();
    let ham = data.pi_v.sharp(e, &dv);
    (0..n).map(|a| curv[a] - ham[a]).collect()
}

/// Evaluates the four coupling conditions at the given points of `E`.
pub fn check_coupling_conditions(data: &GeometricData, points: &[Vec<f64>], tolerance: f64) -> Result<CouplingReport> {
    let space = data.space();
    let m = space.base_dim();
    let pi = data.pi_v.as_total_field();

    let r1 = if space.fiber_dim() >= 3 { field_max(&schouten_square(&pi)?, points) } else { 0.0 };

    let mut r2: f64 = 0.0;
    for i in 0..m {
        let l = lie_derivative_bivector(&coordinate_lift(&data.connection, i), &pi)?;
        r2 = r2.max(field_max(&l, points));
    }

    let r3 = if m >= 3 {
        let d = covariant_differential(&data.connection, &data.omega_h)?;
        par_max(points, |p| d.eval(p).iter().fold(0.0, |a, b| a.max(b.abs())))
    } else {
        0.0
    };

    let pairs = combinations(m, 2);
    let r4 = par_max(points, |p| {
        let e = constants(p);
        pairs
            .iter()
            .flat_map(|ij| curvature_identity_defect(data, &e, ij[0], ij[1]))
            .fold(0.0, |a, d| a.max(d.re().abs()))
    });
    Ok(CouplingReport { residuals: [r1, r2, r3, r4], tolerance })
}

/// Sections spanning `L` everywhere: `h^*(d/db_i)` and `(pi^# dx_a, dx_a)`.
pub fn coupling_generators(data: &GeometricData) -> Result<Vec<SectionPair>> {
    let space = data.space();
    let mut out = Vec::new();
    for i in 0..space.base_dim() {
        out.push(data.cohorizontal_lift(&Field::coordinate_vector(space.base().clone(), i))?);
    }
    for a in 0..space.fiber_dim() {
        let n = space.fiber_dim();
        out.push(data.vertical_section(&vertical_covector(space, move |_| unit(n, a)))?);
    }
    Ok(out)
}

/// Max distance of `[[s_i, s_j]]` from `L` over generator pairs and points.
pub fn dirac_closure_residual(data: &GeometricData, generators: &[SectionPair], points: &[Vec<f64>]) -> Result<f64> {
    let space = data.space();
    let dim = space.dim();
    let mut brackets = Vec::new();
    for i in 0..generators.len() {
        for j in i + 1..generators.len() {
            brackets.push(courant_bracket(&generators[i], &generators[j])?);
        }
    }
    let per_point: Vec<Result<f64>> = points
        .par_iter()
        .map(|p| {
            let values = DMatrix::from_fn(2 * dim, generators.len(), |r, c| generators[c].eval(p)[r]);
            if rank(&values, 1e-10) < dim {
                return Err(Error::Spanning { point: p.clone() });
            }
            Ok(brackets.iter().map(|b| projection_residual(&values, &b.eval(p), 1e-10)).fold(0.0, f64::max))
        })
        .collect();
    per_point.into_iter().try_fold(0.0f64, |a, r| r.map(|v| a.max(v)))
}

/// Residuals of the splitting-bracket identities.
#[derive(Clone, Debug, PartialEq)]
pub struct SplittingReport {
    /// `[alpha, beta]_L` against `[alpha, beta]_V`.
    pub vertical: f64,
    /// `[h^*(v), alpha]_L` against `L_{h(v)} alpha`.
    pub mixed: f64,
    /// `[h^*(v), h^*(w)]_L` against `h^*([v, w]) + d_V omega_H(h(v), h(w))`.
    pub horizontal: f64,
    /// `#(h^*(v) + alpha)` against `h(v) + pi^#(alpha)`.
    pub anchor: f64,
}

impl SplittingReport {
    pub fn max(&self) -> f64 {
        self.vertical.max(self.mixed).max(self.horizontal).max(self.anchor)
    }
}

/// `[alpha, beta]_V = L_{#alpha} beta - L_{#beta} alpha - d_V pi(alpha, beta)`
/// computed with fiber derivatives only.
pub fn vertical_bracket_values(data: &GeometricData, alpha: &Field, beta: &Field, e: &[Dual]) -> Vec<Dual> {
    let m = data.space().base_dim();
    let n = data.space().fiber_dim();
    let fiber_jac = |f: &Field| -> Vec<Vec<Dual>> {
        let ff = f.evaluator().clone();
        let b = e[..m].to_vec();
        jacobian(move |x| ff(&[b.as_slice(), x].concat()), &e[m..])
    };
    // (L_X g)_c = X^a d_a g_c + g_a d_c X^a for a vertical X
    let lie = |x: &Field, g: &Field| -> Vec<Dual> {
        let xv = x.eval_dual(e);
        let gv = g.eval_dual(e);
        let jg = fiber_jac(g);
        let jx = fiber_jac(x);
        (0..n)
            .map(|c| (0..n).map(|a| xv[a] * jg[c][a] + gv[a] * jx[a][c]).sum())
            .collect()
    };
    let sharp = |g: &Field| {
        let pi = data.pi_v.clone();
        let fg = g.evaluator().clone();
        Field::new(g.domain().clone(), g.valence(), move |q| pi.sharp(q, &fg(q)))
    };
    let (sa, sb) = (sharp(alpha), sharp(beta));
    let l1 = lie(&sa, beta);
    let l2 = lie(&sb, alpha);
    let pairing = {
        let (fa, fb, pi) = (alpha.evaluator().clone(), beta.evaluator().clone(), data.pi_v.clone());
        Field::scalar(alpha.domain().clone(), move |q| {
            let s = pi.sharp(q, &fa(q));
            s.into_iter().zip(fb(q)).map(|(x, y)| x * y).sum()
        })
    };
    let dp = gradient(|q| pairing.eval_dual(q)[0], e);
    (0..n).map(|c| l1[c] - l2[c] - dp[m + c]).collect()
}

/// `(L_{h(v)} alpha)_a = h(v)(alpha_a) + alpha_c d_a (A^c_i v^i)`.
pub fn mixed_bracket_values(data: &GeometricData, v: &Field, alpha: &Field, e: &[Dual]) -> Vec<Dual> {
    let m = data.space().base_dim();
    let n = data.space().fiber_dim();
    let vb = v.eval_dual(&e[..m]);
    let hv = data.connection.lift_at(e, &vb);
    let (_, dalpha) = directional(|q| alpha.eval_dual(q), e, &hv);
    let av = alpha.eval_dual(e);
    let conn = data.connection.clone();
    let b = e[..m].to_vec();
    let vb2 = vb.clone();
    let jac = jacobian(move |x| conn.apply(&b, x, &vb2), &e[m..]);
    (0..n).map(|a| dalpha[a] + (0..n).map(|c| av[c] * jac[c][a]).sum::<Dual>()).collect()
}

fn section_values(data: &GeometricData, e: &[Dual], vertical: &[Dual], base: Option<&[Dual]>) -> Vec<f64> {
    let (m, dim) = (data.space().base_dim(), data.space().dim());
    let mut out = vec![0.0; 2 * dim];
    if let Some(v) = base {
        let h = data.connection.lift_at(e, v);
        let omega = data.omega_h.eval_dual(e);
        for k in 0..dim {
            out[k] += h[k].re();
        }
        for j in 0..m {
            let s: Dual = (0..m).map(|i| v[i] * alternating(&omega, m, &[i, j])).sum();
            out[dim + j] += s.re();
        }
    }
    let sharp = data.pi_v.sharp(e, vertical);
    let emb = data.embed_covector(e, vertical);
    for (k, s) in sharp.iter().enumerate() {
        out[m + k] += s.re();
    }
    for (k, s) in emb.iter().enumerate() {
        out[dim + k] += s.re();
    }
    out
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |w, (x, y)| w.max((x - y).abs()))
}

/// Compares the Courant brackets of embedded sections with the splitting
/// formulas at the given points.
pub fn splitting_bracket_residual(
    data: &GeometricData,
    v: &Field,
    w: &Field,
    alpha: &Field,
    beta: &Field,
    points: &[Vec<f64>],
) -> Result<SplittingReport> {
    let space = data.space();
    expect_vertical_covector(space, alpha)?;
    expect_vertical_covector(space, beta)?;
    let m = space.base_dim();
    let (hv, hw) = (data.cohorizontal_lift(v)?, data.cohorizontal_lift(w)?);
    let (sa, sb) = (data.vertical_section(alpha)?, data.vertical_section(beta)?);
    let b_ab = courant_bracket(&sa, &sb)?;
    let b_va = courant_bracket(&hv, &sa)?;
    let b_vw = courant_bracket(&hv, &hw)?;
    let vw = lie_bracket(v, w)?;

    let per_point: Vec<[f64; 4]> = points
        .par_iter()
        .map(|p| {
            let e = constants(p);
            let vert = vertical_bracket_values(data, alpha, beta, &e);
            let r1 = max_diff(&b_ab.eval(p), &section_values(data, &e, &vert, None));

            let mixed = mixed_bracket_values(data, v, alpha, &e);
            let r2 = max_diff(&b_va.eval(p), &section_values(data, &e, &mixed, None));

            let vb = v.eval_dual(&e[..m]);
            let wb = w.eval_dual(&e[..m]);
            let omega_fn = |q: &[Dual]| -> Dual {
                let hvq = data.connection.lift_at(q, &vb);
                let hwq = data.connection.lift_at(q, &wb);
                data.omega_h.apply(q, &[&hvq[..m], &hwq[..m]])
            };
            let grad = gradient(omega_fn, &e);
            let dv = grad[m..].to_vec();
            let vwb = vw.eval_dual(&e[..m]);
            let r3 = max_diff(&b_vw.eval(p), &section_values(data, &e, &dv, Some(&vwb)));

            let av = alpha.eval_dual(&e);
            let sum: Vec<f64> = hv.vector.eval(p).iter().zip(sa.vector.eval(p)).map(|(x, y)| x + y).collect();
            let h = data.connection.lift_at(&e, &vb);
            let pv = data.pi_v.sharp(&e, &av);
            let mut expected = reals(&h);
            for (k, s) in pv.iter().enumerate() {
                expected[m + k] += s.re();
            }
            let r4 = max_diff(&sum, &expected);
            [r1, r2, r3, r4]
        })
        .collect();
    let mut out = SplittingReport { vertical: 0.0, mixed: 0.0, horizontal: 0.0, anchor: 0.0 };
    for r in per_point {
        out.vertical = out.vertical.max(r[0]);
        out.mixed = out.mixed.max(r[1]);
        out.horizontal = out.horizontal.max(r[2]);
        out.anchor = out.anchor.max(r[3]);
    }
    Ok(out)
}

/// Value of the leafwise presymplectic form on anchor images.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeafValue {
    /// `omega(X, Y) = alpha(Y)` for any `(X, alpha)` in `L`.
    pub value: f64,
    /// Change of the value under a different choice of `alpha`.
    pub choice_defect: f64,
}

/// `omega(X, Y) = i_Y alpha` where `(X, alpha) ∈ L_e`.
pub fn leaf_two_form(frame: &DiracFrame, x: &[f64], y: &[f64]) -> Result<LeafValue> {
    let dim = frame.dim();
    let xs = frame.rows.columns(0, dim).transpose();
    let alphas = frame.rows.columns(dim, dim).transpose();
    let svd = xs.clone().svd(true, true);
    let solve = |target: &[f64]| -> Result<DVector<f64>> {
        let t = DVector::from_column_slice(target);
        let c = svd.solve(&t, 1e-12).map_err(|e| Error::Invalid(e.to_string()))?;
        let residual = (&xs * &c - &t).norm();
        if residual > 1e-8 {
            return Err(Error::NotInImage { residual });
        }
        Ok(c)
    };
    let c = solve(x)?;
    solve(y)?;
    let yv = DVector::from_column_slice(y);
    let alpha = &alphas * &c;
    let value = alpha.dot(&yv);
    let kernel = null_space(&xs, 1e-10);
    let mut shifted = c.clone();
    for k in 0..kernel.ncols() {
        shifted += kernel.column(k) * (0.5 + k as f64);
    }
    let other = (&alphas * shifted).dot(&yv);
    Ok(LeafValue { value, choice_defect: (other - value).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::CoordinateDomain;

    fn space(m: usize, n: usize) -> FiberedSpace {
        FiberedSpace::new(CoordinateDomain::cube(m, 1.5), CoordinateDomain::cube(n, 1.5))
    }

    /// B = R^2, F = R^2, pi_V = dx1 ^ dx2 inverse, omega_H = f(x) db1 ^ db2,
    /// h(d_2) = d_2 + b_1 X_f.
    fn hamiltonian_shear() -> GeometricData {
        let s = space(2, 2);
        let f = |x: &[Dual]| x[0] * x[0] * 0.5 + x[1].sin();
        let pi = VerticalBivector::constant(s.clone(), vec![1.0]);
        let conn = Connection::new(s.clone(), move |b, x| {
            // X_f = pi^# df: (X_f)^2 = d_1 f, (X_f)^1 = -d_2 f
            let g = gradient(f, x);
            vec![Dual::ZERO, -(g[1] * b[0]), Dual::ZERO, g[0] * b[0]]
        });
        let omega = HorizontalForm::new(s, 2, move |e| vec![f(&e[2..])]);
        GeometricData::new(pi, conn, omega).unwrap()
    }

    fn shear_broken() -> GeometricData {
        let s = space(2, 1);
        let conn = Connection::new(s.clone(), |b, _| vec![Dual::ZERO, b[0]]);
        GeometricData::new(VerticalBivector::zero(s.clone()), conn, HorizontalForm::zero(s, 2)).unwrap()
    }

    #[test]
    fn trivial_frame() {
        let d = GeometricData::trivial(space(1, 1));
        let f = assemble_dirac(&d, &[0.2, 0.3]);
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.rows, expected);
    }

    #[test]
    fn assembled_frames_are_isotropic_and_nondegenerate() {
        let d = hamiltonian_shear();
        let pts = d.space().samples(16, 3);
        for p in &pts {
            let f = assemble_dirac(&d, p);
            assert!(f.isotropy_defect() < 1e-12);
            assert_eq!(f.rank(), 4);
        }
        let r = check_fiber_nondegenerate(|p| assemble_dirac(&d, p), d.space(), &pts).unwrap();
        assert!(r.non_degenerate());
    }

    #[test]
    fn degenerate_frames() {
        let s = space(2, 1);
        let p = vec![0.1, 0.2, 0.3];
        let mut w = DMatrix::zeros(3, 3);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = -1.0;
        let r = check_fiber_nondegenerate(|p| DiracFrame::graph_form(p.to_vec(), &w), &s, std::slice::from_ref(&p)).unwrap();
        assert_eq!(r.intersection_dims, vec![1]);
        let r = check_fiber_nondegenerate(|p| DiracFrame::vertical_and_annihilator(p.to_vec(), &s), &s, &[p]).unwrap();
        assert_eq!(r.intersection_dims, vec![3]);
    }

    #[test]
    fn round_trip_extraction() {
        let d = hamiltonian_shear();
        let pts = d.space().samples(16, 5);
        let x = extract_geometric_data(|p| assemble_dirac(&d, p), d.space(), &pts).unwrap();
        assert!(x.max_deviation(&d) < 1e-10);
    }

    #[test]
    fn coupling_form_is_the_graph() {
        let d = hamiltonian_shear();
        for p in d.space().samples(8, 9) {
            let w = d.coupling_form_matrix(&p).unwrap();
            let g = DiracFrame::graph_form(p.clone(), &w);
            assert!(assemble_dirac(&d, &p).distance(&g) < 1e-10);
        }
    }

    #[test]
    fn extraction_of_split_symplectic_graph() {
        let s = space(2, 2);
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 2.0;
        w[(1, 0)] = -2.0;
        w[(2, 3)] = 0.5;
        w[(3, 2)] = -0.5;
        let got = extract_point(&DiracFrame::graph_form(vec![0.0; 4], &w), &s).unwrap();
        assert!((got.omega[0] - 2.0).abs() < 1e-12);
        assert!(got.coefficients.iter().all(|a| a.abs() < 1e-12));
        // pi = (w_F)^{-1}: w_F = [[0, .5], [-.5, 0]] has inverse [[0, -2], [2, 0]]
        assert!((got.pi[0] + 2.0).abs() < 1e-12, "{:?}", got.pi);
    }

    #[test]
    fn hamiltonian_shear_is_coupling() {
        let d = hamiltonian_shear();
        let pts = d.space().samples(32, 1);
        let r = check_coupling_conditions(&d, &pts, EXACT_TOLERANCE).unwrap();
        assert!(r.is_coupling(), "{r:?}");
        let gens = coupling_generators(&d).unwrap();
        assert!(dirac_closure_residual(&d, &gens, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn non_hamiltonian_curvature_is_detected() {
        let d = shear_broken();
        let pts = d.space().samples(16, 1);
        let r = check_coupling_conditions(&d, &pts, EXACT_TOLERANCE).unwrap();
        assert!(!r.is_coupling() && r.residuals[3] > 0.5);
        let gens = coupling_generators(&d).unwrap();
        assert!(dirac_closure_residual(&d, &gens, &pts).unwrap() > 0.5);
    }

    #[test]
    fn zero_data_closes() {
        let d = GeometricData::trivial(space(2, 2));
        let pts = d.space().samples(8, 1);
        let gens = coupling_generators(&d).unwrap();
        assert_eq!(dirac_closure_residual(&d, &gens, &pts).unwrap(), 0.0);
    }

    #[test]
    fn splitting_brackets_on_shear() {
        let d = hamiltonian_shear();
        let base = d.space().base().clone();
        let v = Field::vector(base.clone(), |b| vec![b[1], Dual::ONE]);
        let w = Field::vector(base, |b| vec![b[0] * b[0], b[0]]);
        let alpha = vertical_covector(d.space(), |e| vec![e[2] * e[3], e[0] + e[3]]);
        let beta = vertical_covector(d.space(), |e| vec![e[1], e[2].cos()]);
        let r = splitting_bracket_residual(&d, &v, &w, &alpha, &beta, &d.space().samples(8, 2)).unwrap();
        assert!(r.max() < 1e-10, "{r:?}");
    }

    #[test]
    fn leaf_form_of_a_graph() {
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 3.0;
        w[(1, 0)] = -3.0;
        let f = DiracFrame::graph_form(vec![0.0, 0.0], &w);
        let v = leaf_two_form(&f, &[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((v.value - 6.0).abs() < 1e-12 && v.choice_defect < 1e-12);
    }

    #[test]
    fn leaf_form_rejects_non_image() {
        let s = space(1, 1);
        let d = GeometricData::trivial(s);
        let f = assemble_dirac(&d, &[0.0, 0.0]);
        assert!(matches!(leaf_two_form(&f, &[0.0, 1.0], &[1.0, 0.0]), Err(Error::NotInImage { .. })));
    }
}
