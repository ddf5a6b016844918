//! Pair groupoids `M x M` with multiplicative 2-forms, and the integrated
//! geometric data of a coupling form with invertible vertical part.
//!
//! Arrows are written `(y, x)` with target `y` first: `s(y, x) = x`,
//! `t(y, x) = y`. Tangent vectors to `M x M` are `(target part, source part)`.

use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chart::field::{alternating, combinations, Field, Valence};
use crate::chart::ops::exterior_derivative;
use crate::chart::CoordinateDomain;
use crate::coupling::GeometricData;
use crate::dual::{constants, Dual};
use crate::error::{Error, Result};
use crate::linalg::null_space;

/// Closedness tolerance for `pair_form`.
pub const CLOSED_TOLERANCE: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PairGroupoid {
    base: CoordinateDomain,
    arrows: CoordinateDomain,
}

impl PairGroupoid {
    pub fn new(base: CoordinateDomain) -> Self {
        let arrows = base.product(&base);
        PairGroupoid { base, arrows }
    }

    pub fn base(&self) -> &CoordinateDomain {
        &self.base
    }

    pub fn arrows(&self) -> &CoordinateDomain {
        &self.arrows
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn arrow(&self, target: &[f64], source: &[f64]) -> Vec<f64> {
        let mut g = target.to_vec();
        g.extend_from_slice(source);
        g
    }

    pub fn source<'a>(&self, g: &'a [f64]) -> &'a [f64] {
        &g[self.dim()..]
    }

    pub fn target<'a>(&self, g: &'a [f64]) -> &'a [f64] {
        &g[..self.dim()]
    }

    pub fn unit(&self, x: &[f64]) -> Vec<f64> {
        self.arrow(x, x)
    }

    pub fn inverse(&self, g: &[f64]) -> Vec<f64> {
        self.arrow(self.source(g), self.target(g))
    }

    /// `(z, y) . (y, x) = (z, x)`.
    pub fn compose(&self, h: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let gap = self
            .source(h)
            .iter()
            .zip(self.target(g))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > 0.0 {
            return Err(Error::NonComposable { gap });
        }
        Ok(self.arrow(self.target(h), self.source(g)))
    }

    /// Max violation of the groupoid axioms over sampled composable triples.
    pub fn axiom_defect(&self, count: usize, seed: u64) -> f64 {
        let pts = self.base.samples(4 * count, seed);
        let mut worst: f64 = 0.0;
        for q in pts.chunks_exact(4) {
            let (w, z, y, x) = (&q[0], &q[1], &q[2], &q[3]);
            let (k, h, g) = (self.arrow(w, z), self.arrow(z, y), self.arrow(y, x));
            let left = self.compose(&self.compose(&k, &h).unwrap(), &g).unwrap();
            let right = self.compose(&k, &self.compose(&h, &g).unwrap()).unwrap();
            let inv = self.compose(&g, &self.inverse(&g)).unwrap();
            let unit_l = self.compose(&self.unit(y), &g).unwrap();
            let unit_r = self.compose(&g, &self.unit(x)).unwrap();
            for (a, b) in [(&left, &right), (&inv, &self.unit(y)), (&unit_l, &g), (&unit_r, &g)] {
                worst = worst.max(a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max));
            }
        }
        worst
    }
}

/// Matrix of a 2-form field at a point.
pub fn form_matrix(w: &Field, p: &[f64]) -> DMatrix<f64> {
    let n = w.dim();
    let comps = w.eval_dual(&constants(p));
    DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { alternating(&comps, n, &[i, j]).re() })
}

fn form_from_matrix(n: usize, m: &[Vec<Dual>]) -> Vec<Dual> {
    combinations(n, 2).iter().map(|c| m[c[0]][c[1]]).collect()
}

/// Max of `|d w|` at sample points.
pub fn closedness_residual(w: &Field, count: usize, seed: u64) -> Result<f64> {
    if let Valence::Form(k) = w.valence() {
        if k >= w.dim() {
            return Ok(0.0);
        }
    }
    let dw = exterior_derivative(w)?;
    Ok(dw.max_abs(&w.domain().samples(count, seed)))
}

/// `Omega = t^* w - s^* w` on the pair groupoid of the domain of `w`.
pub fn pair_form(w: &Field) -> Result<(PairGroupoid, Field)> {
    w.expect(Valence::Form(2))?;
    let residual = closedness_residual(w, 64, 0x9a1)?;
    if residual > CLOSED_TOLERANCE {
        return Err(Error::NotClosed { residual });
    }
    Ok(pair_combination(w, -1.0))
}

/// `t^* w + sign s^* w`, without the closedness check.
pub fn pair_combination(w: &Field, sign: f64) -> (PairGroupoid, Field) {
    let groupoid = PairGroupoid::new(w.domain().clone());
    let n = w.dim();
    let eval = w.evaluator().clone();
    let omega = Field::form(groupoid.arrows().clone(), 2, move |g| {
        let (y, x) = g.split_at(n);
        let (wy, wx) = (eval(y), eval(x));
        let mut m = vec![vec![Dual::ZERO; 2 * n]; 2 * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    m[i][j] = alternating(&wy, n, &[i, j]);
                    m[n + i][n + j] = alternating(&wx, n, &[i, j]) * sign;
                }
            }
        }
        form_from_matrix(2 * n, &m)
    });
    (groupoid, omega)
}

fn selector(n: usize, blocks: [usize; 2]) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(2 * n, 3 * n);
    for (k, b) in blocks.iter().enumerate() {
        for i in 0..n {
            d[(k * n + i, b * n + i)] = 1.0;
        }
    }
    d
}

/// `max |m^* Omega - pr_1^* Omega - pr_2^* Omega|` over sampled composable
/// pairs `((z, y), (y, x))` and all pairs of coordinate tangent vectors of
/// the composable manifold `{(z, y, x)}`.
pub fn multiplicativity_residual(groupoid: &PairGroupoid, omega: &Field, count: usize, seed: u64) -> f64 {
    let n = groupoid.dim();
    // blocks of (z, y, x) seen by m, pr_1 and pr_2
    let (dm, d1, d2) = (selector(n, [0, 2]), selector(n, [0, 1]), selector(n, [1, 2]));
    let pts = groupoid.base().samples(3 * count, seed);
    pts.par_chunks_exact(3)
        .map(|q| {
            let (z, y, x) = (&q[0], &q[1], &q[2]);
            let om = form_matrix(omega, &groupoid.arrow(z, x));
            let o1 = form_matrix(omega, &groupoid.arrow(z, y));
            let o2 = form_matrix(omega, &groupoid.arrow(y, x));
            let r = dm.transpose() * om * &dm - d1.transpose() * o1 * &d1 - d2.transpose() * o2 * &d2;
            r.amax()
        })
        .reduce(|| 0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckVerdict {
    Pass,
    Fail,
}

impl CheckVerdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        }
    }
}

impl fmt::Display for CheckVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckVerdict::Pass => "PASS",
            CheckVerdict::Fail => "FAIL",
        })
    }
}

/// Kernel dimensions of `Omega` at sampled units.
#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    /// Max of `dim(ker Omega ∩ ker ds ∩ ker dt)`; zero on any pair groupoid.
    pub triple_kernel_dim: usize,
    /// Max of `dim(ker Omega ∩ ker ds)`, which equals `dim ker w`.
    pub source_kernel_dim: usize,
    pub presymplectic: bool,
    /// `Pass` when `Omega` is non-degenerate along the source fibers at units.
    pub verdict: CheckVerdict,
}

pub fn presymplectic_nondegeneracy(groupoid: &PairGroupoid, omega: &Field, count: usize, seed: u64) -> NondegeneracyReport {
    let n = groupoid.dim();
    let ds = DMatrix::from_fn(n, 2 * n, |i, j| if j == n + i { 1.0 } else { 0.0 });
    let dt = DMatrix::from_fn(n, 2 * n, |i, j| if j == i { 1.0 } else { 0.0 });
    let (mut triple, mut source) = (0, 0);
    for x in groupoid.base().samples(count, seed) {
        let om = form_matrix(omega, &groupoid.unit(&x));
        let mut with_s = DMatrix::zeros(3 * n, 2 * n);
        with_s.view_mut((0, 0), (2 * n, 2 * n)).copy_from(&om);
        with_s.view_mut((2 * n, 0), (n, 2 * n)).copy_from(&ds);
        let mut all = DMatrix::zeros(4 * n, 2 * n);
        all.view_mut((0, 0), (3 * n, 2 * n)).copy_from(&with_s);
        all.view_mut((3 * n, 0), (n, 2 * n)).copy_from(&dt);
        source = source.max(null_space(&with_s, RANK_TOLERANCE).ncols());
        triple = triple.max(null_space(&all, RANK_TOLERANCE).ncols());
    }
    NondegeneracyReport {
        triple_kernel_dim: triple,
        source_kernel_dim: source,
        presymplectic: triple == 0,
        verdict: CheckVerdict::from_bool(source == 0),
    }
}

/// `max |Omega((0, pi^# eta), (pi^# xi, 0))|` at sampled arrows, for the
/// coordinate covectors `xi`, `eta` and a bivector `pi` on the base.
pub fn orthogonality_residual(groupoid: &PairGroupoid, omega: &Field, pi: &Field, count: usize, seed: u64) -> Result<f64> {
    pi.expect(Valence::BIVECTOR)?;
    let n = groupoid.dim();
    let sharp = |p: &[f64]| form_matrix(pi, p);
    let mut worst: f64 = 0.0;
    for g in groupoid.arrows().samples(count, seed) {
        let om = form_matrix(omega, &g);
        let (py, px) = (sharp(groupoid.target(&g)), sharp(groupoid.source(&g)));
        for a in 0..n {
            for b in 0..n {
                let mut left = nalgebra::DVector::zeros(2 * n);
                let mut right = nalgebra::DVector::zeros(2 * n);
                for i in 0..n {
                    left[n + i] = px[(b, i)];
                    right[i] = py[(a, i)];
                }
                worst = worst.max((left.transpose() * &om * right)[(0, 0)].abs());
            }
        }
    }
    Ok(worst)
}

fn dual_inverse(mut m: Vec<Vec<Dual>>) -> Option<Vec<Vec<Dual>>> {
    let n = m.len();
    let mut inv: Vec<Vec<Dual>> = (0..n).map(|i| (0..n).map(|j| if i == j { Dual::ONE } else { Dual::ZERO }).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|a, b| m[*a][col].re().abs().total_cmp(&m[*b][col].re().abs()))?;
        if m[pivot][col].re().abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                for j in 0..n {
                    m[r][j] = m[r][j] - f * m[col][j];
                    inv[r][j] = inv[r][j] - f * inv[col][j];
                }
            }
        }
    }
    Some(inv)
}

/// The coupling form `omega_H (+) pi_V^{-1}` as a field on `E`. Fails with
/// `NotInvertible` when `pi_V` is singular at a sampled point.
pub fn coupling_form(data: &GeometricData) -> Result<Field> {
    for p in data.space().samples(32, 0x3c) {
        data.coupling_form_matrix(&p)?;
    }
    let (m, n) = (data.space().base_dim(), data.space().fiber_dim());
    let dim = m + n;
    let d = data.clone();
    Ok(Field::form(data.space().total().clone(), 2, move |e| {
        let p: Vec<Vec<Dual>> = (0..n)
            .map(|a| (0..n).map(|b| d.pi_v.entry(&d.pi_v.eval_dual(e), a, b)).collect())
            .collect();
        let s = dual_inverse(p).unwrap_or_else(|| vec![vec![Dual::constant(f64::NAN); n]; n]);
        let (b, x) = d.space().split(e);
        let a = d.connection.coefficients(b, x);
        let omega = d.omega_h.eval_dual(e);
        // vertical projection rows: v_r(X) = X_{m+r} - sum_i a[r m + i] X_i
        let vert = |r: usize, k: usize| -> Dual {
            if k < m {
                -a[r * m + k]
            } else if k - m == r {
                Dual::ONE
            } else {
                Dual::ZERO
            }
        };
        let mut w = vec![vec![Dual::ZERO; dim]; dim];
        for k in 0..dim {
            for l in 0..dim {
                let mut v = if k < m && l < m && k != l { alternating(&omega, m, &[k, l]) } else { Dual::ZERO };
                for r in 0..n {
                    for q in 0..n {
                        v += vert(r, k) * s[r][q] * vert(q, l);
                    }
                }
                w[k][l] = v;
            }
        }
        form_from_matrix(dim, &w)
    }))
}

/// Residuals of the integrated geometric data on the pair groupoid of `E`.
#[derive(Clone, Debug)]
pub struct IntegratedReport {
    /// Min singular value of `Omega` restricted to `ker d(p x p)`.
    pub vertical_min_singular: f64,
    /// Max dimension of `(Ver ⊕ Ver^0) ∩ graph(Omega)` over sampled arrows.
    pub fiber_intersection_dim: usize,
    /// `Omega(H(v1, w1), H(v2, w2)) - (w_H(hv1, hv2) o t - w_H(hw1, hw2) o s)`.
    pub omega_h_residual: f64,
    /// `|d(p x p) H(v, w) - (v, w)|`.
    pub hor_projection_residual: f64,
    /// `|Omega(H(v, w), Ver)|`.
    pub hor_orthogonality_residual: f64,
    pub closedness_residual: f64,
}

impl IntegratedReport {
    pub fn fiber_nondegenerate(&self) -> bool {
        self.fiber_intersection_dim == 0
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.fiber_nondegenerate()
            && self.omega_h_residual < tolerance
            && self.hor_projection_residual < tolerance
            && self.hor_orthogonality_residual < tolerance
    }
}

/// Arrow-space horizontal lift `H(v, w) = (h v, h w)` of a pair of base
/// coordinate directions, as a vector on `E x E`.
fn hor(data: &GeometricData, g: &[f64], v: usize, w: usize) -> Vec<f64> {
    let (m, n) = (data.space().base_dim(), data.space().fiber_dim());
    let dim = m + n;
    let lift = |e: &[f64], i: usize| -> Vec<f64> {
        let mut u = vec![Dual::ZERO; m];
        u[i] = Dual::ONE;
        data.connection.lift_at(&constants(e), &u).iter().map(Dual::re).collect()
    };
    let mut out = lift(&g[..dim], v);
    out.extend(lift(&g[dim..], w));
    out
}

/// Checks the pair-groupoid integration of a coupling form with invertible
/// vertical part at `count` sampled arrows.
pub fn integrated_data_check(data: &GeometricData, count: usize, seed: u64) -> Result<IntegratedReport> {
    let w = coupling_form(data)?;
    let closed = closedness_residual(&w, 32, seed)?;
    let (groupoid, omega) = pair_form(&w)?;
    let (m, n) = (data.space().base_dim(), data.space().fiber_dim());
    let dim = m + n;
    let mut arrows = groupoid.arrows().samples(count, seed);
    // a unit arrow, where both sides of the horizontal identity telescope
    let x0 = groupoid.target(&arrows[0]).to_vec();
    arrows.push(groupoid.unit(&x0));
    let per_arrow: Vec<(f64, usize, f64, f64, f64)> = arrows
        .par_iter()
        .map(|g| {
            let om = form_matrix(&omega, g);
            // vertical directions of p x p: fiber coordinates of both factors
            let vert_idx: Vec<usize> = (m..dim).chain(dim + m..2 * dim).collect();
            let vv = DMatrix::from_fn(2 * n, 2 * n, |i, j| om[(vert_idx[i], vert_idx[j])]);
            let sv = vv.clone().svd(false, false).singular_values.min();
            let kernel = null_space(&vv, RANK_TOLERANCE).ncols();
            let wy = data.omega_h.eval_dual(&constants(groupoid.target(g)));
            let wx = data.omega_h.eval_dual(&constants(groupoid.source(g)));
            let (mut res_b, mut res_p, mut res_o): (f64, f64, f64) = (0.0, 0.0, 0.0);
            let pairs: Vec<(usize, usize)> = (0..m).flat_map(|v| (0..m).map(move |w| (v, w))).collect();
            for &(v1, w1) in &pairs {
                let h1 = hor(data, g, v1, w1);
                let hv1 = nalgebra::DVector::from_column_slice(&h1);
                // projection to the base pair
                for i in 0..m {
                    res_p = res_p.max((h1[i] - if i == v1 { 1.0 } else { 0.0 }).abs());
                    res_p = res_p.max((h1[dim + i] - if i == w1 { 1.0 } else { 0.0 }).abs());
                }
                let row = hv1.transpose() * &om;
                for k in &vert_idx {
                    res_o = res_o.max(row[(0, *k)].abs());
                }
                for &(v2, w2) in &pairs {
                    let h2 = nalgebra::DVector::from_column_slice(&hor(data, g, v2, w2));
                    let lhs = (&row * h2)[(0, 0)];
                    let t_part = if v1 == v2 { 0.0 } else { alternating(&wy, m, &[v1, v2]).re() };
                    let s_part = if w1 == w2 { 0.0 } else { alternating(&wx, m, &[w1, w2]).re() };
                    res_b = res_b.max((lhs - (t_part - s_part)).abs());
                }
            }
            (sv, kernel, res_b, res_p, res_o)
        })
        .collect();
    let fold = |f: fn(&(f64, usize, f64, f64, f64)) -> f64| per_arrow.iter().map(f).fold(0.0, f64::max);
    Ok(IntegratedReport {
        vertical_min_singular: per_arrow.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        fiber_intersection_dim: per_arrow.iter().map(|r| r.1).max().unwrap_or(0),
        omega_h_residual: fold(|r| r.2),
        hor_projection_residual: fold(|r| r.3),
        hor_orthogonality_residual: fold(|r| r.4),
        closedness_residual: closed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{check_coupling_conditions, VerticalBivector};
    use crate::fibration::{Connection, FiberedSpace, HorizontalForm};

    fn plane(n: usize) -> CoordinateDomain {
        CoordinateDomain::cube(n, 1.5)
    }

    fn area(n: usize) -> Field {
        Field::form(plane(n), 2, move |_| {
            let mut c = vec![Dual::ZERO; n * (n - 1) / 2];
            c[0] = Dual::ONE;
            if n == 4 {
                c[5] = Dual::ONE;
            }
            c
        })
    }

    #[test]
    fn pair_groupoid_axioms() {
        let g = PairGroupoid::new(plane(3));
        assert_eq!(g.axiom_defect(20, 1), 0.0);
        assert!(g.compose(&[0.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn pair_form_blocks() {
        let (g, om) = pair_form(&Field::form(plane(2), 2, |_| vec![Dual::ONE])).unwrap();
        let m = form_matrix(&om, &[0.1, 0.2, -0.3, 0.4]);
        assert_eq!(m[(0, 1)], 1.0);
        assert_eq!(m[(2, 3)], -1.0);
        assert_eq!(m[(0, 2)], 0.0);
        let du = DMatrix::from_fn(4, 2, |i, j| if i % 2 == j { 1.0 } else { 0.0 });
        let at_unit = form_matrix(&om, &g.unit(&[0.3, 0.7]));
        assert_eq!((du.transpose() * at_unit * &du).amax(), 0.0);
        let (_, zero) = pair_form(&Field::zero(plane(2), Valence::Form(2))).unwrap();
        assert_eq!(form_matrix(&zero, &[0.1, 0.2, 0.3, 0.4]).amax(), 0.0);
        let open = Field::form(plane(3), 2, |x| vec![x[2], Dual::ZERO, Dual::ZERO]);
        assert!(matches!(pair_form(&open), Err(Error::NotClosed { .. })));
    }

    #[test]
    fn multiplicativity() {
        // d(a sin(0.7 c) db)
        let w = Field::form(plane(3), 2, |x| {
            let (a, c) = (x[0], x[2]);
            vec![(c * 0.7).sin(), Dual::ZERO, -(a * (c * 0.7).cos() * 0.7)]
        });
        let (g, om) = pair_form(&w).unwrap();
        assert!(multiplicativity_residual(&g, &om, 16, 2) < 1e-12);
        let (g2, plus) = pair_combination(&w, 1.0);
        assert!(multiplicativity_residual(&g2, &plus, 4, 2) > 1e-3);
        let (g3, zero) = pair_form(&Field::zero(plane(2), Valence::Form(2))).unwrap();
        assert_eq!(multiplicativity_residual(&g3, &zero, 4, 2), 0.0);
    }

    #[test]
    fn nondegeneracy_at_units() {
        let (g, om) = pair_form(&area(2)).unwrap();
        let r = presymplectic_nondegeneracy(&g, &om, 8, 3);
        assert_eq!((r.source_kernel_dim, r.verdict), (0, CheckVerdict::Pass));
        let (g, om) = pair_form(&Field::zero(plane(3), Valence::Form(2))).unwrap();
        let r = presymplectic_nondegeneracy(&g, &om, 8, 3);
        assert_eq!((r.source_kernel_dim, r.verdict), (3, CheckVerdict::Fail));
        assert!(r.presymplectic);
        let rank2 = Field::form(plane(4), 2, |_| {
            let mut c = vec![Dual::ZERO; 6];
            c[0] = Dual::ONE;
            c
        });
        let (g, om) = pair_form(&rank2).unwrap();
        let r = presymplectic_nondegeneracy(&g, &om, 8, 3);
        assert_eq!((r.source_kernel_dim, r.triple_kernel_dim, r.verdict), (2, 0, CheckVerdict::Fail));
        let (g, om) = pair_form(&area(4)).unwrap();
        assert_eq!(presymplectic_nondegeneracy(&g, &om, 8, 3).verdict, CheckVerdict::Pass);
    }

    #[test]
    fn invariant_lifts_are_orthogonal() {
        let w = Field::form(plane(2), 2, |x| vec![x[0] * x[0] + 1.0]);
        let pi = Field::bivector(plane(2), |x| vec![-(x[0] * x[0] + 1.0).recip()]);
        let (g, om) = pair_form(&w).unwrap();
        assert!(orthogonality_residual(&g, &om, &pi, 16, 5).unwrap() < 1e-10);
    }

    pub(crate) fn split_product() -> GeometricData {
        let space = FiberedSpace::new(plane(2), plane(2));
        GeometricData::new(
            VerticalBivector::new(space.clone(), |e| vec![-(e[2] * e[2] + e[3] * e[3] + 1.0)]),
            Connection::flat(space.clone()),
            HorizontalForm::new(space, 2, |e| vec![e[0] * e[1] + 2.0]),
        )
        .unwrap()
    }

    /// `w = g(x1) db1^db2 + dx1^dx2 + g'(x1) b1 dx1^db2`, the differential of
    /// `g(x1) b1 db2` plus a symplectic fiber form.
    pub(crate) fn twisted(g: fn(Dual) -> Dual, dg: fn(Dual) -> Dual) -> GeometricData {
        let space = FiberedSpace::new(plane(2), plane(2));
        GeometricData::new(
            VerticalBivector::constant(space.clone(), vec![-1.0]),
            Connection::new(space.clone(), move |b, x| vec![Dual::ZERO, Dual::ZERO, Dual::ZERO, -(dg(x[0]) * b[0])]),
            HorizontalForm::new(space, 2, move |e| vec![g(e[2])]),
        )
        .unwrap()
    }

    fn cubic(x: Dual) -> Dual {
        x * x * x * 0.3 - x + 2.0
    }

    fn cubic_slope(x: Dual) -> Dual {
        x * x * 0.9 - 1.0
    }

    #[test]
    fn split_product_integrates() {
        let data = split_product();
        let r = integrated_data_check(&data, 12, 7).unwrap();
        assert!(r.passes(1e-10), "{r:?}");
        assert!(r.closedness_residual < 1e-12);
    }

    #[test]
    fn twisted_form_integrates() {
        let data = twisted(cubic, cubic_slope);
        let pts = data.space().samples(16, 3);
        assert!(check_coupling_conditions(&data, &pts, 1e-8).unwrap().is_coupling());
        let w = coupling_form(&data).unwrap();
        let p = [0.3, -0.4, 0.8, 0.1];
        let m = form_matrix(&w, &p);
        let g = cubic(Dual::constant(0.8)).re();
        let dg = 0.9 * 0.64 - 1.0;
        assert!((m[(0, 1)] - g).abs() < 1e-12);
        assert!((m[(2, 3)] - 1.0).abs() < 1e-12);
        assert!((m[(2, 1)] - dg * 0.3).abs() < 1e-12, "{m}");
        let r = integrated_data_check(&data, 12, 7).unwrap();
        assert!(r.passes(1e-8), "{r:?}");
    }

    #[test]
    fn singular_vertical_part_is_rejected() {
        let space = FiberedSpace::new(plane(2), plane(2));
        let data = GeometricData::trivial(space);
        assert!(matches!(integrated_data_check(&data, 4, 1), Err(Error::NotInvertible { .. })));
    }
}
