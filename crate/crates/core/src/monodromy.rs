//! Transgression of spheres in the base into vertical covector paths,
//! monodromy lattices of the model families and integrability verdicts.
//!
//! A family `gamma_B(t, eps)` is integrated with `t` as the path parameter
//! and `eps` as the homotopy parameter; the surface is oriented by
//! `dt ^ deps`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_rational::Ratio;
use rayon::prelude::*;

use crate::chart::sphere::{area_density, chart_domain, to_chart, StereoChart};
use crate::chart::CoordinateDomain;
use crate::coupling::{GeometricData, VerticalBivector};
use crate::dual::{constants, gradient, jacobian, reals, Dual};
use crate::error::{Error, Result};
use crate::fibration::{curvature_coordinates, Connection, FiberedSpace, HorizontalForm};
use crate::linalg::null_space;
use crate::quadrature::{gauss_legendre_on, simpson, simpson_weights};
use crate::yang_mills::{so3_bivector, ScalarFn};

/// Tolerance for the boundary of a family to sit at its base points.
pub const COLLAPSE_TOLERANCE: f64 = 1e-10;
/// Default relative tolerance of lattice constancy.
pub const LATTICE_TOLERANCE: f64 = 1e-4;

/// Coupling data over the whole base.
#[derive(Clone, Debug)]
pub enum CouplingBundle {
    /// A single trivializing patch; families are given in base coordinates.
    Patch(GeometricData),
    /// The unit sphere with data on the `South` and `North` stereographic
    /// charts (in that order) sharing the fiber coordinates; families are
    /// given as points of `R^3`.
    Sphere([GeometricData; 2]),
}

impl CouplingBundle {
    pub fn fiber(&self) -> &CoordinateDomain {
        self.data(0).space().fiber()
    }

    fn data(&self, chart: usize) -> &GeometricData {
        match self {
            CouplingBundle::Patch(d) => d,
            CouplingBundle::Sphere(d) => &d[chart],
        }
    }

    /// Chart index, base coordinates and the two partial derivatives of the
    /// family at `(t, eps)`.
    fn frame(&self, family: &SphereFamily, t: f64, eps: f64) -> (usize, Vec<Dual>, Vec<Dual>, Vec<Dual>) {
        let te = constants(&[t, eps]);
        match self {
            CouplingBundle::Patch(_) => {
                let f = |p: &[Dual]| (family.map)(p[0], p[1]);
                let jac = jacobian(f, &te);
                let b = f(&te);
                let dt = jac.iter().map(|row| row[0]).collect();
                let de = jac.iter().map(|row| row[1]).collect();
                (0, b, dt, de)
            }
            CouplingBundle::Sphere(_) => {
                let xyz = reals(&(family.map)(te[0], te[1]));
                let chart = StereoChart::for_point(&xyz);
                let f = |p: &[Dual]| to_chart(chart, &(family.map)(p[0], p[1])).to_vec();
                let jac = jacobian(f, &te);
                let b = f(&te);
                let dt = jac.iter().map(|row| row[0]).collect();
                let de = jac.iter().map(|row| row[1]).collect();
                (chart.index(), b, dt, de)
            }
        }
    }

    /// `omega_H(h(d_t gamma), h(d_eps gamma))` at fiber point `x`.
    fn area_integrand(&self, family: &SphereFamily, t: f64, eps: f64, x: &[Dual]) -> Dual {
        let (chart, b, dt, de) = self.frame(family, t, eps);
        let data = self.data(chart);
        let e = data.space().join(&b, x);
        data.omega_h.apply(&e, &[&dt, &de])
    }

    /// Fiber velocity `Gamma(b, x) d_t gamma` of the transport along the
    /// `t`-path at fixed `eps`.
    fn transport_rhs(&self, family: &SphereFamily, t: f64, eps: f64, x: &[Dual]) -> Vec<Dual> {
        let (chart, b, dt, _) = self.frame(family, t, eps);
        self.data(chart).connection.apply(&b, x, &dt)
    }

    /// Max of the connection coefficients over sample points of every chart.
    fn max_coefficient(&self) -> f64 {
        let charts = match self {
            CouplingBundle::Patch(_) => 1,
            CouplingBundle::Sphere(_) => 2,
        };
        (0..charts)
            .map(|c| {
                let d = self.data(c);
                d.connection.max_coefficient(&d.space().samples(64, 0x51))
            })
            .fold(0.0, f64::max)
    }
}

/// How the boundary of a family is pinned.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryMode {
    /// All of the boundary of the square maps to one point.
    Sphere,
    /// A homotopy of paths with fixed endpoints: the sides `t = 0` and
    /// `t = 1` are constant.
    FixedEndpoints,
}

type FamilyMap = Arc<dyn Fn(Dual, Dual) -> Vec<Dual> + Send + Sync>;

/// A smooth family `gamma_B: I^2 -> B` with exact partial derivatives.
#[derive(Clone)]
pub struct SphereFamily {
    pub name: String,
    pub mode: BoundaryMode,
    pub n_t: usize,
    pub n_eps: usize,
    map: FamilyMap,
}

impl fmt::Debug for SphereFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereFamily")
            .field("name", &self.name)
            .field("mode", &self.mode)
            .field("grid", &(self.n_t, self.n_eps))
            .finish()
    }
}

/// Default grid of the transgression quadrature.
pub const DEFAULT_GRID: usize = 128;

impl SphereFamily {
    pub fn new<F>(name: impl Into<String>, mode: BoundaryMode, map: F) -> Self
    where
        F: Fn(Dual, Dual) -> Vec<Dual> + Send + Sync + 'static,
    {
        SphereFamily { name: name.into(), mode, n_t: DEFAULT_GRID, n_eps: DEFAULT_GRID, map: Arc::new(map) }
    }

    /// Sets the quadrature grid; both counts are rounded up to even numbers.
    pub fn with_grid(mut self, n_t: usize, n_eps: usize) -> Self {
        self.n_t = (n_t.max(2) + 1) & !1;
        self.n_eps = (n_eps.max(2) + 1) & !1;
        self
    }

    pub fn at(&self, t: f64, eps: f64) -> Vec<f64> {
        reals(&(self.map)(Dual::constant(t), Dual::constant(eps)))
    }

    /// The loops through the north pole of angular radius `rho` on the great
    /// circle `y = 0`, for `rho` from `rho0` to `rho1` as `eps` goes from 0
    /// to 1. They sweep the spherical cap of angular radius `rho1` minus the
    /// one of radius `rho0`.
    pub fn circles(rho0: f64, rho1: f64) -> Self {
        let mode = if rho0 == 0.0 && (rho1 - PI).abs() < 1e-15 { BoundaryMode::Sphere } else { BoundaryMode::FixedEndpoints };
        Self::new(format!("circles({rho0},{rho1})"), mode, move |t, e| {
            let rho = e * (rho1 - rho0) + rho0;
            let (cr, sr) = (rho.cos(), rho.sin());
            let center = [sr, Dual::ZERO, cr];
            let e1 = [cr, Dual::ZERO, -sr];
            let psi = t * (2.0 * PI);
            let (c, s) = (psi.cos(), psi.sin());
            (0..3).map(|i| cr * center[i] - sr * c * e1[i] + if i == 1 { sr * s } else { Dual::ZERO }).collect()
        })
    }

    /// The round sphere with its whole boundary collapsed to the north pole.
    pub fn round_sphere() -> Self {
        let mut f = Self::circles(0.0, PI);
        f.name = "round-sphere".into();
        f
    }

    /// A spherical cap of angular radius `theta` swept by loops through the
    /// north pole; its area is `2 pi (1 - cos theta)`.
    pub fn cap(theta: f64) -> Self {
        let mut f = Self::circles(0.0, theta);
        f.name = format!("cap({theta})");
        f
    }

    /// The sphere swept by meridians from the north to the south pole,
    /// rotated by `tilt` about the `x` axis.
    pub fn meridians(tilt: f64) -> Self {
        Self::new(format!("meridians({tilt})"), BoundaryMode::FixedEndpoints, move |t, e| {
            let (th, ph) = (t * PI, e * (2.0 * PI));
            let p = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let (c, s) = (tilt.cos(), tilt.sin());
            vec![p[0], p[1] * c - p[2] * s, p[1] * s + p[2] * c]
        })
    }

    /// Loops through `base` in the coordinate plane `(0, 1)`: circles of
    /// radius `eps * radius` with centers `base - eps * radius * e_0`. They
    /// sweep a disk of area `pi radius^2`.
    pub fn planar_disk(base: Vec<f64>, radius: f64) -> Self {
        Self::new("planar-disk", BoundaryMode::FixedEndpoints, move |t, e| {
            let r = e * radius;
            let psi = t * (2.0 * PI);
            let mut p = constants(&base);
            p[0] += r * (psi.cos() - 1.0);
            p[1] += r * psi.sin();
            p
        })
    }

    /// Runs `self` for `eps` in `[0, 1/2]` and `next` in `[1/2, 1]`, each
    /// eased in and out. The last
    /// path of `self` must be the first of `next`.
    pub fn then(&self, next: &SphereFamily) -> Result<Self> {
        let gap = (0..=16)
            .map(|k| {
                let t = k as f64 / 16.0;
                dist(&self.at(t, 1.0), &next.at(t, 0.0))
            })
            .fold(0.0, f64::max);
        if gap > COLLAPSE_TOLERANCE {
            return Err(Error::NonComposable { gap });
        }
        let (a, b) = (self.map.clone(), next.map.clone());
        let mode = if self.mode == BoundaryMode::Sphere && next.mode == BoundaryMode::Sphere {
            BoundaryMode::Sphere
        } else {
            BoundaryMode::FixedEndpoints
        };
        let mut out = Self::new(format!("{}.{}", self.name, next.name), mode, move |t, e| {
            if e.re() <= 0.5 {
                a(t, ease(e * 2.0))
            } else {
                b(t, ease(e * 2.0 - 1.0))
            }
        });
        out.n_t = self.n_t;
        out.n_eps = self.n_eps + next.n_eps;
        Ok(out)
    }

    /// Max distance of the pinned sides from their base points.
    pub fn boundary_defect(&self) -> f64 {
        let samples = 64;
        let mut worst: f64 = 0.0;
        let b0 = self.at(0.0, 0.0);
        let b1 = self.at(1.0, 0.0);
        for k in 0..=samples {
            let s = k as f64 / samples as f64;
            worst = worst.max(dist(&self.at(0.0, s), &b0));
            match self.mode {
                BoundaryMode::Sphere => {
                    for p in [self.at(1.0, s), self.at(s, 0.0), self.at(s, 1.0)] {
                        worst = worst.max(dist(&p, &b0));
                    }
                }
                BoundaryMode::FixedEndpoints => worst = worst.max(dist(&self.at(1.0, s), &b1)),
            }
        }
        worst
    }

    fn validate(&self) -> Result<()> {
        let defect = self.boundary_defect();
        if defect > COLLAPSE_TOLERANCE {
            return Err(Error::BoundaryCollapse { distance: defect });
        }
        Ok(())
    }
}

/// `u - sin(2 pi u) / 2 pi`: fixes 0 and 1 with vanishing velocity there,
/// so concatenated families stay smooth across the junction.
fn ease(u: Dual) -> Dual {
    u - (u * (2.0 * PI)).sin() / (2.0 * PI)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The discretized `Ver*`-path of a transgression.
#[derive(Clone, Debug)]
pub struct VerStarPath {
    pub eps: Vec<f64>,
    /// `gamma~(eps)` in the fiber over `gamma_B(0, eps)`.
    pub base_points: Vec<Vec<f64>>,
    pub covectors: Vec<Vec<f64>>,
}

impl VerStarPath {
    /// `int_0^1 c(eps) deps`: the covector of the constant path in the same
    /// class when the base point stays put and the covectors lie in an
    /// abelian isotropy, as for flat data and Casimir-valued `omega_H`.
    pub fn endpoint(&self) -> Vec<f64> {
        let n = self.covectors[0].len();
        (0..n)
            .map(|a| {
                let values: Vec<f64> = self.covectors.iter().map(|c| c[a]).collect();
                simpson(&values, 0.0, 1.0)
            })
            .collect()
    }

    /// Max distance of the base points from the first one.
    pub fn base_drift(&self) -> f64 {
        self.base_points.iter().map(|p| dist(p, &self.base_points[0])).fold(0.0, f64::max)
    }
}

/// RK4 trajectory of the transport along the `t`-path at `eps`, at the
/// nodes `t_k = k / n_t`, started at node `from` and run to node `to`.
fn family_transport(bundle: &CouplingBundle, family: &SphereFamily, eps: f64, x: &[Dual], from: usize, to: usize) -> Result<Vec<Vec<Dual>>> {
    let n = family.n_t;
    let h = if to >= from { 1.0 / n as f64 } else { -1.0 / n as f64 };
    let fiber = bundle.fiber();
    let mut cur = x.to_vec();
    let mut out = vec![cur.clone()];
    let add = |y: &[Dual], k: &[Dual], c: f64| -> Vec<Dual> { y.iter().zip(k).map(|(a, b)| *a + *b * c).collect() };
    let count = from.abs_diff(to);
    for k in 0..count {
        let t = (from as f64 + if to >= from { k as f64 } else { -(k as f64) }) / n as f64;
        let k1 = bundle.transport_rhs(family, t, eps, &cur);
        let k2 = bundle.transport_rhs(family, t + h / 2.0, eps, &add(&cur, &k1, h / 2.0));
        let k3 = bundle.transport_rhs(family, t + h / 2.0, eps, &add(&cur, &k2, h / 2.0));
        let k4 = bundle.transport_rhs(family, t + h, eps, &add(&cur, &k3, h));
        cur = (0..cur.len()).map(|a| cur[a] + (k1[a] + k2[a] * 2.0 + k3[a] * 2.0 + k4[a]) * (h / 6.0)).collect();
        if !fiber.contains(&reals(&cur)) {
            return Err(Error::IncompleteTransport { time: t + h });
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// `eps -> (d_V)_{gamma~(eps)} int_0^1 (phi_{s,0})^* omega_H(gamma_B)_{s,eps} ds`
/// with `gamma~(eps) = Phi_{gamma^eps}^{-1} Phi_{gamma^0}(x0)`, by composite
/// Simpson in `s` and dual-number differentiation through the transport.
pub fn transgress(bundle: &CouplingBundle, family: &SphereFamily, x0: &[f64]) -> Result<VerStarPath> {
    family.validate()?;
    let n_t = family.n_t;
    let far = family_transport(bundle, family, 0.0, &constants(x0), 0, n_t)?;
    let end = far[n_t].clone();
    let weights = simpson_weights(n_t, 0.0, 1.0);
    let eps: Vec<f64> = (0..=family.n_eps).map(|j| j as f64 / family.n_eps as f64).collect();
    let slices: Vec<Result<(Vec<f64>, Vec<f64>)>> = eps
        .par_iter()
        .map(|e| {
            let back = family_transport(bundle, family, *e, &end, n_t, 0)?;
            let start = reals(&back[n_t]);
            let integral = |x: &[Dual]| -> Dual {
                match family_transport(bundle, family, *e, x, 0, n_t) {
                    Ok(traj) => traj
                        .iter()
                        .enumerate()
                        .map(|(k, xk)| bundle.area_integrand(family, k as f64 / n_t as f64, *e, xk) * weights[k])
                        .sum(),
                    Err(_) => Dual::constant(f64::NAN),
                }
            };
            let covector = reals(&gradient(integral, &constants(&start)));
            if covector.iter().any(|c| !c.is_finite()) {
                return Err(Error::IncompleteTransport { time: 1.0 });
            }
            Ok((start, covector))
        })
        .collect();
    let (base_points, covectors) = slices.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(VerStarPath { eps, base_points, covectors })
}

/// `(d_V)_{x0} int_{gamma_B} omega_H` for data with vanishing connection in
/// the given trivialization, by tensor Gauss-Legendre quadrature and central
/// differences in the fiber.
pub fn transgress_flat(bundle: &CouplingBundle, family: &SphereFamily, x0: &[f64], nodes: usize) -> Result<Vec<f64>> {
    let max = bundle.max_coefficient();
    if max > 1e-12 {
        return Err(Error::NonFlat { max });
    }
    let (ts, wt) = gauss_legendre_on(nodes, 0.0, 1.0);
    let area = |x: &[f64]| -> f64 {
        let xd = constants(x);
        let mut total = 0.0;
        for (t, a) in ts.iter().zip(&wt) {
            for (e, b) in ts.iter().zip(&wt) {
                total += a * b * bundle.area_integrand(family, *t, *e, &xd).re();
            }
        }
        total
    };
    let h = 1e-5;
    Ok((0..x0.len())
        .map(|a| {
            let (mut plus, mut minus) = (x0.to_vec(), x0.to_vec());
            plus[a] += h;
            minus[a] -= h;
            (area(&plus) - area(&minus)) / (2.0 * h)
        })
        .collect())
}

/// Basis (columns) of the center of the isotropy algebra `ker pi^#` at `e`,
/// with the bracket `[dx_a, dx_b] = d pi^{ab}` linearized at `e`.
pub fn isotropy_center(pi_v: &VerticalBivector, e: &[f64]) -> DMatrix<f64> {
    let space = pi_v.space();
    let (m, n) = (space.base_dim(), space.fiber_dim());
    let tol = 1e-10;
    let p = pi_v.matrix(e);
    let iso = null_space(&p, tol);
    let k = iso.ncols();
    if k == 0 {
        return iso;
    }
    // c[a][b][c] = d_c pi^{ab}
    let grads: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| {
                    let f = |x: &[Dual]| -> Dual {
                        let full = space.join(&constants(&e[..m]), x);
                        pi_v.entry(&pi_v.eval_dual(&full), a, b)
                    };
                    reals(&gradient(f, &constants(&e[m..])))
                })
                .collect()
        })
        .collect();
    // Condition on the coefficients z of xi = iso z: [xi, iso_j] = 0 for all j.
    let mut rows = DMatrix::zeros(k * n, k);
    for j in 0..k {
        for i in 0..k {
            for c in 0..n {
                let mut v = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        v += iso[(a, i)] * iso[(b, j)] * grads[a][b][c];
                    }
                }
                rows[(j * n + c, i)] = v;
            }
        }
    }
    let z = null_space(&rows, tol);
    &iso * z
}

/// One sample of a monodromy lattice.
#[derive(Clone, Debug)]
pub struct LatticeSample {
    pub point: Vec<f64>,
    pub center_dim: usize,
    pub covector: Vec<f64>,
    /// The covector in units of the given unit covector (zero when the
    /// isotropy center is trivial).
    pub generator: f64,
    /// Distance of the covector from the line of the unit covector.
    pub off_line: f64,
}

/// Sampled generators of the transgression image, with verdicts.
#[derive(Clone, Debug)]
pub struct LatticeReport {
    pub family: String,
    pub samples: Vec<LatticeSample>,
    /// Max relative spread of the generators over samples with nontrivial
    /// isotropy center.
    pub constancy_deviation: f64,
    pub tolerance: f64,
    pub constant: bool,
    /// Generators are either all zero or bounded away from zero off the
    /// degenerate locus.
    pub discrete: bool,
}

impl LatticeReport {
    fn build(family: String, samples: Vec<LatticeSample>, tolerance: f64) -> Result<Self> {
        let regular: Vec<f64> = samples.iter().filter(|s| s.center_dim > 0).map(|s| s.generator).collect();
        if regular.is_empty() {
            return Err(Error::EmptyReport);
        }
        let scale = regular.iter().fold(0.0f64, |m, g| m.max(g.abs())).max(1.0);
        let reference = regular[0];
        let constancy_deviation = regular.iter().map(|g| (g - reference).abs() / scale).fold(0.0, f64::max);
        let all_zero = regular.iter().all(|g| g.abs() <= tolerance * scale);
        let bounded_away = regular.iter().all(|g| g.abs() > tolerance * scale);
        Ok(LatticeReport {
            family,
            constancy_deviation,
            tolerance,
            constant: constancy_deviation <= tolerance,
            discrete: all_zero || bounded_away,
            samples,
        })
    }

    /// Generator of the regular samples (the first one).
    pub fn generator(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.center_dim > 0).map(|s| s.generator)
    }
}

/// Lattice sample at fiber point `x0`: the transgression endpoint projected
/// to the isotropy center at `(gamma_B(0, 0), x0)`, measured against `unit`.
pub fn lattice_sample(bundle: &CouplingBundle, family: &SphereFamily, x0: &[f64], unit: &[f64]) -> Result<LatticeSample> {
    let (chart, b, _, _) = bundle.frame(family, 0.0, 0.0);
    let data = bundle.data(chart);
    let e = data.space().join(&reals(&b), x0);
    let center = isotropy_center(&data.pi_v, &e);
    let n = x0.len();
    if center.ncols() == 0 {
        return Ok(LatticeSample { point: x0.to_vec(), center_dim: 0, covector: vec![0.0; n], generator: 0.0, off_line: 0.0 });
    }
    let raw = transgress(bundle, family, x0)?.endpoint();
    let v = nalgebra::DVector::from_column_slice(&raw);
    let projected = &center * (center.transpose() * &v);
    let covector: Vec<f64> = projected.iter().copied().collect();
    let norm = unit.iter().map(|u| u * u).sum::<f64>().sqrt();
    let generator = covector.iter().zip(unit).map(|(c, u)| c * u).sum::<f64>() / (norm * norm);
    let off_line = covector.iter().zip(unit).map(|(c, u)| (c - generator * u).powi(2)).sum::<f64>().sqrt();
    Ok(LatticeSample { point: x0.to_vec(), center_dim: center.ncols(), covector, generator, off_line })
}

/// `E = S^2 x so(3)*` with the trivial connection, the Lie-Poisson
/// structure on the fibers and `omega_H = f(r) omega`.
pub fn so3_sphere_bundle(f: ScalarFn, half_width: f64) -> CouplingBundle {
    let space = FiberedSpace::new(chart_domain(), CoordinateDomain::cube(3, half_width));
    let pi = so3_bivector(space.fiber().clone());
    let ev = pi.evaluator().clone();
    let data = GeometricData::new(
        VerticalBivector::fiberwise(space.clone(), move |x| ev(x)),
        Connection::flat(space.clone()),
        HorizontalForm::new(space, 2, move |e| {
            let r = (e[2] * e[2] + e[3] * e[3] + e[4] * e[4]).sqrt();
            vec![f(r) * area_density(&e[..2])]
        }),
    )
    .expect("consistent data");
    CouplingBundle::Sphere([data.clone(), data])
}

/// The Hopf data on both charts: `F = R`, flat, `omega_H = f(x) omega`.
pub fn hopf_sphere_bundle(f: ScalarFn) -> Result<CouplingBundle> {
    let data = crate::yang_mills::hopf_geometric_data(f)?;
    Ok(CouplingBundle::Sphere([data.clone(), data]))
}

/// Samples the lattice of the `so(3)*` family at the radii, along the fixed
/// direction `(0.48, 0.6, 0.64)`; generators are in units of `dr`.
pub fn so3_lattice(f: ScalarFn, radii: &[f64], grid: usize) -> Result<LatticeReport> {
    let bundle = so3_sphere_bundle(f, 4.0);
    let family = SphereFamily::round_sphere().with_grid(grid, grid);
    let dir = [0.48, 0.6, 0.64];
    let samples = radii
        .iter()
        .map(|r| {
            let x0: Vec<f64> = dir.iter().map(|d| d * r).collect();
            lattice_sample(&bundle, &family, &x0, &dir)
        })
        .collect::<Result<Vec<_>>>()?;
    LatticeReport::build(family.name.clone(), samples, LATTICE_TOLERANCE)
}

/// Samples the lattice of the Hopf family at fiber points `xs`, in units of
/// `dx`.
pub fn hopf_lattice(f: ScalarFn, xs: &[f64], grid: usize) -> Result<LatticeReport> {
    let bundle = hopf_sphere_bundle(f)?;
    let family = SphereFamily::round_sphere().with_grid(grid, grid);
    let samples = xs.iter().map(|x| lattice_sample(&bundle, &family, &[*x], &[1.0])).collect::<Result<Vec<_>>>()?;
    LatticeReport::build(family.name.clone(), samples, LATTICE_TOLERANCE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    IntegrableCandidate,
    NonIntegrable,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::IntegrableCandidate => "INTEGRABLE-CANDIDATE",
            Verdict::NonIntegrable => "NON-INTEGRABLE",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// Verdict with the evidence it rests on.
#[derive(Clone, Debug)]
pub struct IntegrabilityVerdict {
    pub verdict: Verdict,
    pub constancy_deviation: f64,
    pub tolerance: f64,
    /// `|generator - 4 pi q|` relative, when an exact slope `q` was given.
    pub slope_mismatch: Option<f64>,
    pub reason: String,
}

/// Decides integrability from a lattice report: non-constant or
/// accumulating generators are an obstruction; a constant lattice is a
/// candidate only when an exact rational slope confirming it is supplied.
pub fn integrability_verdict(report: &LatticeReport, exact_slope: Option<Ratio<i64>>) -> Result<IntegrabilityVerdict> {
    let generator = report.generator().ok_or(Error::EmptyReport)?;
    let base = |verdict, slope_mismatch, reason: &str| IntegrabilityVerdict {
        verdict,
        constancy_deviation: report.constancy_deviation,
        tolerance: report.tolerance,
        slope_mismatch,
        reason: reason.to_string(),
    };
    if !report.constant {
        return Ok(base(Verdict::NonIntegrable, None, "generators vary along the fiber"));
    }
    if !report.discrete {
        return Ok(base(Verdict::NonIntegrable, None, "generators accumulate at zero"));
    }
    match exact_slope {
        None => Ok(base(Verdict::Inconclusive, None, "constant lattice; rationality of the slope is not numerically decidable")),
        Some(q) => {
            let expected = 4.0 * PI * (*q.numer() as f64) / (*q.denom() as f64);
            let mismatch = (generator - expected).abs() / expected.abs().max(1.0);
            if mismatch <= report.tolerance {
                Ok(base(Verdict::IntegrableCandidate, Some(mismatch), "constant lattice 4 pi q with q rational"))
            } else {
                Ok(base(Verdict::Inconclusive, Some(mismatch), "the supplied slope does not match the lattice"))
            }
        }
    }
}

/// Names and one-line descriptions of the built-in families.
pub const REGISTRY: [(&str, &str); 2] = [
    ("round-sphere", "unit sphere swept by loops through the north pole, boundary collapsed, area 4 pi"),
    ("cap", "spherical cap cap(theta) of angular radius theta, area 2 pi (1 - cos theta)"),
];

/// Curvature of the bundle's connection at sample points (max over charts).
pub fn max_curvature(bundle: &CouplingBundle) -> f64 {
    let charts = match bundle {
        CouplingBundle::Patch(_) => 1,
        CouplingBundle::Sphere(_) => 2,
    };
    let mut worst: f64 = 0.0;
    for c in 0..charts {
        let d = bundle.data(c);
        let m = d.space().base_dim();
        for p in d.space().samples(32, 0x77) {
            let e = constants(&p);
            for i in 0..m {
                for j in i + 1..m {
                    for v in curvature_coordinates(&d.connection, &e, i, j) {
                        worst = worst.max(v.re().abs());
                    }
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> ScalarFn {
        Arc::new(|x| x * x * x * 0.5 - x * 2.0 + 1.0)
    }

    fn cubic_slope(x: f64) -> f64 {
        1.5 * x * x - 2.0
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn families_collapse() {
        for f in [SphereFamily::round_sphere(), SphereFamily::cap(1.0), SphereFamily::meridians(0.4)] {
            assert!(f.boundary_defect() < 1e-12, "{}", f.name);
        }
        assert_eq!(SphereFamily::round_sphere().mode, BoundaryMode::Sphere);
        let bad = SphereFamily::new("bad", BoundaryMode::Sphere, |t, e| vec![t, e, Dual::ZERO]);
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        assert!(matches!(transgress(&bundle, &bad, &[0.0]), Err(Error::BoundaryCollapse { .. })));
    }

    #[test]
    fn zero_form_gives_zero_path() {
        let bundle = hopf_sphere_bundle(Arc::new(|_| Dual::ZERO)).unwrap();
        let p = transgress(&bundle, &SphereFamily::round_sphere().with_grid(16, 16), &[0.3]).unwrap();
        assert!(p.covectors.iter().flatten().all(|c| *c == 0.0));
    }

    #[test]
    fn degenerate_family_gives_zero_path() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        let still = SphereFamily::new("still", BoundaryMode::FixedEndpoints, |t, _| {
            let th = t * 2.0;
            vec![th.sin(), Dual::ZERO, th.cos()]
        });
        let p = transgress(&bundle, &still.with_grid(16, 16), &[0.3]).unwrap();
        assert!(p.covectors.iter().flatten().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn hopf_full_sphere() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        for x in [0.7, -1.3] {
            let p = transgress(&bundle, &SphereFamily::round_sphere(), &[x]).unwrap();
            assert!(p.base_drift() == 0.0);
            let expected = 4.0 * PI * cubic_slope(x);
            assert!(rel(p.endpoint()[0], expected) < 1e-4, "{:?} {expected}", p.endpoint());
        }
    }

    #[test]
    fn flat_oracle_on_caps() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        let x = 0.9;
        let hemi = transgress_flat(&bundle, &SphereFamily::cap(PI / 2.0), &[x], 48).unwrap()[0];
        assert!(rel(hemi, 2.0 * PI * cubic_slope(x)) < 1e-6);
        let constant = hopf_sphere_bundle(Arc::new(|_| Dual::constant(2.0))).unwrap();
        assert!(transgress_flat(&constant, &SphereFamily::round_sphere(), &[x], 16).unwrap()[0].abs() < 1e-9);
        for theta in [0.4, 1.0, 2.0, 2.8] {
            let fam = SphereFamily::cap(theta);
            let a = transgress(&bundle, &fam, &[x]).unwrap().endpoint()[0];
            let b = transgress_flat(&bundle, &fam, &[x], 48).unwrap()[0];
            assert!(rel(a, b) < 1e-4, "{theta}: {a} {b}");
            assert!(rel(b, 2.0 * PI * (1.0 - theta.cos()) * cubic_slope(x)) < 1e-6);
        }
    }

    #[test]
    fn parameterizations_agree() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        let a = transgress(&bundle, &SphereFamily::round_sphere(), &[0.5]).unwrap().endpoint()[0];
        let b = transgress(&bundle, &SphereFamily::meridians(0.3), &[0.5]).unwrap().endpoint()[0];
        assert!(rel(a, b) < 1e-4, "{a} {b}");
    }

    #[test]
    fn additivity_over_concatenation() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        let (f1, f2) = (SphereFamily::circles(0.0, 1.1), SphereFamily::circles(1.1, PI));
        let whole = f1.then(&f2).unwrap();
        let parts: f64 = [f1, f2].iter().map(|f| transgress(&bundle, f, &[0.2]).unwrap().endpoint()[0]).sum();
        let total = transgress(&bundle, &whole, &[0.2]).unwrap().endpoint()[0];
        assert!(rel(total, parts) < 1e-4, "{total} {parts}");
        assert!(SphereFamily::cap(0.5).then(&SphereFamily::cap(0.5)).is_err());
    }

    #[test]
    fn quadrature_converges() {
        let bundle = hopf_sphere_bundle(cubic()).unwrap();
        let exact = 4.0 * PI * cubic_slope(0.4);
        let at = |n: usize| transgress(&bundle, &SphereFamily::round_sphere().with_grid(n, n), &[0.4]).unwrap().endpoint()[0];
        let (a, b, c) = (at(16), at(32), at(64));
        assert!((c - b).abs() < (b - a).abs() / 8.0, "{a} {b} {c}");
        assert!(rel(c, exact) < 1e-5);
    }

    #[test]
    fn gauge_transformed_transport() {
        // x = y exp(-phi(b)) turns the flat product into a connection with
        // nontrivial linear transport.
        let phi = |b: &[Dual]| b[0] * 0.7 + (b[1] * 1.3).sin() * 0.4;
        let space = FiberedSpace::new(CoordinateDomain::cube(2, 2.0), CoordinateDomain::cube(1, 20.0));
        let f = |x: Dual| x * x * x * 0.5 - x * 2.0;
        let w = |b: &[Dual]| 1.0 + b[0] * b[1] * 0.3;
        let flat = GeometricData::new(
            VerticalBivector::zero(space.clone()),
            Connection::flat(space.clone()),
            HorizontalForm::new(space.clone(), 2, move |e| vec![f(e[2]) * w(&e[..2])]),
        )
        .unwrap();
        let gauged = GeometricData::new(
            VerticalBivector::zero(space.clone()),
            Connection::new(space.clone(), move |b, y| {
                let g = gradient(|q| phi(q), b);
                vec![y[0] * g[0], y[0] * g[1]]
            }),
            HorizontalForm::new(space.clone(), 2, move |e| vec![f(e[2] * (-phi(&e[..2])).exp()) * w(&e[..2])]),
        )
        .unwrap();
        assert!(crate::coupling::check_coupling_conditions(&gauged, &space.samples(16, 1), 1e-8).unwrap().is_coupling());
        let (flat, gauged) = (CouplingBundle::Patch(flat), CouplingBundle::Patch(gauged));
        assert!(max_curvature(&gauged) < 1e-12);
        assert!(matches!(transgress_flat(&gauged, &SphereFamily::planar_disk(vec![0.3, -0.2], 1.0), &[1.0], 8), Err(Error::NonFlat { .. })));
        let b0 = [0.3, -0.2];
        let fam = SphereFamily::planar_disk(b0.to_vec(), 1.0);
        let scale = (-phi(&constants(&b0)).re()).exp();
        let y0 = 1.4;
        let x0 = y0 * scale;
        let path = transgress(&gauged, &fam, &[y0]).unwrap();
        assert!(path.base_drift() < 1e-7, "{} {:?}", path.base_drift(), path.endpoint());
        let oracle = transgress_flat(&flat, &fam, &[x0], 48).unwrap()[0] * scale;
        assert!(rel(path.endpoint()[0], oracle) < 1e-4, "{:?} {oracle}", path.endpoint());
    }

    #[test]
    fn so3_center() {
        let bundle = so3_sphere_bundle(Arc::new(|r| r), 4.0);
        let data = bundle.data(0);
        let c = isotropy_center(&data.pi_v, &[0.1, 0.2, 0.0, 0.6, 0.8]);
        assert_eq!(c.ncols(), 1);
        assert!((c[(1, 0)].abs() - 0.6).abs() < 1e-12);
        assert_eq!(isotropy_center(&data.pi_v, &[0.1, 0.2, 0.0, 0.0, 0.0]).ncols(), 0);
    }

    #[test]
    fn so3_lattices() {
        let linear = so3_lattice(Arc::new(|r| r * 2.0 + 1.0), &[0.0, 0.5, 1.5], 32).unwrap();
        assert_eq!(linear.samples[0].generator, 0.0);
        assert!(rel(linear.samples[1].generator, 8.0 * PI) < 1e-4);
        assert!(linear.constant && linear.discrete);
        assert!(linear.samples.iter().all(|s| s.off_line < 1e-8));
        let v = integrability_verdict(&linear, Some(Ratio::from_integer(2))).unwrap();
        assert_eq!(v.verdict, Verdict::IntegrableCandidate);
        let flat = so3_lattice(Arc::new(|_| Dual::constant(3.0)), &[0.5, 1.0], 16).unwrap();
        assert!(flat.samples.iter().all(|s| s.generator.abs() < 1e-12));
        let square = so3_lattice(Arc::new(|r| r * r), &[0.5, 1.0, 1.5], 32).unwrap();
        assert!(rel(square.samples[1].generator, 8.0 * PI) < 1e-4);
        assert!(!square.constant);
        assert_eq!(integrability_verdict(&square, None).unwrap().verdict, Verdict::NonIntegrable);
        let pi_r = so3_lattice(Arc::new(|r| r * PI), &[0.5, 1.0], 32).unwrap();
        assert_eq!(integrability_verdict(&pi_r, None).unwrap().verdict, Verdict::Inconclusive);
    }

    #[test]
    fn hopf_critical_point_obstructs() {
        let report = hopf_lattice(cubic(), &[-1.0, -0.5, 0.0, 0.5, 1.0], 32).unwrap();
        assert_eq!(integrability_verdict(&report, None).unwrap().verdict, Verdict::NonIntegrable);
        let affine = hopf_lattice(Arc::new(|x| x * 1.5), &[-1.0, 0.0, 2.0], 32).unwrap();
        let v = integrability_verdict(&affine, Some(Ratio::new(3, 2))).unwrap();
        assert_eq!(v.verdict, Verdict::IntegrableCandidate);
    }
}
