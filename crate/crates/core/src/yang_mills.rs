//! Coupling data of Yang-Mills-Higgs phase spaces.
//!
//! Conventions: a Lie algebra element acts on the fiber by the vector field
//! `rho(xi)`, and `rho` is a homomorphism of Lie algebras. The group acts on
//! the right, `ac_g(x) = x . g`, with `rho(xi)(x) = d/dt x . exp(t xi)`. The
//! hamiltonian condition is `rho(xi) = pi_F^# d<mu, xi>`. The principal
//! connection enters as `A(b, x) v = rho(A_b(v))(x)` and its curvature is
//! `F = dA + [A ^ A]`, i.e. `F_ij = d_i A_j - d_j A_i + [A_i, A_j]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::chart::field::{combinations, rank, Field, Valence};
use crate::chart::ops::{exterior_derivative, lie_bracket, lie_derivative, sharp};
use crate::chart::sphere::{chart_domain, hopf_connection_form};
use crate::chart::CoordinateDomain;
use crate::coupling::{GeometricData, VerticalBivector};
use crate::dual::{constants, jacobian, reals, Dual};
use crate::error::{Error, Result};
use crate::fibration::{Connection, FiberedSpace, HorizontalForm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupKind {
    U1,
    SO3,
}

/// A matrix Lie group given by a basis of its Lie algebra.
#[derive(Clone, Debug)]
pub struct StructureGroupModel {
    kind: GroupKind,
    basis: Vec<DMatrix<f64>>,
    /// `structure[i][j][k] = c_{ij}^k` with `[e_i, e_j] = c_{ij}^k e_k`.
    structure: Vec<Vec<Vec<f64>>>,
}

impl StructureGroupModel {
    /// `U(1)` as rotations of the plane.
    pub fn u1() -> Self {
        let e = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        Self::from_basis(GroupKind::U1, vec![e])
    }

    /// `SO(3)` with `(L_i)_{jk} = -eps_{ijk}`, so `[L_i, L_j] = eps_{ijk} L_k`
    /// and `L_xi v = xi x v`.
    pub fn so3() -> Self {
        let basis = (0..3)
            .map(|i| DMatrix::from_fn(3, 3, |j, k| -levi_civita(i, j, k)))
            .collect();
        Self::from_basis(GroupKind::SO3, basis)
    }

    fn from_basis(kind: GroupKind, basis: Vec<DMatrix<f64>>) -> Self {
        let mut model = StructureGroupModel { kind, basis, structure: Vec::new() };
        let d = model.basis.len();
        model.structure = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let c = &model.basis[i] * &model.basis[j] - &model.basis[j] * &model.basis[i];
                        model.vee(&c)
                    })
                    .collect()
            })
            .collect();
        model
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.basis[0].nrows()
    }

    pub fn structure_constants(&self) -> &[Vec<Vec<f64>>] {
        &self.structure
    }

    /// `sum xi_i e_i`.
    pub fn hat(&self, xi: &[f64]) -> DMatrix<f64> {
        let n = self.matrix_dim();
        self.basis.iter().zip(xi).fold(DMatrix::zeros(n, n), |acc, (e, c)| acc + e * *c)
    }

    /// Coordinates of a Lie algebra matrix in the basis (the basis is
    /// Frobenius-orthogonal).
    pub fn vee(&self, m: &DMatrix<f64>) -> Vec<f64> {
        self.basis.iter().map(|e| e.dot(m) / e.dot(e)).collect()
    }

    pub fn bracket(&self, xi: &[Dual], eta: &[Dual]) -> Vec<Dual> {
        let d = self.dim();
        (0..d)
            .map(|k| {
                let mut acc = Dual::ZERO;
                for i in 0..d {
                    for j in 0..d {
                        let c = self.structure[i][j][k];
                        if c != 0.0 {
                            acc += xi[i] * eta[j] * c;
                        }
                    }
                }
                acc
            })
            .collect()
    }

    pub fn bracket_values(&self, xi: &[f64], eta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                let w = xi[i] * eta[j];
                if w != 0.0 {
                    for (o, c) in out.iter_mut().zip(&self.structure[i][j]) {
                        *o += w * c;
                    }
                }
            }
        }
        out
    }

    pub fn exp(&self, xi: &[f64]) -> DMatrix<f64> {
        self.hat(xi).exp()
    }

    /// `Ad_g xi = vee(g hat(xi) g^{-1})`.
    pub fn adjoint(&self, g: &DMatrix<f64>, xi: &[f64]) -> Vec<f64> {
        let inv = g.clone().try_inverse().expect("group elements are invertible");
        self.vee(&(g * self.hat(xi) * inv))
    }

    /// Max of `|c_ij^k + c_ji^k|` and of the Jacobi sums.
    pub fn consistency_defect(&self) -> f64 {
        let d = self.dim();
        let c = &self.structure;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    worst = worst.max((c[i][j][k] + c[j][i][k]).abs());
                    for m in 0..d {
                        let jac: f64 = (0..d)
                            .map(|l| c[i][j][l] * c[l][k][m] + c[j][k][l] * c[l][i][m] + c[k][i][l] * c[l][j][m])
                            .sum();
                        worst = worst.max(jac.abs());
                    }
                }
            }
        }
        worst
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

/// A principal connection on a trivializing patch.
#[derive(Clone, Debug)]
pub struct PrincipalData {
    pub group: StructureGroupModel,
    /// Lie-algebra valued 1-form on the base.
    pub connection: Field,
}

impl PrincipalData {
    pub fn new(group: StructureGroupModel, connection: Field) -> Result<Self> {
        connection.expect(Valence::ValuedForm { degree: 1, values: group.dim() })?;
        Ok(PrincipalData { group, connection })
    }

    pub fn base(&self) -> &CoordinateDomain {
        self.connection.domain()
    }

    /// `F = dA + [A ^ A]` as a Lie-algebra valued 2-form.
    pub fn curvature(&self) -> Result<Field> {
        let m = self.base().dim();
        let g = self.group.dim();
        let da = exterior_derivative(&self.connection)?;
        let a = self.connection.evaluator().clone();
        let group = self.group.clone();
        let pairs = combinations(m, 2);
        Ok(Field::new(self.base().clone(), Valence::ValuedForm { degree: 2, values: g }, move |b| {
            let d = da.eval_dual(b);
            let av = a(b);
            let mut out = d;
            for (c, ij) in pairs.iter().enumerate() {
                let ai = &av[ij[0] * g..(ij[0] + 1) * g];
                let aj = &av[ij[1] * g..(ij[1] + 1) * g];
                for (k, v) in group.bracket(ai, aj).into_iter().enumerate() {
                    out[c * g + k] += v;
                }
            }
            out
        }))
    }

    /// Max of `d_A F = dF + [A ^ F]` over the points (zero below dimension 3).
    pub fn bianchi_residual(&self, points: &[Vec<f64>]) -> Result<f64> {
        let m = self.base().dim();
        if m < 3 {
            return Ok(0.0);
        }
        let g = self.group.dim();
        let f = self.curvature()?;
        let df = exterior_derivative(&f)?;
        let mut worst: f64 = 0.0;
        for p in points {
            let b = constants(p);
            let (fv, dv, av) = (f.eval_dual(&b), df.eval_dual(&b), self.connection.eval_dual(&b));
            for (c, t) in combinations(m, 3).iter().enumerate() {
                let (i, j, k) = (t[0], t[1], t[2]);
                let fa = |x: usize, y: usize| &fv[rank(m, &[x, y]) * g..(rank(m, &[x, y]) + 1) * g];
                let al = |x: usize| &av[x * g..(x + 1) * g];
                let mut sum: Vec<Dual> = dv[c * g..(c + 1) * g].to_vec();
                for (x, yz) in [(i, (j, k)), (j, (i, k)), (k, (i, j))].iter().enumerate().map(|(n, (a, bc))| {
                    let sign = if n == 1 { -1.0 } else { 1.0 };
                    ((*a, sign), *bc)
                }) {
                    let br = self.group.bracket(al(x.0), fa(yz.0, yz.1));
                    for (s, v) in sum.iter_mut().zip(br) {
                        *s += v * x.1;
                    }
                }
                for s in sum {
                    worst = worst.max(s.re().abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Chart change `T` and transition function `g` relating two patches of a
/// principal bundle, for the gauge check `F_1 = Ad_{g^{-1}} T^* F_2`.
#[derive(Clone)]
pub struct PatchTransition {
    pub chart_map: Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>,
    pub group_element: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

impl fmt::Debug for PatchTransition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PatchTransition")
    }
}

/// Max of `|F_1 - Ad_{g^{-1}} T^* F_2|` over points of the first patch.
pub fn curvature_transition_residual(
    first: &PrincipalData,
    second: &PrincipalData,
    transition: &PatchTransition,
    points: &[Vec<f64>],
) -> Result<f64> {
    let (f1, f2) = (first.curvature()?, second.curvature()?);
    let m = first.base().dim();
    let g = first.group.dim();
    let mut worst: f64 = 0.0;
    for p in points {
        let b = constants(p);
        let t = (transition.chart_map)(&b);
        let jt = jacobian(|q| (transition.chart_map)(q), &b);
        let v1 = f1.eval(p);
        let v2 = f2.eval_dual(&t);
        let ginv = (transition.group_element)(p).try_inverse().ok_or(Error::Invalid("singular transition".into()))?;
        for (c, ij) in combinations(m, 2).iter().enumerate() {
            let mut pulled = vec![0.0; g];
            for (c2, kl) in combinations(m, 2).iter().enumerate() {
                let det = (jt[kl[0]][ij[0]] * jt[kl[1]][ij[1]] - jt[kl[1]][ij[0]] * jt[kl[0]][ij[1]]).re();
                for a in 0..g {
                    pulled[a] += v2[c2 * g + a].re() * det;
                }
            }
            let moved = first.group.adjoint(&ginv, &pulled);
            for a in 0..g {
                worst = worst.max((v1[c * g + a] - moved[a]).abs());
            }
        }
    }
    Ok(worst)
}

type ActionFn = Arc<dyn Fn(&[Dual], &[Dual]) -> Vec<Dual> + Send + Sync>;
type GroupActionFn = Arc<dyn Fn(&DMatrix<f64>, &[Dual]) -> Vec<Dual> + Send + Sync>;
type MomentFn = Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>;

/// A Poisson manifold with a hamiltonian action.
#[derive(Clone)]
pub struct HamiltonianFiber {
    pub pi: Field,
    /// `(xi, x) -> rho(xi)(x)`.
    pub action: ActionFn,
    /// `(g, x) -> x . g`.
    pub group_action: GroupActionFn,
    /// `x -> mu(x)` in Lie-algebra dual coordinates.
    pub moment: MomentFn,
}

impl fmt::Debug for HamiltonianFiber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianFiber").field("dim", &self.pi.dim()).finish()
    }
}

impl HamiltonianFiber {
    pub fn domain(&self) -> &CoordinateDomain {
        self.pi.domain()
    }

    /// `rho(xi)` as a vector field.
    pub fn action_field(&self, xi: Vec<f64>) -> Field {
        let act = self.action.clone();
        Field::vector(self.domain().clone(), move |x| act(&constants(&xi), x))
    }

    /// `<mu, xi>` as a function.
    pub fn moment_component(&self, xi: Vec<f64>) -> Field {
        let mu = self.moment.clone();
        Field::scalar(self.domain().clone(), move |x| mu(x).into_iter().zip(&xi).map(|(a, b)| a * *b).sum())
    }

    /// Max of `|rho([e_i, e_j]) - [rho(e_i), rho(e_j)]|`.
    pub fn homomorphism_defect(&self, group: &StructureGroupModel, points: &[Vec<f64>]) -> Result<f64> {
        let d = group.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i + 1..d {
                let (ei, ej) = (unit_vec(d, i), unit_vec(d, j));
                let br = reals(&group.bracket(&constants(&ei), &constants(&ej)));
                let lhs = self.action_field(br);
                let rhs = lie_bracket(&self.action_field(ei), &self.action_field(ej))?;
                worst = worst.max(lhs.sub(&rhs)?.max_abs(points));
            }
        }
        Ok(worst)
    }

    /// Max of `|rho(xi) - pi^# d<mu, xi>|` over basis elements.
    pub fn hamiltonian_defect(&self, group: &StructureGroupModel, points: &[Vec<f64>]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..group.dim() {
            let xi = unit_vec(group.dim(), i);
            let ham = sharp(&self.pi, &exterior_derivative(&self.moment_component(xi.clone()))?)?;
            worst = worst.max(self.action_field(xi).sub(&ham)?.max_abs(points));
        }
        Ok(worst)
    }

    /// Max of `|mu(x . g) - g^T-coadjoint mu(x)|`, the equivariance of the
    /// moment map for the right action, `mu(x . g) = Ad_g^T mu(x)`.
    pub fn equivariance_defect(&self, group: &StructureGroupModel, elements: &[Vec<f64>], points: &[Vec<f64>]) -> f64 {
        let d = group.dim();
        let mut worst: f64 = 0.0;
        for xi in elements {
            let g = group.exp(xi);
            for p in points {
                let x = constants(p);
                let lhs = reals(&(self.moment)(&(self.group_action)(&g, &x)));
                let mu = reals(&(self.moment)(&x));
                // (Ad_g^T mu)_k = sum_j mu_j (Ad_g e_k)_j
                for k in 0..d {
                    let col = group.adjoint(&g, &unit_vec(d, k));
                    let rhs: f64 = col.iter().zip(&mu).map(|(a, b)| a * b).sum();
                    worst = worst.max((lhs[k] - rhs).abs());
                }
            }
        }
        worst
    }
}

fn unit_vec(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// Geometric data of the associated bundle `P x_G F` on a patch.
pub fn ymh_geometric_data(principal: &PrincipalData, fiber: &HamiltonianFiber) -> Result<GeometricData> {
    let group = &principal.group;
    let probe = fiber.domain().samples(24, 0x7);
    let hom = fiber.homomorphism_defect(group, &probe)?;
    if hom > 1e-8 {
        return Err(Error::Invalid(format!("infinitesimal action is not a homomorphism (defect {hom:.3e})")));
    }
    let ham = fiber.hamiltonian_defect(group, &probe)?;
    if ham > 1e-8 {
        return Err(Error::Invalid(format!("action is not hamiltonian (defect {ham:.3e})")));
    }
    let space = FiberedSpace::new(principal.base().clone(), fiber.domain().clone());
    let (m, g) = (space.base_dim(), group.dim());
    let n = space.fiber_dim();

    let pi_field = fiber.pi.evaluator().clone();
    let pi_v = VerticalBivector::fiberwise(space.clone(), move |x| pi_field(x));

    let a = principal.connection.evaluator().clone();
    let act = fiber.action.clone();
    let conn = Connection::new(space.clone(), move |b, x| {
        let av = a(b);
        let mut out = vec![Dual::ZERO; n * m];
        for i in 0..m {
            let col = act(&av[i * g..(i + 1) * g], x);
            for r in 0..n {
                out[r * m + i] = col[r];
            }
        }
        out
    });

    let curv = principal.curvature()?;
    let mu = fiber.moment.clone();
    let pairs = combinations(m, 2).len();
    let omega = HorizontalForm::new(space.clone(), 2, move |e| {
        let f = curv.eval_dual(&e[..m]);
        let muv = mu(&e[m..]);
        (0..pairs).map(|c| (0..g).map(|k| muv[k] * f[c * g + k]).sum()).collect()
    });
    GeometricData::new(pi_v, conn, omega)
}

/// Residual of the pre-hamiltonian condition on `T*F`: the derivative of
/// `(ac_{exp(-t xi)})_* beta` at `t = 0` against `[d<mu, xi>, beta]_pi`,
/// maximized over a basis of the algebra and the test covector fields.
pub fn prehamiltonian_residual(
    fiber: &HamiltonianFiber,
    group: &StructureGroupModel,
    tests: &[Field],
    points: &[Vec<f64>],
) -> Result<f64> {
    let h = 1e-4;
    let n = fiber.domain().dim();
    let mut worst: f64 = 0.0;
    for i in 0..group.dim() {
        let xi = unit_vec(group.dim(), i);
        let dmu = exterior_derivative(&fiber.moment_component(xi.clone()))?;
        for beta in tests {
            beta.expect(Valence::COVECTOR)?;
            let rhs = koszul_bracket(&fiber.pi, &dmu, beta)?;
            for p in points {
                // (ac_{exp(-t xi)})_* beta = (ac_{exp(t xi)})^* beta
                let pulled = |t: f64| -> Vec<f64> {
                    let xi_t: Vec<f64> = xi.iter().map(|c| c * t).collect();
                    let g = group.exp(&xi_t);
                    let ga = fiber.group_action.clone();
                    let map = move |x: &[Dual]| ga(&g, x);
                    let x = constants(p);
                    let y = map(&x);
                    let jac = jacobian(&map, &x);
                    let b = beta.eval_dual(&y);
                    (0..n).map(|c| (0..n).map(|r| jac[r][c] * b[r]).sum::<Dual>().re()).collect()
                };
                let (plus, minus) = (pulled(h), pulled(-h));
                let r = rhs.eval(p);
                for c in 0..n {
                    worst = worst.max(((plus[c] - minus[c]) / (2.0 * h) - r[c]).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `[alpha, beta]_pi = L_{pi^# alpha} beta - L_{pi^# beta} alpha - d pi(alpha, beta)`.
pub fn koszul_bracket(pi: &Field, alpha: &Field, beta: &Field) -> Result<Field> {
    let sa = sharp(pi, alpha)?;
    let sb = sharp(pi, beta)?;
    let pab = crate::chart::ops::contract(&sa, beta)?;
    lie_derivative(&sa, beta)?.sub(&lie_derivative(&sb, alpha)?)?.sub(&exterior_derivative(&pab)?)
}

/// Default half-width of the fiber domains of the built-in examples.
pub const FIBER_HALF_WIDTH: f64 = 4.0;

/// A smooth real function of one variable.
pub type ScalarFn = Arc<dyn Fn(Dual) -> Dual + Send + Sync>;

/// `U(1)` on `F = R`, trivial action, `pi_F = 0`, moment map `f`.
pub fn trivial_line_fiber(f: ScalarFn) -> HamiltonianFiber {
    let domain = CoordinateDomain::cube(1, FIBER_HALF_WIDTH);
    HamiltonianFiber {
        pi: Field::zero(domain, Valence::BIVECTOR),
        action: Arc::new(|_, _| vec![Dual::ZERO]),
        group_action: Arc::new(|_, x| x.to_vec()),
        moment: Arc::new(move |x| vec![f(x[0])]),
    }
}

/// The Hopf fibration over one stereographic chart of the sphere, with the
/// connection whose curvature is the round area form, acting trivially on
/// `F = R` with moment map `f`.
pub fn hopf_example(f: ScalarFn) -> (PrincipalData, HamiltonianFiber) {
    let a = hopf_connection_form();
    let form = a.evaluator().clone();
    let connection = Field::new(chart_domain(), Valence::ValuedForm { degree: 1, values: 1 }, move |b| form(b));
    let principal = PrincipalData::new(StructureGroupModel::u1(), connection).expect("u(1)-valued form");
    (principal, trivial_line_fiber(f))
}

/// Hopf coupling data on one chart: `pi_V = 0`, flat, `omega_H = f(x) p^* omega`.
pub fn hopf_geometric_data(f: ScalarFn) -> Result<GeometricData> {
    let (p, h) = hopf_example(f);
    ymh_geometric_data(&p, &h)
}

/// The coadjoint representation on `so(3)* = R^3`: `pi^{ij} = eps^{ijk} x_k`,
/// `rho(xi)(x) = x x xi`, `x . g = g^T x`, `mu = id`.
pub fn so3_coadjoint_fiber(half_width: f64) -> HamiltonianFiber {
    let domain = CoordinateDomain::cube(3, half_width);
    HamiltonianFiber {
        pi: so3_bivector(domain),
        action: Arc::new(|xi, x| cross(x, xi)),
        group_action: Arc::new(|g, x| (0..3).map(|j| (0..3).map(|i| x[i] * g[(i, j)]).sum()).collect()),
        moment: Arc::new(|x| x.to_vec()),
    }
}

/// The Lie-Poisson bivector of `so(3)*` on a 3-dimensional domain.
pub fn so3_bivector(domain: CoordinateDomain) -> Field {
    Field::bivector(domain, |x| vec![x[2], -x[1], x[0]])
}

pub(crate) fn cross(a: &[Dual], b: &[Dual]) -> Vec<Dual> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// An `so(3)`-valued connection form on `R^m` with polynomial and
/// trigonometric coefficients, curved in every coordinate plane.
pub fn so3_sample_connection(base_dim: usize) -> PrincipalData {
    let domain = CoordinateDomain::cube(base_dim, 1.5);
    let connection = Field::new(domain, Valence::ValuedForm { degree: 1, values: 3 }, move |b| {
        let mut out = Vec::with_capacity(3 * base_dim);
        for i in 0..base_dim {
            let s = b[(i + 1) % base_dim];
            let t = b[i];
            out.push(s * 0.7 + t * t * 0.2);
            out.push((s * 1.3).sin() * 0.5);
            out.push(t * s * 0.4 - 0.3);
        }
        out
    });
    PrincipalData::new(StructureGroupModel::so3(), connection).expect("so(3)-valued form")
}

/// A `U(1)` connection `c b_1 db_2` on the torus chart `(0, 2 pi)^2` acting
/// trivially on `F = R` with moment map `x`.
pub fn trivial_torus(c: f64) -> (PrincipalData, HamiltonianFiber) {
    let two_pi = 2.0 * std::f64::consts::PI;
    let domain = CoordinateDomain::new(vec![(0.0, two_pi), (0.0, two_pi)]).expect("torus chart");
    let connection = Field::new(domain, Valence::ValuedForm { degree: 1, values: 1 }, move |b| vec![Dual::ZERO, b[0] * c]);
    let principal = PrincipalData::new(StructureGroupModel::u1(), connection).expect("u(1)-valued form");
    (principal, trivial_line_fiber(Arc::new(|x| x)))
}

/// Names and one-line descriptions of the built-in examples.
pub const REGISTRY: [(&str, &str); 3] = [
    ("hopf", "Hopf fibration over S^2 acting trivially on R with moment map f; omega_H = f(x) omega"),
    ("so3-coadjoint", "SO(3) connection on R^3 acting on so(3)* by the coadjoint action, mu = id"),
    ("trivial-torus", "trivial U(1) bundle over the torus with connection b1 db2, trivial action on R"),
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::sphere::{transition, StereoChart};
    use crate::coupling::{check_coupling_conditions, leaf_two_form, assemble_dirac};

    #[test]
    fn group_models_are_consistent() {
        for g in [StructureGroupModel::u1(), StructureGroupModel::so3()] {
            assert!(g.consistency_defect() < 1e-12);
            let zero = vec![0.0; g.dim()];
            assert!((g.exp(&zero) - DMatrix::identity(g.matrix_dim(), g.matrix_dim())).amax() < 1e-15);
        }
        let so3 = StructureGroupModel::so3();
        assert_eq!(so3.structure_constants()[0][1], vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn coadjoint_fiber_is_hamiltonian() {
        let g = StructureGroupModel::so3();
        let h = so3_coadjoint_fiber(2.0);
        let pts = h.domain().samples(16, 1);
        assert!(h.homomorphism_defect(&g, &pts).unwrap() < 1e-12);
        assert!(h.hamiltonian_defect(&g, &pts).unwrap() < 1e-12);
        let elems = vec![vec![0.3, -0.2, 0.9], vec![1.1, 0.4, 0.0]];
        assert!(h.equivariance_defect(&g, &elems, &pts) < 1e-12);
    }

    #[test]
    fn hopf_data_is_flat_with_scaled_area() {
        let d = hopf_geometric_data(Arc::new(|x| x * x * x - x * 2.0)).unwrap();
        let p = [0.3, -0.5, 1.2];
        let e = constants(&p);
        let (b, x) = d.space().split(&e);
        assert!(reals(&d.connection.coefficients(b, x)).iter().all(|a| *a == 0.0));
        let area = crate::chart::sphere::area_density(&e[..2]).re();
        let f = 1.2f64.powi(3) - 2.4;
        assert!((d.omega_h.eval(&p)[0] - f * area).abs() < 1e-14);
        let r = check_coupling_conditions(&d, &d.space().samples(32, 2), 1e-8).unwrap();
        assert!(r.is_coupling());
        let frame = assemble_dirac(&d, &p);
        let leaf = leaf_two_form(&frame, &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert!((leaf.value - f * area).abs() < 1e-12);
    }

    #[test]
    fn zero_moment_gives_zero_form() {
        let d = hopf_geometric_data(Arc::new(|_| Dual::ZERO)).unwrap();
        assert_eq!(d.omega_h.eval(&[0.1, 0.2, 0.3]), vec![0.0]);
    }

    #[test]
    fn so3_ymh_is_coupling() {
        let p = so3_sample_connection(3);
        assert!(p.bianchi_residual(&p.base().samples(16, 1)).unwrap() < 1e-12);
        let d = ymh_geometric_data(&p, &so3_coadjoint_fiber(2.0)).unwrap();
        let r = check_coupling_conditions(&d, &d.space().samples(24, 4), 1e-8).unwrap();
        assert!(r.is_coupling(), "{r:?}");
    }

    #[test]
    fn hopf_curvature_is_gauge_covariant() {
        let (p, _) = hopf_example(Arc::new(|x| x));
        let t = PatchTransition {
            chart_map: Arc::new(|b| transition(b).to_vec()),
            group_element: Arc::new(|b| StructureGroupModel::u1().exp(&[-2.0 * b[1].atan2(b[0])])),
        };
        let pts: Vec<Vec<f64>> = chart_domain()
            .samples(32, 3)
            .into_iter()
            .filter(|b| b[0].hypot(b[1]) > 0.3)
            .collect();
        assert!(curvature_transition_residual(&p, &p, &t, &pts).unwrap() < 1e-12);
        let _ = StereoChart::BOTH;
    }

    #[test]
    fn prehamiltonian_condition() {
        let g = StructureGroupModel::so3();
        let h = so3_coadjoint_fiber(2.0);
        let d = h.domain().clone();
        let tests = vec![
            Field::covector(d.clone(), |x| vec![x[1] * x[2], x[0].sin(), x[2] * x[2]]),
            Field::covector(d.clone(), |x| vec![Dual::ONE, x[0] * x[1], x[1].exp()]),
        ];
        let r = prehamiltonian_residual(&h, &g, &tests, &d.samples(8, 1)).unwrap();
        assert!(r < 1e-6, "{r}");
        let line = trivial_line_fiber(Arc::new(|x| x * x));
        let tests = vec![Field::covector(line.domain().clone(), |x| vec![x[0].cos()])];
        let r = prehamiltonian_residual(&line, &StructureGroupModel::u1(), &tests, &line.domain().samples(8, 1)).unwrap();
        assert_eq!(r, 0.0);
    }
}
