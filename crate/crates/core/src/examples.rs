//! Named instances of geometric data used by the acceptance suite and the
//! command line front end.

use std::sync::Arc;

use crate::apath::{SectionAlgebra, SectionFamily};
use crate::chart::{CoordinateDomain, Field};
use crate::coupling::{vertical_covector, GeometricData, VerticalBivector};
use crate::dual::{gradient, Dual};
use crate::error::{Error, Result};
use crate::fibration::{Connection, FiberedSpace, HorizontalForm};
use crate::yang_mills::{
    hopf_geometric_data, so3_coadjoint_fiber, so3_sample_connection, trivial_torus, ymh_geometric_data, ScalarFn,
    StructureGroupModel, FIBER_HALF_WIDTH,
};

fn space(m: usize, n: usize, half_width: f64) -> FiberedSpace {
    FiberedSpace::new(CoordinateDomain::cube(m, 1.5), CoordinateDomain::cube(n, half_width))
}

/// Default moment map of the Hopf example: `f(x) = x^3 / 2 - 2 x + 1`.
pub fn default_hopf_moment() -> ScalarFn {
    Arc::new(|x| x * x * x * 0.5 - x * 2.0 + 1.0)
}

pub fn hopf(f: ScalarFn) -> GeometricData {
    hopf_geometric_data(f).expect("hopf data")
}

/// Yang-Mills-Higgs data of the sample `SO(3)` connection on `R^3` and the
/// coadjoint fiber.
pub fn so3_coadjoint() -> GeometricData {
    ymh_geometric_data(&so3_sample_connection(3), &so3_coadjoint_fiber(FIBER_HALF_WIDTH)).expect("so3 data")
}

pub fn torus() -> GeometricData {
    let (p, f) = trivial_torus(1.0);
    ymh_geometric_data(&p, &f).expect("torus data")
}

/// `B = F = R`, `pi_V = 0`, `omega_H = 0`, transport `x' = c x`.
pub fn linear_transport(c: f64) -> GeometricData {
    let space = FiberedSpace::new(CoordinateDomain::cube(1, 3.0), CoordinateDomain::cube(1, 50.0));
    let conn = Connection::new(space.clone(), move |_, x| vec![x[0] * c]);
    GeometricData::new(VerticalBivector::zero(space.clone()), conn, HorizontalForm::zero(space, 2)).expect("valid")
}

/// `B = F = R^2`, `pi_V = d_1 ^ d_2`, `omega_H = f(x) db1 ^ db2` and
/// `h(d_2) = d_2 + b_1 X_f` with `f = x1^2 / 2 + sin x2`.
pub fn hamiltonian_shear(scale: f64) -> GeometricData {
    let s = space(2, 2, 1.5);
    let f = |x: &[Dual]| x[0] * x[0] * 0.5 + x[1].sin();
    let pi = VerticalBivector::constant(s.clone(), vec![1.0]);
    let conn = Connection::new(s.clone(), move |b, x| {
        let g = gradient(f, x);
        vec![Dual::ZERO, -(g[1] * b[0]), Dual::ZERO, g[0] * b[0]]
    });
    let omega = HorizontalForm::new(s, 2, move |e| vec![f(&e[2..]) * scale]);
    GeometricData::new(pi, conn, omega).expect("valid")
}

/// A flat `so(3)*` fibration over `R^2` with `omega_H = (1 + r^2) db1 ^ db2`.
pub fn so3_casimir(flat_perturbation: f64) -> GeometricData {
    let s = space(2, 3, 2.0);
    let conn = Connection::new(s.clone(), move |b, x| {
        // d/db_1 -> eps b_2 (x x e_3), zero when eps = 0
        let e = b[1] * flat_perturbation;
        vec![x[1] * e, Dual::ZERO, -(x[0] * e), Dual::ZERO, Dual::ZERO, Dual::ZERO]
    });
    GeometricData::new(
        VerticalBivector::fiberwise(s.clone(), |x| vec![x[2], -x[1], x[0]]),
        conn,
        HorizontalForm::new(s, 2, |e| vec![(e[2] * e[2] + e[3] * e[3] + e[4] * e[4]) + 1.0]),
    )
    .expect("valid")
}

/// `so(3)*` with a deformed bracket `pi^{23} = x1 (1 + x3 / 2)` that is not
/// Poisson.
pub fn deformed_lie_poisson() -> GeometricData {
    let s = space(1, 3, 2.0);
    GeometricData::new(
        VerticalBivector::fiberwise(s.clone(), |x| vec![x[2], -x[1], x[0] * (x[2] * 0.5 + 1.0)]),
        Connection::flat(s.clone()),
        HorizontalForm::zero(s, 2),
    )
    .expect("valid")
}

/// `B = R^2`, `F = R`, curved connection `h(d_2) = d_2 + b_1 d_x` with
/// `pi_V = 0` and `omega_H = 0`.
pub fn curved_without_form() -> GeometricData {
    let s = space(2, 1, 1.5);
    let conn = Connection::new(s.clone(), |b, _| vec![Dual::ZERO, b[0]]);
    GeometricData::new(VerticalBivector::zero(s.clone()), conn, HorizontalForm::zero(s, 2)).expect("valid")
}

/// Product of a base form and a fiber form: `Gamma = 0`,
/// `omega_H = (b1 b2 + 2) db1 ^ db2`, `pi_V = -(1 + |x|^2) d_1 ^ d_2`.
pub fn split_product() -> GeometricData {
    let s = space(2, 2, 1.5);
    GeometricData::new(
        VerticalBivector::new(s.clone(), |e| vec![-(e[2] * e[2] + e[3] * e[3] + 1.0)]),
        Connection::flat(s.clone()),
        HorizontalForm::new(s, 2, |e| vec![e[0] * e[1] + 2.0]),
    )
    .expect("valid")
}

/// The coupling form `g(x1) db1^db2 + dx1^dx2 + g'(x1) b1 dx1^db2` with
/// `g(x) = 0.3 x^3 - x + 2`: `pi_V = -d_1 ^ d_2`, `h(d_2) = d_2 - g'(x1) b1 d_2`,
/// `omega_H = g(x1) db1 ^ db2`. `twist` scales the connection; only `1` is
/// coupling.
pub fn twisted(twist: f64) -> GeometricData {
    let s = space(2, 2, 1.5);
    GeometricData::new(
        VerticalBivector::constant(s.clone(), vec![-1.0]),
        Connection::new(s.clone(), move |b, x| {
            vec![Dual::ZERO, Dual::ZERO, Dual::ZERO, -((x[0] * x[0] * 0.9 - 1.0) * b[0] * twist)]
        }),
        HorizontalForm::new(s, 2, |e| vec![e[2] * e[2] * e[2] * 0.3 - e[2] + 2.0]),
    )
    .expect("valid")
}

/// An instance with its expected verdict.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: &'static str,
    pub description: &'static str,
    pub data: GeometricData,
    pub coupling: bool,
}

/// The geometric data suite: the examples of coupling forms, coupling
/// Poisson structures and Yang-Mills-Higgs data, plus broken perturbations.
pub fn suite() -> Vec<Instance> {
    let i = |name, description, data, coupling| Instance { name, description, data, coupling };
    vec![
        i("hopf", "Hopf fibration, trivial action on R, omega_H = f(x) omega", hopf(default_hopf_moment()), true),
        i("so3-coadjoint", "SO(3) connection on R^3, coadjoint fiber so(3)*", so3_coadjoint(), true),
        i("trivial-torus", "trivial U(1) bundle over the torus, trivial action on R", torus(), true),
        i("linear-transport", "flat line bundle over R with transport x' = 2x", linear_transport(2.0), true),
        i("hamiltonian-shear", "symplectic R^2 fibers with hamiltonian holonomy", hamiltonian_shear(1.0), true),
        i("so3-casimir", "flat so(3)* fibration with Casimir-valued omega_H", so3_casimir(0.0), true),
        i("split-product", "product of a base 2-form and a symplectic fiber", split_product(), true),
        i("twisted", "closed coupling form with a compensating connection", twisted(1.0), true),
        i("broken-shear", "hamiltonian shear with omega_H doubled", hamiltonian_shear(2.0), false),
        i("broken-lie-poisson", "so(3)* with a bracket violating Jacobi", deformed_lie_poisson(), false),
        i("broken-curvature", "curved connection with omega_H = 0", curved_without_form(), false),
        i("broken-twist", "twisted form with the connection scaled by 1/2", twisted(0.5), false),
        i("broken-casimir", "so(3)* fibration with a curved connection", so3_casimir(0.4), false),
    ]
}

pub fn instance(name: &str) -> Result<Instance> {
    suite()
        .into_iter()
        .find(|i| i.name == name)
        .ok_or_else(|| Error::Invalid(format!("unknown example {name:?}")))
}

/// Base vector fields `v, w` and vertical covector fields `alpha, beta` for
/// bracket checks on any fibration.
pub fn bracket_sections(space: &FiberedSpace) -> (Field, Field, Field, Field) {
    let (m, n) = (space.base_dim(), space.fiber_dim());
    let v = Field::vector(space.base().clone(), move |b| {
        (0..m).map(|i| (b[(i + 1) % m] * 0.7).sin() + b[i] * b[i] * 0.3 + 1.0).collect()
    });
    let w = Field::vector(space.base().clone(), move |b| (0..m).map(|i| b[0] * b[i] * 0.5 - (i as f64) * 0.2).collect());
    let alpha = vertical_covector(space, move |e| {
        let k = e.len();
        (0..n).map(|a| e[m + a] * e[k - 1] * 0.4 + e[0] * 0.3 + 0.1).collect()
    });
    let beta = vertical_covector(space, move |e| (0..n).map(|a| (e[m + a] * 0.6).cos() + e[0] * e[m] * 0.2).collect());
    (v, w, alpha, beta)
}

/// The `so(3)` section family of the flow-commutation check:
/// `alpha = (3 cos 2t + eps, 4 sin(t + eps), 2 eps t - 1)`, `beta_0 = (eps / 2, -eps, eps^2)`.
pub fn so3_flow_family() -> SectionFamily {
    SectionFamily::new(
        SectionAlgebra::Lie(StructureGroupModel::so3()),
        |e, t| vec![(t * 2.0).cos() * 3.0 + e, (t + e).sin() * 4.0, e * t * 2.0 - 1.0],
        |e| vec![e * 0.5, -e, e * e],
    )
    .expect("so(3) family")
}

/// Names and one-line descriptions of every built-in example.
pub fn registry() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> =
        crate::yang_mills::REGISTRY.iter().map(|(n, d)| (n.to_string(), d.to_string())).collect();
    out.extend(crate::monodromy::REGISTRY.iter().map(|(n, d)| (n.to_string(), d.to_string())));
    for i in suite() {
        if !out.iter().any(|(n, _)| n == i.name) {
            out.push((i.name.to_string(), i.description.to_string()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{check_coupling_conditions, coupling_generators, dirac_closure_residual};

    #[test]
    fn suite_verdicts() {
        for inst in suite() {
            let pts = inst.data.space().samples(12, 11);
            let report = check_coupling_conditions(&inst.data, &pts, 1e-6).unwrap();
            let closure = dirac_closure_residual(&inst.data, &coupling_generators(&inst.data).unwrap(), &pts).unwrap();
            assert_eq!(report.is_coupling(), inst.coupling, "{}: {:?}", inst.name, report.residuals);
            assert_eq!(closure < 1e-6, inst.coupling, "{}: {closure}", inst.name);
        }
    }

    #[test]
    fn registry_has_the_models() {
        let names: Vec<String> = registry().into_iter().map(|(n, _)| n).collect();
        for n in ["hopf", "so3-coadjoint", "round-sphere", "cap", "trivial-torus", "linear-transport"] {
            assert!(names.iter().any(|m| m == n), "{n}");
        }
        assert!(instance("nope").is_err());
    }
}
