//! Two-chart stereographic atlas of the unit sphere.
//!
//! `South` projects from the north pole and is centred at the south pole:
//! `(u, v) = (X, -Y) / (1 - Z)`. `North` projects from the south pole:
//! `(u, v) = (X, Y) / (1 + Z)`. Both are oriented by the outward normal and
//! the transition between them is `(u, v) -> (u, -v) / (u^2 + v^2)`.

use std::f64::consts::PI;

use super::domain::{CoordinateDomain, DomainKind};
use super::field::Field;
use crate::dual::{constants, jacobian, Dual};
use crate::quadrature::gauss_legendre_on;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StereoChart {
    South = 0,
    North = 1,
}

impl StereoChart {
    pub const BOTH: [StereoChart; 2] = [StereoChart::South, StereoChart::North];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> StereoChart {
        match self {
            StereoChart::South => StereoChart::North,
            StereoChart::North => StereoChart::South,
        }
    }

    /// The chart used for a point of the sphere: the one whose centre lies in
    /// the same closed hemisphere.
    pub fn for_point(xyz: &[f64]) -> StereoChart {
        if xyz[2] < 0.0 {
            StereoChart::South
        } else {
            StereoChart::North
        }
    }
}

/// Half-width of the default chart domain. Every point of the closed
/// hemisphere around the chart centre has `|u|, |v| <= 1`.
pub const CHART_HALF_WIDTH: f64 = 2.0;

pub fn chart_domain() -> CoordinateDomain {
    CoordinateDomain::with_kind(vec![(-CHART_HALF_WIDTH, CHART_HALF_WIDTH); 2], DomainKind::SphereStereo)
        .expect("valid chart")
}

pub fn to_chart(chart: StereoChart, xyz: &[Dual]) -> [Dual; 2] {
    match chart {
        StereoChart::South => {
            let d = 1.0 - xyz[2];
            [xyz[0] / d, -xyz[1] / d]
        }
        StereoChart::North => {
            let d = 1.0 + xyz[2];
            [xyz[0] / d, xyz[1] / d]
        }
    }
}

pub fn from_chart(chart: StereoChart, uv: &[Dual]) -> [Dual; 3] {
    let r2 = uv[0] * uv[0] + uv[1] * uv[1];
    let d = 1.0 + r2;
    match chart {
        StereoChart::South => [uv[0] * 2.0 / d, -(uv[1] * 2.0) / d, (r2 - 1.0) / d],
        StereoChart::North => [uv[0] * 2.0 / d, uv[1] * 2.0 / d, (1.0 - r2) / d],
    }
}

/// Coordinate change between the two charts. It is an involution.
pub fn transition(uv: &[Dual]) -> [Dual; 2] {
    let r2 = uv[0] * uv[0] + uv[1] * uv[1];
    [uv[0] / r2, -uv[1] / r2]
}

/// Coefficient of the round area form `4 / (1 + u^2 + v^2)^2 du^dv`; the
/// same expression holds in both charts.
pub fn area_density(uv: &[Dual]) -> Dual {
    let d = 1.0 + uv[0] * uv[0] + uv[1] * uv[1];
    4.0 / (d * d)
}

/// The round area form on a chart.
pub fn area_form() -> Field {
    Field::form(chart_domain(), 2, |uv| vec![area_density(uv)])
}

/// The `u(1)`-valued connection form `2 (u dv - v du) / (1 + u^2 + v^2)` of the
/// Hopf fibration in either chart, whose differential is the area form.
pub fn hopf_connection_form() -> Field {
    Field::covector(chart_domain(), |uv| {
        let d = 1.0 + uv[0] * uv[0] + uv[1] * uv[1];
        vec![-(uv[1] * 2.0) / d, uv[0] * 2.0 / d]
    })
}

/// Transports a 2-form coefficient from one chart to the other:
/// `w_target(T(p)) = w_source(p) / det DT(p)` with `det DT = 1 / |p|^4`.
pub fn transport_density(source_value: Dual, uv: &[Dual]) -> Dual {
    let r2 = uv[0] * uv[0] + uv[1] * uv[1];
    source_value * r2 * r2
}

/// Point on the sphere in polar angle `theta` and azimuth `phi`.
pub fn spherical(theta: Dual, phi: Dual) -> [Dual; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

/// Integrates a 2-form over the sphere with the outward orientation. The
/// form is given by its `du^dv` coefficient in each chart. Uses
/// Gauss-Legendre in the polar angle and the trapezoid rule in the azimuth,
/// so the poles are never sampled.
pub fn integrate_two_form<F>(density: F, n_theta: usize, n_phi: usize) -> f64
where
    F: Fn(StereoChart, &[f64]) -> f64,
{
    let (thetas, weights) = gauss_legendre_on(n_theta, 0.0, PI);
    let dphi = 2.0 * PI / n_phi as f64;
    let mut total = 0.0;
    for (theta, wt) in thetas.iter().zip(&weights) {
        let mut ring = 0.0;
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            let xyz = spherical(Dual::constant(*theta), Dual::constant(phi));
            let chart = StereoChart::for_point(&[xyz[0].re(), xyz[1].re(), xyz[2].re()]);
            let map = |a: &[Dual]| to_chart(chart, &spherical(a[0], a[1])).to_vec();
            let angles = constants(&[*theta, phi]);
            let uv: Vec<f64> = map(&angles).iter().map(Dual::re).collect();
            let jac = jacobian(map, &angles);
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            ring += density(chart, &uv) * det.re();
        }
        total += wt * ring * dphi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(u: f64, v: f64) -> [Dual; 2] {
        [Dual::constant(u), Dual::constant(v)]
    }

    #[test]
    fn charts_invert() {
        for chart in StereoChart::BOTH {
            for (u, v) in [(0.3, -0.4), (1.5, 0.2), (-0.9, -1.1)] {
                let xyz = from_chart(chart, &pt(u, v));
                let norm: f64 = xyz.iter().map(|c| c.re() * c.re()).sum();
                assert!((norm - 1.0).abs() < 1e-14);
                let back = to_chart(chart, &xyz);
                assert!((back[0].re() - u).abs() < 1e-14 && (back[1].re() - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transition_matches_the_charts() {
        for (u, v) in [(0.3, -0.4), (1.5, 0.2), (-0.9, -1.1)] {
            let xyz = from_chart(StereoChart::South, &pt(u, v));
            let direct = to_chart(StereoChart::North, &xyz);
            let via = transition(&pt(u, v));
            assert!((direct[0].re() - via[0].re()).abs() < 1e-13);
            assert!((direct[1].re() - via[1].re()).abs() < 1e-13);
            let twice = transition(&via);
            assert!((twice[0].re() - u).abs() < 1e-12 && (twice[1].re() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn area_form_is_chart_independent() {
        for (u, v) in [(0.3, -0.4), (1.5, 0.2)] {
            let p = pt(u, v);
            let q = transition(&p);
            let moved = transport_density(area_density(&p), &p);
            assert!((moved.re() - area_density(&q).re()).abs() < 1e-14);
        }
    }

    #[test]
    fn hopf_form_differentiates_to_area() {
        let d = crate::chart::ops::exterior_derivative(&hopf_connection_form()).unwrap();
        for (u, v) in [(0.3, -0.4), (1.5, 0.2)] {
            assert!((d.eval(&[u, v])[0] - area_density(&pt(u, v)).re()).abs() < 1e-14);
        }
    }

    #[test]
    fn total_area() {
        let a = integrate_two_form(|_, uv| area_density(&pt(uv[0], uv[1])).re(), 32, 64);
        assert!((a - 4.0 * PI).abs() < 1e-10, "{a}");
    }
}
