//! A-paths of the coupling algebroid, their splitting into a base path and a
//! vertical covector path, and the evolution equation for finite-dimensional
//! algebras.
//!
//! Paths live on grids of nodes `t_0 <= ... <= t_N` in `[0, 1]`. A repeated
//! time marks a junction left by concatenation; finite differences and
//! transports never step across one.

use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::chart::CoordinateDomain;
use crate::coupling::{GeometricData, ODE_TOLERANCE};
use crate::dual::{constants, derivative, jacobian, reals, Dual};
use crate::error::{Error, Result};
use crate::fibration::{Connection, FiberedSpace};
use crate::yang_mills::{HamiltonianFiber, StructureGroupModel};

/// Junction gap above which two paths are not composable.
pub const COMPOSABLE_TOLERANCE: f64 = 1e-8;

/// A path sampled at nodes together with its exact velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    velocities: Vec<Vec<f64>>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, velocities: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() < 2 || points.len() != times.len() || velocities.len() != times.len() {
            return Err(Error::Invalid("grid path needs matching nodes, points and velocities".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Invalid("grid times must be non-decreasing".into()));
        }
        Ok(GridPath { times, points, velocities })
    }

    /// Samples a smooth path at `intervals + 1` uniform nodes.
    pub fn sample<F>(f: F, intervals: usize) -> Self
    where
        F: Fn(Dual) -> Vec<Dual>,
    {
        let times: Vec<f64> = (0..=intervals).map(|k| k as f64 / intervals as f64).collect();
        let (points, velocities) = times
            .iter()
            .map(|t| {
                let (p, v) = derivative(&f, Dual::constant(*t));
                (reals(&p), reals(&v))
            })
            .unzip();
        GridPath { times, points, velocities }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn velocities(&self) -> &[Vec<f64>] {
        &self.velocities
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.points[self.len() - 1]
    }

    /// `t -> self(1 - t)`.
    pub fn reversed(&self) -> Self {
        GridPath {
            times: self.times.iter().rev().map(|t| 1.0 - t).collect(),
            points: self.points.iter().rev().cloned().collect(),
            velocities: self.velocities.iter().rev().map(|v| negate(v)).collect(),
        }
    }

    /// Runs `self` on `[0, 1/2]` and `next` on `[1/2, 1]`.
    pub fn then(&self, next: &GridPath) -> Self {
        let mut out = GridPath { times: Vec::new(), points: Vec::new(), velocities: Vec::new() };
        for (path, offset) in [(self, 0.0), (next, 0.5)] {
            out.times.extend(path.times.iter().map(|t| offset + t / 2.0));
            out.points.extend(path.points.iter().cloned());
            out.velocities.extend(path.velocities.iter().map(|v| scaled(v, 2.0)));
        }
        out
    }

    /// Maximal node ranges with strictly increasing times.
    pub fn segments(&self) -> Vec<Range<usize>> {
        segments(&self.times)
    }

    /// Cubic Hermite position and `d/dsigma` on interval `i` at local
    /// parameter `sigma`.
    fn hermite(&self, i: usize, sigma: f64) -> (Vec<f64>, Vec<f64>) {
        let h = self.times[i + 1] - self.times[i];
        let s = sigma;
        let (h00, h10, h01, h11) = (2.0 * s.powi(3) - 3.0 * s * s + 1.0, s.powi(3) - 2.0 * s * s + s, -2.0 * s.powi(3) + 3.0 * s * s, s.powi(3) - s * s);
        let (d00, d10, d01, d11) = (6.0 * s * s - 6.0 * s, 3.0 * s * s - 4.0 * s + 1.0, -6.0 * s * s + 6.0 * s, 3.0 * s * s - 2.0 * s);
        let (p0, p1, v0, v1) = (&self.points[i], &self.points[i + 1], &self.velocities[i], &self.velocities[i + 1]);
        let pos = (0..p0.len()).map(|a| h00 * p0[a] + h10 * h * v0[a] + h01 * p1[a] + h11 * h * v1[a]).collect();
        let vel = (0..p0.len()).map(|a| d00 * p0[a] + d10 * h * v0[a] + d01 * p1[a] + d11 * h * v1[a]).collect();
        (pos, vel)
    }
}

fn segments(times: &[f64]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..times.len() {
        if times[k] <= times[k - 1] {
            out.push(start..k);
            start = k;
        }
    }
    out.push(start..times.len());
    out
}

fn negate(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

fn scaled(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Fourth-order finite-difference derivative of uniformly spaced samples.
fn fd_derivative(values: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let n = values.len();
    assert!(n >= 5, "finite differences need at least five nodes");
    let comb = |c: [f64; 5], idx: [usize; 5]| -> Vec<f64> {
        (0..values[0].len()).map(|a| (0..5).map(|k| c[k] * values[idx[k]][a]).sum::<f64>() / (12.0 * h)).collect()
    };
    (0..n)
        .map(|i| match i {
            0 => comb([-25.0, 48.0, -36.0, 16.0, -3.0], [0, 1, 2, 3, 4]),
            1 => comb([-3.0, -10.0, 18.0, -6.0, 1.0], [0, 1, 2, 3, 4]),
            _ if i == n - 2 => negate(&comb([-3.0, -10.0, 18.0, -6.0, 1.0], [n - 1, n - 2, n - 3, n - 4, n - 5])),
            _ if i == n - 1 => negate(&comb([-25.0, 48.0, -36.0, 16.0, -3.0], [n - 1, n - 2, n - 3, n - 4, n - 5])),
            _ => comb([1.0, -8.0, 0.0, 8.0, -1.0], [i - 2, i - 1, i, i + 1, i + 2]),
        })
        .collect()
}

/// Max deviation between finite-difference velocities of `values` and the
/// claimed `velocities`, segment by segment.
fn velocity_residual(times: &[f64], values: &[Vec<f64>], velocities: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for seg in segments(times) {
        let h = (times[seg.end - 1] - times[seg.start]) / (seg.len() - 1) as f64;
        let d = fd_derivative(&values[seg.clone()], h);
        for (k, dk) in seg.zip(d) {
            worst = worst.max(max_diff(&dk, &velocities[k]));
        }
    }
    worst
}

fn transport_interval(conn: &Connection, base: &GridPath, i: usize, x: &[Dual], forward: bool) -> Vec<Dual> {
    let rhs = |sigma: f64, y: &[Dual]| {
        let (b, v) = base.hermite(i, sigma);
        conn.apply(&constants(&b), y, &constants(&v))
    };
    let (s0, h) = if forward { (0.0, 1.0) } else { (1.0, -1.0) };
    let add = |y: &[Dual], k: &[Dual], c: f64| -> Vec<Dual> { y.iter().zip(k).map(|(a, b)| *a + *b * c).collect() };
    let k1 = rhs(s0, x);
    let k2 = rhs(s0 + h / 2.0, &add(x, &k1, h / 2.0));
    let k3 = rhs(s0 + h / 2.0, &add(x, &k2, h / 2.0));
    let k4 = rhs(s0 + h, &add(x, &k3, h));
    (0..x.len()).map(|a| x[a] + (k1[a] + k2[a] * 2.0 + k3[a] * 2.0 + k4[a]) * (h / 6.0)).collect()
}

/// Fiber transport along a grid path from node `from` to node `to`, one RK4
/// step per interval.
pub fn grid_transport(conn: &Connection, base: &GridPath, x: &[Dual], from: usize, to: usize) -> Result<Vec<Dual>> {
    let fiber = conn.space().fiber();
    let mut cur = x.to_vec();
    let inside = |y: &[Dual], k: usize| {
        if fiber.contains(&reals(y)) {
            Ok(())
        } else {
            Err(Error::IncompleteTransport { time: base.times[k] })
        }
    };
    inside(&cur, from)?;
    if to >= from {
        for i in from..to {
            if base.times[i + 1] > base.times[i] {
                cur = transport_interval(conn, base, i, &cur, true);
            }
            inside(&cur, i + 1)?;
        }
    } else {
        for i in (to..from).rev() {
            if base.times[i + 1] > base.times[i] {
                cur = transport_interval(conn, base, i, &cur, false);
            }
            inside(&cur, i)?;
        }
    }
    Ok(cur)
}

/// Transport together with its Jacobian `J[i][j] = d phi_i / d x_j`.
fn transport_with_jacobian(conn: &Connection, base: &GridPath, x: &[f64], from: usize, to: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let y = grid_transport(conn, base, &constants(x), from, to)?;
    let jac = jacobian(|p| grid_transport(conn, base, p, from, to).unwrap_or_else(|_| p.to_vec()), &constants(x));
    let n = x.len();
    Ok((reals(&y), DMatrix::from_fn(n, n, |i, j| jac[i][j].re())))
}

/// `c o J`, i.e. `J^T c`.
fn pull(c: &[f64], j: &DMatrix<f64>) -> Vec<f64> {
    (j.transpose() * DVector::from_column_slice(c)).iter().copied().collect()
}

/// `c o J^{-1}`.
fn push(c: &[f64], j: &DMatrix<f64>, point: &[f64]) -> Result<Vec<f64>> {
    j.transpose()
        .lu()
        .solve(&DVector::from_column_slice(c))
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::NotInvertible { point: point.to_vec() })
}

/// An A-path of the coupling algebroid `L`: base points `gamma(t)` in `E`
/// and components `a = h^*(u) + a_V`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebroidPath {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    base_velocity: Vec<Vec<f64>>,
    vertical: Vec<Vec<f64>>,
}

impl AlgebroidPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>, base_velocity: Vec<Vec<f64>>, vertical: Vec<Vec<f64>>) -> Result<Self> {
        let n = times.len();
        if n < 5 || points.len() != n || base_velocity.len() != n || vertical.len() != n {
            return Err(Error::Invalid("A-path needs at least five nodes with matching components".into()));
        }
        if segments(&times).iter().any(|s| s.len() < 5) {
            return Err(Error::Invalid("every A-path segment needs at least five nodes".into()));
        }
        Ok(AlgebroidPath { times, points, base_velocity, vertical })
    }

    /// Integrates `gamma' = h(u(t)) + pi^# a_V(t)` from `e0` by RK4.
    pub fn integrate<U, V>(data: &GeometricData, e0: &[f64], u: U, a_v: V, intervals: usize) -> Result<Self>
    where
        U: Fn(f64) -> Vec<f64>,
        V: Fn(f64) -> Vec<f64>,
    {
        let total = data.space().total();
        let h = 1.0 / intervals as f64;
        let field = |t: f64, e: &[f64]| anchor_values(data, e, &u(t), &a_v(t));
        let mut cur = e0.to_vec();
        let mut points = vec![cur.clone()];
        for k in 0..intervals {
            let t = k as f64 * h;
            let k1 = field(t, &cur);
            let k2 = field(t + h / 2.0, &axpy(&cur, &k1, h / 2.0));
            let k3 = field(t + h / 2.0, &axpy(&cur, &k2, h / 2.0));
            let k4 = field(t + h, &axpy(&cur, &k3, h));
            cur = (0..cur.len()).map(|a| cur[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])).collect();
            if !total.contains(&cur) {
                return Err(Error::IncompleteTransport { time: t + h });
            }
            points.push(cur.clone());
        }
        let times: Vec<f64> = (0..=intervals).map(|k| k as f64 * h).collect();
        let base_velocity = times.iter().map(|t| u(*t)).collect();
        let vertical = times.iter().map(|t| a_v(*t)).collect();
        AlgebroidPath::new(times, points, base_velocity, vertical)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn base_velocity(&self) -> &[Vec<f64>] {
        &self.base_velocity
    }

    pub fn vertical(&self) -> &[Vec<f64>] {
        &self.vertical
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.points[self.len() - 1]
    }

    /// `sharp a(t_k) = h(u) + pi^# a_V`.
    pub fn anchor(&self, data: &GeometricData, k: usize) -> Vec<f64> {
        anchor_values(data, &self.points[k], &self.base_velocity[k], &self.vertical[k])
    }

    /// Max of `|d gamma / dt - sharp a|` at the nodes.
    pub fn residual(&self, data: &GeometricData) -> f64 {
        let anchors: Vec<Vec<f64>> = (0..self.len()).map(|k| self.anchor(data, k)).collect();
        velocity_residual(&self.times, &self.points, &anchors)
    }

    /// `a^{-1}(t) = -a(1 - t)`.
    pub fn inverse(&self) -> Self {
        AlgebroidPath {
            times: self.times.iter().rev().map(|t| 1.0 - t).collect(),
            points: self.points.iter().rev().cloned().collect(),
            base_velocity: self.base_velocity.iter().rev().map(|v| negate(v)).collect(),
            vertical: self.vertical.iter().rev().map(|v| negate(v)).collect(),
        }
    }

    /// The projected base path `gamma_B` with velocity `u`.
    pub fn base_path(&self, space: &FiberedSpace) -> GridPath {
        GridPath {
            times: self.times.clone(),
            points: self.points.iter().map(|e| space.project(e).to_vec()).collect(),
            velocities: self.base_velocity.clone(),
        }
    }

    /// Largest difference of nodes and components; grid times are not compared.
    pub fn distance(&self, other: &AlgebroidPath) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for k in 0..self.len() {
            worst = worst
                .max(max_diff(&self.points[k], &other.points[k]))
                .max(max_diff(&self.base_velocity[k], &other.base_velocity[k]))
                .max(max_diff(&self.vertical[k], &other.vertical[k]));
        }
        worst
    }
}

fn axpy(x: &[f64], k: &[f64], c: f64) -> Vec<f64> {
    x.iter().zip(k).map(|(a, b)| a + c * b).collect()
}

fn anchor_values(data: &GeometricData, e: &[f64], u: &[f64], alpha: &[f64]) -> Vec<f64> {
    let ed = constants(e);
    let m = data.space().base_dim();
    let lift = data.connection.lift_at(&ed, &constants(u));
    let vert = data.pi_v.sharp(&ed, &constants(alpha));
    (0..e.len()).map(|a| lift[a].re() + if a >= m { vert[a - m].re() } else { 0.0 }).collect()
}

/// An L-path in split form: the base path `gamma_B` and a `Ver*`-path
/// `a~` over the fiber `E_{gamma_B(0)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPath {
    pub base: GridPath,
    pub fiber_points: Vec<Vec<f64>>,
    pub covectors: Vec<Vec<f64>>,
}

impl SplitPath {
    /// Max of `|x~' - pi_{b_0}^# a~|`: the vertical part is a `Ver*`-path.
    pub fn vertical_residual(&self, data: &GeometricData) -> f64 {
        let b0 = self.base.start().to_vec();
        let anchors: Vec<Vec<f64>> = self
            .fiber_points
            .iter()
            .zip(&self.covectors)
            .map(|(x, c)| reals(&data.pi_v.sharp(&constants(&data.space().join(&b0, x)), &constants(c))))
            .collect();
        velocity_residual(self.base.times(), &self.fiber_points, &anchors)
    }

    /// Fiber point of the L-path at the last node: `phi_{1,0}(x~(1))`.
    pub fn end_fiber_point(&self, data: &GeometricData) -> Result<Vec<f64>> {
        let last = self.base.len() - 1;
        let x = constants(&self.fiber_points[last]);
        Ok(reals(&grid_transport(&data.connection, &self.base, &x, 0, last)?))
    }
}

/// Splits an L-path into `(gamma_B', a~)` with
/// `a~_t = a_V(t) o d phi_{t,0}` at `x~(t) = phi_{0,t}(gamma(t))`.
pub fn split_l_path(data: &GeometricData, path: &AlgebroidPath) -> Result<SplitPath> {
    let residual = path.residual(data);
    if residual > ODE_TOLERANCE {
        return Err(Error::Invalid(format!("not an A-path (residual {residual:.3e})")));
    }
    let space = data.space();
    let base = path.base_path(space);
    let nodes: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..path.len())
        .into_par_iter()
        .map(|k| {
            let x = space.split(&path.points[k]).1.to_vec();
            let back = reals(&grid_transport(&data.connection, &base, &constants(&x), k, 0)?);
            let (_, j) = transport_with_jacobian(&data.connection, &base, &back, 0, k)?;
            Ok((back, pull(&path.vertical[k], &j)))
        })
        .collect();
    let (fiber_points, covectors) = nodes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(SplitPath { base, fiber_points, covectors })
}

/// Rebuilds the L-path: `gamma_F(t) = phi_{t,0}(x~(t))`,
/// `a_V(t) = a~_t o (d phi_{t,0})^{-1}`.
pub fn reassemble(data: &GeometricData, split: &SplitPath) -> Result<AlgebroidPath> {
    let space = data.space();
    let nodes: Vec<Result<(Vec<f64>, Vec<f64>)>> = (0..split.base.len())
        .into_par_iter()
        .map(|k| {
            let (y, j) = transport_with_jacobian(&data.connection, &split.base, &split.fiber_points[k], 0, k)?;
            let a = push(&split.covectors[k], &j, &y)?;
            Ok((space.join(&split.base.points[k], &y), a))
        })
        .collect();
    let (points, vertical) = nodes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    AlgebroidPath::new(split.base.times.clone(), points, split.base.velocities.clone(), vertical)
}

/// `Phi_{gamma_B}` applied to a `Ver*`-path over `E_{gamma_B(0)}`: points
/// `phi_{1,0}(x)` and covectors `c o d phi_{0,1}`.
fn holonomy_forward(data: &GeometricData, base: &GridPath, points: &[Vec<f64>], covectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let last = base.len() - 1;
    let nodes: Vec<Result<(Vec<f64>, Vec<f64>)>> = points
        .par_iter()
        .zip(covectors)
        .map(|(x, c)| {
            let (y, j) = transport_with_jacobian(&data.connection, base, x, 0, last)?;
            let pushed = push(c, &j, &y)?;
            Ok((y, pushed))
        })
        .collect();
    Ok(nodes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip())
}

/// `Phi_{gamma_B}^{-1}` applied to a `Ver*`-path over `E_{gamma_B(1)}`:
/// points `phi_{0,1}(y)` and covectors `c o d phi_{1,0}`.
fn holonomy_backward(data: &GeometricData, base: &GridPath, points: &[Vec<f64>], covectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let last = base.len() - 1;
    let nodes: Vec<Result<(Vec<f64>, Vec<f64>)>> = points
        .par_iter()
        .zip(covectors)
        .map(|(y, c)| {
            let (x, j) = transport_with_jacobian(&data.connection, base, y, last, 0)?;
            let pulled = push(c, &j, &x)?;
            Ok((x, pulled))
        })
        .collect();
    Ok(nodes.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip())
}

/// `(gamma', a~)^{-1} = (gamma'^{-1}, Phi_gamma(a~)^{-1})`.
pub fn inverse_split(data: &GeometricData, p: &SplitPath) -> Result<SplitPath> {
    let (points, covectors) = holonomy_forward(data, &p.base, &p.fiber_points, &p.covectors)?;
    Ok(SplitPath {
        base: p.base.reversed(),
        fiber_points: points.into_iter().rev().collect(),
        covectors: covectors.into_iter().rev().map(|c| negate(&c)).collect(),
    })
}

/// `(delta', b~) . (gamma', a~) = (delta' . gamma', Phi_gamma^{-1}(b~) . a~)`:
/// `first` runs first, on `[0, 1/2]`.
pub fn concat_split(data: &GeometricData, first: &SplitPath, second: &SplitPath) -> Result<SplitPath> {
    let end = first.end_fiber_point(data)?;
    let gap = max_diff(first.base.end(), second.base.start()).max(max_diff(&end, &second.fiber_points[0]));
    if gap > COMPOSABLE_TOLERANCE {
        return Err(Error::NonComposable { gap });
    }
    let (pulled_points, pulled) = holonomy_backward(data, &first.base, &second.fiber_points, &second.covectors)?;
    let mut fiber_points = first.fiber_points.clone();
    fiber_points.extend(pulled_points);
    let covectors = first.covectors.iter().chain(&pulled).map(|c| scaled(c, 2.0)).collect();
    Ok(SplitPath { base: first.base.then(&second.base), fiber_points, covectors })
}

/// The Lie algebra the sections of a family take values in.
#[derive(Clone, Debug)]
pub enum SectionAlgebra {
    /// `R^d` with the zero bracket: sections of an abelian covector bundle
    /// over a point.
    Abelian(usize),
    Lie(StructureGroupModel),
}

impl SectionAlgebra {
    pub fn dim(&self) -> usize {
        match self {
            SectionAlgebra::Abelian(d) => *d,
            SectionAlgebra::Lie(g) => g.dim(),
        }
    }

    pub fn bracket(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        match self {
            SectionAlgebra::Abelian(d) => vec![0.0; *d],
            SectionAlgebra::Lie(g) => g.bracket_values(a, b),
        }
    }
}

type FamilyFn = Arc<dyn Fn(Dual, Dual) -> Vec<Dual> + Send + Sync>;
type InitialFn = Arc<dyn Fn(Dual) -> Vec<Dual> + Send + Sync>;

/// `alpha^eps(t)` and the initial condition `beta^0(eps)`.
#[derive(Clone)]
pub struct SectionFamily {
    pub algebra: SectionAlgebra,
    alpha: FamilyFn,
    beta0: InitialFn,
}

impl std::fmt::Debug for SectionFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SectionFamily").field("algebra", &self.algebra).finish()
    }
}

impl SectionFamily {
    pub fn new<A, B>(algebra: SectionAlgebra, alpha: A, beta0: B) -> Result<Self>
    where
        A: Fn(Dual, Dual) -> Vec<Dual> + Send + Sync + 'static,
        B: Fn(Dual) -> Vec<Dual> + Send + Sync + 'static,
    {
        let d = algebra.dim();
        let probe = Dual::constant(0.5);
        if alpha(probe, probe).len() != d || beta0(probe).len() != d {
            return Err(Error::Unsupported(format!("sections must take values in an algebra of dimension {d}")));
        }
        Ok(SectionFamily { algebra, alpha: Arc::new(alpha), beta0: Arc::new(beta0) })
    }

    pub fn alpha(&self, eps: f64, t: f64) -> Vec<f64> {
        reals(&(self.alpha)(Dual::constant(eps), Dual::constant(t)))
    }

    pub fn alpha_eps_derivative(&self, eps: f64, t: f64) -> Vec<f64> {
        let tt = Dual::constant(t);
        reals(&derivative(|e| (self.alpha)(e, tt), Dual::constant(eps)).1)
    }

    pub fn beta0(&self, eps: f64) -> Vec<f64> {
        reals(&(self.beta0)(Dual::constant(eps)))
    }

    /// `d beta / dt = d alpha / d eps - [alpha, beta]`.
    fn rhs(&self, eps: f64, t: f64, beta: &[f64]) -> Vec<f64> {
        let tt = Dual::constant(t);
        let (a, da) = derivative(|e| (self.alpha)(e, tt), Dual::constant(eps));
        let br = self.algebra.bracket(&reals(&a), beta);
        da.iter().zip(br).map(|(x, y)| x.re() - y).collect()
    }

    /// `beta^{t_k}(eps)` at `t_k = k / steps`, by RK4.
    pub fn beta_in_t(&self, eps: f64, steps: usize) -> Vec<Vec<f64>> {
        let h = 1.0 / steps as f64;
        let mut cur = self.beta0(eps);
        let mut out = vec![cur.clone()];
        for k in 0..steps {
            let t = k as f64 * h;
            let k1 = self.rhs(eps, t, &cur);
            let k2 = self.rhs(eps, t + h / 2.0, &axpy(&cur, &k1, h / 2.0));
            let k3 = self.rhs(eps, t + h / 2.0, &axpy(&cur, &k2, h / 2.0));
            let k4 = self.rhs(eps, t + h, &axpy(&cur, &k3, h));
            cur = (0..cur.len()).map(|a| cur[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])).collect();
            out.push(cur.clone());
        }
        out
    }
}

/// Solution of the evolution equation on a `(eps, t)` grid.
#[derive(Clone, Debug)]
pub struct EvolutionSolution {
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    /// `beta[i][k] = beta^{t_k}(eps_i)`.
    pub beta: Vec<Vec<Vec<f64>>>,
    /// Max of `|d alpha/d eps - d beta/dt - [alpha, beta]|` on the grid.
    pub residual: f64,
    /// Max of `|beta^1(eps)|`; zero exactly for A-homotopies.
    pub homotopy_defect: f64,
}

impl EvolutionSolution {
    pub fn is_homotopy(&self, tolerance: f64) -> bool {
        self.homotopy_defect <= tolerance
    }
}

/// Solves `d alpha/d eps - d beta/dt = [alpha, beta]` with the given initial
/// condition, which realizes the integral formula with the flow of
/// `-[alpha, .]` (the Ad-flow of `alpha` for a Lie algebra).
pub fn solve_evolution(family: &SectionFamily, t_steps: usize, eps_steps: usize) -> Result<EvolutionSolution> {
    if t_steps < 4 || eps_steps == 0 {
        return Err(Error::Invalid("evolution grid needs at least four time steps".into()));
    }
    let eps: Vec<f64> = (0..=eps_steps).map(|i| i as f64 / eps_steps as f64).collect();
    let t: Vec<f64> = (0..=t_steps).map(|k| k as f64 / t_steps as f64).collect();
    let beta: Vec<Vec<Vec<f64>>> = eps.par_iter().map(|e| family.beta_in_t(*e, t_steps)).collect();
    let h = 1.0 / t_steps as f64;
    let mut residual: f64 = 0.0;
    let mut homotopy_defect: f64 = 0.0;
    for (i, e) in eps.iter().enumerate() {
        let d = fd_derivative(&beta[i], h);
        for (k, tk) in t.iter().enumerate() {
            let expected = family.rhs(*e, *tk, &beta[i][k]);
            residual = residual.max(max_diff(&d[k], &expected));
        }
        homotopy_defect = homotopy_defect.max(beta[i][t_steps].iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(EvolutionSolution { eps, t, beta, residual, homotopy_defect })
}

const CHEBYSHEV_ORDER: usize = 48;

/// Chebyshev points of the second kind on `[0, 1]`.
fn chebyshev_nodes(order: usize) -> Vec<f64> {
    (0..=order).map(|k| 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / order as f64).cos())).collect()
}

/// Barycentric interpolation through Chebyshev points of the second kind.
fn chebyshev_interpolate(nodes: &[f64], values: &[&[f64]], x: f64) -> Vec<f64> {
    let order = nodes.len() - 1;
    let dim = values[0].len();
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    for (k, (node, v)) in nodes.iter().zip(values).enumerate() {
        let diff = x - node;
        if diff == 0.0 {
            return v.to_vec();
        }
        let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
        if k == 0 || k == order {
            w *= 0.5;
        }
        let c = w / diff;
        den += c;
        for (n, vi) in num.iter_mut().zip(v.iter()) {
            *n += c * vi;
        }
    }
    num.into_iter().map(|n| n / den).collect()
}

/// Result of comparing the two compositions of time-dependent flows.
#[derive(Clone, Debug)]
pub struct FlowCommutation {
    pub residual: f64,
    pub step: f64,
    pub grid: usize,
}

fn flow_step(fiber: &HamiltonianFiber, x: &[f64], k: [&[f64]; 3], h: f64) -> Vec<f64> {
    let f = |xi: &[f64], y: &[f64]| reals(&(fiber.action)(&constants(xi), &constants(y)));
    let k1 = f(k[0], x);
    let k2 = f(k[1], &axpy(x, &k1, h / 2.0));
    let k3 = f(k[1], &axpy(x, &k2, h / 2.0));
    let k4 = f(k[2], &axpy(x, &k3, h));
    (0..x.len()).map(|a| x[a] + h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a])).collect()
}

/// Flow of `rho(xi(s))` with `xi` sampled at the half steps `s = j h / 2`,
/// recording the nodes `s = k h`.
fn action_flow(fiber: &HamiltonianFiber, domain: &CoordinateDomain, x0: &[f64], xi: &[Vec<f64>], h: f64) -> Result<Vec<Vec<f64>>> {
    let steps = (xi.len() - 1) / 2;
    let mut cur = x0.to_vec();
    let mut out = vec![cur.clone()];
    for k in 0..steps {
        cur = flow_step(fiber, &cur, [&xi[2 * k], &xi[2 * k + 1], &xi[2 * k + 2]], h);
        if !domain.contains(&cur) {
            return Err(Error::IncompleteTransport { time: (k + 1) as f64 * h });
        }
        out.push(cur.clone());
    }
    Ok(out)
}

/// Sup over a `(t, eps)` grid of
/// `|phi^{X^eps}_{t,0} phi^{Y^0}_{eps,0}(m0) - phi^{Y^t}_{eps,0} phi^{X^0}_{t,0}(m0)|`
/// with `X = rho(alpha)`, `Y = rho(beta)` on the action algebroid of the fiber.
pub fn flow_commutation_residual(
    family: &SectionFamily,
    fiber: &HamiltonianFiber,
    m0: &[f64],
    grid: usize,
    step: f64,
) -> Result<FlowCommutation> {
    let steps = (1.0 / step).round() as usize;
    if grid == 0 || !steps.is_multiple_of(grid) {
        return Err(Error::Invalid("the step count must be a multiple of the grid".into()));
    }
    let h = 1.0 / steps as f64;
    let stride = steps / grid;
    let domain = fiber.domain().clone();
    let half: Vec<f64> = (0..=2 * steps).map(|j| j as f64 * h / 2.0).collect();

    // beta^{t_j}(eps) at Chebyshev nodes in eps; beta is analytic in eps, so
    // barycentric interpolation is exact to rounding at the half steps.
    let nodes = chebyshev_nodes(CHEBYSHEV_ORDER);
    let table: Vec<Vec<Vec<f64>>> = nodes
        .par_iter()
        .map(|e| family.beta_in_t(*e, steps).into_iter().step_by(stride).collect())
        .collect();

    // Left side: eps-flow of Y^0 = rho(beta0(eps)), then t-flows of X^eps.
    let y0: Vec<Vec<f64>> = half.iter().map(|e| family.beta0(*e)).collect();
    let left_start = action_flow(fiber, &domain, m0, &y0, h)?;
    let left: Vec<Result<Vec<Vec<f64>>>> = (0..=grid)
        .into_par_iter()
        .map(|i| {
            let e = (i * stride) as f64 * h;
            let xi: Vec<Vec<f64>> = half.iter().map(|t| family.alpha(e, *t)).collect();
            action_flow(fiber, &domain, &left_start[i * stride], &xi, h)
        })
        .collect();
    let left = left.into_iter().collect::<Result<Vec<_>>>()?;

    // Right side: t-flow of X^0, then eps-flows of Y^t.
    let x0: Vec<Vec<f64>> = half.iter().map(|t| family.alpha(0.0, *t)).collect();
    let right_start = action_flow(fiber, &domain, m0, &x0, h)?;
    let right: Vec<Result<Vec<Vec<f64>>>> = (0..=grid)
        .into_par_iter()
        .map(|j| {
            let k = j * stride;
            let samples: Vec<&[f64]> = table.iter().map(|row| row[j].as_slice()).collect();
            let xi: Vec<Vec<f64>> = half.iter().map(|e| chebyshev_interpolate(&nodes, &samples, *e)).collect();
            action_flow(fiber, &domain, &right_start[k], &xi, h)
        })
        .collect();
    let right = right.into_iter().collect::<Result<Vec<_>>>()?;

    let mut residual: f64 = 0.0;
    for i in 0..=grid {
        for j in 0..=grid {
            residual = residual.max(max_diff(&left[i][j * stride], &right[j][i * stride]));
        }
    }
    Ok(FlowCommutation { residual, step: h, grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::VerticalBivector;
    use crate::fibration::HorizontalForm;
    use crate::yang_mills::{so3_coadjoint_fiber, so3_sample_connection, ymh_geometric_data};

    fn linear_transport(c: f64) -> GeometricData {
        let space = FiberedSpace::new(CoordinateDomain::cube(1, 3.0), CoordinateDomain::cube(1, 50.0));
        let conn = Connection::new(space.clone(), move |_, x| vec![x[0] * c]);
        GeometricData::new(VerticalBivector::zero(space.clone()), conn, HorizontalForm::zero(space, 2)).unwrap()
    }

    fn so3_data() -> GeometricData {
        ymh_geometric_data(&so3_sample_connection(2), &so3_coadjoint_fiber(2.0)).unwrap()
    }

    fn so3_path(data: &GeometricData, intervals: usize) -> AlgebroidPath {
        AlgebroidPath::integrate(
            data,
            &[0.1, -0.2, 0.5, 0.3, -0.4],
            |t| vec![(2.0 * t).cos() * 0.6, 0.4 - t * 0.5],
            |t| vec![t.sin(), 0.3, -0.5 * t * t],
            intervals,
        )
        .unwrap()
    }

    #[test]
    fn integrated_paths_are_a_paths() {
        let data = so3_data();
        let p = so3_path(&data, 200);
        assert!(p.residual(&data) < 1e-8, "{}", p.residual(&data));
        let back = p.inverse().inverse();
        assert_eq!(back.distance(&p), 0.0);
        assert!(max_diff(back.times(), p.times()) < 1e-15);
        assert!(p.inverse().residual(&data) < 1e-8);
    }

    #[test]
    fn flat_split_keeps_components() {
        let space = FiberedSpace::new(CoordinateDomain::cube(1, 3.0), CoordinateDomain::cube(1, 3.0));
        let data = GeometricData::trivial(space);
        let p = AlgebroidPath::integrate(&data, &[0.0, 0.5], |t| vec![1.0 + t], |t| vec![t.cos()], 40).unwrap();
        let s = split_l_path(&data, &p).unwrap();
        for k in 0..p.len() {
            assert!((s.covectors[k][0] - p.vertical()[k][0]).abs() < 1e-14);
            assert!((s.fiber_points[k][0] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn horizontal_path_has_zero_vertical_part() {
        let data = so3_data();
        let p = AlgebroidPath::integrate(&data, &[0.0, 0.0, 0.5, 0.5, 0.5], |_| vec![0.5, -0.3], |_| vec![0.0; 3], 60).unwrap();
        let s = split_l_path(&data, &p).unwrap();
        assert!(s.covectors.iter().flatten().all(|c| *c == 0.0));
        assert_eq!(s.base.velocities()[7], vec![0.5, -0.3]);
    }

    #[test]
    fn linear_transport_split_matches_closed_form() {
        let c = 0.7;
        let data = linear_transport(c);
        let p = AlgebroidPath::integrate(&data, &[0.2, 1.5], |t| vec![(3.0 * t).cos()], |t| vec![1.0 - t], 100).unwrap();
        let s = split_l_path(&data, &p).unwrap();
        for k in 0..p.len() {
            let db = p.points()[k][0] - 0.2;
            assert!((s.fiber_points[k][0] - 1.5).abs() < 1e-8);
            assert!((s.covectors[k][0] - p.vertical()[k][0] * (c * db).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn split_round_trip() {
        let data = so3_data();
        let p = so3_path(&data, 120);
        let s = split_l_path(&data, &p).unwrap();
        assert!(s.vertical_residual(&data) < 1e-6, "{}", s.vertical_residual(&data));
        let back = reassemble(&data, &s).unwrap();
        assert!(back.distance(&p) < 1e-6, "{}", back.distance(&p));
        assert!(back.residual(&data) < 1e-6);
    }

    #[test]
    fn path_times_inverse_is_a_loop() {
        let data = so3_data();
        let s = split_l_path(&data, &so3_path(&data, 80)).unwrap();
        let inv = inverse_split(&data, &s).unwrap();
        let loop_ = concat_split(&data, &s, &inv).unwrap();
        let l = reassemble(&data, &loop_).unwrap();
        assert!(l.residual(&data) < 1e-6, "{}", l.residual(&data));
        assert!(max_diff(l.start(), l.end()) < 1e-8);
        let n = l.len();
        assert!(max_diff(&l.base_path(data.space()).points()[n / 2], s.base.end()) < 1e-14);
    }

    #[test]
    fn concatenation_requires_composable_paths() {
        let data = so3_data();
        let s = split_l_path(&data, &so3_path(&data, 40)).unwrap();
        assert!(matches!(concat_split(&data, &s, &s), Err(Error::NonComposable { .. })));
    }

    #[test]
    fn linear_holonomy_correction() {
        let c = -0.4;
        let data = linear_transport(c);
        let p = AlgebroidPath::integrate(&data, &[0.0, 1.0], |_| vec![1.0], |_| vec![0.5], 50).unwrap();
        let sp = split_l_path(&data, &p).unwrap();
        let e = p.end().to_vec();
        let q = AlgebroidPath::integrate(&data, &e, |_| vec![-0.5], |t| vec![t], 50).unwrap();
        let sq = split_l_path(&data, &q).unwrap();
        let pq = concat_split(&data, &sp, &sq).unwrap();
        // b~ at y is pulled to y exp(-c) with covector multiplied by exp(c).
        for k in 0..sq.covectors.len() {
            let i = sp.covectors.len() + k;
            assert!((pq.covectors[i][0] - 2.0 * sq.covectors[k][0] * c.exp()).abs() < 1e-8);
            assert!((pq.fiber_points[i][0] - sq.fiber_points[k][0] * (-c).exp()).abs() < 1e-8);
        }
        assert!(reassemble(&data, &pq).unwrap().residual(&data) < 1e-6);
    }

    #[test]
    fn concatenation_is_associative_up_to_reparameterization() {
        let data = so3_data();
        let p = so3_path(&data, 100);
        let q = AlgebroidPath::integrate(&data, p.end(), |t| vec![-0.3, t], |_| vec![0.2, -0.1, 0.0], 100).unwrap();
        let r = AlgebroidPath::integrate(&data, q.end(), |_| vec![0.1, 0.1], |t| vec![0.0, t, 0.4], 100).unwrap();
        let (sp, sq, sr) = (split_l_path(&data, &p).unwrap(), split_l_path(&data, &q).unwrap(), split_l_path(&data, &r).unwrap());
        let left = reassemble(&data, &concat_split(&data, &concat_split(&data, &sp, &sq).unwrap(), &sr).unwrap()).unwrap();
        let right = reassemble(&data, &concat_split(&data, &sp, &concat_split(&data, &sq, &sr).unwrap()).unwrap()).unwrap();
        assert!(left.residual(&data) < 1e-6, "{}", left.residual(&data));
        assert!(right.residual(&data) < 1e-6, "{}", right.residual(&data));
        assert!(max_diff(left.end(), right.end()) < 1e-6);
        assert!(max_diff(left.end(), r.end()) < 1e-6);
    }

    fn so3_family(beta_zero: bool) -> SectionFamily {
        SectionFamily::new(
            SectionAlgebra::Lie(StructureGroupModel::so3()),
            |e, t| vec![(t * 2.0).cos() * 3.0 + e, (t + e).sin() * 4.0, e * t * 2.0 - 1.0],
            move |e| if beta_zero { vec![Dual::ZERO; 3] } else { vec![e * 0.5, -e, e * e] },
        )
        .unwrap()
    }

    #[test]
    fn abelian_evolution() {
        let constant = SectionFamily::new(SectionAlgebra::Abelian(2), |_, t| vec![t, t.cos()], |_| vec![Dual::ZERO; 2]).unwrap();
        let s = solve_evolution(&constant, 100, 4).unwrap();
        assert!(s.beta.iter().flatten().flatten().all(|v| *v == 0.0));
        assert!(s.is_homotopy(0.0));
        let linear = SectionFamily::new(SectionAlgebra::Abelian(1), |e, t| vec![e * t.cos()], |_| vec![Dual::ZERO]).unwrap();
        let s = solve_evolution(&linear, 100, 4).unwrap();
        for (k, t) in s.t.iter().enumerate() {
            assert!((s.beta[2][k][0] - t.sin()).abs() < 1e-10);
        }
        assert!(s.residual < 1e-6);
    }

    #[test]
    fn so3_evolution_matches_ad_flow() {
        let g = StructureGroupModel::so3();
        let family = SectionFamily::new(
            SectionAlgebra::Lie(g.clone()),
            |e, _| vec![e * 2.0, -e + 1.0, e * e],
            |e| vec![e, Dual::ZERO, Dual::ONE],
        )
        .unwrap();
        let s = solve_evolution(&family, 200, 5).unwrap();
        assert!(s.residual < 1e-6);
        let (nodes, weights) = crate::quadrature::gauss_legendre(24);
        for (i, e) in s.eps.iter().enumerate() {
            let a = family.alpha(*e, 0.0);
            let da = family.alpha_eps_derivative(*e, 0.0);
            let t = 0.8;
            let ad = |tau: f64, v: &[f64]| -> Vec<f64> {
                let r = g.exp(&a.iter().map(|x| -tau * x).collect::<Vec<_>>());
                (&r * DVector::from_column_slice(v)).iter().copied().collect()
            };
            let mut expected = ad(t, &family.beta0(*e));
            for (x, w) in nodes.iter().zip(&weights) {
                let s_ = t * (x + 1.0) / 2.0;
                let v = ad(t - s_, &da);
                for c in 0..3 {
                    expected[c] += w * t / 2.0 * v[c];
                }
            }
            assert!(max_diff(&s.beta[i][160], &expected) < 1e-6);
        }
    }

    #[test]
    fn rk4_refinement_reduces_residual() {
        let f = so3_family(false);
        let coarse = solve_evolution(&f, 50, 2).unwrap().residual;
        let fine = solve_evolution(&f, 100, 2).unwrap().residual;
        assert!(coarse / fine >= 4.0, "{coarse} {fine}");
    }

    #[test]
    fn commuting_flows() {
        let family = SectionFamily::new(
            SectionAlgebra::Lie(StructureGroupModel::so3()),
            |_, _| vec![Dual::ZERO, Dual::ZERO, Dual::constant(1.5)],
            |_| vec![Dual::ZERO, Dual::ZERO, Dual::constant(-0.7)],
        )
        .unwrap();
        let r = flow_commutation_residual(&family, &so3_coadjoint_fiber(2.0), &[0.6, 0.0, 0.8], 10, 1e-2).unwrap();
        assert!(r.residual < 1e-10, "{}", r.residual);
    }

    #[test]
    fn flow_commutation_on_coadjoint_sphere() {
        let fiber = so3_coadjoint_fiber(2.0);
        let m0 = [0.6, 0.0, 0.8];
        for zero in [true, false] {
            let f = so3_family(zero);
            let r = flow_commutation_residual(&f, &fiber, &m0, 10, 1e-2).unwrap();
            assert!(r.residual < 1e-4, "{}", r.residual);
        }
    }

    #[test]
    fn beta_is_interpolated_in_eps() {
        let f = so3_family(false);
        let nodes = chebyshev_nodes(CHEBYSHEV_ORDER);
        let table: Vec<Vec<f64>> = nodes.iter().map(|e| f.beta_in_t(*e, 100)[100].clone()).collect();
        let refs: Vec<&[f64]> = table.iter().map(|v| v.as_slice()).collect();
        for e in [0.013, 0.5001, 0.977] {
            assert!(max_diff(&chebyshev_interpolate(&nodes, &refs, e), &f.beta_in_t(e, 100)[100]) < 1e-12);
        }
    }
}
