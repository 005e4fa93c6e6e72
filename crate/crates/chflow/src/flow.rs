//! Lagrangian flow map of the periodic velocity field and the equation's
//! Lagrangian ODE form.
//!
//! The flow is stored as xi(t,x) = x + f(t,x) with f periodic, so that xi
//! itself (which grows by 1 across one period) never enters a Fourier
//! transform. Characteristics are advanced through a precomputed Eulerian
//! trajectory; alternatively the pair (xi, v) is integrated directly from
//!
//!   (xi, v)' = (v, g(xi, v)),   g(xi, v) = -(d_x P)[v o xi^(-1)] o xi,
//!
//! which closes the system without ever solving the PDE in Eulerian form.

use num_complex::Complex;

use crate::field::{PeriodicField, PeriodicGrid};
use crate::real::Real;
use crate::solver::{self, Trajectory};
use crate::{c, Error, Result};

/// Grid slopes d(xi)/dx below this flag the map as numerically degenerate
/// (incipient loss of injectivity); runs continue but carry the flag.
pub const DEGENERATE_SLOPE: f64 = 1e-6;

/// A periodic diffeomorphism-candidate xi(x) = x + f(x) at a fixed time.
#[derive(Clone, Debug)]
pub struct FlowMap<T: Real> {
    offset: PeriodicField<T>,
    t: T,
}

impl<T: Real> FlowMap<T> {
    pub fn new(offset: PeriodicField<T>, t: T) -> Self {
        FlowMap { offset, t }
    }

    /// The identity map, the flow at t = 0.
    pub fn identity(grid: PeriodicGrid) -> Self {
        FlowMap {
            offset: PeriodicField::zero(grid),
            t: T::zero(),
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.offset.grid()
    }

    /// The periodic part f of xi = x + f.
    pub fn offset(&self) -> &PeriodicField<T> {
        &self.offset
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// xi evaluated off-grid by spectral interpolation of the offset.
    pub fn eval(&self, x: T) -> T {
        x + self.offset.eval_at(x)
    }

    /// xi at the grid points.
    pub fn position_values(&self) -> Vec<T> {
        self.grid()
            .points::<T>()
            .iter()
            .zip(self.offset.values())
            .map(|(&x, &f)| x + f)
            .collect()
    }

    /// Smallest grid value of d(xi)/dx = 1 + f'.
    pub fn min_slope(&self) -> T {
        let fp = self.offset.derivative(1);
        fp.values()
            .iter()
            .fold(T::infinity(), |m, &v| m.min(T::one() + v))
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_slope() < c::<T>(DEGENERATE_SLOPE)
    }

    /// Solves xi(x) = y for x by bisection. xi - id is periodic, so a bracket
    /// of width 2(sup|f| + 1) around y always contains the preimage; strict
    /// monotonicity (checked on the grid) makes it unique.
    pub fn invert(&self, y: T) -> Result<T> {
        self.check_monotone()?;
        Ok(self.invert_unchecked(y))
    }

    /// Preimages of every grid point, with a single monotonicity check.
    pub fn invert_grid(&self) -> Result<Vec<T>> {
        self.check_monotone()?;
        Ok(self
            .grid()
            .points::<T>()
            .iter()
            .map(|&y| self.invert_unchecked(y))
            .collect())
    }

    fn check_monotone(&self) -> Result<()> {
        let ms = self.min_slope();
        if ms <= T::zero() {
            return Err(Error::FlowDegenerate {
                time: self.t.to_f64().unwrap_or(f64::NAN),
                min_slope: ms.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(())
    }

    fn invert_unchecked(&self, y: T) -> T {
        let bound = self.offset.sup_norm() + T::one();
        let mut lo = y - bound;
        let mut hi = y + bound;
        let width_tol = T::epsilon() * (T::one() + y.abs());
        let half = c::<T>(0.5);
        for _ in 0..200 {
            if hi - lo <= width_tol {
                break;
            }
            let mid = (lo + hi) * half;
            if self.eval(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) * half
    }
}

/// Flow maps recorded along an Eulerian trajectory, at every second state.
#[derive(Clone, Debug)]
pub struct FlowTrajectory<T: Real> {
    pub maps: Vec<FlowMap<T>>,
    /// True when min d(xi)/dx dipped below [`DEGENERATE_SLOPE`] at any
    /// recorded time.
    pub degenerate: bool,
}

impl<T: Real> FlowTrajectory<T> {
    pub fn last(&self) -> &FlowMap<T> {
        self.maps.last().expect("flow trajectory holds the initial map")
    }
}

/// Advances the characteristic ODE dx/dt = u(t, x) through a solver
/// trajectory for the given seed points. The solver states at spacing dt
/// serve as the substage values of a fourth-order step of size 2*dt, so the
/// trajectory must contain an even number of steps. Returns the positions at
/// the initial time and after every macro step.
pub fn advance_points<T: Real>(traj: &Trajectory<T>, x0: &[T]) -> Result<Vec<Vec<T>>> {
    let m = traj.states.len();
    if m < 3 || m % 2 == 0 {
        return Err(Error::Invalid(format!(
            "characteristic stepping pairs up solver steps: need an even, nonzero step count, got {}",
            m - 1
        )));
    }
    let h = traj.dt;
    let two_h = h + h;
    let sixth = c::<T>(1.0 / 6.0);
    let two = c::<T>(2.0);

    let mut rows = Vec::with_capacity((m - 1) / 2 + 1);
    let mut cur = x0.to_vec();
    rows.push(cur.clone());
    for i in (0..m - 1).step_by(2) {
        let u0 = &traj.states[i].u;
        let u1 = &traj.states[i + 1].u;
        let u2 = &traj.states[i + 2].u;
        for x in cur.iter_mut() {
            let k1 = u0.eval_at(*x);
            let k2 = u1.eval_at(*x + h * k1);
            let k3 = u1.eval_at(*x + h * k2);
            let k4 = u2.eval_at(*x + two_h * k3);
            *x = *x + two_h * sixth * (k1 + two * (k2 + k3) + k4);
        }
        rows.push(cur.clone());
    }
    Ok(rows)
}

/// Advances the full flow map, seeding the characteristics at the grid
/// points and re-wrapping each snapshot as a periodic offset field.
pub fn advance_flow<T: Real>(traj: &Trajectory<T>) -> Result<FlowTrajectory<T>> {
    let grid = traj.states[0].grid();
    let xs = grid.points::<T>();
    let rows = advance_points(traj, &xs)?;
    let mut degenerate = false;
    let mut maps = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let offsets: Vec<T> = row.iter().zip(&xs).map(|(&p, &x)| p - x).collect();
        let map = FlowMap::new(
            PeriodicField::from_values(grid, offsets),
            traj.states[2 * i].t,
        );
        degenerate |= map.is_degenerate();
        maps.push(map);
    }
    Ok(FlowTrajectory { maps, degenerate })
}

/// Gaussian low-pass with symbol exp(-(theta w)^2 / 2): smooths Lipschitz
/// data (peakons) into band-limited fields while preserving the mean exactly.
pub fn mollify<T: Real>(u: &PeriodicField<T>, width: T) -> PeriodicField<T> {
    assert!(width >= T::zero(), "mollifier width must be nonnegative");
    let two_pi = T::TAU();
    let half = c::<T>(0.5);
    u.apply_real_symbol(|k| {
        let tw = two_pi * c::<T>(k as f64) * width;
        Complex::new((-half * tw * tw).exp(), T::zero())
    })
}

/// Right-hand side of the Lagrangian pair: d(xi)/dt = v and
/// dv/dt = -(d_x P)[u] o xi with u = v o xi^(-1). The conjugation costs one
/// monotone inversion per call; the pressure gradient itself is evaluated in
/// Eulerian form on the reference grid.
pub fn lagrangian_rhs<T: Real>(
    xi: &FlowMap<T>,
    v: &PeriodicField<T>,
    l: usize,
) -> Result<(PeriodicField<T>, PeriodicField<T>)> {
    let grid = xi.grid();
    assert_eq!(grid, v.grid(), "flow map and velocity must share a grid");
    let preimages = xi.invert_grid()?;
    let u = PeriodicField::from_values(
        grid,
        preimages.iter().map(|&x| v.eval_at(x)).collect(),
    );
    let g = solver::pressure_gradient(&u, l);
    let dv = PeriodicField::from_values(
        grid,
        xi.position_values().iter().map(|&p| -g.eval_at(p)).collect(),
    );
    Ok((v.clone(), dv))
}

/// One state of the Lagrangian integration.
#[derive(Clone, Debug)]
pub struct LagrangianState<T: Real> {
    pub xi: FlowMap<T>,
    pub v: PeriodicField<T>,
}

#[derive(Clone, Debug)]
pub struct LagrangianTrajectory<T: Real> {
    pub states: Vec<LagrangianState<T>>,
    pub dt: T,
    pub degenerate: bool,
}

impl<T: Real> LagrangianTrajectory<T> {
    pub fn last(&self) -> &LagrangianState<T> {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Integrates (xi, v)' = (v, g(xi, v)) from (id, u0) with the same classical
/// fourth-order stepper as the Eulerian solver. Inversion failure (slope
/// reaching zero on the grid) aborts; slopes below [`DEGENERATE_SLOPE`] only
/// set the flag.
pub fn integrate_lagrangian<T: Real>(
    u0: &PeriodicField<T>,
    l: usize,
    t_end: T,
    dt: T,
) -> Result<LagrangianTrajectory<T>> {
    assert!(t_end > T::zero() && dt > T::zero());
    let steps = (t_end / dt).to_f64().unwrap().round().max(1.0) as usize;
    let dt = t_end / c::<T>(steps as f64);
    let half = c::<T>(0.5);
    let sixth = c::<T>(1.0 / 6.0);
    let two = c::<T>(2.0);

    let grid = u0.grid();
    let mut states = vec![LagrangianState {
        xi: FlowMap::identity(grid),
        v: u0.clone(),
    }];
    let mut degenerate = false;

    let stage = |f: &PeriodicField<T>, v: &PeriodicField<T>, t: T| -> Result<_> {
        lagrangian_rhs(&FlowMap::new(f.clone(), t), v, l)
    };

    for i in 0..steps {
        let t = c::<T>(i as f64) * dt;
        let cur = states.last().unwrap();
        let f = &cur.xi.offset;
        let v = &cur.v;

        let (kf1, kv1) = stage(f, v, t)?;
        let (kf2, kv2) = stage(
            &f.axpy(half * dt, &kf1),
            &v.axpy(half * dt, &kv1),
            t + half * dt,
        )?;
        let (kf3, kv3) = stage(
            &f.axpy(half * dt, &kf2),
            &v.axpy(half * dt, &kv2),
            t + half * dt,
        )?;
        let (kf4, kv4) = stage(&f.axpy(dt, &kf3), &v.axpy(dt, &kv3), t + dt)?;

        let df = kf1.add(&kf4).axpy(two, &kf2).axpy(two, &kf3).scale(sixth * dt);
        let dv = kv1.add(&kv4).axpy(two, &kv2).axpy(two, &kv3).scale(sixth * dt);
        let xi = FlowMap::new(f.add(&df), t + dt);
        degenerate |= xi.is_degenerate();
        states.push(LagrangianState { xi, v: v.add(&dv) });
    }
    Ok(LagrangianTrajectory { states, dt, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{integrate, ChState};
    use std::f64::consts::PI;

    fn sine(grid: PeriodicGrid, amp: f64) -> PeriodicField<f64> {
        PeriodicField::from_fn(grid, |x: f64| amp * (2.0 * PI * x).sin())
    }

    #[test]
    fn zero_velocity_freezes_the_flow() {
        let g = PeriodicGrid::new(32).unwrap();
        let traj = integrate(ChState::new(PeriodicField::<f64>::zero(g), 1), 0.1, 0.01).unwrap();
        let flow = advance_flow(&traj).unwrap();
        assert!(!flow.degenerate, "identity flow reported as degenerate");
        for map in &flow.maps {
            assert!(
                map.offset().sup_norm() <= 1e-13,
                "flow moved under zero velocity at t = {}: |f| = {:e}",
                map.t(),
                map.offset().sup_norm()
            );
            assert!(
                (map.min_slope() - 1.0).abs() <= 1e-12,
                "identity slope deviates: {}",
                map.min_slope()
            );
        }
    }

    #[test]
    fn constant_velocity_translates_uniformly() {
        let g = PeriodicGrid::new(32).unwrap();
        let cfield = PeriodicField::<f64>::constant(g, 0.3);
        let traj = integrate(ChState::new(cfield, 2), 1.0, 0.05).unwrap();
        let flow = advance_flow(&traj).unwrap();
        for map in &flow.maps {
            let expect = 0.3 * map.t();
            let worst = map
                .offset()
                .values()
                .iter()
                .fold(0.0f64, |m, &f| m.max((f - expect).abs()));
            assert!(
                worst <= 1e-9,
                "translation by ct violated at t = {}: deviation {:e}",
                map.t(),
                worst
            );
        }
    }

    #[test]
    fn flow_needs_an_even_number_of_solver_steps() {
        let g = PeriodicGrid::new(32).unwrap();
        let traj = integrate(ChState::new(sine(g, 0.1), 1), 0.05, 0.01).unwrap();
        assert_eq!(traj.states.len(), 6, "expected 5 steps from 0.05 / 0.01");
        match advance_flow(&traj) {
            Err(Error::Invalid(_)) => {}
            other => panic!("odd step count should be rejected, got {other:?}"),
        }
    }

    #[test]
    fn initial_flow_acceleration_is_minus_pressure_gradient() {
        // d_t^2 xi(0,x) = (Du)(0,x) = -d_x P(0,x); one-sided 4-point second
        // difference of the computed flow against the spectral evaluation.
        let g = PeriodicGrid::new(64).unwrap();
        let u0 = sine(g, 0.2);
        let traj = integrate(ChState::new(u0.clone(), 1), 3.0e-3, 5.0e-4).unwrap();
        let flow = advance_flow(&traj).unwrap();
        assert!(flow.maps.len() >= 4, "need four flow snapshots");
        let d = 1.0e-3_f64;
        let g_field = solver::pressure_gradient(&u0, 1);
        let f1 = flow.maps[1].offset().values();
        let f2 = flow.maps[2].offset().values();
        let f3 = flow.maps[3].offset().values();
        let mut worst = 0.0f64;
        for j in 0..g.len() {
            let fd = (-5.0 * f1[j] + 4.0 * f2[j] - f3[j]) / (d * d);
            worst = worst.max((fd + g_field.values()[j]).abs());
        }
        assert!(
            worst <= 1e-5,
            "d_t^2 xi(0) mismatches -d_x P by {worst:e}"
        );
    }

    #[test]
    fn inversion_round_trips_through_the_map() {
        let g = PeriodicGrid::new(64).unwrap();
        let xi = FlowMap::new(sine(g, 0.1), 0.0);
        assert!(xi.min_slope() > 0.0, "test map should be monotone");
        for i in 0..17 {
            let y = i as f64 / 17.0;
            let x = xi.invert(y).unwrap();
            assert!(
                (xi.eval(x) - y).abs() <= 1e-12,
                "round trip failed at y = {y}: xi(invert(y)) = {}",
                xi.eval(x)
            );
        }
        let pre = xi.invert_grid().unwrap();
        for (j, &x) in pre.iter().enumerate() {
            let y = g.point::<f64>(j);
            assert!(
                (xi.eval(x) - y).abs() <= 1e-12,
                "grid inversion off at j = {j}"
            );
        }
    }

    #[test]
    fn non_monotone_map_is_flagged_and_refuses_inversion() {
        let g = PeriodicGrid::new(64).unwrap();
        // f' reaches -0.5*pi < -1, so xi folds over.
        let xi = FlowMap::new(sine(g, -0.25), 0.0);
        assert!(xi.is_degenerate(), "folded map not flagged");
        match xi.invert(0.3) {
            Err(Error::FlowDegenerate { min_slope, .. }) => {
                assert!(min_slope < 0.0, "reported slope should be negative")
            }
            other => panic!("inversion of a folded map should fail, got {other:?}"),
        }
    }

    #[test]
    fn lagrangian_rhs_fixes_rest_and_uniform_motion() {
        let g = PeriodicGrid::new(64).unwrap();
        let id = FlowMap::identity(g);

        let (dxi, dv) = lagrangian_rhs(&id, &PeriodicField::<f64>::zero(g), 1).unwrap();
        assert!(dxi.sup_norm() <= 1e-14 && dv.sup_norm() <= 1e-14, "rest state moved");

        let (dxi, dv) = lagrangian_rhs(&id, &PeriodicField::constant(g, 0.4), 2).unwrap();
        assert!(
            (dxi.sup_norm() - 0.4).abs() <= 1e-14,
            "uniform speed not returned verbatim"
        );
        assert!(
            dv.sup_norm() <= 1e-11,
            "uniform motion should not accelerate: |dv| = {:e}",
            dv.sup_norm()
        );
    }

    #[test]
    fn lagrangian_velocity_rides_the_eulerian_solution() {
        let g = PeriodicGrid::new(64).unwrap();
        let u0 = sine(g, 0.2);
        let t_end = 0.3;
        let dt = 2.0e-3;

        let eulerian = integrate(ChState::new(u0.clone(), 1), t_end, dt).unwrap();
        let u_final = &eulerian.last().u;

        let lagrangian = integrate_lagrangian(&u0, 1, t_end, dt).unwrap();
        assert!(!lagrangian.degenerate, "short smooth run should stay diffeomorphic");
        let fin = lagrangian.last();
        assert!(fin.xi.min_slope() > 0.0, "flow slope must stay positive");

        let mut worst = 0.0f64;
        for (j, &x) in g.points::<f64>().iter().enumerate() {
            let v_here = fin.v.values()[j];
            let u_along = u_final.eval_at(fin.xi.eval(x));
            worst = worst.max((v_here - u_along).abs());
        }
        assert!(
            worst <= 1e-5,
            "v(t,x) and u(t, xi(t,x)) disagree by {worst:e} at t = {t_end}"
        );
    }

    #[test]
    fn gaussian_mollifier_damps_modes_by_its_symbol() {
        let g = PeriodicGrid::new(64).unwrap();
        let u = sine(g, 1.0);
        let w = 0.05;
        let damped = mollify(&u, w);
        let factor = (-0.5 * (2.0 * PI * w) * (2.0 * PI * w)).exp();
        let expect = sine(g, factor);
        assert!(
            damped.sub(&expect).sup_norm() <= 1e-12,
            "single mode should scale by exp(-(theta w)^2/2)"
        );
        let untouched = mollify(&u, 0.0);
        assert!(untouched.sub(&u).sup_norm() <= 1e-13, "width 0 must be the identity");
        let shifted = PeriodicField::constant(g, 2.5).add(&u);
        assert!(
            (mollify(&shifted, 0.3).mean() - 2.5).abs() <= 1e-13,
            "mollifier must preserve the mean"
        );
    }

    #[test]
    fn flows_of_mollified_peakon_data_form_a_cauchy_sequence() {
        // Smoothing witness: peakon data is only Lipschitz, but the flows of
        // its mollifications converge as the width shrinks.
        let g = PeriodicGrid::new(256).unwrap();
        let c_speed = 1.0f64;
        let gamma = c_speed * (0.5f64).tanh();
        let peak = PeriodicField::from_fn(g, |x: f64| {
            let y = (x - 0.5).rem_euclid(1.0);
            gamma * ((-y).exp() + (y - 1.0).exp()) / (1.0 - (-1.0f64).exp())
        });

        let flow_at = |w: f64| -> Vec<f64> {
            let u0 = mollify(&peak, w);
            let traj = integrate(ChState::new(u0, 1), 0.1, 1.0e-3).unwrap();
            let flow = advance_flow(&traj).unwrap();
            assert!(!flow.degenerate, "peakon flow degenerated at width {w}");
            flow.last().position_values()
        };

        let sup_diff = |a: &[f64], b: &[f64]| {
            a.iter().zip(b).fold(0.0f64, |m, (&x, &y)| m.max((x - y).abs()))
        };

        let xi_h = flow_at(0.04);
        let xi_h2 = flow_at(0.02);
        let xi_h4 = flow_at(0.01);
        let d1 = sup_diff(&xi_h2, &xi_h);
        let d2 = sup_diff(&xi_h4, &xi_h2);
        assert!(d1 > 0.0, "identical flows make the ratio meaningless");
        assert!(
            d2 <= 0.6 * d1,
            "flow differences not contracting: {d2:e} vs {d1:e}"
        );
    }
}
