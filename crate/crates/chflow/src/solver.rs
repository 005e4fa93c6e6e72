//! Pseudo-spectral time integration of the order-l equation
//!
//!   d_t u + u d_x u = A_l^{-1} C_l(u),
//!
//! on the periodic grid, with classical fourth-order explicit stepping.
//! Quadratic products are dealiased by 2x zero padding. The pressure
//! gradient d_x P = -A_l^{-1} C_l(u) is evaluated through the operator form
//! of C_l; the antiderivative route through the exact differential-polynomial
//! solve of d_x F = -C_l is kept alongside as a cross-check.

use crate::diffpoly;
use crate::field::{PeriodicField, PeriodicGrid};
use crate::operators::{apply_a, invert_a};
use crate::real::Real;
use crate::{c, Error, Result};

#[derive(Clone, Debug)]
pub struct ChState<T: Real> {
    pub u: PeriodicField<T>,
    pub l: usize,
    pub t: T,
}

impl<T: Real> ChState<T> {
    pub fn new(u: PeriodicField<T>, l: usize) -> Self {
        assert!(l >= 1, "the hierarchy starts at l = 1");
        ChState { u, l, t: T::zero() }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.u.grid()
    }
}

/// Operator form of the quadratic source:
/// C_l(u) = -u A_l u' + A_l(u u') - 2 u' A_l u.
pub fn c_l_source<T: Real>(u: &PeriodicField<T>, l: usize) -> PeriodicField<T> {
    let ux = u.derivative(1);
    let term1 = u.mul_dealiased(&apply_a(&ux, l));
    let term2 = apply_a(&u.mul_dealiased(&ux), l);
    let term3 = ux.mul_dealiased(&apply_a(u, l));
    term2.sub(&term1).axpy(c::<T>(-2.0), &term3)
}

/// The pressure gradient d_x P = -A_l^{-1} C_l(u).
pub fn pressure_gradient<T: Real>(u: &PeriodicField<T>, l: usize) -> PeriodicField<T> {
    invert_a(&c_l_source(u, l), l).scale(-T::one())
}

/// Right-hand side of the evolution equation: -u u' - d_x P.
pub fn rhs<T: Real>(u: &PeriodicField<T>, l: usize) -> PeriodicField<T> {
    u.mul_dealiased(&u.derivative(1))
        .add(&pressure_gradient(u, l))
        .scale(-T::one())
}

/// Cross-check route: P = A_l^{-1} F_l(u) with F_l the exact antiderivative
/// of -C_l, so d_x P comes out of one derivative instead of one integration.
/// For l = 1 this is the classical d_x (1 - d_x^2)^{-1} (u^2 + u'^2/2).
pub fn rhs_via_antiderivative<T: Real>(u: &PeriodicField<T>, l: usize) -> Result<PeriodicField<T>> {
    let f = diffpoly::antiderivative_f(l)?;
    let p = invert_a(&f.evaluate(u), l);
    Ok(u.mul_dealiased(&u.derivative(1)).add(&p.derivative(1)).scale(-T::one()))
}

/// Momentum density m = u - u''.
pub fn momentum<T: Real>(u: &PeriodicField<T>) -> PeriodicField<T> {
    u.sub(&u.derivative(2))
}

fn blow_up_check<T: Real>(u: &PeriodicField<T>, t: T) -> Result<()> {
    if u.has_nan() {
        return Err(Error::BlowUp {
            time: t.to_f64().unwrap_or(f64::NAN),
            reason: "NaN in solution values".into(),
        });
    }
    let w = u.w_inf_norm(1);
    if w > c::<T>(1e6) {
        return Err(Error::BlowUp {
            time: t.to_f64().unwrap_or(f64::NAN),
            reason: format!("W^(1,inf) norm reached {:e}", w.to_f64().unwrap_or(f64::NAN)),
        });
    }
    Ok(())
}

/// One classical fourth-order step. Fails when the stepped state has blown up
/// (NaN or slope proxy beyond 1e6).
pub fn step<T: Real>(state: &ChState<T>, dt: T) -> Result<ChState<T>> {
    assert!(dt > T::zero(), "time step must be positive");
    let u = &state.u;
    let l = state.l;
    let half = c::<T>(0.5);
    let sixth = c::<T>(1.0 / 6.0);

    let k1 = rhs(u, l);
    let k2 = rhs(&u.axpy(half * dt, &k1), l);
    let k3 = rhs(&u.axpy(half * dt, &k2), l);
    let k4 = rhs(&u.axpy(dt, &k3), l);

    let incr = k1
        .add(&k4)
        .axpy(c::<T>(2.0), &k2)
        .axpy(c::<T>(2.0), &k3)
        .scale(sixth * dt);
    let next = ChState {
        u: u.add(&incr),
        l,
        t: state.t + dt,
    };
    blow_up_check(&next.u, next.t)?;
    Ok(next)
}

/// Whether a step of size dt violates the advective stability proxy
/// dt * ||u||_inf * n <= 1.
pub fn cfl_violated<T: Real>(state: &ChState<T>, dt: T) -> bool {
    let n = c::<T>(state.grid().len() as f64);
    dt * state.u.sup_norm() * n > T::one()
}

#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    /// States at uniform spacing dt, starting with the initial state.
    pub states: Vec<ChState<T>>,
    pub dt: T,
    /// True when any step exceeded the advective stability proxy.
    pub cfl_violated: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &ChState<T> {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Largest relative deviation of the H^s norm from its initial value.
    pub fn h_norm_drift(&self, s: T) -> T {
        let base = self.states[0].u.h_norm(s);
        self.states
            .iter()
            .map(|st| (st.u.h_norm(s) - base).abs() / base)
            .fold(T::zero(), T::max)
    }

    /// Largest relative deviation of the quadratic invariant of the order-l
    /// flow, the A_l energy (integral of u A_l u; the H^1 norm when l = 1).
    pub fn a_energy_drift(&self) -> T {
        let l = self.states[0].l;
        let base = self.states[0].u.a_energy_norm(l);
        self.states
            .iter()
            .map(|st| (st.u.a_energy_norm(l) - base).abs() / base)
            .fold(T::zero(), T::max)
    }
}

/// Integrates to t_end in uniform steps of (approximately) dt, recording
/// every state. The step count is rounded so the final time is hit exactly.
pub fn integrate<T: Real>(initial: ChState<T>, t_end: T, dt: T) -> Result<Trajectory<T>> {
    assert!(t_end > T::zero() && dt > T::zero());
    let steps = (t_end / dt).to_f64().unwrap().round().max(1.0) as usize;
    let dt = t_end / c::<T>(steps as f64);
    let mut states = Vec::with_capacity(steps + 1);
    let mut cfl = false;
    let t0 = initial.t;
    states.push(initial);
    for i in 0..steps {
        let cur = states.last().unwrap();
        cfl |= cfl_violated(cur, dt);
        let mut next = step(cur, dt)?;
        // Multiplicative time stamps; t += dt drifts over long runs.
        next.t = t0 + t_end * (c::<T>((i + 1) as f64) / c::<T>(steps as f64));
        states.push(next);
    }
    Ok(Trajectory {
        states,
        dt,
        cfl_violated: cfl,
    })
}
