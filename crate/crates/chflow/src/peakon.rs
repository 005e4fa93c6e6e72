//! Crest dynamics for velocity fields that are finite sums of the kernel
//! e^{-|x - q_i|} on the line, plus the periodic traveling crest.
//!
//! A field u = sum_i p_i e^{-|x - q_i|} keeps that form as it evolves; the
//! positions q and amplitudes p obey the canonical system of the interaction
//! energy H(q, p) = (1/2) sum_{ij} p_i p_j e^{-|q_i - q_j|},
//!
//!   dq_i/dt = dH/dp_i,   dp_i/dt = -dH/dq_i.
//!
//! Only this normalization conserves H and makes a lone crest travel at a
//! speed equal to its height, so it is the ground truth here; the H^1 energy
//! of the field is exactly 4H. Same-sign crests exchange mass and never
//! cross; an opposite-sign pair can collide in finite time, the amplitudes
//! blowing up like 1/t while both positions stay analytic. The two-body
//! collision has a closed form, and the energy- and momentum-conserving
//! continuation through it is provided with a choice of labeling: one choice
//! keeps each trajectory analytic, the other swaps the two labels and shows
//! a jump in the second derivative.

use serde::{Deserialize, Serialize};

use crate::field::{PeriodicField, PeriodicGrid};
use crate::real::Real;
use crate::{c, Error, Result};

/// Pairwise crest distance below which a close approach counts as a
/// collision event; its reciprocal is the amplitude blow-up threshold.
pub const COLLISION_EPS: f64 = 1e-6;

/// Crests closer than this are treated as coincident by `is_separated`.
pub const SEPARATION_EPS: f64 = 1e-12;

/// Below this gap the interaction sign is numerically unreliable and `rhs`
/// emits a warning on stderr.
const SIGN_WARN_EPS: f64 = 1e-9;

/// Crests within this distance of a triggering pair's midpoint are listed in
/// the event, so pileups of three or more bodies can be refused downstream.
/// Far above the collision threshold, far below typical crest spacing.
const CLUSTER_RADIUS: f64 = 1e-3;

/// Positions, amplitudes and the clock of a finite crest configuration.
#[derive(Clone, Debug, Serialize)]
pub struct PeakonState<T> {
    q: Vec<T>,
    p: Vec<T>,
    t: T,
}

impl<T: Real> PeakonState<T> {
    pub fn new(q: Vec<T>, p: Vec<T>, t: T) -> Self {
        assert!(!q.is_empty(), "a crest state needs at least one crest");
        assert_eq!(q.len(), p.len(), "positions and amplitudes must pair up");
        PeakonState { q, p, t }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn p(&self) -> &[T] {
        &self.p
    }

    pub fn t(&self) -> T {
        self.t
    }

    /// Smallest pairwise distance; infinite for a single crest.
    pub fn min_gap(&self) -> T {
        self.closest_pair()
            .map_or(T::infinity(), |(_, _, gap)| gap)
    }

    pub fn is_separated(&self) -> bool {
        self.min_gap() > c::<T>(SEPARATION_EPS)
    }

    fn closest_pair(&self) -> Option<(usize, usize, T)> {
        let mut best: Option<(usize, usize, T)> = None;
        for i in 0..self.n() {
            for j in i + 1..self.n() {
                let gap = (self.q[i] - self.q[j]).abs();
                if best.map_or(true, |(_, _, b)| gap < b) {
                    best = Some((i, j, gap));
                }
            }
        }
        best
    }

    /// The velocity field at x: sum of p_i e^{-|x - q_i|}.
    pub fn u_field(&self, x: T) -> T {
        self.q
            .iter()
            .zip(&self.p)
            .map(|(&qi, &pi)| pi * (-(x - qi).abs()).exp())
            .sum()
    }

    /// The momentum u - u'' of the field, a list of point masses
    /// (position, weight) with weight 2 p_i. Smearing each mass with the
    /// kernel (1/2) e^{-|x - y|} reproduces `u_field` exactly.
    pub fn momentum_measure(&self) -> Vec<(T, T)> {
        let two = c::<T>(2.0);
        self.q
            .iter()
            .zip(&self.p)
            .map(|(&qi, &pi)| (qi, two * pi))
            .collect()
    }

    /// Interaction energy H = (1/2) sum_{ij} p_i p_j e^{-|q_i - q_j|},
    /// diagonal included.
    pub fn hamiltonian(&self) -> T {
        let mut h = T::zero();
        for i in 0..self.n() {
            for j in 0..self.n() {
                h = h + self.p[i] * self.p[j] * (-(self.q[i] - self.q[j]).abs()).exp();
            }
        }
        h / c::<T>(2.0)
    }

    /// The squared H^1 norm of the field over the whole line, which is 4H.
    pub fn h1_energy(&self) -> T {
        c::<T>(4.0) * self.hamiltonian()
    }

    pub fn total_momentum(&self) -> T {
        self.p.iter().copied().sum()
    }

    /// Right-hand side (dq/dt, dp/dt) of the canonical system, with the
    /// self-interaction convention sign(0) = 0 so a single crest reduces to
    /// uniform translation at its own height.
    pub fn rhs(&self) -> (Vec<T>, Vec<T>) {
        if self.min_gap() < c::<T>(SIGN_WARN_EPS) {
            eprintln!(
                "warning: two crest positions agree to within {SIGN_WARN_EPS:e}; \
                 interaction signs are unreliable"
            );
        }
        let n = self.n();
        let mut dq = vec![T::zero(); n];
        let mut dp = vec![T::zero(); n];
        for i in 0..n {
            for j in 0..n {
                let kernel = (-(self.q[i] - self.q[j]).abs()).exp();
                dq[i] = dq[i] + self.p[j] * kernel;
                dp[i] = dp[i] + self.p[i] * self.p[j] * sign0(self.q[i] - self.q[j]) * kernel;
            }
        }
        (dq, dp)
    }
}

fn sign0<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Which post-collision branch labels continue the incoming trajectories.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Labeling {
    /// One globally analytic formula per crest through the collision.
    Analytic,
    /// Labels exchanged after the collision: trajectories stay continuous
    /// with continuous speed, but each second derivative jumps by 2|c1 c2|.
    Swapped,
}

/// A close approach or amplitude blow-up; integration stops here.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct CollisionEvent<T> {
    /// Time at which a detection threshold was first crossed.
    pub time: T,
    /// The closest pair at detection.
    pub indices: (usize, usize),
    /// Incoming asymptotic speeds (c1 >= c2) of that pair, recovered from
    /// its conserved momentum and interaction energy.
    pub speeds: (T, T),
    /// Midpoint of the pair at detection.
    pub position: T,
    /// Extrapolated instant of coincidence: detection time plus the time the
    /// remaining gap needs to close at the recovered speeds. Equal to the
    /// detection time when the speeds do not predict a coincidence.
    pub predicted_time: T,
    /// Indices of every crest near the pair's midpoint, the pair included.
    pub involved: Vec<usize>,
    /// Filled once a continuation branch has been chosen.
    pub labeling: Option<Labeling>,
}

/// Crest trajectory with uniform stepping, ending early at an event.
#[derive(Clone, Debug)]
pub struct PeakonTrajectory<T: Real> {
    pub states: Vec<PeakonState<T>>,
    pub dt: T,
    pub event: Option<CollisionEvent<T>>,
}

impl<T: Real> PeakonTrajectory<T> {
    pub fn last(&self) -> &PeakonState<T> {
        self.states.last().expect("a trajectory is never empty")
    }

    /// Largest deviation of H from its initial value, relative to that value
    /// (absolute when the initial energy vanishes).
    pub fn hamiltonian_drift(&self) -> T {
        let h0 = self.states[0].hamiltonian();
        let scale = if h0 == T::zero() { T::one() } else { h0.abs() };
        self.states
            .iter()
            .fold(T::zero(), |m, s| m.max((s.hamiltonian() - h0).abs()))
            / scale
    }

    /// Largest absolute deviation of sum p_i from its initial value.
    pub fn momentum_drift(&self) -> T {
        let m0 = self.states[0].total_momentum();
        self.states
            .iter()
            .fold(T::zero(), |m, s| m.max((s.total_momentum() - m0).abs()))
    }

    /// Smallest pairwise distance seen anywhere along the trajectory.
    pub fn min_gap(&self) -> T {
        self.states
            .iter()
            .fold(T::infinity(), |m, s| m.min(s.min_gap()))
    }
}

/// Steps the canonical system with classical RK4 for a duration `t_end`,
/// stopping early with an event when two crests approach within
/// `COLLISION_EPS` or an amplitude passes 1/`COLLISION_EPS`. The step count
/// is rounded so the final time is hit exactly.
pub fn integrate<T: Real>(state: &PeakonState<T>, t_end: T, dt: T) -> PeakonTrajectory<T> {
    assert!(dt > T::zero(), "time step must be positive");
    assert!(t_end >= T::zero(), "integration duration must be nonnegative");
    let steps = (t_end / dt)
        .round()
        .to_usize()
        .map_or(1, |s| s.max(1));
    let steps = if t_end == T::zero() { 0 } else { steps };
    let dt = if steps == 0 {
        dt
    } else {
        t_end / c::<T>(steps as f64)
    };

    let mut states = vec![state.clone()];
    let mut event = None;
    let t0 = state.t;
    for i in 0..steps {
        let mut next = rk4_step(states.last().expect("nonempty"), dt);
        // Stamp times multiplicatively: accumulating t += dt drifts by the
        // step count times an ulp, and the end time must come out exact.
        next.t = t0 + t_end * (c::<T>((i + 1) as f64) / c::<T>(steps as f64));
        states.push(next);
        if let Some(ev) = detect_event(states.last().expect("nonempty")) {
            event = Some(ev);
            break;
        }
    }
    PeakonTrajectory { states, dt, event }
}

fn rk4_step<T: Real>(s: &PeakonState<T>, dt: T) -> PeakonState<T> {
    let half = dt / c::<T>(2.0);
    let (k1q, k1p) = s.rhs();
    let (k2q, k2p) = offset_state(s, &k1q, &k1p, half).rhs();
    let (k3q, k3p) = offset_state(s, &k2q, &k2p, half).rhs();
    let (k4q, k4p) = offset_state(s, &k3q, &k3p, dt).rhs();
    let w = dt / c::<T>(6.0);
    let two = c::<T>(2.0);
    let combine = |x0: &[T], k1: &[T], k2: &[T], k3: &[T], k4: &[T]| {
        (0..x0.len())
            .map(|i| x0[i] + w * (k1[i] + two * (k2[i] + k3[i]) + k4[i]))
            .collect::<Vec<T>>()
    };
    PeakonState {
        q: combine(&s.q, &k1q, &k2q, &k3q, &k4q),
        p: combine(&s.p, &k1p, &k2p, &k3p, &k4p),
        t: s.t + dt,
    }
}

fn offset_state<T: Real>(s: &PeakonState<T>, dq: &[T], dp: &[T], a: T) -> PeakonState<T> {
    PeakonState {
        q: s.q.iter().zip(dq).map(|(&x, &d)| x + a * d).collect(),
        p: s.p.iter().zip(dp).map(|(&x, &d)| x + a * d).collect(),
        t: s.t + a,
    }
}

fn detect_event<T: Real>(state: &PeakonState<T>) -> Option<CollisionEvent<T>> {
    let eps = c::<T>(COLLISION_EPS);
    let max_p = state
        .p
        .iter()
        .fold(T::zero(), |m, &v| m.max(v.abs()));
    let pair = state.closest_pair();
    let gap_trigger = pair.map_or(false, |(_, _, gap)| gap < eps);
    if !gap_trigger && max_p <= T::one() / eps && max_p.is_finite() {
        return None;
    }

    let (i, j, gap) = pair.unwrap_or((0, 0, T::zero()));
    let (c1, c2) = if i == j {
        (state.p[i], state.p[i])
    } else {
        pair_speeds(state.p[i], state.p[j], gap)
    };
    let position = (state.q[i] + state.q[j]) / c::<T>(2.0);
    let prod = c1 * c2;
    let predicted_time = if prod < T::zero() {
        state.t + (gap / -prod).sqrt()
    } else {
        state.t
    };
    let radius = c::<T>(CLUSTER_RADIUS);
    let involved = (0..state.n())
        .filter(|&k| (state.q[k] - position).abs() < radius)
        .collect();
    Some(CollisionEvent {
        time: state.t,
        indices: (i, j),
        speeds: (c1, c2),
        position,
        predicted_time,
        involved,
        labeling: None,
    })
}

/// Asymptotic speeds of an isolated pair from its conserved quantities: the
/// momentum m = p_i + p_j and energy h = (p_i^2 + p_j^2)/2 + p_i p_j e^{-gap}
/// equal m = c1 + c2 and h = (c1^2 + c2^2)/2 once the pair separates, so the
/// speeds are the roots of x^2 - m x + (m^2 - 2h)/2.
fn pair_speeds<T: Real>(pi: T, pj: T, gap: T) -> (T, T) {
    let two = c::<T>(2.0);
    let m = pi + pj;
    let h = (pi * pi + pj * pj) / two + pi * pj * (-gap).exp();
    let disc = (two * two * h - m * m).max(T::zero());
    let root = disc.sqrt();
    ((m + root) / two, (m - root) / two)
}

/// The two crest trajectories of a two-body collision with incoming speeds
/// c1 > 0 > c2, coincident at (t, x) = (0, 0). Both denominators are
/// positive for every t, so each formula is real-analytic on the whole line;
/// near the origin q1 - q2 ~ c1 c2 t^2.
fn collision_positions<T: Real>(c1: T, c2: T, s: T) -> (T, T) {
    let span = c1 - c2;
    let dm = c1 * (-c1 * s).exp() - c2 * (-c2 * s).exp();
    let dp = c1 * (c1 * s).exp() - c2 * (c2 * s).exp();
    ((span / dm).ln(), -(span / dp).ln())
}

fn collision_velocities<T: Real>(c1: T, c2: T, s: T) -> (T, T) {
    let dm = c1 * (-c1 * s).exp() - c2 * (-c2 * s).exp();
    let dp = c1 * (c1 * s).exp() - c2 * (c2 * s).exp();
    let nm = c1 * c1 * (-c1 * s).exp() - c2 * c2 * (-c2 * s).exp();
    let np = c1 * c1 * (c1 * s).exp() - c2 * c2 * (c2 * s).exp();
    (nm / dm, np / dp)
}

/// Solves dq1/dt = p1 + p2 E, dq2/dt = p1 E + p2 with E = e^{-|q1 - q2|} for
/// the amplitudes. Singular where the crests coincide.
fn amplitudes_from_velocities<T: Real>(q1: T, q2: T, v1: T, v2: T) -> Result<(T, T)> {
    let gap = (q1 - q2).abs();
    let e = (-gap).exp();
    // 1 - E via exp_m1 stays accurate when the gap is far below machine
    // precision relative to 1.
    let one_minus = -(-gap).exp_m1();
    let denom = one_minus * (T::one() + e);
    if !(denom > T::zero()) {
        return Err(Error::Invalid(
            "amplitudes are singular where the crests coincide".into(),
        ));
    }
    Ok(((v1 - e * v2) / denom, (v2 - e * v1) / denom))
}

fn check_speeds<T: Real>(c1: T, c2: T) -> Result<()> {
    if c1 > T::zero() && c2 < T::zero() {
        Ok(())
    } else {
        Err(Error::Invalid(format!(
            "collision closed form needs speeds c1 > 0 > c2, got ({}, {})",
            c1.to_f64().unwrap_or(f64::NAN),
            c2.to_f64().unwrap_or(f64::NAN)
        )))
    }
}

/// Positions (q1, q2) of the crest-anticrest pair with incoming speeds
/// c1 > 0 > c2 that collides at the space-time origin, under the analytic
/// labeling (a single formula per crest, valid for all t).
pub fn exact_antisym_collision<T: Real>(c1: T, c2: T, t: T) -> Result<(T, T)> {
    check_speeds(c1, c2)?;
    Ok(collision_positions(c1, c2, t))
}

/// Full state of the colliding pair at time t. The amplitudes come from the
/// position derivatives, so they inherit the 1/t blow-up and the collision
/// instant itself is an error.
pub fn exact_antisym_state<T: Real>(c1: T, c2: T, t: T) -> Result<PeakonState<T>> {
    check_speeds(c1, c2)?;
    let (q1, q2) = collision_positions(c1, c2, t);
    let (v1, v2) = collision_velocities(c1, c2, t);
    let (p1, p2) = amplitudes_from_velocities(q1, q2, v1, v2)?;
    Ok(PeakonState::new(vec![q1, q2], vec![p1, p2], t))
}

/// Closed-form two-body trajectory glued through its collision, centered at
/// the event's predicted time and position.
#[derive(Clone, Debug)]
pub struct GluedCollision<T> {
    c1: T,
    c2: T,
    t0: T,
    x0: T,
    labeling: Labeling,
}

/// Maps a detected two-body event onto the collision closed form with the
/// requested labeling. Refuses pileups of three or more bodies and events
/// whose recovered speeds are not of opposite sign.
pub fn conservative_continuation<T: Real>(
    event: &CollisionEvent<T>,
    labeling: Labeling,
) -> Result<GluedCollision<T>> {
    if event.involved.len() > 2 {
        return Err(Error::Invalid(format!(
            "refusing a pileup of {} bodies; only pairwise collisions continue",
            event.involved.len()
        )));
    }
    let (c1, c2) = event.speeds;
    check_speeds(c1, c2)?;
    Ok(GluedCollision {
        c1,
        c2,
        t0: event.predicted_time,
        x0: event.position,
        labeling,
    })
}

impl<T: Real> GluedCollision<T> {
    pub fn speeds(&self) -> (T, T) {
        (self.c1, self.c2)
    }

    pub fn labeling(&self) -> Labeling {
        self.labeling
    }

    pub fn collision_time(&self) -> T {
        self.t0
    }

    pub fn collision_position(&self) -> T {
        self.x0
    }

    /// Crest positions at time t. Under the swapped labeling the two labels
    /// are exchanged after the collision instant.
    pub fn positions(&self, t: T) -> (T, T) {
        let s = t - self.t0;
        let (a, b) = collision_positions(self.c1, self.c2, s);
        let (a, b) = self.relabel(s, a, b);
        (a + self.x0, b + self.x0)
    }

    pub fn velocities(&self, t: T) -> (T, T) {
        let s = t - self.t0;
        let (a, b) = collision_velocities(self.c1, self.c2, s);
        self.relabel(s, a, b)
    }

    fn relabel(&self, s: T, a: T, b: T) -> (T, T) {
        if self.labeling == Labeling::Swapped && s > T::zero() {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// The state at time t, amplitudes reconstructed from the position
    /// derivatives; errors at the collision instant where they blow up.
    pub fn state(&self, t: T) -> Result<PeakonState<T>> {
        let (q1, q2) = self.positions(t);
        let (v1, v2) = self.velocities(t);
        let (p1, p2) = amplitudes_from_velocities(q1, q2, v1, v2)?;
        Ok(PeakonState::new(vec![q1, q2], vec![p1, p2], t))
    }

    /// The conserved squared H^1 norm carried through the gluing.
    pub fn h1_energy(&self) -> T {
        c::<T>(2.0) * (self.c1 * self.c1 + self.c2 * self.c2)
    }
}

/// Height of the periodic traveling crest of speed c as a function of the
/// phase y = x - c t, reduced mod 1. The crest sits at phase 0 with height
/// exactly c; the prefactor is c tanh(1/2) over 1 - e^{-1}.
pub fn periodic_peakon_profile<T: Real>(c: T, y: T) -> T {
    let y = y - y.floor();
    let em1 = (-T::one()).exp();
    // The quotient is computed before scaling by c so that the crest value
    // is exactly c: at y = 0 numerator and denominator are the same bits.
    c * (((-y).exp() + (y - T::one()).exp()) / (T::one() + em1))
}

/// The prefactor gamma = c tanh(1/2) multiplying the periodized kernel.
pub fn periodic_peakon_gamma<T: Real>(c: T) -> T {
    let two = T::one() + T::one();
    c * (T::one() / two).tanh()
}

/// The periodic traveling crest sampled on the grid at time t.
pub fn periodic_peakon<T: Real>(c: T, t: T, grid: PeriodicGrid) -> PeriodicField<T> {
    PeriodicField::from_fn(grid, |x| periodic_peakon_profile(c, x - c * t))
}
