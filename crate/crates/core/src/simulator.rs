//! Time-domain cycling of the ladder model.
//!
//! Explicit forward-Euler integration of the Morrison network under a
//! constant terminal current, with voltage-limit crossings located by
//! linear interpolation inside the step. The network state is the set of
//! branch-capacitor voltages plus the terminating-capacitor voltage
//! `v_ct`, which is also the CPE terminal voltage; the absolute cell
//! voltage is `v_offset + v_ct + i * r_s`.

use crate::error::{Error, Result};
use crate::fitting::CapacityCurve;
use crate::fractional::{CapacityPoint, CycleProtocol};
use crate::morrison::MorrisonNetwork;

/// Default step fraction of the smallest branch time constant.
const DT_TAU_FRACTION: f64 = 0.25;
/// Hard stability ceiling for the explicit scheme.
const DT_TAU_LIMIT: f64 = 0.5;
/// At most this many trace samples are stored per cycle.
const MAX_SAMPLES_PER_CYCLE: usize = 20_000;

/// Dynamic state of a Morrison network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    t: f64,
    v_branch: Vec<f64>,
    v_ct: f64,
    /// Net charge fed through the terminal since construction, A·s.
    charge_in: f64,
    /// Energy dissipated in the branch resistors since construction, J.
    dissipated: f64,
    v_branch_init: Vec<f64>,
    v_ct_init: f64,
}

impl SimState {
    /// Fully relaxed network: every capacitor at voltage `v`.
    pub fn relaxed(net: &MorrisonNetwork, v: f64) -> Self {
        let v_branch = vec![v; net.branches().len()];
        Self {
            t: 0.0,
            v_branch: v_branch.clone(),
            v_ct: v,
            charge_in: 0.0,
            dissipated: 0.0,
            v_branch_init: v_branch,
            v_ct_init: v,
        }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn v_ct(&self) -> f64 {
        self.v_ct
    }

    pub fn v_branch(&self) -> &[f64] {
        &self.v_branch
    }

    pub fn charge_in(&self) -> f64 {
        self.charge_in
    }

    pub fn dissipated_energy(&self) -> f64 {
        self.dissipated
    }

    /// Charge stored in the capacitors relative to the initial state.
    pub fn charge_stored(&self, net: &MorrisonNetwork) -> f64 {
        let mut q = net.c_t() * (self.v_ct - self.v_ct_init);
        for (b, (&v, &v0)) in net
            .branches()
            .iter()
            .zip(self.v_branch.iter().zip(&self.v_branch_init))
        {
            q += b.c * (v - v0);
        }
        q
    }

    /// Kirchhoff bookkeeping error, relative to the charge moved.
    pub fn charge_error(&self, net: &MorrisonNetwork) -> f64 {
        let moved = self.charge_in.abs().max(1e-30);
        (self.charge_stored(net) - self.charge_in).abs() / moved
    }
}

fn check_dt(net: &MorrisonNetwork, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "dt must be positive, got {dt}"
        )));
    }
    let limit = DT_TAU_LIMIT * net.tau_min();
    if dt > limit {
        return Err(Error::UnstableTimeStep { dt, limit });
    }
    Ok(())
}

/// Sum of branch currents out of the terminal node at the current state.
fn branch_current_sum(net: &MorrisonNetwork, state: &SimState) -> f64 {
    net.branches()
        .iter()
        .zip(&state.v_branch)
        .map(|(b, &v)| (state.v_ct - v) / b.r)
        .sum()
}

/// Commit one explicit-Euler step of length `dt` under terminal current
/// `i_terminal`. `i_sum` must be `branch_current_sum` evaluated before
/// the commit.
fn commit_step(net: &MorrisonNetwork, state: &mut SimState, i_terminal: f64, i_sum: f64, dt: f64) {
    let mut dissipated = 0.0;
    for (b, v) in net.branches().iter().zip(state.v_branch.iter_mut()) {
        let i_k = (state.v_ct - *v) / b.r;
        *v += i_k * dt / b.c;
        dissipated += i_k * i_k * b.r;
    }
    state.v_ct += (i_terminal - i_sum) * dt / net.c_t();
    state.t += dt;
    state.charge_in += i_terminal * dt;
    state.dissipated += dissipated * dt;
}

/// Advance the network one step of `dt` seconds under `i_terminal`.
///
/// Pure: returns the advanced state. Positive current charges the
/// network. Fails when `dt` exceeds half the smallest branch time
/// constant (explicit-scheme stability bound).
pub fn step(net: &MorrisonNetwork, state: &SimState, i_terminal: f64, dt: f64) -> Result<SimState> {
    check_dt(net, dt)?;
    let mut next = state.clone();
    let i_sum = branch_current_sum(net, &next);
    commit_step(net, &mut next, i_terminal, i_sum, dt);
    Ok(next)
}

/// One recorded point of a cycling trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub v_terminal: f64,
    pub i: f64,
}

/// Result of `run_cycles`: the (downsampled) trace, the capacity read
/// from the final discharge, and the number of cycles completed.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub trace: Vec<TraceSample>,
    pub capacity: CapacityPoint,
    pub n_cycles_run: usize,
}

/// Time-step selection for a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtPolicy {
    /// `0.25 * tau_min` of the network (the integration default).
    FromTauMin,
    /// Explicit override, still subject to the stability ceiling.
    Fixed(f64),
}

impl DtPolicy {
    pub fn resolve(&self, net: &MorrisonNetwork) -> f64 {
        match *self {
            DtPolicy::FromTauMin => DT_TAU_FRACTION * net.tau_min(),
            DtPolicy::Fixed(dt) => dt,
        }
    }
}

struct CyclingRun<'a> {
    net: &'a MorrisonNetwork,
    r_s: f64,
    v_offset: f64,
    dt: f64,
    state: SimState,
}

enum Phase {
    Discharge,
    Charge,
}

impl<'a> CyclingRun<'a> {
    /// Run one constant-current phase until the terminal voltage crosses
    /// `v_stop`, rolling the state to the interpolated crossing time.
    /// Returns the phase duration and appends samples to `trace`.
    fn run_phase(
        &mut self,
        i0: f64,
        phase: Phase,
        v_stop: f64,
        trace: &mut Vec<TraceSample>,
    ) -> f64 {
        let (i_term, descending) = match phase {
            Phase::Discharge => (-i0, true),
            Phase::Charge => (i0, false),
        };
        let t_start = self.state.t;
        let v_term = |v_ct: f64| self.v_offset + v_ct + i_term * self.r_s;
        loop {
            let i_sum = branch_current_sum(self.net, &self.state);
            let dv_ct = (i_term - i_sum) * self.dt / self.net.c_t();
            let v_next = v_term(self.state.v_ct + dv_ct);
            let crossed = if descending { v_next <= v_stop } else { v_next >= v_stop };
            if crossed {
                let v_prev = v_term(self.state.v_ct);
                // One voltage step brackets the limit; interpolate inside it.
                let theta = if (v_next - v_prev).abs() > 0.0 {
                    ((v_stop - v_prev) / (v_next - v_prev)).clamp(0.0, 1.0)
                } else {
                    1.0
                };
                commit_step(self.net, &mut self.state, i_term, i_sum, theta * self.dt);
                trace.push(TraceSample {
                    t: self.state.t,
                    v_terminal: v_stop,
                    i: i_term,
                });
                return self.state.t - t_start;
            }
            commit_step(self.net, &mut self.state, i_term, i_sum, self.dt);
            trace.push(TraceSample {
                t: self.state.t,
                v_terminal: v_term(self.state.v_ct),
                i: i_term,
            });
        }
    }

    fn run_cycles(&mut self, protocol: &CycleProtocol, n_cycles: usize) -> Result<CycleResult> {
        let delta_v = protocol.delta_v();
        let resistive_drop = 2.0 * protocol.i0 * self.r_s;
        if resistive_drop >= delta_v {
            return Err(Error::ResistiveWindowExhausted {
                resistive_drop,
                delta_v,
                i_x: delta_v / (2.0 * self.r_s),
            });
        }
        let mut trace = Vec::new();
        let mut t_final_discharge = 0.0;
        for _ in 0..n_cycles {
            let mut cycle_trace = Vec::new();
            t_final_discharge =
                self.run_phase(protocol.i0, Phase::Discharge, protocol.v_l, &mut cycle_trace);
            self.run_phase(protocol.i0, Phase::Charge, protocol.v_h, &mut cycle_trace);
            downsample(&mut cycle_trace, MAX_SAMPLES_PER_CYCLE);
            trace.extend(cycle_trace);
        }
        Ok(CycleResult {
            trace,
            capacity: CapacityPoint::new(protocol.i0, protocol.i0 * t_final_discharge)?,
            n_cycles_run: n_cycles,
        })
    }
}

fn downsample(samples: &mut Vec<TraceSample>, max_len: usize) {
    if samples.len() <= max_len {
        return;
    }
    let stride = samples.len().div_ceil(max_len);
    let last = *samples.last().unwrap();
    let mut kept: Vec<TraceSample> = samples.iter().copied().step_by(stride).collect();
    if kept.last() != Some(&last) {
        kept.push(last);
    }
    *samples = kept;
}

/// Cycle the network between the protocol's voltage limits for
/// `n_cycles` (each cycle: discharge to `v_l`, then charge to `v_h`),
/// starting from a relaxed, fully charged network at `v_init`.
///
/// Capacity is the charge drawn in the final discharge. The trace keeps
/// at most 20 000 samples per cycle.
pub fn run_cycles(
    net: &MorrisonNetwork,
    r_s: f64,
    protocol: &CycleProtocol,
    v_init: f64,
    n_cycles: usize,
    dt: f64,
) -> Result<CycleResult> {
    if n_cycles < 1 {
        return Err(Error::InvalidParameter("n_cycles must be >= 1".into()));
    }
    if !(protocol.v_l <= v_init && v_init <= protocol.v_h) {
        return Err(Error::InvalidParameter(format!(
            "v_init {v_init} outside [{}, {}]",
            protocol.v_l, protocol.v_h
        )));
    }
    check_dt(net, dt)?;
    let mut run = CyclingRun {
        net,
        r_s,
        v_offset: v_init,
        dt,
        state: SimState::relaxed(net, 0.0),
    };
    run.run_cycles(protocol, n_cycles)
}

/// A capacity sweep: per-current cycle results plus the assembled
/// capacity-vs-current curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<(f64, CycleResult)>,
    pub curve: CapacityCurve,
}

/// Run `run_cycles` for each current in order, carrying the network
/// state from one current to the next (the battery keeps its history,
/// as in a physical measurement campaign). A single fixed `dt` from
/// `dt_policy` is used for every current so traces share a time base.
pub fn capacity_sweep(
    net: &MorrisonNetwork,
    r_s: f64,
    v_h: f64,
    v_l: f64,
    currents: &[f64],
    n_cycles: usize,
    dt_policy: DtPolicy,
) -> Result<SweepResult> {
    if currents.is_empty() {
        return Err(Error::InvalidParameter("current list is empty".into()));
    }
    if n_cycles < 1 {
        return Err(Error::InvalidParameter("n_cycles must be >= 1".into()));
    }
    let dt = dt_policy.resolve(net);
    check_dt(net, dt)?;
    let protocols: Vec<CycleProtocol> = currents
        .iter()
        .map(|&i0| CycleProtocol::new(i0, v_h, v_l))
        .collect::<Result<_>>()?;

    let mut run = CyclingRun {
        net,
        r_s,
        v_offset: v_h, // fully charged start
        dt,
        state: SimState::relaxed(net, 0.0),
    };
    let mut runs = Vec::with_capacity(currents.len());
    let mut points = Vec::with_capacity(currents.len());
    for protocol in &protocols {
        let result = run.run_cycles(protocol, n_cycles)?;
        points.push(result.capacity);
        runs.push((protocol.i0, result));
    }
    Ok(SweepResult {
        runs,
        curve: CapacityCurve::new(points, v_h - v_l)?,
    })
}
