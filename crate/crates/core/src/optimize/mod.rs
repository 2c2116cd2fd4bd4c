//! Convex quadratic programs for the aggregator's decisions: the
//! scenario-based day-ahead commitment problem, the hour-by-hour
//! real-time recourse problem, and single-scenario baselines of both.
//!
//! Conventions: hours and storage states are 0-based here (slot `t`
//! covers paper hour `t+1`; `state t` is the storage level entering slot
//! `t`, with `state 24` the end-of-day level). Public entry points that
//! speak about "the hour t" take the 1-based value. Problems are posed
//! as `min 0.5 z'Pz + q'z` subject to `Az = b`, `Gz <= h`.

mod solver;

use std::collections::HashMap;

use crate::core::{AggregatorSpec, BidSchedule, HOURS_PER_DAY};
use crate::error::{Error, Result};
use crate::scenario::{cross_product, JointScenarioSet, Quantity, Scenario, ScenarioSet};

/// Default KKT-residual tolerance for [`solve`].
pub const DEFAULT_TOL: f64 = 1e-6;

/// Identity of one decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    /// Day-ahead commitment c for one 0-based hour (shared across
    /// scenarios).
    Commitment { hour: u8 },
    /// Real-time bid x; `scenario: None` marks the here-and-now hour of
    /// a real-time problem.
    RtBid { hour: u8, scenario: Option<u16> },
    /// Storage level entering slot `state` (0..=24).
    Storage { state: u8, scenario: Option<u16> },
    /// Epigraph variable u >= |c + x| carrying the network-usage cost.
    Exchange { hour: u8, scenario: Option<u16> },
}

/// Scenario-block metadata: the augmented-system indices (variable `j`
/// maps to `j`, equality row `r` to `n + r`) of each per-scenario block,
/// listed in an elimination order that keeps the block matrix banded.
/// Indices absent from every block are shared.
#[derive(Debug, Clone)]
pub(crate) struct BlockStructure {
    pub(crate) blocks: Vec<Vec<usize>>,
}

/// A convex QP in sparse triplet form plus the variable index map.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub(crate) n: usize,
    /// Symmetric cost matrix entries, stored once with i <= j.
    pub(crate) p_entries: Vec<(usize, usize, f64)>,
    pub(crate) q: Vec<f64>,
    pub(crate) a_entries: Vec<(usize, usize, f64)>,
    pub(crate) b: Vec<f64>,
    /// Inequality rows `g . z <= h`, one nonzero list per row.
    pub(crate) g_rows: Vec<Vec<(usize, f64)>>,
    pub(crate) h: Vec<f64>,
    pub(crate) variables: Vec<Variable>,
    pub(crate) index: HashMap<Variable, usize>,
    pub(crate) blocks: Option<BlockStructure>,
}

impl QuadraticProgram {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        p_entries: Vec<(usize, usize, f64)>,
        q: Vec<f64>,
        a_entries: Vec<(usize, usize, f64)>,
        b: Vec<f64>,
        g_rows: Vec<Vec<(usize, f64)>>,
        h: Vec<f64>,
        variables: Vec<Variable>,
        blocks: Option<BlockStructure>,
    ) -> Result<Self> {
        let n = q.len();
        if variables.len() != n {
            return Err(Error::InvalidSpec(format!(
                "{} variable names for {n} variables",
                variables.len()
            )));
        }
        let mut index = HashMap::with_capacity(n);
        for (i, v) in variables.iter().enumerate() {
            if index.insert(*v, i).is_some() {
                return Err(Error::InvalidSpec(format!("duplicate variable name {v:?}")));
            }
        }
        for &(i, j, v) in &p_entries {
            if i > j || j >= n || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("bad cost entry ({i}, {j}, {v})")));
            }
        }
        for &(r, j, v) in &a_entries {
            if r >= b.len() || j >= n || !v.is_finite() {
                return Err(Error::InvalidSpec(format!("bad equality entry ({r}, {j}, {v})")));
            }
        }
        if g_rows.len() != h.len() {
            return Err(Error::InvalidSpec(format!(
                "{} inequality rows but {} bounds",
                g_rows.len(),
                h.len()
            )));
        }
        for row in &g_rows {
            for &(j, v) in row {
                if j >= n || !v.is_finite() {
                    return Err(Error::InvalidSpec(format!("bad inequality entry ({j}, {v})")));
                }
            }
        }
        if q.iter().chain(b.iter()).chain(h.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite problem data".into()));
        }
        Ok(Self { n, p_entries, q, a_entries, b, g_rows, h, variables, index, blocks })
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_equalities(&self) -> usize {
        self.b.len()
    }

    pub fn num_inequalities(&self) -> usize {
        self.h.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn index_of(&self, v: Variable) -> Option<usize> {
        self.index.get(&v).copied()
    }

    /// Value of a named variable in a solution vector.
    pub fn value_of(&self, solution: &Solution, v: Variable) -> Option<f64> {
        self.index_of(v).map(|i| solution.values[i])
    }

    /// Objective `0.5 z'Pz + q'z` at an arbitrary point.
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        let mut quad = 0.0;
        for &(i, j, v) in &self.p_entries {
            quad += if i == j { v * z[i] * z[i] } else { 2.0 * v * z[i] * z[j] };
        }
        0.5 * quad + self.q.iter().zip(z).map(|(qi, zi)| qi * zi).sum::<f64>()
    }

    /// Pins a variable to a value by appending an equality row.
    pub fn fix_variable(&mut self, v: Variable, value: f64) -> Result<()> {
        let idx = self
            .index_of(v)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variable {v:?}")))?;
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!("cannot fix {v:?} to {value}")));
        }
        self.a_entries.push((self.b.len(), idx, 1.0));
        self.b.push(value);
        // the new row joins the shared part of the block structure, which
        // needs no bookkeeping: shared is everything outside the blocks
        Ok(())
    }

    /// Plain-text dump (dimensions, then one triplet per line) for
    /// inspection with external tools.
    pub fn dump<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "quadratic-program n {} m_eq {} m_ineq {}",
            self.n,
            self.b.len(),
            self.h.len()
        )?;
        writeln!(w, "%% P symmetric, entries with i <= j")?;
        for &(i, j, v) in &self.p_entries {
            writeln!(w, "P {i} {j} {v:.17e}")?;
        }
        writeln!(w, "%% q")?;
        for (i, v) in self.q.iter().enumerate() {
            writeln!(w, "q {i} {v:.17e}")?;
        }
        writeln!(w, "%% A z = b")?;
        for &(r, j, v) in &self.a_entries {
            writeln!(w, "A {r} {j} {v:.17e}")?;
        }
        for (r, v) in self.b.iter().enumerate() {
            writeln!(w, "b {r} {v:.17e}")?;
        }
        writeln!(w, "%% G z <= h")?;
        for (r, row) in self.g_rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(w, "G {r} {j} {v:.17e}")?;
            }
        }
        for (r, v) in self.h.iter().enumerate() {
            writeln!(w, "h {r} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Solver outcome classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// All KKT residuals at or below the requested tolerance.
    Optimal,
    /// Iteration cap reached; the iterate may still be usable.
    MaxIterations,
    /// The constraints admit no solution (diverging duals with a
    /// persistent primal residual).
    Infeasible,
    /// A search direction or residual stopped being finite; the
    /// returned point is the last finite iterate.
    NumericalBreakdown,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalBreakdown => "numerical-breakdown",
        }
    }
}

/// Primal solution with its normalized KKT residuals. The residuals are
/// scaled by the problem data (stationarity by the largest coefficient
/// magnitude, primal feasibility by the largest right-hand side,
/// complementarity by 1 + |objective|), so the tolerance is meaningful
/// across instances.
#[derive(Debug, Clone)]
pub struct Solution {
    pub values: Vec<f64>,
    pub objective: f64,
    pub stationarity: f64,
    pub primal: f64,
    pub complementarity: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl Solution {
    pub fn max_residual(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

/// Solves a program to the given KKT tolerance.
pub fn solve(qp: &QuadraticProgram, tol: f64) -> Result<Solution> {
    solver::solve_qp(qp, tol)
}

/// The realized quantities of one elapsed hour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtObservation {
    pub rt_price: f64,
    pub pv: f64,
    pub demand: f64,
}

/// Realizations of one whole day, used by the single-scenario baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRealization {
    pub rt_prices: Vec<f64>,
    pub pv: Vec<f64>,
    pub demand: Vec<f64>,
}

impl DayRealization {
    pub fn new(rt_prices: Vec<f64>, pv: Vec<f64>, demand: Vec<f64>) -> Result<Self> {
        for (name, v) in [("prices", &rt_prices), ("pv", &pv), ("demand", &demand)] {
            if v.len() != HOURS_PER_DAY {
                return Err(Error::LengthMismatch {
                    context: "day realization",
                    expected: HOURS_PER_DAY,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite {name} value")));
            }
        }
        Ok(Self { rt_prices, pv, demand })
    }
}

/// Pulls the per-quantity component indices out of a joint set.
fn quantity_indices(joint: &JointScenarioSet) -> Result<(usize, usize, usize)> {
    let need = |q: Quantity| {
        joint.index_of(q).ok_or_else(|| {
            Error::InvalidScenarioSet(format!("joint scenario set lacks a {q:?} component"))
        })
    };
    Ok((need(Quantity::RtPrice)?, need(Quantity::Pv)?, need(Quantity::Demand)?))
}

/// Builds the day-ahead program: commitments `c` shared across scenarios
/// and per scenario its recourse bids, storage trajectory, and exchange
/// epigraph variables.
///
/// The horizon is taken from `da_prices` (24 in normal use; shorter
/// instances are for verification). Variable count is
/// `H + K * (3H + 1)`.
pub fn build_da(
    agg: &AggregatorSpec,
    da_prices: &[f64],
    joint: &JointScenarioSet,
) -> Result<QuadraticProgram> {
    let horizon = da_prices.len();
    if horizon == 0 || horizon > HOURS_PER_DAY {
        return Err(Error::InvalidArgument(format!(
            "day-ahead horizon must be 1..=24, got {horizon}"
        )));
    }
    if da_prices.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite day-ahead price".into()));
    }
    if joint.horizon() != horizon {
        return Err(Error::LengthMismatch {
            context: "joint scenarios vs day-ahead horizon",
            expected: horizon,
            actual: joint.horizon(),
        });
    }
    if joint.is_empty() {
        return Err(Error::InvalidScenarioSet("no scenarios for the day-ahead program".into()));
    }
    let (qi_price, qi_pv, qi_demand) = quantity_indices(joint)?;
    let k_count = joint.len();
    let eta = agg.battery.eta;
    let span = (agg.battery.s_max - agg.battery.s_min) / eta;
    let per_scenario = 3 * horizon + 1;
    let n = horizon + k_count * per_scenario;

    let mut variables = Vec::with_capacity(n);
    for hh in 0..horizon {
        variables.push(Variable::Commitment { hour: hh as u8 });
    }
    let base = |k: usize| horizon + k * per_scenario;
    let x_of = |k: usize, hh: usize| base(k) + hh;
    let s_of = |k: usize, st: usize| base(k) + horizon + st;
    let u_of = |k: usize, hh: usize| base(k) + 2 * horizon + 1 + hh;
    for k in 0..k_count {
        let sk = Some(k as u16);
        for hh in 0..horizon {
            variables.push(Variable::RtBid { hour: hh as u8, scenario: sk });
        }
        for st in 0..=horizon {
            variables.push(Variable::Storage { state: st as u8, scenario: sk });
        }
        for hh in 0..horizon {
            variables.push(Variable::Exchange { hour: hh as u8, scenario: sk });
        }
    }

    let mut q = vec![0.0; n];
    for (hh, p) in da_prices.iter().enumerate() {
        q[hh] = -p;
    }
    let mut p_entries = Vec::new();
    let mut a_entries = Vec::new();
    let mut b = Vec::new();
    let mut g_rows = Vec::new();
    let mut h = Vec::new();

    // shared commitment cap |c| <= c_max
    for hh in 0..horizon {
        g_rows.push(vec![(hh, 1.0)]);
        h.push(agg.c_max);
        g_rows.push(vec![(hh, -1.0)]);
        h.push(agg.c_max);
    }

    let mut blocks = Vec::with_capacity(k_count);
    for (k, scen) in joint.scenarios().iter().enumerate() {
        let eps = scen.probability();
        let prices = scen.component(qi_price);
        let pv = scen.component(qi_pv);
        let demand = scen.component(qi_demand);

        for hh in 0..horizon {
            q[x_of(k, hh)] = -eps * prices[hh];
            q[u_of(k, hh)] = eps * agg.beta;
        }
        // degradation alpha * (s_{t+1} - s_t)^2 per transition
        let w = 2.0 * agg.alpha * eps;
        if agg.alpha > 0.0 {
            for st in 0..horizon {
                p_entries.push((s_of(k, st), s_of(k, st), w));
                p_entries.push((s_of(k, st + 1), s_of(k, st + 1), w));
                p_entries.push((s_of(k, st), s_of(k, st + 1), -w));
            }
        }

        // equalities: initial state, then one balance row per hour
        let row0 = b.len();
        a_entries.push((row0, s_of(k, 0), 1.0));
        b.push(agg.battery.s_init);
        for hh in 0..horizon {
            let r = b.len();
            a_entries.push((r, s_of(k, hh + 1), 1.0));
            a_entries.push((r, s_of(k, hh), -1.0));
            a_entries.push((r, x_of(k, hh), eta));
            a_entries.push((r, hh, eta)); // commitment coupling
            b.push(eta * (pv[hh] - demand[hh]));
        }

        // storage bounds and exchange epigraph
        for st in 0..=horizon {
            g_rows.push(vec![(s_of(k, st), 1.0)]);
            h.push(agg.battery.s_max);
            g_rows.push(vec![(s_of(k, st), -1.0)]);
            h.push(-agg.battery.s_min);
        }
        for hh in 0..horizon {
            g_rows.push(vec![(hh, 1.0), (x_of(k, hh), 1.0), (u_of(k, hh), -1.0)]);
            h.push(0.0);
            g_rows.push(vec![(hh, -1.0), (x_of(k, hh), -1.0), (u_of(k, hh), -1.0)]);
            h.push(0.0);
            // the balance row pins c + x to (pv - demand) - delta_s/eta, so
            // the epigraph never needs more headroom than that; capping it
            // keeps low-probability scenarios from drifting far up this
            // barely-weighted direction and wrecking the conditioning
            g_rows.push(vec![(u_of(k, hh), 1.0)]);
            h.push((pv[hh] - demand[hh]).abs() + span + 1.0);
        }

        // banded elimination order: state, its rows, bid, exchange, ...
        let mut order = Vec::with_capacity(per_scenario + horizon + 1);
        order.push(s_of(k, 0));
        order.push(n + row0);
        for hh in 0..horizon {
            order.push(n + row0 + 1 + hh);
            order.push(x_of(k, hh));
            order.push(u_of(k, hh));
            order.push(s_of(k, hh + 1));
        }
        blocks.push(order);
    }

    QuadraticProgram::assemble(
        p_entries,
        q,
        a_entries,
        b,
        g_rows,
        h,
        variables,
        Some(BlockStructure { blocks }),
    )
}

/// Builds the real-time program for 1-based hour `t`: the here-and-now
/// bid `x_t` (with the storage state it produces and its exchange
/// epigraph) plus per-scenario recourse over the remaining hours.
///
/// The elapsed hour's balance uses the observed PV/demand; commitments
/// are data here. At `t = 24` the problem is the final bid alone and
/// `joint` must be `None`. Degradation is charged on the transitions
/// after the current hour, mirroring the objective's remaining-hours
/// sum.
pub fn build_rt(
    agg: &AggregatorSpec,
    t: u8,
    s_t: f64,
    commitments: &BidSchedule,
    observed: RtObservation,
    joint: Option<&JointScenarioSet>,
) -> Result<QuadraticProgram> {
    if !(1..=24).contains(&t) {
        return Err(Error::InvalidArgument(format!("hour must be 1..=24, got {t}")));
    }
    let slot = (t - 1) as usize;
    let remaining = HOURS_PER_DAY - slot - 1; // scenario hours after t
    for (name, v) in [
        ("storage", s_t),
        ("price", observed.rt_price),
        ("pv", observed.pv),
        ("demand", observed.demand),
    ] {
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite observed {name}")));
        }
    }
    // accept solver-tolerance drift on the incoming state, nothing more
    let s_tol = 1e-4 * (1.0 + agg.battery.s_max.abs());
    if s_t < agg.battery.s_min - s_tol || s_t > agg.battery.s_max + s_tol {
        return Err(Error::InvalidArgument(format!(
            "incoming storage {s_t} outside bounds [{}, {}]",
            agg.battery.s_min, agg.battery.s_max
        )));
    }
    let s_t = s_t.clamp(agg.battery.s_min, agg.battery.s_max);

    let joint = match (remaining, joint) {
        (0, None) => None,
        (0, Some(_)) => {
            return Err(Error::InvalidArgument(
                "hour 24 has no remaining horizon; pass no scenarios".into(),
            ))
        }
        (_, None) => {
            return Err(Error::InvalidScenarioSet(format!(
                "real-time hour {t} needs scenarios for the remaining {remaining} hours"
            )))
        }
        (_, Some(j)) => {
            if j.horizon() != remaining {
                return Err(Error::LengthMismatch {
                    context: "remaining-hours scenarios",
                    expected: remaining,
                    actual: j.horizon(),
                });
            }
            if j.is_empty() {
                return Err(Error::InvalidScenarioSet("empty real-time scenario set".into()));
            }
            Some(j)
        }
    };

    let eta = agg.battery.eta;
    let c = commitments.commitments();
    let k_count = joint.map_or(0, |j| j.len());
    let n = 3 + k_count * 3 * remaining;

    let mut variables = Vec::with_capacity(n);
    variables.push(Variable::RtBid { hour: slot as u8, scenario: None });
    variables.push(Variable::Storage { state: (slot + 1) as u8, scenario: None });
    variables.push(Variable::Exchange { hour: slot as u8, scenario: None });
    let base = |k: usize| 3 + k * 3 * remaining;
    let x_of = |k: usize, i: usize| base(k) + i; // hour slot+1+i
    let s_of = |k: usize, i: usize| base(k) + remaining + i; // state slot+2+i
    let u_of = |k: usize, i: usize| base(k) + 2 * remaining + i;
    for k in 0..k_count {
        let sk = Some(k as u16);
        for i in 0..remaining {
            variables.push(Variable::RtBid { hour: (slot + 1 + i) as u8, scenario: sk });
        }
        for i in 0..remaining {
            variables.push(Variable::Storage { state: (slot + 2 + i) as u8, scenario: sk });
        }
        for i in 0..remaining {
            variables.push(Variable::Exchange { hour: (slot + 1 + i) as u8, scenario: sk });
        }
    }

    let mut q = vec![0.0; n];
    q[0] = -observed.rt_price;
    q[2] = agg.beta;
    let mut p_entries = Vec::new();
    let mut a_entries = Vec::new();
    let mut b = Vec::new();
    let mut g_rows = Vec::new();
    let mut h = Vec::new();

    // here-and-now balance: s_{t+1} + eta x_t = s_t + eta(-c_t + v - d)
    a_entries.push((0, 1, 1.0));
    a_entries.push((0, 0, eta));
    b.push(s_t + eta * (-c[slot] + observed.pv - observed.demand));
    // bounds on the produced state, and the exchange epigraph
    g_rows.push(vec![(1, 1.0)]);
    h.push(agg.battery.s_max);
    g_rows.push(vec![(1, -1.0)]);
    h.push(-agg.battery.s_min);
    g_rows.push(vec![(0, 1.0), (2, -1.0)]);
    h.push(-c[slot]);
    g_rows.push(vec![(0, -1.0), (2, -1.0)]);
    h.push(c[slot]);
    // cap the epigraph at what the balance row allows (see build_da)
    let span = (agg.battery.s_max - agg.battery.s_min) / eta;
    g_rows.push(vec![(2, 1.0)]);
    h.push((observed.pv - observed.demand).abs() + span + 1.0);

    let mut blocks = Vec::with_capacity(k_count);
    if let Some(joint) = joint {
        let (qi_price, qi_pv, qi_demand) = quantity_indices(joint)?;
        for (k, scen) in joint.scenarios().iter().enumerate() {
            let eps = scen.probability();
            let prices = scen.component(qi_price);
            let pv = scen.component(qi_pv);
            let demand = scen.component(qi_demand);

            for i in 0..remaining {
                q[x_of(k, i)] = -eps * prices[i];
                q[u_of(k, i)] = eps * agg.beta;
            }
            // degradation on transitions within the remaining horizon;
            // the first one starts from the shared state
            if agg.alpha > 0.0 {
                let w = 2.0 * agg.alpha * eps;
                for i in 0..remaining {
                    let s_from = if i == 0 { 1 } else { s_of(k, i - 1) };
                    let s_to = s_of(k, i);
                    p_entries.push((s_from, s_from, w));
                    p_entries.push((s_to, s_to, w));
                    p_entries.push((s_from.min(s_to), s_from.max(s_to), -w));
                }
            }

            let row0 = b.len();
            for i in 0..remaining {
                let hh = slot + 1 + i;
                let r = b.len();
                let s_prev = if i == 0 { 1 } else { s_of(k, i - 1) };
                a_entries.push((r, s_of(k, i), 1.0));
                a_entries.push((r, s_prev, -1.0));
                a_entries.push((r, x_of(k, i), eta));
                b.push(eta * (pv[i] - demand[i] - c[hh]));
            }

            for i in 0..remaining {
                g_rows.push(vec![(s_of(k, i), 1.0)]);
                h.push(agg.battery.s_max);
                g_rows.push(vec![(s_of(k, i), -1.0)]);
                h.push(-agg.battery.s_min);
                let hh = slot + 1 + i;
                g_rows.push(vec![(x_of(k, i), 1.0), (u_of(k, i), -1.0)]);
                h.push(-c[hh]);
                g_rows.push(vec![(x_of(k, i), -1.0), (u_of(k, i), -1.0)]);
                h.push(c[hh]);
                g_rows.push(vec![(u_of(k, i), 1.0)]);
                h.push((pv[i] - demand[i]).abs() + span + 1.0);
            }

            let mut order = Vec::with_capacity(4 * remaining);
            for i in 0..remaining {
                order.push(n + row0 + i);
                order.push(x_of(k, i));
                order.push(u_of(k, i));
                order.push(s_of(k, i));
            }
            blocks.push(order);
        }
    }

    QuadraticProgram::assemble(
        p_entries,
        q,
        a_entries,
        b,
        g_rows,
        h,
        variables,
        if k_count > 0 { Some(BlockStructure { blocks }) } else { None },
    )
}

/// Wraps one day of realizations as a probability-1 joint scenario over
/// the full day.
fn singleton_joint_day(yesterday: &DayRealization) -> Result<JointScenarioSet> {
    let sets = [
        (Quantity::RtPrice, &yesterday.rt_prices),
        (Quantity::Pv, &yesterday.pv),
        (Quantity::Demand, &yesterday.demand),
    ]
    .map(|(qty, values)| {
        ScenarioSet::new(vec![Scenario::new(values.clone(), 1.0)?], qty)
    });
    let mut list = Vec::with_capacity(3);
    for s in sets {
        list.push(s?);
    }
    cross_product(&list)
}

/// Same, over the hours after 1-based hour `t`.
fn singleton_joint_tail(yesterday: &DayRealization, t: u8) -> Result<JointScenarioSet> {
    let from = t as usize; // 0-based slot t..24
    let sets = [
        (Quantity::RtPrice, &yesterday.rt_prices),
        (Quantity::Pv, &yesterday.pv),
        (Quantity::Demand, &yesterday.demand),
    ]
    .map(|(qty, values)| {
        ScenarioSet::new(vec![Scenario::new(values[from..].to_vec(), 1.0)?], qty)
    });
    let mut list = Vec::with_capacity(3);
    for s in sets {
        list.push(s?);
    }
    cross_product(&list)
}

fn require_optimal(sol: &Solution, what: &str) -> Result<()> {
    if sol.status != SolveStatus::Optimal {
        return Err(Error::SolverFailure {
            status: sol.status.as_str(),
            detail: format!(
                "{what}: residuals stat {:.2e} primal {:.2e} comp {:.2e} after {} iterations",
                sol.stationarity, sol.primal, sol.complementarity, sol.iterations
            ),
        });
    }
    Ok(())
}

/// Deterministic baseline commitments: assume yesterday's realizations
/// repeat today (a single probability-1 scenario) and solve the same
/// day-ahead program.
pub fn naive_baseline_da(
    agg: &AggregatorSpec,
    da_prices: &[f64],
    yesterday: &DayRealization,
) -> Result<BidSchedule> {
    let joint = singleton_joint_day(yesterday)?;
    let qp = build_da(agg, da_prices, &joint)?;
    let sol = solve(&qp, DEFAULT_TOL)?;
    require_optimal(&sol, "baseline day-ahead")?;
    let mut c = [0.0; HOURS_PER_DAY];
    for (hh, ci) in c.iter_mut().enumerate() {
        let v = qp
            .value_of(&sol, Variable::Commitment { hour: hh as u8 })
            .expect("commitment variable exists");
        // shave solver tolerance off the cap
        *ci = v.clamp(-agg.c_max, agg.c_max);
    }
    BidSchedule::new(c, agg.c_max)
}

/// Deterministic baseline recourse bid for 1-based hour `t`, assuming
/// yesterday's tail repeats.
pub fn naive_baseline_rt(
    agg: &AggregatorSpec,
    t: u8,
    s_t: f64,
    commitments: &BidSchedule,
    observed: RtObservation,
    yesterday: &DayRealization,
) -> Result<f64> {
    let joint = if t < 24 { Some(singleton_joint_tail(yesterday, t)?) } else { None };
    let qp = build_rt(agg, t, s_t, commitments, observed, joint.as_ref())?;
    let sol = solve(&qp, DEFAULT_TOL)?;
    require_optimal(&sol, "baseline real-time")?;
    Ok(qp
        .value_of(&sol, Variable::RtBid { hour: t - 1, scenario: None })
        .expect("here-and-now bid exists"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::BatterySpec;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn agg(alpha: f64, beta: f64, c_max: f64) -> AggregatorSpec {
        AggregatorSpec {
            battery: BatterySpec::new(1.0, 9.0, 0.9, 5.0).unwrap(),
            c_max,
            alpha,
            beta,
            n_units: 1,
        }
    }

    fn set(q: Quantity, scens: &[(&[f64], f64)]) -> ScenarioSet {
        ScenarioSet::new(
            scens.iter().map(|(v, p)| Scenario::new(v.to_vec(), *p).unwrap()).collect(),
            q,
        )
        .unwrap()
    }

    fn joint3(
        prices: &[(&[f64], f64)],
        pv: &[(&[f64], f64)],
        demand: &[(&[f64], f64)],
    ) -> JointScenarioSet {
        cross_product(&[
            set(Quantity::RtPrice, prices),
            set(Quantity::Pv, pv),
            set(Quantity::Demand, demand),
        ])
        .unwrap()
    }

    /// A 24-hour world with diurnal structure for the larger instances.
    fn day_world() -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let da: Vec<f64> = (0..24)
            .map(|h| 1.1 + 0.5 * (std::f64::consts::TAU * (h as f64 - 6.0) / 24.0).sin())
            .collect();
        let rt_a: Vec<f64> = da.iter().map(|p| p * 1.15).collect();
        let rt_b: Vec<f64> = da.iter().map(|p| p * 0.85).collect();
        let pv: Vec<f64> = (0..24)
            .map(|h| {
                let x = (h as f64 - 12.0) / 5.0;
                (2.2 * (1.0 - x * x)).max(0.0)
            })
            .collect();
        let demand: Vec<f64> = (0..24)
            .map(|h| {
                0.5 + 0.6 * (-((h as f64 - 8.0) / 2.5).powi(2)).exp()
                    + 0.9 * (-((h as f64 - 19.0) / 2.5).powi(2)).exp()
            })
            .collect();
        (da, rt_a, rt_b, pv, demand)
    }

    fn day_joint() -> JointScenarioSet {
        let (_, rt_a, rt_b, pv, demand) = day_world();
        let pv_low: Vec<f64> = pv.iter().map(|v| v * 0.6).collect();
        joint3(
            &[(&rt_a, 0.55), (&rt_b, 0.45)],
            &[(&pv, 0.5), (&pv_low, 0.5)],
            &[(&demand, 1.0)],
        )
    }

    /// Shrinking odometer grid search; `f` returns `None` outside the
    /// feasible set. The box halves per round to 2 coarse steps around
    /// the incumbent, which converges for the convex objectives used
    /// here.
    fn grid_min(
        f: &dyn Fn(&[f64]) -> Option<f64>,
        start_center: &[f64],
        start_half: &[f64],
        steps: usize,
        rounds: usize,
    ) -> (Vec<f64>, f64) {
        let dims = start_center.len();
        let mut center = start_center.to_vec();
        let mut half = start_half.to_vec();
        let mut best_val = f64::INFINITY;
        let mut best = center.clone();
        for _ in 0..rounds {
            let mut idx = vec![0usize; dims];
            let mut point = vec![0.0; dims];
            'sweep: loop {
                for d in 0..dims {
                    let frac = idx[d] as f64 / steps as f64;
                    point[d] = center[d] - half[d] + 2.0 * half[d] * frac;
                }
                if let Some(v) = f(&point) {
                    if v < best_val {
                        best_val = v;
                        best.copy_from_slice(&point);
                    }
                }
                let mut d = dims;
                loop {
                    if d == 0 {
                        break 'sweep;
                    }
                    d -= 1;
                    idx[d] += 1;
                    if idx[d] <= steps {
                        continue 'sweep;
                    }
                    idx[d] = 0;
                }
            }
            center.copy_from_slice(&best);
            for h in half.iter_mut() {
                *h *= 4.0 / steps as f64;
            }
        }
        assert!(best_val.is_finite(), "grid search found no feasible point");
        (best, best_val)
    }

    #[test]
    fn da_variable_and_constraint_counts() {
        let (da, rt_a, rt_b, pv, demand) = day_world();
        let pv_scens: Vec<Vec<f64>> = (0..5).map(|i| {
            pv.iter().map(|v| v * (0.6 + 0.1 * i as f64)).collect()
        }).collect();
        let d_scens: Vec<Vec<f64>> = (0..5).map(|i| {
            demand.iter().map(|v| v * (0.8 + 0.1 * i as f64)).collect()
        }).collect();
        let p_scens: Vec<Vec<f64>> = (0..5).map(|i| {
            rt_a.iter().zip(&rt_b).map(|(a, b)| a + 0.25 * i as f64 * (b - a)).collect()
        }).collect();
        fn mk(list: &[Vec<f64>]) -> Vec<(&[f64], f64)> {
            list.iter().map(|v| (v.as_slice(), 0.2)).collect()
        }
        let joint = joint3(&mk(&p_scens), &mk(&pv_scens), &mk(&d_scens));
        assert_eq!(joint.len(), 125);
        let qp = build_da(&agg(0.4, 0.05, 8.0), &da, &joint).unwrap();
        assert_eq!(qp.num_variables(), 24 + 125 * (3 * 24 + 1));
        assert_eq!(qp.num_variables(), 9149);
        assert_eq!(qp.num_equalities(), 125 * 25);
        // per scenario: storage bounds, epigraph pairs, epigraph caps
        assert_eq!(qp.num_inequalities(), 48 + 125 * (2 * 25 + 3 * 24));

        let single = joint3(&[(&rt_a, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let qp1 = build_da(&agg(0.4, 0.05, 8.0), &da, &single).unwrap();
        assert_eq!(qp1.num_variables(), 97);
        assert_eq!(qp1.num_equalities(), 25);
        assert_eq!(qp1.num_inequalities(), 170);
    }

    #[test]
    fn rt_variable_and_constraint_counts() {
        let (_, rt_a, rt_b, pv, demand) = day_world();
        let tail = |v: &[f64]| v[1..].to_vec();
        let joint = joint3(
            &[(&tail(&rt_a), 0.5), (&tail(&rt_b), 0.5)],
            &[(&tail(&pv), 1.0)],
            &[(&tail(&demand), 1.0)],
        );
        let schedule = BidSchedule::new([0.0; 24], 8.0).unwrap();
        let obs = RtObservation { rt_price: 1.0, pv: 0.4, demand: 0.6 };
        let qp = build_rt(&agg(0.4, 0.05, 8.0), 1, 5.0, &schedule, obs, Some(&joint)).unwrap();
        assert_eq!(qp.num_variables(), 3 + 2 * 3 * 23);
        assert_eq!(qp.num_equalities(), 1 + 2 * 23);
        assert_eq!(qp.num_inequalities(), 5 + 2 * 5 * 23);
    }

    #[test]
    fn da_idle_world_parks_the_battery() {
        let zeros = [0.0; 24];
        let joint =
            joint3(&[(&zeros, 0.5), (&zeros, 0.5)], &[(&zeros, 1.0)], &[(&zeros, 1.0)]);
        let a = agg(0.4, 0.05, 8.0);
        let qp = build_da(&a, &zeros, &joint).unwrap();
        let sol = solve(&qp, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective.abs() < 1e-6, "idle objective {}", sol.objective);
        // with everything free of charge the only optimal pattern keeps
        // the battery level flat and exchanges nothing with the grid;
        // the commitment/recourse split along c + x = 0 is degenerate
        for k in 0..joint.len() as u16 {
            for st in 0..=24 {
                let s = qp
                    .value_of(&sol, Variable::Storage { state: st, scenario: Some(k) })
                    .unwrap();
                assert_relative_eq!(s, 5.0, epsilon = 1e-5);
            }
            for hh in 0..24u8 {
                let c = qp.value_of(&sol, Variable::Commitment { hour: hh }).unwrap();
                let x =
                    qp.value_of(&sol, Variable::RtBid { hour: hh, scenario: Some(k) }).unwrap();
                assert!((c + x).abs() < 1e-5, "hour {hh} exchanges {c} + {x}");
            }
        }
    }

    #[test]
    fn da_objective_matches_revenue_identity() {
        // without degradation and usage fees the objective is exactly
        // the negated expected revenue of the solution
        let (da, ..) = day_world();
        let joint = day_joint();
        let a = agg(0.0, 0.0, 8.0);
        let qp = build_da(&a, &da, &joint).unwrap();
        let sol = solve(&qp, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let qi = joint.index_of(Quantity::RtPrice).unwrap();
        let mut manual = 0.0;
        for hh in 0..24u8 {
            let c = qp.value_of(&sol, Variable::Commitment { hour: hh }).unwrap();
            manual -= da[hh as usize] * c;
        }
        for (k, scen) in joint.scenarios().iter().enumerate() {
            for hh in 0..24u8 {
                let x = qp
                    .value_of(&sol, Variable::RtBid { hour: hh, scenario: Some(k as u16) })
                    .unwrap();
                manual -= scen.probability() * scen.component(qi)[hh as usize] * x;
            }
        }
        assert_relative_eq!(sol.objective, manual, epsilon = 1e-7, max_relative = 1e-7);
        assert_relative_eq!(
            sol.objective,
            qp.objective_value(&sol.values),
            epsilon = 1e-9,
            max_relative = 1e-9
        );
    }

    #[test]
    fn da_cost_matrix_is_positive_semidefinite() {
        let (da, rt_a, rt_b, pv, demand) = day_world();
        let h3 = |v: &[f64]| v[..3].to_vec();
        let joint = joint3(
            &[(&h3(&rt_a), 0.5), (&h3(&rt_b), 0.5)],
            &[(&h3(&pv), 1.0)],
            &[(&h3(&demand), 1.0)],
        );
        let qp = build_da(&agg(0.4, 0.05, 8.0), &da[..3], &joint).unwrap();
        let mut p = DMatrix::<f64>::zeros(qp.num_variables(), qp.num_variables());
        let mut scale = 0.0f64;
        for &(i, j, v) in &qp.p_entries {
            p[(i, j)] += v;
            if i != j {
                p[(j, i)] += v;
            }
            scale = scale.max(v.abs());
        }
        let eig = p.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-9 * scale.max(1.0), "least eigenvalue {min}");
    }

    #[test]
    fn da_exchange_epigraph_is_tight_and_storage_feasible() {
        let (da, ..) = day_world();
        let joint = day_joint();
        let a = agg(0.4, 0.05, 8.0);
        let qp = build_da(&a, &da, &joint).unwrap();
        let sol = solve(&qp, 1e-7).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        for k in 0..joint.len() as u16 {
            for hh in 0..24u8 {
                let c = qp.value_of(&sol, Variable::Commitment { hour: hh }).unwrap();
                let x =
                    qp.value_of(&sol, Variable::RtBid { hour: hh, scenario: Some(k) }).unwrap();
                let u =
                    qp.value_of(&sol, Variable::Exchange { hour: hh, scenario: Some(k) }).unwrap();
                assert_relative_eq!(u, (c + x).abs(), epsilon = 1e-5, max_relative = 1e-5);
            }
            for st in 0..=24 {
                let s = qp
                    .value_of(&sol, Variable::Storage { state: st, scenario: Some(k) })
                    .unwrap();
                assert!(
                    (a.battery.s_min - 1e-5..=a.battery.s_max + 1e-5).contains(&s),
                    "scenario {k} state {st} at {s}"
                );
            }
        }
        for hh in 0..24u8 {
            let c = qp.value_of(&sol, Variable::Commitment { hour: hh }).unwrap();
            assert!(c.abs() <= a.c_max + 1e-5, "commitment {c} beyond cap");
        }
    }

    #[test]
    fn da_duplicated_scenarios_leave_commitments_unchanged() {
        let (da, rt_a, rt_b, pv, demand) = day_world();
        let a = agg(0.4, 0.05, 6.0);
        let plain = joint3(
            &[(&rt_a, 0.6), (&rt_b, 0.4)],
            &[(&pv, 1.0)],
            &[(&demand, 1.0)],
        );
        let duplicated = joint3(
            &[(&rt_a, 0.3), (&rt_a, 0.3), (&rt_b, 0.4)],
            &[(&pv, 1.0)],
            &[(&demand, 1.0)],
        );
        let qa = build_da(&a, &da, &plain).unwrap();
        let qb = build_da(&a, &da, &duplicated).unwrap();
        let sa = solve(&qa, 1e-8).unwrap();
        let sb = solve(&qb, 1e-8).unwrap();
        assert_eq!(sa.status, SolveStatus::Optimal);
        assert_eq!(sb.status, SolveStatus::Optimal);
        for hh in 0..24u8 {
            let ca = qa.value_of(&sa, Variable::Commitment { hour: hh }).unwrap();
            let cb = qb.value_of(&sb, Variable::Commitment { hour: hh }).unwrap();
            assert_relative_eq!(ca, cb, epsilon = 2e-4);
        }
        assert_relative_eq!(sa.objective, sb.objective, epsilon = 1e-5, max_relative = 1e-6);
    }

    #[test]
    fn da_fixing_commitments_cannot_improve() {
        let (da, ..) = day_world();
        let joint = day_joint();
        let a = agg(0.4, 0.05, 8.0);
        let qp = build_da(&a, &da, &joint).unwrap();
        let sol = solve(&qp, 1e-7).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        let mut fixed = build_da(&a, &da, &joint).unwrap();
        for hh in 0..24u8 {
            let c = qp.value_of(&sol, Variable::Commitment { hour: hh }).unwrap();
            let shifted = (c + 0.4).clamp(-a.c_max, a.c_max);
            fixed.fix_variable(Variable::Commitment { hour: hh }, shifted).unwrap();
        }
        let sol_fixed = solve(&fixed, 1e-7).unwrap();
        assert_eq!(sol_fixed.status, SolveStatus::Optimal);
        assert!(
            sol_fixed.objective >= sol.objective - 1e-5 * (1.0 + sol.objective.abs()),
            "restricting the first stage improved the objective: {} < {}",
            sol_fixed.objective,
            sol.objective
        );
    }

    #[test]
    fn da_two_hour_problem_matches_grid_search() {
        // one scenario, two hours: four free decisions once the storage
        // balance is substituted, checked against a refined grid search
        let a = agg(0.3, 0.1, 3.0);
        let eta = a.battery.eta;
        let (s0, s_min, s_max) = (5.0, 1.0, 9.0);
        let da = [1.2, 0.7];
        let rt = [0.9, 1.1];
        let g = [0.8, -0.4]; // pv - demand
        let pv = [0.8, 0.0];
        let demand = [0.0, 0.4];
        let joint = joint3(&[(&rt, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let qp = build_da(&a, &da, &joint).unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        let objective = |z: &[f64]| -> Option<f64> {
            let (c0, c1, x0, x1) = (z[0], z[1], z[2], z[3]);
            if c0.abs() > a.c_max || c1.abs() > a.c_max {
                return None;
            }
            let s1 = s0 + eta * (g[0] - c0 - x0);
            let s2 = s1 + eta * (g[1] - c1 - x1);
            if !(s_min..=s_max).contains(&s1) || !(s_min..=s_max).contains(&s2) {
                return None;
            }
            Some(
                -da[0] * c0 - da[1] * c1 - rt[0] * x0 - rt[1] * x1
                    + a.alpha * ((s1 - s0).powi(2) + (s2 - s1).powi(2))
                    + a.beta * ((c0 + x0).abs() + (c1 + x1).abs()),
            )
        };
        let (best, best_val) =
            grid_min(&objective, &[0.0; 4], &[3.0, 3.0, 12.0, 12.0], 20, 8);

        assert!(
            sol.objective <= best_val + 1e-6,
            "solver {} worse than grid point {best_val}",
            sol.objective
        );
        assert_relative_eq!(sol.objective, best_val, epsilon = 2e-4);
        let got = [
            qp.value_of(&sol, Variable::Commitment { hour: 0 }).unwrap(),
            qp.value_of(&sol, Variable::Commitment { hour: 1 }).unwrap(),
            qp.value_of(&sol, Variable::RtBid { hour: 0, scenario: Some(0) }).unwrap(),
            qp.value_of(&sol, Variable::RtBid { hour: 1, scenario: Some(0) }).unwrap(),
        ];
        for (i, (s, g)) in got.iter().zip(&best).enumerate() {
            assert_relative_eq!(s, g, epsilon = 5e-3);
            let _ = i;
        }
    }

    #[test]
    fn da_single_hour_scenario_weights_match_grid_search() {
        // four scenarios differing in price and pv, one hour: verifies
        // the probability weighting of every scenario term
        let a = agg(0.3, 0.1, 3.0);
        let eta = a.battery.eta;
        let (s0, s_min, s_max) = (5.0, 1.0, 9.0);
        let da = [1.05];
        let prices = [[0.8], [1.4]];
        let pvs = [[1.2], [0.3]];
        let demand = [0.5];
        let joint = joint3(
            &[(&prices[0], 0.55), (&prices[1], 0.45)],
            &[(&pvs[0], 0.7), (&pvs[1], 0.3)],
            &[(&demand, 1.0)],
        );
        assert_eq!(joint.len(), 4);
        let qp = build_da(&a, &da, &joint).unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        let qi_p = joint.index_of(Quantity::RtPrice).unwrap();
        let qi_v = joint.index_of(Quantity::Pv).unwrap();
        let qi_d = joint.index_of(Quantity::Demand).unwrap();
        let scens = joint.scenarios();
        let objective = |z: &[f64]| -> Option<f64> {
            let c = z[0];
            if c.abs() > a.c_max {
                return None;
            }
            let mut total = -da[0] * c;
            for (k, scen) in scens.iter().enumerate() {
                let x = z[1 + k];
                let g = scen.component(qi_v)[0] - scen.component(qi_d)[0];
                let s1 = s0 + eta * (g - c - x);
                if !(s_min..=s_max).contains(&s1) {
                    return None;
                }
                total += scen.probability()
                    * (-scen.component(qi_p)[0] * x
                        + a.alpha * (s1 - s0).powi(2)
                        + a.beta * (c + x).abs());
            }
            Some(total)
        };
        let (_, best_val) =
            grid_min(&objective, &[0.0; 5], &[3.0, 12.0, 12.0, 12.0, 12.0], 16, 9);
        assert!(sol.objective <= best_val + 1e-6);
        assert_relative_eq!(sol.objective, best_val, epsilon = 5e-4);
    }

    #[test]
    fn da_flat_price_day_matches_dynamic_programming() {
        // with one scenario and equal day-ahead/real-time prices only
        // the net exchange matters, so a storage-grid dynamic program
        // gives an independent optimum for the whole day
        let a = AggregatorSpec {
            battery: BatterySpec::new(1.0, 9.0, 0.9, 5.0).unwrap(),
            c_max: 20.0,
            alpha: 0.05,
            beta: 0.1,
            n_units: 1,
        };
        let p = 1.2;
        let prices = [p; 24];
        let net: Vec<f64> = (0..24)
            .map(|h| {
                let x = (h as f64 - 12.0) / 5.5;
                (2.3 * (1.0 - x * x)).max(0.0) - 0.3
            })
            .collect();
        let pv: Vec<f64> = net.iter().map(|g| g.max(0.0)).collect();
        let demand: Vec<f64> = net.iter().map(|g| (-g).max(0.0)).collect();
        let joint = joint3(&[(&prices, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let qp = build_da(&a, &prices, &joint).unwrap();
        let sol = solve(&qp, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        // backward induction over a storage grid
        let (s_min, s_max, eta) = (a.battery.s_min, a.battery.s_max, a.battery.eta);
        let step = 0.002;
        let m = ((s_max - s_min) / step).round() as usize + 1;
        let level = |i: usize| s_min + i as f64 * step;
        let mut v_next = vec![0.0f64; m];
        let mut v_cur = vec![0.0f64; m];
        for h in (0..24).rev() {
            for i in 0..m {
                let si = level(i);
                let mut best = f64::INFINITY;
                for (j, vn) in v_next.iter().enumerate() {
                    let sj = level(j);
                    let e = net[h] - (sj - si) / eta;
                    let cost =
                        -p * e + a.beta * e.abs() + a.alpha * (sj - si) * (sj - si) + vn;
                    if cost < best {
                        best = cost;
                    }
                }
                v_cur[i] = best;
            }
            std::mem::swap(&mut v_cur, &mut v_next);
        }
        let idx = ((a.battery.s_init - s_min) / step).round() as usize;
        assert!((level(idx) - a.battery.s_init).abs() < 1e-9);
        let dp = v_next[idx];

        assert!(
            sol.objective <= dp + 1e-4,
            "solver {} worse than discretized policy {dp}",
            sol.objective
        );
        assert!(
            sol.objective >= dp - 0.15,
            "solver {} implausibly better than fine grid {dp}",
            sol.objective
        );
    }

    #[test]
    fn rt_final_hour_matches_closed_form() {
        // hour 24 is a tiny linear program: sell down to the floor when
        // the price is attractive, buy up to the ceiling when negative
        let a = agg(0.4, 0.05, 8.0);
        let eta = a.battery.eta;
        let mut c = [0.0; 24];
        c[23] = 0.7;
        let schedule = BidSchedule::new(c, a.c_max).unwrap();
        let (s24, v, d) = (6.0, 0.1, 0.4);

        let sell = RtObservation { rt_price: 2.0, pv: v, demand: d };
        let qp = build_rt(&a, 24, s24, &schedule, sell, None).unwrap();
        assert_eq!(qp.num_variables(), 3);
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let want = (s24 - a.battery.s_min) / eta + (v - d) - c[23];
        let x = qp.value_of(&sol, Variable::RtBid { hour: 23, scenario: None }).unwrap();
        assert_relative_eq!(x, want, epsilon = 1e-6);

        let buy = RtObservation { rt_price: -1.0, pv: v, demand: d };
        let qp = build_rt(&a, 24, s24, &schedule, buy, None).unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let want = (s24 - a.battery.s_max) / eta + (v - d) - c[23];
        let x = qp.value_of(&sol, Variable::RtBid { hour: 23, scenario: None }).unwrap();
        assert_relative_eq!(x, want, epsilon = 1e-6);
    }

    #[test]
    fn rt_hour_23_matches_grid_search() {
        // shared bid plus four one-hour scenarios: five free decisions
        let a = agg(0.3, 0.1, 8.0);
        let eta = a.battery.eta;
        let (s_min, s_max) = (a.battery.s_min, a.battery.s_max);
        let s23 = 4.0;
        let mut c = [0.0; 24];
        c[22] = 0.5;
        c[23] = -0.3;
        let schedule = BidSchedule::new(c, a.c_max).unwrap();
        let obs = RtObservation { rt_price: 0.8, pv: 0.2, demand: 0.6 };
        let prices = [[1.4], [0.6]];
        let pvs = [[0.0], [0.4]];
        let demand = [0.5];
        let joint = joint3(
            &[(&prices[0], 0.35), (&prices[1], 0.65)],
            &[(&pvs[0], 0.5), (&pvs[1], 0.5)],
            &[(&demand, 1.0)],
        );
        let qp = build_rt(&a, 23, s23, &schedule, obs, Some(&joint)).unwrap();
        let sol = solve(&qp, 1e-9).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        let qi_p = joint.index_of(Quantity::RtPrice).unwrap();
        let qi_v = joint.index_of(Quantity::Pv).unwrap();
        let qi_d = joint.index_of(Quantity::Demand).unwrap();
        let scens = joint.scenarios();
        let objective = |z: &[f64]| -> Option<f64> {
            let x23 = z[0];
            let s24 = s23 + eta * (-c[22] - x23 + obs.pv - obs.demand);
            if !(s_min..=s_max).contains(&s24) {
                return None;
            }
            let mut total = -obs.rt_price * x23 + a.beta * (c[22] + x23).abs();
            for (k, scen) in scens.iter().enumerate() {
                let x24 = z[1 + k];
                let g = scen.component(qi_v)[0] - scen.component(qi_d)[0];
                let s25 = s24 + eta * (g - c[23] - x24);
                if !(s_min..=s_max).contains(&s25) {
                    return None;
                }
                total += scen.probability()
                    * (-scen.component(qi_p)[0] * x24
                        + a.alpha * (s25 - s24).powi(2)
                        + a.beta * (c[23] + x24).abs());
            }
            Some(total)
        };
        let (_, best_val) =
            grid_min(&objective, &[0.0; 5], &[12.0; 5], 16, 9);
        assert!(sol.objective <= best_val + 1e-6);
        assert_relative_eq!(sol.objective, best_val, epsilon = 5e-4);
    }

    #[test]
    fn rt_flat_world_bids_nothing() {
        // zero prices and balanced pv/demand leave no reason to act
        let a = agg(0.4, 0.05, 8.0);
        let schedule = BidSchedule::new([0.0; 24], a.c_max).unwrap();
        let obs = RtObservation { rt_price: 0.0, pv: 0.3, demand: 0.3 };
        let flat = vec![0.3; 12];
        let zeros = vec![0.0; 12];
        let joint = joint3(&[(&zeros, 1.0)], &[(&flat, 1.0)], &[(&flat, 1.0)]);
        let qp = build_rt(&a, 12, 5.0, &schedule, obs, Some(&joint)).unwrap();
        let sol = solve(&qp, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let x = qp.value_of(&sol, Variable::RtBid { hour: 11, scenario: None }).unwrap();
        assert!(x.abs() < 1e-5, "here-and-now bid {x}");
        for i in 0..12u8 {
            let xi =
                qp.value_of(&sol, Variable::RtBid { hour: 12 + i, scenario: Some(0) }).unwrap();
            assert!(xi.abs() < 1e-5, "hour {} bids {xi}", 13 + i);
        }
    }

    #[test]
    fn rt_input_validation() {
        let a = agg(0.4, 0.05, 8.0);
        let schedule = BidSchedule::new([0.0; 24], a.c_max).unwrap();
        let obs = RtObservation { rt_price: 1.0, pv: 0.0, demand: 0.0 };
        let one = vec![1.0];
        let joint1 = joint3(&[(&one, 1.0)], &[(&one, 1.0)], &[(&one, 1.0)]);

        assert!(matches!(
            build_rt(&a, 0, 5.0, &schedule, obs, Some(&joint1)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_rt(&a, 25, 5.0, &schedule, obs, None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_rt(&a, 24, 12.0, &schedule, obs, None),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_rt(&a, 24, 5.0, &schedule, obs, Some(&joint1)),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_rt(&a, 12, 5.0, &schedule, obs, None),
            Err(Error::InvalidScenarioSet(_))
        ));
        // horizon 1 scenarios offered for hour 12, which needs 12
        assert!(matches!(
            build_rt(&a, 12, 5.0, &schedule, obs, Some(&joint1)),
            Err(Error::LengthMismatch { .. })
        ));
        // a slightly out-of-range state from accumulated solver noise is
        // accepted and clamped
        assert!(build_rt(&a, 23, 9.0 + 1e-6, &schedule, obs, Some(&joint1)).is_ok());
    }

    #[test]
    fn baselines_are_deterministic_and_capped() {
        let (da, rt_a, _, pv, demand) = day_world();
        let a = agg(0.4, 0.05, 2.0);
        let yesterday = DayRealization::new(rt_a.clone(), pv.clone(), demand.clone()).unwrap();
        let first = naive_baseline_da(&a, &da, &yesterday).unwrap();
        let second = naive_baseline_da(&a, &da, &yesterday).unwrap();
        assert_eq!(first.commitments(), second.commitments());
        for &c in first.commitments() {
            assert!(c.abs() <= a.c_max);
        }

        let obs = RtObservation { rt_price: 1.3, pv: 0.9, demand: 0.5 };
        let x12 = naive_baseline_rt(&a, 12, 5.0, &first, obs, &yesterday).unwrap();
        assert!(x12.is_finite());
        let x24 = naive_baseline_rt(&a, 24, 5.0, &first, obs, &yesterday).unwrap();
        assert!(x24.is_finite());
    }

    #[test]
    fn dump_lists_problem_dimensions() {
        let (da, rt_a, _, pv, demand) = day_world();
        let joint = joint3(&[(&rt_a, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let qp = build_da(&agg(0.4, 0.05, 8.0), &da, &joint).unwrap();
        let mut out = Vec::new();
        qp.dump(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("quadratic-program n 97 m_eq 25 m_ineq 170"));
        assert!(text.contains("\nA 0 "));
        assert!(text.contains("\nh 0 "));
    }

    #[test]
    fn fix_variable_rejects_unknown_names() {
        let (da, rt_a, _, pv, demand) = day_world();
        let joint = joint3(&[(&rt_a, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let mut qp = build_da(&agg(0.4, 0.05, 8.0), &da, &joint).unwrap();
        assert!(matches!(
            qp.fix_variable(Variable::Commitment { hour: 24 }, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            qp.fix_variable(Variable::Commitment { hour: 0 }, f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn da_full_scale_solves_within_budget() {
        // the production shape: 125 joint scenarios over 24 hours
        let (da, rt_a, rt_b, pv, demand) = day_world();
        let pv_scens: Vec<Vec<f64>> =
            (0..5).map(|i| pv.iter().map(|v| v * (0.6 + 0.1 * i as f64)).collect()).collect();
        let d_scens: Vec<Vec<f64>> =
            (0..5).map(|i| demand.iter().map(|v| v * (0.8 + 0.1 * i as f64)).collect()).collect();
        let p_scens: Vec<Vec<f64>> = (0..5)
            .map(|i| rt_a.iter().zip(&rt_b).map(|(x, y)| x + 0.25 * i as f64 * (y - x)).collect())
            .collect();
        fn mk(list: &[Vec<f64>]) -> Vec<(&[f64], f64)> {
            list.iter().map(|v| (v.as_slice(), 0.2)).collect()
        }
        let joint = joint3(&mk(&p_scens), &mk(&pv_scens), &mk(&d_scens));
        let qp = build_da(&agg(0.4, 0.05, 8.0), &da, &joint).unwrap();
        let start = std::time::Instant::now();
        let sol = solve(&qp, 1e-6).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(
            elapsed < std::time::Duration::from_secs(20),
            "full-scale solve took {elapsed:?}"
        );
        println!(
            "full-scale day-ahead: {} iterations in {elapsed:?}",
            sol.iterations
        );
    }

    #[test]
    fn variable_lookup_is_consistent() {
        let (da, rt_a, _, pv, demand) = day_world();
        let joint = joint3(&[(&rt_a, 1.0)], &[(&pv, 1.0)], &[(&demand, 1.0)]);
        let qp = build_da(&agg(0.4, 0.05, 8.0), &da, &joint).unwrap();
        for (i, v) in qp.variables().iter().enumerate() {
            assert_eq!(qp.index_of(*v), Some(i));
        }
        assert_eq!(qp.index_of(Variable::Commitment { hour: 0 }), Some(0));
    }
}
