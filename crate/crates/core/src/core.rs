//! Shared domain types, battery dynamics, and aggregation of residential
//! units into one virtual resource.
//!
//! Hour indexing: a day has 24 hourly slots. Public storage trajectories
//! have 25 entries, `storage[t]` being the energy at the *start* of slot
//! `t` (0-based); `storage[24]` is the end-of-day state.

use chrono::{DateTime, Timelike, Utc};

use crate::error::{Error, Result};

pub const HOURS_PER_DAY: usize = 24;

/// Physical unit of an [`HourlySeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesUnit {
    /// Price in currency per kWh.
    CurrencyPerKwh,
    /// Power in kW.
    Kw,
    /// Energy in kWh.
    Kwh,
}

/// A timestamped sequence of hourly values with a declared unit.
///
/// Index `i` refers to the hour starting `i` hours after `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: DateTime<Utc>,
    values: Vec<f64>,
    unit: SeriesUnit,
}

impl HourlySeries {
    pub fn new(start: DateTime<Utc>, values: Vec<f64>, unit: SeriesUnit) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("hourly series must be non-empty".into()));
        }
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(Error::InvalidArgument(format!(
                "series start {start} is not aligned to a calendar hour"
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value {v} at index {i}"
                )));
            }
        }
        Ok(Self { start, values, unit })
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn unit(&self) -> SeriesUnit {
        self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction enforces length >= 1
    }

    /// Number of whole days covered, when the length is a multiple of 24.
    pub fn whole_days(&self) -> usize {
        self.values.len() / HOURS_PER_DAY
    }

    /// The 24 values of day `day` (0-based).
    pub fn day(&self, day: usize) -> &[f64] {
        &self.values[day * HOURS_PER_DAY..(day + 1) * HOURS_PER_DAY]
    }

    /// True when the two series start together and have equal length.
    pub fn same_range(&self, other: &HourlySeries) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }

    /// Index and value of the first negative entry, if any.
    pub fn first_negative(&self) -> Option<(usize, f64)> {
        self.values.iter().enumerate().find(|(_, v)| **v < 0.0).map(|(i, v)| (i, *v))
    }
}

/// Energy storage parameters of a single battery (or of the aggregate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    pub s_min: f64,
    pub s_max: f64,
    pub eta: f64,
    pub s_init: f64,
}

impl BatterySpec {
    pub fn new(s_min: f64, s_max: f64, eta: f64, s_init: f64) -> Result<Self> {
        for (name, v) in [("s_min", s_min), ("s_max", s_max), ("eta", eta), ("s_init", s_init)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if !(0.0 <= s_min && s_min < s_max) {
            return Err(Error::InvalidArgument(format!(
                "storage bounds must satisfy 0 <= s_min < s_max, got [{s_min}, {s_max}]"
            )));
        }
        if !(s_min <= s_init && s_init <= s_max) {
            return Err(Error::InvalidArgument(format!(
                "initial storage {s_init} outside bounds [{s_min}, {s_max}]"
            )));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "charge efficiency must lie in (0, 1], got {eta}"
            )));
        }
        Ok(Self { s_min, s_max, eta, s_init })
    }
}

/// A residential unit: battery plus PV and demand history.
#[derive(Debug, Clone)]
pub struct UnitSpec {
    pub id: String,
    pub battery: BatterySpec,
    pub pv_history: HourlySeries,
    pub demand_history: HourlySeries,
}

impl UnitSpec {
    pub fn new(
        id: impl Into<String>,
        battery: BatterySpec,
        pv_history: HourlySeries,
        demand_history: HourlySeries,
    ) -> Result<Self> {
        let id = id.into();
        if !pv_history.same_range(&demand_history) {
            return Err(Error::MismatchedHistories(format!(
                "unit {id}: PV and demand histories cover different ranges"
            )));
        }
        if pv_history.len() % HOURS_PER_DAY != 0 {
            return Err(Error::MismatchedHistories(format!(
                "unit {id}: history length {} is not a multiple of 24",
                pv_history.len()
            )));
        }
        for (name, series) in [("PV", &pv_history), ("demand", &demand_history)] {
            if let Some((i, v)) = series.first_negative() {
                return Err(Error::InvalidArgument(format!(
                    "unit {id}: negative {name} value {v} at hour index {i}"
                )));
            }
        }
        Ok(Self { id, battery, pv_history, demand_history })
    }
}

/// Cost coefficients and bid cap applied to an aggregate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Quadratic degradation coefficient, currency/(kWh)^2.
    pub alpha: f64,
    /// Linear network-usage coefficient, currency/kWh.
    pub beta: f64,
    /// Bid cap in kW; `None` derives the summed historical PV peaks.
    pub c_max: Option<f64>,
}

impl CostParams {
    pub fn new(alpha: f64, beta: f64, c_max: Option<f64>) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) || !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cost coefficients must be finite and non-negative, got alpha={alpha}, beta={beta}"
            )));
        }
        if let Some(c) = c_max {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::InvalidArgument(format!("bid cap must be positive, got {c}")));
            }
        }
        Ok(Self { alpha, beta, c_max })
    }
}

/// The virtual resource an aggregator bids into the market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregatorSpec {
    /// Summed storage bounds of the member units.
    pub battery: BatterySpec,
    /// Bid cap |c_t| <= c_max in kW.
    pub c_max: f64,
    pub alpha: f64,
    pub beta: f64,
    pub n_units: usize,
}

/// Aggregation result: the virtual resource plus its summed series.
#[derive(Debug, Clone)]
pub struct Aggregate {
    pub spec: AggregatorSpec,
    pub pv: HourlySeries,
    pub demand: HourlySeries,
}

/// Day-ahead commitments for one day, positive = sell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidSchedule {
    commitments: [f64; HOURS_PER_DAY],
}

impl BidSchedule {
    /// Validates |c_t| <= c_max for every hour.
    pub fn new(commitments: [f64; HOURS_PER_DAY], c_max: f64) -> Result<Self> {
        for (t, c) in commitments.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite commitment at hour {}",
                    t + 1
                )));
            }
            // Solver output sits on the cap up to its tolerance.
            if c.abs() > c_max * (1.0 + 1e-9) + 1e-6 {
                return Err(Error::InvalidArgument(format!(
                    "commitment {c} at hour {} exceeds bid cap {c_max}",
                    t + 1
                )));
            }
        }
        Ok(Self { commitments })
    }

    pub fn commitments(&self) -> &[f64; HOURS_PER_DAY] {
        &self.commitments
    }
}

/// One step of the storage balance: returns the next storage state
/// `s + eta * (-c + v - d - x)`.
///
/// Pure arithmetic; bound feasibility is the optimizer's job.
pub fn battery_step(s: f64, c: f64, v: f64, d: f64, x: f64, eta: f64) -> Result<f64> {
    for (name, val) in [("s", s), ("c", c), ("v", v), ("d", d), ("x", x), ("eta", eta)] {
        if !val.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be finite, got {val}")));
        }
    }
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {eta}")));
    }
    Ok(s + eta * (-c + v - d - x))
}

/// Sums member units into one virtual resource: element-wise sums of the
/// storage bounds, initial states, PV, and demand.
///
/// All units must share the same charge efficiency; any rule for mixing
/// different eta values would be invented semantics, so that is an error.
pub fn aggregate_units(units: &[UnitSpec], costs: &CostParams) -> Result<Aggregate> {
    let first = units
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot aggregate an empty unit list".into()))?;
    let eta = first.battery.eta;
    let len = first.pv_history.len();

    let mut s_min = 0.0;
    let mut s_max = 0.0;
    let mut s_init = 0.0;
    let mut pv = vec![0.0; len];
    let mut demand = vec![0.0; len];
    let mut pv_peak_sum = 0.0;

    for unit in units {
        if unit.battery.eta != eta {
            return Err(Error::HeterogeneousEfficiency { first: eta, other: unit.battery.eta });
        }
        if !unit.pv_history.same_range(&first.pv_history) {
            return Err(Error::MismatchedHistories(format!(
                "unit {} history range differs from unit {}",
                unit.id, first.id
            )));
        }
        s_min += unit.battery.s_min;
        s_max += unit.battery.s_max;
        s_init += unit.battery.s_init;
        for (acc, v) in pv.iter_mut().zip(unit.pv_history.values()) {
            *acc += v;
        }
        for (acc, v) in demand.iter_mut().zip(unit.demand_history.values()) {
            *acc += v;
        }
        pv_peak_sum += unit.pv_history.values().iter().cloned().fold(0.0, f64::max);
    }

    let c_max = match costs.c_max {
        Some(c) => c,
        None => {
            // the fleet's own PV peak: enough to market the whole
            // surplus plus storage, without room for outsized
            // positions bearing no relation to the hardware
            let derived = pv_peak_sum;
            if derived <= 0.0 {
                return Err(Error::InvalidSpec(
                    "cannot derive a bid cap from an all-zero PV history; set c_max explicitly"
                        .into(),
                ));
            }
            derived
        }
    };

    Ok(Aggregate {
        spec: AggregatorSpec {
            battery: BatterySpec::new(s_min, s_max, eta, s_init)?,
            c_max,
            alpha: costs.alpha,
            beta: costs.beta,
            n_units: units.len(),
        },
        pv: HourlySeries::new(first.pv_history.start(), pv, SeriesUnit::Kw)?,
        demand: HourlySeries::new(first.demand_history.start(), demand, SeriesUnit::Kw)?,
    })
}

/// Decomposed realized cost of one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// -sum p^D_t c_t (negative of day-ahead revenue).
    pub da_trade: f64,
    /// -sum p^R_t x_t (negative of real-time revenue).
    pub rt_trade: f64,
    /// alpha * sum (s_{t+1} - s_t)^2.
    pub degradation: f64,
    /// beta * sum |c_t + x_t|.
    pub network: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.da_trade + self.rt_trade + self.degradation + self.network
    }
}

/// Evaluates the realized cost of one horizon given commitments, RT bids,
/// prices, and the realized storage trajectory (`horizon + 1` entries).
pub fn realized_cost(
    commitments: &[f64],
    rt_bids: &[f64],
    rt_prices: &[f64],
    da_prices: &[f64],
    storage: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<CostBreakdown> {
    let horizon = commitments.len();
    for (context, len) in [
        ("rt_bids", rt_bids.len()),
        ("rt_prices", rt_prices.len()),
        ("da_prices", da_prices.len()),
    ] {
        if len != horizon {
            return Err(Error::LengthMismatch { context, expected: horizon, actual: len });
        }
    }
    if storage.len() != horizon + 1 {
        return Err(Error::LengthMismatch {
            context: "storage trajectory",
            expected: horizon + 1,
            actual: storage.len(),
        });
    }

    let mut da_trade = 0.0;
    let mut rt_trade = 0.0;
    let mut degradation = 0.0;
    let mut network = 0.0;
    for t in 0..horizon {
        da_trade -= da_prices[t] * commitments[t];
        rt_trade -= rt_prices[t] * rt_bids[t];
        let swing = storage[t + 1] - storage[t];
        degradation += alpha * swing * swing;
        network += beta * (commitments[t] + rt_bids[t]).abs();
    }
    Ok(CostBreakdown { da_trade, rt_trade, degradation, network })
}
