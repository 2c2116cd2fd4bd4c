//! Rolling-horizon market simulator: each day is one day-ahead solve
//! followed by 24 hourly real-time solves, settled against the realized
//! prices, PV, and demand.
//!
//! Three operating modes are compared: the aggregate fleet under the
//! scenario-based stochastic model (case 1), the aggregate fleet under a
//! yesterday-repeats deterministic baseline (case 2), and every unit
//! independently under the stochastic model (case 3).

use chrono::NaiveDate;

use crate::core::{
    aggregate_units, battery_step, realized_cost, AggregatorSpec, BidSchedule, CostBreakdown,
    CostParams, HourlySeries, SeriesUnit, UnitSpec, HOURS_PER_DAY,
};
use crate::error::{Error, Result};
use crate::errormodel::GaussianErrorModel;
use crate::forecast::{SarimaModel, SarimaOrders};
use crate::optimize::{
    build_da, build_rt, naive_baseline_da, naive_baseline_rt, solve, DayRealization,
    RtObservation, SolveStatus, Variable, DEFAULT_TOL,
};
use crate::scenario::{cross_product, generate_da, generate_rt, reduce, Quantity, ScenarioSet};

/// One simulated mode of operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// Fleet aggregated into one virtual resource, scenario-based
    /// stochastic decisions.
    AggregatedStochastic,
    /// Fleet aggregated, deterministic yesterday-repeats baseline.
    AggregatedNaive,
    /// Each unit decides for itself with the stochastic model; costs sum.
    PerUnitStochastic,
}

impl Case {
    /// Conventional 1/2/3 numbering used in reports.
    pub fn number(self) -> u8 {
        match self {
            Case::AggregatedStochastic => 1,
            Case::AggregatedNaive => 2,
            Case::PerUnitStochastic => 3,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Case::AggregatedStochastic),
            2 => Some(Case::AggregatedNaive),
            3 => Some(Case::PerUnitStochastic),
            _ => None,
        }
    }
}

/// Model orders for the three forecast quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantityOrders {
    pub rt_price: SarimaOrders,
    pub pv: SarimaOrders,
    pub demand: SarimaOrders,
}

impl Default for QuantityOrders {
    fn default() -> Self {
        Self {
            rt_price: SarimaOrders::default(),
            pv: SarimaOrders::default(),
            demand: SarimaOrders::default(),
        }
    }
}

/// Per-case run settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseConfig {
    pub case: Case,
    /// Raw scenario draws per quantity before reduction.
    pub n_raw: usize,
    /// Scenarios preserved per quantity; the joint set has the cube.
    pub k_preserve: usize,
    pub seed: u64,
    pub orders: QuantityOrders,
}

impl CaseConfig {
    pub fn new(
        case: Case,
        n_raw: usize,
        k_preserve: usize,
        seed: u64,
        orders: QuantityOrders,
    ) -> Result<Self> {
        if k_preserve < 1 || n_raw < k_preserve {
            return Err(Error::InvalidArgument(format!(
                "scenario counts must satisfy n_raw >= k_preserve >= 1, got {n_raw} and \
                 {k_preserve}"
            )));
        }
        Ok(Self { case, n_raw, k_preserve, seed, orders })
    }

    /// The standard configuration: 50 raw draws reduced to 5 per
    /// quantity (125 joint scenarios).
    pub fn standard(case: Case, seed: u64) -> Self {
        Self { case, n_raw: 50, k_preserve: 5, seed, orders: QuantityOrders::default() }
    }
}

/// Realized market data of one simulated day. PV and demand are
/// fleet totals; `unit_pv` and `unit_demand` optionally break them
/// down per unit (in fleet order) so per-unit runs can face each
/// unit's own realization. When the breakdown is absent, per-unit
/// runs fall back to slicing the fleet series proportionally to each
/// unit's historical mean.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub da_prices: Vec<f64>,
    pub rt_prices: Vec<f64>,
    pub pv_actual: Vec<f64>,
    pub demand_actual: Vec<f64>,
    pub unit_pv: Vec<Vec<f64>>,
    pub unit_demand: Vec<Vec<f64>>,
}

impl MarketDay {
    pub fn new(
        date: NaiveDate,
        da_prices: Vec<f64>,
        rt_prices: Vec<f64>,
        pv_actual: Vec<f64>,
        demand_actual: Vec<f64>,
    ) -> Result<Self> {
        for (name, v) in [
            ("da_prices", &da_prices),
            ("rt_prices", &rt_prices),
            ("pv_actual", &pv_actual),
            ("demand_actual", &demand_actual),
        ] {
            if v.len() != HOURS_PER_DAY {
                return Err(Error::LengthMismatch {
                    context: "market day",
                    expected: HOURS_PER_DAY,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidArgument(format!("non-finite {name} on {date}")));
            }
        }
        if pv_actual.iter().chain(&demand_actual).any(|&x| x < 0.0) {
            return Err(Error::InvalidArgument(format!("negative PV or demand on {date}")));
        }
        Ok(Self {
            date,
            da_prices,
            rt_prices,
            pv_actual,
            demand_actual,
            unit_pv: Vec::new(),
            unit_demand: Vec::new(),
        })
    }

    /// Attaches per-unit realizations. Each unit's series must be a
    /// valid hourly day, and the units must sum back to the fleet
    /// totals so aggregate and per-unit runs describe the same world.
    pub fn with_unit_actuals(
        mut self,
        unit_pv: Vec<Vec<f64>>,
        unit_demand: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if unit_pv.len() != unit_demand.len() {
            return Err(Error::InvalidArgument(format!(
                "per-unit PV covers {} units but demand covers {} on {}",
                unit_pv.len(),
                unit_demand.len(),
                self.date
            )));
        }
        for (series, total) in
            [(&unit_pv, &self.pv_actual), (&unit_demand, &self.demand_actual)]
        {
            for day in series.iter() {
                if day.len() != HOURS_PER_DAY {
                    return Err(Error::LengthMismatch {
                        context: "per-unit day",
                        expected: HOURS_PER_DAY,
                        actual: day.len(),
                    });
                }
                if day.iter().any(|&x| !x.is_finite() || x < 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "per-unit series on {} must be finite and non-negative",
                        self.date
                    )));
                }
            }
            for (hour, &fleet) in total.iter().enumerate() {
                let sum: f64 = series.iter().map(|day| day[hour]).sum();
                if (sum - fleet).abs() > 1e-6 * fleet.abs().max(1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "per-unit series sum to {sum} but the fleet total is {fleet} at \
                         hour {hour} on {}",
                        self.date
                    )));
                }
            }
        }
        self.unit_pv = unit_pv;
        self.unit_demand = unit_demand;
        Ok(self)
    }

    /// The day's realizations in the form the deterministic baseline
    /// consumes.
    pub fn realization(&self) -> DayRealization {
        DayRealization::new(
            self.rt_prices.clone(),
            self.pv_actual.clone(),
            self.demand_actual.clone(),
        )
        .expect("market day invariants imply a valid realization")
    }
}

/// Market price history over the training range.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceHistory {
    pub da: HourlySeries,
    pub rt: HourlySeries,
}

impl PriceHistory {
    pub fn new(da: HourlySeries, rt: HourlySeries) -> Result<Self> {
        if !da.same_range(&rt) {
            return Err(Error::MismatchedHistories(
                "day-ahead and real-time price histories cover different ranges".into(),
            ));
        }
        if da.len() % HOURS_PER_DAY != 0 {
            return Err(Error::InvalidArgument(format!(
                "price history length {} is not a multiple of 24",
                da.len()
            )));
        }
        for (name, s) in [("day-ahead", &da), ("real-time", &rt)] {
            if s.unit() != SeriesUnit::CurrencyPerKwh {
                return Err(Error::InvalidArgument(format!(
                    "{name} price history must carry currency-per-kWh values"
                )));
            }
        }
        Ok(Self { da, rt })
    }
}

/// A fitted forecaster for one quantity: the time-series model, the
/// hourly error distribution, and the history the forecasts extend
/// (grown day by day as the simulation advances).
#[derive(Debug, Clone)]
pub struct QuantityModel {
    pub model: SarimaModel,
    pub error: GaussianErrorModel,
    pub history: Vec<f64>,
}

/// The three fitted forecasters a stochastic run needs.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub rt_price: QuantityModel,
    pub pv: QuantityModel,
    pub demand: QuantityModel,
}

fn train_quantity(series: &HourlySeries, orders: SarimaOrders) -> Result<QuantityModel> {
    let model = SarimaModel::fit(series, orders)?;
    let residuals = model.residual_matrix(series)?;
    let error = GaussianErrorModel::estimate(&residuals)?;
    Ok(QuantityModel { model, error, history: series.values().to_vec() })
}

/// Fits the three per-quantity models on histories ending right before
/// the simulation window. Models are fitted once; the simulation only
/// extends their histories, never refits.
pub fn train_models(
    prices: &PriceHistory,
    pv: &HourlySeries,
    demand: &HourlySeries,
    orders: &QuantityOrders,
) -> Result<TrainedModels> {
    if !pv.same_range(demand) || !pv.same_range(&prices.rt) {
        return Err(Error::MismatchedHistories(
            "PV, demand, and price training histories must cover one range".into(),
        ));
    }
    Ok(TrainedModels {
        rt_price: train_quantity(&prices.rt, orders.rt_price)?,
        pv: train_quantity(pv, orders.pv)?,
        demand: train_quantity(demand, orders.demand)?,
    })
}

/// Outcome of one unit-day (or aggregate-day) of simulated operation.
#[derive(Debug, Clone)]
pub struct DayResult {
    pub date: NaiveDate,
    /// Unit identifier for per-unit runs; `None` for aggregate runs.
    pub unit: Option<String>,
    pub schedule: BidSchedule,
    pub rt_bids: Vec<f64>,
    /// 25 storage states, `storage[0]` the carry-in and `storage[24]`
    /// the carry-out, evolved under realized PV/demand.
    pub storage: Vec<f64>,
    pub cost: CostBreakdown,
    pub cost_total: f64,
    /// Wall-clock solve times in milliseconds: index 0 the day-ahead
    /// problem, 1..=24 the hourly problems.
    pub solve_millis: Vec<f64>,
    /// Joint scenarios used per solve, same indexing; 0 marks a problem
    /// with no scenario stage (the final hour, by construction).
    pub scenario_counts: Vec<usize>,
}

/// Stable per-(day, stage, quantity, unit) stream derivation from the
/// run seed, so any sub-run reproduces bit-identically.
fn derive_seed(base: u64, day: usize, stage: usize, quantity: usize, unit: usize) -> u64 {
    fn mix(h: u64, v: u64) -> u64 {
        let mut x = h.wrapping_add(v).wrapping_add(0x9E37_79B9_7F4A_7C15);
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^ (x >> 31)
    }
    let mut h = mix(base, 0x51ED);
    h = mix(h, day as u64);
    h = mix(h, stage as u64);
    h = mix(h, quantity as u64);
    mix(h, unit as u64)
}

fn quantity_tag(q: Quantity) -> usize {
    match q {
        Quantity::RtPrice => 1,
        Quantity::Pv => 2,
        Quantity::Demand => 3,
    }
}

struct StageSeeds {
    base: u64,
    day: usize,
    unit: usize,
}

impl StageSeeds {
    fn seed(&self, stage: usize, q: Quantity) -> u64 {
        derive_seed(self.base, self.day, stage, quantity_tag(q), self.unit)
    }
}

/// Draws, reduces, and joins the three quantities' scenario sets for one
/// stage. `realized` carries the elapsed hours of the day (empty at the
/// day-ahead stage).
struct ScenarioStage<'a> {
    config: &'a CaseConfig,
    models: &'a TrainedModels,
    forecasts: &'a DayForecasts,
    seeds: &'a StageSeeds,
}

/// The full-day point forecasts made at the day-ahead stage and reused,
/// together with the per-quantity error models, for every hourly update.
struct DayForecasts {
    rt_price: Vec<f64>,
    pv: Vec<f64>,
    demand: Vec<f64>,
}

impl<'a> ScenarioStage<'a> {
    fn one(
        &self,
        q: Quantity,
        stage: usize,
        forecast: &[f64],
        model: &QuantityModel,
        realized: &[f64],
    ) -> Result<ScenarioSet> {
        let seed = self.seeds.seed(stage, q);
        let raw = if realized.is_empty() {
            generate_da(forecast, &model.error, self.config.n_raw, seed, q)?
        } else {
            generate_rt(forecast, &model.error, realized, self.config.n_raw, seed, q)?
        };
        reduce(&raw, self.config.k_preserve)
    }

    fn joint(
        &self,
        stage: usize,
        realized_prices: &[f64],
        realized_pv: &[f64],
        realized_demand: &[f64],
    ) -> Result<crate::scenario::JointScenarioSet> {
        let price = self.one(
            Quantity::RtPrice,
            stage,
            &self.forecasts.rt_price,
            &self.models.rt_price,
            realized_prices,
        )?;
        let pv =
            self.one(Quantity::Pv, stage, &self.forecasts.pv, &self.models.pv, realized_pv)?;
        let demand = self.one(
            Quantity::Demand,
            stage,
            &self.forecasts.demand,
            &self.models.demand,
            realized_demand,
        )?;
        cross_product(&[price, pv, demand])
    }
}

fn abort(hour: u8, storage: f64, what: &str, sol: &crate::optimize::Solution) -> Error {
    Error::DayAborted {
        hour,
        storage,
        detail: format!(
            "{what} solve ended {}: residuals stat {:.3e} primal {:.3e} comp {:.3e} after {} \
             iterations",
            sol.status.as_str(),
            sol.stationarity,
            sol.primal,
            sol.complementarity,
            sol.iterations
        ),
    }
}

/// Simulates one day: the day-ahead commitment, then 24 hourly recourse
/// decisions, with storage evolving under the realized values.
///
/// `models` may be `None` only for the deterministic baseline case,
/// which forecasts nothing. `yesterday` feeds that baseline (for the
/// first simulated day, the last training day). `day_index` and
/// `unit_index` key the deterministic random streams: the aggregate runs
/// as unit 0.
#[allow(clippy::too_many_arguments)]
pub fn run_day(
    config: &CaseConfig,
    agg: &AggregatorSpec,
    day: &MarketDay,
    models: Option<&TrainedModels>,
    s_in: f64,
    yesterday: &DayRealization,
    day_index: usize,
    unit_index: usize,
) -> Result<DayResult> {
    let naive = config.case == Case::AggregatedNaive;
    let models = match (naive, models) {
        (true, _) => None,
        (false, Some(m)) => Some(m),
        (false, None) => {
            return Err(Error::InvalidArgument(
                "stochastic cases need trained forecast models".into(),
            ))
        }
    };

    let mut solve_millis = Vec::with_capacity(25);
    let mut scenario_counts = Vec::with_capacity(25);
    let seeds = StageSeeds { base: config.seed, day: day_index, unit: unit_index };

    // day-ahead stage
    let started = std::time::Instant::now();
    let (schedule, forecasts) = if let Some(models) = models {
        let forecasts = DayForecasts {
            rt_price: models.rt_price.model.forecast_values(&models.rt_price.history, 24)?,
            pv: models.pv.model.forecast_values(&models.pv.history, 24)?,
            demand: models.demand.model.forecast_values(&models.demand.history, 24)?,
        };
        let stage = ScenarioStage { config, models, forecasts: &forecasts, seeds: &seeds };
        let joint = stage.joint(0, &[], &[], &[])?;
        scenario_counts.push(joint.len());
        let qp = build_da(agg, &day.da_prices, &joint)?;
        let sol = solve(&qp, DEFAULT_TOL)?;
        if sol.status != SolveStatus::Optimal {
            return Err(abort(0, s_in, "day-ahead", &sol));
        }
        let mut c = [0.0; HOURS_PER_DAY];
        for (hh, ci) in c.iter_mut().enumerate() {
            let v = qp
                .value_of(&sol, Variable::Commitment { hour: hh as u8 })
                .expect("commitment variable exists");
            *ci = v.clamp(-agg.c_max, agg.c_max);
        }
        (BidSchedule::new(c, agg.c_max)?, Some(forecasts))
    } else {
        scenario_counts.push(1);
        (naive_baseline_da(agg, &day.da_prices, yesterday)?, None)
    };
    solve_millis.push(started.elapsed().as_secs_f64() * 1e3);

    // real-time stage, hour by hour
    let eta = agg.battery.eta;
    let commitments = *schedule.commitments();
    let mut storage = Vec::with_capacity(25);
    storage.push(s_in);
    let mut rt_bids = Vec::with_capacity(24);
    for t in 1..=24u8 {
        let slot = (t - 1) as usize;
        let s_t = storage[slot];
        let obs = RtObservation {
            rt_price: day.rt_prices[slot],
            pv: day.pv_actual[slot],
            demand: day.demand_actual[slot],
        };
        let started = std::time::Instant::now();
        let x_t = if let (Some(models), Some(forecasts)) = (models, forecasts.as_ref()) {
            let stage = ScenarioStage { config, models, forecasts, seeds: &seeds };
            let joint = if t < 24 {
                Some(stage.joint(
                    t as usize,
                    &day.rt_prices[..=slot],
                    &day.pv_actual[..=slot],
                    &day.demand_actual[..=slot],
                )?)
            } else {
                None
            };
            scenario_counts.push(joint.as_ref().map_or(0, |j| j.len()));
            let qp = build_rt(agg, t, s_t, &schedule, obs, joint.as_ref())?;
            let sol = solve(&qp, DEFAULT_TOL)?;
            if sol.status != SolveStatus::Optimal {
                return Err(abort(t, s_t, "real-time", &sol));
            }
            qp.value_of(&sol, Variable::RtBid { hour: t - 1, scenario: None })
                .expect("here-and-now bid exists")
        } else {
            scenario_counts.push(if t < 24 { 1 } else { 0 });
            naive_baseline_rt(agg, t, s_t, &schedule, obs, yesterday)?
        };
        solve_millis.push(started.elapsed().as_secs_f64() * 1e3);
        rt_bids.push(x_t);
        storage.push(battery_step(s_t, commitments[slot], obs.pv, obs.demand, x_t, eta)?);
    }

    let cost = realized_cost(
        &commitments,
        &rt_bids,
        &day.rt_prices,
        &day.da_prices,
        &storage,
        agg.alpha,
        agg.beta,
    )?;
    Ok(DayResult {
        date: day.date,
        unit: None,
        schedule,
        rt_bids,
        storage,
        cost,
        cost_total: cost.total(),
        solve_millis,
        scenario_counts,
    })
}

/// Result of one case over the whole window. For the per-unit case the
/// day list holds one entry per (unit, day), unit-major.
#[derive(Debug, Clone)]
pub struct HorizonResult {
    pub case: Case,
    pub days: Vec<DayResult>,
    pub total: CostBreakdown,
    pub total_cost: f64,
}

impl HorizonResult {
    /// Per-date cost totals, summed over units where applicable.
    pub fn daily_totals(&self) -> Vec<(NaiveDate, f64)> {
        let mut out: Vec<(NaiveDate, f64)> = Vec::new();
        for d in &self.days {
            match out.iter_mut().find(|(date, _)| *date == d.date) {
                Some((_, acc)) => *acc += d.cost_total,
                None => out.push((d.date, d.cost_total)),
            }
        }
        out.sort_by_key(|(date, _)| *date);
        out
    }
}

fn add_breakdown(acc: &mut CostBreakdown, d: &CostBreakdown) {
    acc.da_trade += d.da_trade;
    acc.rt_trade += d.rt_trade;
    acc.degradation += d.degradation;
    acc.network += d.network;
}

fn last_training_day(prices: &PriceHistory, pv: &HourlySeries, demand: &HourlySeries) -> DayRealization {
    let last = prices.rt.whole_days() - 1;
    DayRealization::new(
        prices.rt.day(last).to_vec(),
        pv.day(last).to_vec(),
        demand.day(last).to_vec(),
    )
    .expect("training histories are finite")
}

fn validate_window(prices: &PriceHistory, days: &[MarketDay]) -> Result<()> {
    let Some(first) = days.first() else {
        return Err(Error::InvalidArgument("no days to simulate".into()));
    };
    let train_end = prices.rt.start() + chrono::Duration::hours(prices.rt.len() as i64);
    let window_start = first
        .date
        .and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc();
    if train_end != window_start {
        return Err(Error::MismatchedHistories(format!(
            "training history ends at {train_end} but the simulation window starts at \
             {window_start}"
        )));
    }
    for pair in days.windows(2) {
        if pair[1].date != pair[0].date.succ_opt().expect("date range is sane") {
            return Err(Error::InvalidArgument(format!(
                "simulation days must be consecutive; {} follows {}",
                pair[1].date, pair[0].date
            )));
        }
    }
    Ok(())
}

/// Runs one resource (the aggregate, or a single unit) across the window
/// with storage carry-over and growing forecast histories.
#[allow(clippy::too_many_arguments)]
fn run_window(
    config: &CaseConfig,
    agg: &AggregatorSpec,
    mut models: Option<TrainedModels>,
    mut yesterday: DayRealization,
    days: &[MarketDay],
    unit_index: usize,
    unit_label: Option<&str>,
    out: &mut Vec<DayResult>,
) -> Result<CostBreakdown> {
    let mut total = CostBreakdown { da_trade: 0.0, rt_trade: 0.0, degradation: 0.0, network: 0.0 };
    let mut s = agg.battery.s_init;
    for (day_index, day) in days.iter().enumerate() {
        let mut result =
            run_day(config, agg, day, models.as_ref(), s, &yesterday, day_index, unit_index)?;
        result.unit = unit_label.map(str::to_owned);
        s = *result.storage.last().expect("storage trajectory has 25 entries");
        add_breakdown(&mut total, &result.cost);
        out.push(result);
        yesterday = day.realization();
        if let Some(models) = models.as_mut() {
            models.rt_price.history.extend_from_slice(&day.rt_prices);
            models.pv.history.extend_from_slice(&day.pv_actual);
            models.demand.history.extend_from_slice(&day.demand_actual);
        }
    }
    Ok(total)
}

/// Simulates one case over consecutive days. Models are trained once on
/// the provided histories (which must end exactly where the window
/// starts); storage carries over from each day into the next.
pub fn run_horizon(
    config: &CaseConfig,
    costs: &CostParams,
    units: &[UnitSpec],
    prices: &PriceHistory,
    days: &[MarketDay],
) -> Result<HorizonResult> {
    validate_window(prices, days)?;
    let mut day_results = Vec::new();
    let total = match config.case {
        Case::AggregatedStochastic | Case::AggregatedNaive => {
            let aggregate = aggregate_units(units, costs)?;
            let models = if config.case == Case::AggregatedStochastic {
                Some(train_models(prices, &aggregate.pv, &aggregate.demand, &config.orders)?)
            } else {
                if !aggregate.pv.same_range(&prices.rt) {
                    return Err(Error::MismatchedHistories(
                        "unit and price histories must cover one range".into(),
                    ));
                }
                None
            };
            let yesterday = last_training_day(prices, &aggregate.pv, &aggregate.demand);
            run_window(
                config,
                &aggregate.spec,
                models,
                yesterday,
                days,
                0,
                None,
                &mut day_results,
            )?
        }
        Case::PerUnitStochastic => {
            // each unit receives a proportional share of an explicit
            // fleet-level bid cap; the derived default is already
            // per-unit
            let share = CostParams {
                alpha: costs.alpha,
                beta: costs.beta,
                c_max: costs.c_max.map(|c| c / units.len() as f64),
            };
            let mut total =
                CostBreakdown { da_trade: 0.0, rt_trade: 0.0, degradation: 0.0, network: 0.0 };
            if units.is_empty() {
                return Err(Error::InvalidArgument("cannot simulate an empty fleet".into()));
            }
            // each unit is judged against its own realization when the
            // days carry one; otherwise the fleet series is sliced by
            // historical-mean shares (a single unit gets share exactly 1)
            let mean = |s: &HourlySeries| s.values().iter().sum::<f64>() / s.len() as f64;
            let pv_means: Vec<f64> = units.iter().map(|u| mean(&u.pv_history)).collect();
            let dm_means: Vec<f64> = units.iter().map(|u| mean(&u.demand_history)).collect();
            let pv_total: f64 = pv_means.iter().sum();
            let dm_total: f64 = dm_means.iter().sum();
            let even = 1.0 / units.len() as f64;
            for (unit_index, unit) in units.iter().enumerate() {
                let pv_share =
                    if pv_total > 0.0 { pv_means[unit_index] / pv_total } else { even };
                let dm_share =
                    if dm_total > 0.0 { dm_means[unit_index] / dm_total } else { even };
                let unit_days: Vec<MarketDay> = days
                    .iter()
                    .map(|d| {
                        let pv = if d.unit_pv.len() == units.len() {
                            d.unit_pv[unit_index].clone()
                        } else {
                            d.pv_actual.iter().map(|v| v * pv_share).collect()
                        };
                        let demand = if d.unit_demand.len() == units.len() {
                            d.unit_demand[unit_index].clone()
                        } else {
                            d.demand_actual.iter().map(|v| v * dm_share).collect()
                        };
                        MarketDay {
                            date: d.date,
                            da_prices: d.da_prices.clone(),
                            rt_prices: d.rt_prices.clone(),
                            pv_actual: pv,
                            demand_actual: demand,
                            unit_pv: Vec::new(),
                            unit_demand: Vec::new(),
                        }
                    })
                    .collect();
                let single = aggregate_units(std::slice::from_ref(unit), &share)?;
                let models =
                    train_models(prices, &single.pv, &single.demand, &config.orders)?;
                let yesterday = last_training_day(prices, &single.pv, &single.demand);
                let unit_total = run_window(
                    config,
                    &single.spec,
                    Some(models),
                    yesterday,
                    &unit_days,
                    unit_index,
                    Some(&unit.id),
                    &mut day_results,
                )?;
                add_breakdown(&mut total, &unit_total);
            }
            total
        }
    };
    Ok(HorizonResult { case: config.case, days: day_results, total, total_cost: total.total() })
}

/// Runs several case configurations over the same window and data.
pub fn compare_cases(
    configs: &[CaseConfig],
    costs: &CostParams,
    units: &[UnitSpec],
    prices: &PriceHistory,
    days: &[MarketDay],
) -> Result<Vec<HorizonResult>> {
    if configs.is_empty() {
        return Err(Error::InvalidArgument("no case configurations to run".into()));
    }
    configs.iter().map(|c| run_horizon(c, costs, units, prices, days)).collect()
}
