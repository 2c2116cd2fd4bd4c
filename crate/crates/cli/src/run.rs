use std::collections::BTreeMap;
use std::fs;

use aggsim_core::core::{aggregate_units, HOURS_PER_DAY};
use aggsim_core::scenario::{generate_da, reduce, Quantity, ScenarioSet};
use aggsim_core::sim::{
    compare_cases, train_models, Case, CaseConfig, HorizonResult, MarketDay, PriceHistory,
    QuantityModel, TrainedModels,
};
use aggsim_core::synth::generate;
use chrono::NaiveDate;
use serde::Serialize;

use crate::config::RunConfig;
use crate::data::ingest;
use crate::error::{CliError, Result};

pub fn case_label(case: Case) -> &'static str {
    match case {
        Case::AggregatedStochastic => "aggregated stochastic",
        Case::AggregatedNaive => "aggregated deterministic",
        Case::PerUnitStochastic => "per-unit stochastic",
    }
}

/// Machine-readable record of a completed run, also written to
/// `run_summary.json` in the output directory.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    /// "ingested" when the data directory was read, "synthetic" when
    /// the generator filled in for a missing directory.
    pub data_source: String,
    pub n_units: usize,
    pub train_days: usize,
    pub eval_days: usize,
    pub seed: u64,
    pub cases: Vec<CaseSummary>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct CaseSummary {
    pub case: u8,
    pub label: String,
    pub total_cost: f64,
    pub mean_daily_cost: f64,
    pub da_trade: f64,
    pub rt_trade: f64,
    pub degradation: f64,
    pub network: f64,
    pub solve_ms: f64,
}

/// Loads (or synthesizes) the dataset, runs every requested case over
/// the evaluation window, and writes all artifacts into the output
/// directory.
pub fn execute(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let battery = cfg.battery_spec()?;
    let (dataset, data_source) = if cfg.data_dir.is_dir() {
        (ingest(&cfg.data_dir, battery)?, "ingested".to_string())
    } else {
        (
            generate(&cfg.synth_spec()?).map_err(CliError::from)?,
            "synthetic".to_string(),
        )
    };
    let n_units = dataset.units.len();
    let total_days = dataset.n_days();
    let (units, prices, days) = dataset.split(cfg.eval_days).map_err(CliError::from)?;

    let costs = cfg.cost_params()?;
    let orders = cfg.quantity_orders()?;
    let configs: Vec<CaseConfig> = cfg
        .cases
        .iter()
        .map(|&n| {
            let case = Case::from_number(n)
                .ok_or_else(|| CliError::Validation(format!("unknown case {n}")))?;
            CaseConfig::new(
                case,
                cfg.scenarios.n_raw,
                cfg.scenarios.k_preserve,
                cfg.seed,
                orders,
            )
            .map_err(CliError::from)
        })
        .collect::<Result<_>>()?;

    let results = compare_cases(&configs, &costs, &units, &prices, &days)?;

    fs::create_dir_all(&cfg.out_dir).map_err(|e| CliError::io(&cfg.out_dir, e))?;
    let mut artifacts = Vec::new();
    let mut save = |name: &str, text: String| -> Result<()> {
        let path = cfg.out_dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        artifacts.push(name.to_string());
        Ok(())
    };

    save("day_results.csv", render_day_results(&results))?;
    save("comparison.csv", render_comparison(&results))?;
    save("plot_dispatch.csv", render_dispatch(&results, &days))?;
    save("plot_scenarios.csv", render_scenario_fans(cfg, &units, &prices, &days, &orders)?)?;

    let case_summaries: Vec<CaseSummary> = results
        .iter()
        .map(|r| CaseSummary {
            case: r.case.number(),
            label: case_label(r.case).to_string(),
            total_cost: r.total_cost,
            mean_daily_cost: r.total_cost / r.daily_totals().len() as f64,
            da_trade: r.total.da_trade,
            rt_trade: r.total.rt_trade,
            degradation: r.total.degradation,
            network: r.total.network,
            solve_ms: r.days.iter().map(|d| d.solve_millis.iter().sum::<f64>()).sum(),
        })
        .collect();

    let summary = RunSummary {
        data_source,
        n_units,
        train_days: total_days - cfg.eval_days,
        eval_days: cfg.eval_days,
        seed: cfg.seed,
        cases: case_summaries,
        artifacts: artifacts.clone(),
    };
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Io(format!("serializing run summary: {e}")))?;
    let path = cfg.out_dir.join("run_summary.json");
    fs::write(&path, json).map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}

fn render_day_results(results: &[HorizonResult]) -> String {
    let mut out = String::from(
        "case,date,unit,da_trade,rt_trade,degradation,network,cost_total,\
         carry_in_kwh,carry_out_kwh,da_scenarios,solve_ms\n",
    );
    for r in results {
        for d in &r.days {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{:.3}\n",
                r.case.number(),
                d.date,
                d.unit.as_deref().unwrap_or(""),
                d.cost.da_trade,
                d.cost.rt_trade,
                d.cost.degradation,
                d.cost.network,
                d.cost_total,
                d.storage[0],
                d.storage[HOURS_PER_DAY],
                d.scenario_counts[0],
                d.solve_millis.iter().sum::<f64>(),
            ));
        }
    }
    out
}

fn render_comparison(results: &[HorizonResult]) -> String {
    let mut out = String::from(
        "case,label,days,da_trade,rt_trade,degradation,network,total_cost,mean_daily_cost\n",
    );
    for r in results {
        let n_days = r.daily_totals().len();
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.case.number(),
            case_label(r.case),
            n_days,
            r.total.da_trade,
            r.total.rt_trade,
            r.total.degradation,
            r.total.network,
            r.total_cost,
            r.total_cost / n_days as f64,
        ));
    }
    out
}

/// Hourly dispatch per case and date, summed over units so the per-unit
/// case plots on the same axes as the aggregate ones.
fn render_dispatch(results: &[HorizonResult], days: &[MarketDay]) -> String {
    let by_date: BTreeMap<NaiveDate, &MarketDay> = days.iter().map(|d| (d.date, d)).collect();
    let mut out = String::from(
        "case,date,hour,da_price,rt_price,pv_kw,demand_kw,commitment_kw,rt_bid_kw,storage_kwh\n",
    );
    for r in results {
        let mut acc: BTreeMap<NaiveDate, ([f64; 24], [f64; 24], [f64; 25])> = BTreeMap::new();
        for d in &r.days {
            let (c, x, s) = acc.entry(d.date).or_insert(([0.0; 24], [0.0; 24], [0.0; 25]));
            for h in 0..HOURS_PER_DAY {
                c[h] += d.schedule.commitments()[h];
                x[h] += d.rt_bids[h];
                s[h] += d.storage[h];
            }
            s[HOURS_PER_DAY] += d.storage[HOURS_PER_DAY];
        }
        for (date, (c, x, s)) in &acc {
            let market = by_date[date];
            for h in 0..HOURS_PER_DAY {
                out.push_str(&format!(
                    "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                    r.case.number(),
                    date,
                    h,
                    market.da_prices[h],
                    market.rt_prices[h],
                    market.pv_actual[h],
                    market.demand_actual[h],
                    c[h],
                    x[h],
                    s[h],
                ));
            }
        }
    }
    out
}

/// Day-ahead scenario fans for the first evaluation day: the point
/// forecast, the raw draws, and the reduced set per quantity. The fans
/// are illustrative; they use their own seed stream, not the one the
/// simulated cases consume.
fn render_scenario_fans(
    cfg: &RunConfig,
    units: &[aggsim_core::core::UnitSpec],
    prices: &PriceHistory,
    days: &[MarketDay],
    orders: &aggsim_core::sim::QuantityOrders,
) -> Result<String> {
    let costs = cfg.cost_params()?;
    let aggregate = aggregate_units(units, &costs)?;
    let models: TrainedModels = train_models(prices, &aggregate.pv, &aggregate.demand, orders)?;
    let first_date = days.first().map(|d| d.date);

    let mut out = String::from("date,quantity,kind,scenario,probability,hour,value\n");
    let mut emit_set = |label: &str, kind: &str, set: &ScenarioSet| {
        for (i, s) in set.scenarios().iter().enumerate() {
            for (h, v) in s.values().iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{:.6},{},{:.6}\n",
                    first_date.unwrap(),
                    label,
                    kind,
                    i,
                    s.probability(),
                    h,
                    v,
                ));
            }
        }
    };
    let quantities: [(&str, Quantity, &QuantityModel); 3] = [
        ("rt_price", Quantity::RtPrice, &models.rt_price),
        ("pv", Quantity::Pv, &models.pv),
        ("demand", Quantity::Demand, &models.demand),
    ];
    for (qi, (label, quantity, model)) in quantities.into_iter().enumerate() {
        let forecast = model.model.forecast_values(&model.history, HOURS_PER_DAY)?;
        let seed = cfg.seed.wrapping_add(0x517E_D00D + qi as u64);
        let raw = generate_da(&forecast, &model.error, cfg.scenarios.n_raw, seed, quantity)?;
        let reduced = reduce(&raw, cfg.scenarios.k_preserve)?;
        let point = ScenarioSet::new(
            vec![aggsim_core::scenario::Scenario::new(forecast, 1.0)?],
            quantity,
        )?;
        emit_set(label, "forecast", &point);
        emit_set(label, "raw", &raw);
        emit_set(label, "reduced", &reduced);
    }
    Ok(out)
}

/// Plain-text comparison table for stdout.
pub fn render_table(summary: &RunSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "data: {} ({} units, {} training days, {} evaluation days, seed {})\n\n",
        summary.data_source, summary.n_units, summary.train_days, summary.eval_days, summary.seed
    ));
    out.push_str(&format!(
        "{:<4} {:<26} {:>12} {:>12} {:>10}\n",
        "case", "strategy", "total cost", "cost/day", "vs case 1"
    ));
    let base = summary.cases.iter().find(|c| c.case == 1).map(|c| c.total_cost);
    for c in &summary.cases {
        let rel = match base {
            Some(b) if c.case != 1 => format!("{:+.2}", c.total_cost - b),
            _ => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<4} {:<26} {:>12.4} {:>12.4} {:>10}\n",
            c.case, c.label, c.total_cost, c.mean_daily_cost, rel
        ));
    }
    out
}
