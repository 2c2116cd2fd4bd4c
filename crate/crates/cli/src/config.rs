use std::path::{Path, PathBuf};

use aggsim_core::core::{BatterySpec, CostParams};
use aggsim_core::forecast::SarimaOrders;
use aggsim_core::sim::QuantityOrders;
use aggsim_core::synth::SynthSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Everything a run needs, with defaults chosen so that an empty file
/// reproduces the standard experiment on synthetic data: a 5 kWh
/// battery at 0.9 efficiency bounded to 10-90% of capacity and starting
/// half full, alpha 0.4, beta 0.05, 50 raw scenarios reduced to 5, and
/// six simulated households.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `prices.csv` and one `unit_*.csv` per unit.
    /// If it does not exist, `run` falls back to synthetic data.
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Case numbers to execute, in order.
    pub cases: Vec<u8>,
    /// Trailing days of the dataset to simulate; the rest train models.
    pub eval_days: usize,
    pub battery: BatterySection,
    pub costs: CostSection,
    pub scenarios: ScenarioSection,
    pub orders: OrderSection,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            out_dir: PathBuf::from("out"),
            seed: 1,
            cases: vec![1, 2, 3],
            eval_days: 28,
            battery: BatterySection::default(),
            costs: CostSection::default(),
            scenarios: ScenarioSection::default(),
            orders: OrderSection::default(),
            synth: SynthSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    pub capacity_kwh: f64,
    pub efficiency: f64,
    /// Storage bounds and initial level as fractions of capacity.
    pub lower_bound_frac: f64,
    pub upper_bound_frac: f64,
    pub initial_frac: f64,
}

impl Default for BatterySection {
    fn default() -> Self {
        Self {
            capacity_kwh: 5.0,
            efficiency: 0.9,
            lower_bound_frac: 0.10,
            upper_bound_frac: 0.90,
            initial_frac: 0.50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CostSection {
    /// Quadratic degradation coefficient, currency/(kWh)^2.
    pub alpha: f64,
    /// Linear network-usage coefficient, currency/kWh.
    pub beta: f64,
    /// Bid cap in kW; when absent it defaults to twice the fleet's
    /// summed historical PV peaks, which never binds at household scale.
    pub c_max: Option<f64>,
}

impl Default for CostSection {
    fn default() -> Self {
        Self { alpha: 0.4, beta: 0.05, c_max: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// Raw draws per quantity before reduction.
    pub n_raw: usize,
    /// Scenarios preserved per quantity; the joint set is the cube.
    pub k_preserve: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { n_raw: 50, k_preserve: 5 }
    }
}

/// Per-quantity model orders as `[p, d, q, P, D, Q, s]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OrderSection {
    pub rt_price: [usize; 7],
    pub pv: [usize; 7],
    pub demand: [usize; 7],
}

impl Default for OrderSection {
    fn default() -> Self {
        let d = [1, 0, 1, 1, 1, 1, 24];
        Self { rt_price: d, pv: d, demand: d }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_units: usize,
    pub n_days: usize,
    pub demand_mean_kw: f64,
    pub pv_peak_kw: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { n_units: 6, n_days: 63, demand_mean_kw: 0.5, pv_peak_kw: 2.0 }
    }
}

impl RunConfig {
    /// Reads a config file, or returns the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-by-field range checks; every message names the field.
    pub fn validate(&self) -> Result<()> {
        let b = &self.battery;
        if !(b.capacity_kwh.is_finite() && b.capacity_kwh > 0.0) {
            return Err(CliError::Validation(format!(
                "battery.capacity_kwh must be positive, got {}",
                b.capacity_kwh
            )));
        }
        for (name, v) in [
            ("battery.lower_bound_frac", b.lower_bound_frac),
            ("battery.upper_bound_frac", b.upper_bound_frac),
            ("battery.initial_frac", b.initial_frac),
        ] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(CliError::Validation(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if b.lower_bound_frac >= b.upper_bound_frac {
            return Err(CliError::Validation(format!(
                "battery.lower_bound_frac {} must be below battery.upper_bound_frac {}",
                b.lower_bound_frac, b.upper_bound_frac
            )));
        }
        if !(b.lower_bound_frac..=b.upper_bound_frac).contains(&b.initial_frac) {
            return Err(CliError::Validation(format!(
                "battery.initial_frac {} must lie within the storage bounds [{}, {}]",
                b.initial_frac, b.lower_bound_frac, b.upper_bound_frac
            )));
        }
        if !(b.efficiency.is_finite() && b.efficiency > 0.0 && b.efficiency <= 1.0) {
            return Err(CliError::Validation(format!(
                "battery.efficiency must lie in (0, 1], got {}",
                b.efficiency
            )));
        }
        self.battery_spec()?;
        self.cost_params()?;
        if self.cases.is_empty() {
            return Err(CliError::Validation("cases must list at least one case".into()));
        }
        for &c in &self.cases {
            if !(1..=3).contains(&c) {
                return Err(CliError::Validation(format!("cases entries must be 1..=3, got {c}")));
            }
        }
        if self.eval_days == 0 {
            return Err(CliError::Validation("eval_days must be at least 1".into()));
        }
        let s = &self.scenarios;
        if s.k_preserve < 1 || s.n_raw < s.k_preserve {
            return Err(CliError::Validation(format!(
                "scenarios must satisfy n_raw >= k_preserve >= 1, got n_raw {} and k_preserve {}",
                s.n_raw, s.k_preserve
            )));
        }
        self.quantity_orders()?;
        if self.synth.n_units < 1 {
            return Err(CliError::Validation(format!(
                "synth.n_units must be at least 1, got {}",
                self.synth.n_units
            )));
        }
        if self.synth.n_days < 40 {
            return Err(CliError::Validation(format!(
                "synth.n_days must be at least 40, got {}",
                self.synth.n_days
            )));
        }
        for (name, v) in [
            ("synth.demand_mean_kw", self.synth.demand_mean_kw),
            ("synth.pv_peak_kw", self.synth.pv_peak_kw),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Validation(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn battery_spec(&self) -> Result<BatterySpec> {
        let b = &self.battery;
        BatterySpec::new(
            b.lower_bound_frac * b.capacity_kwh,
            b.upper_bound_frac * b.capacity_kwh,
            b.efficiency,
            b.initial_frac * b.capacity_kwh,
        )
        .map_err(|e| CliError::Validation(format!("battery: {e}")))
    }

    pub fn cost_params(&self) -> Result<CostParams> {
        CostParams::new(self.costs.alpha, self.costs.beta, self.costs.c_max)
            .map_err(|e| CliError::Validation(format!("costs: {e}")))
    }

    pub fn quantity_orders(&self) -> Result<QuantityOrders> {
        let build = |name: &str, o: [usize; 7]| {
            SarimaOrders::new(o[0], o[1], o[2], o[3], o[4], o[5], o[6])
                .map_err(|e| CliError::Validation(format!("orders.{name}: {e}")))
        };
        Ok(QuantityOrders {
            rt_price: build("rt_price", self.orders.rt_price)?,
            pv: build("pv", self.orders.pv)?,
            demand: build("demand", self.orders.demand)?,
        })
    }

    /// Synthetic-world spec assembled from the synth section, the
    /// battery section, and the run seed.
    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let mut spec = SynthSpec::new(self.seed, self.synth.n_units, self.synth.n_days)
            .map_err(|e| CliError::Validation(format!("synth: {e}")))?;
        spec.demand_mean_kw = self.synth.demand_mean_kw;
        spec.pv_peak_kw = self.synth.pv_peak_kw;
        spec.battery = self.battery_spec()?;
        Ok(spec)
    }
}
