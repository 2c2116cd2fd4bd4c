//! Seeded generator for synthetic fleets and market prices.
//!
//! Real metered data is often unavailable or unshareable, so experiments
//! run on a reproducible stand-in: PV as a clipped solar arc with
//! seasonal drift, a fleet-wide daily weather factor, and per-roof
//! lognormal noise (exactly zero at night); demand as a double-peak
//! household profile with AR(1) noise; day-ahead prices as a smooth
//! diurnal shape with a mean-reverting daily level; and real-time
//! prices as the day-ahead curve plus mean-zero AR(1) noise with
//! scarcity spikes clustered in the evening. The same seed always
//! produces the same dataset bit for bit.

use chrono::{DateTime, Days, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::core::{BatterySpec, HourlySeries, SeriesUnit, UnitSpec, HOURS_PER_DAY};
use crate::error::{Error, Result};
use crate::sim::{MarketDay, PriceHistory};

/// Default mean household demand in kW.
pub const DEFAULT_DEMAND_MEAN_KW: f64 = 0.5;
/// Default clear-sky PV peak in kW.
pub const DEFAULT_PV_PEAK_KW: f64 = 2.0;

/// Per-unit scaling of the PV peak; the fleet mixes generation-heavy
/// and consumption-heavy households so aggregation can net them.
const PV_FACTORS: [f64; 6] = [1.45, 0.55, 1.00, 1.30, 0.70, 1.00];
/// Per-unit scaling of mean demand, anti-correlated with the PV mix.
const DEMAND_FACTORS: [f64; 6] = [0.62, 1.38, 1.00, 0.74, 1.26, 1.00];

const SUNRISE: f64 = 6.0;
const SUNSET: f64 = 18.0;

/// What to generate: fleet size, horizon length, scale knobs.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_units: usize,
    pub n_days: usize,
    pub start: DateTime<Utc>,
    /// Fleet-average household demand in kW.
    pub demand_mean_kw: f64,
    /// Fleet-average clear-sky PV peak in kW.
    pub pv_peak_kw: f64,
    /// Battery installed in every generated unit.
    pub battery: BatterySpec,
}

impl SynthSpec {
    /// At least one unit and enough days to train on and still have an
    /// evaluation window.
    pub fn new(seed: u64, n_units: usize, n_days: usize) -> Result<Self> {
        if n_units < 1 {
            return Err(Error::InvalidArgument(
                "synthetic fleet needs at least one unit".into(),
            ));
        }
        if n_days < 40 {
            return Err(Error::InvalidArgument(format!(
                "synthetic horizon of {n_days} days is too short; need at least 40 \
                 to cover training plus evaluation"
            )));
        }
        Ok(SynthSpec {
            seed,
            n_units,
            n_days,
            start: DateTime::<Utc>::from_timestamp(1_609_459_200, 0).unwrap(),
            demand_mean_kw: DEFAULT_DEMAND_MEAN_KW,
            pv_peak_kw: DEFAULT_PV_PEAK_KW,
            battery: BatterySpec::new(0.5, 4.5, 0.9, 2.5).unwrap(),
        })
    }
}

/// One generated household: id plus its full-horizon PV and demand.
#[derive(Debug, Clone)]
pub struct SynthUnit {
    pub id: String,
    pub pv: HourlySeries,
    pub demand: HourlySeries,
}

/// A complete generated world over the full horizon.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub units: Vec<SynthUnit>,
    pub da: HourlySeries,
    pub rt: HourlySeries,
    pub battery: BatterySpec,
}

impl SynthDataset {
    pub fn n_days(&self) -> usize {
        self.da.whole_days()
    }

    /// Splits the horizon into a training prefix and an evaluation
    /// suffix, packaged as simulator inputs: unit specs carrying the
    /// training histories, the training price history, and one
    /// `MarketDay` per evaluation day.
    pub fn split(
        &self,
        eval_days: usize,
    ) -> Result<(Vec<UnitSpec>, PriceHistory, Vec<MarketDay>)> {
        let total = self.n_days();
        if eval_days == 0 || eval_days >= total {
            return Err(Error::InvalidArgument(format!(
                "cannot split {total} days into training plus {eval_days} evaluation days"
            )));
        }
        let train = total - eval_days;
        let cut = train * HOURS_PER_DAY;
        let prefix = |s: &HourlySeries| {
            HourlySeries::new(s.start(), s.values()[..cut].to_vec(), s.unit())
        };
        let units = self
            .units
            .iter()
            .map(|u| {
                UnitSpec::new(
                    u.id.clone(),
                    self.battery.clone(),
                    prefix(&u.pv)?,
                    prefix(&u.demand)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let prices = PriceHistory::new(prefix(&self.da)?, prefix(&self.rt)?)?;
        let start_date = self.da.start().date_naive();
        let days = (0..eval_days)
            .map(|i| {
                let d = train + i;
                MarketDay::new(
                    start_date + Days::new(d as u64),
                    self.da.day(d).to_vec(),
                    self.rt.day(d).to_vec(),
                    fleet_total(self.units.iter().map(|u| u.pv.day(d))),
                    fleet_total(self.units.iter().map(|u| u.demand.day(d))),
                )?
                .with_unit_actuals(
                    self.units.iter().map(|u| u.pv.day(d).to_vec()).collect(),
                    self.units.iter().map(|u| u.demand.day(d).to_vec()).collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((units, prices, days))
    }
}

fn fleet_total<'a>(days: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc = vec![0.0; HOURS_PER_DAY];
    for day in days {
        for (a, v) in acc.iter_mut().zip(day) {
            *a += v;
        }
    }
    acc
}

/// Splitmix-style stream seeding so every noise source is independent
/// and reproducible.
fn stream_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut z = base;
    for part in [stream, index] {
        z = z
            .wrapping_add(part)
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Clear-sky arc: half sine between sunrise and sunset, exactly zero
/// outside it.
fn solar_arc(hour: usize) -> f64 {
    let h = hour as f64 + 0.5;
    if h <= SUNRISE || h >= SUNSET {
        return 0.0;
    }
    (std::f64::consts::PI * (h - SUNRISE) / (SUNSET - SUNRISE)).sin()
}

/// Lognormal factor with unit mean.
fn lognormal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

/// Fleet-wide daily weather factor: clouds cover every roof in the
/// neighborhood at once, so this component does not average out as the
/// fleet grows. Seeded independently of the units so any fleet size
/// sees the same sky.
fn weather_factors(spec: &SynthSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, 4, 0));
    (0..spec.n_days).map(|_| lognormal(&mut rng, 0.40)).collect()
}

fn pv_series(spec: &SynthSpec, unit: usize, weather: &[f64]) -> HourlySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, 1, unit as u64));
    let peak = spec.pv_peak_kw * PV_FACTORS[unit % PV_FACTORS.len()];
    let mut values = Vec::with_capacity(spec.n_days * HOURS_PER_DAY);
    for day in 0..spec.n_days {
        let season =
            1.0 + 0.25 * (2.0 * std::f64::consts::PI * (day as f64 + 100.0) / 365.0).sin();
        // residual per-roof variation on top of the shared sky; this
        // part averages out across the fleet but dominates any single
        // household's day
        let local = lognormal(&mut rng, 0.28);
        for hour in 0..HOURS_PER_DAY {
            let arc = solar_arc(hour);
            if arc == 0.0 {
                values.push(0.0);
            } else {
                values.push(
                    peak * season * weather[day] * local * arc * lognormal(&mut rng, 0.22),
                );
            }
        }
    }
    HourlySeries::new(spec.start, values, SeriesUnit::Kw).unwrap()
}

fn demand_profile(hour: usize) -> f64 {
    let h = hour as f64;
    0.55 + 0.45 * (-((h - 8.0) / 2.0).powi(2)).exp() + 0.85 * (-((h - 19.0) / 2.2).powi(2)).exp()
}

fn demand_series(spec: &SynthSpec, unit: usize) -> HourlySeries {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, 2, unit as u64));
    let mean = spec.demand_mean_kw * DEMAND_FACTORS[unit % DEMAND_FACTORS.len()];
    let profile_mean =
        (0..HOURS_PER_DAY).map(demand_profile).sum::<f64>() / HOURS_PER_DAY as f64;
    let rho: f64 = 0.8;
    let sd = 0.30 * mean;
    let innovation = sd * (1.0 - rho * rho).sqrt();
    let mut noise = 0.0;
    let mut values = Vec::with_capacity(spec.n_days * HOURS_PER_DAY);
    for _ in 0..spec.n_days {
        for hour in 0..HOURS_PER_DAY {
            noise = rho * noise + innovation * rng.sample::<f64, _>(StandardNormal);
            values.push((mean * demand_profile(hour) / profile_mean + noise).max(0.0));
        }
    }
    HourlySeries::new(spec.start, values, SeriesUnit::Kw).unwrap()
}

/// Smooth diurnal day-ahead shape: overnight valley, afternoon-evening
/// peak, mild weekly and day-to-day drift.
fn da_shape(hour: usize) -> f64 {
    let w = 2.0 * std::f64::consts::PI * (hour as f64 - 14.5) / 24.0;
    1.0 - 0.32 * w.cos() - 0.12 * (2.0 * w + 0.6).cos()
}

fn price_series(spec: &SynthSpec) -> (HourlySeries, HourlySeries) {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(spec.seed, 3, 0));
    let base = 1.0;
    // mean-reverting daily level: copying yesterday's prices overshoots
    // the reversion, while a fitted model can track it
    let rho_day: f64 = 0.55;
    let mut day_drift = 0.0;
    let rho_rt: f64 = 0.7;
    let rt_innovation = 0.18 * base * (1.0 - rho_rt * rho_rt).sqrt();
    let mut rt_noise = 0.0;
    let mut da = Vec::with_capacity(spec.n_days * HOURS_PER_DAY);
    let mut rt = Vec::with_capacity(spec.n_days * HOURS_PER_DAY);
    for day in 0..spec.n_days {
        day_drift = rho_day * day_drift
            + 0.10 * (1.0 - rho_day * rho_day).sqrt() * rng.sample::<f64, _>(StandardNormal);
        let level = base
            * (1.0 + 0.06 * (2.0 * std::f64::consts::PI * day as f64 / 7.0).sin() + day_drift);
        for hour in 0..HOURS_PER_DAY {
            let p_da = level * da_shape(hour);
            rt_noise = rho_rt * rt_noise + rt_innovation * rng.sample::<f64, _>(StandardNormal);
            let mut p_rt = p_da + rt_noise;
            // scarcity spikes cluster in the evening ramp, so their
            // risk is structured rather than uniform across the day;
            // the up/down mix is weighted so the expected excursion is
            // zero (a persistent premium would be free money for a
            // price taker)
            let spike_rate = if (16..=21).contains(&hour) { 0.05 } else { 0.004 };
            if rng.gen::<f64>() < spike_rate {
                let magnitude = base * (0.8 - 1.4 * rng.gen::<f64>().ln()).min(4.0);
                p_rt += if rng.gen::<f64>() < 0.375 {
                    magnitude
                } else {
                    -0.6 * magnitude
                };
            }
            da.push(p_da);
            rt.push(p_rt);
        }
    }
    (
        HourlySeries::new(spec.start, da, SeriesUnit::CurrencyPerKwh).unwrap(),
        HourlySeries::new(spec.start, rt, SeriesUnit::CurrencyPerKwh).unwrap(),
    )
}

/// Generates the complete world for a spec. Deterministic: the same
/// spec always yields the same dataset.
pub fn generate(spec: &SynthSpec) -> Result<SynthDataset> {
    if spec.n_units < 1 || spec.n_days < 40 {
        return Err(Error::InvalidArgument(
            "synthetic generation needs at least 1 unit and 40 days".into(),
        ));
    }
    if !(spec.demand_mean_kw > 0.0) || !(spec.pv_peak_kw > 0.0) {
        return Err(Error::InvalidArgument(
            "synthetic demand mean and PV peak must be positive".into(),
        ));
    }
    let weather = weather_factors(spec);
    let units = (0..spec.n_units)
        .map(|u| SynthUnit {
            id: format!("unit-{:02}", u + 1),
            pv: pv_series(spec, u, &weather),
            demand: demand_series(spec, u),
        })
        .collect();
    let (da, rt) = price_series(spec);
    Ok(SynthDataset {
        units,
        da,
        rt,
        battery: spec.battery.clone(),
    })
}
