//! Scenario generation from forecast-error models, squared-Euclidean
//! scenario distance, simultaneous backward reduction, and the cross
//! product that combines per-quantity sets into joint scenarios.

use crate::error::{Error, Result};
use crate::errormodel::GaussianErrorModel;

/// The uncertain quantity a scenario set describes. PV and demand
/// scenarios are clamped at zero from below after noise is added;
/// real-time prices may go negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    RtPrice,
    Pv,
    Demand,
}

impl Quantity {
    fn clamp_non_negative(self) -> bool {
        matches!(self, Quantity::Pv | Quantity::Demand)
    }
}

/// One trajectory over the remaining hours, with its probability weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    values: Vec<f64>,
    probability: f64,
}

impl Scenario {
    pub fn new(values: Vec<f64>, probability: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidScenarioSet("scenario has no values".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScenarioSet("non-finite scenario value".into()));
        }
        if !(probability >= 0.0 && probability.is_finite()) {
            return Err(Error::InvalidScenarioSet(format!(
                "scenario probability must be finite and >= 0, got {probability}"
            )));
        }
        Ok(Self { values, probability })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// A weighted set of same-horizon scenarios for one quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    scenarios: Vec<Scenario>,
    quantity: Quantity,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>, quantity: Quantity) -> Result<Self> {
        let Some(first) = scenarios.first() else {
            return Err(Error::InvalidScenarioSet("scenario set is empty".into()));
        };
        let horizon = first.horizon();
        if scenarios.iter().any(|s| s.horizon() != horizon) {
            return Err(Error::InvalidScenarioSet("scenarios have mixed horizons".into()));
        }
        let total: f64 = scenarios.iter().map(|s| s.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidScenarioSet(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { scenarios, quantity })
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn quantity(&self) -> Quantity {
        self.quantity
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction enforces at least one scenario
    }

    pub fn horizon(&self) -> usize {
        self.scenarios[0].horizon()
    }
}

/// Day-ahead scenarios: `n` equally weighted draws of
/// `point_forecast + error sample`.
pub fn generate_da(
    point_forecast: &[f64],
    err: &GaussianErrorModel,
    n: usize,
    seed: u64,
    quantity: Quantity,
) -> Result<ScenarioSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("scenario count must be >= 1".into()));
    }
    if err.dim() != point_forecast.len() {
        return Err(Error::DimensionMismatch(format!(
            "error model dimension {} does not match forecast length {}",
            err.dim(),
            point_forecast.len()
        )));
    }
    let draws = err.sample(n, seed)?;
    let p = 1.0 / n as f64;
    let mut scenarios = Vec::with_capacity(n);
    for r in 0..n {
        let mut values: Vec<f64> = point_forecast
            .iter()
            .enumerate()
            .map(|(h, f)| f + draws[(r, h)])
            .collect();
        if quantity.clamp_non_negative() {
            for v in &mut values {
                *v = v.max(0.0);
            }
        }
        scenarios.push(Scenario::new(values, p)?);
    }
    ScenarioSet::new(scenarios, quantity)
}

/// Real-time scenarios for the hours after the first `realized.len()`:
/// the full-day error model is conditioned on the realized errors
/// (`realized - point_forecast` on the elapsed hours), sampled, and the
/// forecast tail added back. No model refit happens here.
pub fn generate_rt(
    point_forecast: &[f64],
    err: &GaussianErrorModel,
    realized: &[f64],
    n: usize,
    seed: u64,
    quantity: Quantity,
) -> Result<ScenarioSet> {
    let dim = point_forecast.len();
    if err.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "error model dimension {} does not match forecast length {dim}",
            err.dim()
        )));
    }
    let expected: Vec<u8> = (0..dim as u8).collect();
    if err.hour_labels() != expected {
        return Err(Error::DimensionMismatch(
            "error model must cover the full day (hour labels 0..len)".into(),
        ));
    }
    let t = realized.len();
    if t >= dim {
        return Err(Error::EmptyHorizon);
    }
    if t == 0 {
        return Err(Error::InvalidArgument(
            "no realized hours; use day-ahead generation instead".into(),
        ));
    }

    let observed_hours: Vec<u8> = (0..t as u8).collect();
    let observed_errors: Vec<f64> =
        realized.iter().zip(point_forecast).map(|(r, f)| r - f).collect();
    let conditioned = err.condition(&observed_hours, &observed_errors)?;

    let draws = conditioned.sample(n, seed)?;
    let tail = &point_forecast[t..];
    let p = 1.0 / n as f64;
    let mut scenarios = Vec::with_capacity(n);
    for r in 0..n {
        let mut values: Vec<f64> =
            tail.iter().enumerate().map(|(h, f)| f + draws[(r, h)]).collect();
        if quantity.clamp_non_negative() {
            for v in &mut values {
                *v = v.max(0.0);
            }
        }
        scenarios.push(Scenario::new(values, p)?);
    }
    ScenarioSet::new(scenarios, quantity)
}

/// Squared Euclidean distance between two same-horizon scenarios.
pub fn distance(a: &Scenario, b: &Scenario) -> Result<f64> {
    if a.horizon() != b.horizon() {
        return Err(Error::LengthMismatch {
            context: "scenario horizons",
            expected: a.horizon(),
            actual: b.horizon(),
        });
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Simultaneous backward reduction to `k_preserve` scenarios.
///
/// Each round scores every surviving candidate `j` by the transport
/// proxy `z_j = sum over i in deleted + {j} of p_i * (distance from i to
/// its nearest survivor other than j)` and deletes the argmin (lowest
/// index on ties). Afterwards each deleted scenario's probability moves
/// to its nearest preserved scenario. Survivors are returned unchanged,
/// in input order.
pub fn reduce(set: &ScenarioSet, k_preserve: usize) -> Result<ScenarioSet> {
    let k_total = set.len();
    if k_preserve < 1 || k_preserve > k_total {
        return Err(Error::KPreserveOutOfRange { k_preserve, set_size: k_total });
    }
    let scenarios = set.scenarios();

    let mut dist = vec![vec![0.0; k_total]; k_total];
    for i in 0..k_total {
        for j in (i + 1)..k_total {
            let d = distance(&scenarios[i], &scenarios[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    let mut deleted = vec![false; k_total];
    for _ in 0..(k_total - k_preserve) {
        // For every scenario, its two nearest survivors; dropping
        // candidate j then costs min2 instead of min1 exactly when j is
        // the nearest.
        let survivors: Vec<usize> = (0..k_total).filter(|&i| !deleted[i]).collect();
        let mut nearest = vec![(f64::INFINITY, usize::MAX, f64::INFINITY); k_total];
        for i in 0..k_total {
            let (mut m1, mut a1, mut m2) = (f64::INFINITY, usize::MAX, f64::INFINITY);
            for &u in &survivors {
                if u == i && !deleted[i] {
                    continue; // a survivor is not its own transport target
                }
                let d = dist[i][u];
                if d < m1 {
                    m2 = m1;
                    m1 = d;
                    a1 = u;
                } else if d < m2 {
                    m2 = d;
                }
            }
            nearest[i] = (m1, a1, m2);
        }

        let deleted_cost: f64 =
            (0..k_total).filter(|&i| deleted[i]).map(|i| scenarios[i].probability * nearest[i].0).sum();

        let (mut best_j, mut best_z) = (usize::MAX, f64::INFINITY);
        for &j in &survivors {
            let mut z = scenarios[j].probability * nearest[j].0;
            z += deleted_cost;
            // correct the terms whose nearest survivor was j itself
            for i in (0..k_total).filter(|&i| deleted[i]) {
                if nearest[i].1 == j {
                    z += scenarios[i].probability * (nearest[i].2 - nearest[i].0);
                }
            }
            if z < best_z {
                best_z = z;
                best_j = j;
            }
        }
        deleted[best_j] = true;
    }

    let survivors: Vec<usize> = (0..k_total).filter(|&i| !deleted[i]).collect();
    let mut probs: Vec<f64> = survivors.iter().map(|&u| scenarios[u].probability).collect();
    for i in (0..k_total).filter(|&i| deleted[i]) {
        let mut best = 0;
        for (si, &u) in survivors.iter().enumerate() {
            if dist[i][u] < dist[i][survivors[best]] {
                best = si;
            }
        }
        probs[best] += scenarios[i].probability;
    }

    let reduced: Vec<Scenario> = survivors
        .iter()
        .zip(&probs)
        .map(|(&u, &p)| Scenario { values: scenarios[u].values.clone(), probability: p })
        .collect();
    ScenarioSet::new(reduced, set.quantity())
}

/// One joint outcome: a trajectory per input set, in the order the sets
/// were given to [`cross_product`].
#[derive(Debug, Clone, PartialEq)]
pub struct JointScenario {
    components: Vec<Vec<f64>>,
    probability: f64,
}

impl JointScenario {
    pub fn component(&self, set_index: usize) -> &[f64] {
        &self.components[set_index]
    }

    pub fn probability(&self) -> f64 {
        self.probability
    }
}

/// The Cartesian product of per-quantity sets under independence.
#[derive(Debug, Clone, PartialEq)]
pub struct JointScenarioSet {
    scenarios: Vec<JointScenario>,
    quantities: Vec<Quantity>,
    horizon: usize,
}

impl JointScenarioSet {
    pub fn scenarios(&self) -> &[JointScenario] {
        &self.scenarios
    }

    pub fn quantities(&self) -> &[Quantity] {
        &self.quantities
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    /// Position of quantity `q` among the components.
    pub fn index_of(&self, q: Quantity) -> Option<usize> {
        self.quantities.iter().position(|&x| x == q)
    }
}

/// Combines sets into their Cartesian product with product
/// probabilities. The last set varies fastest in the output order.
pub fn cross_product(sets: &[ScenarioSet]) -> Result<JointScenarioSet> {
    let Some(first) = sets.first() else {
        return Err(Error::InvalidScenarioSet("no scenario sets to combine".into()));
    };
    let horizon = first.horizon();
    if sets.iter().any(|s| s.horizon() != horizon) {
        return Err(Error::LengthMismatch {
            context: "joint scenario horizons",
            expected: horizon,
            actual: sets.iter().find(|s| s.horizon() != horizon).unwrap().horizon(),
        });
    }

    let total: usize = sets.iter().map(ScenarioSet::len).product();
    let mut scenarios = Vec::with_capacity(total);
    let mut indices = vec![0usize; sets.len()];
    loop {
        let mut components = Vec::with_capacity(sets.len());
        let mut probability = 1.0;
        for (set, &i) in sets.iter().zip(&indices) {
            let s = &set.scenarios()[i];
            components.push(s.values().to_vec());
            probability *= s.probability();
        }
        scenarios.push(JointScenario { components, probability });

        // odometer increment, last set fastest
        let mut pos = sets.len();
        loop {
            if pos == 0 {
                return Ok(JointScenarioSet {
                    scenarios,
                    quantities: sets.iter().map(ScenarioSet::quantity).collect(),
                    horizon,
                });
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < sets[pos].len() {
                break;
            }
            indices[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform_set(values: Vec<Vec<f64>>, quantity: Quantity) -> ScenarioSet {
        let p = 1.0 / values.len() as f64;
        let scenarios = values.into_iter().map(|v| Scenario::new(v, p).unwrap()).collect();
        ScenarioSet::new(scenarios, quantity).unwrap()
    }

    fn full_day_model(mu: f64, var: f64) -> GaussianErrorModel {
        GaussianErrorModel::new(
            DVector::from_element(24, mu),
            DMatrix::identity(24, 24) * var,
            (0..24).collect(),
        )
        .unwrap()
    }

    #[test]
    fn set_validation() {
        assert!(ScenarioSet::new(vec![], Quantity::Pv).is_err());
        let a = Scenario::new(vec![1.0], 0.5).unwrap();
        let b = Scenario::new(vec![1.0, 2.0], 0.5).unwrap();
        assert!(ScenarioSet::new(vec![a.clone(), b], Quantity::Pv).is_err()); // mixed horizon
        assert!(ScenarioSet::new(vec![a.clone()], Quantity::Pv).is_err()); // probs sum to 0.5
        assert!(Scenario::new(vec![f64::NAN], 1.0).is_err());
        assert!(Scenario::new(vec![1.0], -0.1).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = Scenario::new(vec![1.0, 2.0], 0.5).unwrap();
        let b = Scenario::new(vec![1.0, 3.0], 0.5).unwrap();
        assert_eq!(distance(&a, &a).unwrap(), 0.0);
        assert_eq!(distance(&a, &b).unwrap(), 1.0);
        let c = Scenario::new(vec![1.0], 1.0).unwrap();
        assert!(distance(&a, &c).is_err());
    }

    #[test]
    fn generate_da_degenerate_copies_forecast() {
        let err = full_day_model(0.0, 0.0);
        let forecast: Vec<f64> = (0..24).map(|h| h as f64).collect();
        let set = generate_da(&forecast, &err, 7, 1, Quantity::Demand).unwrap();
        assert_eq!(set.len(), 7);
        for s in set.scenarios() {
            assert_eq!(s.values(), &forecast[..]);
            assert!((s.probability() - 1.0 / 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn generate_da_keeps_night_pv_at_zero() {
        // zero variance and zero forecast at night hours 0-5 and 19-23
        let mut sigma = DMatrix::zeros(24, 24);
        let mut forecast = vec![0.0; 24];
        for h in 6..19 {
            sigma[(h, h)] = 0.5;
            forecast[h] = 3.0;
        }
        let err =
            GaussianErrorModel::new(DVector::zeros(24), sigma, (0..24).collect()).unwrap();
        let set = generate_da(&forecast, &err, 40, 5, Quantity::Pv).unwrap();
        for s in set.scenarios() {
            for h in (0..6).chain(19..24) {
                assert_eq!(s.values()[h], 0.0);
            }
            assert!(s.values().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn generate_da_fifty_scenarios_weigh_two_percent() {
        let err = full_day_model(0.0, 1.0);
        let set = generate_da(&[1.0; 24], &err, 50, 9, Quantity::RtPrice).unwrap();
        assert_eq!(set.len(), 50);
        for s in set.scenarios() {
            assert!((s.probability() - 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn generate_da_prices_may_go_negative() {
        let err = full_day_model(0.0, 4.0);
        let set = generate_da(&[0.0; 24], &err, 50, 3, Quantity::RtPrice).unwrap();
        assert!(set.scenarios().iter().any(|s| s.values().iter().any(|&v| v < 0.0)));
        let clamped = generate_da(&[0.0; 24], &err, 50, 3, Quantity::Demand).unwrap();
        assert!(clamped.scenarios().iter().all(|s| s.values().iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn generate_rt_zero_errors_equal_marginal_tail() {
        // hours independent, realized = forecast: conditioning changes
        // nothing, so sampling the marginal tail with the same seed must
        // agree bitwise
        let err = full_day_model(0.25, 0.8);
        let forecast: Vec<f64> = (0..24).map(|h| 10.0 + h as f64).collect();
        let t = 6;
        let set =
            generate_rt(&forecast, &err, &forecast[..t], 20, 11, Quantity::RtPrice).unwrap();
        assert_eq!(set.horizon(), 24 - t);

        let tail_model = GaussianErrorModel::new(
            DVector::from_element(24 - t, 0.25),
            DMatrix::identity(24 - t, 24 - t) * 0.8,
            (t as u8..24).collect(),
        )
        .unwrap();
        let draws = tail_model.sample(20, 11).unwrap();
        for (r, s) in set.scenarios().iter().enumerate() {
            for h in 0..(24 - t) {
                assert_eq!(s.values()[h], forecast[t + h] + draws[(r, h)]);
            }
        }
    }

    #[test]
    fn generate_rt_positive_correlation_lifts_next_hour() {
        // AR(1)-style correlation 0.9 between consecutive hours
        let sigma = DMatrix::from_fn(24, 24, |i, j| 0.9f64.powi((i as i32 - j as i32).abs()));
        let err =
            GaussianErrorModel::new(DVector::zeros(24), sigma, (0..24).collect()).unwrap();
        let forecast = vec![5.0; 24];
        let t = 8;
        let mut realized: Vec<f64> = forecast[..t].to_vec();
        realized[t - 1] += 2.0; // +2 sigma surprise in the last elapsed hour
        let set = generate_rt(&forecast, &err, &realized, 400, 13, Quantity::RtPrice).unwrap();
        let mean_next: f64 =
            set.scenarios().iter().map(|s| s.values()[0]).sum::<f64>() / set.len() as f64;
        assert!(
            mean_next > forecast[t] + 1.0,
            "conditioned mean {mean_next} should sit well above the forecast 5"
        );
    }

    #[test]
    fn generate_rt_boundary_hours() {
        let err = full_day_model(0.0, 1.0);
        let forecast = vec![1.0; 24];
        let set =
            generate_rt(&forecast, &err, &forecast[..23], 5, 2, Quantity::Demand).unwrap();
        assert_eq!(set.horizon(), 1);
        assert!(matches!(
            generate_rt(&forecast, &err, &forecast[..24], 5, 2, Quantity::Demand),
            Err(Error::EmptyHorizon)
        ));
        assert!(generate_rt(&forecast, &err, &[], 5, 2, Quantity::Demand).is_err());
    }

    #[test]
    fn reduce_noop_when_everything_preserved() {
        let set = uniform_set(vec![vec![1.0, 2.0], vec![3.0, 4.0]], Quantity::Pv);
        let out = reduce(&set, 2).unwrap();
        assert_eq!(out, set);
        assert!(matches!(reduce(&set, 0), Err(Error::KPreserveOutOfRange { .. })));
        assert!(matches!(reduce(&set, 3), Err(Error::KPreserveOutOfRange { .. })));
    }

    #[test]
    fn reduce_merges_duplicate_scenarios() {
        let set = uniform_set(
            vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![9.0, 9.0]],
            Quantity::Demand,
        );
        let out = reduce(&set, 2).unwrap();
        // the first duplicate is deleted (lowest-index tie-break), its
        // probability lands on the second
        assert_eq!(out.scenarios()[0].values(), &[1.0, 1.0]);
        assert!((out.scenarios()[0].probability() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.scenarios()[1].values(), &[9.0, 9.0]);
        assert!((out.scenarios()[1].probability() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reduce_fifty_to_five_structure() {
        let err = full_day_model(0.0, 1.0);
        let set = generate_da(&[0.0; 24], &err, 50, 21, Quantity::RtPrice).unwrap();
        let out = reduce(&set, 5).unwrap();
        assert_eq!(out.len(), 5);
        let total: f64 = out.scenarios().iter().map(Scenario::probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for s in out.scenarios() {
            assert!(s.probability() >= 1.0 / 50.0 - 1e-12);
            // preserved scenarios are members of the input, bit for bit
            assert!(set.scenarios().iter().any(|orig| orig.values() == s.values()));
        }
    }

    /// Brute-force oracle: enumerate every preserved subset of size k and
    /// take the best transport cost; the greedy result may lose to it,
    /// but only by a bounded factor.
    #[test]
    fn reduce_within_factor_of_exhaustive_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for trial in 0..30 {
            let n = 6 + (trial % 3);
            let k = 1 + (trial % 3);
            let values: Vec<Vec<f64>> =
                (0..n).map(|_| (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
            let set = uniform_set(values.clone(), Quantity::RtPrice);
            let p = 1.0 / n as f64;

            let dist = |i: usize, j: usize| -> f64 {
                values[i].iter().zip(&values[j]).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            let cost_of = |preserved: &[usize]| -> f64 {
                (0..n)
                    .filter(|i| !preserved.contains(i))
                    .map(|i| {
                        p * preserved
                            .iter()
                            .map(|&u| dist(i, u))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum()
            };

            // enumerate all k-subsets
            let mut best = f64::INFINITY;
            let mut subset: Vec<usize> = (0..k).collect();
            'combos: loop {
                best = best.min(cost_of(&subset));
                // advance the rightmost index that can still move
                let mut i = k;
                loop {
                    if i == 0 {
                        break 'combos;
                    }
                    i -= 1;
                    if subset[i] < n - k + i {
                        subset[i] += 1;
                        for j in (i + 1)..k {
                            subset[j] = subset[j - 1] + 1;
                        }
                        continue 'combos;
                    }
                }
            }

            let out = reduce(&set, k).unwrap();
            let preserved: Vec<usize> = out
                .scenarios()
                .iter()
                .map(|s| values.iter().position(|v| v.as_slice() == s.values()).unwrap())
                .collect();
            let greedy_cost = cost_of(&preserved);
            assert!(
                greedy_cost <= 1.5 * best + 1e-12,
                "trial {trial}: greedy {greedy_cost} vs optimal {best}"
            );
        }
    }

    #[test]
    fn cross_product_counts_and_probabilities() {
        let err = full_day_model(0.0, 1.0);
        let mut sets = Vec::new();
        for (i, q) in [Quantity::RtPrice, Quantity::Pv, Quantity::Demand].into_iter().enumerate() {
            let raw = generate_da(&[1.0; 24], &err, 5, i as u64, q).unwrap();
            sets.push(raw);
        }
        let joint = cross_product(&sets).unwrap();
        assert_eq!(joint.len(), 125);
        assert_eq!(joint.quantities(), &[Quantity::RtPrice, Quantity::Pv, Quantity::Demand]);
        assert_eq!(joint.index_of(Quantity::Demand), Some(2));
        let total: f64 = joint.scenarios().iter().map(JointScenario::probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        // last set varies fastest
        assert_eq!(joint.scenarios()[0].component(2), sets[2].scenarios()[0].values());
        assert_eq!(joint.scenarios()[1].component(2), sets[2].scenarios()[1].values());
        assert_eq!(joint.scenarios()[1].component(0), sets[0].scenarios()[0].values());
    }

    #[test]
    fn cross_product_with_singleton_keeps_probabilities() {
        let a = uniform_set(vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]], Quantity::Pv);
        let single = uniform_set(vec![vec![9.0]], Quantity::Demand);
        let joint = cross_product(&[a.clone(), single]).unwrap();
        assert_eq!(joint.len(), 4);
        for (j, s) in joint.scenarios().iter().enumerate() {
            assert_eq!(s.probability(), a.scenarios()[j].probability());
        }
        let b = uniform_set(vec![vec![1.0, 1.0]], Quantity::Demand);
        assert!(cross_product(&[a, b]).is_err()); // horizon mismatch
    }

    proptest! {
        #[test]
        fn distance_is_symmetric_and_nonnegative(
            a in proptest::collection::vec(-10.0f64..10.0, 5),
            b in proptest::collection::vec(-10.0f64..10.0, 5),
        ) {
            let sa = Scenario::new(a, 1.0).unwrap();
            let sb = Scenario::new(b, 1.0).unwrap();
            let dab = distance(&sa, &sb).unwrap();
            let dba = distance(&sb, &sa).unwrap();
            prop_assert!(dab >= 0.0);
            prop_assert!((dab - dba).abs() < 1e-12);
        }

        #[test]
        fn reduce_preserves_total_probability(
            seed in 0u64..1000,
            k in 1usize..8,
        ) {
            let err = full_day_model(0.0, 1.0);
            let set = generate_da(&[0.0; 24], &err, 8, seed, Quantity::Pv).unwrap();
            let out = reduce(&set, k).unwrap();
            let total: f64 = out.scenarios().iter().map(Scenario::probability).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert_eq!(out.len(), k);
        }
    }
}
