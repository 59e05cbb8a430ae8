//! Proxy fitness: metric orientation and min-max normalization into `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Maximize,
    Minimize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
    /// Raw-units score at or beyond which a run counts as a success.
    #[serde(default)]
    pub success_threshold: Option<f64>,
}

impl MetricSpec {
    pub fn maximize(name: impl Into<String>) -> Self {
        MetricSpec {
            name: name.into(),
            direction: Direction::Maximize,
            success_threshold: None,
        }
    }

    pub fn minimize(name: impl Into<String>) -> Self {
        MetricSpec {
            direction: Direction::Minimize,
            ..MetricSpec::maximize(name)
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.success_threshold = Some(threshold);
        self
    }

    /// Whether raw score `a` is strictly better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        match self.direction {
            Direction::Maximize => a > b,
            Direction::Minimize => a < b,
        }
    }

    /// Inclusive threshold test in raw units.
    pub fn meets_threshold(&self, raw: f64) -> bool {
        match self.success_threshold {
            Some(t) => match self.direction {
                Direction::Maximize => raw >= t,
                Direction::Minimize => raw <= t,
            },
            None => false,
        }
    }
}

/// Maps a raw metric so that larger is always better.
pub fn orient(raw: f64, spec: &MetricSpec) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::NonFinite(raw));
    }
    Ok(match spec.direction {
        Direction::Maximize => raw,
        Direction::Minimize => -raw,
    })
}

/// Running bounds of oriented scores seen during a search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationState {
    pub observed_min: f64,
    pub observed_max: f64,
    pub count: u64,
}

impl NormalizationState {
    pub fn new() -> Self {
        NormalizationState::default()
    }

    /// Normalized fitness of an oriented score under the current bounds.
    pub fn normalize(&self, oriented: f64) -> Result<f64> {
        normalize(oriented, self)
    }
}

/// Folds one oriented score into the bounds.
pub fn update_bounds(state: NormalizationState, oriented: f64) -> Result<NormalizationState> {
    if !oriented.is_finite() {
        return Err(Error::NonFinite(oriented));
    }
    if state.count == 0 {
        return Ok(NormalizationState {
            observed_min: oriented,
            observed_max: oriented,
            count: 1,
        });
    }
    Ok(NormalizationState {
        observed_min: state.observed_min.min(oriented),
        observed_max: state.observed_max.max(oriented),
        count: state.count + 1,
    })
}

/// Min-max normalization, `0.5` when all observations coincide.
pub fn normalize(oriented: f64, state: &NormalizationState) -> Result<f64> {
    if state.count == 0 {
        return Err(Error::EmptyNormalization);
    }
    if !oriented.is_finite() {
        return Err(Error::NonFinite(oriented));
    }
    let span = state.observed_max - state.observed_min;
    if span <= 0.0 {
        return Ok(0.5);
    }
    Ok(((oriented - state.observed_min) / span).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn fold(values: &[f64]) -> NormalizationState {
        values.iter().fold(NormalizationState::new(), |s, &v| {
            update_bounds(s, v).unwrap()
        })
    }

    #[test]
    fn orient_cases() {
        let max = MetricSpec::maximize("acc");
        let min = MetricSpec::minimize("rmse");
        assert_eq!(orient(0.8, &max).unwrap(), 0.8);
        assert_eq!(orient(0.8, &min).unwrap(), -0.8);
        assert_eq!(orient(orient(0.8, &min).unwrap(), &min).unwrap(), 0.8);
        assert!(orient(f64::NAN, &max).is_err());
        assert!(orient(f64::INFINITY, &min).is_err());
    }

    #[test]
    fn normalize_cases() {
        let s = fold(&[2.0, 4.0, 6.0]);
        assert_eq!(normalize(4.0, &s).unwrap(), 0.5);
        assert_eq!(normalize(2.0, &s).unwrap(), 0.0);
        assert_eq!(normalize(6.0, &s).unwrap(), 1.0);
        assert_eq!(normalize(0.3, &fold(&[0.3])).unwrap(), 0.5);
        assert!(matches!(
            normalize(1.0, &NormalizationState::new()),
            Err(Error::EmptyNormalization)
        ));
    }

    #[test]
    fn bounds_cases() {
        let s = update_bounds(NormalizationState::new(), 3.0).unwrap();
        assert_eq!((s.observed_min, s.observed_max, s.count), (3.0, 3.0, 1));
        let s = fold(&[1.0, 5.0]);
        let s = update_bounds(s, 0.5).unwrap();
        assert_eq!((s.observed_min, s.observed_max), (0.5, 5.0));
    }

    #[test]
    fn bounds_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..100).map(|_| rng.random_range(-50.0..50.0)).collect();
        let s = fold(&values);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &values {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        assert_eq!((s.observed_min, s.observed_max, s.count), (lo, hi, 100));
    }

    #[test]
    fn threshold_is_inclusive_and_oriented() {
        let max = MetricSpec::maximize("acc").with_threshold(0.75);
        assert!(max.meets_threshold(0.75));
        assert!(!max.meets_threshold(0.7499));
        let min = MetricSpec::minimize("rmse").with_threshold(1.0);
        assert!(min.meets_threshold(0.9));
        assert!(!min.meets_threshold(1.1));
    }

    proptest! {
        #[test]
        fn normalize_is_monotone_and_bounded(
            values in prop::collection::vec(-1e6f64..1e6, 1..40),
            a in -2e6f64..2e6,
            b in -2e6f64..2e6,
        ) {
            let s = fold(&values);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let fl = normalize(lo, &s).unwrap();
            let fh = normalize(hi, &s).unwrap();
            prop_assert!(fl <= fh);
            prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
        }

        #[test]
        fn renormalization_preserves_argmax(values in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            let s = fold(&values);
            let by_raw = values
                .iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > values[best] { i } else { best });
            let fits: Vec<f64> = values.iter().map(|&v| normalize(v, &s).unwrap()).collect();
            let by_fit = fits
                .iter()
                .enumerate()
                .fold(0, |best, (i, &f)| if f > fits[best] { i } else { best });
            prop_assert_eq!(values[by_raw], values[by_fit]);
        }
    }
}
