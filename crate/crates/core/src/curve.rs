//! Piecewise-linear year curves used for costs, policy schedules and
//! decommissioning profiles.

use serde::{Deserialize, Serialize};

/// A map `year -> value` defined by anchor points. Values between anchors are
/// linearly interpolated; outside the anchor range the nearest anchor value is
/// held constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct YearCurve {
    anchors: Vec<(f64, f64)>,
}

impl YearCurve {
    pub fn new(mut anchors: Vec<(f64, f64)>) -> Result<Self, String> {
        if anchors.is_empty() {
            return Err("curve needs at least one anchor".into());
        }
        if anchors.iter().any(|(y, v)| !y.is_finite() || !v.is_finite()) {
            return Err("curve anchors must be finite".into());
        }
        anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
        if anchors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err("duplicate anchor year".into());
        }
        Ok(Self { anchors })
    }

    pub fn constant(value: f64) -> Self {
        Self { anchors: vec![(0.0, value)] }
    }

    pub fn anchors(&self) -> &[(f64, f64)] {
        &self.anchors
    }

    pub fn at(&self, year: f64) -> f64 {
        let a = &self.anchors;
        let first = a[0];
        let last = a[a.len() - 1];
        if year <= first.0 {
            return first.1;
        }
        if year >= last.0 {
            return last.1;
        }
        // first anchor strictly after `year`
        let hi = a.partition_point(|p| p.0 <= year);
        let (y0, v0) = a[hi - 1];
        let (y1, v1) = a[hi];
        if year == y0 {
            return v0;
        }
        v0 + (v1 - v0) * (year - y0) / (y1 - y0)
    }

    pub fn max_value(&self) -> f64 {
        self.anchors.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.anchors.iter().map(|a| a.1).fold(f64::INFINITY, f64::min)
    }
}

impl TryFrom<Vec<(f64, f64)>> for YearCurve {
    type Error = String;
    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, Self::Error> {
        YearCurve::new(v)
    }
}

impl From<YearCurve> for Vec<(f64, f64)> {
    fn from(c: YearCurve) -> Self {
        c.anchors
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolates_and_clamps() {
        let c = YearCurve::new(vec![(2040.0, 323.0), (2020.0, 562.0)]).unwrap();
        assert_eq!(c.at(2030.0), 442.5);
        assert_eq!(c.at(2020.0), 562.0);
        assert_eq!(c.at(2040.0), 323.0);
        assert_eq!(c.at(2050.0), 323.0);
        assert_eq!(c.at(2000.0), 562.0);
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(YearCurve::new(vec![]).is_err());
        assert!(YearCurve::new(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
    }

    proptest! {
        #[test]
        fn monotone_between_monotone_anchors(
            v0 in 0.0f64..1000.0, d1 in 0.0f64..500.0, d2 in 0.0f64..500.0,
            y in 2015.0f64..2045.0, dy in 0.0f64..5.0,
        ) {
            let c = YearCurve::new(vec![(2020.0, v0), (2030.0, v0 + d1), (2040.0, v0 + d1 + d2)]).unwrap();
            prop_assert!(c.at(y + dy) >= c.at(y));
        }
    }
}
