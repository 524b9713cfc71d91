//! Rate-region curves: `(R2, R1)` pairs traced by a coordination method.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One point of a curve. `r1_lower == r1_upper` for simulated curves; the
/// analytic bounds fill both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionPoint {
    pub r2: f64,
    pub r1_lower: f64,
    pub r1_upper: f64,
}

impl RegionPoint {
    pub fn exact(r2: f64, r1: f64) -> Self {
        Self {
            r2,
            r1_lower: r1,
            r1_upper: r1,
        }
    }

    pub fn bounded(r2: f64, r1_lower: f64, r1_upper: f64) -> Self {
        Self {
            r2,
            r1_lower,
            r1_upper,
        }
    }

    pub fn r1(&self) -> f64 {
        self.r1_lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegionCurve {
    pub method: String,
    pub points: Vec<RegionPoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl RateRegionCurve {
    /// Sorts the points by `r2`; rejects negative or non-finite rates.
    pub fn new(method: impl Into<String>, mut points: Vec<RegionPoint>) -> Result<Self> {
        for p in &points {
            for v in [p.r2, p.r1_lower, p.r1_upper] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(format!(
                        "rate-region point has invalid rate {v}"
                    )));
                }
            }
            if p.r1_lower > p.r1_upper {
                return Err(Error::invalid(format!(
                    "rate-region point has lower {} above upper {}",
                    p.r1_lower, p.r1_upper
                )));
            }
        }
        points.sort_by(|a, b| a.r2.total_cmp(&b.r2));
        Ok(Self {
            method: method.into(),
            points,
            params: BTreeMap::new(),
        })
    }

    pub fn with_param(mut self, name: impl Into<String>, value: f64) -> Self {
        self.params.insert(name.into(), value);
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest `r1_lower` among points reaching at least `r2`.
    pub fn best_r1_at(&self, r2: f64) -> Option<f64> {
        self.points
            .iter()
            .filter(|p| p.r2 >= r2)
            .map(|p| p.r1_lower)
            .reduce(f64::max)
    }
}

/// True iff every point of `b` is weakly dominated, within `tol`, by some
/// point of `a`. Uses `r1_upper` of `b` and `r1_lower` of `a`.
pub fn dominates(a: &RateRegionCurve, b: &RateRegionCurve, tol: f64) -> bool {
    b.points.iter().all(|q| {
        a.points
            .iter()
            .any(|p| p.r2 >= q.r2 - tol && p.r1_lower >= q.r1_upper - tol)
    })
}

/// Points of `b` that no point of `a` dominates within `tol`.
pub fn undominated<'a>(
    a: &RateRegionCurve,
    b: &'a RateRegionCurve,
    tol: f64,
) -> Vec<&'a RegionPoint> {
    b.points
        .iter()
        .filter(|q| {
            !a.points
                .iter()
                .any(|p| p.r2 >= q.r2 - tol && p.r1_lower >= q.r1_upper - tol)
        })
        .collect()
}

/// Writes `method,r2,r1` rows (lower value) for each curve.
pub fn write_region_csv<W: std::io::Write>(curves: &[RateRegionCurve], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "r2", "r1"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([c.method.clone(), p.r2.to_string(), p.r1_lower.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
