use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Sensor positions; `place_sensors` puts them on the inscribed circle.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorArray {
    positions: Vec<Point>,
}

/// `n` sensors at angles `2πi/n` on the circle of radius 0.5 centred in the
/// unit square.
pub fn place_sensors(n: usize) -> Result<SensorArray> {
    if n < 2 {
        return Err(Error::invalid(format!("need at least 2 sensors, got {n}")));
    }
    let positions = (0..n)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / n as f64;
            [0.5 + 0.5 * theta.cos(), 0.5 + 0.5 * theta.sin()]
        })
        .collect();
    Ok(SensorArray { positions })
}

impl SensorArray {
    /// Arbitrary sensor layout inside the unit square.
    pub fn from_positions(positions: Vec<Point>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::invalid("need at least 2 sensors"));
        }
        for (i, p) in positions.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite() && (0.0..=1.0).contains(c)) {
                return Err(Error::invalid(format!("sensor {i} at {p:?} is outside the unit square")));
            }
        }
        Ok(SensorArray { positions })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Number of unordered pairs, `n(n-1)/2`.
    pub fn pair_count(&self) -> usize {
        self.len() * (self.len() - 1) / 2
    }

    /// Unordered pairs in lexicographic order: (0,1), (0,2), …, (n-2,n-1).
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
    }
}
