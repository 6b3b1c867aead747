//! Taxel positions of one insole in foot-length units.
//!
//! `y` runs from the heel (0) to the toe (1); `x` is lateral for the left
//! foot. The right foot uses the mirrored layout.

use crate::error::{Error, Result};
use crate::types::{FootSide, PRESSURE_CHANNELS};

const DEFAULT_LAYOUT: &str = include_str!("../../data/taxel_layout.csv");

/// Outline half-width at `y`, piecewise linear through heel, arch, ball
/// and toes.
pub fn foot_half_width(y: f64) -> f64 {
    const PTS: [(f64, f64); 6] = [(0.0, 0.10), (0.15, 0.14), (0.45, 0.12), (0.72, 0.19), (0.9, 0.17), (1.0, 0.09)];
    if !(0.0..=1.0).contains(&y) {
        return 0.0;
    }
    for w in PTS.windows(2) {
        let ((a, wa), (b, wb)) = (w[0], w[1]);
        if y <= b {
            return wa + (wb - wa) * (y - a) / (b - a);
        }
    }
    PTS[PTS.len() - 1].1
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaxelLayout {
    /// Left-foot positions `(x, y)` in channel order `p00..p34`.
    pub positions: Vec<[f64; 2]>,
}

impl Default for TaxelLayout {
    fn default() -> Self {
        TaxelLayout::parse(DEFAULT_LAYOUT).expect("bundled layout is valid")
    }
}

impl TaxelLayout {
    /// Parses `index,x,y` rows.
    pub fn parse(text: &str) -> Result<TaxelLayout> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut positions = Vec::with_capacity(PRESSURE_CHANNELS);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Format(format!("taxel layout: {e}")))?;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Format(format!("taxel layout row {}: bad column {k}", i + 1)))
            };
            if num(0)? as usize != i {
                return Err(Error::Format(format!("taxel layout row {} out of order", i + 1)));
            }
            positions.push([num(1)?, num(2)?]);
        }
        let layout = TaxelLayout { positions };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.len() != PRESSURE_CHANNELS {
            return Err(Error::Layout(format!(
                "taxel layout has {} positions, expected {PRESSURE_CHANNELS}",
                self.positions.len()
            )));
        }
        for (i, [x, y]) in self.positions.iter().enumerate() {
            if !(0.0..=1.0).contains(y) || x.abs() > foot_half_width(*y) {
                return Err(Error::Layout(format!("taxel {i} at ({x}, {y}) lies outside the foot outline")));
            }
        }
        if self.min_distance() <= 0.0 {
            return Err(Error::Layout("taxel positions must be distinct".into()));
        }
        Ok(())
    }

    pub fn min_distance(&self) -> f64 {
        let p = &self.positions;
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.min(((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt());
            }
        }
        best
    }

    /// Position of taxel `k` for `side`, with `x` mirrored on the right.
    pub fn position(&self, side: FootSide, k: usize) -> [f64; 2] {
        let [x, y] = self.positions[k];
        match side {
            FootSide::Left => [x, y],
            FootSide::Right => [-x, y],
        }
    }
}
