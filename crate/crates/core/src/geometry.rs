//! World-frame primitives, the lattice key function and orientation binning.

use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Largest lattice index magnitude accepted by [`hash_key`].
const MAX_LATTICE_INDEX: f64 = 4.0e18;

/// World-frame position in meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        libm::sqrt(dx * dx + dy * dy + dz * dz)
    }

    /// Heading of the planar displacement from `self` to `other`.
    pub fn heading_to(&self, other: &Position) -> f64 {
        libm::atan2(other.y - self.y, other.x - self.x)
    }
}

/// Heading angle in radians, always canonical in `[-π, π)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Orientation(f64);

impl Orientation {
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(invalid("orientation must be finite"));
        }
        Ok(Self(canonical_angle(theta)))
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

impl TryFrom<f64> for Orientation {
    type Error = crate::Error;

    fn try_from(theta: f64) -> Result<Self> {
        Orientation::new(theta)
    }
}

impl From<Orientation> for f64 {
    fn from(o: Orientation) -> f64 {
        o.0
    }
}

/// Wraps a finite angle into `[-π, π)`. Values already in range are returned untouched.
pub fn canonical_angle(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let mut r = libm::fmod(theta + PI, TWO_PI);
    if r < 0.0 {
        r += TWO_PI;
    }
    let mut out = r - PI;
    if out >= PI {
        out -= TWO_PI;
    }
    if out < -PI {
        out = -PI;
    }
    out
}

/// Integer lattice coordinate of one sparse hash cell. Ordered lexicographically by `(ix, iy, iz)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub ix: i64,
    pub iy: i64,
    pub iz: i64,
}

impl CellKey {
    pub const fn new(ix: i64, iy: i64, iz: i64) -> Self {
        Self { ix, iy, iz }
    }

    /// Center of the cell for lattice resolution `delta`.
    pub fn center(&self, delta: f64) -> Position {
        Position::new(
            (self.ix as f64 + 0.5) * delta,
            (self.iy as f64 + 0.5) * delta,
            (self.iz as f64 + 0.5) * delta,
        )
    }

    pub fn lower_corner(&self, delta: f64) -> Position {
        Position::new(self.ix as f64 * delta, self.iy as f64 * delta, self.iz as f64 * delta)
    }
}

/// Maps a position onto its lattice cell: element-wise floor of `p / delta`,
/// rounding toward negative infinity.
pub fn hash_key(p: &Position, delta: f64) -> Result<CellKey> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(invalid("resolution must be positive and finite"));
    }
    if !p.is_finite() {
        return Err(invalid("position must be finite"));
    }
    let index = |v: f64| -> Result<i64> {
        let f = libm::floor(v / delta);
        if f.abs() > MAX_LATTICE_INDEX {
            return Err(invalid("position exceeds the addressable lattice"));
        }
        Ok(f as i64)
    };
    Ok(CellKey::new(index(p.x)?, index(p.y)?, index(p.z)?))
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(invalid("bin count must be at least 2"));
    }
    Ok(())
}

/// Lower edge of bin `b`: `-π + b·2π/B`. Bin `b` covers `[edge(b), edge(b+1))`.
pub fn bin_edge(b: usize, bins: usize) -> f64 {
    -PI + b as f64 * (TWO_PI / bins as f64)
}

/// Discretizes a heading into one of `bins` uniform sectors, `⌊(θ+π)/(2π/B)⌋ mod B`.
///
/// The floor is corrected against [`bin_edge`] so every edge value lands in the
/// bin it opens, independent of rounding in the division.
pub fn orientation_bin(theta: Orientation, bins: usize) -> Result<usize> {
    check_bins(bins)?;
    let t = theta.radians();
    let width = TWO_PI / bins as f64;
    let raw = libm::floor((t + PI) / width);
    let mut b = if raw < 0.0 { 0 } else { (raw as usize).min(bins - 1) };
    if b > 0 && t < bin_edge(b, bins) {
        b -= 1;
    } else if b + 1 < bins && t >= bin_edge(b + 1, bins) {
        b += 1;
    }
    Ok(b % bins)
}

/// Center heading of bin `b`.
pub fn bin_center(b: usize, bins: usize) -> Result<Orientation> {
    check_bins(bins)?;
    if b >= bins {
        return Err(invalid("bin index out of range"));
    }
    Orientation::new(-PI + (b as f64 + 0.5) * (TWO_PI / bins as f64))
}
