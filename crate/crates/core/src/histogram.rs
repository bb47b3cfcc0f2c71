//! Per-location directional activity and the flow descriptors derived from it.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{bin_center, Orientation};

/// Descriptor thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptorParams {
    /// Minimum observation window for the rate denominator, seconds.
    pub t_floor: f64,
    /// Resultant length below which no dominant direction is reported.
    pub eps_dir: f64,
}

impl Default for DescriptorParams {
    fn default() -> Self {
        Self {
            t_floor: 1.0,
            eps_dir: 0.05,
        }
    }
}

/// Motion summary of one location.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowDescriptor {
    /// Activity rate, events per second.
    pub magnitude: f64,
    pub dominant_direction: Option<Orientation>,
    pub resultant_length: f64,
    /// Normalized directional entropy in `[0, 1]`.
    pub entropy: f64,
}

/// Per-bin activity accumulator with time bookkeeping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionalHistogram {
    counts: Vec<f64>,
    first_t: Option<f64>,
    last_t: Option<f64>,
    total: f64,
}

impl DirectionalHistogram {
    pub fn new(bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(invalid("bin count must be at least 2"));
        }
        Ok(Self {
            counts: vec![0.0; bins],
            first_t: None,
            last_t: None,
            total: 0.0,
        })
    }

    /// Builds a histogram from explicit per-bin activity observed at instant `t`.
    pub fn from_activity(activity: &[f64], t: f64) -> Result<Self> {
        let mut h = Self::new(activity.len())?;
        for (b, &w) in activity.iter().enumerate() {
            h.accumulate(b, t, w)?;
        }
        Ok(h)
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total <= 0.0
    }

    pub fn time_bounds(&self) -> Option<(f64, f64)> {
        Some((self.first_t?, self.last_t?))
    }

    pub fn accumulate(&mut self, bin: usize, t: f64, weight: f64) -> Result<()> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(invalid("weight must be non-negative and finite"));
        }
        if !t.is_finite() {
            return Err(invalid("timestamp must be finite"));
        }
        let slot = self
            .counts
            .get_mut(bin)
            .ok_or_else(|| invalid("bin index out of range"))?;
        *slot += weight;
        self.total += weight;
        self.first_t = Some(self.first_t.map_or(t, |f| f.min(t)));
        self.last_t = Some(self.last_t.map_or(t, |l| l.max(t)));
        Ok(())
    }

    /// Adds `other` into `self` element-wise; time bounds take the union.
    pub fn merge_from(&mut self, other: &DirectionalHistogram) -> Result<()> {
        if other.bins() != self.bins() {
            return Err(invalid("cannot merge histograms with different bin counts"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        self.first_t = min_opt(self.first_t, other.first_t);
        self.last_t = max_opt(self.last_t, other.last_t);
        Ok(())
    }

    pub fn merge(a: &DirectionalHistogram, b: &DirectionalHistogram) -> Result<Self> {
        let mut out = a.clone();
        out.merge_from(b)?;
        Ok(out)
    }

    pub fn normalize(&self) -> Result<Vec<f64>> {
        if self.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        Ok(self.counts.iter().map(|c| c / self.total).collect())
    }

    pub fn flow_magnitude(&self, t_floor: f64) -> f64 {
        match self.time_bounds() {
            Some((first, last)) if self.total > 0.0 => self.total / (last - first).max(t_floor),
            _ => 0.0,
        }
    }

    /// Count-weighted circular mean of the bin centers and its resultant length.
    pub fn dominant_direction(&self, eps_dir: f64) -> (Option<Orientation>, f64) {
        if self.is_empty() {
            return (None, 0.0);
        }
        let bins = self.bins();
        let (mut sx, mut sy) = (0.0, 0.0);
        for (b, &c) in self.counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let center = bin_center(b, bins).map(Orientation::radians).unwrap_or(0.0);
            sx += c * libm::cos(center);
            sy += c * libm::sin(center);
        }
        let (rx, ry) = (sx / self.total, sy / self.total);
        let length = libm::sqrt(rx * rx + ry * ry).min(1.0);
        if length < eps_dir {
            return (None, length);
        }
        (Orientation::new(libm::atan2(ry, rx)).ok(), length)
    }

    /// Shannon entropy of the normalized bins divided by `ln B`.
    pub fn directional_entropy(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let h: f64 = self
            .counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| {
                let p = c / self.total;
                -p * libm::log(p)
            })
            .fold(0.0, |acc, x| acc + x);
        (h / libm::log(self.bins() as f64)).clamp(0.0, 1.0)
    }

    pub fn descriptor(&self, params: &DescriptorParams) -> FlowDescriptor {
        let (dominant_direction, resultant_length) = self.dominant_direction(params.eps_dir);
        FlowDescriptor {
            magnitude: self.flow_magnitude(params.t_floor),
            dominant_direction,
            resultant_length,
            entropy: self.directional_entropy(),
        }
    }
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn max_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn hist(counts: &[f64]) -> DirectionalHistogram {
        let mut h = DirectionalHistogram::new(counts.len()).unwrap();
        for (b, &c) in counts.iter().enumerate() {
            if c > 0.0 {
                h.accumulate(b, 0.0, c).unwrap();
            }
        }
        h
    }

    #[test]
    fn accumulate_examples() {
        let mut h = DirectionalHistogram::new(8).unwrap();
        h.accumulate(2, 1.0, 1.0).unwrap();
        assert_eq!(h.counts(), &[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.total(), 1.0);

        h.accumulate(3, 4.0, 0.0).unwrap();
        assert_eq!(h.total(), 1.0);
        assert_eq!(h.time_bounds(), Some((1.0, 4.0)));

        let mut h = DirectionalHistogram::new(8).unwrap();
        for t in 0..3 {
            h.accumulate(4, t as f64, 1.0).unwrap();
        }
        assert_eq!(h.counts()[4], 3.0);
        assert_eq!(h.total(), 3.0);

        assert!(h.accumulate(0, 0.0, -1.0).is_err());
        assert!(h.accumulate(8, 0.0, 1.0).is_err());
    }

    #[test]
    fn normalize_examples() {
        let p = hist(&[3.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).normalize().unwrap();
        assert_eq!(&p[..2], &[0.75, 0.25]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let p = hist(&[0.0, 0.0, 5.0, 0.0]).normalize().unwrap();
        assert_eq!(p, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(
            DirectionalHistogram::new(8).unwrap().normalize(),
            Err(Error::EmptyHistogram)
        );
    }

    #[test]
    fn flow_magnitude_examples() {
        let mut h = DirectionalHistogram::new(8).unwrap();
        for t in [0.0, 0.5, 1.5, 2.0] {
            h.accumulate(1, t, 1.0).unwrap();
        }
        assert_eq!(h.flow_magnitude(1.0), 2.0);
        assert_eq!(DirectionalHistogram::new(8).unwrap().flow_magnitude(1.0), 0.0);
        let mut h = DirectionalHistogram::new(8).unwrap();
        h.accumulate(1, 3.0, 5.0).unwrap();
        assert_eq!(h.flow_magnitude(1.0), 5.0);
    }

    #[test]
    fn dominant_direction_examples() {
        let mut counts = [0.0; 8];
        counts[4] = 6.0;
        let (dir, r) = hist(&counts).dominant_direction(0.05);
        assert!((dir.unwrap().radians() - PI / 8.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);

        let mut counts = [0.0; 8];
        counts[0] = 2.0;
        counts[4] = 2.0;
        let (dir, r) = hist(&counts).dominant_direction(0.05);
        assert!(dir.is_none());
        assert!(r < 1e-12);

        assert_eq!(
            DirectionalHistogram::new(8).unwrap().dominant_direction(0.05),
            (None, 0.0)
        );
    }

    #[test]
    fn entropy_examples() {
        assert!((hist(&[1.0; 8]).directional_entropy() - 1.0).abs() < 1e-12);
        let mut one_hot = [0.0; 8];
        one_hot[3] = 4.0;
        assert_eq!(hist(&one_hot).directional_entropy().to_bits(), 0.0f64.to_bits());
        let mut half = [0.0; 8];
        half[0] = 1.0;
        half[1] = 1.0;
        assert!((hist(&half).directional_entropy() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(DirectionalHistogram::new(8).unwrap().directional_entropy(), 0.0);
    }

    #[test]
    fn descriptor_examples() {
        let p = DescriptorParams::default();
        let d = DirectionalHistogram::new(8).unwrap().descriptor(&p);
        assert_eq!((d.magnitude, d.dominant_direction, d.entropy), (0.0, None, 0.0));

        let mut one_hot = [0.0; 8];
        one_hot[4] = 3.0;
        let d = hist(&one_hot).descriptor(&p);
        assert!(d.magnitude > 0.0);
        assert!((d.dominant_direction.unwrap().radians() - PI / 8.0).abs() < 1e-12);
        assert_eq!(d.entropy, 0.0);

        let d = hist(&[2.0; 8]).descriptor(&p);
        assert!(d.magnitude > 0.0);
        assert!(d.dominant_direction.is_none());
        assert!((d.entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_examples() {
        let a = hist(&[1.0, 0.0, 0.0, 0.0]);
        let b = hist(&[0.0, 2.0, 0.0, 0.0]);
        let m = DirectionalHistogram::merge(&a, &b).unwrap();
        assert_eq!(m.counts(), &[1.0, 2.0, 0.0, 0.0]);
        assert_eq!(m.total(), 3.0);
        assert_eq!(m, DirectionalHistogram::merge(&b, &a).unwrap());
        let e = DirectionalHistogram::new(4).unwrap();
        assert_eq!(DirectionalHistogram::merge(&a, &e).unwrap(), a);
        assert!(DirectionalHistogram::merge(&a, &hist(&[1.0; 8])).is_err());
    }

    fn counts_strategy() -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0u32..50, 8)
    }

    proptest! {
        #[test]
        fn conservation_under_accumulate_and_merge(a in counts_strategy(), b in counts_strategy()) {
            let ha = hist(&a.iter().map(|&c| c as f64).collect::<Vec<_>>());
            let hb = hist(&b.iter().map(|&c| c as f64).collect::<Vec<_>>());
            let m = DirectionalHistogram::merge(&ha, &hb).unwrap();
            let expected: u32 = a.iter().chain(&b).sum();
            prop_assert_eq!(m.total(), expected as f64);
            prop_assert_eq!(m.counts().iter().sum::<f64>(), m.total());
        }

        #[test]
        fn entropy_bounded(a in counts_strategy()) {
            let h = hist(&a.iter().map(|&c| c as f64).collect::<Vec<_>>());
            let e = h.directional_entropy();
            prop_assert!((0.0..=1.0).contains(&e));
            let nonzero = a.iter().filter(|&&c| c > 0).count();
            if nonzero <= 1 {
                prop_assert_eq!(e, 0.0);
            } else {
                prop_assert!(e > 0.0);
            }
        }

        #[test]
        fn direction_scale_invariant(a in counts_strategy(), scale in 1u32..20) {
            let base: Vec<f64> = a.iter().map(|&c| c as f64).collect();
            let scaled: Vec<f64> = base.iter().map(|c| c * scale as f64).collect();
            let (d1, r1) = hist(&base).dominant_direction(0.05);
            let (d2, r2) = hist(&scaled).dominant_direction(0.05);
            prop_assert!((r1 - r2).abs() < 1e-9);
            match (d1, d2) {
                (Some(x), Some(y)) => prop_assert!((x.radians() - y.radians()).abs() < 1e-9),
                (None, None) => {}
                _ => prop_assert!((r1 - 0.05).abs() < 1e-9),
            }
        }

        #[test]
        fn descriptor_matches_parts(a in counts_strategy()) {
            let h = hist(&a.iter().map(|&c| c as f64).collect::<Vec<_>>());
            let p = DescriptorParams::default();
            let d = h.descriptor(&p);
            prop_assert_eq!(d.magnitude, h.flow_magnitude(p.t_floor));
            prop_assert_eq!((d.dominant_direction, d.resultant_length), h.dominant_direction(p.eps_dir));
            prop_assert_eq!(d.entropy, h.directional_entropy());
        }
    }
}
