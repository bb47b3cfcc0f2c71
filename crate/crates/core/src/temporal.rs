//! Frequency-domain model of periodic activity.
//!
//! Every `(location, bin)` pair is a channel receiving one normalized activity
//! value per update window. For a fixed set of candidate periods each channel
//! keeps the running sums `Σ v·e^{-iωt}` and `Σ e^{-iωt}`, from which the
//! mean-centered coefficient `γ_k = (Σ v·e^{-iωt} − γ₀·Σ e^{-iωt}) / n` follows.
//! The `K` strongest coefficients reconstruct the signal as
//! `γ₀ + Σ 2|γ_k| cos(ω_k t + arg γ_k)`, clamped to `[0, 1]`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::CellKey;

/// Amplitudes at or below this are never selected.
const MIN_AMPLITUDE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCandidate {
    /// Period in seconds.
    pub period: f64,
}

impl FrequencyCandidate {
    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }
}

/// Geometric ladder `t_max / 2^j` for `j = 0..count`.
pub fn geometric_candidates(t_max: f64, count: usize) -> Result<Vec<FrequencyCandidate>> {
    if !(t_max > 0.0) || !t_max.is_finite() || count == 0 {
        return Err(invalid("candidate ladder needs a positive span and count"));
    }
    Ok((0..count)
        .map(|j| FrequencyCandidate {
            period: t_max / libm::pow(2.0, j as f64),
        })
        .collect())
}

/// Channel identity: a lattice location and an orientation bin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ChannelKey {
    pub cell: CellKey,
    pub bin: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub re: f64,
    pub im: f64,
}

impl Phasor {
    fn unit(angle: f64) -> Self {
        Self {
            re: libm::cos(angle),
            im: libm::sin(angle),
        }
    }

    pub fn norm(&self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn arg(&self) -> f64 {
        libm::atan2(self.im, self.re)
    }
}

/// One selected periodic component of a channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralComponent {
    pub candidate: usize,
    pub omega: f64,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralChannel {
    n: u64,
    value_sum: f64,
    /// `Σ v·e^{-iωt}` per candidate.
    weighted: Vec<Phasor>,
    /// `Σ e^{-iωt}` per candidate.
    basis: Vec<Phasor>,
    selected: Vec<SpectralComponent>,
}

impl SpectralChannel {
    fn new(candidates: usize) -> Self {
        Self {
            n: 0,
            value_sum: 0.0,
            weighted: vec![Phasor::default(); candidates],
            basis: vec![Phasor::default(); candidates],
            selected: Vec::new(),
        }
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.value_sum / self.n as f64
        }
    }

    pub fn selected(&self) -> &[SpectralComponent] {
        &self.selected
    }

    /// Mean-centered coefficient of candidate `k`.
    pub fn coefficient(&self, k: usize) -> Phasor {
        if self.n == 0 {
            return Phasor::default();
        }
        let n = self.n as f64;
        let mean = self.mean();
        Phasor {
            re: (self.weighted[k].re - mean * self.basis[k].re) / n,
            im: (self.weighted[k].im - mean * self.basis[k].im) / n,
        }
    }

    fn ingest(&mut self, candidates: &[FrequencyCandidate], t: f64, value: f64) {
        self.n += 1;
        self.value_sum += value;
        for (k, c) in candidates.iter().enumerate() {
            let e = Phasor::unit(-c.omega() * t);
            self.weighted[k].re += value * e.re;
            self.weighted[k].im += value * e.im;
            self.basis[k].re += e.re;
            self.basis[k].im += e.im;
        }
    }

    fn absorb(&mut self, other: &SpectralChannel) {
        self.n += other.n;
        self.value_sum += other.value_sum;
        for (a, b) in self.weighted.iter_mut().zip(&other.weighted) {
            a.re += b.re;
            a.im += b.im;
        }
        for (a, b) in self.basis.iter_mut().zip(&other.basis) {
            a.re += b.re;
            a.im += b.im;
        }
    }

    fn select(&mut self, candidates: &[FrequencyCandidate], order: usize) {
        let mut ranked: Vec<SpectralComponent> = (0..candidates.len())
            .map(|k| {
                let g = self.coefficient(k);
                SpectralComponent {
                    candidate: k,
                    omega: candidates[k].omega(),
                    amplitude: g.norm(),
                    phase: g.arg(),
                }
            })
            .filter(|c| c.amplitude > MIN_AMPLITUDE)
            .collect();
        ranked.sort_by(|a, b| b.amplitude.total_cmp(&a.amplitude).then(a.candidate.cmp(&b.candidate)));
        ranked.truncate(order);
        self.selected = ranked;
    }

    fn predict(&self, t: f64) -> f64 {
        let v = self.selected.iter().fold(self.mean(), |acc, c| {
            acc + 2.0 * c.amplitude * libm::cos(c.omega * t + c.phase)
        });
        v.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    pub candidates: Vec<FrequencyCandidate>,
    /// Number of components kept per channel.
    pub order: usize,
    /// Normalization and ingest interval, seconds.
    pub update_interval: f64,
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(invalid("at least one candidate period is required"));
        }
        let mut periods: Vec<f64> = Vec::with_capacity(self.candidates.len());
        for c in &self.candidates {
            if !(c.period > 0.0) || !c.period.is_finite() {
                return Err(invalid("candidate periods must be positive"));
            }
            if periods.contains(&c.period) {
                return Err(invalid("candidate periods must be distinct"));
            }
            periods.push(c.period);
        }
        if !(self.update_interval > 0.0) || !self.update_interval.is_finite() {
            return Err(invalid("update interval must be positive"));
        }
        Ok(())
    }
}

/// All spectral channels under one shared candidate set and schedule.
/// Channels iterate in `(cell key, bin)` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelRepr", try_from = "ModelRepr")]
pub struct GlobalTemporalModel {
    config: TemporalConfig,
    channels: BTreeMap<ChannelKey, SpectralChannel>,
}

impl GlobalTemporalModel {
    pub fn new(config: TemporalConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            channels: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &TemporalConfig {
        &self.config
    }

    pub fn channel(&self, key: &ChannelKey) -> Option<&SpectralChannel> {
        self.channels.get(key)
    }

    pub fn channel_keys(&self) -> impl Iterator<Item = &ChannelKey> {
        self.channels.keys()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn ingest_window(&mut self, key: ChannelKey, t_mid: f64, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid("window value must lie in [0, 1]"));
        }
        if !t_mid.is_finite() {
            return Err(invalid("window time must be finite"));
        }
        let n = self.config.candidates.len();
        self.channels
            .entry(key)
            .or_insert_with(|| SpectralChannel::new(n))
            .ingest(&self.config.candidates, t_mid, value);
        Ok(())
    }

    /// Recomputes every channel's top-`K` components.
    pub fn update_spectrum(&mut self) {
        let (candidates, order) = (&self.config.candidates, self.config.order);
        for ch in self.channels.values_mut() {
            ch.select(candidates, order);
        }
    }

    pub fn predict_channel(&self, key: &ChannelKey, t: f64) -> Result<f64> {
        self.channels
            .get(key)
            .map(|c| c.predict(t))
            .ok_or_else(|| Error::NotFound(format!("channel {key:?}")))
    }

    pub fn has_location(&self, cell: &CellKey) -> bool {
        self.location_channels(cell).next().is_some()
    }

    fn location_channels(&self, cell: &CellKey) -> impl Iterator<Item = (&ChannelKey, &SpectralChannel)> {
        let lo = ChannelKey { cell: *cell, bin: 0 };
        let hi = ChannelKey {
            cell: *cell,
            bin: usize::MAX,
        };
        self.channels.range(lo..=hi)
    }

    /// Predicted per-bin activity at a location; bins without a channel read 0.
    pub fn predict_location(&self, cell: &CellKey, t: f64, bins: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; bins];
        let mut any = false;
        for (key, ch) in self.location_channels(cell) {
            any = true;
            if let Some(slot) = out.get_mut(key.bin) {
                *slot = ch.predict(t);
            }
        }
        if !any {
            return Err(Error::NotFound(format!("location {cell:?}")));
        }
        Ok(out)
    }

    /// Moves every channel of `from` onto `to`, summing the measurement history
    /// with whatever `to` already holds. Selection of touched channels is redone.
    pub fn remap_location(&mut self, from: &CellKey, to: &CellKey) {
        if from == to {
            return;
        }
        let moved: Vec<ChannelKey> = self.location_channels(from).map(|(k, _)| *k).collect();
        let n = self.config.candidates.len();
        for key in moved {
            let ch = self.channels.remove(&key).expect("key listed above");
            let dst = self
                .channels
                .entry(ChannelKey {
                    cell: *to,
                    bin: key.bin,
                })
                .or_insert_with(|| SpectralChannel::new(n));
            dst.absorb(&ch);
            dst.select(&self.config.candidates, self.config.order);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    config: TemporalConfig,
    channels: Vec<(ChannelKey, SpectralChannel)>,
}

impl From<GlobalTemporalModel> for ModelRepr {
    fn from(m: GlobalTemporalModel) -> Self {
        Self {
            config: m.config,
            channels: m.channels.into_iter().collect(),
        }
    }
}

impl TryFrom<ModelRepr> for GlobalTemporalModel {
    type Error = Error;

    fn try_from(r: ModelRepr) -> Result<Self> {
        let mut m = GlobalTemporalModel::new(r.config)?;
        let n = m.config.candidates.len();
        for (key, ch) in r.channels {
            if ch.weighted.len() != n || ch.basis.len() != n {
                return Err(invalid("channel sums do not match the candidate set"));
            }
            m.channels.insert(key, ch);
        }
        Ok(m)
    }
}

/// Collects per-bin event counts for the current window and flushes them as
/// range-normalized values: each location's bins are divided by that
/// location's largest bin count, all-zero windows become zeros.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowAccumulator {
    bins: usize,
    known: BTreeSet<CellKey>,
    #[serde(with = "pairs")]
    counts: BTreeMap<CellKey, Vec<f64>>,
}

/// Struct-keyed maps as ordered `[key, value]` lists, since text formats
/// only allow string keys.
mod pairs {
    use alloc::collections::BTreeMap;
    use alloc::vec::Vec;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K, V, S>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error>
    where
        K: Serialize,
        V: Serialize,
        S: Serializer,
    {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

impl WindowAccumulator {
    pub fn new(bins: usize) -> Self {
        Self {
            bins,
            known: BTreeSet::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, cell: CellKey, bin: usize, weight: f64) {
        self.known.insert(cell);
        let bins = self.bins;
        let slot = self.counts.entry(cell).or_insert_with(|| vec![0.0; bins]);
        if let Some(c) = slot.get_mut(bin) {
            *c += weight;
        }
    }

    pub fn has_pending(&self) -> bool {
        !self.counts.is_empty()
    }

    /// Ingests one value per bin for every location seen so far.
    pub fn flush(&mut self, model: &mut GlobalTemporalModel, t_mid: f64) -> Result<()> {
        let counts = core::mem::take(&mut self.counts);
        for cell in &self.known {
            let row = counts.get(cell);
            let peak = row.map_or(0.0, |r| r.iter().copied().fold(0.0, f64::max));
            for bin in 0..self.bins {
                let value = match row {
                    Some(r) if peak > 0.0 => r[bin] / peak,
                    _ => 0.0,
                };
                model.ingest_window(ChannelKey { cell: *cell, bin }, t_mid, value)?;
            }
        }
        Ok(())
    }

    /// Moves a location's pending counts and identity onto another key.
    pub fn remap(&mut self, from: &CellKey, to: &CellKey) {
        if from == to || !self.known.remove(from) {
            return;
        }
        self.known.insert(*to);
        if let Some(row) = self.counts.remove(from) {
            let bins = self.bins;
            let dst = self.counts.entry(*to).or_insert_with(|| vec![0.0; bins]);
            for (a, b) in dst.iter_mut().zip(row) {
                *a += b;
            }
        }
    }
}

/// Fixed-width windows `[k·Δ, (k+1)·Δ)` starting at time zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowSchedule {
    interval: f64,
    index: u64,
}

impl WindowSchedule {
    pub fn new(interval: f64) -> Result<Self> {
        if !(interval > 0.0) || !interval.is_finite() {
            return Err(invalid("window interval must be positive"));
        }
        Ok(Self { interval, index: 0 })
    }

    pub fn current_end(&self) -> f64 {
        (self.index + 1) as f64 * self.interval
    }

    pub fn current_mid(&self) -> f64 {
        (self.index as f64 + 0.5) * self.interval
    }

    /// If the current window closes at or before `t`, returns its `(mid, end)`
    /// and moves on to the next window.
    pub fn close_if_due(&mut self, t: f64) -> Option<(f64, f64)> {
        let end = self.current_end();
        if end > t {
            return None;
        }
        let mid = self.current_mid();
        self.index += 1;
        Some((mid, end))
    }
}
