//! Detection of a split population in a frequency vector.
//!
//! The thresholds are all configurable; every output that depends on them
//! is stamped with [`CRITERION_VERSION`].

use serde::{Deserialize, Serialize};

use crate::record::Snapshot;

/// Bumped whenever the detection rule (not just its defaults) changes.
pub const CRITERION_VERSION: &str = "modes-v1";

/// Two-mode detector applied to a (possibly noisy) frequency vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeciationCriterion {
    /// Moving-average window (odd) applied before looking for maxima.
    pub window: usize,
    /// Minimum distance in sites between the two modes.
    pub min_separation: usize,
    /// Radius of the neighbourhood whose raw mass is attributed to a mode.
    pub mass_radius: usize,
    /// Minimum mass each mode must hold within `mass_radius`.
    pub min_mode_mass: f64,
    /// Deepest point between the modes must be at most this fraction of
    /// the smaller smoothed peak.
    pub max_valley_ratio: f64,
    /// Peaks below this fraction of the highest smoothed value are ignored.
    pub min_peak_ratio: f64,
}

impl Default for SpeciationCriterion {
    fn default() -> Self {
        Self {
            window: 3,
            min_separation: 4,
            mass_radius: 2,
            min_mode_mass: 0.15,
            max_valley_ratio: 0.5,
            min_peak_ratio: 0.0,
        }
    }
}

impl SpeciationCriterion {
    /// Plain "two local modes at least `separation` apart" on smooth
    /// deterministic profiles. Modes under 1% of the top are treated as
    /// numerical ripples in the tails.
    pub fn bimodality(separation: usize) -> Self {
        Self {
            window: 1,
            min_separation: separation,
            mass_radius: 0,
            min_mode_mass: 0.0,
            max_valley_ratio: 1.0,
            min_peak_ratio: 0.01,
        }
    }

    pub fn version(&self) -> &'static str {
        CRITERION_VERSION
    }

    /// Smoothed profile the maxima are read from.
    pub fn smooth(&self, freqs: &[f64]) -> Vec<f64> {
        let h = self.window / 2;
        let n = freqs.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(h);
                let hi = (i + h).min(n - 1);
                freqs[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect()
    }

    /// The first qualifying pair of mode indices, if any.
    pub fn find_modes(&self, freqs: &[f64]) -> Option<(usize, usize)> {
        if freqs.is_empty() {
            return None;
        }
        let s = self.smooth(freqs);
        let top = s.iter().copied().fold(0.0, f64::max);
        if !(top > 0.0) {
            return None;
        }
        let peaks: Vec<usize> = local_maxima(&s)
            .into_iter()
            .filter(|&i| s[i] >= self.min_peak_ratio * top)
            .filter(|&i| self.mass_near(freqs, i) >= self.min_mode_mass)
            .collect();
        for (a, &i) in peaks.iter().enumerate() {
            for &j in &peaks[a + 1..] {
                if j - i < self.min_separation {
                    continue;
                }
                let valley = s[i..=j].iter().copied().fold(f64::INFINITY, f64::min);
                if valley <= self.max_valley_ratio * s[i].min(s[j]) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn fires(&self, freqs: &[f64]) -> bool {
        self.find_modes(freqs).is_some()
    }

    fn mass_near(&self, freqs: &[f64], i: usize) -> f64 {
        let lo = i.saturating_sub(self.mass_radius);
        let hi = (i + self.mass_radius).min(freqs.len() - 1);
        freqs[lo..=hi].iter().sum()
    }
}

/// Strict local maxima of `s`; a plateau counts once, at its midpoint.
pub fn local_maxima(s: &[f64]) -> Vec<usize> {
    let n = s.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && s[j + 1] == s[i] {
            j += 1;
        }
        let left = i == 0 || s[i - 1] < s[i];
        let right = j == n - 1 || s[j + 1] < s[i];
        if left && right && s[i] > 0.0 {
            out.push((i + j) / 2);
        }
        i = j + 1;
    }
    out
}

/// Time of the first snapshot at which `criterion` fires.
pub fn speciation_time(snapshots: &[Snapshot], criterion: &SpeciationCriterion) -> Option<f64> {
    snapshots
        .iter()
        .find(|s| criterion.fires(&s.frequencies))
        .map(|s| s.time)
}
