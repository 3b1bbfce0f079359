use serde::{Deserialize, Serialize};

/// Click times relative to the pump clock, binned over the detector gate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    start_ps: i64,
    bin_ps: i64,
    counts: Vec<u64>,
}

impl CoincidenceHistogram {
    /// Bins of `bin_width` covering `[start, end)`; times are stored in
    /// whole picoseconds so histograms merge exactly.
    pub fn new(start: f64, end: f64, bin_width: f64) -> Self {
        let start_ps = (start * 1e12).floor() as i64;
        let bin_ps = ((bin_width * 1e12).round() as i64).max(1);
        let span = (end * 1e12).ceil() as i64 - start_ps;
        let n = ((span + bin_ps - 1) / bin_ps).max(1) as usize;
        Self {
            start_ps,
            bin_ps,
            counts: vec![0; n],
        }
    }

    pub fn record(&mut self, time: f64) {
        let i = ((time * 1e12 - self.start_ps as f64) / self.bin_ps as f64).floor();
        let i = (i.max(0.0) as usize).min(self.counts.len() - 1);
        self.counts[i] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_ps as f64 * 1e-12
    }

    /// Centre of bin `i`, seconds.
    pub fn bin_center(&self, i: usize) -> f64 {
        (self.start_ps as f64 + (i as f64 + 0.5) * self.bin_ps as f64) * 1e-12
    }

    pub fn same_binning(&self, other: &Self) -> bool {
        self.start_ps == other.start_ps && self.bin_ps == other.bin_ps && self.counts.len() == other.counts.len()
    }

    /// Adds `other` bin by bin. Panics on mismatched binning.
    pub fn merge(&mut self, other: &Self) {
        assert!(self.same_binning(other), "histograms with different binning");
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning() {
        let mut h = CoincidenceHistogram::new(-0.4e-9, 2.8e-9, 20e-12);
        assert_eq!(h.len(), 160);
        h.record(-0.4e-9);
        h.record(1.2e-9);
        h.record(2.8e-9 - 1e-15);
        assert_eq!(h.total(), 3);
        assert_eq!(h.counts()[0], 1);
        assert_eq!(h.counts()[80], 1);
        assert_eq!(h.counts()[159], 1);
        assert!((h.bin_center(80) - 1.21e-9).abs() < 1e-18);
        let mut g = h.clone();
        g.merge(&h);
        assert_eq!(g.total(), 6);
    }
}
