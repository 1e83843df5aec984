#![allow(dead_code)]

pub mod oracle;

use qoekit_core::SegmentTiming;

/// Segments that arrive at the given instants with no transfer breakdown.
pub fn timeline(arrivals_ms: &[u64], durations_ms: &[u64]) -> Vec<SegmentTiming> {
    arrivals_ms
        .iter()
        .zip(durations_ms)
        .enumerate()
        .map(|(i, (&t, &d))| SegmentTiming::new(i as u32 + 1, t, 0, 0, 0, 0).with_duration(d))
        .collect()
}
