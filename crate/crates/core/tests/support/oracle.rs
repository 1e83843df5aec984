//! Millisecond-tick playback simulation used as an independent reference
//! for stall detection.

/// One stall seen by the simulated player: media position (ms) where
/// playback froze and how long (ms) it stayed frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleStall {
    pub onset_ms: u64,
    pub duration_ms: u64,
}

/// Plays `durations_ms` back to back. Segment `k` becomes playable at
/// `arrivals_ms[k]`. Playback starts at the later of `startup_ms` and the
/// first arrival, then advances one millisecond per tick whenever the
/// segment under the playhead has arrived.
pub fn simulate_playback(arrivals_ms: &[u64], durations_ms: &[u64], startup_ms: u64) -> Vec<OracleStall> {
    assert_eq!(arrivals_ms.len(), durations_ms.len());
    if arrivals_ms.is_empty() {
        return Vec::new();
    }
    let total: u64 = durations_ms.iter().sum();
    let mut stalls: Vec<OracleStall> = Vec::new();
    let mut clock = startup_ms.max(arrivals_ms[0]);
    let mut head = 0u64;
    let mut seg = 0usize;
    let mut seg_end = durations_ms[0];
    let mut stalled = false;
    while head < total {
        while head >= seg_end {
            seg += 1;
            seg_end += durations_ms[seg];
        }
        if arrivals_ms[seg] <= clock {
            head += 1;
            stalled = false;
        } else {
            if !stalled {
                stalls.push(OracleStall {
                    onset_ms: head,
                    duration_ms: 0,
                });
                stalled = true;
            }
            stalls.last_mut().unwrap().duration_ms += 1;
        }
        clock += 1;
    }
    stalls
}
