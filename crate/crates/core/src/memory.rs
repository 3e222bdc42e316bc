//! Best-effort peak resident memory sampling.
//!
//! On Linux the kernel tracks the high-water mark of the resident set
//! (`VmHWM` in `/proc/self/status`) and lets a process reset it by writing
//! `5` to `/proc/self/clear_refs`. Elsewhere no sample is available.

use std::fs;

/// Resets the peak-RSS counter. Returns false if the platform refuses.
pub fn reset_peak_rss() -> bool {
    fs::write("/proc/self/clear_refs", "5").is_ok()
}

/// Peak resident set size of this process in bytes, if known.
pub fn peak_rss_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    parse_status_kb(&status, "VmHWM:").map(|kb| kb * 1024)
}

fn parse_status_kb(status: &str, key: &str) -> Option<u64> {
    status
        .lines()
        .find_map(|line| line.strip_prefix(key))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
}

/// Samples the peak RSS across a measured region.
pub struct PeakSampler {
    reset: bool,
}

impl PeakSampler {
    pub fn start() -> Self {
        PeakSampler {
            reset: reset_peak_rss(),
        }
    }

    /// Peak RSS since `start`, or 0 (with a warning) when unavailable. If the
    /// counter could not be reset the value is the process-lifetime peak.
    pub fn finish(self) -> u64 {
        match peak_rss_bytes() {
            Some(b) => {
                if !self.reset {
                    log::debug!("peak RSS counter not resettable; reporting lifetime peak");
                }
                b
            }
            None => {
                log::warn!("peak resident memory unavailable on this platform; reporting 0");
                0
            }
        }
    }
}
