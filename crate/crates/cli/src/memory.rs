//! Peak memory probe: the OS-reported process peak RSS when available
//! (Linux `VmHWM`), otherwise an analytic working-set estimate.

use std::fmt;
use std::fs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemorySource {
    /// Process peak resident set size reported by the OS.
    OsPeakRss,
    /// Analytic estimate from the dense/sparse working-set sizes.
    Analytic,
}

impl fmt::Display for MemorySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemorySource::OsPeakRss => write!(f, "os peak rss"),
            MemorySource::Analytic => write!(f, "analytic"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PeakMemory {
    pub bytes: u64,
    pub source: MemorySource,
}

/// Linux `VmHWM` (peak RSS) in bytes, if exposed.
fn os_peak_rss() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Peak memory with the source labelled: OS peak RSS when the platform
/// exposes it, otherwise the caller's analytic estimate.
pub fn peak_memory_estimate(analytic_bytes: u64) -> PeakMemory {
    match os_peak_rss() {
        Some(bytes) => PeakMemory {
            bytes,
            source: MemorySource::OsPeakRss,
        },
        None => PeakMemory {
            bytes: analytic_bytes,
            source: MemorySource::Analytic,
        },
    }
}

/// Human-readable byte count.
pub fn format_bytes(bytes: u64) -> String {
    const UNITS: [&str; 4] = ["B", "KiB", "MiB", "GiB"];
    let mut value = bytes as f64;
    let mut unit = 0;
    while value >= 1024.0 && unit + 1 < UNITS.len() {
        value /= 1024.0;
        unit += 1;
    }
    if unit == 0 {
        format!("{bytes} B")
    } else {
        format!("{value:.1} {}", UNITS[unit])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn os_peak_dominates_analytic_floor_on_linux() {
        let analytic = 3 * 8 * 261 * 261u64; // three dense 261x261 matrices
        let peak = peak_memory_estimate(analytic);
        if peak.source == MemorySource::OsPeakRss {
            assert!(peak.bytes >= analytic);
        } else {
            assert_eq!(peak.bytes, analytic);
        }
    }

    #[test]
    fn byte_formatting() {
        assert_eq!(format_bytes(512), "512 B");
        assert_eq!(format_bytes(2 * 1024 * 1024), "2.0 MiB");
    }
}
