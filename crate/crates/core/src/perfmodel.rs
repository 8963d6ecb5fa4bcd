//! Sizing arithmetic for the feature-extraction accelerator and a
//! two-resource latency model for choosing where kernels run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

const KIB: u32 = 1024;

/// Static description of the systolic accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AcceleratorConfig {
    pub tiles: u32,
    pub grid: (u32, u32),
    pub filter_banks: u32,
    pub filter_bank_bytes: u32,
    /// Stated total of the double-buffered input SRAM.
    pub input_buffer_bytes: u32,
    /// Stated size of each half of that buffer; two halves do not add up
    /// to the total and both figures are kept as given.
    pub input_half_bytes: u32,
    pub output_bank_bytes: u32,
    pub scratchpad_bytes: u32,
    pub state_buffer_bytes: u32,
}

impl Default for AcceleratorConfig {
    fn default() -> Self {
        Self {
            tiles: 64,
            grid: (8, 8),
            filter_banks: 64,
            filter_bank_bytes: KIB,
            input_buffer_bytes: 64 * KIB,
            input_half_bytes: 16 * KIB,
            output_bank_bytes: KIB,
            scratchpad_bytes: 64 * KIB,
            state_buffer_bytes: KIB,
        }
    }
}

impl AcceleratorConfig {
    pub fn validate(&self) -> Result<(), PerfError> {
        if u64::from(self.grid.0) * u64::from(self.grid.1) != u64::from(self.tiles) {
            return Err(PerfError::InvalidInput(format!(
                "{} tiles do not fill a {}x{} grid",
                self.tiles, self.grid.0, self.grid.1
            )));
        }
        Ok(())
    }
}

fn positive(name: &str, dims: &[u64]) -> Result<u128, PerfError> {
    if dims.contains(&0) {
        return Err(PerfError::InvalidInput(format!("{name}: dimensions must be positive")));
    }
    dims.iter()
        .try_fold(1u128, |acc, &d| acc.checked_mul(u128::from(d)))
        .ok_or_else(|| PerfError::InvalidInput(format!("{name}: product overflows")))
}

fn narrow(v: u128) -> Result<u64, PerfError> {
    u64::try_from(v).map_err(|_| PerfError::InvalidInput("result overflows 64 bits".into()))
}

/// Passes of a 64-tile array over a `C x H x W` filter volume.
pub fn conv_iterations(c: u64, h: u64, w: u64) -> Result<u64, PerfError> {
    narrow(positive("conv_iterations", &[c, h, w])?.div_ceil(64))
}

/// Load iterations of an `X x Y x Z` input through 1 KiB, and loading
/// cycles per buffer half. The second term is rounded up.
pub fn input_load(x: u64, y: u64, z: u64) -> Result<(u64, u64), PerfError> {
    let v = positive("input_load", &[x, y, z])?;
    Ok((narrow(v.div_ceil(1024))?, narrow(v.div_ceil(2048))?))
}

/// Layers processed together on `active_tiles` tiles when the smallest
/// layer needs `min_channels` of them. Zero means no batching is possible.
pub fn batch_size(active_tiles: u64, min_channels: u64) -> Result<u64, PerfError> {
    if active_tiles == 0 || min_channels == 0 {
        return Err(PerfError::InvalidInput("batch_size: arguments must be at least 1".into()));
    }
    Ok(active_tiles / min_channels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRate {
    pub bytes_per_frame: u64,
    pub bytes_per_second: u64,
    pub bytes_per_day: u64,
}

impl RawRate {
    pub fn per_day_tib(&self) -> f64 {
        self.bytes_per_day as f64 / (1u64 << 40) as f64
    }

    pub fn per_second_gib(&self) -> f64 {
        self.bytes_per_second as f64 / (1u64 << 30) as f64
    }

    pub fn per_frame_mib(&self) -> f64 {
        self.bytes_per_frame as f64 / (1u64 << 20) as f64
    }
}

/// Uncompressed data rate of a camera stream.
pub fn raw_rate(width: u64, height: u64, channels: u64, bytes_per_sample: u64, fps: u64) -> Result<RawRate, PerfError> {
    let frame = positive("raw_rate", &[width, height, channels, bytes_per_sample])?;
    let second = narrow(positive("raw_rate", &[fps])? * frame)?;
    Ok(RawRate {
        bytes_per_frame: narrow(frame)?,
        bytes_per_second: second,
        bytes_per_day: narrow(u128::from(second) * 86_400)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Redundancy {
    Raid5,
    Mirror,
}

/// Extra capacity as a fraction of the data stored.
pub fn redundancy_overhead(scheme: Redundancy, drives: usize) -> Result<f64, PerfError> {
    match scheme {
        Redundancy::Raid5 if drives >= 3 => Ok(1.0 / (drives - 1) as f64),
        Redundancy::Raid5 => Err(PerfError::InvalidInput(format!("RAID-5 needs at least 3 drives, got {drives}"))),
        Redundancy::Mirror if drives >= 2 => Ok(1.0),
        Redundancy::Mirror => Err(PerfError::InvalidInput("mirroring needs at least 2 drives".into())),
    }
}

/// Where a share of the data is processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Site {
    Host,
    Csd(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementScenario {
    pub name: String,
    pub shares: Vec<(Site, f64)>,
    /// Host I/O bandwidth, bytes per second.
    pub host_bw: f64,
    /// Drive-internal bandwidth seen by CSD compute, bytes per second.
    pub internal_bw: f64,
    /// Work units per second.
    pub host_rate: f64,
    pub csd_rate: f64,
    pub bytes: f64,
    pub work: f64,
}

pub const DEFAULT_HOST_BW: f64 = 2e9;
pub const DEFAULT_INTERNAL_BW: f64 = 8e9;
pub const DEFAULT_COMPUTE_RATE: f64 = 1e9;
pub const DEFAULT_BYTES: f64 = 1e10;
pub const DEFAULT_WORK: f64 = 1e9;

impl PlacementScenario {
    pub fn with_defaults(name: &str, shares: Vec<(Site, f64)>) -> Self {
        Self {
            name: name.to_string(),
            shares,
            host_bw: DEFAULT_HOST_BW,
            internal_bw: DEFAULT_INTERNAL_BW,
            host_rate: DEFAULT_COMPUTE_RATE,
            csd_rate: DEFAULT_COMPUTE_RATE,
            bytes: DEFAULT_BYTES,
            work: DEFAULT_WORK,
        }
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        let bad = |m: String| Err(PerfError::InvalidInput(format!("{}: {m}", self.name)));
        for (k, v) in [
            ("host_bw", self.host_bw),
            ("internal_bw", self.internal_bw),
            ("host_rate", self.host_rate),
            ("csd_rate", self.csd_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{k} must be positive"));
            }
        }
        if !(self.bytes.is_finite() && self.bytes >= 0.0 && self.work.is_finite() && self.work >= 0.0)
            || self.bytes + self.work == 0.0
        {
            return bad("bytes and work must be non-negative and not both zero".into());
        }
        if self.shares.is_empty() || self.shares.iter().any(|&(_, f)| !(f.is_finite() && f >= 0.0)) {
            return bad("shares must be non-negative".into());
        }
        let sum: f64 = self.shares.iter().map(|&(_, f)| f).sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("shares sum to {sum}, not 1"));
        }
        Ok(())
    }

    /// Everything read over the host link and computed on the host.
    pub fn baseline_latency(&self) -> f64 {
        self.bytes / self.host_bw + self.work / self.host_rate
    }

    /// Host-placed shares queue on the host; each CSD works on its own
    /// shares in parallel with the others.
    pub fn latency(&self) -> f64 {
        let mut per_site: BTreeMap<Site, f64> = BTreeMap::new();
        for &(site, f) in &self.shares {
            *per_site.entry(site).or_default() += f;
        }
        per_site
            .into_iter()
            .map(|(site, f)| match site {
                Site::Host => f * self.baseline_latency(),
                Site::Csd(_) => f * (self.bytes / self.internal_bw + self.work / self.csd_rate),
            })
            .fold(0.0, f64::max)
    }
}

/// Latency and speedup over the all-host baseline.
pub fn placement_latency(s: &PlacementScenario) -> Result<(f64, f64), PerfError> {
    s.validate()?;
    let l = s.latency();
    Ok((l, s.baseline_latency() / l))
}

/// The six data-distribution rows: host compute, all on one CSD, then two
/// CSDs at 0.1/0.9, 0.3/0.7, 0.4/0.6 and 0.5/0.5.
pub fn distribution_scenarios() -> Vec<PlacementScenario> {
    let mut rows = vec![
        PlacementScenario::with_defaults("host", vec![(Site::Host, 1.0)]),
        PlacementScenario::with_defaults("csd1", vec![(Site::Csd(1), 1.0)]),
    ];
    for a in [0.1, 0.3, 0.4, 0.5] {
        let b = 1.0 - a;
        rows.push(PlacementScenario::with_defaults(
            &format!("csd1:{a:.1}/csd2:{b:.1}"),
            vec![(Site::Csd(1), a), (Site::Csd(2), b)],
        ));
    }
    rows
}

/// Parses a scenario file:
///
/// ```text
/// name=balanced
/// host_bw=2e9
/// share.csd1=0.5
/// share.csd2=0.5
/// ```
///
/// Unset numeric keys take the defaults; `share.host` places work on the
/// host. Blank lines and `#` comments are ignored.
pub fn parse_scenario(text: &str) -> Result<PlacementScenario, PerfError> {
    let mut s = PlacementScenario::with_defaults("scenario", Vec::new());
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| PerfError::Parse { line: i + 1, msg };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err("expected key=value".into()))?;
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key {key}")));
        }
        if key == "name" {
            s.name = value.to_string();
            continue;
        }
        let num: f64 = value.parse().map_err(|_| err(format!("{key}: not a number")))?;
        match key {
            "host_bw" => s.host_bw = num,
            "internal_bw" => s.internal_bw = num,
            "host_rate" => s.host_rate = num,
            "csd_rate" => s.csd_rate = num,
            "bytes" => s.bytes = num,
            "work" => s.work = num,
            "share.host" => s.shares.push((Site::Host, num)),
            _ => {
                let id = key
                    .strip_prefix("share.csd")
                    .and_then(|d| d.parse::<u32>().ok())
                    .ok_or_else(|| err(format!("unknown key {key}")))?;
                s.shares.push((Site::Csd(id), num));
            }
        }
    }
    s.validate()?;
    Ok(s)
}

/// Comma-separated table with one row per scenario.
pub fn report_csv(scenarios: &[PlacementScenario]) -> Result<String, PerfError> {
    let mut out = String::from("scenario,latency_s,speedup\n");
    for s in scenarios {
        let (l, x) = placement_latency(s)?;
        writeln!(out, "{},{l:.6},{x:.4}", s.name).expect("write to string");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizing_examples() {
        assert_eq!(conv_iterations(3, 3, 3).unwrap(), 1);
        assert_eq!(conv_iterations(64, 3, 3).unwrap(), 9);
        assert_eq!(conv_iterations(1, 1, 64).unwrap(), 1);
        assert!(conv_iterations(0, 1, 1).is_err());
        assert_eq!(input_load(32, 32, 3).unwrap(), (3, 2));
        assert_eq!(input_load(16, 16, 4).unwrap(), (1, 1));
        assert_eq!(input_load(1, 1, 1).unwrap(), (1, 1));
        assert_eq!(batch_size(64, 16).unwrap(), 4);
        assert_eq!(batch_size(64, 64).unwrap(), 1);
        assert_eq!(batch_size(64, 65).unwrap(), 0);
        assert!(batch_size(64, 0).is_err());
        assert!(conv_iterations(u64::MAX, u64::MAX, u64::MAX).is_err());
    }

    #[test]
    fn raw_rate_figures() {
        let r = raw_rate(1920, 1080, 3, 4, 60).unwrap();
        assert_eq!(r.bytes_per_frame, 24_883_200);
        assert!((r.per_frame_mib() - 23.73).abs() < 0.01);
        assert!((r.per_second_gib() - 1.39).abs() < 0.01);
        assert!((r.per_day_tib() - 117.32).abs() < 0.01);
    }

    #[test]
    fn overhead() {
        assert!((redundancy_overhead(Redundancy::Raid5, 4).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(redundancy_overhead(Redundancy::Mirror, 2).unwrap(), 1.0);
        assert!(redundancy_overhead(Redundancy::Raid5, 2).is_err());
    }

    #[test]
    fn distribution_rows_are_ordered() {
        let rows = distribution_scenarios();
        let speedups: Vec<f64> = rows.iter().map(|s| placement_latency(s).unwrap().1).collect();
        assert_eq!(speedups[0], 1.0);
        assert!(speedups.windows(2).all(|w| w[0] < w[1]), "{speedups:?}");
        let one = rows[1].latency();
        assert_eq!(rows[5].latency(), one / 2.0);
    }

    #[test]
    fn scenario_file() {
        let s = parse_scenario("# two drives\nname=split\nhost_bw=1e9\nshare.csd1=0.25\nshare.csd2=0.75\n").unwrap();
        assert_eq!(s.name, "split");
        assert_eq!(s.host_bw, 1e9);
        assert_eq!(s.shares, vec![(Site::Csd(1), 0.25), (Site::Csd(2), 0.75)]);
        assert!(parse_scenario("share.csd1=0.5\n").is_err());
        assert!(parse_scenario("share.gpu=1\n").is_err());
        assert!(parse_scenario("share.host=1\nshare.host=0\n").is_err());
        assert!(parse_scenario("share.host=1\nhost_bw=-1\n").is_err());
        let csv = report_csv(&distribution_scenarios()).unwrap();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.lines().nth(1).unwrap().starts_with("host,"));
    }

    #[test]
    fn accelerator_defaults() {
        let a = AcceleratorConfig::default();
        a.validate().unwrap();
        assert_ne!(2 * a.input_half_bytes, a.input_buffer_bytes);
        let bad = AcceleratorConfig { tiles: 63, ..a };
        assert!(bad.validate().is_err());
    }
}
