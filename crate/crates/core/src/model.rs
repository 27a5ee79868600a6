//! Domain records shared by every stage of the pipeline.
//!
//! Units are meters and seconds throughout. Nautical miles and milliseconds
//! only show up when reading or writing files.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Vec2;

/// Meters per international nautical mile.
pub const METERS_PER_NMI: f64 = 1852.0;

/// Highest NACp value defined for 1090-ES.
pub const MAX_NACP: u8 = 11;

/// 24-bit ICAO aircraft address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Icao(u32);

impl Icao {
    pub fn new(addr: u32) -> Result<Self> {
        if addr > 0xFF_FFFF {
            return Err(Error::InvalidInput(format!("ICAO address {addr:#x} exceeds 24 bits")));
        }
        Ok(Self(addr))
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Icao {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:06X}", self.0)
    }
}

impl FromStr for Icao {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.len() > 6 {
            return Err(Error::InvalidInput(format!("bad ICAO address {s:?}")));
        }
        let v = u32::from_str_radix(s, 16)
            .map_err(|_| Error::InvalidInput(format!("bad ICAO address {s:?}")))?;
        Icao::new(v)
    }
}

impl Serialize for Icao {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Icao {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One received ADS-B position/velocity report.
#[derive(Debug, Clone, PartialEq)]
pub struct AdsbReport {
    pub icao: Icao,
    /// Time of applicability assigned by the ground station, seconds.
    pub toa: f64,
    pub pos: Vec2<f64>,
    pub vel: Vec2<f64>,
    pub nacp: u8,
    /// TIME bit.
    pub utc_coupled: bool,
    pub link_version: u8,
    /// Physical link, when the source says. `None` is read as 1090-ES.
    pub link: Option<String>,
    pub source_tag: String,
}

impl AdsbReport {
    pub fn speed(&self) -> f64 {
        self.vel.norm()
    }

    pub fn validate(&self) -> Result<()> {
        if self.nacp > MAX_NACP {
            return Err(Error::InvalidNacp(self.nacp as i64));
        }
        if !self.toa.is_finite() || self.toa < 0.0 {
            return Err(Error::InvalidInput(format!("bad toa {}", self.toa)));
        }
        if !self.pos.is_finite() || !self.vel.is_finite() {
            return Err(Error::InvalidInput("non-finite position or velocity".into()));
        }
        Ok(())
    }

    /// True when the report came over 1090-ES (or the link is not stated).
    pub fn is_1090es(&self) -> bool {
        match &self.link {
            None => true,
            Some(l) => {
                let l = l.to_ascii_lowercase().replace(['-', '_', ' '], "");
                l == "1090es" || l == "1090"
            }
        }
    }
}

/// A tracker-derived position/velocity sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub t: f64,
    pub pos: Vec2<f64>,
    pub vel: Vec2<f64>,
}

/// A contiguous run of track points for one aircraft.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub icao: Icao,
    pub track_index: usize,
    pub points: Vec<TrackPoint>,
}

impl Track {
    pub fn new(icao: Icao, track_index: usize, points: Vec<TrackPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InsufficientData { required: 2, available: points.len() });
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(Error::InvalidAbscissa { index: i + 1 });
            }
        }
        Ok(Self { icao, track_index, points })
    }

    pub fn start(&self) -> f64 {
        self.points[0].t
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1].t
    }

    pub fn duration(&self) -> f64 {
        self.end() - self.start()
    }

    pub fn contains_time(&self, t: f64) -> bool {
        t >= self.start() && t <= self.end()
    }
}

/// 95% horizontal containment radius for one NACp value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epu {
    Bounded(f64),
    Unbounded,
}

impl Epu {
    pub fn meters(self) -> Option<f64> {
        match self {
            Epu::Bounded(m) => Some(m),
            Epu::Unbounded => None,
        }
    }

    /// Whether a radial error of `error_m` lies inside the containment radius.
    pub fn contains(self, error_m: f64) -> bool {
        match self {
            Epu::Bounded(m) => error_m <= m,
            Epu::Unbounded => true,
        }
    }
}

/// Ratio between a 95% circular containment radius and the per-axis sigma
/// of an isotropic Gaussian (Rayleigh 95% quantile, sqrt(-2 ln 0.05) ~ 2.4477).
pub const EPU_TO_SIGMA: f64 = 2.45;

const DEFAULT_EPU_TABLE: &str = include_str!("../data/epu_table.conf");

/// NACp -> EPU lookup table, loaded from a flat `nacp_N = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct EpuTable {
    bounds: [Epu; 12],
}

impl Default for EpuTable {
    fn default() -> Self {
        Self::parse(DEFAULT_EPU_TABLE).expect("bundled EPU table is valid")
    }
}

impl EpuTable {
    pub fn from_bounds(bounds: [Epu; 12]) -> Result<Self> {
        if bounds[0] != Epu::Unbounded {
            return Err(Error::Config("nacp_0 must be unbounded".into()));
        }
        let mut prev = f64::INFINITY;
        for (nacp, b) in bounds.iter().enumerate().skip(1) {
            let m = b
                .meters()
                .ok_or_else(|| Error::Config(format!("nacp_{nacp} must be a finite radius")))?;
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Config(format!("nacp_{nacp} radius must be positive")));
            }
            if m > prev {
                return Err(Error::Config(format!(
                    "nacp_{nacp} radius {m} exceeds nacp_{} radius {prev}",
                    nacp - 1
                )));
            }
            prev = m;
        }
        Ok(Self { bounds })
    }

    /// Parses the key-value table format. Blank lines and `#` comments are
    /// ignored; every key `nacp_0` ... `nacp_11` must appear exactly once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut slots: [Option<Epu>; 12] = [None; 12];
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            let nacp: usize = key
                .strip_prefix("nacp_")
                .and_then(|n| n.parse().ok())
                .filter(|n| *n <= MAX_NACP as usize)
                .ok_or_else(|| Error::Config(format!("line {}: unknown key {key:?}", lineno + 1)))?;
            let epu = if value.eq_ignore_ascii_case("unbounded") {
                Epu::Unbounded
            } else {
                Epu::Bounded(value.parse().map_err(|_| {
                    Error::Config(format!("line {}: bad value {value:?}", lineno + 1))
                })?)
            };
            if slots[nacp].replace(epu).is_some() {
                return Err(Error::Config(format!("duplicate key {key}")));
            }
        }
        let mut bounds = [Epu::Unbounded; 12];
        for (i, slot) in slots.iter().enumerate() {
            bounds[i] = slot.ok_or_else(|| Error::Config(format!("missing key nacp_{i}")))?;
        }
        Self::from_bounds(bounds)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (i, b) in self.bounds.iter().enumerate() {
            match b {
                Epu::Unbounded => out.push_str(&format!("nacp_{i} = unbounded\n")),
                Epu::Bounded(m) => out.push_str(&format!("nacp_{i} = {m}\n")),
            }
        }
        out
    }

    pub fn lookup(&self, nacp: i64) -> Result<Epu> {
        if !(0..=MAX_NACP as i64).contains(&nacp) {
            return Err(Error::InvalidNacp(nacp));
        }
        Ok(self.bounds[nacp as usize])
    }

    /// Per-axis Gaussian sigma implied by the NACp's EPU, if bounded.
    pub fn sigma(&self, nacp: i64) -> Result<Option<f64>> {
        Ok(self.lookup(nacp)?.meters().map(|m| m / EPU_TO_SIGMA))
    }
}

/// Allowed uncompensated-latency range, seconds, endpoints inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UlBudget {
    pub min_ul: f64,
    pub max_ul: f64,
}

impl Default for UlBudget {
    fn default() -> Self {
        Self { min_ul: -0.200, max_ul: 0.400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UlClass {
    Within,
    /// Latency above the budget: the position lags its timestamp.
    UnderCompensatedExcess,
    /// Latency below the budget: the position leads its timestamp.
    OverCompensatedExcess,
}

impl UlBudget {
    pub fn new(min_ul: f64, max_ul: f64) -> Result<Self> {
        if !(min_ul < 0.0 && 0.0 < max_ul) {
            return Err(Error::Config(format!("UL budget [{min_ul}, {max_ul}] must straddle 0")));
        }
        Ok(Self { min_ul, max_ul })
    }

    pub fn classify(&self, ul: f64) -> Result<UlClass> {
        if !ul.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite latency {ul}")));
        }
        Ok(if ul > self.max_ul {
            UlClass::UnderCompensatedExcess
        } else if ul < self.min_ul {
            UlClass::OverCompensatedExcess
        } else {
            UlClass::Within
        })
    }
}

pub fn classify_ul(ul: f64, budget: &UlBudget) -> Result<UlClass> {
    budget.classify(ul)
}

pub fn epu_lookup(table: &EpuTable, nacp: i64) -> Result<Epu> {
    table.lookup(nacp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epu_examples() {
        let t = EpuTable::default();
        assert_eq!(t.lookup(10).unwrap(), Epu::Bounded(0.005 * METERS_PER_NMI));
        assert_eq!(t.lookup(0).unwrap(), Epu::Unbounded);
        assert!(matches!(t.lookup(12), Err(Error::InvalidNacp(12))));
        assert!(matches!(t.lookup(-1), Err(Error::InvalidNacp(-1))));
        assert_eq!(t.lookup(9).unwrap(), Epu::Bounded(30.0));
    }

    #[test]
    fn default_table_is_monotone() {
        let t = EpuTable::default();
        let radii: Vec<f64> = (1..=11).map(|n| t.lookup(n).unwrap().meters().unwrap()).collect();
        assert!(radii.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn table_round_trips_through_text() {
        let t = EpuTable::default();
        assert_eq!(EpuTable::parse(&t.to_config_string()).unwrap(), t);
    }

    #[test]
    fn table_rejects_missing_and_non_monotone() {
        let text = EpuTable::default().to_config_string();
        let missing: String = text.lines().filter(|l| !l.starts_with("nacp_4 ")).map(|l| format!("{l}\n")).collect();
        assert!(EpuTable::parse(&missing).is_err());
        let bumped = text.replace("nacp_11 = 3", "nacp_11 = 300");
        assert!(EpuTable::parse(&bumped).is_err());
        assert!(EpuTable::parse("nacp_12 = 1").is_err());
    }

    #[test]
    fn budget_examples() {
        let b = UlBudget::default();
        assert_eq!(b.classify(0.400).unwrap(), UlClass::Within);
        assert_eq!(b.classify(-0.200).unwrap(), UlClass::Within);
        assert_eq!(b.classify(0.0).unwrap(), UlClass::Within);
        assert_eq!(b.classify(-0.201).unwrap(), UlClass::OverCompensatedExcess);
        assert_eq!(b.classify(0.401).unwrap(), UlClass::UnderCompensatedExcess);
        assert!(b.classify(f64::NAN).is_err());
        assert!(UlBudget::new(0.1, 0.4).is_err());
    }

    #[test]
    fn icao_parse_and_display() {
        let icao: Icao = "a637e1".parse().unwrap();
        assert_eq!(icao.to_string(), "A637E1");
        assert!("1000000".parse::<Icao>().is_err());
        assert!("zz".parse::<Icao>().is_err());
    }
}
