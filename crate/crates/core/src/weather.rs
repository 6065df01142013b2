//! Weather records, sky temperature, solar position and plane-of-array
//! irradiance.
//!
//! Solar position follows the NOAA Julian-century formulation (declination,
//! equation of time, hour angle). Transposition to tilted facades uses the
//! isotropic-sky model with an albedo ground-reflection term.

use chrono::{DateTime, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::building::{BuildingGrid, Direction, MaterialField};
use crate::error::{Error, Result};

/// Offset between the Celsius and Kelvin scales.
pub const KELVIN_OFFSET: f64 = 273.15;

/// Swinbank clear-sky coefficient [K^-0.5].
const SWINBANK_COEFF: f64 = 0.0552;

#[derive(Clone, Debug, PartialEq)]
pub struct WeatherRecord {
    pub timestamp: DateTime<Utc>,
    /// Ambient air temperature [K]; also the convective reference T∞.
    pub t_air: f64,
    pub t_gnd: f64,
    pub t_sky: Option<f64>,
    pub ghi: f64,
    pub dni: f64,
    pub dhi: f64,
}

impl WeatherRecord {
    pub fn validate(&self) -> Result<()> {
        for (name, t) in [("t_air", self.t_air), ("t_gnd", self.t_gnd)]
            .into_iter()
            .chain(self.t_sky.map(|t| ("t_sky", t)))
        {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Weather(format!(
                    "{}: {name} = {t} K is not a positive temperature",
                    self.timestamp
                )));
            }
        }
        for (name, g) in [("ghi", self.ghi), ("dni", self.dni), ("dhi", self.dhi)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(Error::Weather(format!(
                    "{}: negative irradiance {name} = {g}",
                    self.timestamp
                )));
            }
        }
        Ok(())
    }

    pub fn is_dark(&self) -> bool {
        self.ghi == 0.0 && self.dni == 0.0 && self.dhi == 0.0
    }
}

/// Effective sky temperature [K]: the recorded value when present, else the
/// Swinbank clear-sky estimate `0.0552·T_air^1.5`.
pub fn sky_temperature(record: &WeatherRecord) -> f64 {
    match record.t_sky {
        Some(t) => t,
        None => SWINBANK_COEFF * record.t_air.powf(1.5),
    }
}

/// Time-ordered weather records, held constant between timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct WeatherSeries {
    records: Vec<WeatherRecord>,
}

impl WeatherSeries {
    pub fn new(records: Vec<WeatherRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Weather("no records".into()));
        }
        for r in &records {
            r.validate()?;
        }
        for w in records.windows(2) {
            if w[1].timestamp <= w[0].timestamp {
                return Err(Error::Weather(format!(
                    "timestamps not strictly increasing: {} follows {}",
                    w[1].timestamp, w[0].timestamp
                )));
            }
        }
        Ok(WeatherSeries { records })
    }

    /// A series holding one record forever.
    pub fn constant(record: WeatherRecord) -> Result<Self> {
        Self::new(vec![record])
    }

    pub fn records(&self) -> &[WeatherRecord] {
        &self.records
    }

    pub fn first_time(&self) -> DateTime<Utc> {
        self.records[0].timestamp
    }

    pub fn last_time(&self) -> DateTime<Utc> {
        self.records[self.records.len() - 1].timestamp
    }

    /// Record in effect at `t` (the latest record not after `t`). A
    /// single-record series applies at any time from its timestamp on.
    pub fn at(&self, t: DateTime<Utc>) -> Result<&WeatherRecord> {
        if t < self.first_time() {
            return Err(Error::Weather(format!(
                "{t} precedes the first record ({})",
                self.first_time()
            )));
        }
        if self.records.len() > 1 && t > self.last_time() {
            return Err(Error::Weather(format!(
                "{t} is after the last record ({})",
                self.last_time()
            )));
        }
        let idx = self.records.partition_point(|r| r.timestamp <= t);
        Ok(&self.records[idx - 1])
    }
}

pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    let naive = s.strip_suffix('Z').unwrap_or(s);
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(naive, f).ok())
    .map(|n| n.and_utc())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TempUnit {
    Kelvin,
    Celsius,
}

impl TempUnit {
    fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "K" | "k" | "kelvin" => Some(TempUnit::Kelvin),
            "C" | "c" | "degC" | "°C" | "celsius" => Some(TempUnit::Celsius),
            _ => None,
        }
    }

    fn to_kelvin(self, v: f64) -> f64 {
        match self {
            TempUnit::Kelvin => v,
            TempUnit::Celsius => v + KELVIN_OFFSET,
        }
    }
}

const TEMP_COLUMNS: [&str; 3] = ["t_air", "t_gnd", "t_sky"];

/// Parses weather CSV text with columns
/// `timestamp, t_air, t_gnd, t_sky, ghi, dni, dhi`. An optional units row
/// right after the header declares `K` or `C` for the temperature columns.
pub fn load_weather(csv_text: &str) -> Result<Vec<WeatherRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(csv_text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 6];
    for (slot, name) in ["timestamp", "t_air", "t_gnd", "ghi", "dni", "dhi"]
        .into_iter()
        .enumerate()
    {
        idx[slot] = col(name)
            .ok_or_else(|| Error::Weather(format!("missing mandatory column '{name}'")))?;
    }
    let [i_ts, i_air, i_gnd, i_ghi, i_dni, i_dhi] = idx;
    let i_sky = col("t_sky");

    let mut units = [TempUnit::Kelvin; 3];
    let mut records = Vec::new();
    for (n, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| row.get(i).unwrap_or("");
        let Some(timestamp) = parse_timestamp(field(i_ts)) else {
            if n == 0 {
                for (u, name) in units.iter_mut().zip(TEMP_COLUMNS) {
                    let Some(i) = col(name) else { continue };
                    *u = TempUnit::parse(field(i)).ok_or_else(|| {
                        Error::Weather(format!(
                            "line {line}: unknown temperature unit '{}' for {name}",
                            field(i)
                        ))
                    })?;
                }
                continue;
            }
            return Err(Error::Weather(format!(
                "line {line}: bad timestamp '{}'",
                field(i_ts)
            )));
        };
        let num = |i: usize, name: &str| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::Weather(format!("line {line}: bad {name} value '{}'", field(i)))
            })
        };
        let t_sky = match i_sky.map(field) {
            None | Some("") => None,
            Some(_) => Some(units[2].to_kelvin(num(i_sky.unwrap(), "t_sky")?)),
        };
        let rec = WeatherRecord {
            timestamp,
            t_air: units[0].to_kelvin(num(i_air, "t_air")?),
            t_gnd: units[1].to_kelvin(num(i_gnd, "t_gnd")?),
            t_sky,
            ghi: num(i_ghi, "ghi")?,
            dni: num(i_dni, "dni")?,
            dhi: num(i_dhi, "dhi")?,
        };
        rec.validate()
            .map_err(|e| Error::Weather(format!("line {line}: {e}")))?;
        if let Some(prev) = records.last() {
            let prev: &WeatherRecord = prev;
            if rec.timestamp <= prev.timestamp {
                return Err(Error::Weather(format!(
                    "line {line}: timestamp {} is not after {}",
                    rec.timestamp, prev.timestamp
                )));
            }
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::Weather("no records".into()));
    }
    Ok(records)
}

pub fn load_weather_file(path: impl AsRef<std::path::Path>) -> Result<WeatherSeries> {
    let text = std::fs::read_to_string(path)?;
    WeatherSeries::new(load_weather(&text)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SitePosition {
    pub latitude: f64,
    pub longitude: f64,
    /// Ground reflectance.
    pub albedo: f64,
}

impl Default for SitePosition {
    fn default() -> Self {
        SitePosition {
            latitude: 0.0,
            longitude: 0.0,
            albedo: 0.2,
        }
    }
}

impl SitePosition {
    pub fn validate(&self) -> Result<()> {
        if !(self.latitude.abs() <= 90.0) {
            return Err(Error::Validation(format!(
                "latitude {} outside [-90, 90]",
                self.latitude
            )));
        }
        if !self.longitude.is_finite() {
            return Err(Error::Validation("longitude must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::Validation(format!(
                "albedo {} outside [0, 1]",
                self.albedo
            )));
        }
        Ok(())
    }
}

/// Sun position at an instant, with angles of incidence on the four
/// vertical cardinal facades.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolarGeometry {
    pub zenith: f64,
    /// Clockwise from north, in [0, 360).
    pub azimuth: f64,
    /// Angle of incidence on vertical facades, indexed by [`Direction::index`].
    pub aoi_facades: [f64; 4],
}

impl SolarGeometry {
    pub fn new(zenith: f64, azimuth: f64) -> Self {
        let mut g = SolarGeometry {
            zenith,
            azimuth: azimuth.rem_euclid(360.0),
            aoi_facades: [0.0; 4],
        };
        for d in Direction::ALL {
            g.aoi_facades[d.index()] = g.aoi(d.azimuth_deg(), 90.0);
        }
        g
    }

    pub fn sun_up(&self) -> bool {
        self.zenith < 90.0
    }

    /// Cosine of the angle of incidence on a surface (spherical cosine law).
    pub fn cos_aoi(&self, surface_azimuth: f64, tilt: f64) -> f64 {
        let (z, t) = (self.zenith.to_radians(), tilt.to_radians());
        let daz = (self.azimuth - surface_azimuth).to_radians();
        (z.cos() * t.cos() + z.sin() * t.sin() * daz.cos()).clamp(-1.0, 1.0)
    }

    pub fn aoi(&self, surface_azimuth: f64, tilt: f64) -> f64 {
        self.cos_aoi(surface_azimuth, tilt).acos().to_degrees()
    }
}

/// NOAA solar position for a UTC instant (Julian-century series, about
/// 0.01° between 1900 and 2100; no refraction).
pub fn solar_position(site: &SitePosition, timestamp: DateTime<Utc>) -> SolarGeometry {
    let unix = timestamp.timestamp() as f64 + f64::from(timestamp.timestamp_subsec_nanos()) * 1e-9;
    let jd = unix / 86_400.0 + 2_440_587.5;
    let t = (jd - 2_451_545.0) / 36_525.0;

    let l0 = (280.46646 + t * (36000.76983 + t * 0.0003032)).rem_euclid(360.0);
    let m = (357.52911 + t * (35999.05029 - 0.0001537 * t)).to_radians();
    let e = 0.016708634 - t * (0.000042037 + 0.0000001267 * t);
    let center = m.sin() * (1.914602 - t * (0.004817 + 0.000014 * t))
        + (2.0 * m).sin() * (0.019993 - 0.000101 * t)
        + (3.0 * m).sin() * 0.000289;
    let omega = (125.04 - 1934.136 * t).to_radians();
    let app_long = (l0 + center - 0.00569 - 0.00478 * omega.sin()).to_radians();
    let mean_obliq =
        23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
    let obliq = (mean_obliq + 0.00256 * omega.cos()).to_radians();
    let decl = (obliq.sin() * app_long.sin()).asin();

    let y = (obliq / 2.0).tan().powi(2);
    let l0r = l0.to_radians();
    let eqtime = 4.0
        * (y * (2.0 * l0r).sin() - 2.0 * e * m.sin() + 4.0 * e * y * m.sin() * (2.0 * l0r).cos()
            - 0.5 * y * y * (4.0 * l0r).sin()
            - 1.25 * e * e * (2.0 * m).sin())
        .to_degrees();

    let minutes = unix.rem_euclid(86_400.0) / 60.0;
    let true_solar_minutes = minutes + eqtime + 4.0 * site.longitude;
    let hour_angle = (true_solar_minutes / 4.0 - 180.0).to_radians();
    let lat = site.latitude.to_radians();

    let cos_zen = lat.sin() * decl.sin() + lat.cos() * decl.cos() * hour_angle.cos();
    let zenith = cos_zen.clamp(-1.0, 1.0).acos().to_degrees();
    let azimuth = hour_angle
        .sin()
        .atan2(hour_angle.cos() * lat.sin() - decl.tan() * lat.cos())
        .to_degrees()
        + 180.0;
    SolarGeometry::new(zenith, azimuth)
}

/// Isotropic-sky plane-of-array irradiance [W/m²] on a surface with the given
/// outward azimuth and tilt:
/// `DNI·max(cos AOI, 0) + DHI·(1+cos φ)/2 + GHI·albedo·(1−cos φ)/2`.
/// The beam term is dropped while the sun is below the horizon.
pub fn poa_irradiance(
    record: &WeatherRecord,
    geom: &SolarGeometry,
    surface_azimuth: f64,
    tilt: f64,
    albedo: f64,
) -> f64 {
    let cos_tilt = tilt.to_radians().cos();
    let beam = if geom.sun_up() {
        record.dni * geom.cos_aoi(surface_azimuth, tilt).max(0.0)
    } else {
        0.0
    };
    let diffuse = record.dhi * (1.0 + cos_tilt) / 2.0;
    let ground = record.ghi * albedo * (1.0 - cos_tilt) / 2.0;
    (beam + diffuse + ground).max(0.0)
}

/// Absorbed and transmitted solar flux [W/m²] for irradiance `g`.
pub fn solar_fluxes(g: f64, alpha: f64, tau: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&tau) || alpha + tau > 1.0 {
        return Err(Error::Precondition(format!(
            "solar fractions alpha={alpha}, tau={tau} must lie in [0,1] with alpha+tau <= 1"
        )));
    }
    Ok((alpha * g, tau * g))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoaEntry {
    pub facade: Direction,
    pub tilt: f64,
    pub irradiance: f64,
}

/// Plane-of-array irradiance for every (facade, tilt) pair a building needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PoaIrradiance {
    pub entries: Vec<PoaEntry>,
}

impl PoaIrradiance {
    pub fn compute(
        record: &WeatherRecord,
        geom: &SolarGeometry,
        albedo: f64,
        orientations: &[(Direction, f64)],
    ) -> Self {
        let entries = orientations
            .iter()
            .map(|&(facade, tilt)| PoaEntry {
                facade,
                tilt,
                irradiance: poa_irradiance(record, geom, facade.azimuth_deg(), tilt, albedo),
            })
            .collect();
        PoaIrradiance { entries }
    }

    pub fn get(&self, facade: Direction, tilt: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|e| e.facade == facade && e.tilt == tilt)
            .map(|e| e.irradiance)
            .ok_or(Error::MissingOrientation {
                facade: facade.to_string(),
                tilt,
            })
    }
}

/// Distinct (facade, tilt) pairs over all envelope CVs, sorted.
pub fn required_orientations(grid: &BuildingGrid, mats: &MaterialField) -> Vec<(Direction, f64)> {
    let mut out: Vec<(Direction, f64)> = Vec::new();
    for ((r, c), kind) in grid.cv_type.indexed_iter() {
        if !kind.is_envelope() {
            continue;
        }
        let tilt = mats.tilt[[r, c]];
        for d in Direction::in_mask(grid.facade[[r, c]]) {
            if !out.iter().any(|&(od, ot)| od == d && ot == tilt) {
                out.push((d, tilt));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out
}
