//! Daily climate CSV: `day,temp_c,rain_mm`.

use std::io::Read;

use serde::Deserialize;
use thiserror::Error;

use scls_core::aedes::{ClimateSchedule, RainLevel};

#[derive(Debug, Error)]
pub enum ClimateError {
    #[error("climate row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error("climate row {row}: expected day {expected}, found {found}")]
    Gap { row: usize, expected: i64, found: i64 },
}

#[derive(Debug, Deserialize)]
struct Row {
    day: i64,
    temp_c: f64,
    rain_mm: f64,
}

/// Rain below `light_mm` is ignored; `heavy_mm` and above is heavy.
pub fn classify_rain(rain_mm: f64, light_mm: f64, heavy_mm: f64) -> Option<RainLevel> {
    if rain_mm >= heavy_mm {
        Some(RainLevel::Heavy)
    } else if rain_mm >= light_mm {
        Some(RainLevel::Light)
    } else {
        None
    }
}

/// Reads consecutive days starting at day 0. Rainfalls are placed at midday.
/// Rows are numbered from 1 after the header.
pub fn ingest_climate<R: Read>(
    input: R,
    light_mm: f64,
    heavy_mm: f64,
    sunrise: f64,
    sunset: f64,
) -> Result<ClimateSchedule, ClimateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut schedule = ClimateSchedule {
        sunrise,
        sunset,
        ..ClimateSchedule::empty()
    };
    for (k, rec) in rdr.deserialize::<Row>().enumerate() {
        let row = k + 1;
        let r = rec.map_err(|e| ClimateError::Malformed {
            row,
            message: e.to_string(),
        })?;
        if r.day != k as i64 {
            return Err(ClimateError::Gap {
                row,
                expected: k as i64,
                found: r.day,
            });
        }
        if !r.temp_c.is_finite() {
            return Err(ClimateError::Malformed {
                row,
                message: "temp_c is not finite".into(),
            });
        }
        if !(r.rain_mm >= 0.0 && r.rain_mm.is_finite()) {
            return Err(ClimateError::Malformed {
                row,
                message: format!("rain_mm must be nonnegative, got {}", r.rain_mm),
            });
        }
        schedule.daily_temps.push(r.temp_c);
        if let Some(level) = classify_rain(r.rain_mm, light_mm, heavy_mm) {
            schedule.rainfalls.push((r.day as f64 + 0.5, level));
        }
    }
    Ok(schedule)
}

/// CSV text of a schedule, with 5 mm for light and 25 mm for heavy rain.
pub fn to_csv(schedule: &ClimateSchedule) -> String {
    let mut out = String::from("day,temp_c,rain_mm\n");
    for (day, t) in schedule.daily_temps.iter().enumerate() {
        let rain = schedule
            .rainfalls
            .iter()
            .find(|(time, _)| time.floor() as usize == day)
            .map_or(0.0, |(_, level)| match level {
                RainLevel::Light => 5.0,
                RainLevel::Heavy => 25.0,
            });
        out.push_str(&format!("{day},{t:?},{rain:?}\n"));
    }
    out
}
