//! CSV conventions: 17 significant digits, empty cells for missing values, and
//! explicit flag columns.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use shadowbench::shadows::{EstimateReport, Flag};

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

pub fn flag_name(flag: Option<Flag>) -> &'static str {
    match flag {
        None => "",
        Some(Flag::NonPositiveMoment) => "non_positive_moment",
        Some(Flag::EmptySector) => "empty_sector",
    }
}

/// `value, error, flag` cells of one report.
pub fn report_cells(r: &EstimateReport) -> [String; 3] {
    [if r.is_valid() { num(r.value) } else { String::new() }, opt(r.jackknife_error), flag_name(r.flag).to_string()]
}

pub fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

pub fn csv_writer(path: Option<&Path>) -> anyhow::Result<csv::Writer<Box<dyn Write>>> {
    Ok(csv::Writer::from_writer(sink(path)?))
}

/// Column name for charge sector `q` of a quantity.
pub fn sector_column(quantity: &str, q: i64) -> String {
    format!("{quantity}(q={q})")
}

/// Inverse of [`sector_column`].
pub fn parse_sector_column(name: &str) -> Option<(&str, i64)> {
    let (quantity, rest) = name.split_once("(q=")?;
    Some((quantity, rest.strip_suffix(')')?.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
        }
        assert_eq!(num(f64::NAN), "");
    }

    #[test]
    fn sector_columns() {
        assert_eq!(parse_sector_column(&sector_column("S2", -2)), Some(("S2", -2)));
        assert_eq!(parse_sector_column("S2"), None);
    }
}
