//! Metrics CSV: `ebn0_db,block_index,detector,ber,…` with LF line endings
//! and 10 significant digits on floats.

use std::io::{BufRead, Write};

use super::MetricsRecord;
use crate::error::{Error, Result};

pub const HEADER: [&str; 10] = [
    "ebn0_db",
    "block_index",
    "detector",
    "ber",
    "achievable_rate_bits_per_use",
    "epochs_run",
    "used_previous_pilots",
    "pseudo_label_refreshes",
    "wallclock_s",
    "seed",
];

pub const AGGREGATE_HEADER: [&str; 4] = ["ebn0_db", "detector", "mean_ber", "mean_rate"];

/// `%.10g`-style formatting.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..10).contains(&exp) {
        let decimals = (9 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_records<W: Write>(records: &[MetricsRecord], w: &mut W) -> Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            format_float(r.ebn0_db),
            r.block_index,
            r.detector,
            format_float(r.ber),
            format_float(r.achievable_rate_bits_per_use),
            r.epochs_run,
            r.used_previous_pilots,
            r.pseudo_label_refreshes,
            format_float(r.wallclock_s),
            r.seed
        )?;
    }
    Ok(())
}

pub fn write_csv(records: &[MetricsRecord], path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

fn field<T: std::str::FromStr>(value: &str, name: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Framing(format!("line {line}: bad {name} value {value:?}")))
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Framing("missing CSV header".into()))??;
    if header != HEADER.join(",") {
        return Err(Error::Framing(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != HEADER.len() {
            return Err(Error::Framing(format!("line {n}: expected {} columns, got {}", HEADER.len(), cols.len())));
        }
        out.push(MetricsRecord {
            ebn0_db: field(cols[0], HEADER[0], n)?,
            block_index: field(cols[1], HEADER[1], n)?,
            detector: cols[2].parse().map_err(|_| Error::Framing(format!("line {n}: unknown detector {:?}", cols[2])))?,
            ber: field(cols[3], HEADER[3], n)?,
            achievable_rate_bits_per_use: field(cols[4], HEADER[4], n)?,
            epochs_run: field(cols[5], HEADER[5], n)?,
            used_previous_pilots: field(cols[6], HEADER[6], n)?,
            pseudo_label_refreshes: field(cols[7], HEADER[7], n)?,
            wallclock_s: field(cols[8], HEADER[8], n)?,
            seed: field(cols[9], HEADER[9], n)?,
        });
    }
    Ok(out)
}

/// Per-(Eb/N0, detector) means, in order of first appearance.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<(f64, crate::detectors::DetectorKind, f64, f64)> {
    let mut groups: Vec<(f64, crate::detectors::DetectorKind, f64, f64, usize)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|g| g.0 == r.ebn0_db && g.1 == r.detector) {
            Some(g) => {
                g.2 += r.ber;
                g.3 += r.achievable_rate_bits_per_use;
                g.4 += 1;
            }
            None => groups.push((r.ebn0_db, r.detector, r.ber, r.achievable_rate_bits_per_use, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(e, d, b, rate, n)| (e, d, b / n as f64, rate / n as f64))
        .collect()
}

pub fn write_aggregate<W: Write>(records: &[MetricsRecord], w: &mut W) -> Result<()> {
    writeln!(w, "{}", AGGREGATE_HEADER.join(","))?;
    for (e, d, b, rate) in aggregate(records) {
        writeln!(w, "{},{},{},{}", format_float(e), d, format_float(b), format_float(rate))?;
    }
    Ok(())
}
