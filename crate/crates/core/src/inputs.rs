//! CSV ingestion for exogenous series: gains/weather and prices.

use std::io::{Read, Write};

use crate::thermal::GainSchedule;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn csv_err(e: csv::Error) -> InputError {
    InputError::Csv {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

fn parse_field(rec: &csv::StringRecord, i: usize, name: &str, line: u64) -> Result<f64, InputError> {
    let raw = rec.get(i).unwrap_or("").trim();
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(InputError::Csv {
            line,
            message: format!("`{name}` is not a finite number: `{raw}`"),
        }),
    }
}

fn check_step(rec: &csv::StringRecord, expected: usize, line: u64) -> Result<(), InputError> {
    let raw = rec.get(0).unwrap_or("").trim();
    match raw.parse::<usize>() {
        Ok(s) if s == expected => Ok(()),
        Ok(s) => Err(InputError::Csv {
            line,
            message: format!("step {s} out of sequence, expected {expected}"),
        }),
        Err(_) => Err(InputError::Csv {
            line,
            message: format!("bad step `{raw}`"),
        }),
    }
}

/// Columns: `step, price`.
pub fn read_prices_csv(input: impl Read) -> Result<Vec<f64>, InputError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut prices = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(InputError::Csv {
                line,
                message: format!("expected 2 fields (step, price), found {}", rec.len()),
            });
        }
        check_step(&rec, prices.len(), line)?;
        prices.push(parse_field(&rec, 1, "price", line)?);
    }
    if prices.is_empty() {
        return Err(InputError::Empty);
    }
    Ok(prices)
}

pub fn write_prices_csv(prices: &[f64], out: impl Write) -> Result<(), InputError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "price"]).map_err(csv_err)?;
    for (t, p) in prices.iter().enumerate() {
        w.write_record([t.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `step, E_1..E_n, ambient, hw_draw`; `n` comes from the header.
pub fn read_gains_csv(input: impl Read, dt_hours: f64) -> Result<GainSchedule, InputError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < 4 {
        return Err(InputError::Csv {
            line: 1,
            message: format!("expected step, E_1..E_n, ambient, hw_draw; found {} columns", header.len()),
        });
    }
    let n = header.len() - 3;
    let mut g = GainSchedule {
        e: Vec::new(),
        hw_draw: Vec::new(),
        ambient: Vec::new(),
        dt_hours,
    };
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        check_step(&rec, g.e.len(), line)?;
        let e = (0..n).map(|i| parse_field(&rec, i + 1, &header[i + 1], line)).collect::<Result<Vec<_>, _>>()?;
        g.e.push(e);
        g.ambient.push(parse_field(&rec, n + 1, "ambient", line)?);
        let draw = parse_field(&rec, n + 2, "hw_draw", line)?;
        if draw < 0.0 {
            return Err(InputError::Csv {
                line,
                message: format!("hw_draw must be >= 0, got {draw}"),
            });
        }
        g.hw_draw.push(draw);
    }
    if g.e.is_empty() {
        return Err(InputError::Empty);
    }
    Ok(g)
}

pub fn write_gains_csv(g: &GainSchedule, out: impl Write) -> Result<(), InputError> {
    let mut w = csv::Writer::from_writer(out);
    let n = g.e.first().map_or(0, Vec::len);
    let mut header = vec!["step".to_string()];
    header.extend((1..=n).map(|i| format!("E_{i}")));
    header.push("ambient".into());
    header.push("hw_draw".into());
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..g.e.len() {
        let mut rec = vec![t.to_string()];
        rec.extend(g.e[t].iter().map(f64::to_string));
        rec.push(g.ambient[t].to_string());
        rec.push(g.hw_draw[t].to_string());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
