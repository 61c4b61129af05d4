//! RTT sample ingestion: parse ping-derived sample CSV, aggregate samples into
//! a symmetric mean matrix, and read/write matrix CSV files.

use std::collections::HashMap;
use std::io::{Read, Write};

use thiserror::Error;

use crate::model::{Issue, RttMatrix, SiteCatalog, ValidationError};

/// One measured round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct RttSample {
    pub src: String,
    pub dst: String,
    pub timestamp: Option<f64>,
    pub rtt_ms: f64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("no samples for site pairs: {}", format_pairs(.0))]
    MissingPairs(Vec<(String, String)>),
    #[error("sample references unknown site {0:?}")]
    UnknownSite(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

const SAMPLE_HEADER: [&str; 4] = ["src", "dst", "timestamp", "rtt_ms"];

/// Reads sample CSV (`src,dst,timestamp,rtt_ms`). Rows keep their order.
pub fn parse_samples<R: Read>(input: R) -> Result<Vec<RttSample>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(SAMPLE_HEADER) {
        return Err(IngestError::Malformed {
            line: 1,
            message: format!("expected header {:?}", SAMPLE_HEADER.join(",")),
        });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| IngestError::Malformed { line, message };
        if record.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", record.len())));
        }
        let (src, dst) = (&record[0], &record[1]);
        if src.is_empty() || dst.is_empty() {
            return Err(bad("empty site name".into()));
        }
        if src == dst {
            return Err(bad(format!("source and destination are both {src:?}")));
        }
        let timestamp = match &record[2] {
            "" => None,
            t => Some(
                t.parse::<f64>()
                    .map_err(|_| bad(format!("bad timestamp {t:?}")))?,
            ),
        };
        let rtt_ms: f64 = record[3]
            .parse()
            .map_err(|_| bad(format!("bad rtt {:?}", &record[3])))?;
        if !(rtt_ms.is_finite() && rtt_ms > 0.0) {
            return Err(bad(format!("rtt must be finite and positive, got {rtt_ms}")));
        }
        samples.push(RttSample {
            src: src.to_owned(),
            dst: dst.to_owned(),
            timestamp,
            rtt_ms,
        });
    }
    Ok(samples)
}

/// How pooled samples for one site pair are reduced to a single RTT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Mean,
    /// Drops the highest and lowest 10% (rounded down) before averaging.
    TrimmedMean10,
}

/// Pools both directions of every site pair and reduces them to a symmetric
/// matrix. Fails listing every pair without samples.
pub fn aggregate(
    samples: &[RttSample],
    catalog: &SiteCatalog,
    how: Aggregation,
) -> Result<RttMatrix, IngestError> {
    let n = catalog.len();
    let mut pooled: HashMap<(usize, usize), Vec<f64>> = HashMap::new();
    for s in samples {
        let a = catalog
            .lookup(&s.src)
            .ok_or_else(|| IngestError::UnknownSite(s.src.clone()))?;
        let b = catalog
            .lookup(&s.dst)
            .ok_or_else(|| IngestError::UnknownSite(s.dst.clone()))?;
        let key = (a.0.min(b.0), a.0.max(b.0));
        pooled.entry(key).or_default().push(s.rtt_ms);
    }

    let mut missing = Vec::new();
    let mut m = RttMatrix::uniform(n, 0.0);
    for a in 0..n {
        for b in (a + 1)..n {
            match pooled.get_mut(&(a, b)) {
                Some(values) => m.set_symmetric(a, b, reduce(values, how)),
                None => missing.push((name(catalog, a), name(catalog, b))),
            }
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingPairs(missing));
    }
    Ok(m)
}

fn name(catalog: &SiteCatalog, i: usize) -> String {
    catalog.sites()[i].name.clone()
}

fn reduce(values: &mut [f64], how: Aggregation) -> f64 {
    // Sorted summation keeps the result independent of sample order.
    values.sort_unstable_by(f64::total_cmp);
    let cut = match how {
        Aggregation::Mean => 0,
        Aggregation::TrimmedMean10 => values.len() / 10,
    };
    let kept = &values[cut..values.len() - cut];
    kept.iter().sum::<f64>() / kept.len() as f64
}

/// Reads matrix CSV: header `site,<name1>,...`, then one row per site.
/// Entries asymmetric beyond [`crate::model::SYMMETRY_TOLERANCE`] are rejected.
pub fn load_matrix<R: Read>(input: R) -> Result<(SiteCatalog, RttMatrix), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("site") {
        return Err(IngestError::Malformed {
            line: 1,
            message: "first header column must be `site`".into(),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let catalog = SiteCatalog::from_names(names.iter().cloned())?;

    let mut rows = Vec::with_capacity(names.len());
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| IngestError::Malformed { line, message };
        if i >= names.len() {
            return Err(bad(format!("more rows than the {} header sites", names.len())));
        }
        if &record[0] != names[i].as_str() {
            return Err(bad(format!(
                "row {} is labelled {:?}, expected {:?}",
                i, &record[0], names[i]
            )));
        }
        if record.len() != names.len() + 1 {
            return Err(bad(format!(
                "expected {} values, found {}",
                names.len(),
                record.len() - 1
            )));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| bad(format!("bad value {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    if rows.len() != names.len() {
        return Err(IngestError::Malformed {
            line: rows.len() as u64 + 2,
            message: format!("found {} rows for {} sites", rows.len(), names.len()),
        });
    }
    let matrix = RttMatrix::new(rows)?;
    Ok((catalog, matrix))
}

/// Writes matrix CSV. Values carry at least six significant digits and
/// always parse back to the identical `f64`.
pub fn store_matrix<W: Write>(
    catalog: &SiteCatalog,
    matrix: &RttMatrix,
    output: W,
) -> Result<(), IngestError> {
    if catalog.len() != matrix.size() {
        return Err(IngestError::Invalid(
            Issue::MatrixCatalogMismatch {
                matrix: matrix.size(),
                catalog: catalog.len(),
            }
            .into(),
        ));
    }
    let mut writer = csv::Writer::from_writer(output);
    let mut header = vec!["site".to_owned()];
    header.extend(catalog.sites().iter().map(|s| s.name.clone()));
    writer.write_record(&header)?;
    for (site, row) in catalog.sites().iter().zip(matrix.rows()) {
        let mut record = vec![site.name.clone()];
        record.extend(row.iter().map(|&v| format_ms(v)));
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest round-trip representation, padded with trailing zeros to six
/// significant digits.
pub fn format_ms(v: f64) -> String {
    let short = format!("{v}");
    if v == 0.0 || !v.is_finite() {
        return short;
    }
    let significant = short
        .trim_start_matches('-')
        .chars()
        .filter(char::is_ascii_digit)
        .collect::<String>()
        .trim_start_matches('0')
        .len();
    if significant >= 6 || short.contains('e') {
        return short;
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let padded = format!("{v:.decimals$}");
    if padded.parse::<f64>() == Ok(v) {
        padded
    } else {
        short
    }
}
