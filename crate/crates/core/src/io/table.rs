use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimator::FitTrace;
use crate::family::Family;
use crate::io::sample::Sample;
use crate::io::write_atomic;
use crate::model::Dataset;
use crate::sweep::SweepRow;
use crate::transport::TransportPlan;

/// Column holding ground-truth labels; never read as data.
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    /// Zero-based position in the file.
    Index(usize),
}

impl ColumnRef {
    /// A bare nonnegative integer is a position, anything else a header name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CsvOptions {
    /// `None` detects a header: the first row is one if any field is not a number.
    pub has_header: Option<bool>,
    /// Column of positive observation weights, normalized on load.
    pub weight_column: Option<ColumnRef>,
}

pub fn load_csv(path: &Path, family: &str, options: &CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, path, family, options)
}

/// Parses observations from `reader`; `source` is only used in error messages.
pub fn read_csv<R: Read>(reader: R, source: &Path, family: &str, options: &CsvOptions) -> Result<Dataset> {
    let csv_error = |row: usize, column: Option<String>, message: String| Error::Csv {
        path: source.to_path_buf(),
        row,
        column,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line() as usize);
            csv_error(row, None, e.to_string())
        })?;
        records.push(record);
    }
    let Some(first) = records.first() else {
        return Err(Error::InvalidDataset(format!("{}: no observations", source.display())));
    };
    let has_header = options
        .has_header
        .unwrap_or_else(|| first.iter().any(|f| f.parse::<f64>().is_err()));
    let width = first.len();
    let header: Option<Vec<String>> = has_header.then(|| first.iter().map(str::to_string).collect());
    let column_label = |c: usize| match &header {
        Some(names) => format!("{} ({})", names[c], c + 1),
        None => (c + 1).to_string(),
    };

    let weight_index = match &options.weight_column {
        None => None,
        Some(ColumnRef::Index(i)) if *i < width => Some(*i),
        Some(ColumnRef::Index(i)) => {
            return Err(csv_error(1, None, format!("weight column {i} is out of range for {width} columns")))
        }
        Some(ColumnRef::Name(name)) => match &header {
            Some(names) => Some(
                names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| csv_error(1, None, format!("no column named `{name}`")))?,
            ),
            None => return Err(csv_error(1, None, format!("weight column `{name}` needs a header row"))),
        },
    };
    let data_columns: Vec<usize> = (0..width)
        .filter(|&c| Some(c) != weight_index)
        .filter(|&c| header.as_ref().map_or(true, |names| names[c] != LABEL_COLUMN))
        .collect();
    if data_columns.is_empty() {
        return Err(csv_error(1, None, "no data columns".into()));
    }
    let d = data_columns.len();
    let family = Family::from_name(family, d).map_err(|err| match err {
        Error::DimensionMismatch { expected, .. } => csv_error(
            1,
            None,
            format!("family {family} expects {expected} data column(s), found {d}"),
        ),
        other => other,
    })?;

    let body = &records[usize::from(has_header)..];
    let mut values = Vec::with_capacity(body.len() * d);
    let mut weights = Vec::with_capacity(body.len());
    for record in body {
        let row = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(csv_error(
                row,
                None,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let parse = |c: usize| -> Result<f64> {
            let field = &record[c];
            let v: f64 = field
                .parse()
                .map_err(|_| csv_error(row, Some(column_label(c)), format!("`{field}` is not a number")))?;
            if !v.is_finite() {
                return Err(csv_error(row, Some(column_label(c)), format!("`{field}` is not finite")));
            }
            Ok(v)
        };
        for &c in &data_columns {
            let v = parse(c)?;
            // the Gaussian domain is every finite vector
            if family.dim() == 1 && !family.data_domain(&[v]) {
                return Err(csv_error(
                    row,
                    Some(column_label(c)),
                    format!("{v} is outside the {family} data domain ({})", domain_hint(family)),
                ));
            }
            values.push(v);
        }
        if let Some(w) = weight_index {
            let v = parse(w)?;
            if v <= 0.0 {
                return Err(csv_error(row, Some(column_label(w)), format!("weight {v} is not positive")));
            }
            weights.push(v);
        }
    }
    if body.is_empty() {
        return Err(Error::InvalidDataset(format!("{}: no observations", source.display())));
    }
    let points = ndarray::Array2::from_shape_vec((body.len(), d), values).expect("row-major buffer of n*d values");
    if weight_index.is_some() {
        Dataset::weighted(family, points, &weights)
    } else {
        Dataset::uniform(family, points)
    }
}

fn domain_hint(family: Family) -> &'static str {
    match family {
        Family::GaussianSpherical { .. } => "finite reals",
        Family::Poisson => "nonnegative integers",
        Family::Bernoulli => "0 or 1",
        Family::Exponential => "positive reals",
    }
}

/// 17 significant digits, which round-trips every finite `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_observation(family: Family, v: f64) -> String {
    if family.is_discrete() {
        format!("{v:.0}")
    } else {
        format_real(v)
    }
}

fn write_table(path: &Path, header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header).map_err(to_io)?;
    for row in rows {
        writer.write_record(&row).map_err(to_io)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

/// Columns `x1..xd`, plus `label` (zero-based component index) when requested.
pub fn write_samples(path: &Path, sample: &Sample, with_labels: bool) -> Result<()> {
    let family = sample.family;
    let mut header: Vec<String> = (1..=family.dim()).map(|c| format!("x{c}")).collect();
    if with_labels {
        header.push(LABEL_COLUMN.to_string());
    }
    let rows = sample
        .points
        .rows()
        .into_iter()
        .zip(&sample.labels)
        .map(|(row, label)| {
            let mut fields: Vec<String> = row.iter().map(|&v| format_observation(family, v)).collect();
            if with_labels {
                fields.push(label.to_string());
            }
            fields
        });
    write_table(path, header, rows)
}

/// Row `i` holds `upsilon_i, pi_i1, ..., pi_ik`.
pub fn write_plan(path: &Path, plan: &TransportPlan) -> Result<()> {
    let mut header = vec!["upsilon".to_string()];
    header.extend((1..=plan.k()).map(|j| format!("pi_{j}")));
    let (pi, upsilon) = (plan.pi(), plan.upsilon());
    let rows = upsilon.iter().zip(pi.rows()).map(|(&u, row)| {
        std::iter::once(u)
            .chain(row.iter().copied())
            .map(format_real)
            .collect::<Vec<_>>()
    });
    write_table(path, header, rows)
}

pub fn write_trace(path: &Path, trace: &FitTrace) -> Result<()> {
    let k = trace.records.first().map_or(0, |r| r.weights.len());
    let mut header: Vec<String> = ["iteration", "objective", "k_active", "mean_row_entropy"]
        .map(String::from)
        .to_vec();
    header.extend((1..=k).map(|j| format!("omega_{j}")));
    let rows = trace.records.iter().map(|r| {
        let mut fields = vec![
            r.iteration.to_string(),
            format_real(r.objective),
            r.k_active.to_string(),
            format_real(r.mean_row_entropy),
        ];
        fields.extend(r.weights.iter().map(|&w| format_real(w)));
        fields
    });
    write_table(path, header, rows)
}

/// Failed rows leave the numeric columns empty and carry a message.
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let k = rows.first().map_or(0, |r| r.weights.len());
    let mut header: Vec<String> = ["lambda", "status", "objective", "iterations", "mean_row_entropy"]
        .map(String::from)
        .to_vec();
    header.extend((1..=k).map(|j| format!("omega_{j}")));
    header.push("message".into());
    let rendered = rows.iter().map(|r| {
        let failed = r.status.is_failure();
        let mut fields = vec![
            format_real(r.lambda),
            r.status.name().to_string(),
            r.objective.map(format_real).unwrap_or_default(),
            if failed { String::new() } else { r.iterations.to_string() },
            r.mean_row_entropy.map(format_real).unwrap_or_default(),
        ];
        fields.extend(r.weights.iter().map(|&w| if failed { String::new() } else { format_real(w) }));
        fields.push(r.message.clone().unwrap_or_default());
        fields
    });
    write_table(path, header, rendered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn parse(text: &str, family: &str, options: &CsvOptions) -> Result<Dataset> {
        read_csv(text.as_bytes(), Path::new("data.csv"), family, options)
    }

    #[test]
    fn uniform_weights_without_weight_column() {
        let d = parse("1.5\n2\n-3\n", "gaussian_spherical", &CsvOptions::default()).unwrap();
        assert_eq!(d.upsilon().to_vec(), vec![1.0 / 3.0; 3]);
        assert_eq!(d.points(), array![[1.5], [2.0], [-3.0]]);
    }

    #[test]
    fn weight_column_is_normalized() {
        let text = "x,w\n0,2\n1,1\n5,1\n";
        let options = CsvOptions {
            weight_column: Some(ColumnRef::parse("w")),
            ..CsvOptions::default()
        };
        let d = parse(text, "gaussian_spherical", &options).unwrap();
        assert_eq!(d.upsilon().to_vec(), vec![0.5, 0.25, 0.25]);
        assert_eq!(d.dim(), 1);
        let by_index = CsvOptions {
            weight_column: Some(ColumnRef::parse("1")),
            ..CsvOptions::default()
        };
        assert_eq!(parse(text, "gaussian_spherical", &by_index).unwrap(), d);
    }

    #[test]
    fn poisson_rejects_fractional_counts_with_location() {
        let err = parse("count\n1\n2.5\n", "poisson", &CsvOptions::default()).unwrap_err();
        match err {
            Error::Csv { row, column, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column.as_deref(), Some("count (1)"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let opts = CsvOptions::default();
        assert!(matches!(
            parse("1,2\n3\n", "gaussian_spherical", &opts),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(matches!(
            parse("1,2\n3,inf\n", "gaussian_spherical", &opts),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(matches!(
            parse("x\n1\nabc\n", "gaussian_spherical", &opts),
            Err(Error::Csv { row: 3, .. })
        ));
        assert!(matches!(
            parse("x,y\n1,2\n", "poisson", &opts),
            Err(Error::Csv { .. })
        ));
        assert!(parse("x\n", "gaussian_spherical", &opts).is_err());
        assert!(matches!(parse("1\n", "gamma", &opts), Err(Error::UnknownFamily(_))));
    }

    #[test]
    fn label_column_is_ignored() {
        let d = parse("x1,x2,label\n0,1,0\n2,3,1\n", "gaussian_spherical", &CsvOptions::default()).unwrap();
        assert_eq!(d.points(), array![[0.0, 1.0], [2.0, 3.0]]);
    }

    #[test]
    fn written_reals_round_trip_exactly() {
        let values = [0.1, -1.0 / 3.0, 1e-300, 123456789.12345679, f64::MIN_POSITIVE, 5e-324];
        for v in values {
            assert_eq!(format_real(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
        let text: String = values.iter().map(|&v| format_real(v) + "\n").collect();
        let d = parse(&text, "gaussian_spherical", &CsvOptions::default()).unwrap();
        for (a, b) in d.points().iter().zip(values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
