//! CSV emitters. Each file starts with `# key = value` provenance lines,
//! then a header row whose column names carry their units.

use std::io::Write;
use std::path::Path;

use super::CorrelationSeries;
use crate::dataset::write_atomic;
use crate::error::Result;

fn provenance_lines(w: &mut dyn Write, provenance: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in provenance {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

fn write_table(path: &Path, provenance: &[(String, String)], header: &[String], rows: Vec<Vec<String>>) -> Result<()> {
    write_atomic(path, |w| {
        provenance_lines(w, provenance)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for r in &rows {
            out.write_record(r)?;
        }
        out.flush()
    })
}

fn columns_table(path: &Path, provenance: &[(String, String)], columns: &[(&str, &[f64])], frame: bool) -> Result<()> {
    let len = columns.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    let mut header: Vec<String> = frame.then(|| "frame".to_string()).into_iter().collect();
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    let rows = (0..len)
        .map(|t| {
            let mut r: Vec<String> = frame.then(|| t.to_string()).into_iter().collect();
            r.extend(columns.iter().map(|(_, c)| c.get(t).map(|v| v.to_string()).unwrap_or_default()));
            r
        })
        .collect();
    write_table(path, provenance, &header, rows)
}

/// One row per frame: `frame` then one column per named series.
pub fn write_frame_series_csv(
    path: &Path,
    provenance: &[(String, String)],
    columns: &[(&str, &[f64])],
) -> Result<()> {
    columns_table(path, provenance, columns, true)
}

/// Named columns of equal length, no index column.
pub fn write_columns_csv(path: &Path, provenance: &[(String, String)], columns: &[(&str, &[f64])]) -> Result<()> {
    columns_table(path, provenance, columns, false)
}

/// One row per lag, one `mean`/`std` column pair per labelled series.
pub fn write_correlation_csv(
    path: &Path,
    provenance: &[(String, String)],
    series: &[(&str, &CorrelationSeries)],
) -> Result<()> {
    let mut header = vec!["lag_frames".to_string()];
    for (label, s) in series {
        header.push(format!("{label}_rho_mean_px{}_{}", s.pixel.0, s.pixel.1));
        header.push(format!("{label}_rho_std_n{}", s.ensemble_size));
    }
    let lags = series.iter().map(|(_, s)| s.lags.len()).max().unwrap_or(0);
    let rows = (0..lags)
        .map(|l| {
            let mut r = vec![l.to_string()];
            for (_, s) in series {
                r.push(s.mean.get(l).map(|v| v.to_string()).unwrap_or_default());
                r.push(s.std.get(l).map(|v| v.to_string()).unwrap_or_default());
            }
            r
        })
        .collect();
    write_table(path, provenance, &header, rows)
}

/// `name,value` rows for scalar results.
pub fn write_scalar_csv(path: &Path, provenance: &[(String, String)], values: &[(&str, f64)]) -> Result<()> {
    let header = vec!["quantity".to_string(), "value".to_string()];
    let rows = values.iter().map(|(n, v)| vec![n.to_string(), v.to_string()]).collect();
    write_table(path, provenance, &header, rows)
}
