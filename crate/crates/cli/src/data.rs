//! Observation data files: CSV with header `time,y1,...,yp`.

use std::path::Path;

use mjp_core::inference::ObservationSeries;
use mjp_core::ObservationModel;

use crate::error::CliError;

pub fn read_series(path: &Path, obs: &ObservationModel) -> Result<ObservationSeries, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("time") {
        return Err(CliError::Usage(format!("{}: first column must be 'time'", path.display())));
    }
    if headers.len() - 1 != obs.dim() {
        return Err(CliError::Usage(format!(
            "{}: {} observation columns, observation model expects {}",
            path.display(),
            headers.len() - 1,
            obs.dim()
        )));
    }
    let mut times = Vec::new();
    let mut ys = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |k: usize| -> Result<f64, CliError> {
            record[k].parse::<f64>().map_err(|_| {
                CliError::Usage(format!("{}: line {}, column {}: not a number", path.display(), line + 2, k + 1))
            })
        };
        times.push(parse(0)?);
        ys.push((1..record.len()).map(parse).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(ObservationSeries::new(times, ys, obs.clone())?)
}

pub fn write_series(path: &Path, series: &ObservationSeries) -> Result<(), CliError> {
    let mut out = String::from("time");
    for k in 1..=series.obs.dim() {
        out.push_str(&format!(",y{k}"));
    }
    out.push('\n');
    for (t, y) in series.times.iter().zip(&series.ys) {
        out.push_str(&t.to_string());
        for v in y {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
