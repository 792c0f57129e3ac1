//! Plot-data emission: tidy long-format series from metrics files and
//! the EDC-vs-MADC scatter when a run recorded one.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::flcore::METRICS_HEADER;
use crate::numkit::pearson;

/// Files a `plot` invocation produced.
#[derive(Debug, Clone)]
pub struct PlotOutputs {
    pub series: PathBuf,
    pub scatter: Option<PathBuf>,
    pub pearson_r: Option<f64>,
}

/// Read each run directory's `metrics.csv` and write tidy long-format
/// series (`round,framework,metric,value`) next to the first input;
/// when a `similarity.csv` is present, also write the EDC-vs-MADC
/// scatter and its Pearson correlation.
pub fn emit_plot_data(inputs: &[PathBuf]) -> Result<PlotOutputs> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("no input directories".into()))?;

    let mut series = String::from("round,framework,metric,value\n");
    for dir in inputs {
        let path = dir.join("metrics.csv");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != METRICS_HEADER {
            return Err(Error::InvalidArgument(format!(
                "{}: unexpected metrics schema '{header}'",
                path.display()
            )));
        }
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::InvalidArgument(format!(
                    "{}: malformed row '{line}'",
                    path.display()
                )));
            }
            let (round, framework) = (fields[0], fields[1]);
            for (metric, value) in [
                ("weighted_accuracy", fields[2]),
                ("mean_train_loss", fields[3]),
                ("discrepancy", fields[4]),
            ] {
                series.push_str(&format!("{round},{framework},{metric},{value}\n"));
            }
        }
    }
    let series_path = first.join("series.csv");
    std::fs::write(&series_path, &series)
        .map_err(|e| Error::io(series_path.display().to_string(), e))?;

    // Scatter from the first input that carries similarity data.
    let mut scatter = None;
    let mut pearson_r = None;
    for dir in inputs {
        let sim_path = dir.join("similarity.csv");
        if !sim_path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&sim_path)
            .map_err(|e| Error::io(sim_path.display().to_string(), e))?;
        let mut edc = Vec::new();
        let mut madc = Vec::new();
        let mut out = String::from("edc,madc\n");
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::InvalidArgument(format!(
                    "{}: malformed row '{line}'",
                    sim_path.display()
                )));
            }
            let e: f64 = fields[2]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad edc value '{}'", fields[2])))?;
            let m: f64 = fields[3]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad madc value '{}'", fields[3])))?;
            out.push_str(&format!("{e},{m}\n"));
            edc.push(e);
            madc.push(m);
        }
        let r = pearson(&edc, &madc)?;
        let scatter_path = first.join("edc_madc_scatter.csv");
        std::fs::write(&scatter_path, &out)
            .map_err(|e| Error::io(scatter_path.display().to_string(), e))?;
        let summary_path = first.join("plot_summary.json");
        std::fs::write(
            &summary_path,
            format!("{{\"pairs\": {}, \"pearson_r\": {r}}}\n", edc.len()),
        )
        .map_err(|e| Error::io(summary_path.display().to_string(), e))?;
        scatter = Some(scatter_path);
        pearson_r = Some(r);
        break;
    }

    Ok(PlotOutputs {
        series: series_path,
        scatter,
        pearson_r,
    })
}
