//! Plot-data emission: x,y series as CSV plus axis metadata as JSON.
//! Figures are data first; rendering to SVG is optional (see `svg`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use lsgrad_core::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PlotSeries {
    pub fn new(name: &str, x: Vec<f64>, y: Vec<f64>) -> Self {
        assert_eq!(x.len(), y.len());
        PlotSeries {
            name: name.to_string(),
            x,
            y,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotData {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub series: Vec<PlotSeries>,
    /// Log-scale hint for the y axis.
    #[serde(default)]
    pub logy: bool,
}

/// Write `<stem>__<series>.csv` per series and `<stem>.meta.json` with the
/// axis metadata and file listing.
pub fn emit_plot_data(dir: &Path, stem: &str, plot: &PlotData) -> Result<()> {
    #[derive(Serialize)]
    struct Meta<'a> {
        title: &'a str,
        xlabel: &'a str,
        ylabel: &'a str,
        logy: bool,
        series: Vec<SeriesRef>,
    }
    #[derive(Serialize)]
    struct SeriesRef {
        name: String,
        file: String,
    }

    let mut refs = Vec::new();
    for s in &plot.series {
        let safe: String = s
            .name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        let file = format!("{stem}__{safe}.csv");
        let mut out = String::from("x,y\n");
        for (x, y) in s.x.iter().zip(&s.y) {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        std::fs::write(dir.join(&file), out)?;
        refs.push(SeriesRef {
            name: s.name.clone(),
            file,
        });
    }
    let meta = Meta {
        title: &plot.title,
        xlabel: &plot.xlabel,
        ylabel: &plot.ylabel,
        logy: plot.logy,
        series: refs,
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(dir.join(format!("{stem}.meta.json")), json)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emits_csv_and_meta() {
        let dir = tempfile::tempdir().unwrap();
        let plot = PlotData {
            title: "t".into(),
            xlabel: "x".into(),
            ylabel: "y".into(),
            logy: false,
            series: vec![PlotSeries::new("a b", vec![0.0, 1.0], vec![2.0, 3.0])],
        };
        emit_plot_data(dir.path(), "fig", &plot).unwrap();
        assert!(dir.path().join("fig__a_b.csv").exists());
        let meta = std::fs::read_to_string(dir.path().join("fig.meta.json")).unwrap();
        assert!(meta.contains("fig__a_b.csv"));
    }
}
