//! Experiment grids and their tabular renderings.
//!
//! Accuracy is printed as a percentage with two decimals and loss with four
//! (`0.8712, 0.4768` → `87.12`, `0.4768`).

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Architecture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Three-way sentiment labels from the cluster mapping.
    Sentiment,
    /// Source category of each post.
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Sentiment => "sentiment",
            Task::Classification => "classification",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sentiment" => Ok(Task::Sentiment),
            "classification" => Ok(Task::Classification),
            other => Err(Error::config(
                "train",
                format!("unknown task `{other}` (expected sentiment or classification)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub architecture: Architecture,
    pub dropout_rate: f64,
    pub task: Task,
    pub train_acc: f64,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_loss: f64,
    pub test_acc: f64,
    pub test_loss: f64,
}

impl GridRow {
    fn key(&self) -> (Architecture, u64, Task) {
        (self.architecture, self.dropout_rate.to_bits(), self.task)
    }
}

fn describe(architecture: Architecture, dropout_rate: f64, task: Task) -> String {
    format!("({architecture}, dropout {dropout_rate}, {task})")
}

/// Results of a set of training runs, at most one per
/// (architecture, dropout, task).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub rows: Vec<GridRow>,
}

impl ExperimentGrid {
    pub fn push(&mut self, row: GridRow) -> Result<()> {
        if self.rows.iter().any(|r| r.key() == row.key()) {
            return Err(Error::Data(format!(
                "duplicate grid row {}",
                describe(row.architecture, row.dropout_rate, row.task)
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn get(&self, architecture: Architecture, dropout_rate: f64, task: Task) -> Option<&GridRow> {
        self.rows.iter().find(|r| {
            r.architecture == architecture && r.dropout_rate == dropout_rate && r.task == task
        })
    }

    fn require(&self, architecture: Architecture, dropout_rate: f64, task: Task) -> Result<&GridRow> {
        self.get(architecture, dropout_rate, task).ok_or_else(|| {
            Error::Data(format!(
                "experiment grid is missing {}",
                describe(architecture, dropout_rate, task)
            ))
        })
    }
}

pub fn percent(acc: f64) -> String {
    format!("{:.2}", acc * 100.0)
}

pub fn loss(value: f64) -> String {
    format!("{value:.4}")
}

/// A rendered table: header plus string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Column-aligned text with a rule under the header.
    pub fn to_ascii(&self) -> String {
        let n = self.header.len();
        let widths: Vec<usize> = (0..n)
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, &w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            format!("| {} |", parts.join(" | "))
        };
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn metric_cells(r: &GridRow) -> Vec<String> {
    vec![
        percent(r.train_acc),
        loss(r.train_loss),
        percent(r.val_acc),
        loss(r.val_loss),
        percent(r.test_acc),
        loss(r.test_loss),
    ]
}

const METRIC_HEADER: [&str; 6] = [
    "Train Acc (%)",
    "Train Loss",
    "Val Acc (%)",
    "Val Loss",
    "Test Acc (%)",
    "Test Loss",
];

/// One row per task for a single network configuration.
pub fn task_table(
    grid: &ExperimentGrid,
    architecture: Architecture,
    dropout_rate: f64,
    tasks: &[Task],
) -> Result<Table> {
    let mut header = vec!["Task".to_string()];
    header.extend(METRIC_HEADER.map(String::from));
    let rows = tasks
        .iter()
        .map(|&t| {
            let r = grid.require(architecture, dropout_rate, t)?;
            let mut cells = vec![capitalize(t.as_str())];
            cells.extend(metric_cells(r));
            Ok(cells)
        })
        .collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

/// One row per (architecture, dropout) for a single task.
pub fn regularization_table(
    grid: &ExperimentGrid,
    architectures: &[Architecture],
    dropout_rates: &[f64],
    task: Task,
) -> Result<Table> {
    let mut header = vec!["Model".to_string(), "Dropout (%)".to_string()];
    header.extend(METRIC_HEADER.map(String::from));
    let mut rows = Vec::new();
    for &a in architectures {
        for &d in dropout_rates {
            let r = grid.require(a, d, task)?;
            let mut cells = vec![model_name(a).to_string(), format!("{}", (d * 100.0).round())];
            cells.extend(metric_cells(r));
            rows.push(cells);
        }
    }
    Ok(Table { header, rows })
}

pub fn model_name(a: Architecture) -> &'static str {
    match a {
        Architecture::Dnn => "DNN",
        Architecture::Cnn1d => "1D-CNN",
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

const GRID_HEADER: &str =
    "architecture,dropout_rate,task,train_acc,train_loss,val_acc,val_loss,test_acc,test_loss";

/// Full-precision CSV of the grid; [`read_grid_csv`] restores it exactly.
pub fn grid_csv(grid: &ExperimentGrid) -> String {
    let mut out = format!("{GRID_HEADER}\n");
    for r in &grid.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.architecture,
            r.dropout_rate,
            r.task,
            r.train_acc,
            r.train_loss,
            r.val_acc,
            r.val_loss,
            r.test_acc,
            r.test_loss
        ));
    }
    out
}

pub fn read_grid_csv<R: BufRead>(reader: R, file: &str) -> Result<ExperimentGrid> {
    let mut lines = reader.lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == GRID_HEADER => {}
        _ => return Err(Error::parse(file, 1, format!("expected header `{GRID_HEADER}`"))),
    }
    let mut grid = ExperimentGrid::default();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 2;
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 9 {
            return Err(Error::parse(file, lineno, "expected 9 fields"));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(file, lineno, format!("bad number `{s}`")))
        };
        let wrap = |e: Error| Error::parse(file, lineno, e.to_string());
        grid.push(GridRow {
            architecture: f[0].parse().map_err(wrap)?,
            dropout_rate: num(f[1])?,
            task: f[2].parse().map_err(wrap)?,
            train_acc: num(f[3])?,
            train_loss: num(f[4])?,
            val_acc: num(f[5])?,
            val_loss: num(f[6])?,
            test_acc: num(f[7])?,
            test_loss: num(f[8])?,
        })
        .map_err(wrap)?;
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(architecture: Architecture, dropout_rate: f64, task: Task, acc: f64) -> GridRow {
        GridRow {
            architecture,
            dropout_rate,
            task,
            train_acc: acc,
            train_loss: 0.1234,
            val_acc: acc - 0.01,
            val_loss: 0.2,
            test_acc: 0.8712,
            test_loss: 0.4768,
        }
    }

    fn full_grid() -> ExperimentGrid {
        let mut g = ExperimentGrid::default();
        for a in Architecture::ALL {
            for d in [0.0, 0.3, 0.6] {
                g.push(row(a, d, Task::Sentiment, 0.95)).unwrap();
            }
        }
        g.push(row(Architecture::Dnn, 0.3, Task::Classification, 0.9)).unwrap();
        g
    }

    #[test]
    fn formats_match_the_published_style() {
        assert_eq!(percent(0.8712), "87.12");
        assert_eq!(loss(0.4768), "0.4768");
        assert_eq!(percent(0.7778), "77.78");
        let t = task_table(&full_grid(), Architecture::Dnn, 0.3, &[Task::Sentiment, Task::Classification])
            .unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].contains(&"87.12".to_string()));
        assert!(t.rows[0].contains(&"0.4768".to_string()));
        let ascii = t.to_ascii();
        assert!(ascii.contains("| Sentiment"));
        let widths: Vec<usize> = ascii.lines().map(str::len).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]), "{ascii}");
    }

    #[test]
    fn regularization_table_lists_every_combination() {
        let t = regularization_table(
            &full_grid(),
            &Architecture::ALL,
            &[0.0, 0.3, 0.6],
            Task::Sentiment,
        )
        .unwrap();
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[5][0], "1D-CNN");
        assert_eq!(t.rows[5][1], "60");
        assert_eq!(t.to_csv().lines().count(), 7);
    }

    #[test]
    fn missing_combination_is_named() {
        let mut g = full_grid();
        g.rows.retain(|r| !(r.architecture == Architecture::Cnn1d && r.dropout_rate == 0.6));
        let err = regularization_table(&g, &Architecture::ALL, &[0.0, 0.3, 0.6], Task::Sentiment)
            .unwrap_err();
        assert!(err.to_string().contains("(cnn1d, dropout 0.6, sentiment)"), "{err}");
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut g = full_grid();
        assert!(g.push(row(Architecture::Dnn, 0.0, Task::Sentiment, 0.5)).is_err());
    }

    #[test]
    fn grid_csv_round_trips() {
        let g = full_grid();
        let text = grid_csv(&g);
        assert_eq!(read_grid_csv(text.as_bytes(), "grid.csv").unwrap(), g);
    }
}
