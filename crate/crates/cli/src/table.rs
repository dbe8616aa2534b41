use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    fn render(&self, out: &mut String) {
        match self {
            Cell::Float(x) => {
                let _ = write!(out, "{x:.16e}");
            }
            Cell::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Cell::Text(s) => out.push_str(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Float(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            Cell::Text(_) => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// A CSV file in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl CsvTable {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.to_string(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in {}", self.name);
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (k, c) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                c.render(&mut s);
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::write(dir.join(&self.name), self.render())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].as_f64()).collect()
    }

    /// The same table with `(name, value)` prepended to every row.
    pub fn keyed(&self, name: &str, value: f64) -> Self {
        let mut columns = vec![name.to_string()];
        columns.extend(self.columns.iter().cloned());
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![Cell::Float(value)];
                row.extend(r.iter().cloned());
                row
            })
            .collect();
        Self { name: self.name.clone(), columns, rows }
    }
}

/// Parse a CSV written by [`CsvTable::render`]; all cells become floats or text.
pub fn read_csv(name: &str, text: &str) -> Option<CsvTable> {
    let mut lines = text.lines();
    let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().map_or_else(|_| Cell::Text(c.to_string()), Cell::Float)).collect())
        .collect();
    Some(CsvTable { name: name.to_string(), columns, rows })
}
