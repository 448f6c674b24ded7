//! Result rows and CSV emission.

use std::io::Write;

use serde::Serialize;

pub const CSV_HEADER: [&str; 7] = [
    "seed",
    "sigma2",
    "m_count",
    "outer_iter",
    "fisher",
    "crlb",
    "wall_time_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub seed: u64,
    pub sigma2: f64,
    pub m_count: usize,
    /// `None` for the final row of a sweep cell.
    pub outer_iter: Option<usize>,
    pub fisher: f64,
    pub crlb: f64,
    pub wall_time_ms: Option<f64>,
}

impl ResultRow {
    fn fields(&self) -> [String; 7] {
        [
            self.seed.to_string(),
            float(self.sigma2),
            self.m_count.to_string(),
            self.outer_iter
                .map_or_else(|| "final".to_string(), |i| i.to_string()),
            float(self.fisher),
            float(self.crlb),
            self.wall_time_ms.map(float).unwrap_or_default(),
        ]
    }
}

// Shortest representation that parses back to the same f64.
fn float(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}
