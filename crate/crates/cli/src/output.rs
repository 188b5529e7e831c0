use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

/// CSV table with a fixed header; values use `Display`, so output is
/// byte-stable for identical numbers.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[macro_export]
macro_rules! row {
    ($($v:expr),* $(,)?) => { vec![$($v.to_string()),*] };
}

/// SVG of the image of a square lattice under `map`.
pub fn deformed_grid_svg(lo: [f64; 2], hi: [f64; 2], lines: usize, map: impl Fn([f64; 2]) -> [f64; 2]) -> String {
    const SIZE: f64 = 600.0;
    const SAMPLES: usize = 64;
    let pad = 0.1 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let (x0, y0) = (lo[0] - pad, lo[1] - pad);
    let scale = SIZE / ((hi[0] - lo[0]).max(hi[1] - lo[1]) + 2.0 * pad);
    let to_px = |p: [f64; 2]| ((p[0] - x0) * scale, SIZE - (p[1] - y0) * scale);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let mut polyline = |pts: Vec<[f64; 2]>| {
        svg.push_str("<polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1\" points=\"");
        for p in pts {
            let (u, v) = to_px(map(p));
            let _ = write!(svg, "{u:.3},{v:.3} ");
        }
        svg.push_str("\"/>\n");
    };
    for i in 0..=lines {
        let s = i as f64 / lines as f64;
        let a = lo[0] + s * (hi[0] - lo[0]);
        let b = lo[1] + s * (hi[1] - lo[1]);
        let along = |j: usize| j as f64 / SAMPLES as f64;
        polyline((0..=SAMPLES).map(|j| [a, lo[1] + along(j) * (hi[1] - lo[1])]).collect());
        polyline((0..=SAMPLES).map(|j| [lo[0] + along(j) * (hi[0] - lo[0]), b]).collect());
    }
    svg.push_str("</svg>\n");
    svg
}
