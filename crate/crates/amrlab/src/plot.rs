//! Plot-ready data: two-column whitespace files plus a manifest listing
//! what each file holds.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct Series {
    /// File stem; written as `<name>.dat`.
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), x_label: x_label.into(), y_label: y_label.into(), points }
    }
}

/// Writes every series and `manifest.txt` into `dir`; returns the paths.
pub fn write_plots(dir: &Path, series: &[Series]) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = String::from("# file x y points\n");
    let mut paths = Vec::new();
    for s in series {
        let file = format!("{}.dat", s.name);
        let mut body = format!("# {} {}\n", s.x_label, s.y_label);
        for (x, y) in &s.points {
            let _ = writeln!(body, "{x:e} {y:e}");
        }
        let path = dir.join(&file);
        std::fs::write(&path, body)?;
        let _ = writeln!(manifest, "{file} {} {} {}", s.x_label, s.y_label, s.points.len());
        paths.push(path);
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest)?;
    paths.push(path);
    Ok(paths)
}
