//! Line-based mesh dump: one cell per line, `id level x y side active`,
//! with `(x, y)` the lower-left corner and `active` 0 or 1.

use std::io::{self, BufRead, Write};

use amrlab_core::QuadMesh;

pub fn write_mesh<W: Write>(mut w: W, mesh: &QuadMesh) -> io::Result<()> {
    for c in mesh.cells() {
        writeln!(w, "{} {} {:e} {:e} {:e} {}", c.id, c.level, c.origin[0], c.origin[1], c.side, u8::from(c.active))?;
    }
    w.flush()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellLine {
    pub id: usize,
    pub level: u32,
    pub x: f64,
    pub y: f64,
    pub side: f64,
    pub active: bool,
}

pub fn read_mesh<R: BufRead>(r: R) -> io::Result<Vec<CellLine>> {
    let bad = |n: usize, msg: &str| io::Error::new(io::ErrorKind::InvalidData, format!("line {n}: {msg}"));
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 6 {
            return Err(bad(k + 1, "expected 6 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(k + 1, "bad number"));
        out.push(CellLine {
            id: f[0].parse().map_err(|_| bad(k + 1, "bad id"))?,
            level: f[1].parse().map_err(|_| bad(k + 1, "bad level"))?,
            x: num(f[2])?,
            y: num(f[3])?,
            side: num(f[4])?,
            active: match f[5] {
                "1" => true,
                "0" => false,
                _ => return Err(bad(k + 1, "active must be 0 or 1")),
            },
        });
    }
    Ok(out)
}
