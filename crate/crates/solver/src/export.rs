use std::io::{self, Read, Write};

use crate::{SolverError, Trajectory};

impl Trajectory {
    /// CSV with columns `t,l2,h1,l4` and optionally `a1..aN`.
    pub fn write_csv<W: Write>(&self, mut w: W, with_coeffs: bool) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.n_modes());
        write!(w, "t,l2,h1,l4")?;
        if with_coeffs {
            for k in 1..=n {
                write!(w, ",a{k}")?;
            }
        }
        writeln!(w)?;
        for ((t, d), s) in self.times.iter().zip(&self.diagnostics).zip(&self.states) {
            write!(w, "{t},{},{},{}", d.l2, d.h1, d.l4)?;
            if with_coeffs {
                for c in s.coeffs() {
                    write!(w, ",{c}")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Little-endian dump: `N: u64`, `steps: u64`, `dt: f64`, then `steps × N` coefficients row by row.
    pub fn write_binary<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |s| s.n_modes()) as u64;
        let dt = if self.times.len() > 1 { self.times[1] - self.times[0] } else { 0.0 };
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&(self.states.len() as u64).to_le_bytes())?;
        w.write_all(&dt.to_le_bytes())?;
        for s in &self.states {
            for c in s.coeffs() {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryDump {
    pub n_modes: usize,
    pub dt: f64,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_binary<R: Read>(mut r: R) -> Result<BinaryDump, SolverError> {
    let mut word = [0u8; 8];
    let mut next = |r: &mut R| -> io::Result<[u8; 8]> {
        r.read_exact(&mut word)?;
        Ok(word)
    };
    let n = u64::from_le_bytes(next(&mut r)?) as usize;
    let steps = u64::from_le_bytes(next(&mut r)?) as usize;
    let dt = f64::from_le_bytes(next(&mut r)?);
    let mut rows = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut row = Vec::with_capacity(n);
        for _ in 0..n {
            row.push(f64::from_le_bytes(next(&mut r)?));
        }
        rows.push(row);
    }
    Ok(BinaryDump { n_modes: n, dt, rows })
}
