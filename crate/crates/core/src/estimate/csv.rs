//! CSV export of phase distributions and density estimates.
//!
//! Metadata precede the column header as `# key = value` comment lines.

use std::io::{BufRead, Write};

use super::DensityEstimate;
use crate::error::{Error, Result};
use crate::fock::{PhaseDistribution, PhaseGrid};

/// Provenance written as header comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvMeta {
    pub entries: Vec<(String, String)>,
}

impl CsvMeta {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    }
}

/// `phi,p,stderr,flag_negative`; `stderr` is empty when absent.
pub fn write_distribution_csv<W: Write>(dist: &PhaseDistribution<f64>, meta: &CsvMeta, mut w: W) -> Result<()> {
    meta.write(&mut w)?;
    writeln!(w, "phi,p,stderr,flag_negative")?;
    let flags = dist.negative_flags();
    for (i, (phi, p)) in dist.grid.values().iter().zip(&dist.values).enumerate() {
        let se = dist.stderr.as_ref().map(|s| format!("{:.16e}", s[i])).unwrap_or_default();
        writeln!(w, "{phi:.16e},{p:.16e},{se},{}", u8::from(flags[i]))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a distribution written by [`write_distribution_csv`]; `epsilon` is
/// taken from the `epsilon` comment (0 when absent).
pub fn read_distribution_csv<R: BufRead>(r: R) -> Result<(PhaseDistribution<f64>, CsvMeta)> {
    let mut meta = CsvMeta::new();
    let (mut phis, mut vals, mut ses) = (Vec::new(), Vec::new(), Vec::new());
    let mut any_missing_se = false;
    let mut header_seen = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let bad = |msg: &str| Error::Format(format!("line {}: {msg}", i + 1));
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                meta.entries.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            if line.trim() != "phi,p,stderr,flag_negative" {
                return Err(bad("expected header `phi,p,stderr,flag_negative`"));
            }
            header_seen = true;
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("bad number {s:?}")));
        phis.push(num(cols[0])?);
        vals.push(num(cols[1])?);
        if cols[2].trim().is_empty() {
            any_missing_se = true;
            ses.push(0.0);
        } else {
            ses.push(num(cols[2])?);
        }
    }
    let epsilon = match meta.get("epsilon") {
        Some(v) => v.parse().map_err(|_| Error::Format(format!("bad epsilon {v:?}")))?,
        None => 0.0,
    };
    let dist = PhaseDistribution {
        grid: PhaseGrid::from_values(phis)?,
        values: vals,
        stderr: (!any_missing_se).then_some(ses),
        epsilon,
    };
    Ok((dist, meta))
}

/// `n,m,re,im,stderr` for every element.
pub fn write_density_csv<W: Write>(est: &DensityEstimate, meta: &CsvMeta, mut w: W) -> Result<()> {
    meta.write(&mut w)?;
    writeln!(w, "n,m,re,im,stderr")?;
    for n in 0..=est.n_max {
        for m in 0..=est.n_max {
            let z = est.get(n, m);
            writeln!(w, "{n},{m},{:.16e},{:.16e},{:.16e}", z.re, z.im, est.stderr(n, m))?;
        }
    }
    w.flush()?;
    Ok(())
}
