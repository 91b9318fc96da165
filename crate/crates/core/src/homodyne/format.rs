//! Text format for homodyne datasets and CSV export of histograms.
//!
//! ```text
//! #version 1
//! #eta 1
//! #f_abs 0.7071067811865476
//! #seed 42
//! #rng <generator>
//! #state_tag <free text>
//! #phases 30
//! #phase 0 0.05235987755982988 10000
//! ...
//! 0,1.2345678901234567e-1
//! ```
//!
//! Each `#phase` line gives the index, LO phase and event count; data rows are
//! `phase_index,F` with 17 significant digits.

use std::io::{BufRead, Write};

use super::{Histogram, HomodyneDataset};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

pub fn write_dataset<W: Write>(ds: &HomodyneDataset, mut w: W) -> Result<()> {
    writeln!(w, "#version {FORMAT_VERSION}")?;
    writeln!(w, "#eta {}", ds.eta)?;
    writeln!(w, "#f_abs {}", ds.f_abs)?;
    writeln!(w, "#seed {}", ds.seed)?;
    writeln!(w, "#rng {}", ds.rng)?;
    writeln!(w, "#state_tag {}", ds.state_tag.replace('\n', " "))?;
    writeln!(w, "#phases {}", ds.n_phases())?;
    for (k, (p, n)) in ds.phases().iter().zip(ds.event_counts()).enumerate() {
        writeln!(w, "#phase {k} {p} {n}")?;
    }
    for k in 0..ds.n_phases() {
        for f in ds.events(k) {
            writeln!(w, "{k},{f:.16e}")?;
        }
    }
    w.flush()?;
    Ok(())
}

fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Format(format!("line {line}: {msg}"))
}

fn parse<T: std::str::FromStr>(s: &str, line: usize, what: &str) -> Result<T> {
    s.trim().parse().map_err(|_| bad(line, format!("cannot parse {what} from {s:?}")))
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<HomodyneDataset> {
    let mut version = None;
    let (mut eta, mut f_abs, mut seed) = (None, None, None);
    let (mut rng, mut tag) = (String::new(), String::new());
    let mut n_phases: Option<usize> = None;
    let mut phases: Vec<(f64, usize)> = Vec::new();
    let mut events: Vec<Vec<f64>> = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let (key, val) = rest.split_once(' ').unwrap_or((rest, ""));
            match key {
                "version" => {
                    let v: u32 = parse(val, no, "version")?;
                    if v != FORMAT_VERSION {
                        return Err(bad(no, format!("unsupported version {v}")));
                    }
                    version = Some(v);
                }
                "eta" => eta = Some(parse::<f64>(val, no, "eta")?),
                "f_abs" => f_abs = Some(parse::<f64>(val, no, "f_abs")?),
                "seed" => seed = Some(parse::<u64>(val, no, "seed")?),
                "rng" => rng = val.to_string(),
                "state_tag" => tag = val.to_string(),
                "phases" => {
                    let n: usize = parse(val, no, "phase count")?;
                    n_phases = Some(n);
                    events = vec![Vec::new(); n];
                }
                "phase" => {
                    let parts: Vec<&str> = val.split_whitespace().collect();
                    if parts.len() != 3 {
                        return Err(bad(no, "expected `#phase index value count`"));
                    }
                    let k: usize = parse(parts[0], no, "phase index")?;
                    if k != phases.len() {
                        return Err(bad(no, "phase lines out of order"));
                    }
                    phases.push((parse(parts[1], no, "phase")?, parse(parts[2], no, "event count")?));
                }
                _ => {}
            }
            continue;
        }
        let n = n_phases.ok_or_else(|| bad(no, "data row before #phases"))?;
        let (k, f) = line.split_once(',').ok_or_else(|| bad(no, "expected `phase_index,F`"))?;
        let k: usize = parse(k, no, "phase index")?;
        if k >= n {
            return Err(bad(no, format!("phase index {k} out of range")));
        }
        events[k].push(parse(f, no, "reading")?);
    }
    if version.is_none() {
        return Err(Error::Format("missing #version".into()));
    }
    let n = n_phases.ok_or_else(|| Error::Format("missing #phases".into()))?;
    if phases.len() != n {
        return Err(Error::Format(format!("#phases {n} but {} #phase lines", phases.len())));
    }
    for (k, ((_, count), ev)) in phases.iter().zip(&events).enumerate() {
        if *count != ev.len() {
            return Err(Error::Format(format!("phase {k}: header says {count} events, found {}", ev.len())));
        }
    }
    HomodyneDataset::new(
        phases.iter().map(|p| p.0).collect(),
        events,
        eta.ok_or_else(|| Error::Format("missing #eta".into()))?,
        f_abs.ok_or_else(|| Error::Format("missing #f_abs".into()))?,
        seed.ok_or_else(|| Error::Format("missing #seed".into()))?,
        rng,
        tag,
    )
}

/// CSV `bin_left,bin_right,count`.
pub fn write_histogram_csv<W: Write>(h: &Histogram, mut w: W) -> Result<()> {
    writeln!(w, "# phase = {}", h.phase)?;
    writeln!(w, "bin_left,bin_right,count")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e},{c}", h.bin_edges[i], h.bin_edges[i + 1])?;
    }
    w.flush()?;
    Ok(())
}
