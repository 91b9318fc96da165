//! Binary cache for pattern-function tables.
//!
//! Layout (little-endian): magic `CPSKTAB\0`, `u32` version, `u32` n_max,
//! `f64` s, `u64` grid length, grid points, then values and slopes as `f64`
//! in table order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use super::table::{build_kernel_table, pair_count, KernelTable};
use crate::error::{Error, Result};
use crate::num::Real;

const MAGIC: &[u8; 8] = b"CPSKTAB\0";
const VERSION: u32 = 1;

/// Hex sha256 of the grid points as little-endian `f64`.
pub fn grid_hash<T: Real>(grid: &[T]) -> String {
    let mut hasher = Sha256::new();
    for x in grid {
        hasher.update(x.as_f64().to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache file name for `(n_max, s, grid)`.
pub fn cache_file_name<T: Real>(n_max: usize, s: T, grid: &[T]) -> String {
    format!("kernel-n{n_max}-s{:016x}-{}.bin", s.as_f64().to_bits(), &grid_hash(grid)[..16])
}

pub fn write_table<T: Real, W: Write>(table: &KernelTable<T>, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(table.n_max() as u32)?;
    w.write_f64::<LittleEndian>(table.s().as_f64())?;
    w.write_u64::<LittleEndian>(table.x_grid().len() as u64)?;
    for part in [table.x_grid(), table.values(), table.slopes()] {
        for v in part {
            w.write_f64::<LittleEndian>(v.as_f64())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<T: Real, R: Read>(mut r: R) -> Result<KernelTable<T>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a kernel table file".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported kernel table version {version}")));
    }
    let n_max = r.read_u32::<LittleEndian>()? as usize;
    let s = T::lit(r.read_f64::<LittleEndian>()?);
    let nx = r.read_u64::<LittleEndian>()? as usize;
    let mut read_vec = |len: usize| -> Result<Vec<T>> {
        (0..len)
            .map(|_| Ok(T::lit(r.read_f64::<LittleEndian>()?)))
            .collect()
    };
    let grid = read_vec(nx)?;
    let values = read_vec(pair_count(n_max) * nx)?;
    let slopes = read_vec(pair_count(n_max) * nx)?;
    KernelTable::from_parts(n_max, s, grid, values, slopes)
}

pub fn save_table<T: Real>(table: &KernelTable<T>, path: &Path) -> Result<()> {
    write_table(table, BufWriter::new(File::create(path)?))
}

pub fn load_table<T: Real>(path: &Path) -> Result<KernelTable<T>> {
    read_table(BufReader::new(File::open(path)?))
}

/// Loads the table for `(n_max, s, grid)` from `dir`, building and storing it
/// on a miss. Returns the table and the cache file path.
pub fn load_or_build<T: Real>(dir: &Path, n_max: usize, grid: &[T], s: T) -> Result<(KernelTable<T>, PathBuf)> {
    let path = dir.join(cache_file_name(n_max, s, grid));
    if path.exists() {
        if let Ok(t) = load_table::<T>(&path) {
            if t.n_max() == n_max && t.s() == s && t.x_grid() == grid {
                return Ok((t, path));
            }
        }
    }
    let table = build_kernel_table(n_max, grid, s)?;
    std::fs::create_dir_all(dir)?;
    save_table(&table, &path)?;
    Ok((table, path))
}
