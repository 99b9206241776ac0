//! On-disk artifacts: diagnostic CSVs, JSON manifests and reports, and binary
//! field checkpoints. Nothing written here depends on wall-clock time or on
//! hash-map iteration order.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use heatlab_core::{Constants, Field, Grid, GridSpec, Sample};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 over the dimension and the little-endian bytes of nodes and weights.
pub fn grid_hash(grid: &Grid) -> String {
    let mut h = Sha256::new();
    h.update((grid.dim() as u64).to_le_bytes());
    h.update((grid.len() as u64).to_le_bytes());
    for v in grid.nodes().iter().chain(grid.weights()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

pub fn write_samples_csv(path: &Path, samples: &[Sample]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for s in samples {
        w.serialize(s)?;
    }
    if samples.is_empty() {
        w.write_record([
            "t",
            "E",
            "kinetic",
            "potential",
            "l2_sq",
            "l4_4th",
            "linf",
            "K",
            "s_accum",
            "grad_l3_accum",
            "ut_accum",
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(
            rec?.iter()
                .map(|x| x.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(rows)
}

/// Rows of any serializable record type, header taken from the field names.
pub fn write_rows_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize, V: Serialize> {
    pub experiment: &'a str,
    pub config: &'a C,
    pub grid: GridSpec,
    pub grid_hash: String,
    pub constants: &'a Constants,
    pub verdicts: V,
}

pub fn write_manifest<C: Serialize, V: Serialize>(
    dir: &Path,
    experiment: &str,
    config: &C,
    grid: &Grid,
    constants: &Constants,
    verdicts: V,
) -> Result<()> {
    let m = Manifest {
        experiment,
        config,
        grid: grid.spec(),
        grid_hash: grid_hash(grid),
        constants,
        verdicts,
    };
    write_json(&dir.join("manifest.json"), &m)
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct FieldSidecar {
    pub grid_hash: String,
    pub time: f64,
    pub len: usize,
}

/// Writes `<stem>.bin` (values as little-endian f64) and `<stem>.json`.
pub fn write_field(dir: &Path, stem: &str, field: &Field) -> Result<()> {
    let bytes: Vec<u8> = field
        .values()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let side = FieldSidecar {
        grid_hash: grid_hash(field.grid()),
        time: field.time(),
        len: field.values().len(),
    };
    write_json(&dir.join(format!("{stem}.json")), &side)
}

pub fn read_field_values(dir: &Path, stem: &str) -> Result<(FieldSidecar, Vec<f64>)> {
    let side: FieldSidecar = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    anyhow::ensure!(
        bytes.len() == 8 * side.len,
        "checkpoint length does not match its sidecar"
    );
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks of eight bytes")))
        .collect();
    Ok((side, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use heatlab_core::{diagnostics::sample_field, Grading, RadialField, RadialGrid};
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Arc::new(RadialGrid::new(4, 10.0, n, Grading::Uniform).unwrap())
    }

    #[test]
    fn csv_header_order() {
        let dir = tempfile::tempdir().unwrap();
        let f = RadialField::from_fn(grid(32), |r| (-r * r).exp());
        let path = dir.path().join("run.csv");
        write_samples_csv(&path, &[sample_field(&f, true)]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,E,kinetic,potential,l2_sq,l4_4th,linf,K,s_accum,grad_l3_accum,ut_accum"
        );
        assert_eq!(read_samples_csv(&path).unwrap()[0].len(), 11);
    }

    #[test]
    fn field_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = RadialField::from_fn(grid(32), |r| (-r * r).exp()).with_time(0.25);
        write_field(dir.path(), "u", &f).unwrap();
        let (side, values) = read_field_values(dir.path(), "u").unwrap();
        assert_eq!(values, f.values());
        assert_eq!(side.time, 0.25);
        assert_eq!(side.grid_hash, grid_hash(f.grid()));
    }

    #[test]
    fn hash_distinguishes_grids() {
        assert_eq!(grid_hash(&grid(32)), grid_hash(&grid(32)));
        assert_ne!(grid_hash(&grid(32)), grid_hash(&grid(33)));
    }
}
