//! CSV persistence for genomes, labels, clusters, grids and sweeps.
//!
//! Reals are written in scientific notation with 17 significant digits, so
//! files re-read to the same bits.

use std::fs::{self, File};
use std::path::Path;

use crate::clustering::Labeling;
use crate::error::{Error, Result};
use crate::genome::ModelId;
use crate::regress::SweepResult;
use crate::sofm::SofmGrid;

pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        }
    } else {
        Error::parse(format!("{}: {e}", path.display()))
    }
}

/// Writes a header and pre-formatted rows.
pub fn write_rows<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()?;
    Ok(())
}

fn read_records(path: &Path, expected_header: &[String]) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.iter().ne(expected_header.iter().map(String::as_str)) {
        return Err(Error::parse(format!(
            "{}: unexpected header",
            path.display()
        )));
    }
    r.records()
        .map(|rec| rec.map_err(|e| csv_err(path, e)))
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::parse(format!("{}: invalid value '{raw}'", path.display())))
}

fn header(fixed: &[&str], prefix: &str, n: usize) -> Vec<String> {
    fixed
        .iter()
        .map(|s| s.to_string())
        .chain((0..n).map(|k| format!("{prefix}{k}")))
        .collect()
}

/// `id,k0,...,k131`, ids ascending.
pub fn write_genomes(path: &Path, genomes: &[Vec<f64>]) -> Result<()> {
    let dim = genomes.first().map_or(0, Vec::len);
    write_rows(
        path,
        &header(&["id"], "k", dim),
        genomes
            .iter()
            .enumerate()
            .map(|(i, g)| std::iter::once(i.to_string()).chain(g.iter().map(|&v| fmt_real(v)))),
    )
}

pub fn read_genomes(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>> {
    let recs = read_records(path, &header(&["id"], "k", dim))?;
    recs.iter()
        .enumerate()
        .map(|(i, rec)| {
            let id: usize = field(path, rec, 0)?;
            if id != i {
                return Err(Error::parse(format!(
                    "{}: ids must ascend from 0",
                    path.display()
                )));
            }
            (1..=dim).map(|k| field(path, rec, k)).collect()
        })
        .collect()
}

/// `id,oip`.
pub fn write_labels(path: &Path, oip: &[f64]) -> Result<()> {
    write_rows(
        path,
        &header(&["id", "oip"], "", 0),
        oip.iter()
            .enumerate()
            .map(|(i, &v)| [i.to_string(), fmt_real(v)]),
    )
}

pub fn read_labels(path: &Path) -> Result<Vec<(ModelId, f64)>> {
    let recs = read_records(path, &header(&["id", "oip"], "", 0))?;
    recs.iter()
        .map(|rec| {
            let id = ModelId::new(field(path, rec, 0)?)?;
            Ok((id, field(path, rec, 1)?))
        })
        .collect()
}

/// `id,cluster` with noise as −1.
pub fn write_clusters(path: &Path, labeling: &Labeling) -> Result<()> {
    write_rows(
        path,
        &header(&["id", "cluster"], "", 0),
        labeling
            .to_signed()
            .into_iter()
            .enumerate()
            .map(|(i, c)| [i.to_string(), c.to_string()]),
    )
}

pub fn read_clusters(path: &Path) -> Result<Labeling> {
    let recs = read_records(path, &header(&["id", "cluster"], "", 0))?;
    let ids = recs
        .iter()
        .map(|rec| field(path, rec, 1))
        .collect::<Result<Vec<i64>>>()?;
    Labeling::from_signed(&ids)
}

/// `row,col,w0,...`.
pub fn write_grid(path: &Path, grid: &SofmGrid) -> Result<()> {
    write_rows(
        path,
        &header(&["row", "col"], "w", grid.dim()),
        grid.weights().iter().enumerate().map(|(k, w)| {
            let (r, c) = grid.position(k);
            [r.to_string(), c.to_string()]
                .into_iter()
                .chain(w.iter().map(|&v| fmt_real(v)))
        }),
    )
}

pub fn read_grid(path: &Path, width: usize, height: usize, dim: usize) -> Result<SofmGrid> {
    let recs = read_records(path, &header(&["row", "col"], "w", dim))?;
    let mut weights = vec![Vec::new(); width * height];
    for rec in &recs {
        let (r, c): (usize, usize) = (field(path, rec, 0)?, field(path, rec, 1)?);
        if r >= height || c >= width {
            return Err(Error::parse(format!(
                "{}: neuron ({r},{c}) outside grid",
                path.display()
            )));
        }
        weights[r * width + c] = (2..2 + dim)
            .map(|k| field(path, rec, k))
            .collect::<Result<_>>()?;
    }
    SofmGrid::from_weights(width, height, weights)
}

/// `row,col,oip`.
pub fn write_neuron_oip(path: &Path, grid: &SofmGrid, values: &[f64]) -> Result<()> {
    write_rows(
        path,
        &header(&["row", "col", "oip"], "", 0),
        values.iter().enumerate().map(|(k, &v)| {
            let (r, c) = grid.position(k);
            [r.to_string(), c.to_string(), fmt_real(v)]
        }),
    )
}

/// `fraction,repeat,rmse`, one row per cell.
pub fn write_sweep(path: &Path, sweep: &SweepResult) -> Result<()> {
    write_rows(
        path,
        &header(&["fraction", "repeat", "rmse"], "", 0),
        sweep.rows.iter().flat_map(|row| {
            row.rmse_per_repeat
                .iter()
                .enumerate()
                .map(move |(r, &v)| [row.fraction.to_string(), r.to_string(), fmt_real(v)])
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn genomes_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let g = vec![vec![0.1, -2.5e-17, 3.0], vec![1.0 / 3.0, 0.0, -7.25]];
        write_genomes(&p, &g).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,k0,k1,k2\n0,"));
        assert_eq!(read_genomes(&p, 3).unwrap(), g);
        assert!(read_genomes(&p, 4).is_err());
    }

    #[test]
    fn clusters_serialize_noise_as_minus_one() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let l = Labeling::new(vec![Some(0), None, Some(1)]).unwrap();
        write_clusters(&p, &l).unwrap();
        assert_eq!(
            fs::read_to_string(&p).unwrap(),
            "id,cluster\n0,0\n1,-1\n2,1\n"
        );
        assert_eq!(read_clusters(&p).unwrap(), l);
    }

    #[test]
    fn grid_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.csv");
        let grid =
            SofmGrid::from_weights(2, 2, (0..4).map(|i| vec![i as f64 * 0.1, -1.0]).collect())
                .unwrap();
        write_grid(&p, &grid).unwrap();
        assert_eq!(read_grid(&p, 2, 2, 2).unwrap(), grid);
        assert!(read_grid(&p, 1, 2, 2).is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_labels(Path::new("/nonexistent/labels.csv")),
            Err(Error::Io(_))
        ));
    }

    proptest! {
        #[test]
        fn labels_round_trip(values in prop::collection::vec(-1e12f64..1e12, 1..50)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("l.csv");
            write_labels(&p, &values).unwrap();
            let back: Vec<f64> = read_labels(&p).unwrap().into_iter().map(|(_, v)| v).collect();
            prop_assert_eq!(back, values);
        }
    }
}
