//! Text embedding format: a `node_count dim` header, then one
//! `label v1 ... vd` line per node in dense-id order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use gridwalk::trainer::EmbeddingMatrix;

pub fn write_embeddings(
    matrix: &EmbeddingMatrix,
    labels: &[String],
    path: &Path,
    normalize: bool,
) -> anyhow::Result<()> {
    assert_eq!(matrix.rows(), labels.len());
    let mut matrix = matrix.clone();
    if normalize {
        matrix.normalize_rows();
    }

    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{} {}", matrix.rows(), matrix.dim)?;
    for (i, label) in labels.iter().enumerate() {
        if label.chars().any(char::is_whitespace) {
            bail!("node label {label:?} contains whitespace and cannot be written");
        }
        write!(w, "{label}")?;
        for v in matrix.row(i) {
            write!(w, " {v:.6}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> anyhow::Result<(Vec<String>, EmbeddingMatrix)> {
    let file = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = BufReader::new(file).lines();

    let header = lines.next().context("empty embeddings file")??;
    let mut parts = header.split_whitespace();
    let (Some(rows), Some(dim), None) = (parts.next(), parts.next(), parts.next()) else {
        bail!("{}: header must be \"node_count dim\"", path.display());
    };
    let rows: usize = rows.parse().context("bad node count in header")?;
    let dim: usize = dim.parse().context("bad dimension in header")?;

    let mut labels = Vec::with_capacity(rows);
    let mut matrix = EmbeddingMatrix::zeros(rows, dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if i >= rows {
            bail!("{}: more rows than the header declares", path.display());
        }
        let mut cols = line.split_whitespace();
        let label = cols
            .next()
            .with_context(|| format!("row {} is empty", i + 2))?;
        labels.push(label.to_string());
        let row = matrix.row_mut(i);
        for (k, slot) in row.iter_mut().enumerate() {
            let tok = cols.next().with_context(|| {
                format!(
                    "{}:{}: expected {dim} values, found {k}",
                    path.display(),
                    i + 2
                )
            })?;
            *slot = tok.parse().with_context(|| {
                format!(
                    "{}:{}: bad value {tok:?} (a label with spaces?)",
                    path.display(),
                    i + 2
                )
            })?;
        }
        if cols.next().is_some() {
            bail!(
                "{}:{}: extra columns after {dim} values (a label with spaces?)",
                path.display(),
                i + 2
            );
        }
    }
    if labels.len() != rows {
        bail!(
            "{}: header declares {rows} rows, found {}",
            path.display(),
            labels.len()
        );
    }
    Ok((labels, matrix))
}

/// Writes the label-to-dense-id sidecar.
pub fn write_label_map(labels: &[String], path: &Path) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for (id, label) in labels.iter().enumerate() {
        writeln!(w, "{label}\t{id}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_within_1e5() {
        let mut m = EmbeddingMatrix::zeros(7, 5);
        for (k, v) in m.data.iter_mut().enumerate() {
            *v = ((k * 7919 % 4001) as f32 / 1000.5) - 2.0;
        }
        let labels: Vec<String> = (0..7).map(|i| format!("n{i}")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        write_embeddings(&m, &labels, &path, false).unwrap();

        let (rl, rm) = read_embeddings(&path).unwrap();
        assert_eq!(rl, labels);
        assert_eq!(rm.dim, 5);
        for (a, b) in m.data.iter().zip(&rm.data) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn two_nodes_two_dims_is_three_lines() {
        let m = EmbeddingMatrix::zeros(2, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        write_embeddings(&m, &["a".into(), "b".into()], &path, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next(), Some("2 2"));
    }

    #[test]
    fn whitespace_labels_are_rejected() {
        let m = EmbeddingMatrix::zeros(1, 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let err = write_embeddings(&m, &["has space".into()], &path, false).unwrap_err();
        assert!(err.to_string().contains("whitespace"));

        // and a smuggled one fails cleanly at load time
        std::fs::write(&path, "1 2\nbad label 0.5 0.5\n").unwrap();
        let err = read_embeddings(&path).unwrap_err();
        assert!(format!("{err:#}").contains("label with spaces"), "{err:#}");
    }

    #[test]
    fn normalized_rows_have_unit_norm() {
        let mut m = EmbeddingMatrix::zeros(2, 4);
        m.row_mut(0).copy_from_slice(&[3.0, 4.0, 0.0, 0.0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        write_embeddings(&m, &["a".into(), "b".into()], &path, true).unwrap();
        let (_, rm) = read_embeddings(&path).unwrap();
        let norm: f32 = rm.row(0).iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
        // zero rows stay zero
        assert!(rm.row(1).iter().all(|&x| x == 0.0));
    }
}
