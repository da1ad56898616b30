//! CSV loading and writing of datasets.
//!
//! Two files describe a dataset:
//! - `embeddings.csv` with header `id,e_0,...,e_{k-1}`
//! - `annotations.csv` with header `id,class,x_min,y_min,x_max,y_max`
//!
//! Rows are joined by id; the annotations file defines the sample order and
//! the first-appearance order of class names defines the label mapping.
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write/load cycle reproduces the dataset bit-exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::dataset::{BoundingBox, Dataset, Sample};
use crate::error::{Error, Result};

fn parse_f64(field: &str, path: &Path, line: u64, what: &str) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("non-numeric {what} '{field}'"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite {what} '{field}'"),
        });
    }
    Ok(value)
}

fn read_embeddings(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(path, e))?.clone();
    if headers.len() < 2 || headers.get(0) != Some("id") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "expected header id,e_0,...,e_{k-1}".into(),
        });
    }
    for (i, name) in headers.iter().skip(1).enumerate() {
        if name != format!("e_{i}") {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("expected embedding column 'e_{i}', found '{name}'"),
            });
        }
    }
    let dim = headers.len() - 1;

    let mut map = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(0).unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: "empty id".into(),
            });
        }
        let mut embedding = Vec::with_capacity(dim);
        for field in record.iter().skip(1) {
            embedding.push(parse_f64(field, path, line, "embedding value")?);
        }
        if map.insert(id.clone(), embedding).is_some() {
            return Err(Error::Join(format!(
                "duplicate id '{id}' in embeddings file {}",
                path.display()
            )));
        }
    }
    Ok(map)
}

/// Load a dataset by joining the embeddings and annotations files on id.
pub fn load_dataset(
    embeddings_path: impl AsRef<Path>,
    annotations_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let emb_path = embeddings_path.as_ref();
    let ann_path = annotations_path.as_ref();
    let mut embeddings = read_embeddings(emb_path)?;

    let mut reader = csv::Reader::from_path(ann_path).map_err(|e| Error::csv(ann_path, e))?;
    let headers = reader.headers().map_err(|e| Error::csv(ann_path, e))?;
    let expected = ["id", "class", "x_min", "y_min", "x_max", "y_max"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: ann_path.to_path_buf(),
            line: 1,
            msg: format!("expected header {}", expected.join(",")),
        });
    }

    let mut class_names: Vec<String> = Vec::new();
    let mut samples: Vec<Sample> = Vec::new();
    let mut seen_ids: HashMap<String, ()> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::csv(ann_path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(0).unwrap_or_default().to_string();
        if seen_ids.insert(id.clone(), ()).is_some() {
            return Err(Error::Join(format!(
                "duplicate id '{id}' in annotations file {}",
                ann_path.display()
            )));
        }
        let class_name = record.get(1).unwrap_or_default().to_string();
        if class_name.is_empty() {
            return Err(Error::Parse {
                path: ann_path.to_path_buf(),
                line,
                msg: "empty class".into(),
            });
        }
        let class_label = match class_names.iter().position(|c| c == &class_name) {
            Some(idx) => idx + 1,
            None => {
                class_names.push(class_name);
                class_names.len()
            }
        };
        let x_min = parse_f64(record.get(2).unwrap_or_default(), ann_path, line, "x_min")?;
        let y_min = parse_f64(record.get(3).unwrap_or_default(), ann_path, line, "y_min")?;
        let x_max = parse_f64(record.get(4).unwrap_or_default(), ann_path, line, "x_max")?;
        let y_max = parse_f64(record.get(5).unwrap_or_default(), ann_path, line, "y_max")?;
        let bbox = BoundingBox::new(x_min, y_min, x_max, y_max).map_err(|e| {
            Error::Validation(format!("sample '{id}' (line {line}): {e}"))
        })?;

        let embedding = embeddings.remove(&id).ok_or_else(|| {
            Error::Join(format!(
                "id '{id}' from annotations is missing in embeddings file"
            ))
        })?;
        samples.push(Sample {
            id,
            embedding,
            class_label,
            bbox,
        });
    }

    if !embeddings.is_empty() {
        let mut leftover: Vec<&String> = embeddings.keys().collect();
        leftover.sort();
        return Err(Error::Join(format!(
            "id '{}' from embeddings is missing in annotations file",
            leftover[0]
        )));
    }

    Dataset::new(samples, class_names)
}

/// Write a dataset back to the two-file CSV layout.
pub fn write_dataset(
    dataset: &Dataset,
    embeddings_path: impl AsRef<Path>,
    annotations_path: impl AsRef<Path>,
) -> Result<()> {
    let emb_path = embeddings_path.as_ref();
    let file = File::create(emb_path).map_err(|e| Error::io(emb_path, e))?;
    let mut w = BufWriter::new(file);
    let dim = dataset.embedding_dim();
    let mut header = String::from("id");
    for i in 0..dim {
        header.push_str(&format!(",e_{i}"));
    }
    writeln!(w, "{header}").map_err(|e| Error::io(emb_path, e))?;
    for s in dataset.samples() {
        let mut row = s.id.clone();
        for v in &s.embedding {
            row.push_str(&format!(",{v}"));
        }
        writeln!(w, "{row}").map_err(|e| Error::io(emb_path, e))?;
    }
    w.flush().map_err(|e| Error::io(emb_path, e))?;

    let ann_path = annotations_path.as_ref();
    let file = File::create(ann_path).map_err(|e| Error::io(ann_path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "id,class,x_min,y_min,x_max,y_max").map_err(|e| Error::io(ann_path, e))?;
    for s in dataset.samples() {
        let name = &dataset.class_names()[s.class_label - 1];
        writeln!(
            w,
            "{},{},{},{},{},{}",
            s.id, name, s.bbox.x_min, s.bbox.y_min, s.bbox.x_max, s.bbox.y_max
        )
        .map_err(|e| Error::io(ann_path, e))?;
    }
    w.flush().map_err(|e| Error::io(ann_path, e))?;
    Ok(())
}
