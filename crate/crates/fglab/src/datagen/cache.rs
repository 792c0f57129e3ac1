//! JSON-lines dataset cache.
//!
//! Line 1 is a metadata header; every following line is one shard with
//! its id and the train/test feature and label arrays.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClientShard, FederatedDataset, Provenance};
use crate::error::{Error, Result};
use crate::models::Batch;
use crate::numkit::DenseMatrix;

#[derive(Serialize, Deserialize)]
struct Header {
    num_classes: usize,
    input_dim: usize,
    provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct BatchRecord {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct ShardRecord {
    client_id: usize,
    train: BatchRecord,
    test: BatchRecord,
}

fn to_record(b: &Batch) -> BatchRecord {
    BatchRecord {
        features: (0..b.n()).map(|i| b.feature_row(i).to_vec()).collect(),
        labels: b.labels().to_vec(),
    }
}

fn from_record(r: BatchRecord) -> Result<Batch> {
    Batch::new(DenseMatrix::from_rows(&r.features)?, r.labels)
}

pub fn save_jsonl(ds: &FederatedDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::create(path).map_err(|e| Error::io(&name, e))?;
    let mut w = BufWriter::new(file);
    let header = Header {
        num_classes: ds.num_classes,
        input_dim: ds.input_dim,
        provenance: ds.provenance,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(|e| Error::io(&name, e))?;
    for shard in &ds.shards {
        let record = ShardRecord {
            client_id: shard.client_id,
            train: to_record(&shard.train),
            test: to_record(&shard.test),
        };
        serde_json::to_writer(&mut w, &record)?;
        w.write_all(b"\n").map_err(|e| Error::io(&name, e))?;
    }
    w.flush().map_err(|e| Error::io(&name, e))
}

pub fn load_jsonl(path: impl AsRef<Path>) -> Result<FederatedDataset> {
    let path = path.as_ref();
    let name = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&name, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument(format!("{name}: empty dataset cache")))?
        .map_err(|e| Error::io(&name, e))?;
    let header: Header = serde_json::from_str(&header_line)?;
    let mut shards = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(&name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ShardRecord = serde_json::from_str(&line)?;
        shards.push(ClientShard {
            client_id: record.client_id,
            train: from_record(record.train)?,
            test: from_record(record.test)?,
        });
    }
    FederatedDataset::new(shards, header.num_classes, header.input_dim, header.provenance)
}
