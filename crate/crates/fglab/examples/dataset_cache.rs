//! Dataset plumbing: generate the synthetic federated dataset, round-trip
//! it through the JSON-lines cache, and ingest a hand-built IDX pair.
//!
//! ```bash
//! cargo run --release -p fglab --example dataset_cache
//! ```

use fglab::datagen::{generate_synthetic, load_idx, load_jsonl, partition_noniid, save_jsonl};
use fglab::numkit::RngStream;

fn main() -> Result<(), fglab::Error> {
    // Synthetic(1, 1): per-client softmax models and feature means.
    let ds = generate_synthetic(1.0, 1.0, 10, &mut RngStream::new(9, 0))?;
    println!(
        "synthetic: {} clients, input dim {}, {} classes",
        ds.n_clients(),
        ds.input_dim,
        ds.num_classes
    );
    let mut sizes: Vec<usize> = ds.shards.iter().map(|s| s.train.n() + s.test.n()).collect();
    sizes.sort_unstable();
    println!("shard sizes (sorted): {sizes:?}");

    let dir = std::env::temp_dir().join("fglab-dataset-cache-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let cache = dir.join("synthetic.jsonl");
    save_jsonl(&ds, &cache)?;
    let back = load_jsonl(&cache)?;
    assert_eq!(back.n_clients(), ds.n_clients());
    assert_eq!(back.shard(3).train.features(), ds.shard(3).train.features());
    println!("cache round-trip exact -> {}", cache.display());

    // IDX ingestion from a fixture written on the spot: four 3x3
    // images, big-endian magic numbers 2051 / 2049.
    let images = dir.join("images.idx");
    let labels = dir.join("labels.idx");
    let mut img_bytes = Vec::new();
    img_bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    img_bytes.extend_from_slice(&4u32.to_be_bytes());
    img_bytes.extend_from_slice(&3u32.to_be_bytes());
    img_bytes.extend_from_slice(&3u32.to_be_bytes());
    img_bytes.extend((0..36).map(|v| (v * 7) as u8));
    std::fs::write(&images, img_bytes).expect("write images");
    let mut lbl_bytes = Vec::new();
    lbl_bytes.extend_from_slice(&0x0000_0801u32.to_be_bytes());
    lbl_bytes.extend_from_slice(&4u32.to_be_bytes());
    lbl_bytes.extend_from_slice(&[0, 1, 0, 1]);
    std::fs::write(&labels, lbl_bytes).expect("write labels");

    let (features, labels) = load_idx(&images, &labels)?;
    println!(
        "idx: {} images of {} pixels, first row {:?}",
        features.nrows(),
        features.ncols(),
        features.row(0).iter().map(|v| (v * 255.0) as u8).collect::<Vec<_>>()
    );

    // Any (features, labels) pool can be partitioned.
    let federated = partition_noniid(&features, &labels, 2, 1, &mut RngStream::new(1, 0))?;
    println!(
        "partitioned the fixture into {} single-class clients",
        federated.n_clients()
    );
    Ok(())
}
