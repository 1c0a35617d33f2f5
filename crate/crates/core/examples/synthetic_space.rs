//! Writes a 60-item, 4-category synthetic space (vocabulary, embeddings and a
//! run config) so the pipeline can be tried without an embedding service.
//!
//!     cargo run --example synthetic_space -- out/demo
//!     forage simulate --config out/demo/run.cfg

#[path = "../tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/demo".into()));
    let (rows, cats) = common::ArcSpace::default().build();
    let (vocab, emb) = common::write_space(&dir, &rows, &cats);
    let cfg = dir.join("run.cfg");
    fs::write(
        &cfg,
        "vocabulary = vocab.csv\nembeddings = embeddings.jsonl\nsampler = both\noutput = run\nformat = csv\n",
    )
    .expect("write run.cfg");
    for p in [vocab, emb, cfg] {
        println!("{}", p.display());
    }
}
