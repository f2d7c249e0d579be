//! Regenerates the bundled synthetic treebank under `data/synthetic/`.
//!
//! cargo run -p treeaug --example gen_synthetic

use std::path::PathBuf;

use treeaug::conllu::serialize_conllu;
use treeaug::fixtures::synthetic_treebank;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/synthetic");
    std::fs::create_dir_all(&dir)?;
    for (name, len, seed) in [("train", 200, 1), ("dev", 50, 2), ("test", 50, 3)] {
        let bank = synthetic_treebank(len, seed, name);
        let path = dir.join(format!("{name}.conllu"));
        std::fs::write(&path, serialize_conllu(&bank)?)?;
        println!("wrote {} ({} sentences)", path.display(), bank.len());
    }
    Ok(())
}
