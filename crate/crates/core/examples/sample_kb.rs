//! Writes the bundled multi-type sample KB.
//!
//! `cargo run -p opinionkb-core --example sample_kb -- data/sample_kb.tsv [seed]`

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "sample_kb.tsv".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(2024);
    std::fs::write(&out, opinionkb::synthetic::sample_kb(seed))
}
