//! Regenerates the CSV fixtures under `fixtures/` at the workspace root.
//!
//! `cargo run --example make_fixtures [out_dir]`

use std::path::PathBuf;

use pcdrift::fixtures::{one_factor, to_csv, to_prices, two_regime_default};

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    std::fs::create_dir_all(&out)?;

    let regime = two_regime_default();
    let s = &regime.series;
    std::fs::write(out.join("two_regime.csv"), to_csv(&s.labels, &s.data, None))?;

    let stable = one_factor(6, 500, 0.9, 7);
    let prices = to_prices(&stable, 100.0, 0.01);
    std::fs::write(out.join("one_factor.csv"), to_csv(&stable.labels, &prices, None))?;
    println!("wrote fixtures to {}", out.display());
    Ok(())
}
