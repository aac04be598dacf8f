//! Writes every built-in scenario as JSON, for editing and for `mpcom --scenario FILE`.
//!
//! Usage: cargo run -p mpcom --example export_scenarios [DIR]   (default: scenarios)

use std::fs;
use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "scenarios".into()));
    fs::create_dir_all(&dir)?;
    for scenario in mpcom::scenarios::builtin() {
        let path = dir.join(format!("{}.json", scenario.name));
        let mut text = serde_json::to_string_pretty(&scenario).expect("scenario serializes");
        text.push('\n');
        fs::write(&path, text)?;
        println!("{}", path.display());
    }
    Ok(())
}
