//! Regenerates the checked-in fixture case files (`fixtures/*.json`).
//!
//! Usage: `gridflow-fixtures [output-dir]` (default `fixtures`). The test
//! suite asserts the checked-in files match this writer byte for byte.

use gridflow_cli::bundles::bundled_cases;
use gridflow_cli::schema::write_case;
use std::process::ExitCode;

fn main() -> ExitCode {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".to_string());
    let dir = std::path::Path::new(&dir);
    if let Err(err) = std::fs::create_dir_all(dir) {
        eprintln!("gridflow-fixtures: cannot create {}: {err}", dir.display());
        return ExitCode::from(3);
    }
    for (name, case) in bundled_cases() {
        let text = match write_case(&case) {
            Ok(text) => text,
            Err(err) => {
                eprintln!("gridflow-fixtures: cannot serialize {name}: {err}");
                return ExitCode::from(3);
            }
        };
        let path = dir.join(name);
        if let Err(err) = std::fs::write(&path, text) {
            eprintln!("gridflow-fixtures: cannot write {}: {err}", path.display());
            return ExitCode::from(3);
        }
        println!("wrote {}", path.display());
    }
    ExitCode::SUCCESS
}
