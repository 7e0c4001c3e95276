// SPDX-License-Identifier: Apache-2.0

use std::path::Path;

use crate::error::{Error, Result};
use crate::model::RtlDesign;

/// Reads a design file; the id is the file stem.
pub fn load_design(path: &Path) -> Result<RtlDesign> {
    let source =
        std::fs::read_to_string(path).map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Input(format!("{} has no usable file name", path.display())))?;
    RtlDesign::new(id, source).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
}

/// Every `.v` / `.sv` file directly inside `dir`, ordered by file name.
pub fn load_dir(dir: &Path) -> Result<Vec<RtlDesign>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Input(format!("cannot list {}: {e}", dir.display())))?;
    let mut paths = Vec::new();
    for e in entries {
        let p = e?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == "v" || x == "sv") {
            paths.push(p);
        }
    }
    paths.sort();
    paths.iter().map(|p| load_design(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_sorted_verilog_only() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.v"), "module b; endmodule").unwrap();
        std::fs::write(dir.path().join("a.sv"), "module a; endmodule").unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let got = load_dir(dir.path()).unwrap();
        let ids: Vec<_> = got.iter().map(|d| d.design_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(load_dir(&dir.path().join("missing")).is_err());
    }
}
