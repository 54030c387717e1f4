//! CSV export: one file per `(quantity, r)` holding the index columns used by
//! that table and the value.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::report::Record;

const INDEX_COLUMNS: [&str; 8] = ["model", "eps", "rho", "r", "n", "i", "j", "s"];

fn cell(record: &Record, column: &str) -> Option<String> {
    match column {
        "model" => record.model.clone(),
        "eps" => record.eps.map(|v| v.text()),
        "rho" => record.rho.map(|v| v.text()),
        "r" => record.r.map(|v| v.to_string()),
        "n" => record.n.map(|v| v.to_string()),
        "i" => record.i.map(|v| v.to_string()),
        "j" => record.j.map(|v| v.to_string()),
        "s" => record.s.map(|v| v.to_string()),
        _ => None,
    }
}

fn file_name(quantity: &str, r: Option<usize>) -> String {
    match r {
        Some(r) => format!("{quantity}_r{r}.csv"),
        None => format!("{quantity}.csv"),
    }
}

/// Writes the tables into `dir` (created if missing) and returns the paths in
/// the order written.
pub fn write_tables(dir: &Path, records: &[Record]) -> csv::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut groups: BTreeMap<(String, Option<usize>), Vec<&Record>> = BTreeMap::new();
    for rec in records {
        groups.entry((rec.quantity.clone(), rec.r)).or_default().push(rec);
    }
    let mut written = Vec::with_capacity(groups.len());
    for ((quantity, r), rows) in groups {
        let columns: Vec<&str> = INDEX_COLUMNS
            .iter()
            .copied()
            .filter(|c| rows.iter().any(|rec| cell(rec, c).is_some()))
            .collect();
        let path = dir.join(file_name(&quantity, r));
        let mut out = csv::Writer::from_path(&path)?;
        out.write_record(columns.iter().copied().chain(["value"]))?;
        for rec in rows {
            let mut line: Vec<String> = columns.iter().map(|c| cell(rec, c).unwrap_or_default()).collect();
            line.push(rec.value.text());
            out.write_record(&line)?;
        }
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_quantity_and_order() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            Record::new("phi", 1.0).r(0).n(0).i(1).j(1),
            Record::new("phi", 2.0).r(1).n(0).i(1).j(1),
            Record::new("phi", 3.0).r(0).n(1).i(1).j(1),
            Record::new("root", 0.5).eps(0.1),
        ];
        let paths = write_tables(dir.path(), &records).unwrap();
        let names: Vec<String> = paths
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["phi_r0.csv", "phi_r1.csv", "root.csv"]);
        let text = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(
            text,
            "r,n,i,j,value\n0,0,1,1,1.0000000000000000e0\n0,1,1,1,3.0000000000000000e0\n"
        );
    }
}
