use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{rank_runs, ExperimentError, RunRecord};
use crate::surrogates::ModelKind;
use crate::training::EpochRecord;

/// Index file written next to the per-run curves.
pub const CURVE_INDEX: &str = "index.csv";
const CURVE_HEADER: &str = "epoch,train_mse,val_mse,seconds";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveIndexEntry {
    pub key: String,
    pub kind: ModelKind,
    pub file: PathBuf,
    pub diverged: bool,
    /// First row of the architecture's ranking.
    pub best: bool,
}

/// Writes `<key>.csv` per record and an index that flags the best run of
/// each architecture. Floats are written in shortest round-trip form.
pub fn export_curves(
    records: &[RunRecord],
    out_dir: impl AsRef<Path>,
) -> Result<Vec<CurveIndexEntry>, ExperimentError> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let best: Vec<String> = rank_runs(records, 1)
        .into_iter()
        .filter_map(|t| t.runs.into_iter().next().map(|r| r.key))
        .collect();
    let mut index = String::from("key,model,learning_rate,batch_size,training_size,seed,diverged,best,file\n");
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let file = PathBuf::from(format!("{}.csv", r.key));
        let mut csv = format!("{CURVE_HEADER}\n");
        for e in &r.history {
            csv.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_mse, e.val_mse, e.seconds));
        }
        fs::write(out_dir.join(&file), csv)?;
        let entry = CurveIndexEntry {
            key: r.key.clone(),
            kind: r.kind(),
            file,
            diverged: r.diverged,
            best: best.contains(&r.key),
        };
        index.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            entry.key,
            entry.kind.name(),
            r.cell.learning_rate,
            r.cell.batch_size,
            r.cell.training_size,
            r.cell.seed,
            entry.diverged,
            entry.best,
            entry.file.display()
        ));
        entries.push(entry);
    }
    fs::write(out_dir.join(CURVE_INDEX), index)?;
    Ok(entries)
}

/// Parses a curve written by [`export_curves`].
pub fn read_curve(path: impl AsRef<Path>) -> Result<Vec<EpochRecord>, ExperimentError> {
    let path = path.as_ref();
    let bad = |message: String| ExperimentError::Records {
        path: path.display().to_string(),
        message,
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(bad("missing curve header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |k: usize| -> Result<f64, ExperimentError> {
                f.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad(format!("line {}: bad field {k}", i + 2)))
            };
            if f.len() != 4 {
                return Err(bad(format!("line {}: expected 4 fields", i + 2)));
            }
            Ok(EpochRecord {
                epoch: f[0].parse().map_err(|_| bad(format!("line {}: bad epoch", i + 2)))?,
                train_mse: num(1)?,
                val_mse: num(2)?,
                seconds: num(3)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::analysis::tests::record;

    fn with_history(mut r: RunRecord, seed: u64) -> RunRecord {
        r.history = (1..=4)
            .map(|e| EpochRecord {
                epoch: e,
                train_mse: 1.0 / (e as f64 + seed as f64 * 0.1),
                val_mse: 0.3 / e as f64 + 1e-17,
                seconds: 0.1 * e as f64,
            })
            .collect();
        r
    }

    #[test]
    fn three_runs_three_curves_and_an_index() {
        let recs = vec![
            with_history(record(ModelKind::Mlp, 500, 32, 1e-3, 0, Some([1.0, 0.2, 0.3])), 0),
            with_history(record(ModelKind::Mlp, 500, 32, 1e-3, 1, Some([1.0, 0.1, 0.3])), 1),
            with_history(record(ModelKind::Gnn2, 500, 32, 1e-1, 0, None), 2),
        ];
        let dir = tempfile::tempdir().unwrap();
        let entries = export_curves(&recs, dir.path()).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 4);
        assert!(dir.path().join(CURVE_INDEX).exists());

        let ranked = rank_runs(&recs, 1);
        let best: Vec<&str> = entries.iter().filter(|e| e.best).map(|e| e.key.as_str()).collect();
        assert_eq!(best, [ranked[0].runs[0].key.as_str()]);
        assert!(!entries[2].best && entries[2].diverged);

        for (r, e) in recs.iter().zip(&entries) {
            let back = read_curve(dir.path().join(&e.file)).unwrap();
            assert_eq!(back, r.history);
        }
    }

    #[test]
    fn malformed_curves_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        fs::write(&p, "epoch,x\n").unwrap();
        assert!(read_curve(&p).is_err());
        fs::write(&p, format!("{CURVE_HEADER}\n1,2,3\n")).unwrap();
        assert!(read_curve(&p).is_err());
    }
}
