//! On-disk cache of exact and Monte Carlo null tables.

use std::io::Write;
use std::path::{Path, PathBuf};

use rankos::basis::ScoreDenominator;
use rankos::calibrate::{NullDistribution, NullKind};
use rankos::stats::RankStatistic;

use crate::error::{CliError, CliResult};

/// What identifies a cached table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableKey {
    pub statistic: RankStatistic,
    pub n: usize,
    pub kind: NullKind,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub scores: ScoreDenominator,
}

impl TableKey {
    pub fn file_name(&self) -> String {
        let opt = |v: Option<u64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        format!(
            "{}_n{}_{}_reps-{}_seed-{}_{}.csv",
            self.statistic.id().replace(':', "-"),
            self.n,
            self.kind.id(),
            opt(self.reps),
            opt(self.seed),
            self.scores.id()
        )
    }

    fn matches(&self, table: &NullDistribution) -> bool {
        table.statistic() == self.statistic
            && table.n() == self.n
            && table.kind() == self.kind
            && table.reps() == self.reps
            && table.seed() == self.seed
            && table.scores() == self.scores
    }
}

/// Loads the table for `key` from `dir`, or builds it and stores it.
/// Returns the table, its path and whether it was a cache hit.
pub fn load_or_build(
    dir: &Path,
    key: TableKey,
    build: impl FnOnce() -> CliResult<NullDistribution>,
) -> CliResult<(NullDistribution, PathBuf, bool)> {
    let path = dir.join(key.file_name());
    if path.exists() {
        let file = std::fs::File::open(&path).map_err(|e| CliError::io(&path, e))?;
        let table = NullDistribution::read_csv(std::io::BufReader::new(file))?;
        if !key.matches(&table) {
            return Err(rankos::Error::Table(format!("{} does not match its cache key", path.display())).into());
        }
        return Ok((table, path, true));
    }
    let table = build()?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_table(&table, &path)?;
    Ok((table, path, false))
}

/// Writes through a temporary file so readers never see a partial table.
pub fn write_table(table: &NullDistribution, path: &Path) -> CliResult<()> {
    let tmp = path.with_extension("csv.tmp");
    let file = std::fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    let mut out = std::io::BufWriter::new(file);
    table.write_csv(&mut out)?;
    out.flush().map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
