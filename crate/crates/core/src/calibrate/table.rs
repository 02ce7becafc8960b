//! Versioned CSV serialization of null tables.
//!
//! Layout: a stamp line `# rankos-null-table v1 scores=<denominator>`, then a
//! header `method,n,kind,reps,seed,threshold,tail_prob` and one row per
//! support point in ascending order, with `tail_prob = P(S >= threshold)`.
//! `reps` is the total multiplicity (`n!` for exact tables); multiplicities
//! are recovered from successive tail differences.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use super::{NullDistribution, NullKind};
use crate::basis::ScoreDenominator;
use crate::error::{Error, Result};
use crate::stats::RankStatistic;

pub const TABLE_SCHEMA: &str = "rankos-null-table v1";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    method: String,
    n: usize,
    kind: String,
    reps: u64,
    seed: Option<u64>,
    threshold: f64,
    tail_prob: f64,
}

fn table_err(msg: impl Into<String>) -> Error {
    Error::Table(msg.into())
}

impl NullDistribution {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# {TABLE_SCHEMA} scores={}", self.scores.id())?;
        let mut w = csv::Writer::from_writer(out);
        let total = self.total() as f64;
        for (k, &(threshold, _)) in self.support.iter().enumerate() {
            w.serialize(Row {
                method: self.statistic.id(),
                n: self.n,
                kind: self.kind.id().to_string(),
                reps: self.total(),
                seed: self.seed,
                threshold,
                tail_prob: self.upper[k] as f64 / total,
            })
            .map_err(|e| table_err(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut input = BufReader::new(input);
        let mut stamp = String::new();
        input.read_line(&mut stamp)?;
        let scores = stamp
            .trim()
            .strip_prefix("# ")
            .and_then(|s| s.strip_prefix(TABLE_SCHEMA))
            .and_then(|s| s.trim().strip_prefix("scores="))
            .and_then(ScoreDenominator::from_id)
            .ok_or_else(|| table_err(format!("missing or unsupported schema stamp {:?}", stamp.trim())))?;
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(input).deserialize::<Row>() {
            rows.push(row.map_err(|e| table_err(e.to_string()))?);
        }
        let first = rows.first().ok_or_else(|| table_err("table has no rows"))?;
        let statistic = RankStatistic::from_id(&first.method)
            .ok_or_else(|| table_err(format!("unknown method {}", first.method)))?;
        let kind = NullKind::from_id(&first.kind)
            .filter(|&k| k != NullKind::Asymptotic)
            .ok_or_else(|| table_err(format!("unsupported table kind {}", first.kind)))?;
        let (n, total, seed) = (first.n, first.reps, first.seed);
        if rows
            .iter()
            .any(|r| r.method != first.method || r.n != n || r.kind != first.kind || r.reps != total || r.seed != seed)
        {
            return Err(table_err("rows disagree on method, n, kind, reps or seed"));
        }
        if rows.windows(2).any(|w| w[1].threshold <= w[0].threshold) {
            return Err(table_err("thresholds must be strictly increasing"));
        }
        let mut support = Vec::with_capacity(rows.len());
        let mut remaining = total;
        for (k, row) in rows.iter().enumerate() {
            let next = rows.get(k + 1).map_or(0.0, |r| r.tail_prob);
            let count = ((row.tail_prob - next) * total as f64).round();
            if count.is_nan() || count < 1.0 || count as u64 > remaining {
                return Err(table_err(format!("inconsistent tail probabilities at threshold {}", row.threshold)));
            }
            remaining -= count as u64;
            support.push((row.threshold, count as u64));
        }
        if remaining != 0 {
            return Err(table_err("multiplicities do not sum to reps"));
        }
        Ok(Self::from_support(kind, n, statistic, scores, support, seed))
    }
}
