//! Cluster/tone agreement: contingency tables, NMI and the First/All reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch::ContourRecord;

/// Cluster-by-tone counts. Rows are clusters `0..counts.len()`; unclustered
/// syllables are kept apart in `unclustered` and never enter the NMI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub tones: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub unclustered: Vec<u64>,
}

/// Row label used in rendered tables: A, B, ..., Z, AA, AB, ...
pub fn cluster_name(mut index: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (index % 26) as u8);
        if index < 26 {
            break;
        }
        index = index / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.clustered_total() + self.unclustered.iter().sum::<u64>()
    }

    pub fn clustered_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn get(&self, cluster: usize, tone: &str) -> u64 {
        match self.tones.iter().position(|t| t == tone) {
            Some(j) => self.counts.get(cluster).map_or(0, |r| r[j]),
            None => 0,
        }
    }

    /// Text layout with clusters as rows, tones as columns and the N/A row
    /// for unclustered syllables last.
    pub fn to_text(&self) -> String {
        let width = self
            .tones
            .iter()
            .map(|t| t.len())
            .chain(self.counts.iter().flatten().chain(&self.unclustered).map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(3);
        let mut out = format!("{:<7}", "");
        for t in &self.tones {
            let _ = write!(out, " {t:>width$}");
        }
        out.push('\n');
        let rows = self
            .counts
            .iter()
            .enumerate()
            .map(|(i, r)| (cluster_name(i), r))
            .chain(std::iter::once(("N/A".to_string(), &self.unclustered)));
        for (name, row) in rows {
            let _ = write!(out, "{name:<7}");
            for c in row {
                let _ = write!(out, " {c:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

/// Counts syllables per (cluster, tone). Tones are sorted by name; rows
/// run up to the highest cluster index seen.
pub fn contingency<S: AsRef<str>>(assignments: &[Option<usize>], tones: &[S]) -> Result<ContingencyTable> {
    if assignments.len() != tones.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: tones.len(),
        });
    }
    let names: Vec<String> = tones
        .iter()
        .map(|t| t.as_ref().to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = assignments.iter().flatten().map(|&c| c + 1).max().unwrap_or(0);
    let mut counts = vec![vec![0u64; names.len()]; rows];
    let mut unclustered = vec![0u64; names.len()];
    for (a, t) in assignments.iter().zip(tones) {
        let j = names.binary_search_by(|n| n.as_str().cmp(t.as_ref())).expect("tone collected above");
        match a {
            Some(c) => counts[*c][j] += 1,
            None => unclustered[j] += 1,
        }
    }
    Ok(ContingencyTable {
        tones: names,
        counts,
        unclustered,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NmiVariant {
    #[default]
    Arithmetic,
    Geometric,
    Min,
}

impl NmiVariant {
    pub const ALL: [NmiVariant; 3] = [NmiVariant::Arithmetic, NmiVariant::Geometric, NmiVariant::Min];

    fn normalizer(self, hc: f64, ht: f64) -> f64 {
        match self {
            NmiVariant::Arithmetic => 0.5 * (hc + ht),
            NmiVariant::Geometric => (hc * ht).sqrt(),
            NmiVariant::Min => hc.min(ht),
        }
    }
}

fn entropy(marginal: &[u64], n: f64) -> f64 {
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// NMI of a plain count matrix (rows = clusters, columns = classes).
pub fn nmi_counts(counts: &[Vec<u64>], variant: NmiVariant) -> Result<f64> {
    let n: u64 = counts.iter().flatten().sum();
    if n < 2 {
        return Err(Error::EmptyTable(format!("{n} clustered, labeled syllables; need at least 2")));
    }
    let cols = counts.first().map_or(0, |r| r.len());
    let nf = n as f64;
    let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<u64> = (0..cols).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    let hc = entropy(&row_sums, nf);
    let ht = entropy(&col_sums, nf);
    let h_zero = |h: f64| h <= 1e-15;
    match (h_zero(hc), h_zero(ht)) {
        (true, true) => return Ok(1.0),
        (true, false) | (false, true) => return Ok(0.0),
        _ => {}
    }
    let mut mi = 0.0;
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    Ok((mi / variant.normalizer(hc, ht)).clamp(0.0, 1.0))
}

/// NMI over the clustered rows of `table`.
pub fn nmi(table: &ContingencyTable, variant: NmiVariant) -> Result<f64> {
    nmi_counts(&table.counts, variant)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Autoencoder,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    First,
    All,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Autoencoder => "autoencoder",
            Method::Kmeans => "kmeans",
        }
    }
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::First => "first",
            Split::All => "all",
        }
    }
}

/// Published NMI on the original single-speaker recordings. The recordings
/// and their segmentations are not distributed, so these numbers are kept for
/// reference only and are not reproduced by the test suite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceNmi {
    pub language: &'static str,
    pub split: Split,
    pub autoencoder: f64,
    pub kmeans: f64,
}

pub const REFERENCE_NMI: [ReferenceNmi; 4] = [
    ReferenceNmi { language: "cmn", split: Split::First, autoencoder: 0.846, kmeans: 0.829 },
    ReferenceNmi { language: "cmn", split: Split::All, autoencoder: 0.753, kmeans: 0.645 },
    ReferenceNmi { language: "yue", split: Split::First, autoencoder: 0.575, kmeans: 0.493 },
    ReferenceNmi { language: "yue", split: Split::All, autoencoder: 0.463, kmeans: 0.377 },
];

/// Indices of the first syllable (index 0) of each word.
pub fn split_first(records: &[ContourRecord]) -> Vec<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.syll == 0)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NmiVariants {
    pub arithmetic: f64,
    pub geometric: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub language: String,
    pub method: Method,
    pub split: Split,
    pub nmi_variant: NmiVariant,
    pub nmi: f64,
    pub nmi_variants: NmiVariants,
    /// Fraction of the split's syllables that were clustered.
    pub coverage: f64,
    pub syllables: usize,
    pub evaluated: usize,
    pub table: ContingencyTable,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        format!(
            "{} / {} / {}\nNMI ({:?}) {:.3}  [arithmetic {:.3}, geometric {:.3}, min {:.3}]\ncoverage {:.3} ({} syllables, {} evaluated)\n{}",
            self.language,
            self.method.name(),
            self.split.name(),
            self.nmi_variant,
            self.nmi,
            self.nmi_variants.arithmetic,
            self.nmi_variants.geometric,
            self.nmi_variants.min,
            self.coverage,
            self.syllables,
            self.evaluated,
            self.table.to_text()
        )
    }
}

/// Builds the report for one method and split. `labels[i]` is `None` for
/// syllables that are unlabeled or excluded from evaluation; they count
/// toward coverage but not toward the table.
pub fn make_report(
    language: &str,
    method: Method,
    split: Split,
    assignments: &[Option<usize>],
    labels: &[Option<String>],
    variant: NmiVariant,
) -> Result<EvalReport> {
    if assignments.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: assignments.len(),
            right: labels.len(),
        });
    }
    let (kept_a, kept_t): (Vec<Option<usize>>, Vec<&str>) = assignments
        .iter()
        .zip(labels)
        .filter_map(|(a, t)| t.as_deref().map(|t| (*a, t)))
        .unzip();
    let table = contingency(&kept_a, &kept_t)?;
    let context = |e: Error| match e {
        Error::EmptyTable(m) => Error::EmptyTable(format!("{language} {} {}: {m}", method.name(), split.name())),
        other => other,
    };
    let values = NmiVariant::ALL.map(|v| nmi(&table, v));
    let [a, g, m] = values;
    let nmi_variants = NmiVariants {
        arithmetic: a.map_err(context)?,
        geometric: g.map_err(context)?,
        min: m.map_err(context)?,
    };
    let nmi = match variant {
        NmiVariant::Arithmetic => nmi_variants.arithmetic,
        NmiVariant::Geometric => nmi_variants.geometric,
        NmiVariant::Min => nmi_variants.min,
    };
    let clustered = assignments.iter().filter(|a| a.is_some()).count();
    Ok(EvalReport {
        language: language.to_string(),
        method,
        split,
        nmi_variant: variant,
        nmi,
        nmi_variants,
        coverage: if assignments.is_empty() {
            0.0
        } else {
            clustered as f64 / assignments.len() as f64
        },
        syllables: assignments.len(),
        evaluated: kept_t.len(),
        table,
    })
}
