//! TSV and aligned-text rendering of the equivalence-class and discriminant tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::arith::PrimeTable;
use crate::compose::Composer;
use crate::equiv::{Classifier, EquivClass};
use crate::error::Result;
use crate::search::{self, Hit, SearchConfig, SearchResult};

pub const CLASS_HEADER: &str = "class\tQ\t|D|\t|d|\tf\tP\ttype\tE";
pub const HIT_HEADER: &str = "|d|\tf\t|D|";

/// Primes as `{3}` or `{}`.
pub fn prime_set(ps: &[u64]) -> String {
    let inner: Vec<String> = ps.iter().map(u64::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

/// One row per member; `class` is the 1-based position within its table.
pub fn class_rows(class_no: usize, c: &EquivClass) -> Vec<String> {
    let span = c.genus.to_string();
    c.members
        .iter()
        .map(|m| {
            format!(
                "{class_no}\t{}\t{}\t{}\t{}\t{span}\t{}\t{}",
                m.form,
                m.disc.unsigned_abs(),
                m.d.unsigned_abs(),
                m.f,
                m.group,
                prime_set(&m.exceptional)
            )
        })
        .collect()
}

/// Classes split into Tables 1–6, keeping the incoming order inside each table.
pub fn class_tables(classes: &[EquivClass]) -> BTreeMap<u8, Vec<&EquivClass>> {
    let mut out: BTreeMap<u8, Vec<&EquivClass>> = (1..=6).map(|t| (t, Vec::new())).collect();
    for c in classes {
        if let Some(t) = c.table_number() {
            out.entry(t).or_default().push(c);
        }
    }
    out
}

pub fn class_table_tsv(classes: &[&EquivClass]) -> String {
    let mut s = String::from(CLASS_HEADER);
    s.push('\n');
    for (i, c) in classes.iter().enumerate() {
        for row in class_rows(i + 1, c) {
            s.push_str(&row);
            s.push('\n');
        }
    }
    s
}

pub fn hit_table_tsv(hits: &[Hit]) -> String {
    let mut s = String::from(HIT_HEADER);
    s.push('\n');
    for h in hits {
        let _ = writeln!(
            s,
            "{}\t{}\t{}",
            h.d.unsigned_abs(),
            h.f,
            h.disc.unsigned_abs()
        );
    }
    s
}

/// Tables 7–16 keyed by table number. Types outside the expected ten get
/// numbers after 16.
pub fn hit_tables(hits: &[Hit]) -> BTreeMap<u8, (crate::GroupType, Vec<Hit>)> {
    let known = search::table_types();
    let mut extra = 17u8;
    let mut out = BTreeMap::new();
    for (i, t) in known.iter().enumerate() {
        out.insert(7 + i as u8, (t.clone(), Vec::new()));
    }
    for (t, rows) in search::emit_tables(hits) {
        match known.iter().position(|k| *k == t) {
            Some(i) => out.insert(7 + i as u8, (t, rows)),
            None => {
                extra += 1;
                out.insert(extra - 1, (t, rows))
            }
        };
    }
    out
}

/// Aligns tab-separated text into space-padded columns.
pub fn pretty(tsv: &str) -> String {
    let rows: Vec<Vec<&str>> = tsv.lines().map(|l| l.split('\t').collect()).collect();
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; ncol];
    for r in &rows {
        for (i, cell) in r.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut s = String::new();
    for r in &rows {
        let mut line = String::new();
        for (i, cell) in r.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(cell);
            if i + 1 < r.len() {
                line.extend(std::iter::repeat_n(' ', widths[i] - cell.chars().count()));
            }
        }
        s.push_str(line.trim_end());
        s.push('\n');
    }
    s
}

/// A full run: the discriminant search followed by classification of every
/// form whose discriminant was hit.
pub struct TableRun {
    pub search: SearchResult,
    pub classes: Vec<EquivClass>,
}

impl TableRun {
    pub fn new(cfg: &SearchConfig, composer: Arc<dyn Composer>) -> Result<Self> {
        let search = search::run(cfg)?;
        let discs: Vec<i64> = search.all().iter().map(|h| h.disc).collect();
        let classifier = Classifier::new(Arc::new(PrimeTable::new(100_000)?), composer);
        let classes = classifier.build_classes(&discs)?;
        Ok(TableRun { search, classes })
    }

    /// Classes with at least two fundamental discriminants.
    pub fn multi_d(&self) -> impl Iterator<Item = &EquivClass> {
        self.classes.iter().filter(|c| c.delta().len() >= 2)
    }

    /// Class `n` (1-based) of table `t`.
    pub fn class(&self, t: u8, n: usize) -> Option<&EquivClass> {
        class_tables(&self.classes)
            .get(&t)?
            .get(n.checked_sub(1)?)
            .copied()
    }

    /// `(file name, contents)` for table01.tsv … table16.tsv.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (t, cs) in class_tables(&self.classes) {
            out.push((format!("table{t:02}.tsv"), class_table_tsv(&cs)));
        }
        for (t, (_, hits)) in hit_tables(&self.search.all()) {
            out.push((format!("table{t:02}.tsv"), hit_table_tsv(&hits)));
        }
        out
    }

    pub fn summary(&self) -> String {
        let by_delta = |k: usize| self.classes.iter().filter(|c| c.delta().len() == k).count();
        format!(
            "{} classes with #delta >= 2 ({} with #delta = 2, {} with #delta = 3, {} with #delta >= 4), {} with #delta = 1; {} fundamental and {} nonmaximal discriminants",
            self.multi_d().count(),
            by_delta(2),
            by_delta(3),
            self.classes.iter().filter(|c| c.delta().len() >= 4).count(),
            by_delta(1),
            self.search.fundamental.len(),
            self.search.orders.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_sets() {
        assert_eq!(prime_set(&[]), "{}");
        assert_eq!(prime_set(&[3]), "{3}");
        assert_eq!(prime_set(&[2, 3]), "{2,3}");
    }

    #[test]
    fn pretty_aligns() {
        let t = "a\tbb\tc\nddd\te\tf\n";
        assert_eq!(pretty(t), "a    bb  c\nddd  e   f\n");
    }

    #[test]
    fn hit_table_layout() {
        let h = Hit {
            d: -7,
            f: 24,
            disc: -4032,
            group: "(2,2,4)".parse().unwrap(),
        };
        assert_eq!(
            hit_table_tsv(std::slice::from_ref(&h)),
            "|d|\tf\t|D|\n7\t24\t4032\n"
        );
        let tabs = hit_tables(&[h]);
        assert_eq!(tabs.len(), 10);
        assert_eq!(tabs[&13].1.len(), 1);
        assert!(tabs[&7].1.is_empty());
    }
}
