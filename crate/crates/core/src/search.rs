//! Exhaustive search for orders whose class group has type dividing (2,…,2,4).

use std::collections::{BTreeSet, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use crate::arith::{self, factorize, kronecker, PrimeTable};
use crate::classgrp::{self, local_unit_quotient, ClassGroup, GroupType};
use crate::compose::{Composer, Dirichlet};
use crate::error::{Error, Result};
use crate::genus;
use crate::qform::{self, Form};

/// The bound B = 4·67⁴ beyond which no pair with distinct fundamental
/// discriminants can have its smaller |d|.
pub const FULL_B: u64 = 80_604_484;

pub const DEFAULT_BOUND: u64 = 100_000;
pub const DEFAULT_F_MAX: u64 = 100;

/// Width of one checkpointed range of |d|.
const CHUNK: u64 = 250_000;

#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub bound_d: u64,
    pub f_max: u64,
    pub full_b: bool,
    pub workers: usize,
    pub checkpoint: Option<PathBuf>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            bound_d: DEFAULT_BOUND,
            f_max: DEFAULT_F_MAX,
            full_b: false,
            workers: 0,
            checkpoint: None,
        }
    }
}

impl SearchConfig {
    pub fn bound(&self) -> u64 {
        if self.full_b {
            FULL_B
        } else {
            self.bound_d
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bound() < 3 {
            return Err(Error::domain("bound must be at least 3"));
        }
        if self.f_max < 1 {
            return Err(Error::domain("f_max must be at least 1"));
        }
        Ok(())
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::resource(format!("thread pool: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Hit {
    pub d: i64,
    pub f: u64,
    pub disc: i64,
    pub group: GroupType,
}

impl Hit {
    fn sort_key(&self) -> (u64, u64) {
        (self.d.unsigned_abs(), self.disc.unsigned_abs())
    }

    /// `d<TAB>f<TAB>D<TAB>type`
    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}\t{}", self.d, self.f, self.disc, self.group)
    }

    pub fn from_tsv(line: &str) -> Result<Self> {
        let cols: Vec<&str> = line.split('\t').collect();
        let bad = || Error::Parse(format!("hit line {line:?}"));
        if cols.len() != 4 {
            return Err(bad());
        }
        let d: i64 = cols[0].parse().map_err(|_| bad())?;
        let f: u64 = cols[1].parse().map_err(|_| bad())?;
        let disc: i64 = cols[2].parse().map_err(|_| bad())?;
        if d * (f * f) as i64 != disc {
            return Err(bad());
        }
        Ok(Hit {
            d,
            f,
            disc,
            group: cols[3].parse()?,
        })
    }
}

/// Keep d unless some prime p with p^c ≤ |d|/4 splits in Q(√d). A class group
/// of exponent dividing c forces every such p to be inert or ramified.
pub fn expc_prefilter(d: i64, c: u32, primes: &PrimeTable) -> bool {
    let quarter = d.unsigned_abs() / 4;
    for &p in primes.primes() {
        match p.checked_pow(c) {
            Some(pc) if pc <= quarter => {
                if kronecker(d, p as i64) == 1 {
                    return false;
                }
            }
            _ => return true,
        }
    }
    true
}

/// Largest prime needed by [`expc_prefilter`] at exponent 4 for |d| ≤ bound.
fn prefilter_prime_limit(bound: u64) -> u64 {
    ((bound / 4) as f64).powf(0.25) as u64 + 2
}

/// A fast necessary condition: prime forms above small split primes must have
/// order dividing 4, and their squares must take at most two values.
fn quick_reject(disc: i64, primes: &PrimeTable) -> Result<bool> {
    let composer = Dirichlet;
    let id = Form::principal(disc)?;
    let mut squares: HashSet<Form> = HashSet::new();
    squares.insert(id);
    let mut tried = 0;
    for &p in primes.primes().iter().take(60) {
        if kronecker(disc, p as i64) != 1 {
            continue;
        }
        let Some(q) = qform::prime_form(disc, p) else {
            continue;
        };
        let sq = composer.compose(&q, &q)?;
        if composer.compose(&sq, &sq)? != id {
            return Ok(true);
        }
        squares.insert(sq);
        if squares.len() > 2 {
            return Ok(true);
        }
        tried += 1;
        if tried == 12 {
            break;
        }
    }
    Ok(false)
}

/// Exact test for a fundamental discriminant that already passed the filters.
fn fundamental_hit(d: i64, primes: &PrimeTable) -> Result<Option<Hit>> {
    if quick_reject(d, primes)? || !classgrp::type_divides_224_by_count(d)? {
        return Ok(None);
    }
    let group = ClassGroup::new(d)?.group_type()?;
    debug_assert!(group.divides_224());
    Ok(Some(Hit {
        d,
        f: 1,
        disc: d,
        group,
    }))
}

fn scan_range(lo: u64, hi: u64, primes: &PrimeTable) -> Result<Vec<Hit>> {
    let mut out = Vec::new();
    for n in lo..=hi {
        let d = -(n as i64);
        if !matches!(d.rem_euclid(4), 0 | 1) {
            continue;
        }
        if !expc_prefilter(d, 4, primes) || !arith::is_fundamental(d) {
            continue;
        }
        if let Some(h) = fundamental_hit(d, primes)? {
            out.push(h);
        }
    }
    Ok(out)
}

/// All fundamental d with |d| ≤ bound whose class group has type dividing
/// (2,…,2,4), ascending in |d|.
pub fn enumerate_fundamental_hits(cfg: &SearchConfig) -> Result<Vec<Hit>> {
    cfg.validate()?;
    let bound = cfg.bound();
    let primes = PrimeTable::new(prefilter_prime_limit(bound).max(1000))?;
    let ranges: Vec<(u64, u64)> = (0..)
        .map(|i| (3 + i * CHUNK, (3 + (i + 1) * CHUNK - 1).min(bound)))
        .take_while(|&(lo, _)| lo <= bound)
        .collect();

    let mut ckpt = match &cfg.checkpoint {
        Some(path) => Some(Checkpoint::open(path)?),
        None => None,
    };
    let done: BTreeSet<(u64, u64)> = ckpt.as_ref().map(|c| c.done.clone()).unwrap_or_default();
    let mut hits: Vec<Hit> = ckpt
        .as_mut()
        .map(|c| std::mem::take(&mut c.hits))
        .unwrap_or_default();
    let writer = ckpt.map(|c| Mutex::new(c.writer));

    let todo: Vec<(u64, u64)> = ranges.into_iter().filter(|r| !done.contains(r)).collect();
    let found = cfg.pool()?.install(|| {
        todo.par_iter()
            .map(|&(lo, hi)| {
                let part = scan_range(lo, hi, &primes)?;
                if let Some(w) = &writer {
                    let mut w = w.lock().expect("checkpoint writer poisoned");
                    for h in &part {
                        writeln!(w, "{}", h.to_tsv())?;
                    }
                    writeln!(w, "#done\t{lo}\t{hi}")?;
                    w.flush()?;
                }
                Ok(part)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    hits.extend(found.into_iter().flatten());
    hits.retain(|h| h.d.unsigned_abs() <= bound);
    hits.sort_by_key(Hit::sort_key);
    hits.dedup();
    Ok(hits)
}

struct Checkpoint {
    done: BTreeSet<(u64, u64)>,
    hits: Vec<Hit>,
    writer: BufWriter<File>,
}

impl Checkpoint {
    /// Reads completed ranges and their hits, then reopens for appending.
    /// Hits after the last `#done` marker belong to an unfinished range and
    /// are dropped; that range is rescanned.
    fn open(path: &Path) -> Result<Self> {
        let mut done = BTreeSet::new();
        let mut hits = Vec::new();
        if path.exists() {
            let mut pending = Vec::new();
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if let Some(rest) = line.strip_prefix("#done\t") {
                    let mut it = rest.split('\t').map(str::parse::<u64>);
                    match (it.next(), it.next()) {
                        (Some(Ok(lo)), Some(Ok(hi))) => {
                            done.insert((lo, hi));
                            let (mine, other): (Vec<Hit>, Vec<Hit>) = pending
                                .drain(..)
                                .partition(|h: &Hit| (lo..=hi).contains(&h.d.unsigned_abs()));
                            hits.extend(mine);
                            pending = other;
                        }
                        _ => return Err(Error::Parse(format!("checkpoint line {line:?}"))),
                    }
                } else if !line.trim().is_empty() {
                    pending.push(Hit::from_tsv(&line)?);
                }
            }
            // hits of ranges whose marker came later are already placed; the
            // remainder belongs to ranges that may finish out of order
            hits.extend(pending.into_iter().filter(|h| {
                done.iter()
                    .any(|&(lo, hi)| (lo..=hi).contains(&h.d.unsigned_abs()))
            }));
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Checkpoint {
            done,
            hits,
            writer: BufWriter::new(file),
        })
    }
}

/// Conductors f for which (A/fA)*/(Z/fZ)* modulo the extra units of the
/// maximal order could still sit inside a group of type dividing (2,…,2,4).
/// The list is finite; every order hit has its conductor in it.
pub fn admissible_conductors(d: i64) -> Result<Vec<u64>> {
    let units = match d {
        -3 => 3,
        -4 => 2,
        _ => 1,
    };
    // For p ≥ 17 the local quotient alone has more than 2·3 squares.
    let small = [2u64, 3, 5, 7, 11, 13];
    let squares = |t: &GroupType| -> u64 {
        t.invariant_factors()
            .iter()
            .map(|&n| if n % 2 == 0 { n / 2 } else { n })
            .product()
    };
    let mut out = vec![1u64];
    let mut stack: Vec<(u64, usize, Vec<u64>)> = vec![(1, 0, Vec::new())];
    while let Some((f, start, cyclic)) = stack.pop() {
        for (i, &p) in small.iter().enumerate().skip(start) {
            let mut e = 1;
            loop {
                let local = local_unit_quotient(d, p, e)?;
                let mut parts = cyclic.clone();
                parts.extend_from_slice(local.invariant_factors());
                let total = GroupType::from_cyclic(&parts);
                if squares(&total) > 2 * units {
                    break;
                }
                let nf = f * p.pow(e);
                out.push(nf);
                stack.push((nf, i + 1, parts));
                e += 1;
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Nonmaximal orders: for each fundamental hit, every conductor 2 ≤ f ≤ f_max
/// with Cl(df²) of type dividing (2,…,2,4). Returns the hits and the largest
/// admissible conductor over all d, which certifies completeness when it does
/// not exceed f_max.
pub fn enumerate_order_hits(cfg: &SearchConfig, fundamentals: &[Hit]) -> Result<(Vec<Hit>, u64)> {
    cfg.validate()?;
    let per_d = cfg.pool()?.install(|| {
        fundamentals
            .par_iter()
            .map(|fund| -> Result<(Vec<Hit>, u64)> {
                let d = fund.d;
                let hd = fund.group.order();
                let mut out = Vec::new();
                for f in 2..=cfg.f_max {
                    let h = h_from(d, hd, f);
                    let rank = genus::genus_basis(d, f)?.span.dim() as u32;
                    // h = #G[2]·#G² with #G[2] = 2^(rank−1)
                    if h > 1 << rank {
                        continue;
                    }
                    let disc = d
                        .checked_mul((f * f) as i64)
                        .ok_or(Error::Overflow("order discriminant"))?;
                    let group = ClassGroup::new(disc)?.group_type()?;
                    if group.order() != h || !group.divides_224() {
                        return Err(Error::domain(format!(
                            "class number formula disagrees at D = {disc}: {h} vs {group}"
                        )));
                    }
                    out.push(Hit { d, f, disc, group });
                }
                let cap = admissible_conductors(d)?.into_iter().max().unwrap_or(1);
                Ok((out, cap))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let cap = per_d.iter().map(|(_, c)| *c).max().unwrap_or(1);
    let mut hits: Vec<Hit> = per_d.into_iter().flat_map(|(h, _)| h).collect();
    hits.sort_by_key(Hit::sort_key);
    Ok((hits, cap))
}

fn h_from(d: i64, hd: u64, f: u64) -> u64 {
    let mut h = hd;
    for &(p, e) in &factorize(f).factors {
        h *= p.pow(e - 1) * (p as i64 - kronecker(d, p as i64) as i64) as u64;
    }
    match d {
        -3 => h / 3,
        -4 => h / 2,
        _ => h,
    }
}

/// Fundamental plus nonmaximal hits, sorted by |d| then |D|.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub fundamental: Vec<Hit>,
    pub orders: Vec<Hit>,
    /// Largest conductor not excluded by the local unit quotients.
    pub conductor_cap: u64,
}

impl SearchResult {
    pub fn all(&self) -> Vec<Hit> {
        let mut v: Vec<Hit> = self
            .fundamental
            .iter()
            .chain(&self.orders)
            .cloned()
            .collect();
        v.sort_by_key(Hit::sort_key);
        v
    }

    pub fn complete_in_f(&self, f_max: u64) -> bool {
        self.conductor_cap <= f_max
    }
}

pub fn run(cfg: &SearchConfig) -> Result<SearchResult> {
    let fundamental = enumerate_fundamental_hits(cfg)?;
    let (orders, conductor_cap) = enumerate_order_hits(cfg, &fundamental)?;
    Ok(SearchResult {
        fundamental,
        orders,
        conductor_cap,
    })
}

/// The group types of Tables 7–16, in table order.
pub fn table_types() -> Vec<GroupType> {
    [
        "(1)",
        "(2)",
        "(4)",
        "(2,2)",
        "(2,4)",
        "(2,2,2)",
        "(2,2,4)",
        "(2,2,2,2)",
        "(2,2,2,4)",
        "(2,2,2,2,4)",
    ]
    .iter()
    .map(|s| s.parse().expect("static group type"))
    .collect()
}

/// Hits grouped by group type in the order (h, number of factors), each group
/// sorted by |d| then |D|.
pub fn emit_tables(hits: &[Hit]) -> Vec<(GroupType, Vec<Hit>)> {
    let mut types: Vec<GroupType> = hits.iter().map(|h| h.group.clone()).collect();
    types.sort_by_key(|t| (t.order(), t.invariant_factors().len(), t.clone()));
    types.dedup();
    types
        .into_iter()
        .map(|t| {
            let mut rows: Vec<Hit> = hits.iter().filter(|h| h.group == t).cloned().collect();
            rows.sort_by_key(Hit::sort_key);
            (t, rows)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(bound: u64) -> SearchConfig {
        SearchConfig {
            bound_d: bound,
            f_max: 30,
            ..SearchConfig::default()
        }
    }

    #[test]
    fn prefilter_examples() {
        let primes = PrimeTable::new(1000).unwrap();
        assert!(expc_prefilter(-5460, 4, &primes));
        assert!(expc_prefilter(-47, 4, &primes));
        // (−4·10007/3) = 1 and 3⁴ ≤ |d|/4
        let d = -4 * 10007;
        assert_eq!(kronecker(d, 3), 1);
        assert!(!expc_prefilter(d, 4, &primes));
    }

    #[test]
    fn prefilter_is_sound() {
        let primes = PrimeTable::new(1000).unwrap();
        for n in 3..=10_000u64 {
            let d = -(n as i64);
            if !arith::is_fundamental(d) {
                continue;
            }
            if classgrp::type_divides_224_by_count(d).unwrap() {
                assert!(expc_prefilter(d, 4, &primes), "d={d}");
                assert!(!quick_reject(d, &primes).unwrap(), "d={d}");
            }
        }
    }

    #[test]
    fn small_bounds() {
        let hits = enumerate_fundamental_hits(&small_cfg(3)).unwrap();
        assert_eq!(hits.iter().map(|h| h.d).collect::<Vec<_>>(), vec![-3]);
        let hits = enumerate_fundamental_hits(&small_cfg(200)).unwrap();
        let ds: Vec<i64> = hits.iter().map(|h| h.d).collect();
        assert!(ds.contains(&-163));
        let h195 = hits.iter().find(|h| h.d == -195).unwrap();
        assert_eq!(h195.group.to_string(), "(2,2)");
    }

    #[test]
    fn order_hits_for_small_d() {
        let cfg = small_cfg(10);
        let fund = enumerate_fundamental_hits(&cfg).unwrap();
        let (orders, cap) = enumerate_order_hits(&cfg, &fund).unwrap();
        let of = |d: i64| -> Vec<u64> { orders.iter().filter(|h| h.d == d).map(|h| h.f).collect() };
        assert!(of(-7).contains(&24));
        let h = orders.iter().find(|h| h.d == -7 && h.f == 24).unwrap();
        assert_eq!(h.disc, -4032);
        for f in [2, 3, 4, 5, 7, 8, 11, 13, 16] {
            assert!(of(-3).contains(&f), "f={f}");
        }
        assert!(cap <= DEFAULT_F_MAX, "cap {cap}");
    }

    #[test]
    fn admissible_conductors_cover_order_hits() {
        for d in [-3i64, -4, -7, -8, -15, -24, -120, -5460] {
            let adm = admissible_conductors(d).unwrap();
            let hd = qform::class_number_by_count(d).unwrap();
            for f in 2..=60u64 {
                let disc = d * (f * f) as i64;
                if classgrp::type_divides_224_by_count(disc).unwrap() {
                    assert!(adm.contains(&f), "d={d} f={f}");
                    assert_eq!(
                        h_from(d, hd, f),
                        qform::class_number_by_count(disc).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn determinism_across_worker_counts() {
        let mut a = small_cfg(5000);
        a.workers = 1;
        let mut b = small_cfg(5000);
        b.workers = 4;
        let ra = run(&a).unwrap();
        let rb = run(&b).unwrap();
        assert_eq!(ra.all(), rb.all());
    }

    #[test]
    fn checkpoint_resume() {
        let dir = std::env::temp_dir().join(format!("formprime-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("hits.tsv");
        let _ = std::fs::remove_file(&path);
        let mut cfg = small_cfg(600_000);
        cfg.checkpoint = Some(path.clone());
        let first = enumerate_fundamental_hits(&cfg).unwrap();
        // drop the last completed range and a stray hit, then resume
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let last_done = lines.iter().rposition(|l| l.starts_with("#done")).unwrap();
        lines.remove(last_done);
        std::fs::write(&path, lines.join("\n") + "\n").unwrap();
        let second = enumerate_fundamental_hits(&cfg).unwrap();
        assert_eq!(first, second);
        let plain = enumerate_fundamental_hits(&small_cfg(600_000)).unwrap();
        assert_eq!(first, plain);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn tsv_round_trip() {
        let h = Hit {
            d: -5460,
            f: 4,
            disc: -87360,
            group: "(2,2,2,2,4)".parse().unwrap(),
        };
        assert_eq!(h.to_tsv(), "-5460\t4\t-87360\t(2,2,2,2,4)");
        assert_eq!(Hit::from_tsv(&h.to_tsv()).unwrap(), h);
        assert!(Hit::from_tsv("-5460\t4\t-87361\t(2)").is_err());
    }

    #[test]
    fn emit_orders_types() {
        assert!(emit_tables(&[]).is_empty());
        let types = table_types();
        let mut sorted = types.clone();
        sorted.sort_by_key(|t| (t.order(), t.invariant_factors().len(), t.clone()));
        assert_eq!(types, sorted);
    }
}
