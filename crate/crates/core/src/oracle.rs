//! Empirical checks by sieving the primes each form represents. Nothing here
//! looks at genus fields or signatures.

use std::fmt;

use rayon::prelude::*;

use crate::arith::PrimeTable;
use crate::classgrp::ClassGroup;
use crate::equiv::EquivClass;
use crate::error::{Error, Result};
use crate::qform::{self, Form, PrimeSet};
use crate::report::prime_set;

/// Largest sieve limit accepted.
pub const MAX_LIMIT: u64 = 200_000_000;

#[derive(Debug, Clone)]
pub struct MemberReport {
    pub form: Form,
    pub disc: i64,
    /// Represented primes up to the limit.
    pub count: usize,
    /// For every other member, the primes represented by exactly one of the two.
    pub differences: Vec<(Form, Vec<u64>)>,
    /// Primes this form represents that some other member misses.
    pub observed_exceptional: Vec<u64>,
    pub tabulated_exceptional: Vec<u64>,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub limit: u64,
    pub exceptional: Vec<u64>,
    pub members: Vec<MemberReport>,
}

impl ClassReport {
    /// Every symmetric difference lies inside E(C).
    pub fn pass(&self) -> bool {
        self.members.iter().all(|m| m.pass)
    }

    /// The sieve reproduces each member's exceptional set exactly.
    pub fn exceptional_exact(&self) -> bool {
        self.members
            .iter()
            .all(|m| m.observed_exceptional == m.tabulated_exceptional)
    }
}

impl fmt::Display for ClassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "limit {}  E(C) = {}",
            self.limit,
            prime_set(&self.exceptional)
        )?;
        for m in &self.members {
            write!(
                f,
                "{}\tD={}\tprimes={}\tE={}",
                m.form,
                m.disc,
                m.count,
                prime_set(&m.observed_exceptional)
            )?;
            for (other, diff) in &m.differences {
                write!(f, "\tvs {}: {}", other, prime_set(diff))?;
            }
            writeln!(f, "\t{}", if m.pass { "pass" } else { "FAIL" })?;
        }
        write!(f, "{}", if self.pass() { "PASS" } else { "FAIL" })
    }
}

pub struct Oracle {
    primes: PrimeTable,
}

impl Oracle {
    pub fn new(limit: u64) -> Result<Self> {
        if limit > MAX_LIMIT {
            return Err(Error::resource(format!(
                "sieve limit {limit} exceeds {MAX_LIMIT}"
            )));
        }
        Ok(Oracle {
            primes: PrimeTable::new(limit)?,
        })
    }

    pub fn limit(&self) -> u64 {
        self.primes.limit()
    }

    fn sets(&self, forms: &[Form]) -> Result<Vec<PrimeSet>> {
        forms
            .par_iter()
            .map(|q| qform::represented_primes(q, &self.primes))
            .collect()
    }

    pub fn verify_class(&self, class: &EquivClass) -> Result<ClassReport> {
        if self.limit() < 1000 {
            return Err(Error::domain("verification limit must be at least 1000"));
        }
        let forms: Vec<Form> = class.members.iter().map(|m| m.form).collect();
        let sets = self.sets(&forms)?;
        let e_class = class.exceptional();
        let members = class
            .members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let mut differences = Vec::new();
                let mut observed: Vec<u64> = Vec::new();
                for (j, other) in class.members.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let mine: Vec<u64> = sets[i].difference(&sets[j]).collect();
                    let mut diff: Vec<u64> = mine.clone();
                    diff.extend(sets[j].difference(&sets[i]));
                    diff.sort_unstable();
                    observed.extend(mine);
                    differences.push((other.form, diff));
                }
                observed.sort_unstable();
                observed.dedup();
                let pass = differences
                    .iter()
                    .all(|(_, d)| d.iter().all(|p| e_class.contains(p)));
                MemberReport {
                    form: m.form,
                    disc: m.disc,
                    count: sets[i].len(),
                    differences,
                    observed_exceptional: observed,
                    tabulated_exceptional: m.exceptional.clone(),
                    pass,
                }
            })
            .collect();
        Ok(ClassReport {
            limit: self.limit(),
            exceptional: e_class,
            members,
        })
    }

    /// Share of primes up to the limit represented by q, and the Chebotarev
    /// density: 1/(2h) when q has order at most 2, otherwise 1/h.
    pub fn density_check(&self, q: &Form) -> Result<(f64, f64)> {
        if self.limit() < 100_000 {
            return Err(Error::domain("density limit must be at least 100000"));
        }
        let disc = q.checked_discriminant()?;
        let group = ClassGroup::new(disc)?;
        let r = qform::reduce_sl2(q)?.form();
        let h = group.h() as f64;
        let expected = if group.order_of(&r)? <= 2 {
            1.0 / (2.0 * h)
        } else {
            1.0 / h
        };
        let set = qform::represented_primes(q, &self.primes)?;
        let observed = set.len() as f64 / self.primes.pi(self.limit()) as f64;
        Ok((observed, expected))
    }

    /// The first ten primes represented by exactly one of the two forms.
    pub fn falsify_pair(&self, q1: &Form, q2: &Form) -> Result<Vec<u64>> {
        for q in [q1, q2] {
            if !q.is_primitive() {
                return Err(Error::domain(format!("{q} is not primitive")));
            }
        }
        let sets = self.sets(&[*q1, *q2])?;
        let mut diff: Vec<u64> = sets[0].difference(&sets[1]).collect();
        diff.extend(sets[1].difference(&sets[0]));
        diff.sort_unstable();
        diff.truncate(10);
        Ok(diff)
    }
}

pub fn verify_class(class: &EquivClass, limit: u64) -> Result<ClassReport> {
    Oracle::new(limit)?.verify_class(class)
}

pub fn density_check(q: &Form, limit: u64) -> Result<(f64, f64)> {
    Oracle::new(limit)?.density_check(q)
}

pub fn falsify_pair(q1: &Form, q2: &Form, limit: u64) -> Result<Vec<u64>> {
    Oracle::new(limit)?.falsify_pair(q1, q2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compose;
    use crate::equiv::Classifier;
    use std::sync::Arc;

    fn f(a: i64, b: i64, c: i64) -> Form {
        Form::new(a, b, c)
    }

    fn classifier() -> Classifier {
        Classifier::new(
            Arc::new(PrimeTable::new(10_000).unwrap()),
            compose::composer("dirichlet").unwrap(),
        )
    }

    #[test]
    fn same_primes_for_9_and_12() {
        let c = classifier().make_class(&[f(1, 0, 9), f(1, 0, 12)]).unwrap();
        let r = verify_class(&c, 100_000).unwrap();
        assert!(r.pass());
        assert!(r.members.iter().all(|m| m.differences[0].1.is_empty()));
        assert_eq!(r.members[0].count, r.members[1].count);
    }

    #[test]
    fn near_miss_differs_only_at_3() {
        let c = classifier()
            .make_class(&[f(3, 0, 40), f(27, 12, 28)])
            .unwrap();
        let r = verify_class(&c, 100_000).unwrap();
        assert!(r.pass());
        assert_eq!(r.members[0].differences[0].1, vec![3]);
        assert!(r.exceptional_exact());
    }

    #[test]
    fn worked_example_residues() {
        let o = Oracle::new(1_000_000).unwrap();
        let c = classifier()
            .make_class(&[f(7, 6, 39), f(7, 4, 76)])
            .unwrap();
        let r = o.verify_class(&c).unwrap();
        assert!(r.pass());
        assert!(r.members[0].differences[0].1.is_empty());
        let set = qform::represented_primes(&f(7, 6, 39), &o.primes).unwrap();
        let residues: std::collections::BTreeSet<u64> = set.iter().map(|p| p % 264).collect();
        assert_eq!(
            residues.into_iter().collect::<Vec<_>>(),
            vec![7, 79, 127, 151, 175]
        );
    }

    #[test]
    fn densities() {
        let o = Oracle::new(1_000_000).unwrap();
        for (q, want) in [
            (f(1, 0, 9), 0.25),
            (f(7, 6, 39), 1.0 / 16.0),
            (f(1, 0, 1), 0.5),
        ] {
            let (obs, exp) = o.density_check(&q).unwrap();
            assert!((exp - want).abs() < 1e-12, "{q}");
            assert!((obs / exp - 1.0).abs() < 0.2, "{q}: {obs} vs {exp}");
        }
        assert!(density_check(&f(1, 0, 1), 1000).is_err());
    }

    #[test]
    fn falsify() {
        let o = Oracle::new(10_000).unwrap();
        assert_eq!(o.falsify_pair(&f(1, 0, 5), &f(1, 0, 6)).unwrap().len(), 10);
        assert!(o.falsify_pair(&f(2, 1, 3), &f(2, 1, 3)).unwrap().is_empty());
        assert!(o.falsify_pair(&f(2, 0, 2), &f(1, 0, 1)).is_err());
    }

    #[test]
    fn limits() {
        assert!(matches!(
            Oracle::new(MAX_LIMIT + 1),
            Err(Error::Resource(_))
        ));
        let c = classifier().make_class(&[f(1, 0, 9), f(1, 0, 12)]).unwrap();
        assert!(verify_class(&c, 500).is_err());
    }
}
