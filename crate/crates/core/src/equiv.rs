//! The relation Q₁ ~ Q₂ (represent the same primes up to a finite set) and the
//! equivalence classes it generates.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::arith::{self, PrimeTable};
use crate::classgrp::{GroupCache, GroupType};
use crate::compose::Composer;
use crate::error::{Error, Result};
use crate::genus::{self, GenusBasis, Span};
use crate::qform::{self, Form};

/// Disjoint-set union with path halving and union by size.
#[derive(Debug, Clone)]
pub struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl Dsu {
    pub fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// One form of an equivalence class with its order data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    /// GL₂-reduced.
    pub form: Form,
    pub disc: i64,
    pub d: i64,
    pub f: u64,
    pub group: GroupType,
    /// Primes this form represents that some other member does not.
    pub exceptional: Vec<u64>,
}

impl Member {
    fn sort_key(&self) -> (u64, Form) {
        (self.disc.unsigned_abs(), self.form)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivClass {
    /// Grouped by fundamental discriminant; groups ordered by their smallest
    /// |D|, members by ascending |D| within a group.
    pub members: Vec<Member>,
    pub genus: Span,
}

impl EquivClass {
    fn new(mut members: Vec<Member>, genus: Span) -> Self {
        members.sort_by_key(Member::sort_key);
        let mut groups: Vec<(i64, Vec<Member>)> = Vec::new();
        for m in members {
            match groups.iter_mut().find(|(d, _)| *d == m.d) {
                Some((_, g)) => g.push(m),
                None => groups.push((m.d, vec![m])),
            }
        }
        EquivClass {
            members: groups.into_iter().flat_map(|(_, g)| g).collect(),
            genus,
        }
    }

    /// δ(C): the fundamental discriminants, ascending by absolute value.
    pub fn delta(&self) -> Vec<i64> {
        let set: BTreeSet<(u64, i64)> = self
            .members
            .iter()
            .map(|m| (m.d.unsigned_abs(), m.d))
            .collect();
        set.into_iter().map(|(_, d)| d).collect()
    }

    /// Δ(C): the discriminants, ascending by absolute value.
    pub fn big_delta(&self) -> Vec<i64> {
        let set: BTreeSet<(u64, i64)> = self
            .members
            .iter()
            .map(|m| (m.disc.unsigned_abs(), m.disc))
            .collect();
        set.into_iter().map(|(_, d)| d).collect()
    }

    /// Union of the members' exceptional sets.
    pub fn exceptional(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self
            .members
            .iter()
            .flat_map(|m| m.exceptional.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    pub fn min_abs_disc(&self) -> u64 {
        self.members
            .iter()
            .map(|m| m.disc.unsigned_abs())
            .min()
            .unwrap_or(0)
    }

    /// Which of Tables 1–6 lists a class of this shape.
    pub fn table_number(&self) -> Option<u8> {
        match (self.delta().len(), self.members.len()) {
            (2, 2) => Some(1),
            (2, 3) => Some(2),
            (2, 4) => Some(3),
            (3, 3) => Some(4),
            (3, 4) => Some(5),
            (1, _) => Some(6),
            _ => None,
        }
    }

    fn order_key(&self) -> Vec<(u64, Form)> {
        self.members.iter().map(Member::sort_key).collect()
    }
}

/// Canonical class order: by smallest |D|, then by the member rows.
pub fn class_order(a: &EquivClass, b: &EquivClass) -> Ordering {
    a.min_abs_disc().cmp(&b.min_abs_disc()).then_with(|| {
        let (mut ka, mut kb) = (a.order_key(), b.order_key());
        ka.sort();
        kb.sort();
        ka.cmp(&kb)
    })
}

impl fmt::Display for EquivClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let forms: Vec<String> = self
            .members
            .iter()
            .map(|m| format!("{} (D={})", m.form, m.disc))
            .collect();
        write!(f, "{} {}", self.genus, forms.join(" ~ "))
    }
}

/// The classes with one fundamental discriminant that arise from the extra
/// units of Z[ζ₃] and Z[i]: (form, exceptional set) rows.
pub fn roots_of_unity_classes() -> [Vec<(Form, Vec<u64>)>; 2] {
    [
        vec![
            (Form::new(1, 1, 1), vec![3]),
            (Form::new(1, 0, 3), vec![3]),
            (Form::new(1, 1, 7), vec![]),
        ],
        vec![(Form::new(1, 0, 1), vec![2]), (Form::new(1, 0, 4), vec![])],
    ]
}

/// Shared state for classification: class groups and a prime table for
/// witness primes.
pub struct Classifier {
    groups: GroupCache,
    primes: Arc<PrimeTable>,
}

impl Classifier {
    pub fn new(primes: Arc<PrimeTable>, composer: Arc<dyn Composer>) -> Self {
        Classifier {
            groups: GroupCache::new(composer),
            primes,
        }
    }

    pub fn primes(&self) -> &PrimeTable {
        &self.primes
    }

    pub fn groups(&self) -> &GroupCache {
        &self.groups
    }

    /// GL₂-reduced primitive forms of `disc`.
    pub fn gl2_forms(&self, disc: i64) -> Result<Vec<Form>> {
        let g = self.groups.get(disc)?;
        Ok(g.forms().iter().copied().filter(|q| q.b >= 0).collect())
    }

    /// Image of `q` under the natural map Cl(D′) → Cl(D), D′ = r²D, as a
    /// GL₂-reduced form. Computed through a prime p ∤ 2D′ that `q` represents:
    /// the image class contains the prime form of D above p.
    pub fn restrict(&self, q: &Form, target: i64) -> Result<Form> {
        let disc = q.checked_discriminant()?;
        let ratio = disc / target;
        if target >= 0 || disc % target != 0 || arith::isqrt(ratio as u64).pow(2) != ratio as u64 {
            return Err(Error::domain(format!(
                "{disc} is not a square multiple of {target}"
            )));
        }
        let p = genus::witness_prime(q, &self.primes, 0)?;
        let image = qform::prime_form(target, p)
            .ok_or_else(|| Error::domain(format!("{p} does not split for D = {target}")))?;
        Ok(qform::reduce_gl2(&image)?.form())
    }

    /// All GL₂ classes of discriminant r²D restricting to the GL₂ class of `q`.
    pub fn lifts(&self, q: &Form, r: u64) -> Result<Vec<Form>> {
        let disc = q.checked_discriminant()?;
        let target = qform::reduce_gl2(q)?.form();
        let upper = disc
            .checked_mul((r * r) as i64)
            .ok_or(Error::Overflow("lifts"))?;
        let mut out = Vec::new();
        for cand in self.gl2_forms(upper)? {
            if self.restrict(&cand, disc)? == target {
                out.push(cand);
            }
        }
        Ok(out)
    }

    /// A 2-lift of `q`. For forms of order ≤ 2 with D even the lift is written
    /// down directly; otherwise the first preimage under restriction is returned.
    pub fn two_lift(&self, q: &Form) -> Result<Option<Form>> {
        let disc = q.checked_discriminant()?;
        let r = qform::reduce_sl2(q)?;
        let (a, b, c) = (r.a, r.b, r.c);
        if disc % 2 == 0 {
            let direct = if b == 0 && a % 2 == 1 {
                Some(Form::new(a, 0, 4 * c))
            } else if b == 0 {
                Some(Form::new(4 * a, 0, c))
            } else if b == a {
                Some(Form::new(4 * a, 2 * a, c))
            } else if a == c {
                Some(Form::new(a, 2 * b, 4 * a))
            } else {
                None
            };
            if let Some(l) = direct {
                return Ok(Some(qform::reduce_gl2(&l)?.form()));
            }
        }
        Ok(self.lifts(q, 2)?.into_iter().next())
    }

    /// The unique 2-lift of `q`, when it is unique.
    fn unique_two_lift(&self, q: &Form) -> Result<Option<Form>> {
        let lifts = self.lifts(q, 2)?;
        Ok(if lifts.len() == 1 {
            Some(lifts[0])
        } else {
            None
        })
    }

    fn special_unit_class(q: &Form) -> Option<Vec<Form>> {
        roots_of_unity_classes()
            .into_iter()
            .map(|c| c.into_iter().map(|(q, _)| q).collect::<Vec<_>>())
            .find(|c| c.contains(q))
    }

    /// Forms of the same fundamental discriminant, other than `q`, that
    /// represent almost the same primes as `q`.
    pub fn same_d_partners(&self, q: &Form) -> Result<Vec<Form>> {
        if !q.is_primitive() {
            return Err(Error::domain(format!("{q} is not primitive")));
        }
        let q = qform::reduce_gl2(q)?.form();
        let disc = q.discriminant();
        let (d, f) = arith::fundamental_decomposition(disc)?;
        let mut out = Vec::new();
        if let Some(class) = Self::special_unit_class(&q) {
            return Ok(class.into_iter().filter(|p| *p != q).collect());
        }
        // upward: at most two steps are possible, cap generously
        let mut cur = q;
        for _ in 0..6 {
            match self.unique_two_lift(&cur)? {
                Some(l) => {
                    out.push(l);
                    cur = l;
                }
                None => break,
            }
        }
        // downward
        let mut cur = q;
        let mut cur_f = f;
        while cur_f % 2 == 0 {
            let lower_disc = cur.discriminant() / 4;
            let lower_f = cur_f / 2;
            if (d == -3 || d == -4) && lower_f == 1 {
                break;
            }
            let below = self.restrict(&cur, lower_disc)?;
            if self.unique_two_lift(&below)? != Some(cur) {
                break;
            }
            out.push(below);
            cur = below;
            cur_f = lower_f;
        }
        out.sort_by_key(|p| (p.discriminant().unsigned_abs(), *p));
        Ok(out)
    }

    /// Forms of `disc` that may pair across fundamental discriminants: all of
    /// them when Cl(D) has exponent ≤ 2, only those of order 4 when Cl(D) has
    /// type (2,…,2,4) with a genuine 4, none otherwise.
    pub fn eligible_forms(&self, disc: i64) -> Result<(GroupType, Vec<Form>)> {
        let g = self.groups.get(disc)?;
        let t = g.group_type()?;
        if !t.divides_224() {
            return Ok((t, Vec::new()));
        }
        let mut out = Vec::new();
        for q in g.forms().iter().filter(|q| q.b >= 0) {
            if !t.has_four() || g.order_of(q)? == 4 {
                out.push(*q);
            }
        }
        Ok((t, out))
    }

    /// All pairs (Q₁, Q₂) with d₁ ≠ d₂ and Q₁ ~ Q₂ among forms of the given
    /// discriminants. Each pair is ordered by (|D|, form) and the list is sorted.
    pub fn cross_d_pairs(&self, discs: &[i64]) -> Result<Vec<(Form, Form)>> {
        let infos = discs
            .par_iter()
            .map(|&disc| self.disc_info(disc))
            .collect::<Result<Vec<_>>>()?;
        for info in &infos {
            if !info.group.divides_224() {
                return Err(Error::domain(format!(
                    "Cl({}) has type {}, not dividing (2,...,2,4)",
                    info.basis.disc, info.group
                )));
            }
        }
        let mut buckets: BTreeMap<Vec<i64>, Vec<&DiscInfo>> = BTreeMap::new();
        for info in &infos {
            buckets
                .entry(info.basis.span.rows().to_vec())
                .or_default()
                .push(info);
        }
        let mut pairs = Vec::new();
        for group in buckets.values() {
            for (i, x) in group.iter().enumerate() {
                for y in &group[i + 1..] {
                    if x.basis.d == y.basis.d {
                        continue;
                    }
                    for (q1, s1) in &x.eligible {
                        for (q2, s2) in &y.eligible {
                            if s1.values != s2.values {
                                continue;
                            }
                            // σ₁ restricted to P fixes K₁K₂: the witness splits in K₂
                            if arith::kronecker(y.basis.d, s1.witness_prime as i64) != 1 {
                                return Err(Error::domain(format!(
                                    "signature match {q1} / {q2} without splitting in K₂"
                                )));
                            }
                            let (a, b) = ordered(*q1, *q2);
                            pairs.push((a, b));
                        }
                    }
                }
            }
        }
        pairs.sort_by_key(|&(a, b)| (key(a), key(b)));
        pairs.dedup();
        Ok(pairs)
    }

    fn disc_info(&self, disc: i64) -> Result<DiscInfo> {
        let basis = genus::genus_basis_of(disc)?;
        let (group, forms) = self.eligible_forms(disc)?;
        let eligible = forms
            .into_iter()
            .map(|q| Ok((q, genus::signature(&q, &basis, &self.primes)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscInfo {
            basis,
            group,
            eligible,
        })
    }

    /// Equivalence classes among the GL₂ forms of `discs` (each of type
    /// dividing (2,…,2,4)): those with at least two fundamental discriminants,
    /// followed by the two root-of-unity classes when their discriminants are
    /// present. Sorted canonically.
    pub fn build_classes(&self, discs: &[i64]) -> Result<Vec<EquivClass>> {
        let mut discs = discs.to_vec();
        discs.sort_unstable_by_key(|d| d.unsigned_abs());
        discs.dedup();
        let present: BTreeSet<i64> = discs.iter().copied().collect();

        let mut nodes: Vec<Form> = Vec::new();
        let mut index: HashMap<Form, usize> = HashMap::new();
        for &disc in &discs {
            for q in self.gl2_forms(disc)? {
                index.insert(q, nodes.len());
                nodes.push(q);
            }
        }
        let mut dsu = Dsu::new(nodes.len());

        // same d, D → 4D
        let same_d_edges = discs
            .par_iter()
            .filter(|&&disc| present.contains(&(4 * disc)))
            .map(|&disc| self.same_d_edges(disc))
            .collect::<Result<Vec<_>>>()?;
        for (a, b) in same_d_edges.into_iter().flatten() {
            dsu.union(index[&a], index[&b]);
        }
        for (a, b) in self.cross_d_pairs(&discs)? {
            dsu.union(index[&a], index[&b]);
        }

        let mut comps: BTreeMap<usize, Vec<Form>> = BTreeMap::new();
        for (i, q) in nodes.iter().enumerate() {
            comps.entry(dsu.find(i)).or_default().push(*q);
        }
        let mut wanted: Vec<Vec<Form>> = comps
            .into_values()
            .filter(|c| {
                let ds: BTreeSet<i64> = c
                    .iter()
                    .map(|q| {
                        arith::fundamental_decomposition(q.discriminant())
                            .map(|x| x.0)
                            .unwrap_or(0)
                    })
                    .collect();
                ds.len() >= 2
            })
            .collect();
        for special in roots_of_unity_classes() {
            let forms: Vec<Form> = special.into_iter().map(|(q, _)| q).collect();
            if forms.iter().all(|q| present.contains(&q.discriminant())) {
                wanted.push(forms);
            }
        }
        let mut classes = wanted
            .par_iter()
            .map(|forms| self.make_class(forms))
            .collect::<Result<Vec<_>>>()?;
        classes.sort_by(class_order);
        Ok(classes)
    }

    fn same_d_edges(&self, disc: i64) -> Result<Vec<(Form, Form)>> {
        let (d, f) = arith::fundamental_decomposition(disc)?;
        if (d == -3 || d == -4) && f == 1 {
            return Ok(Vec::new());
        }
        let mut preimages: BTreeMap<Form, Vec<Form>> = BTreeMap::new();
        for up in self.gl2_forms(4 * disc)? {
            preimages
                .entry(self.restrict(&up, disc)?)
                .or_default()
                .push(up);
        }
        Ok(preimages
            .into_iter()
            .filter(|(_, ups)| ups.len() == 1)
            .map(|(q, ups)| (q, ups[0]))
            .collect())
    }

    /// Assembles a class from forms that share one genus field.
    pub fn make_class(&self, forms: &[Form]) -> Result<EquivClass> {
        let mut members = Vec::with_capacity(forms.len());
        let mut span: Option<Span> = None;
        for q in forms {
            let disc = q.checked_discriminant()?;
            let (d, f) = arith::fundamental_decomposition(disc)?;
            let basis: GenusBasis = genus::genus_basis(d, f as u64)?;
            match &span {
                None => span = Some(basis.span.clone()),
                Some(s) if *s != basis.span => {
                    return Err(Error::domain(format!(
                        "class members disagree on the genus field: {s} vs {}",
                        basis.span
                    )))
                }
                _ => {}
            }
            members.push(Member {
                form: qform::reduce_gl2(q)?.form(),
                disc,
                d,
                f: f as u64,
                group: self.groups.get(disc)?.group_type()?,
                exceptional: Vec::new(),
            });
        }
        let sets = exceptional_sets(&members.iter().map(|m| m.form).collect::<Vec<_>>())?;
        for (m, e) in members.iter_mut().zip(sets) {
            m.exceptional = e;
        }
        Ok(EquivClass::new(members, span.unwrap_or_default()))
    }
}

struct DiscInfo {
    basis: GenusBasis,
    group: GroupType,
    eligible: Vec<(Form, genus::Signature)>,
}

fn key(q: Form) -> (u64, Form) {
    (q.discriminant().unsigned_abs(), q)
}

fn ordered(a: Form, b: Form) -> (Form, Form) {
    if key(a) <= key(b) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Per-form exceptional sets of a class: p ∈ E(Q) when Q represents p and some
/// other member does not. Only primes dividing some member's discriminant can
/// occur, since the members agree on all unramified Frobenius classes.
pub fn exceptional_sets(forms: &[Form]) -> Result<Vec<Vec<u64>>> {
    let mut candidates = BTreeSet::new();
    for q in forms {
        candidates.extend(arith::factorize(q.checked_discriminant()?.unsigned_abs()).primes());
    }
    let mut reps: Vec<Vec<bool>> = Vec::with_capacity(forms.len());
    for q in forms {
        reps.push(
            candidates
                .iter()
                .map(|&p| qform::represents(q, p))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let cands: Vec<u64> = candidates.into_iter().collect();
    Ok(reps
        .iter()
        .map(|mine| {
            cands
                .iter()
                .enumerate()
                .filter(|&(j, _)| mine[j] && reps.iter().any(|other| !other[j]))
                .map(|(_, &p)| p)
                .collect()
        })
        .collect())
}

/// Class-wide exceptional set: the union over members.
pub fn exceptional_set(forms: &[Form]) -> Result<Vec<u64>> {
    let set: BTreeSet<u64> = exceptional_sets(forms)?.into_iter().flatten().collect();
    Ok(set.into_iter().collect())
}
