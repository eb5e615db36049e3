//! Class groups Cl(D) of primitive forms and their structure.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use crate::arith::{self, factorize, kronecker};
use crate::compose::{self, Composer};
use crate::error::{Error, Result};
use crate::qform::{self, Form};

/// Invariant factors n₁ | n₂ | … of a finite abelian group, ascending.
/// The trivial group has no factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct GroupType(Vec<u64>);

impl GroupType {
    pub fn trivial() -> Self {
        GroupType(Vec::new())
    }

    /// Normalizes a direct sum of cyclic groups Z/n₁ ⊕ Z/n₂ ⊕ … to invariant factors.
    pub fn from_cyclic(orders: &[u64]) -> Self {
        let mut parts: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for &n in orders.iter().filter(|&&n| n > 1) {
            for &(p, e) in &factorize(n).factors {
                parts.entry(p).or_default().push(e);
            }
        }
        Self::from_primary(parts)
    }

    /// Builds from p-primary parts given as lists of exponents.
    fn from_primary(mut parts: BTreeMap<u64, Vec<u32>>) -> Self {
        let len = parts.values().map(Vec::len).max().unwrap_or(0);
        let mut factors = vec![1u64; len];
        for (p, exps) in parts.iter_mut() {
            exps.sort_unstable_by(|a, b| b.cmp(a));
            // the largest exponent goes on the largest factor
            for (k, &e) in exps.iter().enumerate() {
                factors[len - 1 - k] *= p.pow(e);
            }
        }
        GroupType(factors)
    }

    pub fn invariant_factors(&self) -> &[u64] {
        &self.0
    }

    pub fn order(&self) -> u64 {
        self.0.iter().product()
    }

    pub fn exponent(&self) -> u64 {
        self.0.last().copied().unwrap_or(1)
    }

    /// Rank of the 2-torsion: G[2] ≅ (Z/2)^rank.
    pub fn two_rank(&self) -> u32 {
        self.0.iter().filter(|&&n| n % 2 == 0).count() as u32
    }

    /// True iff the group injects into (Z/2)^r ⊕ Z/4.
    pub fn divides_224(&self) -> bool {
        match self.0.split_last() {
            None => true,
            Some((&last, rest)) => rest.iter().all(|&n| n == 2) && (last == 2 || last == 4),
        }
    }

    /// True iff some invariant factor equals 4.
    pub fn has_four(&self) -> bool {
        self.0.contains(&4)
    }
}

impl fmt::Display for GroupType {
    /// Written "(2,2,4)", and "(1)" for the trivial group.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(1)");
        }
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for GroupType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
        let mut orders = Vec::new();
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            orders.push(
                part.parse::<u64>()
                    .map_err(|e| Error::Parse(format!("group type {s:?}: {e}")))?,
            );
        }
        Ok(GroupType::from_cyclic(&orders))
    }
}

/// Number h of primitive reduced forms and number of those of order ≤ 2.
///
/// A reduced form has order ≤ 2 exactly when b = 0, b = a or a = c, so no
/// composition is needed. Since h = #G[2]·#G², the pair decides whether Cl(D)
/// has type dividing (2,…,2,4), i.e. #G² ≤ 2.
pub fn census(disc: i64) -> Result<(u64, u64)> {
    let forms = qform::enumerate_reduced(disc, true)?;
    let amb = forms
        .iter()
        .filter(|q| q.b == 0 || q.b == q.a || q.a == q.c)
        .count() as u64;
    Ok((forms.len() as u64, amb))
}

/// Cheap type test from [`census`].
pub fn type_divides_224_by_count(disc: i64) -> Result<bool> {
    let (h, amb) = census(disc)?;
    Ok(h <= 2 * amb)
}

pub struct ClassGroup {
    disc: i64,
    forms: Vec<Form>,
    index: HashMap<Form, usize>,
    composer: Arc<dyn Composer>,
}

impl fmt::Debug for ClassGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassGroup")
            .field("disc", &self.disc)
            .field("h", &self.forms.len())
            .field("composer", &self.composer.name())
            .finish()
    }
}

impl ClassGroup {
    pub fn new(disc: i64) -> Result<Self> {
        Self::with_composer(disc, compose::composer(compose::DEFAULT_COMPOSER)?)
    }

    pub fn with_composer(disc: i64, composer: Arc<dyn Composer>) -> Result<Self> {
        let forms: Vec<Form> = qform::enumerate_reduced(disc, true)?
            .into_iter()
            .map(|q| q.form())
            .collect();
        let index = forms.iter().enumerate().map(|(i, q)| (*q, i)).collect();
        let g = ClassGroup {
            disc,
            forms,
            index,
            composer,
        };
        #[cfg(debug_assertions)]
        if g.h() <= 24 {
            g.verify_axioms()?;
        }
        Ok(g)
    }

    pub fn disc(&self) -> i64 {
        self.disc
    }

    pub fn h(&self) -> u64 {
        self.forms.len() as u64
    }

    /// The SL₂-reduced primitive forms, sorted by (a, |b|, sign of b).
    pub fn forms(&self) -> &[Form] {
        &self.forms
    }

    pub fn identity(&self) -> Form {
        self.forms[0]
    }

    pub fn contains(&self, q: &Form) -> bool {
        self.index.contains_key(q)
    }

    pub fn position(&self, q: &Form) -> Option<usize> {
        self.index.get(q).copied()
    }

    fn member(&self, q: &Form) -> Result<Form> {
        if q.checked_discriminant()? != self.disc {
            return Err(Error::domain(format!(
                "{q} does not have discriminant {}",
                self.disc
            )));
        }
        let r = qform::reduce_sl2(q)?.form();
        if !self.contains(&r) {
            return Err(Error::domain(format!("{q} is not primitive")));
        }
        Ok(r)
    }

    pub fn compose(&self, p: &Form, q: &Form) -> Result<Form> {
        self.member(p)?;
        self.member(q)?;
        self.composer.compose(p, q)
    }

    pub fn inverse(&self, q: &Form) -> Result<Form> {
        let q = self.member(q)?;
        Ok(qform::reduce_sl2(&q.opposite())?.form())
    }

    pub fn pow(&self, q: &Form, mut n: u64) -> Result<Form> {
        let mut base = self.member(q)?;
        let mut acc = self.identity();
        while n > 0 {
            if n & 1 == 1 {
                acc = self.composer.compose(&acc, &base)?;
            }
            base = self.composer.compose(&base, &base)?;
            n >>= 1;
        }
        Ok(acc)
    }

    pub fn order_of(&self, q: &Form) -> Result<u64> {
        let q = self.member(q)?;
        let id = self.identity();
        let mut x = q;
        let mut n = 1;
        while x != id {
            x = self.composer.compose(&x, &q)?;
            n += 1;
        }
        Ok(n)
    }

    /// Structure from the element-order census: #G[p^k] for each p | h
    /// determines the p-primary part.
    pub fn group_type(&self) -> Result<GroupType> {
        let orders = self
            .forms
            .iter()
            .map(|q| self.order_of(q))
            .collect::<Result<Vec<u64>>>()?;
        let mut parts = BTreeMap::new();
        for &(p, _) in &factorize(self.h()).factors {
            // ranks[k-1] = log_p(#G[p^k] / #G[p^(k-1)]) = #{cyclic factors with exponent ≥ k}
            let mut ranks = Vec::new();
            let mut prev = 1u64;
            let mut pk = p;
            loop {
                let count = orders.iter().filter(|&&o| pk % o == 0).count() as u64;
                if count == prev {
                    break;
                }
                let mut ratio = count / prev;
                let mut r = 0u32;
                while ratio > 1 {
                    ratio /= p;
                    r += 1;
                }
                ranks.push(r);
                prev = count;
                pk *= p;
            }
            let exps: Vec<u32> = (1..=ranks.first().copied().unwrap_or(0))
                .map(|j| ranks.iter().filter(|&&r| r >= j).count() as u32)
                .collect();
            parts.insert(p, exps);
        }
        let t = GroupType::from_primary(parts);
        debug_assert_eq!(t.order(), self.h());
        Ok(t)
    }

    /// #G² ≤ 2, which holds iff G has type dividing (2,…,2,4).
    pub fn is_type_dividing_224(&self) -> Result<bool> {
        let mut squares = HashSet::new();
        for q in &self.forms {
            squares.insert(self.composer.compose(q, q)?);
            if squares.len() > 2 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Multiplication table on positions in `forms()`.
    pub fn cayley_table(&self) -> Result<Vec<Vec<usize>>> {
        self.forms
            .iter()
            .map(|p| {
                self.forms
                    .iter()
                    .map(|q| {
                        let pq = self.composer.compose(p, q)?;
                        self.position(&pq).ok_or_else(|| {
                            Error::domain(format!("Cl({}) not closed: {p}·{q} = {pq}", self.disc))
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Exhaustive check of closure, identity, inverses, commutativity and
    /// associativity over all triples, via the Cayley table.
    pub fn verify_axioms(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::domain(format!("Cl({}) fails {what}", self.disc)));
        if self.identity() != Form::principal(self.disc)? {
            return bad("identity is principal");
        }
        let t = self.cayley_table()?;
        let n = t.len();
        for i in 0..n {
            if t[0][i] != i || !t[i].contains(&0) {
                return bad("identity or inverses");
            }
            for j in 0..n {
                if t[i][j] != t[j][i] {
                    return bad("commutativity");
                }
                for k in 0..n {
                    if t[t[i][j]][k] != t[i][t[j][k]] {
                        return bad("associativity");
                    }
                }
            }
        }
        Ok(())
    }
}

/// Shared cache of class groups, built once per discriminant.
pub struct GroupCache {
    composer: Arc<dyn Composer>,
    groups: RwLock<HashMap<i64, Arc<ClassGroup>>>,
}

impl GroupCache {
    pub fn new(composer: Arc<dyn Composer>) -> Self {
        GroupCache {
            composer,
            groups: RwLock::new(HashMap::new()),
        }
    }

    pub fn get(&self, disc: i64) -> Result<Arc<ClassGroup>> {
        if let Some(g) = self.groups.read().expect("cache poisoned").get(&disc) {
            return Ok(Arc::clone(g));
        }
        let built = Arc::new(ClassGroup::with_composer(disc, Arc::clone(&self.composer))?);
        let mut map = self.groups.write().expect("cache poisoned");
        Ok(Arc::clone(map.entry(disc).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.groups.read().expect("cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for GroupCache {
    fn default() -> Self {
        GroupCache::new(compose::composer(compose::DEFAULT_COMPOSER).expect("default composer"))
    }
}

pub fn class_group(disc: i64) -> Result<ClassGroup> {
    ClassGroup::new(disc)
}

/// h(df²) from h(d) via the exact sequence for the order of conductor f.
pub fn h_formula(d: i64, f: u64) -> Result<u64> {
    if !arith::is_fundamental(d) {
        return Err(Error::domain(format!(
            "{d} is not a fundamental discriminant"
        )));
    }
    if f == 0 {
        return Err(Error::domain("conductor must be positive"));
    }
    let mut h = qform::class_number_by_count(d)?;
    for &(p, e) in &factorize(f).factors {
        let chi = kronecker(d, p as i64) as i64;
        h *= p.pow(e - 1) * (p as i64 - chi) as u64;
    }
    let units = match (d, f > 1) {
        (-3, true) => 3,
        (-4, true) => 2,
        _ => 1,
    };
    Ok(h / units)
}

/// Structure of (A/p^eA)*/(Z/p^eZ)* for the maximal order A of Q(√d).
pub fn local_unit_quotient(d: i64, p: u64, e: u32) -> Result<GroupType> {
    if !arith::is_fundamental(d) {
        return Err(Error::domain(format!(
            "{d} is not a fundamental discriminant"
        )));
    }
    if !arith::is_prime(p) || e == 0 {
        return Err(Error::domain(format!("need a prime power, got {p}^{e}")));
    }
    let pe = |k: u32| p.pow(k);
    let cyclic: Vec<u64> = match p {
        2 => match (d.rem_euclid(8), e) {
            (1, 1) => vec![],
            (1, _) => vec![2, pe(e - 2)],
            (5, 1) => vec![3],
            (5, _) => vec![3, 2, pe(e - 2)],
            (4, _) => vec![2, pe(e - 1)],
            (0, _) => vec![pe(e)],
            _ => unreachable!("fundamental discriminants are 0, 1, 4, 5 mod 8"),
        },
        3 => match (d.rem_euclid(3), d.rem_euclid(9)) {
            (1, _) => vec![2, pe(e - 1)],
            (2, _) => vec![4, pe(e - 1)],
            (0, 3) => vec![pe(e)],
            (0, 6) => vec![3, pe(e - 1)],
            _ => unreachable!("fundamental discriminants are not divisible by 9"),
        },
        _ => match kronecker(d, p as i64) {
            1 => vec![p - 1, pe(e - 1)],
            -1 => vec![p + 1, pe(e - 1)],
            _ => vec![pe(e)],
        },
    };
    Ok(GroupType::from_cyclic(&cyclic))
}
