//! Positive definite binary quadratic forms ⟨a,b,c⟩ = ax² + bxy + cy².

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use num_integer::{Integer, Roots};

use crate::arith::{self, PrimeTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Form {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Form {
    pub const fn new(a: i64, b: i64, c: i64) -> Self {
        Form { a, b, c }
    }

    /// The principal form of discriminant `disc`.
    pub fn principal(disc: i64) -> Result<Self> {
        if !arith::is_discriminant(disc) {
            return Err(Error::domain(format!(
                "{disc} is not a negative discriminant"
            )));
        }
        Ok(if disc.rem_euclid(4) == 0 {
            Form::new(1, 0, -disc / 4)
        } else {
            Form::new(1, 1, (1 - disc) / 4)
        })
    }

    /// b² − 4ac, checked.
    pub fn discriminant(&self) -> i64 {
        self.checked_discriminant()
            .expect("discriminant overflows i64")
    }

    pub fn checked_discriminant(&self) -> Result<i64> {
        let d = (self.b as i128) * (self.b as i128) - 4 * (self.a as i128) * (self.c as i128);
        i64::try_from(d).map_err(|_| Error::Overflow("discriminant"))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a > 0 && self.checked_discriminant().is_ok_and(|d| d < 0)
    }

    pub fn is_primitive(&self) -> bool {
        self.a.gcd(&self.b).gcd(&self.c) == 1
    }

    pub fn eval(&self, x: i64, y: i64) -> i128 {
        let (x, y) = (x as i128, y as i128);
        self.a as i128 * x * x + self.b as i128 * x * y + self.c as i128 * y * y
    }

    /// ⟨a,−b,c⟩, the opposite form (inverse class).
    pub fn opposite(&self) -> Form {
        Form::new(self.a, -self.b, self.c)
    }

    pub fn is_sl2_reduced(&self) -> bool {
        let (a, b, c) = (self.a, self.b, self.c);
        b.abs() <= a && a <= c && (b >= 0 || (b.abs() != a && a != c))
    }

    pub fn is_gl2_reduced(&self) -> bool {
        0 <= self.b && self.b <= self.a && self.a <= self.c
    }

    /// Applies the substitution (x, y) ↦ (px + qy, rx + sy).
    pub fn transform(&self, p: i64, q: i64, r: i64, s: i64) -> Result<Form> {
        let (a, b, c) = (self.a as i128, self.b as i128, self.c as i128);
        let (p, q, r, s) = (p as i128, q as i128, r as i128, s as i128);
        let na = a * p * p + b * p * r + c * r * r;
        let nb = 2 * a * p * q + b * (p * s + q * r) + 2 * c * r * s;
        let nc = a * q * q + b * q * s + c * s * s;
        let conv = |v: i128| i64::try_from(v).map_err(|_| Error::Overflow("transform"));
        Ok(Form::new(conv(na)?, conv(nb)?, conv(nc)?))
    }

    fn require_definite(&self) -> Result<i64> {
        let disc = self.checked_discriminant()?;
        if self.a <= 0 || disc >= 0 {
            return Err(Error::domain(format!(
                "{self} is not positive definite (discriminant {disc})"
            )));
        }
        Ok(disc)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.a, self.b, self.c)
    }
}

impl FromStr for Form {
    type Err = Error;

    /// Accepts `a,b,c` with optional `<…>` or `⟨…⟩` brackets and whitespace.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .trim_start_matches(['<', '⟨', '('])
            .trim_end_matches(['>', '⟩', ')']);
        let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("expected a,b,c but got {s:?}")));
        }
        let mut v = [0i64; 3];
        for (slot, part) in v.iter_mut().zip(&parts) {
            *slot = part
                .parse()
                .map_err(|e| Error::Parse(format!("{part:?} in {s:?}: {e}")))?;
        }
        Ok(Form::new(v[0], v[1], v[2]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flavor {
    /// |b| ≤ a ≤ c, with b ≥ 0 whenever |b| = a or a = c.
    Sl2,
    /// 0 ≤ b ≤ a ≤ c.
    Gl2,
}

/// A form in one of the two canonical reduced shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReducedForm {
    form: Form,
    flavor: Flavor,
}

impl ReducedForm {
    pub fn form(&self) -> Form {
        self.form
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }
}

impl Deref for ReducedForm {
    type Target = Form;

    fn deref(&self) -> &Form {
        &self.form
    }
}

impl fmt::Display for ReducedForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.form.fmt(f)
    }
}

pub fn discriminant(q: &Form) -> i64 {
    q.discriminant()
}

/// Normalize so that −a < b ≤ a.
fn normalize(a: i128, b: i128, c: i128) -> (i128, i128, i128) {
    if -a < b && b <= a {
        return (a, b, c);
    }
    let r = Integer::div_floor(&(a - b), &(2 * a));
    let nb = b + 2 * r * a;
    let nc = a * r * r + b * r + c;
    (a, nb, nc)
}

pub(crate) fn reduce_raw(a: i128, b: i128, c: i128) -> Result<Form> {
    let (mut a, mut b, mut c) = normalize(a, b, c);
    while a > c {
        let (na, nb, nc) = normalize(c, -b, a);
        a = na;
        b = nb;
        c = nc;
    }
    if a == c && b < 0 {
        b = -b;
    }
    let conv = |v: i128| i64::try_from(v).map_err(|_| Error::Overflow("reduce"));
    Ok(Form::new(conv(a)?, conv(b)?, conv(c)?))
}

/// The SL₂(Z)-reduced form properly equivalent to `q`.
pub fn reduce_sl2(q: &Form) -> Result<ReducedForm> {
    q.require_definite()?;
    let form = reduce_raw(q.a as i128, q.b as i128, q.c as i128)?;
    debug_assert!(form.is_sl2_reduced());
    Ok(ReducedForm {
        form,
        flavor: Flavor::Sl2,
    })
}

/// The GL₂(Z)-reduced representative: the SL₂ reduction with b replaced by |b|.
pub fn reduce_gl2(q: &Form) -> Result<ReducedForm> {
    let r = reduce_sl2(q)?;
    Ok(ReducedForm {
        form: Form::new(r.a, r.b.abs(), r.c),
        flavor: Flavor::Gl2,
    })
}

/// Every SL₂-reduced form of discriminant `disc`, sorted by (a, |b|, sign of b).
pub fn enumerate_reduced(disc: i64, primitive_only: bool) -> Result<Vec<ReducedForm>> {
    if !arith::is_discriminant(disc) {
        return Err(Error::domain(format!(
            "{disc} is not a negative discriminant"
        )));
    }
    let n = disc.unsigned_abs();
    let bmax = (n / 3).sqrt() as i64;
    let mut out = Vec::new();
    let mut b = disc.rem_euclid(2);
    while b <= bmax {
        let m = (b * b - disc) / 4;
        let amax = m.sqrt();
        for a in b.max(1)..=amax {
            if m % a != 0 {
                continue;
            }
            let c = m / a;
            let q = Form::new(a, b, c);
            if primitive_only && !q.is_primitive() {
                continue;
            }
            out.push(q);
            if b > 0 && b != a && a != c {
                out.push(Form::new(a, -b, c));
            }
        }
        b += 2;
    }
    out.sort_by_key(|q| (q.a, q.b.abs(), q.b < 0));
    Ok(out
        .into_iter()
        .map(|form| ReducedForm {
            form,
            flavor: Flavor::Sl2,
        })
        .collect())
}

/// The GL₂-reduced primitive forms of discriminant `disc`.
pub fn enumerate_gl2(disc: i64) -> Result<Vec<Form>> {
    Ok(enumerate_reduced(disc, true)?
        .into_iter()
        .filter(|q| q.b >= 0)
        .map(|q| q.form())
        .collect())
}

/// Number of primitive reduced forms, counted without materializing the list.
pub fn class_number_by_count(disc: i64) -> Result<u64> {
    if !arith::is_discriminant(disc) {
        return Err(Error::domain(format!(
            "{disc} is not a negative discriminant"
        )));
    }
    let n = disc.unsigned_abs();
    let bmax = (n / 3).sqrt() as i64;
    let mut h = 0u64;
    let mut b = disc.rem_euclid(2);
    while b <= bmax {
        let m = (b * b - disc) / 4;
        let amax = m.sqrt();
        let g0 = b;
        for a in b.max(1)..=amax {
            if m % a != 0 {
                continue;
            }
            let c = m / a;
            if g0.gcd(&a).gcd(&c) != 1 {
                continue;
            }
            h += if b > 0 && b != a && a != c { 2 } else { 1 };
        }
        b += 2;
    }
    Ok(h)
}

/// Whether `q` represents `n`: some integers x, y with q(x, y) = n.
pub fn represents(q: &Form, n: u64) -> Result<bool> {
    let disc = q.require_definite()?;
    if n == 0 {
        return Ok(true);
    }
    let absd = disc.unsigned_abs() as u128;
    let n = n as u128;
    let a = q.a as i128;
    let b = q.b as i128;
    // 4a·q(x,y) = (2ax + by)² + |D|y², so |D|y² ≤ 4an.
    let ymax = ((4 * a as u128 * n) / absd).sqrt() as i128;
    for y in 0..=ymax {
        // a x² + (b y) x + (c y² − n) = 0
        let disc_x = 4 * a * n as i128 - absd as i128 * y * y;
        if disc_x < 0 {
            continue;
        }
        let s = (disc_x as u128).sqrt() as i128;
        if s * s != disc_x {
            continue;
        }
        for num in [-b * y + s, -b * y - s] {
            if num.rem_euclid(2 * a) == 0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// The primes up to a limit represented by a form, as a bitset indexed by integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimeSet {
    limit: u64,
    bits: FixedBitSet,
}

impl PrimeSet {
    pub fn empty(limit: u64) -> Self {
        PrimeSet {
            limit,
            bits: FixedBitSet::with_capacity(limit as usize + 1),
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn insert(&mut self, p: u64) {
        self.bits.insert(p as usize);
    }

    pub fn contains(&self, p: u64) -> bool {
        p <= self.limit && self.bits.contains(p as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.bits.ones().map(|i| i as u64)
    }

    /// Primes in `self` but not in `other`.
    pub fn difference<'a>(&'a self, other: &'a PrimeSet) -> impl Iterator<Item = u64> + 'a {
        self.bits.difference(&other.bits).map(|i| i as u64)
    }

    pub fn is_subset(&self, other: &PrimeSet) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

/// Marks every prime value q(x, y) ≤ limit by walking the ellipse q(x, y) ≤ limit.
pub fn represented_primes(q: &Form, primes: &PrimeTable) -> Result<PrimeSet> {
    represented_primes_upto(q, primes.limit(), primes)
}

pub fn represented_primes_upto(q: &Form, limit: u64, primes: &PrimeTable) -> Result<PrimeSet> {
    let disc = q.require_definite()?;
    if limit > primes.limit() {
        return Err(Error::resource(format!(
            "limit {limit} exceeds the prime table ({})",
            primes.limit()
        )));
    }
    let absd = disc.unsigned_abs() as i128;
    let (a, b) = (q.a as i128, q.b as i128);
    let lim = limit as i128;
    let is_prime = primes.bits();
    let mut set = PrimeSet::empty(limit);
    let ymax = ((4 * a * lim) / absd).sqrt();
    // (x, y) and (−x, −y) give equal values, so y ≥ 0 suffices.
    for y in 0..=ymax {
        let disc_x = 4 * a * lim - absd * y * y;
        if disc_x < 0 {
            continue;
        }
        let s = disc_x.sqrt();
        let mut x = Integer::div_floor(&(-b * y - s), &(2 * a)) - 1;
        let xmax = Integer::div_floor(&(-b * y + s), &(2 * a)) + 1;
        while x <= xmax {
            let v = q.eval(x as i64, y as i64);
            if v <= lim && v >= 2 && is_prime.contains(v as usize) {
                set.insert(v as u64);
            }
            x += 1;
        }
    }
    Ok(set)
}

/// The same set as [`represented_primes`], computed one prime at a time.
pub fn represented_primes_pointwise(q: &Form, limit: u64, primes: &PrimeTable) -> Result<PrimeSet> {
    q.require_definite()?;
    let mut set = PrimeSet::empty(limit);
    for &p in primes.primes().iter().take_while(|&&p| p <= limit) {
        if represents(q, p)? {
            set.insert(p);
        }
    }
    Ok(set)
}

/// The form ⟨p, b, c⟩ of discriminant `disc` with 0 ≤ b ≤ p, if p is represented
/// by some form of that discriminant (i.e. D is a square mod 4p).
pub fn prime_form(disc: i64, p: u64) -> Option<Form> {
    let pi = p as i64;
    let b = if p == 2 {
        (0..4).find(|b| (b * b - disc).rem_euclid(8) == 0)?
    } else {
        let r = arith::sqrt_mod_prime(disc.rem_euclid(pi) as u64, p)? as i64;
        if (r - disc).rem_euclid(2) == 0 {
            r
        } else {
            pi - r
        }
    };
    let c = (b * b - disc) / (4 * pi);
    debug_assert_eq!(b * b - 4 * pi * c, disc);
    Some(Form::new(pi, b, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(a: i64, b: i64, c: i64) -> Form {
        Form::new(a, b, c)
    }

    #[test]
    fn discriminant_examples() {
        assert_eq!(f(1, 0, 5).discriminant(), -20);
        assert_eq!(f(1, 1, 1).discriminant(), -3);
        assert_eq!(f(7, 6, 39).discriminant(), -1056);
    }

    #[test]
    fn reduction_examples() {
        assert_eq!(reduce_sl2(&f(5, 4, 1)).unwrap().form(), f(1, 0, 1));
        assert_eq!(reduce_sl2(&f(1, 0, 5)).unwrap().form(), f(1, 0, 5));
        assert_eq!(reduce_sl2(&f(2, -1, 3)).unwrap().form(), f(2, -1, 3));
        assert_eq!(reduce_gl2(&f(2, -1, 3)).unwrap().form(), f(2, 1, 3));
        assert_eq!(reduce_gl2(&f(1, 0, 5)).unwrap().form(), f(1, 0, 5));
        assert_eq!(reduce_gl2(&f(13, -6, 21)).unwrap().form(), f(13, 6, 21));
        // boundary sign rule
        assert_eq!(reduce_sl2(&f(2, -2, 3)).unwrap().form(), f(2, 2, 3));
        assert_eq!(reduce_sl2(&f(3, -2, 3)).unwrap().form(), f(3, 2, 3));
    }

    #[test]
    fn reduction_rejects_indefinite() {
        assert!(matches!(reduce_sl2(&f(1, 3, 1)), Err(Error::Domain(_))));
        assert!(matches!(reduce_sl2(&f(1, 2, 1)), Err(Error::Domain(_))));
        assert!(matches!(reduce_sl2(&f(-1, 0, -1)), Err(Error::Domain(_))));
    }

    #[test]
    fn enumeration_examples() {
        let forms = |d| -> Vec<Form> {
            enumerate_reduced(d, true)
                .unwrap()
                .into_iter()
                .map(|q| q.form())
                .collect()
        };
        assert_eq!(forms(-4), vec![f(1, 0, 1)]);
        assert_eq!(forms(-15), vec![f(1, 1, 4), f(2, 1, 2)]);
        assert_eq!(forms(-1056).len(), 16);
        assert_eq!(forms(-47).len(), 5);
        // non-primitive ⟨2,0,2⟩ appears only when asked for
        assert_eq!(enumerate_reduced(-16, false).unwrap().len(), 2);
        assert_eq!(enumerate_reduced(-16, true).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 3..=600i64 {
            let disc = -n;
            if !arith::is_discriminant(disc) {
                continue;
            }
            let mut brute = Vec::new();
            for a in 1..=n {
                for b in -a..=a {
                    if (b * b - disc) % (4 * a) != 0 {
                        continue;
                    }
                    let c = (b * b - disc) / (4 * a);
                    let q = f(a, b, c);
                    if q.is_sl2_reduced() && q.is_primitive() {
                        brute.push(q);
                    }
                }
            }
            let mut fast: Vec<Form> = enumerate_reduced(disc, true)
                .unwrap()
                .into_iter()
                .map(|q| q.form())
                .collect();
            brute.sort();
            fast.sort();
            assert_eq!(fast, brute, "D = {disc}");
            assert_eq!(class_number_by_count(disc).unwrap(), fast.len() as u64);
        }
    }

    #[test]
    fn represents_examples() {
        assert!(represents(&f(1, 0, 9), 13).unwrap());
        assert!(represents(&f(1, 0, 5), 5).unwrap());
        assert!(!represents(&f(1, 0, 25), 5).unwrap());
        assert!(represents(&f(2, 2, 11), 2).unwrap());
        assert!(!represents(&f(8, 4, 11), 2).unwrap());
    }

    #[test]
    fn represented_primes_examples() {
        let table = PrimeTable::new(100).unwrap();
        let ps: Vec<u64> = represented_primes(&f(1, 0, 9), &table)
            .unwrap()
            .iter()
            .collect();
        assert_eq!(ps, vec![13, 37, 61, 73, 97]);
        let direct: Vec<u64> = table
            .primes()
            .iter()
            .copied()
            .filter(|p| p % 12 == 1)
            .collect();
        assert_eq!(ps, direct);
        let ps12: Vec<u64> = represented_primes(&f(1, 0, 12), &table)
            .unwrap()
            .iter()
            .collect();
        assert_eq!(ps12, ps);
        let small = PrimeTable::new(2).unwrap();
        assert!(represented_primes(&f(1, 1, 1), &small).unwrap().is_empty());
        assert_eq!(
            represented_primes(&f(1, 0, 1), &small)
                .unwrap()
                .iter()
                .collect::<Vec<_>>(),
            vec![2]
        );
    }

    #[test]
    fn ellipse_walk_agrees_with_pointwise_search() {
        let table = PrimeTable::new(20_000).unwrap();
        for q in [
            f(1, 0, 9),
            f(7, 6, 39),
            f(2, 2, 11),
            f(5, 2, 53),
            f(13, 4, 52),
            f(1, 1, 1),
        ] {
            assert_eq!(
                represented_primes(&q, &table).unwrap(),
                represented_primes_pointwise(&q, 20_000, &table).unwrap(),
                "{q}"
            );
        }
    }

    #[test]
    fn prime_forms_represent_their_prime() {
        for disc in [-15i64, -20, -84, -1056, -2112, -3, -4, -7] {
            for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31] {
                if let Some(q) = prime_form(disc, p) {
                    assert_eq!(q.discriminant(), disc);
                    assert!(represents(&q, p).unwrap());
                } else {
                    assert_eq!(arith::kronecker(disc, p as i64), -1, "D={disc} p={p}");
                }
            }
        }
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("12,10,3".parse::<Form>().unwrap(), f(12, 10, 3));
        assert_eq!("<7, 6, 39>".parse::<Form>().unwrap(), f(7, 6, 39));
        assert_eq!("⟨1,-1,2⟩".parse::<Form>().unwrap(), f(1, -1, 2));
        assert!("1,2".parse::<Form>().is_err());
        assert_eq!(f(7, 6, 39).to_string(), "<7,6,39>");
    }

    fn unimodular() -> impl Strategy<Value = (i64, i64, i64, i64)> {
        (-10i64..=10, -10i64..=10, -10i64..=10, -10i64..=10)
            .prop_filter("det ±1", |(p, q, r, s)| (p * s - q * r).abs() == 1)
    }

    fn definite_form() -> impl Strategy<Value = Form> {
        (1i64..60, -60i64..60, 1i64..60)
            .prop_map(|(a, b, c)| f(a, b, c))
            .prop_filter("definite", |q| q.is_positive_definite())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn reduction_invariants(q in definite_form()) {
            let r = reduce_sl2(&q).unwrap();
            prop_assert!(r.is_sl2_reduced());
            prop_assert_eq!(r.discriminant(), q.discriminant());
            prop_assert_eq!(r.is_primitive(), q.is_primitive());
            prop_assert_eq!(reduce_sl2(&r).unwrap(), r);
            let g = reduce_gl2(&q).unwrap();
            prop_assert!(g.is_gl2_reduced());
            prop_assert_eq!(g.form(), Form::new(r.a, r.b.abs(), r.c));
        }

        #[test]
        fn prime_sets_invariant_under_unimodular_change(q in definite_form(), u in unimodular()) {
            let table = PrimeTable::new(10_000).unwrap();
            let moved = q.transform(u.0, u.1, u.2, u.3).unwrap();
            prop_assert_eq!(
                represented_primes(&q, &table).unwrap(),
                represented_primes(&moved, &table).unwrap()
            );
            // proper changes of variable land on the same SL₂ class
            if u.0 * u.3 - u.1 * u.2 == 1 {
                prop_assert_eq!(reduce_sl2(&q).unwrap(), reduce_sl2(&moved).unwrap());
            }
        }
    }
}
