//! Genus class fields as spans of square classes, and genus characters of forms.
//!
//! A multiquadratic field Q(√m₁, …, √m_k) is stored as the subgroup of
//! Q*/Q*² generated by the mᵢ. Each square class is a squarefree integer, i.e. an
//! exponent vector over the coordinates (−1, 2, 3, 5, …). The span is kept in
//! reduced echelon form with each row pivoted on its largest prime, which makes
//! it canonical: equal fields have identical rows.

use std::fmt;
use std::str::FromStr;

use crate::arith::{self, factorize, kronecker, PrimeTable};
use crate::error::{Error, Result};
use crate::qform::{self, Form};

/// Product of two square classes, as a squarefree integer.
fn mul_class(x: i64, y: i64) -> i64 {
    let g = arith::gcd(x, y).abs();
    (x / g) * (y / g)
}

/// The largest coordinate present in a square class: its largest prime, or 1 for −1.
fn pivot(m: i64) -> u64 {
    debug_assert!(m != 1);
    factorize(m.unsigned_abs()).primes().last().unwrap_or(1)
}

fn has_coord(m: i64, coord: u64) -> bool {
    if coord == 1 {
        m < 0
    } else {
        m.unsigned_abs() % coord == 0
    }
}

/// Squarefree part of m, keeping the sign.
pub fn square_class(m: i64) -> i64 {
    assert!(m != 0, "0 has no square class");
    let mut out = m.signum();
    for &(p, e) in &factorize(m.unsigned_abs()).factors {
        if e % 2 == 1 {
            out *= p as i64;
        }
    }
    out
}

/// A subgroup of Q*/Q*² in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Span {
    /// Rows sorted by ascending pivot; each row's pivot coordinate is absent
    /// from all other rows.
    rows: Vec<i64>,
}

impl Span {
    pub fn from_generators(gens: impl IntoIterator<Item = i64>) -> Self {
        // echelon rows keyed by pivot
        let mut rows: Vec<(u64, i64)> = Vec::new();
        for g in gens {
            let mut v = square_class(g);
            while v != 1 {
                let p = pivot(v);
                match rows.iter().find(|(q, _)| *q == p) {
                    Some(&(_, r)) => v = mul_class(v, r),
                    None => {
                        rows.push((p, v));
                        break;
                    }
                }
            }
        }
        rows.sort_unstable();
        // back substitution: clear every other row's pivot coordinate
        for i in 0..rows.len() {
            for j in (0..i).rev() {
                let (q, s) = rows[j];
                if has_coord(rows[i].1, q) {
                    rows[i].1 = mul_class(rows[i].1, s);
                }
            }
        }
        Span {
            rows: rows.into_iter().map(|(_, r)| r).collect(),
        }
    }

    pub fn rows(&self) -> &[i64] {
        &self.rows
    }

    /// Dimension over the two-element field.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn contains(&self, m: i64) -> bool {
        let mut v = square_class(m);
        for &r in self.rows.iter().rev() {
            if has_coord(v, pivot(r)) {
                v = mul_class(v, r);
            }
        }
        v == 1
    }

    pub fn is_subspace_of(&self, other: &Span) -> bool {
        self.rows.iter().all(|&r| other.contains(r))
    }

    /// The generators in the customary order: −1 first when present, and then
    /// the remaining rows normalized to discriminant sign (p* for odd primes).
    pub fn display_generators(&self) -> Vec<i64> {
        if !self.contains(-1) {
            return self.rows.clone();
        }
        let mut out = vec![-1];
        for &r in &self.rows {
            if r == -1 {
                continue;
            }
            let odd = r.unsigned_abs() % 2 == 1;
            let r = r.abs();
            out.push(if odd && r % 4 == 3 { -r } else { r });
        }
        out
    }

    /// The square classes m in the span with (m/p) = +1: the largest subfield
    /// in which p splits completely.
    pub fn splitting_subspan(&self, p: u64) -> Span {
        let gens = self.display_generators();
        let chi: Vec<i8> = gens.iter().map(|&m| kronecker(m, p as i64)).collect();
        let anchor = chi.iter().position(|&c| c == -1);
        let mut kept = Vec::new();
        for (i, &m) in gens.iter().enumerate() {
            match (chi[i], anchor) {
                (1, _) => kept.push(m),
                (-1, Some(a)) if a != i => kept.push(mul_class(m, gens[a])),
                _ => {}
            }
        }
        Span::from_generators(kept)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .display_generators()
            .iter()
            .map(i64::to_string)
            .collect();
        write!(f, "Q[{}]", parts.join(", "))
    }
}

impl FromStr for Span {
    type Err = Error;

    /// Accepts "Q[-1, 2, -3]" or a bare comma list; "Q" alone is the trivial span.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().replace('−', "-");
        let inner = s
            .trim_start_matches('Q')
            .trim_start_matches('[')
            .trim_end_matches(']');
        let mut gens = Vec::new();
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let m: i64 = part
                .parse()
                .map_err(|e| Error::Parse(format!("generator {part:?}: {e}")))?;
            if m == 0 {
                return Err(Error::Parse("0 is not a square class".into()));
            }
            gens.push(m);
        }
        Ok(Span::from_generators(gens))
    }
}

/// The genus class field of the order of discriminant D = d·f².
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenusBasis {
    pub disc: i64,
    pub d: i64,
    pub f: u64,
    /// Fundamental discriminants generating the field over Q.
    pub generators: Vec<i64>,
    pub span: Span,
}

pub fn genus_basis(d: i64, f: u64) -> Result<GenusBasis> {
    if !arith::is_fundamental(d) {
        return Err(Error::domain(format!(
            "{d} is not a fundamental discriminant"
        )));
    }
    if f == 0 {
        return Err(Error::domain("conductor must be positive"));
    }
    let disc = d
        .checked_mul((f * f) as i64)
        .ok_or(Error::Overflow("genus_basis"))?;
    let mut gens = vec![d];
    for p in factorize(disc.unsigned_abs()).primes().filter(|&p| p != 2) {
        gens.push(arith::p_star(p)?);
    }
    let (d4, d8) = (d.rem_euclid(4), d.rem_euclid(8));
    let extras: &[i64] = match () {
        _ if d4 == 1 && f % 4 == 0 && f % 8 != 0 => &[-4],
        _ if d4 == 1 && f % 8 == 0 => &[-4, 8],
        _ if d8 == 4 && f % 4 == 0 => &[8],
        _ if d8 == 0 && f % 2 == 0 => &[-4],
        _ => &[],
    };
    gens.extend_from_slice(extras);
    let span = Span::from_generators(gens.iter().copied());
    Ok(GenusBasis {
        disc,
        d,
        f,
        generators: gens,
        span,
    })
}

/// Genus basis of any negative discriminant.
pub fn genus_basis_of(disc: i64) -> Result<GenusBasis> {
    let (d, f) = arith::fundamental_decomposition(disc)?;
    genus_basis(d, f as u64)
}

pub fn genus_field_equal(b1: &GenusBasis, b2: &GenusBasis) -> bool {
    b1.span == b2.span
}

impl fmt::Display for GenusBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.span.fmt(f)
    }
}

/// Genus characters of a form: Kronecker symbols of the displayed generators at
/// a prime the form represents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub generators: Vec<i64>,
    pub values: Vec<i8>,
    pub witness_prime: u64,
}

impl Signature {
    /// The subfield of the genus field fixed by the form's Frobenius.
    pub fn fixed_span(&self, basis: &GenusBasis) -> Span {
        basis.span.splitting_subspan(self.witness_prime)
    }
}

/// The smallest prime coprime to 2D represented by `q`, starting after `after`.
pub fn witness_prime(q: &Form, primes: &PrimeTable, after: u64) -> Result<u64> {
    let disc = q.checked_discriminant()?;
    for &p in primes.primes().iter().skip_while(|&&p| p <= after) {
        if p == 2 || disc % p as i64 == 0 {
            continue;
        }
        if qform::represents(q, p)? {
            return Ok(p);
        }
    }
    Err(Error::resource(format!(
        "no prime below {} represented by {q}",
        primes.limit()
    )))
}

pub fn signature(q: &Form, basis: &GenusBasis, primes: &PrimeTable) -> Result<Signature> {
    signature_after(q, basis, primes, 0)
}

/// As [`signature`], using the first admissible witness prime above `after`.
pub fn signature_after(
    q: &Form,
    basis: &GenusBasis,
    primes: &PrimeTable,
    after: u64,
) -> Result<Signature> {
    if q.checked_discriminant()? != basis.disc {
        return Err(Error::domain(format!(
            "{q} does not have discriminant {}",
            basis.disc
        )));
    }
    if !q.is_primitive() || !q.is_positive_definite() {
        return Err(Error::domain(format!(
            "{q} is not primitive positive definite"
        )));
    }
    let p = witness_prime(q, primes, after)?;
    let generators = basis.span.display_generators();
    let values = generators
        .iter()
        .map(|&m| kronecker(m, p as i64))
        .collect::<Vec<_>>();
    // every form represents p, so p splits in Q(√d); d lies in the span
    debug_assert_eq!(kronecker(basis.d, p as i64), 1);
    Ok(Signature {
        generators,
        values,
        witness_prime: p,
    })
}
