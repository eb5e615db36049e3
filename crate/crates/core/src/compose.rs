//! Gauss composition of primitive forms of one discriminant.
//!
//! Three interchangeable algorithms are provided; all return the SL₂-reduced
//! composite. They are cross-checked against each other in the tests.

use std::sync::{Arc, OnceLock};

use num_integer::Integer;

use crate::error::{Error, Result};
use crate::qform::{self, Form};
use crate::registry::Registry;

pub const DEFAULT_COMPOSER: &str = "dirichlet";

pub trait Composer: Send + Sync {
    fn name(&self) -> &'static str;

    /// Composite of two primitive positive definite forms with equal discriminant.
    /// Inputs need not be reduced; the output is SL₂-reduced.
    fn compose(&self, f: &Form, g: &Form) -> Result<Form>;
}

/// The built-in composers, keyed by name.
pub fn composers() -> &'static Registry<dyn Composer> {
    static REG: OnceLock<Registry<dyn Composer>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut reg: Registry<dyn Composer> = Registry::new("composer");
        reg.register("dirichlet", Arc::new(Dirichlet))
            .register("shanks", Arc::new(Shanks))
            .register("nucomp", Arc::new(Nucomp));
        reg
    })
}

pub fn composer(name: &str) -> Result<Arc<dyn Composer>> {
    composers().get(name)
}

/// Checks the shared preconditions and returns the discriminant.
pub fn check_pair(f: &Form, g: &Form) -> Result<i64> {
    let d1 = f.checked_discriminant()?;
    let d2 = g.checked_discriminant()?;
    if d1 != d2 {
        return Err(Error::domain(format!(
            "cannot compose {f} (D = {d1}) with {g} (D = {d2})"
        )));
    }
    for q in [f, g] {
        if !q.is_positive_definite() {
            return Err(Error::domain(format!("{q} is not positive definite")));
        }
        if !q.is_primitive() {
            return Err(Error::domain(format!("{q} is not primitive")));
        }
    }
    Ok(d1)
}

/// (g, x, y) with ax + by = g = gcd(a, b) ≥ 0.
fn xgcd(a: i128, b: i128) -> (i128, i128, i128) {
    let e = a.extended_gcd(&b);
    if e.gcd < 0 {
        (-e.gcd, -e.x, -e.y)
    } else {
        (e.gcd, e.x, e.y)
    }
}

/// Composition through united forms: with e = gcd(a₁, a₂, (b₁+b₂)/2) and
/// A = a₁a₂/e², pick B solving the three congruences and set C = (B² − D)/4A.
pub struct Dirichlet;

impl Composer for Dirichlet {
    fn name(&self) -> &'static str {
        "dirichlet"
    }

    fn compose(&self, f: &Form, g: &Form) -> Result<Form> {
        let disc = check_pair(f, g)? as i128;
        let (a1, b1) = (f.a as i128, f.b as i128);
        let (a2, b2) = (g.a as i128, g.b as i128);
        let s = (b1 + b2) / 2;
        // u a1 + v a2 + w s = e
        let (h, x, y) = xgcd(a1, a2);
        let (e, p, w) = xgcd(h, s);
        let (u, v) = (p * x, p * y);
        let big_a = a1 / e * (a2 / e);
        let num = u * a1 * b2 + v * a2 * b1 + w * (b1 * b2 + disc) / 2;
        debug_assert_eq!(num % e, 0);
        let big_b = (num / e).rem_euclid(2 * big_a);
        let rem = big_b * big_b - disc;
        debug_assert_eq!(rem % (4 * big_a), 0);
        qform::reduce_raw(big_a, big_b, rem / (4 * big_a))
    }
}

/// The two-gcd composition algorithm (Shanks, as presented by Cohen).
pub struct Shanks;

impl Composer for Shanks {
    fn name(&self) -> &'static str {
        "shanks"
    }

    fn compose(&self, f: &Form, g: &Form) -> Result<Form> {
        let disc = check_pair(f, g)? as i128;
        let (mut f1, mut f2) = (*f, *g);
        if f1.a > f2.a {
            std::mem::swap(&mut f1, &mut f2);
        }
        let (a1, b1) = (f1.a as i128, f1.b as i128);
        let (a2, b2, c2) = (f2.a as i128, f2.b as i128, f2.c as i128);
        let s = (b1 + b2) / 2;
        let n = b2 - s;

        let (d, y1) = if a2 % a1 == 0 {
            (a1, 0)
        } else {
            let (d, u, _v) = xgcd(a2, a1);
            (d, u)
        };
        let (d1, x2, y2) = if s % d == 0 {
            (d, 0, -1)
        } else {
            let (d1, x2, y2) = xgcd(s, d);
            (d1, x2, -y2)
        };
        let v1 = a1 / d1;
        let v2 = a2 / d1;
        let r = (y1 * y2 * n - x2 * c2).rem_euclid(v1);
        let b3 = b2 + 2 * v2 * r;
        let a3 = v1 * v2;
        let rem = b3 * b3 - disc;
        debug_assert_eq!(rem % (4 * a3), 0);
        qform::reduce_raw(a3, b3, rem / (4 * a3))
    }
}

/// NUCOMP (Shanks, in the formulation of Jacobson and van der Poorten): the
/// partial Euclidean step keeps intermediates near |D|^{1/2} before the final
/// reduction.
pub struct Nucomp;

impl Composer for Nucomp {
    fn name(&self) -> &'static str {
        "nucomp"
    }

    fn compose(&self, f: &Form, g: &Form) -> Result<Form> {
        let disc = check_pair(f, g)?;
        // NUCOMP wants reduced input for its size bound.
        let f = qform::reduce_raw(f.a as i128, f.b as i128, f.c as i128)?;
        let g = qform::reduce_raw(g.a as i128, g.b as i128, g.c as i128)?;
        let (mut l, mut r) = (f, g);
        if l.c < r.c {
            std::mem::swap(&mut l, &mut r);
        }
        let (u1, v1, w1) = (l.a as i128, l.b as i128, l.c as i128);
        let (u2, v2, w2) = (r.a as i128, r.b as i128, r.c as i128);
        let bound = ((disc.unsigned_abs() / 4) as f64).powf(0.25) as i128;

        let s = (v1 + v2) / 2;
        let m = v2 - s;

        let (ff, b, c) = xgcd(u2, u1);
        let (g0, big_bx, big_by, big_cy, big_dy) = if s % ff == 0 {
            (ff, m * b, u1 / ff, u2 / ff, s / ff)
        } else {
            let (g0, _x, y) = xgcd(ff, s);
            let h = ff / g0;
            let big_by = u1 / g0;
            let big_cy = u2 / g0;
            let big_dy = s / g0;
            let l = (y * (b * w1.rem_euclid(h) + c * w2.rem_euclid(h))).rem_euclid(h);
            (g0, b * (m / h) + l * (big_by / h), big_by, big_cy, big_dy)
        };

        let mut bx = big_bx.rem_euclid(big_by);
        let mut by = big_by;
        let (mut x, mut y) = (1i128, 0i128);
        let mut z = 0u32;
        while by.abs() > bound && bx != 0 {
            let (q, t) = by.div_mod_floor(&bx);
            by = bx;
            bx = t;
            let nt = y - q * x;
            y = x;
            x = nt;
            z += 1;
        }
        if z % 2 == 1 {
            by = -by;
            y = -y;
        }

        let (u3, v3, w3) = if z == 0 {
            let q1 = big_cy * bx;
            let cx = (q1 - m) / big_by;
            let dx = (bx * big_dy - w2) / big_by;
            (by * big_cy, v2 - 2 * q1, bx * cx - g0 * dx)
        } else {
            let cx = (big_cy * bx - m * x) / big_by;
            let q1 = by * cx;
            let q2 = q1 + m;
            let dx = (big_dy * bx - w2 * x) / big_by;
            let q3 = y * dx;
            let q4 = q3 + big_dy;
            let dy = q4 / x;
            let cy = if bx != 0 {
                q2 / bx
            } else {
                (cx * dy - w1) / dx
            };
            (
                by * cy - g0 * y * dy,
                g0 * (q3 + q4) - q1 - q2,
                bx * cx - g0 * x * dx,
            )
        };
        debug_assert_eq!(v3 * v3 - 4 * u3 * w3, disc as i128);
        if u3 <= 0 {
            return Err(Error::domain(format!("nucomp produced ⟨{u3},{v3},{w3}⟩")));
        }
        qform::reduce_raw(u3, v3, w3)
    }
}
