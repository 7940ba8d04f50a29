//! Exact coordinates in the cyclotomic integers `Z[zeta_N]`.
//!
//! A planar point is one ring element read as a complex number. Elements are
//! stored in the power basis `1, zeta, .., zeta^(phi(N)-1)`, so two
//! coordinates are equal iff their coefficient vectors are equal.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pt;

/// Ring orders actually used for arithmetic.
const RING_ORDERS: [u8; 3] = [4, 10, 12];

/// Maps a declared field order onto the ring used internally. Orders 1 and 4
/// share the Gaussian integers, order 5 shares `Q(zeta_10)`.
pub fn ring_order(declared: u32) -> Result<u8> {
    match declared {
        1 | 4 => Ok(4),
        5 | 10 => Ok(10),
        12 => Ok(12),
        n => Err(Error::UnsupportedField(n)),
    }
}

fn degree(order: u8) -> usize {
    match order {
        4 => 2,
        10 | 12 => 4,
        _ => unreachable!("unsupported ring order {order}"),
    }
}

/// `zeta^deg = sum r_j zeta^j`.
fn reduction(order: u8) -> &'static [i64] {
    match order {
        4 => &[-1, 0],
        10 => &[-1, 1, -1, 1],
        12 => &[-1, 0, 1, 0],
        _ => unreachable!("unsupported ring order {order}"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldCoord {
    order: u8,
    c: [i64; 4],
}

impl fmt::Debug for FieldCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}@{}", self.coeffs(), self.order)
    }
}

impl fmt::Display for FieldCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coeffs().iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

impl FieldCoord {
    pub fn zero(order: u8) -> Self {
        debug_assert!(RING_ORDERS.contains(&order));
        FieldCoord { order, c: [0; 4] }
    }

    pub fn integer(order: u8, v: i64) -> Self {
        let mut z = Self::zero(order);
        z.c[0] = v;
        z
    }

    pub fn from_coeffs(order: u8, coeffs: &[i64]) -> Result<Self> {
        if !RING_ORDERS.contains(&order) {
            return Err(Error::UnsupportedField(order as u32));
        }
        let deg = degree(order);
        if coeffs.len() > deg {
            return Err(Error::Degenerate(format!(
                "{} coefficients given, ring of order {order} has degree {deg}",
                coeffs.len()
            )));
        }
        let mut z = Self::zero(order);
        z.c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(z)
    }

    /// Point `x + i y` for integer `x, y` in the Gaussian integers.
    pub fn gaussian(x: i64, y: i64) -> Self {
        FieldCoord { order: 4, c: [x, y, 0, 0] }
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.c[..degree(self.order)]
    }

    pub fn zeta_pow(order: u8, k: i64) -> Self {
        let n = order as i64;
        let k = k.rem_euclid(n);
        let mut z = Self::integer(order, 1);
        for _ in 0..k {
            z = z.times_zeta();
        }
        z
    }

    fn times_zeta(self) -> Self {
        let deg = degree(self.order);
        let red = reduction(self.order);
        let top = self.c[deg - 1];
        let mut out = Self::zero(self.order);
        for j in (1..deg).rev() {
            out.c[j] = self.c[j - 1];
        }
        for (j, r) in red.iter().enumerate() {
            out.c[j] += top * r;
        }
        out
    }

    /// Complex conjugation, the automorphism `zeta -> zeta^-1`.
    pub fn conj(self) -> Self {
        let mut out = Self::zero(self.order);
        for (j, &c) in self.coeffs().iter().enumerate() {
            if c != 0 {
                out = out + Self::zeta_pow(self.order, -(j as i64)).scale(c);
            }
        }
        out
    }

    pub fn scale(self, k: i64) -> Self {
        let mut out = self;
        for c in out.c.iter_mut() {
            *c *= k;
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&c| c == 0)
    }

    pub fn pow(self, e: u32) -> Self {
        let mut out = Self::integer(self.order, 1);
        for _ in 0..e {
            out = out * self;
        }
        out
    }

    pub fn to_point(&self) -> Pt {
        let n = self.order as f64;
        let mut x = 0.0;
        let mut y = 0.0;
        for (j, &c) in self.coeffs().iter().enumerate() {
            if c == 0 {
                continue;
            }
            // quarter turns exactly, so Gaussian integers map to integer floats
            let (s, co) = if (4 * j) % self.order as usize == 0 {
                [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0)][(4 * j / self.order as usize) % 4]
            } else {
                (std::f64::consts::TAU * j as f64 / n).sin_cos()
            };
            x += c as f64 * co;
            y += c as f64 * s;
        }
        [x, y]
    }

    /// Real value; meaningful for elements fixed by conjugation.
    pub fn to_f64(&self) -> f64 {
        self.to_point()[0]
    }
}

impl Add for FieldCoord {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        assert_eq!(self.order, o.order, "mixed ring orders");
        let mut out = self;
        for j in 0..4 {
            out.c[j] += o.c[j];
        }
        out
    }
}

impl Sub for FieldCoord {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for FieldCoord {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1)
    }
}

impl Mul for FieldCoord {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        assert_eq!(self.order, o.order, "mixed ring orders");
        let deg = degree(self.order);
        let red = reduction(self.order);
        let mut prod = [0i64; 7];
        for i in 0..deg {
            if self.c[i] == 0 {
                continue;
            }
            for j in 0..deg {
                prod[i + j] += self.c[i] * o.c[j];
            }
        }
        for k in (deg..2 * deg - 1).rev() {
            let t = prod[k];
            if t == 0 {
                continue;
            }
            prod[k] = 0;
            for (j, r) in red.iter().enumerate() {
                prod[k - deg + j] += t * r;
            }
        }
        let mut out = Self::zero(self.order);
        out.c[..deg].copy_from_slice(&prod[..deg]);
        out
    }
}

/// Element of the point group combined with a translation:
/// `z -> zeta^rot * (refl ? conj(z) : z) + t`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Isometry {
    /// Rotation in ring units (multiples of `2 pi / ring order`).
    pub rot: u8,
    pub refl: bool,
    pub t: FieldCoord,
}

impl Isometry {
    pub fn identity(order: u8) -> Self {
        Isometry { rot: 0, refl: false, t: FieldCoord::zero(order) }
    }

    pub fn apply(&self, z: FieldCoord) -> FieldCoord {
        let z = if self.refl { z.conj() } else { z };
        FieldCoord::zeta_pow(z.order(), self.rot as i64) * z + self.t
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        let n = self.t.order() as i64;
        let r2 = if self.refl { -(other.rot as i64) } else { other.rot as i64 };
        let rot = (self.rot as i64 + r2).rem_euclid(n) as u8;
        let t2 = if self.refl { other.t.conj() } else { other.t };
        Isometry {
            rot,
            refl: self.refl ^ other.refl,
            t: FieldCoord::zeta_pow(self.t.order(), self.rot as i64) * t2 + self.t,
        }
    }
}
