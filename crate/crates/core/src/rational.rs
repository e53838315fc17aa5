//! Exact rationals that stay on `i128` and promote to big integers on
//! overflow.

use std::cmp::Ordering;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

/// Invariant: `Small(n, d)` has `d > 0` and `gcd(n, d) = 1`; `Big` only
/// holds values that do not fit `Small`.
#[derive(Clone, Debug)]
pub enum Rat {
    Small(i128, i128),
    Big(BigRational),
}

fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    if a <= u64::MAX as u128 && b <= u64::MAX as u128 {
        let (mut x, mut y) = (a as u64, b as u64);
        while y != 0 {
            (x, y) = (y, x % y);
        }
        return x as i128;
    }
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i128
}

impl Rat {
    pub fn int(v: i128) -> Rat {
        Rat::Small(v, 1)
    }

    pub fn zero() -> Rat {
        Rat::Small(0, 1)
    }

    pub fn one() -> Rat {
        Rat::Small(1, 1)
    }

    fn small(n: i128, d: i128) -> Option<Rat> {
        if d == 0 {
            return None;
        }
        let (n, d) = if d < 0 { (n.checked_neg()?, d.checked_neg()?) } else { (n, d) };
        let g = gcd(n, d);
        Some(Rat::Small(n / g, d / g))
    }

    fn big(&self) -> BigRational {
        match self {
            Rat::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Rat::Big(b) => b.clone(),
        }
    }

    fn from_big(b: BigRational) -> Rat {
        match (b.numer().to_i128(), b.denom().to_i128()) {
            (Some(n), Some(d)) => Rat::Small(n, d),
            _ => Rat::Big(b),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Rat::Small(n, _) => *n == 0,
            Rat::Big(b) => b.is_zero(),
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Rat::Small(n, _) => *n > 0,
            Rat::Big(b) => b.is_positive(),
        }
    }

    pub fn is_integer(&self) -> bool {
        match self {
            Rat::Small(_, d) => *d == 1,
            Rat::Big(b) => b.is_integer(),
        }
    }

    /// Largest integer not above the value; `None` beyond `i128`.
    pub fn floor(&self) -> Option<i128> {
        match self {
            Rat::Small(n, d) => Some(n.div_floor(d)),
            Rat::Big(b) => b.floor().to_integer().to_i128(),
        }
    }

    /// Whether the fractional part is at least one half.
    pub fn frac_at_least_half(&self) -> bool {
        match self {
            Rat::Small(n, d) => {
                let r = n.mod_floor(d);
                r.checked_mul(2).is_none_or(|r2| r2 >= *d)
            }
            Rat::Big(b) => {
                let f = b - b.floor();
                f * BigRational::from_integer(BigInt::from(2)) >= BigRational::from_integer(BigInt::from(1))
            }
        }
    }
}

impl PartialEq for Rat {
    fn eq(&self, other: &Rat) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Rat {}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, other) {
            if b == d {
                return a.cmp(c);
            }
            if let (Some(l), Some(r)) = (a.checked_mul(*d), c.checked_mul(*b)) {
                return l.cmp(&r);
            }
        }
        self.big().cmp(&other.big())
    }
}

impl Add for &Rat {
    type Output = Rat;
    fn add(self, other: &Rat) -> Rat {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, other) {
            if *b == 1 && *d == 1 {
                if let Some(n) = a.checked_add(*c) {
                    return Rat::Small(n, 1);
                }
            } else if b == d {
                if let Some(n) = a.checked_add(*c) {
                    return Rat::small(n, *b).expect("non-zero denominator");
                }
            } else {
                let g = gcd(*b, *d);
                let r = (|| {
                    let n = a.checked_mul(d / g)?.checked_add(c.checked_mul(b / g)?)?;
                    Rat::small(n, (b / g).checked_mul(*d)?)
                })();
                if let Some(r) = r {
                    return r;
                }
            }
        }
        Rat::from_big(self.big() + other.big())
    }
}

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match self {
            Rat::Small(n, d) => match n.checked_neg() {
                Some(n) => Rat::Small(n, *d),
                None => Rat::from_big(-self.big()),
            },
            Rat::Big(b) => Rat::from_big(-b),
        }
    }
}

impl Sub for &Rat {
    type Output = Rat;
    fn sub(self, other: &Rat) -> Rat {
        self + &(-other)
    }
}

impl Mul for &Rat {
    type Output = Rat;
    fn mul(self, other: &Rat) -> Rat {
        if let (Rat::Small(a, b), Rat::Small(c, d)) = (self, other) {
            if *b == 1 && *d == 1 {
                if let Some(n) = a.checked_mul(*c) {
                    return Rat::Small(n, 1);
                }
            }
            let (g1, g2) = (gcd(*a, *d).max(1), gcd(*c, *b).max(1));
            let r = (|| Rat::small((a / g1).checked_mul(c / g2)?, (b / g2).checked_mul(d / g1)?))();
            if let Some(r) = r {
                return r;
            }
        }
        Rat::from_big(self.big() * other.big())
    }
}

impl Div for &Rat {
    type Output = Rat;
    fn div(self, other: &Rat) -> Rat {
        assert!(!other.is_zero(), "division by zero rational");
        let inv = match other {
            Rat::Small(n, d) => match Rat::small(*d, *n) {
                Some(r) => r,
                None => Rat::from_big(BigRational::new(BigInt::from(*d), BigInt::from(*n))),
            },
            Rat::Big(b) => Rat::from_big(b.recip()),
        };
        self * &inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overflow_promotes_and_demotes() {
        let big = Rat::int(i128::MAX);
        let two = &big + &big;
        assert!(matches!(two, Rat::Big(_)));
        let back = &two / &Rat::int(2);
        assert!(matches!(back, Rat::Small(n, 1) if n == i128::MAX));
        assert!(two > big);
    }

    #[test]
    fn fractions_reduce() {
        let a = &Rat::int(1) / &Rat::int(3);
        let b = &Rat::int(1) / &Rat::int(6);
        assert_eq!(&a + &b, &Rat::int(1) / &Rat::int(2));
        assert_eq!((-&a).floor(), Some(-1));
        assert!((&Rat::int(5) / &Rat::int(3)).frac_at_least_half());
        assert!(!(&Rat::int(4) / &Rat::int(3)).frac_at_least_half());
    }
}
