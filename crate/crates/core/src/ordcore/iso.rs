//! Canonical order isomorphisms between interval sets of equal order type.

use std::fmt;

use super::{IntervalSet, Ordinal};
use crate::error::{Error, Result};

/// The unique order-preserving bijection `source → target`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderIso {
    source: IntervalSet,
    target: IntervalSet,
}

impl OrderIso {
    pub fn new(source: IntervalSet, target: IntervalSet) -> Result<Self> {
        let (ts, tt) = (source.order_type(), target.order_type());
        if ts != tt {
            return Err(Error::TypeMismatch(ts.to_string(), tt.to_string()));
        }
        Ok(OrderIso { source, target })
    }

    pub fn identity(s: IntervalSet) -> Self {
        OrderIso {
            source: s.clone(),
            target: s,
        }
    }

    pub fn empty() -> Self {
        OrderIso::identity(IntervalSet::empty())
    }

    pub fn source(&self) -> &IntervalSet {
        &self.source
    }

    pub fn target(&self) -> &IntervalSet {
        &self.target
    }

    pub fn is_identity(&self) -> bool {
        self.source == self.target
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn inverse(&self) -> OrderIso {
        OrderIso {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    pub fn apply(&self, x: &Ordinal) -> Result<Ordinal> {
        self.target.element_at(&self.source.position_of(x)?)
    }

    pub fn apply_inv(&self, x: &Ordinal) -> Result<Ordinal> {
        self.source.element_at(&self.target.position_of(x)?)
    }

    /// `ρ[Q]` for `Q ⊆ source` (points of `Q` outside the source are ignored).
    /// The image of an interval set is again an interval set: each piece of
    /// `Q` occupies a contiguous range of positions.
    pub fn image(&self, q: &IntervalSet) -> IntervalSet {
        let inside = q.intersection(&self.source);
        let mut ranges: Vec<(Ordinal, Ordinal)> = Vec::new();
        let mut start = Ordinal::zero();
        let mut pieces = inside.intervals().iter().peekable();
        for (lo, hi) in self.source.intervals() {
            while let Some((a, b)) = pieces.peek() {
                if a >= hi {
                    break;
                }
                let p = start.add(&lo.left_sub(a).expect("a within interval"));
                let r = start.add(&lo.left_sub(b).expect("b within interval"));
                ranges.push((p, r));
                pieces.next();
            }
            start = start.add(&lo.left_sub(hi).expect("lo < hi"));
        }
        let mut out = Vec::new();
        let mut tstart = Ordinal::zero();
        for (lo, hi) in self.target.intervals() {
            let len = lo.left_sub(hi).expect("lo < hi");
            let tend = tstart.add(&len);
            for (p, r) in &ranges {
                let a = std::cmp::max(p, &tstart);
                let b = std::cmp::min(r, &tend);
                if a < b {
                    out.push((
                        lo.add(&tstart.left_sub(a).expect("a ≥ start")),
                        lo.add(&tstart.left_sub(b).expect("b ≥ start")),
                    ));
                }
            }
            tstart = tend;
        }
        IntervalSet::new(out)
    }

    /// `ρ↾Q`, itself canonical between `Q ∩ source` and its image.
    pub fn restrict(&self, q: &IntervalSet) -> OrderIso {
        let src = q.intersection(&self.source);
        let tgt = self.image(&src);
        OrderIso {
            source: src,
            target: tgt,
        }
    }

    /// Restricts the target side: keeps exactly the points mapped into `q`.
    pub fn corestrict(&self, q: &IntervalSet) -> OrderIso {
        self.inverse().restrict(q).inverse()
    }

    /// `outer ∘ inner` as a canonical iso from `inner⁻¹[inner.target ∩
    /// outer.source]` onto `outer[inner.target ∩ outer.source]`; empty when
    /// the middle sets are disjoint.
    pub fn compose(outer: &OrderIso, inner: &OrderIso) -> OrderIso {
        let mid = inner.target.intersection(&outer.source);
        OrderIso {
            source: inner.inverse().image(&mid),
            target: outer.image(&mid),
        }
    }
}

impl fmt::Display for OrderIso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rho({} -> {})", self.source, self.target)
    }
}

impl fmt::Debug for OrderIso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// `ρ_{C0,C1}(x)`.
pub fn rho_apply(c0: &IntervalSet, c1: &IntervalSet, x: &Ordinal) -> Result<Ordinal> {
    OrderIso::new(c0.clone(), c1.clone())?.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordcore::{iset, ord};

    #[test]
    fn rho_examples() {
        for k in 0..20 {
            let x = Ordinal::nat(k);
            assert_eq!(
                rho_apply(&iset("[0,w)"), &iset("[w*5,w*6)"), &x).unwrap(),
                ord("w*5").add(&x)
            );
            let s = iset("[0,2)|[w,w*2)");
            let wk = ord("w").add(&x);
            assert_eq!(rho_apply(&s, &iset("[0,w)"), &wk).unwrap(), Ordinal::nat(2 + k));
        }
        let s = iset("[3,w)|[w*2,w*2+4)");
        assert_eq!(rho_apply(&s, &s, &ord("w*2+1")).unwrap(), ord("w*2+1"));
        assert!(rho_apply(&iset("[0,w)"), &iset("[0,w+1)"), &ord("1")).is_err());
        assert!(rho_apply(&iset("[0,w)"), &iset("[1,w)"), &ord("w")).is_err());
    }

    #[test]
    fn compose_example() {
        let r0 = OrderIso::new(iset("[0,w)"), iset("[w,w*2)")).unwrap();
        let r1 = OrderIso::new(iset("[w+5,w*2)"), iset("[0,w)")).unwrap();
        let c = OrderIso::compose(&r1, &r0);
        assert_eq!(c, OrderIso::new(iset("[5,w)"), iset("[0,w)")).unwrap());
        assert_eq!(c.apply(&ord("7")).unwrap(), ord("2"));
        assert_eq!(r1.apply(&r0.apply(&ord("7")).unwrap()).unwrap(), ord("2"));
    }

    #[test]
    fn compose_identity_and_empty() {
        let s = iset("[0,w)|[w*2,w*2+3)");
        let t = iset("[w,w*2+3)");
        let st = OrderIso::new(s.clone(), t).unwrap();
        assert_eq!(OrderIso::compose(&st, &OrderIso::identity(s)), st);
        let a = OrderIso::identity(iset("[0,5)"));
        let b = OrderIso::identity(iset("[5,9)"));
        assert!(OrderIso::compose(&a, &b).is_empty());
    }

    #[test]
    fn image_of_pieces() {
        let r = OrderIso::new(iset("[0,2)|[w,w*2)"), iset("[0,w)")).unwrap();
        assert_eq!(r.image(&iset("[1,w+3)")), iset("[1,5)"));
        assert_eq!(r.inverse().image(&iset("[1,5)")), iset("[1,2)|[w,w+3)"));
    }
}
