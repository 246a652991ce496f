//! Ordinal arithmetic in Cantor normal form, interval-set calculus and
//! canonical order isomorphisms.

mod interval;
mod iso;
mod ordinal;
mod pointset;

pub use interval::{iset, AmbientIter, IntervalSet};
pub use iso::{rho_apply, OrderIso};
pub use ordinal::{ord, Ordinal};
pub use pointset::{mix64, MembershipTest, PointSet};

/// `a + b`.
pub fn ord_add(a: &Ordinal, b: &Ordinal) -> Ordinal {
    a.add(b)
}

/// The unique `δ` with `a + δ = b`.
pub fn ord_left_sub(a: &Ordinal, b: &Ordinal) -> crate::Result<Ordinal> {
    a.left_sub(b)
}
