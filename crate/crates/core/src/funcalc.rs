//! Partial injections on ordinals: finite explicit maps, lazily answered
//! maps behind a trait, and the identity extension `f⁺ = f ∪ id↾(λ∖A)`.
//!
//! Composition is always "rightmost applied first": `compose(f, g)(x) = f(g(x))`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ordcore::{IntervalSet, OrderIso, Ordinal, PointSet};

/// Anything that answers forward and backward queries of an injective
/// partial map. Answers must never change once given.
pub trait Injection: Send + Sync {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal>;
    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal>;

    /// The pairs materialized so far, with `true` when the map also acts
    /// as the identity off its registered domain. `None` for closed forms.
    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        None
    }
}

/// A finite injective partial map, stored in both directions.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct FiniteInjection {
    fwd: BTreeMap<Ordinal, Ordinal>,
    bwd: BTreeMap<Ordinal, Ordinal>,
}

impl FiniteInjection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Ordinal, Ordinal)>>(pairs: I) -> Result<Self> {
        let mut f = Self::new();
        for (x, y) in pairs {
            f.insert(x, y)?;
        }
        Ok(f)
    }

    /// Convenience for tests and examples over naturals.
    pub fn from_nat_pairs(pairs: &[(u64, u64)]) -> Result<Self> {
        Self::from_pairs(pairs.iter().map(|&(x, y)| (Ordinal::nat(x), Ordinal::nat(y))))
    }

    pub fn swap(a: Ordinal, b: Ordinal) -> Self {
        let mut f = Self::new();
        if a == b {
            f.insert(a.clone(), a).expect("fresh");
        } else {
            f.insert(a.clone(), b.clone()).expect("fresh");
            f.insert(b, a).expect("fresh");
        }
        f
    }

    pub fn identity_on<I: IntoIterator<Item = Ordinal>>(points: I) -> Self {
        let mut f = Self::new();
        for x in points {
            let _ = f.insert(x.clone(), x);
        }
        f
    }

    /// Adds `x ↦ y`; re-adding an existing pair is a no-op.
    pub fn insert(&mut self, x: Ordinal, y: Ordinal) -> Result<()> {
        match (self.fwd.get(&x), self.bwd.get(&y)) {
            (Some(v), _) if *v == y => Ok(()),
            (None, None) => {
                self.fwd.insert(x.clone(), y.clone());
                self.bwd.insert(y, x);
                Ok(())
            }
            _ => Err(Error::NotPermutation(format!(
                "adding {x} -> {y} breaks injectivity"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fwd.is_empty()
    }

    pub fn get(&self, x: &Ordinal) -> Option<&Ordinal> {
        self.fwd.get(x)
    }

    pub fn get_inv(&self, y: &Ordinal) -> Option<&Ordinal> {
        self.bwd.get(y)
    }

    pub fn in_dom(&self, x: &Ordinal) -> bool {
        self.fwd.contains_key(x)
    }

    pub fn in_ran(&self, y: &Ordinal) -> bool {
        self.bwd.contains_key(y)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Ordinal, &Ordinal)> {
        self.fwd.iter()
    }

    pub fn dom(&self) -> impl Iterator<Item = &Ordinal> {
        self.fwd.keys()
    }

    pub fn ran(&self) -> impl Iterator<Item = &Ordinal> {
        self.bwd.keys()
    }

    pub fn invert(&self) -> Self {
        FiniteInjection {
            fwd: self.bwd.clone(),
            bwd: self.fwd.clone(),
        }
    }

    /// `f ∘ g`.
    pub fn compose(f: &FiniteInjection, g: &FiniteInjection) -> Self {
        let mut out = Self::new();
        for (x, y) in g.pairs() {
            if let Some(z) = f.get(y) {
                out.insert(x.clone(), z.clone()).expect("composition of injections");
            }
        }
        out
    }

    /// `f ∩ (A × A)`.
    pub fn restrict_square(&self, a: &PointSet) -> Self {
        let mut out = Self::new();
        for (x, y) in self.pairs() {
            if a.contains(x) && a.contains(y) {
                out.insert(x.clone(), y.clone()).expect("subset of injection");
            }
        }
        out
    }

    /// Moved points.
    pub fn support(&self) -> Vec<Ordinal> {
        self.pairs()
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.clone())
            .collect()
    }

    /// True when `dom = ran`, i.e. the map permutes its domain.
    pub fn is_permutation_of_dom(&self) -> bool {
        self.fwd.keys().eq(self.bwd.keys())
    }
}

impl Injection for FiniteInjection {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        self.fwd.get(x).cloned()
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        self.bwd.get(y).cloned()
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        Some((self.clone(), false))
    }
}

impl Injection for OrderIso {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        OrderIso::apply(self, x).ok()
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        OrderIso::apply_inv(self, y).ok()
    }
}

impl<T: Injection + ?Sized> Injection for Arc<T> {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        (**self).apply(x)
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        (**self).apply_inv(y)
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        (**self).fragment()
    }
}

impl fmt::Debug for FiniteInjection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.fwd.iter()).finish()
    }
}

impl Serialize for FiniteInjection {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<(&Ordinal, &Ordinal)> = self.pairs().collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FiniteInjection {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<(Ordinal, Ordinal)> = Vec::deserialize(d)?;
        FiniteInjection::from_pairs(v).map_err(serde::de::Error::custom)
    }
}

/// Map given by a pair of closures (formulas such as affine maps or `y`).
#[derive(Clone)]
pub struct FnInjection {
    fwd: Arc<dyn Fn(&Ordinal) -> Option<Ordinal> + Send + Sync>,
    bwd: Arc<dyn Fn(&Ordinal) -> Option<Ordinal> + Send + Sync>,
}

impl FnInjection {
    pub fn new(
        fwd: impl Fn(&Ordinal) -> Option<Ordinal> + Send + Sync + 'static,
        bwd: impl Fn(&Ordinal) -> Option<Ordinal> + Send + Sync + 'static,
    ) -> Self {
        FnInjection {
            fwd: Arc::new(fwd),
            bwd: Arc::new(bwd),
        }
    }
}

impl Injection for FnInjection {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        (self.fwd)(x)
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        (self.bwd)(y)
    }
}

/// `base ∪ id↾(λ∖A)`: acts as `base` on `A` (possibly undefined there, when
/// `base` is only partial) and as the identity on `[0, λ)` outside `A`.
/// With `ambient = None` the identity part extends over all ordinals.
#[derive(Clone)]
pub struct Extended {
    base: Arc<dyn Injection>,
    domain: PointSet,
    ambient: Option<Ordinal>,
}

impl Extended {
    pub fn new(base: Arc<dyn Injection>, domain: PointSet, ambient: Option<Ordinal>) -> Self {
        Extended {
            base,
            domain,
            ambient,
        }
    }

    pub fn domain(&self) -> &PointSet {
        &self.domain
    }

    pub fn base(&self) -> &Arc<dyn Injection> {
        &self.base
    }

    fn in_ambient(&self, x: &Ordinal) -> bool {
        self.ambient.as_ref().map_or(true, |l| x < l)
    }

    /// The inverse extended map, `(f⁻¹)⁺`.
    pub fn inverse(&self) -> Extended {
        Extended {
            base: Arc::new(Inverse(self.base.clone())),
            domain: self.domain.clone(),
            ambient: self.ambient.clone(),
        }
    }
}

impl Injection for Extended {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        if self.domain.contains(x) {
            self.base.apply(x)
        } else if self.in_ambient(x) {
            Some(x.clone())
        } else {
            None
        }
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        if self.domain.contains(y) {
            self.base.apply_inv(y)
        } else if self.in_ambient(y) {
            Some(y.clone())
        } else {
            None
        }
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        let (f, _) = self.base.fragment()?;
        self.ambient.is_none().then_some((f, true))
    }
}

/// Swaps the directions of an injection.
#[derive(Clone)]
pub struct Inverse(pub Arc<dyn Injection>);

impl Injection for Inverse {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        self.0.apply_inv(x)
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        self.0.apply(y)
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        self.0.fragment().map(|(f, e)| (f.invert(), e))
    }
}

/// `f⁺` for a finite permutation `f` of the finite set `dom(f)`, with
/// `dom(f) ⊆ [0, λ)`.
pub fn extend_identity(f: &FiniteInjection, lambda: &Ordinal) -> Result<Extended> {
    if !f.is_permutation_of_dom() {
        return Err(Error::NotPermutation(format!("{f:?} is not a permutation of its domain")));
    }
    if let Some(x) = f.dom().find(|x| *x >= lambda) {
        return Err(Error::OutOfRange {
            position: x.to_string(),
            order_type: lambda.to_string(),
        });
    }
    let pts: Vec<(Ordinal, Ordinal)> = f.dom().map(|x| (x.clone(), x.succ())).collect();
    let domain = PointSet::Interval(IntervalSet::new(pts));
    Ok(Extended::new(Arc::new(f.clone()), domain, Some(lambda.clone())))
}

/// Graph of `f` over the points `xs` where it is defined.
pub fn graph_on<'a, I>(f: &dyn Injection, xs: I) -> Vec<(Ordinal, Ordinal)>
where
    I: IntoIterator<Item = &'a Ordinal>,
{
    xs.into_iter()
        .filter_map(|x| f.apply(x).map(|y| (x.clone(), y)))
        .collect()
}
