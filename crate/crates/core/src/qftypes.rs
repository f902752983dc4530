//! Ordered and non-redundant quantifier-free types, the bijection between
//! them, and the interval coding `gamma`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lang::{to_tuple, Fact, LangError, Language, Mode, RelId, WindowStructure};
use crate::rational::{rat, Rational};

/// Default cap on the number of undecided slots an enumeration may expand.
pub const DEFAULT_SLOT_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("{slots} slots exceed the enumeration cap of {cap}")]
    ArityOverflow { slots: usize, cap: usize },
    #[error("parts disagree on {rel}({tuple:?})")]
    InconsistentParts { rel: String, tuple: Vec<usize> },
    #[error("permutation {0:?} is missing from the parts")]
    MissingPart(Vec<usize>),
    #[error("fact on a non-increasing tuple {0:?}")]
    NotOrdered(Vec<usize>),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// A maximal type deciding every relation on every strictly increasing
/// variable tuple. Facts not listed are negative.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedQfType {
    language: Arc<Language>,
    vars: usize,
    holds: BTreeSet<Fact>,
}

impl fmt::Debug for OrderedQfType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>{{", self.vars)?;
        for (i, fact) in self.holds.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}({})", self.language.name(fact.rel), fact.tuple.iter().join(","))?;
        }
        write!(f, "}}")
    }
}

impl OrderedQfType {
    pub fn new(language: Arc<Language>, vars: usize, holds: impl IntoIterator<Item = Fact>) -> Result<Self, TypeError> {
        let holds: BTreeSet<Fact> = holds.into_iter().collect();
        // reuse the structural validation of window structures
        WindowStructure::general(language.clone(), vars, holds.iter().cloned())?;
        if let Some(f) = holds.iter().find(|f| !f.tuple.windows(2).all(|w| w[0] < w[1])) {
            return Err(TypeError::NotOrdered(f.tuple.iter().map(|&x| x as usize).collect()));
        }
        Ok(OrderedQfType { language, vars, holds })
    }

    /// The all-negative type.
    pub fn trivial(language: Arc<Language>, vars: usize) -> Self {
        OrderedQfType { language, vars, holds: BTreeSet::new() }
    }

    /// The type asserting exactly `rels` on the full tuple `(x_0, ..., x_{k-1})`.
    pub fn top(language: Arc<Language>, vars: usize, rels: impl IntoIterator<Item = RelId>) -> Self {
        let full: Vec<usize> = (0..vars).collect();
        let holds = rels.into_iter().map(|r| Fact::new(r, &full)).collect();
        OrderedQfType { language, vars, holds }
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn holds(&self) -> &BTreeSet<Fact> {
        &self.holds
    }

    pub fn is_trivial(&self) -> bool {
        self.holds.is_empty()
    }

    pub fn contains(&self, rel: RelId, tuple: &[usize]) -> bool {
        self.holds.contains(&Fact::new(rel, tuple))
    }

    /// Relations asserted of the full variable tuple, in language order.
    pub fn top_relations(&self) -> Vec<RelId> {
        self.holds.iter().filter(|f| f.tuple.len() == self.vars).map(|f| f.rel).collect()
    }
}

/// A complete non-redundant type on `vars` variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NonRedundantQfType(pub WindowStructure);

impl NonRedundantQfType {
    pub fn vars(&self) -> usize {
        self.0.size()
    }

    pub fn structure(&self) -> &WindowStructure {
        &self.0
    }
}

fn slots(language: &Language, n: usize, ordered: bool) -> Vec<Fact> {
    let mut out = Vec::new();
    for rel in 0..language.len() {
        let k = language.arity(rel);
        if k > n {
            continue;
        }
        if ordered {
            out.extend((0..n).combinations(k).map(|t| Fact::new(rel, &t)));
        } else {
            out.extend((0..n).permutations(k).map(|t| Fact::new(rel, &t)));
        }
    }
    out
}

fn subsets_of(slots: &[Fact], cap: usize) -> Result<impl Iterator<Item = BTreeSet<Fact>> + '_, TypeError> {
    if slots.len() > cap {
        return Err(TypeError::ArityOverflow { slots: slots.len(), cap });
    }
    Ok((0u64..1u64 << slots.len()).map(move |bits| {
        slots.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, f)| f.clone()).collect()
    }))
}

pub fn enumerate_ordered_types(
    language: &Arc<Language>,
    n: usize,
    cap: usize,
) -> Result<Vec<OrderedQfType>, TypeError> {
    let slots = slots(language, n, true);
    let out =
        subsets_of(&slots, cap)?.map(|holds| OrderedQfType { language: language.clone(), vars: n, holds }).collect();
    Ok(out)
}

pub fn enumerate_nonredundant_types(
    language: &Arc<Language>,
    n: usize,
    cap: usize,
) -> Result<Vec<NonRedundantQfType>, TypeError> {
    let slots = slots(language, n, false);
    let out = subsets_of(&slots, cap)?
        .map(|holds| {
            NonRedundantQfType(
                WindowStructure::new(language.clone(), n, Mode::General, holds).expect("slots are valid"),
            )
        })
        .collect();
    Ok(out)
}

/// Reads `q` along every permutation `tau`: `p_tau` holds `R(i)` for an
/// increasing `i` iff `q` holds `R(tau . i)`.
pub fn split(q: &NonRedundantQfType) -> BTreeMap<Vec<usize>, OrderedQfType> {
    let s = q.structure();
    let n = s.size();
    let language = s.language().clone();
    let mut out = BTreeMap::new();
    for tau in (0..n).permutations(n) {
        let mut holds = BTreeSet::new();
        for rel in 0..language.len() {
            let k = language.arity(rel);
            if k > n {
                continue;
            }
            for inc in (0..n).combinations(k) {
                let image: Vec<usize> = inc.iter().map(|&i| tau[i]).collect();
                if s.holds(rel, &to_tuple(&image)) {
                    holds.insert(Fact::new(rel, &inc));
                }
            }
        }
        out.insert(tau, OrderedQfType { language: language.clone(), vars: n, holds });
    }
    out
}

/// Inverse of [`split`].
pub fn merge(parts: &BTreeMap<Vec<usize>, OrderedQfType>) -> Result<NonRedundantQfType, TypeError> {
    let first = parts.values().next().expect("at least the identity part");
    let n = first.vars;
    let language = first.language.clone();
    let mut decided: BTreeMap<Fact, bool> = BTreeMap::new();
    for tau in (0..n).permutations(n) {
        let part = parts.get(&tau).ok_or_else(|| TypeError::MissingPart(tau.clone()))?;
        for rel in 0..language.len() {
            let k = language.arity(rel);
            if k > n {
                continue;
            }
            for inc in (0..n).combinations(k) {
                let image: Vec<usize> = inc.iter().map(|&i| tau[i]).collect();
                let value = part.contains(rel, &inc);
                let fact = Fact::new(rel, &image);
                if let Some(&prev) = decided.get(&fact) {
                    if prev != value {
                        return Err(TypeError::InconsistentParts { rel: language.name(rel).to_string(), tuple: image });
                    }
                } else {
                    decided.insert(fact, value);
                }
            }
        }
    }
    let holds = decided.into_iter().filter(|(_, v)| *v).map(|(f, _)| f);
    Ok(NonRedundantQfType(WindowStructure::general(language, n, holds)?))
}

/// The complete non-redundant diagram of `tuple` in `s`.
pub fn type_of_tuple(s: &WindowStructure, tuple: &[usize]) -> Result<NonRedundantQfType, TypeError> {
    let sub = s.substructure(tuple)?;
    Ok(NonRedundantQfType(sub.with_mode(Mode::General)?))
}

/// An ordered list `x` read through `gamma_x`: finite lists split `[0,1)`
/// into `n` equal intervals, infinite lists into dyadic intervals
/// `[1 - 2^-i, 1 - 2^-(i+1))`. In both cases `gamma_x(1) = x_0`.
#[derive(Clone)]
pub enum IntervalCode<T> {
    Finite(Vec<T>),
    Infinite(Arc<dyn Fn(usize) -> T + Send + Sync>),
}

impl<T: Clone> IntervalCode<T> {
    /// Index of the item selected by `y`; `y` must lie in `[0, 1]`.
    pub fn index(&self, y: &Rational) -> usize {
        assert!(*y >= Rational::zero() && *y <= Rational::one(), "gamma argument outside [0,1]");
        if y.is_one() {
            return 0;
        }
        match self {
            IntervalCode::Finite(items) => {
                assert!(!items.is_empty(), "gamma over an empty list");
                let scaled = y * Rational::from_integer(items.len().into());
                let i = scaled.floor().to_integer();
                usize::try_from(i).expect("index fits")
            }
            IntervalCode::Infinite(_) => {
                let mut i = 0;
                let mut upper = rat(1, 2);
                while *y >= upper {
                    i += 1;
                    upper = Rational::one() - (Rational::one() - upper) / Rational::from_integer(2.into());
                }
                i
            }
        }
    }

    pub fn eval(&self, y: &Rational) -> T {
        let i = self.index(y);
        match self {
            IntervalCode::Finite(items) => items[i].clone(),
            IntervalCode::Infinite(g) => g(i),
        }
    }

    /// The half-open interval `[lo, hi)` mapped to item `i`.
    pub fn preimage(&self, i: usize) -> (Rational, Rational) {
        match self {
            IntervalCode::Finite(items) => {
                let n = items.len() as i64;
                (rat(i as i64, n), rat(i as i64 + 1, n))
            }
            IntervalCode::Infinite(_) => {
                let two = num_bigint::BigInt::from(2);
                let lo = Rational::one() - Rational::new(1.into(), two.pow(i as u32));
                let hi = Rational::one() - Rational::new(1.into(), two.pow(i as u32 + 1));
                (lo, hi)
            }
        }
    }
}

/// Convenience wrapper for [`IntervalCode::eval`].
pub fn gamma_eval<T: Clone>(code: &IntervalCode<T>, y: &Rational) -> T {
    code.eval(y)
}
