//! Exact window measures: probability tables over complete diagrams,
//! indexed by the base diagram they expand.

use std::collections::BTreeMap;
use std::sync::Arc;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::canonical::{is_sub_can, CanonicalPresentation};
use crate::lang::{injective_tuples, Fact, LangError, Language, Literal, Mode, QfFormula, RelId, WindowStructure};
use crate::rational::{format_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("negative mass {value} on {diagram} over {base}")]
    NegativeMass { base: String, diagram: String, value: String },
    #[error("additivity fails: mu({zeta}) = {lhs} but mu({zeta} ∧ {eta}) + mu({zeta} ∧ ¬{eta}) = {rhs}")]
    AdditivityViolation { zeta: String, eta: String, lhs: String, rhs: String },
    #[error("table over {base} has total mass {total}")]
    MassNotOne { base: String, total: String },
    #[error("not invariant: {0}")]
    NotInvariant(InvarianceWitness),
    #[error("horizons differ: {left} vs {right}")]
    HorizonMismatch { left: usize, right: usize },
    #[error("base measure charges {diagram}, which is outside the age of the inner structure")]
    NotConcentrated { diagram: String },
    #[error("the inner structure of the base measure is not the structure of the expansion")]
    InnerMismatch,
    #[error("languages overlap: {0}")]
    LanguageClash(String),
    #[error("diagram {diagram} has no realization in the larger structure")]
    NoRealization { diagram: String },
    #[error("the target is not canonically contained in the source; witness {witness}")]
    NotSubCan { witness: String },
    #[error("{diagram} is not a diagram of the base structure")]
    UnknownBaseDiagram { diagram: String },
    #[error("row diagram {0} is not over the expansion language")]
    ForeignDiagram(String),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// A failed projectivity/invariance check: the marginal of the table over
/// `base` along `tuple` disagrees with the table over the induced diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceWitness {
    pub base: String,
    pub tuple: Vec<usize>,
    pub diagram: String,
    pub marginal: String,
    pub table: String,
}

impl std::fmt::Display for InvarianceWitness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "over {} along {:?}, {} has marginal {} but table value {}",
            self.base, self.tuple, self.diagram, self.marginal, self.table
        )
    }
}

pub type Row = BTreeMap<WindowStructure, Rational>;
pub type Table = BTreeMap<WindowStructure, Row>;

/// Every structure over `language` on `m` points, in general mode.
pub fn diagrams(language: &Arc<Language>, m: usize) -> Vec<WindowStructure> {
    let slots: Vec<Fact> = (0..language.len())
        .flat_map(|r| injective_tuples(m, language.arity(r)).map(move |t| Fact::new(r, &t)))
        .collect();
    assert!(slots.len() <= 24, "{} slots is too many to enumerate", slots.len());
    (0u64..1 << slots.len())
        .map(|bits| {
            let facts = slots.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, f)| f.clone());
            WindowStructure::general(language.clone(), m, facts).expect("slots are valid")
        })
        .collect()
}

/// Tables for window sizes `1..=horizon` over every labeled base diagram.
#[derive(Clone, Debug)]
pub struct WindowMeasure {
    base: Arc<CanonicalPresentation>,
    extra: Arc<Language>,
    horizon: usize,
    tables: Vec<Table>,
}

impl PartialEq for WindowMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.extra == other.extra
            && *self.base == *other.base
            && self.tables == other.tables
    }
}

impl Eq for WindowMeasure {}

fn show(s: &WindowStructure) -> String {
    s.to_string()
}

fn strip_zeros(row: Row) -> Row {
    row.into_iter().filter(|(_, p)| !p.is_zero()).collect()
}

impl WindowMeasure {
    /// Checks shape, signs and total mass. Invariance is checked separately.
    pub fn new(
        base: Arc<CanonicalPresentation>,
        extra: Arc<Language>,
        horizon: usize,
        tables: Vec<Table>,
    ) -> Result<Self, MeasureError> {
        assert_eq!(tables.len(), horizon, "one table per window size");
        let mut clean = Vec::with_capacity(horizon);
        for (i, table) in tables.into_iter().enumerate() {
            let m = i + 1;
            let expected = base.labeled_diagrams(m);
            let mut out = Table::new();
            for d in &expected {
                let row = table.get(d).cloned().unwrap_or_default();
                let mut total = Rational::zero();
                for (e, p) in &row {
                    if e.size() != m || **e.language() != *extra {
                        return Err(MeasureError::ForeignDiagram(show(e)));
                    }
                    if p.is_negative() {
                        return Err(MeasureError::NegativeMass {
                            base: show(d),
                            diagram: show(e),
                            value: format_rational(p),
                        });
                    }
                    total += p;
                }
                if !total.is_one() {
                    return Err(MeasureError::MassNotOne { base: show(d), total: format_rational(&total) });
                }
                out.insert(d.clone(), strip_zeros(row));
            }
            if let Some(d) = table.keys().find(|d| !out.contains_key(*d)) {
                return Err(MeasureError::UnknownBaseDiagram { diagram: show(d) });
            }
            clean.push(out);
        }
        Ok(WindowMeasure { base, extra, horizon, tables: clean })
    }

    /// Builds every table from a row function.
    pub fn from_fn(
        base: Arc<CanonicalPresentation>,
        extra: Arc<Language>,
        horizon: usize,
        mut row: impl FnMut(&WindowStructure) -> Row,
    ) -> Result<Self, MeasureError> {
        let tables = (1..=horizon)
            .map(|m| base.labeled_diagrams(m).into_iter().map(|d| (d.clone(), row(&d))).collect())
            .collect();
        Self::new(base, extra, horizon, tables)
    }

    /// The expansion that is empty with probability one.
    pub fn trivial(base: Arc<CanonicalPresentation>, extra: Arc<Language>, horizon: usize) -> Self {
        let ex = extra.clone();
        Self::from_fn(base, extra, horizon, |d| {
            [(WindowStructure::empty(ex.clone(), d.size()), Rational::one())].into_iter().collect()
        })
        .expect("point mass is a measure")
    }

    /// Each element satisfies the unary relation `rel` independently with probability `p`.
    pub fn iid_unary(
        base: Arc<CanonicalPresentation>,
        extra: Arc<Language>,
        rel: RelId,
        p: &Rational,
        horizon: usize,
    ) -> Result<Self, MeasureError> {
        let ex = extra.clone();
        let q = Rational::one() - p;
        Self::from_fn(base, extra, horizon, |d| {
            let m = d.size();
            (0u32..1 << m)
                .map(|bits| {
                    let facts = (0..m).filter(|i| bits >> i & 1 == 1).map(|i| Fact::new(rel, &[i]));
                    let s = WindowStructure::general(ex.clone(), m, facts).expect("unary facts");
                    let k = bits.count_ones() as usize;
                    let mut prob = Rational::one();
                    for _ in 0..k {
                        prob *= p;
                    }
                    for _ in k..m {
                        prob *= &q;
                    }
                    (s, prob)
                })
                .collect()
        })
    }

    pub fn base(&self) -> &Arc<CanonicalPresentation> {
        &self.base
    }

    pub fn extra(&self) -> &Arc<Language> {
        &self.extra
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn table(&self, m: usize) -> &Table {
        &self.tables[m - 1]
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn row(&self, base: &WindowStructure) -> Option<&Row> {
        self.tables.get(base.size().checked_sub(1)?)?.get(base)
    }

    /// Probability of `formula` over the window of `base`. Literals over
    /// the expansion language are read in the row diagram; literals over
    /// the base language are read in `base`.
    pub fn prob(&self, base: &WindowStructure, formula: &QfFormula) -> Result<Rational, MeasureError> {
        let row = self.row(base).ok_or_else(|| MeasureError::UnknownBaseDiagram { diagram: show(base) })?;
        let mut total = Rational::zero();
        for (e, p) in row {
            if eval_split(formula, &[(base, self.base.language()), (e, &self.extra)])? {
                total += p;
            }
        }
        Ok(total)
    }

    pub fn check_invariance(&self) -> InvarianceReport {
        for m in 1..=self.horizon {
            for (d, row) in self.table(m) {
                for j in 1..=m {
                    for t in injective_tuples(m, j) {
                        if j == m && t.iter().enumerate().all(|(i, &x)| i == x) {
                            continue;
                        }
                        let sub = d.substructure(&t).expect("in window");
                        let target = &self.table(j)[&sub];
                        let mut marginal = Row::new();
                        for (e, p) in row {
                            *marginal.entry(e.substructure(&t).expect("in window")).or_insert_with(Rational::zero) += p;
                        }
                        let marginal = strip_zeros(marginal);
                        if marginal != *target {
                            let diagram = marginal
                                .keys()
                                .chain(target.keys())
                                .find(|k| marginal.get(*k) != target.get(*k))
                                .expect("maps differ")
                                .clone();
                            let zero = Rational::zero();
                            return InvarianceReport {
                                invariant: false,
                                witness: Some(InvarianceWitness {
                                    base: show(d),
                                    tuple: t,
                                    diagram: show(&diagram),
                                    marginal: format_rational(marginal.get(&diagram).unwrap_or(&zero)),
                                    table: format_rational(target.get(&diagram).unwrap_or(&zero)),
                                }),
                            };
                        }
                    }
                }
            }
        }
        InvarianceReport { invariant: true, witness: None }
    }

    /// Marginal on the sub-language `keep` of the expansion language.
    pub fn marginal(&self, keep: &[RelId]) -> Result<WindowMeasure, MeasureError> {
        let sub = Arc::new(Language::new(keep.iter().map(|&r| self.extra.relation(r).clone()).collect())?);
        let mut new_id = vec![None; self.extra.len()];
        for (i, &r) in keep.iter().enumerate() {
            new_id[r] = Some(i);
        }
        let tables = self
            .tables
            .iter()
            .map(|table| {
                table
                    .iter()
                    .map(|(d, row)| {
                        let mut out = Row::new();
                        for (e, p) in row {
                            *out.entry(e.project(sub.clone(), |r| new_id[r])).or_insert_with(Rational::zero) += p;
                        }
                        (d.clone(), out)
                    })
                    .collect()
            })
            .collect();
        WindowMeasure::new(self.base.clone(), sub, self.horizon, tables)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub witness: Option<InvarianceWitness>,
}

/// Evaluates a formula whose literals are split between several structures
/// on the same window, each over its own language.
fn eval_split(formula: &QfFormula, parts: &[(&WindowStructure, &Arc<Language>)]) -> Result<bool, MeasureError> {
    let lit = |l: &Literal| -> Result<bool, MeasureError> {
        for (s, lang) in parts {
            if lang.id(&l.rel).is_some() {
                return Ok(s.eval_literal(l)?);
            }
        }
        Err(LangError::UnknownRelation(l.rel.clone()).into())
    };
    let conj = |ls: &[Literal]| -> Result<bool, MeasureError> {
        let mut all = true;
        for l in ls {
            all &= lit(l)?;
        }
        Ok(all)
    };
    match formula {
        QfFormula::Conj(ls) => conj(ls),
        QfFormula::Disj(cs) => {
            let mut any = false;
            for c in cs {
                any |= conj(c)?;
            }
            Ok(any)
        }
    }
}

/// One value of a pre-measure: the probability of a conjunction over the
/// window of a base diagram.
#[derive(Clone, Debug)]
pub struct PiEntry {
    pub base: WindowStructure,
    pub formula: Vec<Literal>,
    pub value: Rational,
}

/// Builds the unique window measure agreeing with a pre-measure given on
/// complete diagrams, checking additivity on every other entry, the
/// base condition, and invariance.
pub fn from_pi_system(
    base: Arc<CanonicalPresentation>,
    extra: Arc<Language>,
    horizon: usize,
    entries: &[PiEntry],
) -> Result<WindowMeasure, MeasureError> {
    let mut tables: Vec<Table> = vec![Table::new(); horizon];
    let mut partial: Vec<&PiEntry> = Vec::new();
    for entry in entries {
        let m = entry.base.size();
        if m == 0 || m > horizon {
            return Err(MeasureError::UnknownBaseDiagram { diagram: show(&entry.base) });
        }
        // base literals must hold in the base diagram; a false one forces mass 0
        let mut ext_lits = Vec::new();
        let mut base_ok = true;
        for l in &entry.formula {
            if extra.id(&l.rel).is_some() {
                ext_lits.push(l.clone());
            } else if base.language().id(&l.rel).is_some() {
                base_ok &= entry.base.eval_literal(l)?;
            } else {
                return Err(LangError::UnknownRelation(l.rel.clone()).into());
            }
        }
        if entry.value.is_negative() {
            return Err(MeasureError::NegativeMass {
                base: show(&entry.base),
                diagram: QfFormula::Conj(entry.formula.clone()).to_string(),
                value: format_rational(&entry.value),
            });
        }
        if !base_ok {
            if !entry.value.is_zero() {
                return Err(MeasureError::AdditivityViolation {
                    zeta: QfFormula::Conj(entry.formula.clone()).to_string(),
                    eta: "⊥".into(),
                    lhs: format_rational(&entry.value),
                    rhs: "0/1".into(),
                });
            }
            continue;
        }
        match complete_diagram(&extra, m, &ext_lits)? {
            Some(e) => {
                tables[m - 1].entry(entry.base.clone()).or_default().insert(e, entry.value.clone());
            }
            None => partial.push(entry),
        }
    }
    let measure = WindowMeasure::new(base.clone(), extra.clone(), horizon, tables)?;
    for entry in partial {
        let formula = QfFormula::Conj(entry.formula.clone());
        let total = measure.prob(&entry.base, &formula)?;
        if total != entry.value {
            let eta = first_undecided(&extra, entry.base.size(), &entry.formula)
                .map_or_else(|| "⊤".to_string(), |l| l.to_string());
            return Err(MeasureError::AdditivityViolation {
                zeta: formula.to_string(),
                eta,
                lhs: format_rational(&entry.value),
                rhs: format_rational(&total),
            });
        }
    }
    let report = measure.check_invariance();
    if let Some(w) = report.witness {
        return Err(MeasureError::NotInvariant(w));
    }
    Ok(measure)
}

fn slots(language: &Language, m: usize) -> Vec<(RelId, Vec<usize>)> {
    (0..language.len()).flat_map(|r| injective_tuples(m, language.arity(r)).map(move |t| (r, t))).collect()
}

fn complete_diagram(
    language: &Arc<Language>,
    m: usize,
    lits: &[Literal],
) -> Result<Option<WindowStructure>, MeasureError> {
    let mut decided: BTreeMap<(RelId, Vec<usize>), bool> = BTreeMap::new();
    for l in lits {
        let r = language.id(&l.rel).expect("resolved above");
        if l.args.len() != language.arity(r) {
            return Err(LangError::ArityMismatch {
                name: l.rel.clone(),
                expected: language.arity(r),
                found: l.args.len(),
            }
            .into());
        }
        if let Some(&p) = l.args.iter().find(|&&p| p >= m) {
            return Err(LangError::ParameterOutOfWindow { param: p, window: m }.into());
        }
        decided.insert((r, l.args.clone()), l.positive);
    }
    if slots(language, m).iter().all(|s| decided.contains_key(s)) {
        let facts = decided.into_iter().filter(|(_, v)| *v).map(|((r, t), _)| Fact::new(r, &t));
        Ok(Some(WindowStructure::general(language.clone(), m, facts)?))
    } else {
        Ok(None)
    }
}

fn first_undecided(language: &Language, m: usize, lits: &[Literal]) -> Option<Literal> {
    slots(language, m)
        .into_iter()
        .find(|(r, t)| !lits.iter().any(|l| l.rel == language.name(*r) && l.args == *t))
        .map(|(r, t)| Literal::pos(language.name(r), &t))
}

/// Restriction along `m0 ⊆_can mu.base()`: each `m0`-diagram takes the
/// table of its image.
pub fn restrict_measure(mu: &WindowMeasure, m0: &Arc<CanonicalPresentation>) -> Result<WindowMeasure, MeasureError> {
    let report = is_sub_can(m0, mu.base());
    let iota = match report.embedding {
        Some(e) => e,
        None => {
            return Err(MeasureError::NotSubCan { witness: report.witness.map_or_else(String::new, |w| w.to_string()) })
        }
    };
    let target = mu.base().language().clone();
    let mut tables = Vec::with_capacity(mu.horizon());
    for m in 1..=mu.horizon() {
        let mut table = Table::new();
        for d0 in m0.labeled_diagrams(m) {
            let d1 = d0.relabel(target.clone(), |r| iota[r]);
            let row = mu.row(&d1).ok_or_else(|| MeasureError::NoRealization { diagram: show(&d0) })?;
            table.insert(d0, row.clone());
        }
        tables.push(table);
    }
    WindowMeasure::new(m0.clone(), mu.extra().clone(), mu.horizon(), tables)
}

/// An `Aut(N)`-invariant measure on diagrams of the inner structure `M`,
/// supported on `Age(M)`. `projection[r]` names the `N`-relation implied by
/// the `M`-relation `r`; it may be omitted when `N` is the pure set.
#[derive(Clone, Debug)]
pub struct ConcentratedBaseMeasure {
    inner: Arc<CanonicalPresentation>,
    measure: WindowMeasure,
    projection: Option<Vec<RelId>>,
}

impl ConcentratedBaseMeasure {
    pub fn new(
        inner: Arc<CanonicalPresentation>,
        measure: WindowMeasure,
        projection: Option<Vec<RelId>>,
    ) -> Result<Self, MeasureError> {
        if **measure.extra() != **inner.language() {
            return Err(MeasureError::InnerMismatch);
        }
        for m in 1..=measure.horizon() {
            let allowed: std::collections::BTreeSet<WindowStructure> = inner.labeled_diagrams(m).into_iter().collect();
            for (q, row) in measure.table(m) {
                for p in row.keys() {
                    let as_inner = p.relabel(inner.language().clone(), |r| r);
                    let projected_ok = projection
                        .as_ref()
                        .is_none_or(|proj| as_inner.relabel(measure.base().language().clone(), |r| proj[r]) == *q);
                    if !allowed.contains(&as_inner) || !projected_ok {
                        return Err(MeasureError::NotConcentrated { diagram: show(p) });
                    }
                }
            }
        }
        Ok(ConcentratedBaseMeasure { inner, measure, projection })
    }

    /// Uniform over the labeled inner diagrams of each size. For the Rado
    /// graph this is the Erdős–Rényi graph with edge probability 1/2.
    pub fn uniform(
        inner: Arc<CanonicalPresentation>,
        outer: Arc<CanonicalPresentation>,
        horizon: usize,
        projection: Option<Vec<RelId>>,
    ) -> Result<Self, MeasureError> {
        let lang = inner.language().clone();
        let measure = WindowMeasure::from_fn(outer, lang, horizon, |q| {
            let support: Vec<WindowStructure> = inner
                .labeled_diagrams(q.size())
                .into_iter()
                .filter(|p| projection.as_ref().is_none_or(|proj| p.relabel(q.language().clone(), |r| proj[r]) == *q))
                .map(|p| p.with_mode(Mode::General).expect("general mode accepts any diagram"))
                .collect();
            let w = Rational::new(1.into(), (support.len() as i64).into());
            support.into_iter().map(|p| (p, w.clone())).collect()
        })?;
        Self::new(inner, measure, projection)
    }

    pub fn inner(&self) -> &Arc<CanonicalPresentation> {
        &self.inner
    }

    pub fn outer(&self) -> &Arc<CanonicalPresentation> {
        self.measure.base()
    }

    pub fn measure(&self) -> &WindowMeasure {
        &self.measure
    }

    pub fn projection(&self) -> Option<&[RelId]> {
        self.projection.as_deref()
    }
}

fn joint_language(inner: &Language, extra: &Language) -> Result<Arc<Language>, MeasureError> {
    inner.join(extra).map(Arc::new).map_err(|e| MeasureError::LanguageClash(e.to_string()))
}

fn join_diagrams(joint: &Arc<Language>, p: &WindowStructure, e: &WindowStructure, shift: usize) -> WindowStructure {
    let facts =
        p.facts().iter().cloned().chain(e.facts().iter().map(|f| Fact { tuple: f.tuple.clone(), rel: f.rel + shift }));
    WindowStructure::general(joint.clone(), p.size(), facts.collect::<Vec<_>>()).expect("disjoint languages")
}

/// The product rule: the joint probability of an inner diagram `p` and an
/// expansion `e` over an outer diagram `q` is `nu_q(p) * mu_p(e)`.
pub fn merge(mu: &WindowMeasure, nu: &ConcentratedBaseMeasure) -> Result<WindowMeasure, MeasureError> {
    if mu.horizon() != nu.measure.horizon() {
        return Err(MeasureError::HorizonMismatch { left: mu.horizon(), right: nu.measure.horizon() });
    }
    if **mu.base() != **nu.inner() {
        return Err(MeasureError::InnerMismatch);
    }
    let joint = joint_language(nu.inner().language(), mu.extra())?;
    let shift = nu.inner().language().len();
    let inner_lang = nu.inner().language().clone();
    let mut tables = Vec::with_capacity(mu.horizon());
    for m in 1..=mu.horizon() {
        let mut table = Table::new();
        for (q, nu_row) in nu.measure.table(m) {
            let mut row = Row::new();
            for (p, np) in nu_row {
                let key = p.relabel(inner_lang.clone(), |r| r);
                let mu_row = mu.row(&key).ok_or_else(|| MeasureError::NotConcentrated { diagram: show(p) })?;
                for (e, mp) in mu_row {
                    row.insert(join_diagrams(&joint, p, e, shift), np * mp);
                }
            }
            table.insert(q.clone(), row);
        }
        tables.push(table);
    }
    WindowMeasure::new(nu.outer().clone(), joint, mu.horizon(), tables)
}

/// Evaluates the merged probability of `formula` over the outer diagram
/// `q` by the sum formula `Σ_p nu_q(p) · mu_p(formula[p])`, where inner
/// literals are decided by `p`.
pub fn describe_merge(
    mu: &WindowMeasure,
    nu: &ConcentratedBaseMeasure,
    q: &WindowStructure,
    formula: &QfFormula,
) -> Result<Rational, MeasureError> {
    if mu.horizon() != nu.measure.horizon() {
        return Err(MeasureError::HorizonMismatch { left: mu.horizon(), right: nu.measure.horizon() });
    }
    joint_language(nu.inner().language(), mu.extra())?;
    let nu_row = nu.measure.row(q).ok_or_else(|| MeasureError::UnknownBaseDiagram { diagram: show(q) })?;
    let inner_lang = nu.inner().language().clone();
    let mut total = Rational::zero();
    for (p, np) in nu_row {
        let key = p.relabel(inner_lang.clone(), |r| r);
        let mu_row = mu.row(&key).ok_or_else(|| MeasureError::NotConcentrated { diagram: show(p) })?;
        let mut conditional = Rational::zero();
        for (e, mp) in mu_row {
            if eval_split(formula, &[(&key, &inner_lang), (e, mu.extra()), (q, nu.outer().language())])? {
                conditional += mp;
            }
        }
        total += np * conditional;
    }
    Ok(total)
}

/// Splits a measure over `L_M ⊔ L` into its conditional expansion measure
/// over `M` and its `L_M`-marginal.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub mu: WindowMeasure,
    pub nu: ConcentratedBaseMeasure,
    /// Inner diagrams of zero mass, where the trivial expansion was used.
    pub zero_mass: Vec<WindowStructure>,
}

pub fn decompose(
    eta: &WindowMeasure,
    inner: &Arc<CanonicalPresentation>,
    projection: Option<Vec<RelId>>,
) -> Result<Decomposition, MeasureError> {
    let k = inner.language().len();
    let joint = eta.extra();
    let inner_names_match = k <= joint.len() && (0..k).all(|r| joint.relation(r) == inner.language().relation(r));
    if !inner_names_match {
        return Err(MeasureError::InnerMismatch);
    }
    let extra = Arc::new(Language::new(joint.relations()[k..].to_vec())?);
    let inner_lang = inner.language().clone();
    let split = |d: &WindowStructure| -> (WindowStructure, WindowStructure) {
        let p = d.project(inner_lang.clone(), |r| (r < k).then_some(r));
        let e = d.project(extra.clone(), |r| (r >= k).then(|| r - k));
        (p, e)
    };
    let mut nu_tables = Vec::with_capacity(eta.horizon());
    let mut mu_tables = Vec::with_capacity(eta.horizon());
    let mut zero_mass = Vec::new();
    for m in 1..=eta.horizon() {
        let mut nu_table = Table::new();
        // (inner diagram) -> (outer diagram with positive mass, conditional row)
        let mut cond: BTreeMap<WindowStructure, Row> = BTreeMap::new();
        for (q, row) in eta.table(m) {
            let mut nu_row = Row::new();
            let mut by_inner: BTreeMap<WindowStructure, Row> = BTreeMap::new();
            for (d, prob) in row {
                let (p, e) = split(d);
                *nu_row.entry(p.clone()).or_insert_with(Rational::zero) += prob;
                *by_inner.entry(p).or_default().entry(e).or_insert_with(Rational::zero) += prob;
            }
            for (p, joint_row) in by_inner {
                let mass = nu_row[&p].clone();
                if mass.is_zero() || cond.contains_key(&p) {
                    continue;
                }
                let conditional: Row = joint_row.into_iter().map(|(e, x)| (e, x / &mass)).collect();
                cond.insert(p, conditional);
            }
            nu_table.insert(q.clone(), strip_zeros(nu_row));
        }
        let mut mu_table = Table::new();
        for p in inner.labeled_diagrams(m) {
            let key = p.clone().with_mode(Mode::General).expect("general mode accepts any diagram");
            let row = match cond.remove(&key) {
                Some(r) => r,
                None => {
                    zero_mass.push(p.clone());
                    [(WindowStructure::empty(extra.clone(), m), Rational::one())].into_iter().collect()
                }
            };
            mu_table.insert(p, row);
        }
        if let Some(p) = cond.keys().next() {
            return Err(MeasureError::NotConcentrated { diagram: show(p) });
        }
        nu_tables.push(nu_table);
        mu_tables.push(mu_table);
    }
    let nu_measure = WindowMeasure::new(eta.base().clone(), inner_lang, eta.horizon(), nu_tables)?;
    let nu = ConcentratedBaseMeasure::new(inner.clone(), nu_measure, projection)?;
    let mu = WindowMeasure::new(inner.clone(), extra, eta.horizon(), mu_tables)?;
    Ok(Decomposition { mu, nu, zero_mass })
}

/// Display helper: rows of a table as `diagram -> p/q` lines, sorted.
pub fn format_row(row: &Row) -> Vec<String> {
    row.iter().map(|(e, p)| format!("{} -> {}", e, format_rational(p))).sorted().collect()
}
