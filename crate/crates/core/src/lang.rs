//! Relational languages, finite window structures, quantifier-free evaluation,
//! ages with their closure properties, and the non-redundant definable
//! expansion.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// Index of a relation symbol inside its [`Language`].
pub type RelId = usize;

/// An injective tuple of window elements.
pub type Tuple = SmallVec<[u8; 4]>;

/// Largest window any structure may have.
pub const MAX_WINDOW: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LangError {
    #[error("duplicate relation name `{0}`")]
    DuplicateName(String),
    #[error("relation `{0}` has arity 0")]
    ZeroArity(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{name}` has arity {expected}, used with {found} arguments")]
    ArityMismatch { name: String, expected: usize, found: usize },
    #[error("parameter {param} lies outside the window of size {window}")]
    ParameterOutOfWindow { param: usize, window: usize },
    #[error("element {element} lies outside the window of size {window}")]
    ElementOutOfWindow { element: usize, window: usize },
    #[error("element {0} is repeated")]
    DuplicateElement(usize),
    #[error("fact on a non-injective tuple {0:?}")]
    NonInjective(Vec<usize>),
    #[error("canonical structure violates the unique-relation rule at tuple {tuple:?}: {count} relations hold")]
    CanonicalViolation { tuple: Vec<usize>, count: usize },
    #[error("window of size {0} exceeds the supported maximum")]
    WindowTooLarge(usize),
    #[error("structures are over different languages")]
    LanguageMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    pub arity: usize,
}

/// An ordered list of relation symbols. The list order is the chosen
/// ordering inside each arity.
#[derive(Clone, Debug)]
pub struct Language {
    relations: Vec<Relation>,
    by_name: HashMap<String, RelId>,
}

impl PartialEq for Language {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
    }
}

impl Eq for Language {}

impl Hash for Language {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.relations.hash(state);
    }
}

impl PartialOrd for Language {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Language {
    fn cmp(&self, other: &Self) -> Ordering {
        self.relations.cmp(&other.relations)
    }
}

impl Language {
    pub fn new(relations: Vec<Relation>) -> Result<Self, LangError> {
        let mut by_name = HashMap::with_capacity(relations.len());
        for (id, rel) in relations.iter().enumerate() {
            if rel.arity == 0 {
                return Err(LangError::ZeroArity(rel.name.clone()));
            }
            if by_name.insert(rel.name.clone(), id).is_some() {
                return Err(LangError::DuplicateName(rel.name.clone()));
            }
        }
        Ok(Language { relations, by_name })
    }

    /// Convenience constructor from `(name, arity)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, usize)>) -> Result<Self, LangError> {
        Self::new(pairs.into_iter().map(|(name, arity)| Relation { name: name.into(), arity }).collect())
    }

    pub fn empty() -> Self {
        Language { relations: Vec::new(), by_name: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn relation(&self, id: RelId) -> &Relation {
        &self.relations[id]
    }

    pub fn name(&self, id: RelId) -> &str {
        &self.relations[id].name
    }

    pub fn arity(&self, id: RelId) -> usize {
        self.relations[id].arity
    }

    pub fn id(&self, name: &str) -> Option<RelId> {
        self.by_name.get(name).copied()
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }

    /// The sub-language of arity exactly `k`, in list order.
    pub fn ids_of_arity(&self, k: usize) -> Vec<RelId> {
        (0..self.len()).filter(|&id| self.relations[id].arity == k).collect()
    }

    /// The sub-language of arity at most `k`, in list order.
    pub fn ids_up_to_arity(&self, k: usize) -> Vec<RelId> {
        (0..self.len()).filter(|&id| self.relations[id].arity <= k).collect()
    }

    /// Disjoint union: `self` first, then `other`. Relation ids of `other`
    /// are shifted by `self.len()`.
    pub fn join(&self, other: &Language) -> Result<Language, LangError> {
        Language::new(self.relations.iter().chain(other.relations.iter()).cloned().collect())
    }

    fn resolve(&self, name: &str, args: usize) -> Result<RelId, LangError> {
        let id = self.id(name).ok_or_else(|| LangError::UnknownRelation(name.to_string()))?;
        let expected = self.arity(id);
        if expected != args {
            return Err(LangError::ArityMismatch { name: name.to_string(), expected, found: args });
        }
        Ok(id)
    }
}

/// A single fact `rel(tuple)`. Ordered by tuple first so that all facts on a
/// tuple are contiguous.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub tuple: Tuple,
    pub rel: RelId,
}

impl Fact {
    pub fn new(rel: RelId, tuple: &[usize]) -> Self {
        Fact { tuple: tuple.iter().map(|&x| x as u8).collect(), rel }
    }
}

pub fn is_injective(tuple: &[u8]) -> bool {
    tuple.iter().enumerate().all(|(i, x)| !tuple[..i].contains(x))
}

pub fn to_tuple(xs: &[usize]) -> Tuple {
    xs.iter().map(|&x| x as u8).collect()
}

/// All injective tuples of length `k` over `{0, ..., n-1}`, in lexicographic order.
pub fn injective_tuples(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).permutations(k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exactly one relation of arity `k` holds of each injective `k`-tuple.
    Canonical,
    /// Any set of facts on injective tuples.
    General,
}

/// A complete non-redundant diagram on the window `{0, ..., size-1}`.
/// Facts not listed are false.
#[derive(Clone)]
pub struct WindowStructure {
    language: Arc<Language>,
    size: usize,
    mode: Mode,
    facts: BTreeSet<Fact>,
}

impl PartialEq for WindowStructure {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size
            && self.facts == other.facts
            && (Arc::ptr_eq(&self.language, &other.language) || self.language == other.language)
    }
}

impl Eq for WindowStructure {}

impl Hash for WindowStructure {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.size.hash(state);
        self.facts.hash(state);
    }
}

impl PartialOrd for WindowStructure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WindowStructure {
    fn cmp(&self, other: &Self) -> Ordering {
        self.size.cmp(&other.size).then_with(|| self.facts.cmp(&other.facts)).then_with(|| {
            if Arc::ptr_eq(&self.language, &other.language) {
                Ordering::Equal
            } else {
                self.language.cmp(&other.language)
            }
        })
    }
}

impl fmt::Debug for WindowStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for WindowStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]{{", self.size)?;
        for (i, fact) in self.facts.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}({})", self.language.name(fact.rel), fact.tuple.iter().join(","))?;
        }
        write!(f, "}}")
    }
}

impl WindowStructure {
    pub fn new(
        language: Arc<Language>,
        size: usize,
        mode: Mode,
        facts: impl IntoIterator<Item = Fact>,
    ) -> Result<Self, LangError> {
        if size > MAX_WINDOW {
            return Err(LangError::WindowTooLarge(size));
        }
        let facts: BTreeSet<Fact> = facts.into_iter().collect();
        for fact in &facts {
            if fact.rel >= language.len() {
                return Err(LangError::UnknownRelation(format!("#{}", fact.rel)));
            }
            let arity = language.arity(fact.rel);
            if arity != fact.tuple.len() {
                return Err(LangError::ArityMismatch {
                    name: language.name(fact.rel).to_string(),
                    expected: arity,
                    found: fact.tuple.len(),
                });
            }
            if let Some(&x) = fact.tuple.iter().find(|&&x| x as usize >= size) {
                return Err(LangError::ElementOutOfWindow { element: x as usize, window: size });
            }
            if !is_injective(&fact.tuple) {
                return Err(LangError::NonInjective(fact.tuple.iter().map(|&x| x as usize).collect()));
            }
        }
        let s = WindowStructure { language, size, mode, facts };
        if mode == Mode::Canonical {
            s.validate_canonical()?;
        }
        Ok(s)
    }

    pub fn general(
        language: Arc<Language>,
        size: usize,
        facts: impl IntoIterator<Item = Fact>,
    ) -> Result<Self, LangError> {
        Self::new(language, size, Mode::General, facts)
    }

    pub fn canonical(
        language: Arc<Language>,
        size: usize,
        facts: impl IntoIterator<Item = Fact>,
    ) -> Result<Self, LangError> {
        Self::new(language, size, Mode::Canonical, facts)
    }

    /// Builds a structure from named facts, e.g. `[("E", &[0, 1])]`.
    pub fn from_named(
        language: Arc<Language>,
        size: usize,
        mode: Mode,
        facts: &[(&str, &[usize])],
    ) -> Result<Self, LangError> {
        let mut out = Vec::with_capacity(facts.len());
        for (name, tuple) in facts {
            let rel = language.resolve(name, tuple.len())?;
            out.push(Fact::new(rel, tuple));
        }
        Self::new(language, size, mode, out)
    }

    pub fn empty(language: Arc<Language>, size: usize) -> Self {
        WindowStructure { language, size, mode: Mode::General, facts: BTreeSet::new() }
    }

    // Construction without validation; callers guarantee the invariants.
    pub(crate) fn from_parts(language: Arc<Language>, size: usize, mode: Mode, facts: BTreeSet<Fact>) -> Self {
        WindowStructure { language, size, mode, facts }
    }

    fn validate_canonical(&self) -> Result<(), LangError> {
        let max = self.language.max_arity().min(self.size);
        for k in 1..=max {
            if self.language.ids_of_arity(k).is_empty() {
                continue;
            }
            for t in injective_tuples(self.size, k) {
                let count = self.relations_on(&to_tuple(&t)).count();
                if count != 1 {
                    return Err(LangError::CanonicalViolation { tuple: t, count });
                }
            }
        }
        Ok(())
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn with_mode(mut self, mode: Mode) -> Result<Self, LangError> {
        self.mode = mode;
        if mode == Mode::Canonical {
            self.validate_canonical()?;
        }
        Ok(self)
    }

    pub fn holds(&self, rel: RelId, tuple: &[u8]) -> bool {
        self.facts.contains(&Fact { tuple: tuple.into(), rel })
    }

    /// Relations holding of exactly this tuple.
    pub fn relations_on<'a>(&'a self, tuple: &Tuple) -> impl Iterator<Item = RelId> + 'a {
        let lo = Fact { tuple: tuple.clone(), rel: 0 };
        let hi = Fact { tuple: tuple.clone(), rel: RelId::MAX };
        self.facts.range(lo..=hi).map(|f| f.rel)
    }

    /// The unique relation on `tuple` in canonical mode (first one otherwise).
    pub fn relation_of(&self, tuple: &[u8]) -> Option<RelId> {
        self.relations_on(&Tuple::from_slice(tuple)).next()
    }

    pub fn eval(&self, formula: &QfFormula) -> Result<bool, LangError> {
        match formula {
            QfFormula::Conj(lits) => self.eval_conj(lits),
            QfFormula::Disj(clauses) => {
                let mut any = false;
                for c in clauses {
                    // evaluate all clauses so malformed ones are reported
                    any |= self.eval_conj(c)?;
                }
                Ok(any)
            }
        }
    }

    fn eval_conj(&self, lits: &[Literal]) -> Result<bool, LangError> {
        let mut all = true;
        for lit in lits {
            all &= self.eval_literal(lit)?;
        }
        Ok(all)
    }

    pub fn eval_literal(&self, lit: &Literal) -> Result<bool, LangError> {
        let rel = self.language.resolve(&lit.rel, lit.args.len())?;
        if let Some(&p) = lit.args.iter().find(|&&p| p >= self.size) {
            return Err(LangError::ParameterOutOfWindow { param: p, window: self.size });
        }
        let tuple = to_tuple(&lit.args);
        // Atoms on repeated entries are false by non-redundancy.
        let atom = is_injective(&tuple) && self.holds(rel, &tuple);
        Ok(atom == lit.positive)
    }

    /// Induced structure on `subset`, relabeled to `0..subset.len()` in subset order.
    pub fn substructure(&self, subset: &[usize]) -> Result<Self, LangError> {
        let mut position = vec![u8::MAX; self.size];
        for (i, &x) in subset.iter().enumerate() {
            if x >= self.size {
                return Err(LangError::ElementOutOfWindow { element: x, window: self.size });
            }
            if position[x] != u8::MAX {
                return Err(LangError::DuplicateElement(x));
            }
            position[x] = i as u8;
        }
        Ok(self.induced(&position, subset.len()))
    }

    // `position[x]` is the new index of old element x, or u8::MAX if dropped.
    fn induced(&self, position: &[u8], new_size: usize) -> Self {
        let facts = self
            .facts
            .iter()
            .filter_map(|f| {
                let tuple: Option<Tuple> = f
                    .tuple
                    .iter()
                    .map(|&x| {
                        let p = position[x as usize];
                        (p != u8::MAX).then_some(p)
                    })
                    .collect();
                tuple.map(|tuple| Fact { tuple, rel: f.rel })
            })
            .collect();
        WindowStructure { language: self.language.clone(), size: new_size, mode: self.mode, facts }
    }

    /// The image `pi . S`: element `x` is renamed to `pi[x]`.
    pub fn permuted(&self, pi: &[usize]) -> Self {
        let facts = self
            .facts
            .iter()
            .map(|f| Fact { tuple: f.tuple.iter().map(|&x| pi[x as usize] as u8).collect(), rel: f.rel })
            .collect();
        WindowStructure { language: self.language.clone(), size: self.size, mode: self.mode, facts }
    }

    /// Lexicographically minimal diagram over all permutations of the window.
    pub fn canonical_form(&self) -> Self {
        let mut best: Option<Vec<Fact>> = None;
        for pi in (0..self.size).permutations(self.size) {
            let mut facts: Vec<Fact> = self
                .facts
                .iter()
                .map(|f| Fact { tuple: f.tuple.iter().map(|&x| pi[x as usize] as u8).collect(), rel: f.rel })
                .collect();
            facts.sort_unstable();
            if best.as_ref().is_none_or(|b| facts < *b) {
                best = Some(facts);
            }
        }
        let facts = best.unwrap_or_default().into_iter().collect();
        WindowStructure { language: self.language.clone(), size: self.size, mode: self.mode, facts }
    }

    /// Facts whose tuple covers exactly the element set of `tuple` length.
    pub fn facts_of_arity(&self, k: usize) -> impl Iterator<Item = &Fact> {
        self.facts.iter().filter(move |f| f.tuple.len() == k)
    }

    /// Replaces the language and maps every relation id through `map`.
    pub fn relabel(&self, language: Arc<Language>, map: impl Fn(RelId) -> RelId) -> Self {
        let facts = self.facts.iter().map(|f| Fact { tuple: f.tuple.clone(), rel: map(f.rel) }).collect();
        WindowStructure { language, size: self.size, mode: self.mode, facts }
    }

    /// Keeps only facts whose relation satisfies `keep`, relabeled by `map`.
    pub fn project(&self, language: Arc<Language>, keep: impl Fn(RelId) -> Option<RelId>) -> Self {
        let facts =
            self.facts.iter().filter_map(|f| keep(f.rel).map(|rel| Fact { tuple: f.tuple.clone(), rel })).collect();
        WindowStructure { language, size: self.size, mode: Mode::General, facts }
    }

    /// Every injective map from this structure into `target` that is an embedding.
    pub fn embeddings_into(&self, target: &WindowStructure) -> Vec<Vec<usize>> {
        if self.size > target.size {
            return Vec::new();
        }
        injective_tuples(target.size, self.size).filter(|map| target.induced_by_map(map) == *self).collect()
    }

    fn induced_by_map(&self, map: &[usize]) -> Self {
        let mut position = vec![u8::MAX; self.size];
        for (i, &x) in map.iter().enumerate() {
            position[x] = i as u8;
        }
        self.induced(&position, map.len())
    }
}

/// A signed atom `rel(args)` or its negation.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub rel: String,
    pub args: Vec<usize>,
    pub positive: bool,
}

impl Literal {
    pub fn pos(rel: &str, args: &[usize]) -> Self {
        Literal { rel: rel.to_string(), args: args.to_vec(), positive: true }
    }

    pub fn neg(rel: &str, args: &[usize]) -> Self {
        Literal { rel: rel.to_string(), args: args.to_vec(), positive: false }
    }

    pub fn negated(&self) -> Self {
        Literal { positive: !self.positive, ..self.clone() }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = if self.positive { "" } else { "¬" };
        write!(f, "{neg}{}({})", self.rel, self.args.iter().join(","))
    }
}

/// Quantifier-free formulas with window parameters: a conjunction of
/// literals, or a finite disjunction of such conjunctions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QfFormula {
    Conj(Vec<Literal>),
    Disj(Vec<Vec<Literal>>),
}

impl QfFormula {
    pub fn top() -> Self {
        QfFormula::Conj(Vec::new())
    }

    pub fn literals(&self) -> impl Iterator<Item = &Literal> {
        let v: Vec<&Literal> = match self {
            QfFormula::Conj(l) => l.iter().collect(),
            QfFormula::Disj(c) => c.iter().flatten().collect(),
        };
        v.into_iter()
    }
}

impl fmt::Display for QfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QfFormula::Conj(l) if l.is_empty() => write!(f, "⊤"),
            QfFormula::Conj(l) => write!(f, "{}", l.iter().join(" ∧ ")),
            QfFormula::Disj(c) => {
                write!(f, "{}", c.iter().map(|l| format!("({})", l.iter().join(" ∧ "))).join(" ∨ "))
            }
        }
    }
}

/// Isomorphism classes of window structures up to a size bound.
#[derive(Clone, Debug)]
pub struct Age {
    language: Arc<Language>,
    size_bound: usize,
    members: Vec<WindowStructure>,
    index: HashSet<WindowStructure>,
}

impl Age {
    /// Stores each member once in canonical form. No closure is applied.
    pub fn from_members(
        language: Arc<Language>,
        size_bound: usize,
        members: impl IntoIterator<Item = WindowStructure>,
    ) -> Self {
        let mut set: BTreeSet<WindowStructure> = BTreeSet::new();
        for m in members {
            if m.size() >= 1 && m.size() <= size_bound {
                set.insert(m.canonical_form());
            }
        }
        let members: Vec<_> = set.into_iter().collect();
        let index = members.iter().cloned().collect();
        Age { language, size_bound, members, index }
    }

    /// All structures on `1..=size_bound` points satisfying `keep`, found by
    /// exhaustive enumeration of general-mode diagrams.
    pub fn from_predicate(
        language: Arc<Language>,
        size_bound: usize,
        mode: Mode,
        keep: impl Fn(&WindowStructure) -> bool,
    ) -> Self {
        let mut found = Vec::new();
        for n in 1..=size_bound {
            let slots: Vec<Fact> = (0..language.len())
                .flat_map(|rel| injective_tuples(n, language.arity(rel)).map(move |t| Fact::new(rel, &t)))
                .collect();
            assert!(slots.len() < 28, "predicate enumeration over {} slots", slots.len());
            let mut seen = HashSet::new();
            for bits in 0u64..(1u64 << slots.len()) {
                let facts =
                    slots.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, f)| f.clone()).collect();
                let s = WindowStructure::from_parts(language.clone(), n, mode, facts);
                if mode == Mode::Canonical && s.validate_canonical().is_err() {
                    continue;
                }
                if keep(&s) {
                    let c = s.canonical_form();
                    if seen.insert(c.clone()) {
                        found.push(c);
                    }
                }
            }
        }
        Self::from_members(language, size_bound, found)
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn size_bound(&self) -> usize {
        self.size_bound
    }

    pub fn members(&self) -> &[WindowStructure] {
        &self.members
    }

    pub fn members_of_size(&self, n: usize) -> impl Iterator<Item = &WindowStructure> {
        self.members.iter().filter(move |m| m.size() == n)
    }

    pub fn contains(&self, s: &WindowStructure) -> bool {
        s.size() >= 1 && s.size() <= self.size_bound && self.index.contains(&s.canonical_form())
    }

    /// Every labeling of every member of size `n`, without duplicates.
    pub fn labeled_members(&self, n: usize) -> Vec<WindowStructure> {
        let mut out = BTreeSet::new();
        for m in self.members_of_size(n) {
            for pi in (0..n).permutations(n) {
                out.insert(m.permuted(&pi));
            }
        }
        out.into_iter().collect()
    }
}

/// The closure under induced substructures of all generators, up to size `k`.
pub fn age_of<'a>(
    language: Arc<Language>,
    generators: impl IntoIterator<Item = &'a WindowStructure>,
    size_bound: usize,
) -> Age {
    let mut found = Vec::new();
    for g in generators {
        for k in 1..=size_bound.min(g.size()) {
            for subset in (0..g.size()).combinations(k) {
                found.push(g.substructure(&subset).expect("subset lies in the window"));
            }
        }
    }
    Age::from_members(language, size_bound, found)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HpWitness {
    pub member: WindowStructure,
    pub subset: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JepWitness {
    pub left: WindowStructure,
    pub right: WindowStructure,
}

/// An amalgamation problem `base -> left`, `base -> right` with no strong amalgam.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SapWitness {
    pub base: WindowStructure,
    pub left: WindowStructure,
    pub right: WindowStructure,
    pub left_embedding: Vec<usize>,
    pub right_embedding: Vec<usize>,
}

/// Results are exact relative to the size bound: a pass means no
/// counterexample exists below it.
#[derive(Clone, Debug)]
pub struct AgeReport {
    pub size_bound: usize,
    pub hp: bool,
    pub jep: bool,
    pub sap: bool,
    pub hp_witness: Option<HpWitness>,
    pub jep_witness: Option<JepWitness>,
    pub sap_witness: Option<SapWitness>,
}

pub fn check_age_properties(age: &Age) -> AgeReport {
    let hp_witness = hp_failure(age);
    let jep_witness = find_jep_failure(age);
    let sap_witness = find_sap_failure(age);
    AgeReport {
        size_bound: age.size_bound,
        hp: hp_witness.is_none(),
        jep: jep_witness.is_none(),
        sap: sap_witness.is_none(),
        hp_witness,
        jep_witness,
        sap_witness,
    }
}

/// First member with an induced substructure missing from the age.
pub fn hp_failure(age: &Age) -> Option<HpWitness> {
    for m in &age.members {
        for k in 1..m.size() {
            for subset in (0..m.size()).combinations(k) {
                let sub = m.substructure(&subset).expect("in window");
                if !age.contains(&sub) {
                    return Some(HpWitness { member: m.clone(), subset });
                }
            }
        }
    }
    None
}

fn find_jep_failure(age: &Age) -> Option<JepWitness> {
    for (i, a) in age.members.iter().enumerate() {
        for b in &age.members[i..] {
            if a.size() + b.size() > age.size_bound {
                continue;
            }
            let joint =
                age.members.iter().any(|c| !a.embeddings_into(c).is_empty() && !b.embeddings_into(c).is_empty());
            if !joint {
                return Some(JepWitness { left: a.clone(), right: b.clone() });
            }
        }
    }
    None
}

/// Labeled members of each size, grouped by their facts on tuples shorter
/// than the window, so a subset can be completed in one lookup.
struct CompletionIndex {
    by_lower: Vec<HashMap<BTreeSet<Fact>, Vec<Vec<Fact>>>>,
}

impl CompletionIndex {
    fn new(age: &Age) -> Self {
        let mut by_lower = vec![HashMap::new(); age.size_bound + 1];
        for (n, slot) in by_lower.iter_mut().enumerate().skip(1) {
            for m in age.labeled_members(n) {
                let (lower, top): (Vec<Fact>, Vec<Fact>) = m.facts.iter().cloned().partition(|f| f.tuple.len() < n);
                slot.entry(lower.into_iter().collect::<BTreeSet<_>>()).or_insert_with(Vec::new).push(top);
            }
        }
        CompletionIndex { by_lower }
    }
}

fn find_sap_failure(age: &Age) -> Option<SapWitness> {
    let index = CompletionIndex::new(age);
    let max_arity = age.language.max_arity();
    for a in &age.members {
        for b in &age.members {
            if b.size() <= a.size() {
                continue;
            }
            for c in &age.members {
                if c.size() <= a.size() || b.size() + c.size() - a.size() > age.size_bound {
                    continue;
                }
                let left = a.embeddings_into(b);
                let right = a.embeddings_into(c);
                for f in &left {
                    for g in &right {
                        if strong_amalgam(age, &index, max_arity, b, c, f, g).is_none() {
                            return Some(SapWitness {
                                base: a.clone(),
                                left: b.clone(),
                                right: c.clone(),
                                left_embedding: f.clone(),
                                right_embedding: g.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    None
}

/// Searches for a member on `|B| + |C| - |A|` points extending both sides
/// with images meeting exactly in the image of `A`.
fn strong_amalgam(
    age: &Age,
    index: &CompletionIndex,
    max_arity: usize,
    b: &WindowStructure,
    c: &WindowStructure,
    f: &[usize],
    g: &[usize],
) -> Option<WindowStructure> {
    let d = b.size() + c.size() - f.len();
    let mut cmap = vec![usize::MAX; c.size()];
    for (i, &gi) in g.iter().enumerate() {
        cmap[gi] = f[i];
    }
    let mut next = b.size();
    for slot in cmap.iter_mut() {
        if *slot == usize::MAX {
            *slot = next;
            next += 1;
        }
    }
    let mut facts: BTreeSet<Fact> = b.facts.clone();
    for fact in &c.facts {
        facts.insert(Fact { tuple: fact.tuple.iter().map(|&x| cmap[x as usize] as u8).collect(), rel: fact.rel });
    }
    let b_only: Vec<usize> = (0..b.size()).filter(|x| !f.contains(x)).collect();
    let c_only: Vec<usize> = (b.size()..d).collect();
    let mut mixed: Vec<Vec<usize>> = Vec::new();
    for k in 2..=max_arity.min(d) {
        for s in (0..d).combinations(k) {
            if s.iter().any(|x| b_only.contains(x)) && s.iter().any(|x| c_only.contains(x)) {
                mixed.push(s);
            }
        }
    }
    let mut current = WindowStructure::from_parts(b.language.clone(), d, b.mode, facts);
    if fill_mixed(age, index, &mixed, 0, &mut current) {
        Some(current)
    } else {
        None
    }
}

fn fill_mixed(
    age: &Age,
    index: &CompletionIndex,
    mixed: &[Vec<usize>],
    at: usize,
    current: &mut WindowStructure,
) -> bool {
    if at == mixed.len() {
        return age.contains(current);
    }
    let subset = &mixed[at];
    let n = subset.len();
    let Some(table) = index.by_lower.get(n) else {
        return false;
    };
    let lower: BTreeSet<Fact> = current.substructure(subset).expect("in window").facts.into_iter().collect();
    let Some(options) = table.get(&lower) else {
        return false;
    };
    for top in options {
        let placed: Vec<Fact> = top
            .iter()
            .map(|f| Fact { tuple: f.tuple.iter().map(|&x| subset[x as usize] as u8).collect(), rel: f.rel })
            .collect();
        for p in &placed {
            current.facts.insert(p.clone());
        }
        if fill_mixed(age, index, mixed, at + 1, current) {
            return true;
        }
        for p in &placed {
            current.facts.remove(p);
        }
    }
    false
}

/// A structure whose facts may repeat entries; the input side of the
/// non-redundant expansion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RedundantStructure {
    pub language: Arc<Language>,
    pub size: usize,
    pub facts: BTreeSet<(RelId, Vec<usize>)>,
}

impl RedundantStructure {
    pub fn from_named(language: Arc<Language>, size: usize, facts: &[(&str, &[usize])]) -> Result<Self, LangError> {
        let mut out = BTreeSet::new();
        for (name, tuple) in facts {
            let rel = language.resolve(name, tuple.len())?;
            if let Some(&x) = tuple.iter().find(|&&x| x >= size) {
                return Err(LangError::ElementOutOfWindow { element: x, window: size });
            }
            out.insert((rel, tuple.to_vec()));
        }
        Ok(RedundantStructure { language, size, facts: out })
    }
}

/// The non-redundant definable expansion `L_nr` of a language: one relation
/// `P/pattern` per relation `P` and equality pattern on its arguments, whose
/// arity is the number of classes.
#[derive(Clone, Debug)]
pub struct NrExpansion {
    pub source: Arc<Language>,
    pub expanded: Arc<Language>,
    // expanded id -> (source id, restricted growth string)
    origin: Vec<(RelId, Vec<usize>)>,
    lookup: HashMap<(RelId, Vec<usize>), RelId>,
}

/// Set partitions of `{0..k}` as restricted growth strings, in lexicographic order.
pub fn set_partitions(k: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for c in 0..=next {
            prefix.push(c);
            grow(prefix, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    grow(&mut Vec::new(), k, &mut out);
    out
}

pub fn nonredundant_expansion(language: &Arc<Language>) -> NrExpansion {
    let mut relations = Vec::new();
    let mut origin = Vec::new();
    let mut lookup = HashMap::new();
    for (id, rel) in language.relations().iter().enumerate() {
        for pattern in set_partitions(rel.arity) {
            let classes = pattern.iter().max().map_or(0, |m| m + 1);
            lookup.insert((id, pattern.clone()), relations.len());
            relations.push(Relation { name: format!("{}/{}", rel.name, pattern.iter().join("")), arity: classes });
            origin.push((id, pattern));
        }
    }
    let expanded = Arc::new(Language::new(relations).expect("pattern names are unique"));
    NrExpansion { source: language.clone(), expanded, origin, lookup }
}

impl NrExpansion {
    pub fn translate(&self, s: &RedundantStructure) -> WindowStructure {
        let facts = s
            .facts
            .iter()
            .map(|(rel, tuple)| {
                let mut distinct: Vec<usize> = Vec::new();
                let pattern: Vec<usize> = tuple
                    .iter()
                    .map(|x| match distinct.iter().position(|d| d == x) {
                        Some(i) => i,
                        None => {
                            distinct.push(*x);
                            distinct.len() - 1
                        }
                    })
                    .collect();
                Fact::new(self.lookup[&(*rel, pattern)], &distinct)
            })
            .collect();
        WindowStructure::from_parts(self.expanded.clone(), s.size, Mode::General, facts)
    }

    pub fn untranslate(&self, s: &WindowStructure) -> RedundantStructure {
        let facts = s
            .facts()
            .iter()
            .map(|f| {
                let (rel, pattern) = &self.origin[f.rel];
                (*rel, pattern.iter().map(|&c| f.tuple[c] as usize).collect())
            })
            .collect();
        RedundantStructure { language: self.source.clone(), size: s.size(), facts }
    }
}
