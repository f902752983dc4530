//! Canonical structures presented by one witness diagram per relation,
//! restriction, `⊆_can`, compatible collections, freeness, and the free
//! completion.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use itertools::Itertools;
use thiserror::Error;

use crate::lang::{
    check_age_properties, hp_failure, to_tuple, Age, Fact, LangError, Language, Mode, RelId, Relation, SapWitness,
    WindowStructure,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CanonError {
    #[error("age is not closed under substructures: {0}")]
    NotHpClosed(String),
    #[error("age bound {bound} is below the requested arity {arity}")]
    AgeTooSmall { bound: usize, arity: usize },
    #[error("relation `{0}` is not realized")]
    UnrealizedRelation(String),
    #[error("requested arity {requested} exceeds the presented arity {available}")]
    BoundExceeded { requested: usize, available: usize },
    #[error("witness of `{rel}` is inconsistent on tuple {tuple:?}: {detail}")]
    Incoherent { rel: String, tuple: Vec<usize>, detail: String },
    #[error("relations `{0}` and `{1}` have identical witnesses")]
    DuplicateWitness(String, String),
    #[error("collection {0} is not compatible")]
    IncompatibleCollection(String),
    #[error(transparent)]
    Lang(#[from] LangError),
}

/// A canonical structure truncated at `max_arity`. Each relation `R` of
/// arity `n` carries its witness: the canonical diagram on `n` points in
/// which `R` holds of `(0, ..., n-1)`. Everything else is read off the
/// witnesses.
#[derive(Clone)]
pub struct CanonicalPresentation {
    language: Arc<Language>,
    witnesses: Vec<WindowStructure>,
    max_arity: usize,
    faces: Vec<Vec<RelId>>,
    by_faces: HashMap<Vec<RelId>, Vec<RelId>>,
    by_lower: HashMap<(usize, BTreeSet<Fact>), Vec<RelId>>,
    perms: Vec<Vec<RelId>>,
}

impl fmt::Debug for CanonicalPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CanonicalPresentation")
            .field("max_arity", &self.max_arity)
            .field("relations", &self.language.relations().iter().map(|r| &r.name).collect::<Vec<_>>())
            .finish()
    }
}

impl PartialEq for CanonicalPresentation {
    fn eq(&self, other: &Self) -> bool {
        self.language == other.language && self.witnesses == other.witnesses
    }
}

impl Eq for CanonicalPresentation {}

/// `face_positions(a, i)`: positions `0..a` without `i`.
pub fn face_positions(a: usize, i: usize) -> Vec<usize> {
    (0..a).filter(|&k| k != i).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompatibleCollection {
    /// `parts[i]` sits on the face omitting index `i`.
    pub parts: Vec<RelId>,
}

impl CompatibleCollection {
    pub fn arity(&self) -> usize {
        self.parts.len()
    }

    pub fn display(&self, language: &Language) -> String {
        format!("⟨{}⟩", self.parts.iter().map(|&r| language.name(r)).join(","))
    }

    pub fn names(&self, language: &Language) -> Vec<String> {
        self.parts.iter().map(|&r| language.name(r).to_string()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionEntry {
    pub rel: RelId,
    pub index_set: Vec<usize>,
    pub restricted: RelId,
}

impl CanonicalPresentation {
    pub fn new(language: Arc<Language>, witnesses: Vec<WindowStructure>) -> Result<Self, CanonError> {
        assert_eq!(language.len(), witnesses.len(), "one witness per relation");
        let max_arity = language.max_arity();
        let mut seen: HashMap<&BTreeSet<Fact>, RelId> = HashMap::new();
        for (r, w) in witnesses.iter().enumerate() {
            let name = language.name(r).to_string();
            let n = language.arity(r);
            let incoherent =
                |tuple: Vec<usize>, detail: String| CanonError::Incoherent { rel: name.clone(), tuple, detail };
            if w.size() != n {
                return Err(incoherent(vec![], format!("witness has {} points", w.size())));
            }
            let w = w.clone().with_mode(Mode::Canonical)?;
            let full: Vec<usize> = (0..n).collect();
            if w.relation_of(&to_tuple(&full)) != Some(r) {
                return Err(incoherent(full, "relation does not hold of the identity tuple".into()));
            }
            for m in 1..=n {
                for t in (0..n).permutations(m) {
                    let p = w.relation_of(&to_tuple(&t)).expect("canonical witness");
                    let sub = w.substructure(&t)?;
                    if sub != witnesses[p] {
                        return Err(incoherent(
                            t,
                            format!("induced diagram differs from the witness of `{}`", language.name(p)),
                        ));
                    }
                }
            }
            if let Some(&other) = seen.get(w.facts()) {
                return Err(CanonError::DuplicateWitness(language.name(other).into(), name));
            }
            seen.insert(witnesses[r].facts(), r);
        }
        let mut faces = Vec::with_capacity(language.len());
        let mut by_faces: HashMap<Vec<RelId>, Vec<RelId>> = HashMap::new();
        let mut by_lower: HashMap<(usize, BTreeSet<Fact>), Vec<RelId>> = HashMap::new();
        let mut perms = Vec::with_capacity(language.len());
        for (r, w) in witnesses.iter().enumerate() {
            let n = w.size();
            let f: Vec<RelId> = if n >= 2 {
                (0..n).map(|i| w.relation_of(&to_tuple(&face_positions(n, i))).expect("canonical")).collect()
            } else {
                Vec::new()
            };
            if n >= 2 {
                by_faces.entry(f.clone()).or_default().push(r);
            }
            faces.push(f);
            let lower: BTreeSet<Fact> = w.facts().iter().filter(|x| x.tuple.len() < n).cloned().collect();
            by_lower.entry((n, lower)).or_default().push(r);
            perms.push((0..n).permutations(n).map(|s| w.relation_of(&to_tuple(&s)).expect("canonical")).collect());
        }
        Ok(CanonicalPresentation { language, witnesses, max_arity, faces, by_faces, by_lower, perms })
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    pub fn witness(&self, r: RelId) -> &WindowStructure {
        &self.witnesses[r]
    }

    pub fn witnesses(&self) -> &[WindowStructure] {
        &self.witnesses
    }

    pub fn arity(&self, r: RelId) -> usize {
        self.language.arity(r)
    }

    pub fn name(&self, r: RelId) -> &str {
        self.language.name(r)
    }

    pub fn id(&self, name: &str) -> Option<RelId> {
        self.language.id(name)
    }

    pub fn relations_of_arity(&self, n: usize) -> Vec<RelId> {
        self.language.ids_of_arity(n)
    }

    /// The relation holding of `(x_{idx_0}, ...)` whenever `R(x)` holds.
    pub fn restrict(&self, r: RelId, idx: &[usize]) -> RelId {
        self.witnesses[r].relation_of(&to_tuple(idx)).expect("index tuple inside the witness")
    }

    pub fn faces(&self, r: RelId) -> &[RelId] {
        &self.faces[r]
    }

    /// `R^sigma`: the relation of `(x_{sigma_0}, ..., x_{sigma_{n-1}})` when `R(x)` holds.
    pub fn permute(&self, r: RelId, sigma: &[usize]) -> RelId {
        self.restrict(r, sigma)
    }

    /// `R^sigma` for every permutation, in lexicographic order of `sigma`.
    pub fn permutation_images(&self, r: RelId) -> &[RelId] {
        &self.perms[r]
    }

    /// Relations of arity `n` whose witness agrees with `lower` below arity `n`.
    pub fn relations_over(&self, n: usize, lower: &BTreeSet<Fact>) -> &[RelId] {
        self.by_lower.get(&(n, lower.clone())).map_or(&[], |v| v.as_slice())
    }

    pub fn restriction_table(&self) -> Vec<RestrictionEntry> {
        let mut out = Vec::new();
        for r in 0..self.language.len() {
            let n = self.arity(r);
            for k in 1..=n {
                for idx in (0..n).combinations(k) {
                    let restricted = self.restrict(r, &idx);
                    out.push(RestrictionEntry { rel: r, index_set: idx, restricted });
                }
            }
        }
        out
    }

    /// Checks membership and restricts along an index set.
    pub fn restrict_relation(&self, name: &str, idx: &[usize]) -> Result<RelId, CanonError> {
        let r = self.id(name).ok_or_else(|| CanonError::UnrealizedRelation(name.into()))?;
        let n = self.arity(r);
        if idx.is_empty() || idx.iter().any(|&i| i >= n) || !crate::lang::is_injective(&to_tuple(idx)) {
            return Err(CanonError::Incoherent {
                rel: name.into(),
                tuple: idx.to_vec(),
                detail: "index set outside the arity".into(),
            });
        }
        Ok(self.restrict(r, idx))
    }

    /// Every labeled canonical diagram on `m` points: the witnesses when
    /// `m <= max_arity`, otherwise all locally consistent structures.
    pub fn labeled_diagrams(&self, m: usize) -> Vec<WindowStructure> {
        if m == 0 {
            return vec![WindowStructure::empty(self.language.clone(), 0)];
        }
        if m <= self.max_arity {
            return self.relations_of_arity(m).into_iter().map(|r| self.witnesses[r].clone()).collect();
        }
        let mut out = BTreeSet::new();
        for member in self.age(m).members_of_size(m) {
            for pi in (0..m).permutations(m) {
                out.insert(member.permuted(&pi));
            }
        }
        out.into_iter().collect()
    }

    /// The age up to `bound`: every canonical structure all of whose small
    /// tuples induce witnesses. Grown one point at a time.
    pub fn age(&self, bound: usize) -> Age {
        let mut members: Vec<WindowStructure> = Vec::new();
        let mut layer: Vec<WindowStructure> = vec![WindowStructure::empty(self.language.clone(), 0)];
        for _ in 1..=bound {
            let mut next = BTreeSet::new();
            for base in &layer {
                for ext in self.one_point_extensions(base) {
                    next.insert(ext.canonical_form());
                }
            }
            layer = next.into_iter().collect();
            members.extend(layer.iter().cloned());
            if layer.is_empty() {
                break;
            }
        }
        Age::from_members(self.language.clone(), bound, members)
    }

    /// All ways to add point `base.size()` to `base` consistently.
    pub fn one_point_extensions(&self, base: &WindowStructure) -> Vec<WindowStructure> {
        let m = base.size() + 1;
        let v = m - 1;
        let mut subsets: Vec<Vec<usize>> = Vec::new();
        for j in 1..=self.max_arity.min(m) {
            for rest in (0..v).combinations(j - 1) {
                let mut s = rest;
                s.push(v);
                subsets.push(s);
            }
        }
        let start = WindowStructure::from_parts(self.language.clone(), m, Mode::Canonical, base.facts().clone());
        let mut out = Vec::new();
        self.extend_subsets(&subsets, 0, start, &mut out);
        out
    }

    fn extend_subsets(
        &self,
        subsets: &[Vec<usize>],
        at: usize,
        current: WindowStructure,
        out: &mut Vec<WindowStructure>,
    ) {
        if at == subsets.len() {
            out.push(current);
            return;
        }
        let s = &subsets[at];
        let lower: BTreeSet<Fact> = current.substructure(s).expect("in window").facts().clone();
        for &r in self.relations_over(s.len(), &lower) {
            let mut facts = current.facts().clone();
            for f in self.witnesses[r].facts().iter().filter(|f| f.tuple.len() == s.len()) {
                facts.insert(Fact { tuple: f.tuple.iter().map(|&x| s[x as usize] as u8).collect(), rel: f.rel });
            }
            let next = WindowStructure::from_parts(self.language.clone(), current.size(), Mode::Canonical, facts);
            self.extend_subsets(subsets, at + 1, next, out);
        }
    }

    /// Same presentation with relations renamed by `rename`.
    pub fn renamed(&self, rename: impl Fn(RelId, &str) -> String) -> Result<Self, CanonError> {
        let language = Arc::new(Language::new(
            self.language
                .relations()
                .iter()
                .enumerate()
                .map(|(r, rel)| Relation { name: rename(r, &rel.name), arity: rel.arity })
                .collect(),
        )?);
        let witnesses = self.witnesses.iter().map(|w| w.relabel(language.clone(), |r| r)).collect();
        Self::new(language, witnesses)
    }

    /// Same presentation with relations listed in `order` (old ids).
    pub fn reordered(&self, order: &[RelId]) -> Result<Self, CanonError> {
        let mut new_id = vec![usize::MAX; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_id[old] = new;
        }
        let language = Arc::new(Language::new(order.iter().map(|&r| self.language.relation(r).clone()).collect())?);
        let witnesses = order.iter().map(|&r| self.witnesses[r].relabel(language.clone(), |x| new_id[x])).collect();
        Self::new(language, witnesses)
    }

    /// Restriction to arities `<= k`.
    pub fn truncated(&self, k: usize) -> Result<Self, CanonError> {
        let keep = self.language.ids_up_to_arity(k);
        self.reordered_subset(&keep)
    }

    fn reordered_subset(&self, keep: &[RelId]) -> Result<Self, CanonError> {
        let mut new_id = vec![usize::MAX; self.language.len()];
        for (new, &old) in keep.iter().enumerate() {
            new_id[old] = new;
        }
        let language = Arc::new(Language::new(keep.iter().map(|&r| self.language.relation(r).clone()).collect())?);
        let witnesses = keep.iter().map(|&r| self.witnesses[r].relabel(language.clone(), |x| new_id[x])).collect();
        Self::new(language, witnesses)
    }

    /// Canonical presentation of an age read as the age of an
    /// ultrahomogeneous structure: relations are the labeled members.
    pub fn from_age(age: &Age, k: usize) -> Result<Self, CanonError> {
        Self::from_age_named(age, k, default_name)
    }

    pub fn from_age_named(age: &Age, k: usize, namer: impl Fn(&WindowStructure) -> String) -> Result<Self, CanonError> {
        if age.size_bound() < k {
            return Err(CanonError::AgeTooSmall { bound: age.size_bound(), arity: k });
        }
        if let Some(w) = hp_failure(age) {
            return Err(CanonError::NotHpClosed(format!("{} on {:?}", w.member, w.subset)));
        }
        let mut types: Vec<WindowStructure> = Vec::new();
        for m in 1..=k {
            let mut labeled = age.labeled_members(m);
            labeled.sort_by(|a, b| b.facts().len().cmp(&a.facts().len()).then_with(|| a.cmp(b)));
            types.extend(labeled);
        }
        let index: HashMap<WindowStructure, RelId> = types.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        let names: Vec<Relation> = types.iter().map(|t| Relation { name: namer(t), arity: t.size() }).collect();
        let language = Arc::new(Language::new(names)?);
        let witnesses = types
            .iter()
            .map(|t| {
                let n = t.size();
                let facts = (1..=n).flat_map(|j| (0..n).permutations(j)).map(|idx| {
                    let sub = t.substructure(&idx).expect("in window");
                    Fact::new(index[&sub], &idx)
                });
                WindowStructure::canonical(language.clone(), n, facts.collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(language, witnesses)
    }

    /// Canonical presentation of a single finite structure: relations are
    /// the orbits of injective tuples under its automorphism group.
    pub fn from_structure(s: &WindowStructure, k: usize) -> Result<Self, CanonError> {
        let n = s.size();
        let autos: Vec<Vec<usize>> = (0..n).permutations(n).filter(|pi| s.permuted(pi) == *s).collect();
        let mut orbit_of: HashMap<Vec<usize>, RelId> = HashMap::new();
        let mut reps: Vec<Vec<usize>> = Vec::new();
        for m in 1..=k.min(n) {
            for t in (0..n).permutations(m) {
                if orbit_of.contains_key(&t) {
                    continue;
                }
                let id = reps.len();
                for pi in &autos {
                    orbit_of.insert(t.iter().map(|&x| pi[x]).collect(), id);
                }
                reps.push(t);
            }
        }
        let mut counters = vec![0usize; k + 1];
        let relations: Vec<Relation> = reps
            .iter()
            .map(|t| {
                let j = counters[t.len()];
                counters[t.len()] += 1;
                Relation { name: format!("O{}.{}", t.len(), j), arity: t.len() }
            })
            .collect();
        let language = Arc::new(Language::new(relations)?);
        let witnesses = reps
            .iter()
            .map(|t| {
                let m = t.len();
                let facts = (1..=m).flat_map(|j| (0..m).permutations(j)).map(|idx| {
                    let image: Vec<usize> = idx.iter().map(|&i| t[i]).collect();
                    Fact::new(orbit_of[&image], &idx)
                });
                WindowStructure::canonical(language.clone(), m, facts.collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(language, witnesses)
    }

    fn compatible_pair(&self, parts: &[RelId], i: usize, j: usize) -> bool {
        let a = parts.len();
        if a <= 2 {
            return true;
        }
        let shared: Vec<usize> = (0..a).filter(|&e| e != i && e != j).collect();
        let pos_in = |face: usize| -> Vec<usize> { shared.iter().map(|&e| if e < face { e } else { e - 1 }).collect() };
        self.restrict(parts[i], &pos_in(i)) == self.restrict(parts[j], &pos_in(j))
    }

    pub fn is_compatible(&self, coll: &CompatibleCollection) -> bool {
        let a = coll.arity();
        a >= 2
            && coll.parts.iter().all(|&r| self.arity(r) == a - 1)
            && (0..a).all(|i| (0..i).all(|j| self.compatible_pair(&coll.parts, j, i)))
    }

    /// All compatible collections of arity `a`, in lexicographic order of ids.
    pub fn enumerate_compatible(&self, a: usize) -> Vec<CompatibleCollection> {
        let mut out = Vec::new();
        if a < 2 || a > self.max_arity + 1 {
            return out;
        }
        let candidates = self.relations_of_arity(a - 1);
        let mut parts = Vec::with_capacity(a);
        self.grow_collection(a, &candidates, &mut parts, &mut out);
        out
    }

    fn grow_collection(
        &self,
        a: usize,
        candidates: &[RelId],
        parts: &mut Vec<RelId>,
        out: &mut Vec<CompatibleCollection>,
    ) {
        if parts.len() == a {
            out.push(CompatibleCollection { parts: parts.clone() });
            return;
        }
        let i = parts.len();
        for &r in candidates {
            parts.push(r);
            // compare only the positions already chosen; unfilled slots are ignored
            let ok = (0..i).all(|j| {
                let mut padded = parts.clone();
                padded.resize(a, r);
                self.compatible_pair(&padded, j, i)
            });
            if ok {
                self.grow_collection(a, candidates, parts, out);
            }
            parts.pop();
        }
    }

    /// Extensions of a compatible collection, in language order.
    pub fn extensions_of(&self, coll: &CompatibleCollection) -> Result<Vec<RelId>, CanonError> {
        if !self.is_compatible(coll) {
            return Err(CanonError::IncompatibleCollection(coll.display(&self.language)));
        }
        Ok(self.by_faces.get(&coll.parts).cloned().unwrap_or_default())
    }

    /// Canonical diagram on `a` points carrying the collection's faces and
    /// nothing at arity `a`.
    pub fn collection_frame(&self, coll: &CompatibleCollection) -> WindowStructure {
        let a = coll.arity();
        let mut facts = BTreeSet::new();
        for (i, &r) in coll.parts.iter().enumerate() {
            let pos = face_positions(a, i);
            for f in self.witnesses[r].facts() {
                facts.insert(Fact { tuple: f.tuple.iter().map(|&x| pos[x as usize] as u8).collect(), rel: f.rel });
            }
        }
        WindowStructure::from_parts(self.language.clone(), a, Mode::General, facts)
    }

    /// Faces read along the tuple `sigma` of a frame.
    pub fn faces_along(frame: &WindowStructure, sigma: &[usize]) -> CompatibleCollection {
        let a = sigma.len();
        CompatibleCollection {
            parts: (0..a)
                .map(|i| {
                    let t: Vec<usize> = face_positions(a, i).iter().map(|&p| sigma[p]).collect();
                    frame.relation_of(&to_tuple(&t)).expect("frame covers every face")
                })
                .collect(),
        }
    }

    pub fn is_free(&self) -> FreeReport {
        for a in 2..=self.max_arity {
            for coll in self.enumerate_compatible(a) {
                if !self.by_faces.contains_key(&coll.parts) {
                    return FreeReport { free: false, up_to_arity: self.max_arity, witness: Some(coll) };
                }
            }
        }
        FreeReport { free: true, up_to_arity: self.max_arity, witness: None }
    }
}

fn default_name(t: &WindowStructure) -> String {
    let body = t.to_string();
    format!("T{}{}", t.size(), body.trim_start_matches(&format!("[{}]", t.size())))
}

#[derive(Clone, Debug)]
pub struct FreeReport {
    pub free: bool,
    pub up_to_arity: usize,
    pub witness: Option<CompatibleCollection>,
}

/// Builds the free completion up to arity `k`: at each arity one fresh
/// relation per compatible collection without an extension.
pub fn free_completion(pres: &CanonicalPresentation, k: usize) -> Result<CanonicalPresentation, CanonError> {
    if k > pres.max_arity() {
        return Err(CanonError::BoundExceeded { requested: k, available: pres.max_arity() });
    }
    let mut relations: Vec<Relation> = Vec::new();
    let mut facts: Vec<BTreeSet<Fact>> = Vec::new();
    let mut map = vec![usize::MAX; pres.language().len()];

    let copy = |r: RelId, relations: &mut Vec<Relation>, facts: &mut Vec<BTreeSet<Fact>>, map: &mut Vec<usize>| {
        map[r] = relations.len();
        relations.push(pres.language().relation(r).clone());
        facts.push(BTreeSet::new());
    };
    for r in pres.relations_of_arity(1) {
        copy(r, &mut relations, &mut facts, &mut map);
    }
    for r in pres.relations_of_arity(1) {
        facts[map[r]] = [Fact::new(map[r], &[0])].into_iter().collect();
    }
    let mut stage = build_stage(&relations, &facts)?;

    for a in 2..=k {
        let old = pres.relations_of_arity(a);
        for &r in &old {
            copy(r, &mut relations, &mut facts, &mut map);
        }
        for &r in &old {
            facts[map[r]] =
                pres.witness(r).facts().iter().map(|f| Fact { tuple: f.tuple.clone(), rel: map[f.rel] }).collect();
        }
        let realized: HashSet<Vec<RelId>> =
            old.iter().map(|&r| pres.faces(r).iter().map(|&f| map[f]).collect()).collect();
        let taken: HashSet<String> = relations.iter().map(|r| r.name.clone()).collect();
        let mut fresh: HashMap<Vec<RelId>, RelId> = HashMap::new();
        let fresh_colls: Vec<CompatibleCollection> =
            stage.enumerate_compatible(a).into_iter().filter(|c| !realized.contains(&c.parts)).collect();
        for coll in &fresh_colls {
            let mut name = format!("P<{}>", coll.parts.iter().map(|&r| relations[r].name.as_str()).join(","));
            while taken.contains(&name) {
                name.push('\'');
            }
            fresh.insert(coll.parts.clone(), relations.len());
            relations.push(Relation { name, arity: a });
            facts.push(BTreeSet::new());
        }
        for coll in &fresh_colls {
            let id = fresh[&coll.parts];
            let frame = stage.collection_frame(coll);
            let mut f = frame.facts().clone();
            for sigma in (0..a).permutations(a) {
                let faces = CanonicalPresentation::faces_along(&frame, &sigma);
                let top = *fresh.get(&faces.parts).ok_or_else(|| CanonError::Incoherent {
                    rel: relations[id].name.clone(),
                    tuple: sigma.clone(),
                    detail: "permuted collection is realized".into(),
                })?;
                f.insert(Fact::new(top, &sigma));
            }
            facts[id] = f;
        }
        stage = build_stage(&relations, &facts)?;
    }
    Ok(stage)
}

fn build_stage(relations: &[Relation], facts: &[BTreeSet<Fact>]) -> Result<CanonicalPresentation, CanonError> {
    let language = Arc::new(Language::new(relations.to_vec())?);
    let witnesses = relations
        .iter()
        .zip(facts)
        .map(|(r, f)| WindowStructure::canonical(language.clone(), r.arity, f.iter().cloned()))
        .collect::<Result<Vec<_>, _>>()?;
    CanonicalPresentation::new(language, witnesses)
}

/// Outcome of a `⊆_can` test. `embedding[r]` is the image of relation `r`.
#[derive(Clone, Debug)]
pub struct SubCanReport {
    pub holds: bool,
    pub embedding: Option<Vec<RelId>>,
    /// On failure: the witness of the first relation of the smaller
    /// structure the search could not place.
    pub witness: Option<WindowStructure>,
}

/// Searches for a relabeling `iota` of `m0`'s relations into `m1`'s that
/// carries every witness of `m0` onto a witness of `m1`. Same-name
/// candidates are tried first, so matching names give the identity.
pub fn is_sub_can(m0: &CanonicalPresentation, m1: &CanonicalPresentation) -> SubCanReport {
    let mut order: Vec<RelId> = Vec::new();
    let mut seen = vec![false; m0.language().len()];
    for a in 1..=m0.max_arity() {
        for r in m0.relations_of_arity(a) {
            if !seen[r] {
                for &s in m0.permutation_images(r) {
                    seen[s] = true;
                }
                order.push(r);
            }
        }
    }
    let mut search = SubCanSearch {
        m0,
        m1,
        order,
        iota: vec![None; m0.language().len()],
        used: vec![None; m1.language().len()],
        first_failure: None,
    };
    if m0.max_arity() > m1.max_arity() {
        let r = m0.relations_of_arity(m1.max_arity() + 1)[0];
        return SubCanReport { holds: false, embedding: None, witness: Some(m0.witness(r).clone()) };
    }
    if search.run(0) {
        let embedding: Vec<RelId> = search.iota.iter().map(|x| x.expect("total")).collect();
        SubCanReport { holds: true, embedding: Some(embedding), witness: None }
    } else {
        let witness = search.first_failure.map(|r| m0.witness(r).clone());
        SubCanReport { holds: false, embedding: None, witness }
    }
}

struct SubCanSearch<'a> {
    m0: &'a CanonicalPresentation,
    m1: &'a CanonicalPresentation,
    order: Vec<RelId>,
    iota: Vec<Option<RelId>>,
    used: Vec<Option<RelId>>,
    first_failure: Option<RelId>,
}

impl SubCanSearch<'_> {
    fn run(&mut self, at: usize) -> bool {
        if at == self.order.len() {
            return true;
        }
        let r = self.order[at];
        let n = self.m0.arity(r);
        let lower: BTreeSet<Fact> = self
            .m0
            .witness(r)
            .facts()
            .iter()
            .filter(|f| f.tuple.len() < n)
            .map(|f| Fact { tuple: f.tuple.clone(), rel: self.iota[f.rel].expect("lower arities assigned") })
            .collect();
        let mut candidates: Vec<RelId> =
            self.m1.relations_over(n, &lower).iter().copied().filter(|&c| self.used[c].is_none()).collect();
        let name = self.m0.name(r);
        candidates.sort_by_key(|&c| self.m1.name(c) != name);
        let mut any = false;
        for c in candidates {
            let src = self.m0.permutation_images(r);
            let dst = self.m1.permutation_images(c);
            let mut assigned: Vec<(RelId, RelId)> = Vec::new();
            let mut ok = true;
            for (&s, &d) in src.iter().zip(dst) {
                match (self.iota[s], self.used[d]) {
                    (Some(x), _) if x != d => ok = false,
                    (_, Some(y)) if y != s => ok = false,
                    (None, None) => {
                        self.iota[s] = Some(d);
                        self.used[d] = Some(s);
                        assigned.push((s, d));
                    }
                    _ => {}
                }
                if !ok {
                    break;
                }
            }
            if ok {
                any = true;
                if self.run(at + 1) {
                    return true;
                }
            }
            for (s, d) in assigned {
                self.iota[s] = None;
                self.used[d] = None;
            }
        }
        if !any && self.first_failure.is_none() {
            self.first_failure = Some(r);
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct DclReport {
    pub trivial: bool,
    pub size_bound: usize,
    pub witness: Option<SapWitness>,
}

/// Trivial definable closure, read through strong amalgamation of the age.
pub fn has_trivial_dcl(age: &Age) -> DclReport {
    let report = check_age_properties(age);
    DclReport { trivial: report.sap, size_bound: age.size_bound(), witness: report.sap_witness }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn graph_canonical_language() {
        let rado2 = zoo::rado(2);
        assert_eq!(rado2.relations_of_arity(1).len(), 1);
        let names: Vec<&str> = rado2.relations_of_arity(2).iter().map(|&r| rado2.name(r)).collect();
        assert_eq!(names, vec!["E", "E*"]);
        let rado3 = zoo::rado(3);
        assert_eq!(rado3.relations_of_arity(3).len(), 8);
        let classes: HashSet<Vec<RelId>> = rado3
            .relations_of_arity(3)
            .into_iter()
            .map(|r| rado3.permutation_images(r).iter().copied().sorted().dedup().collect())
            .collect();
        assert_eq!(classes.len(), 4);
    }

    #[test]
    fn edgeless_pair_structure() {
        let l = Arc::new(Language::from_pairs([("E", 2)]).unwrap());
        let s = WindowStructure::empty(l, 2);
        let p = CanonicalPresentation::from_structure(&s, 2).unwrap();
        assert_eq!(p.relations_of_arity(1).len(), 1);
        assert_eq!(p.relations_of_arity(2).len(), 1);
        let b = p.relations_of_arity(2)[0];
        let u = p.relations_of_arity(1)[0];
        assert!(p.restriction_table().contains(&RestrictionEntry { rel: b, index_set: vec![0], restricted: u }));
    }

    #[test]
    fn restriction_examples() {
        let rado = zoo::rado(3);
        let tri = rado.id("G3[01,02,12]").unwrap();
        assert_eq!(rado.restrict_relation("G3[01,02,12]", &[0, 1]).unwrap(), rado.id("E").unwrap());
        assert_eq!(rado.restrict(tri, &[0, 1, 2]), tri);
        assert_eq!(rado.restrict_relation("G3[01,12]", &[0, 2]).unwrap(), rado.id("E*").unwrap());
        assert!(matches!(rado.restrict_relation("nope", &[0]), Err(CanonError::UnrealizedRelation(_))));
    }

    #[test]
    fn restriction_is_coherent() {
        let rado = zoo::rado(3);
        for r in rado.relations_of_arity(3) {
            for idx in (0..3).permutations(2) {
                let p = rado.restrict(r, &idx);
                for j in 0..2 {
                    assert_eq!(rado.restrict(p, &[j]), rado.restrict(r, &[idx[j]]));
                }
            }
        }
    }

    #[test]
    fn sub_can_examples() {
        let rado = zoo::rado(3);
        let tf = zoo::triangle_free(3);
        let up = is_sub_can(&tf, &rado);
        assert!(up.holds);
        let down = is_sub_can(&rado, &tf);
        assert!(!down.holds);
        let w = down.witness.unwrap();
        assert_eq!(w.size(), 3);
        assert_eq!(rado.name(w.relation_of(&to_tuple(&[0, 1, 2])).unwrap()), "G3[01,02,12]");
        let refl = is_sub_can(&rado, &rado);
        assert_eq!(refl.embedding.unwrap(), (0..rado.language().len()).collect::<Vec<_>>());
    }

    #[test]
    fn compatible_collections_and_extensions() {
        let rado = zoo::rado(3);
        let e = rado.id("E").unwrap();
        let colls = rado.enumerate_compatible(3);
        assert_eq!(colls.len(), 8);
        for c in &colls {
            assert_eq!(rado.extensions_of(c).unwrap().len(), 1);
        }
        let eee = CompatibleCollection { parts: vec![e, e, e] };
        assert_eq!(rado.extensions_of(&eee).unwrap(), vec![rado.id("G3[01,02,12]").unwrap()]);
        let tf = zoo::triangle_free(3);
        let e = tf.id("E").unwrap();
        let eee = CompatibleCollection { parts: vec![e, e, e] };
        assert!(tf.enumerate_compatible(3).contains(&eee));
        assert!(tf.extensions_of(&eee).unwrap().is_empty());
        let pairs = tf.enumerate_compatible(2);
        assert_eq!(pairs.len(), 1);
        let bad = CompatibleCollection { parts: vec![e, e] };
        assert!(matches!(tf.extensions_of(&bad), Err(CanonError::IncompatibleCollection(_))));
    }

    #[test]
    fn freeness_examples() {
        assert!(zoo::rado(4).is_free().free);
        let tf = zoo::triangle_free(3);
        let report = tf.is_free();
        assert!(!report.free);
        assert_eq!(report.witness.unwrap().names(tf.language()), vec!["E", "E", "E"]);
        let point = WindowStructure::empty(Arc::new(Language::from_pairs([("E", 2)]).unwrap()), 1);
        assert!(CanonicalPresentation::from_structure(&point, 1).unwrap().is_free().free);
    }

    #[test]
    fn free_completion_examples() {
        let tf = zoo::triangle_free(3);
        let free = free_completion(&tf, 3).unwrap();
        assert_eq!(free.relations_of_arity(3).len(), 8);
        assert!(free.id("P<E,E,E>").is_some());
        assert!(free.is_free().free);
        assert_eq!(free.relations_of_arity(1).len(), tf.relations_of_arity(1).len());
        assert!(is_sub_can(&tf, &free).holds);
        let rado = zoo::rado(4);
        assert_eq!(free_completion(&rado, 4).unwrap(), rado);
        assert!(matches!(free_completion(&tf, 4), Err(CanonError::BoundExceeded { .. })));
    }

    #[test]
    fn dcl_examples() {
        assert!(has_trivial_dcl(&zoo::graphs_age(4)).trivial);
        let succ = has_trivial_dcl(&zoo::successor_paths_age(3));
        assert!(!succ.trivial);
        assert!(succ.witness.is_some());
        let free = free_completion(&zoo::triangle_free(3), 3).unwrap();
        assert!(has_trivial_dcl(&free.age(4)).trivial);
    }

    #[test]
    fn age_of_presentation_matches_witnesses() {
        let rado = zoo::rado(3);
        let age = rado.age(3);
        assert_eq!(age.members_of_size(3).count(), 4);
        assert_eq!(rado.age(4).members_of_size(4).count(), 11);
        assert_eq!(rado.labeled_diagrams(4).len(), 64);
    }
}
