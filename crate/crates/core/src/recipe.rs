//! Recipes: piecewise-constant functions on `[0,1]^{P(k)}` with rational
//! grids, their seeded samplers and exact pushforwards, the Erdős–Rényi
//! structure `c^M` of a free presentation, region maps, and the recipe
//! constructions that move between a structure and its free completion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::canonical::{face_positions, is_sub_can, CanonError, CanonicalPresentation, CompatibleCollection};
use crate::lang::{injective_tuples, to_tuple, Fact, LangError, Language, RelId, WindowStructure, MAX_WINDOW};
use crate::measure::{MeasureError, Row, Table, WindowMeasure};
use crate::qftypes::{IntervalCode, OrderedQfType};
use crate::rational::{format_rational, rat, Rational};
use crate::zoo::pure_set;

/// Default bound on the number of cells of a refined product grid.
pub const DEFAULT_CELL_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecipeError {
    #[error("window {window} exceeds the maximum of {max}")]
    WindowTooLarge { window: usize, max: usize },
    #[error("base realization missing or not in the age: {0}")]
    BaseRealizationMissing(String),
    #[error("refined grid has {cells} cells, above the cap of {cap}")]
    GridExplosion { cells: String, cap: usize },
    #[error("base is not free; collection {0} has no extension")]
    NotFree(String),
    #[error("the stabilizer of {0} moves one of its extensions, so no equivariant list exists")]
    AsymmetricStabilizer(String),
    #[error("not a free completion: {0}")]
    NotACompletion(String),
    #[error("recipe disagrees with c^M at arity {arity} on the cell at {point}")]
    NotAgreeingWithCM { arity: usize, point: String },
    #[error("bad grid: {0}")]
    BadGrid(String),
    #[error("language mismatch: {0}")]
    LanguageMismatch(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Canon(#[from] CanonError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// A step function `[0,1]^{P(k)} -> oqftp_k`. Coordinate `mask` is the
/// subset of `k` with those bits set; `grids[mask]` lists its interior
/// breakpoints. Only the top facts of a value are ever read.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepFunction {
    arity: usize,
    language: Arc<Language>,
    grids: Vec<Vec<Rational>>,
    values: Vec<OrderedQfType>,
    cells: Vec<u32>,
}

fn check_grid(grid: &[Rational]) -> Result<(), RecipeError> {
    let zero = Rational::zero();
    let one = Rational::one();
    if grid.iter().any(|b| *b <= zero || *b >= one) {
        return Err(RecipeError::BadGrid("breakpoints must lie in (0,1)".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(RecipeError::BadGrid("breakpoints must increase strictly".into()));
    }
    Ok(())
}

fn cell_count(sizes: impl IntoIterator<Item = usize>, cap: usize) -> Result<usize, RecipeError> {
    let mut total = BigInt::one();
    for s in sizes {
        total *= s;
    }
    match usize::try_from(&total) {
        Ok(n) if n <= cap => Ok(n),
        _ => Err(RecipeError::GridExplosion { cells: total.to_string(), cap }),
    }
}

fn lower_endpoint(grid: &[Rational], i: usize) -> Rational {
    if i == 0 {
        Rational::zero()
    } else {
        grid[i - 1].clone()
    }
}

fn interval_length(grid: &[Rational], i: usize) -> Rational {
    let hi = grid.get(i).cloned().unwrap_or_else(Rational::one);
    hi - lower_endpoint(grid, i)
}

fn interval_index(grid: &[Rational], y: &Rational) -> usize {
    grid.partition_point(|b| b <= y)
}

/// Iterates over all index vectors of a product of ranges.
fn for_each_cell(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; sizes.len()];
    if sizes.contains(&0) {
        return;
    }
    loop {
        f(&idx);
        let mut i = 0;
        loop {
            if i == sizes.len() {
                return;
            }
            idx[i] += 1;
            if idx[i] < sizes[i] {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

impl StepFunction {
    pub fn constant(language: Arc<Language>, arity: usize, value: OrderedQfType) -> Self {
        StepFunction { arity, language, grids: vec![Vec::new(); 1 << arity], values: vec![value], cells: vec![0] }
    }

    pub fn trivial(language: Arc<Language>, arity: usize) -> Self {
        let v = OrderedQfType::trivial(language.clone(), arity);
        Self::constant(language, arity, v)
    }

    /// Tabulates `f` on the product grid, reading each cell at its lower corner.
    pub fn tabulate(
        language: Arc<Language>,
        arity: usize,
        grids: Vec<Vec<Rational>>,
        cap: usize,
        mut f: impl FnMut(&[Rational]) -> OrderedQfType,
    ) -> Result<Self, RecipeError> {
        if grids.len() != 1 << arity {
            return Err(RecipeError::BadGrid(format!("arity {arity} needs {} coordinates", 1 << arity)));
        }
        for g in &grids {
            check_grid(g)?;
        }
        let sizes: Vec<usize> = grids.iter().map(|g| g.len() + 1).collect();
        let n = cell_count(sizes.iter().copied(), cap)?;
        let mut values: Vec<OrderedQfType> = Vec::new();
        let mut index: HashMap<OrderedQfType, u32> = HashMap::new();
        let mut cells = Vec::with_capacity(n);
        for_each_cell(&sizes, |idx| {
            let point: Vec<Rational> = idx.iter().enumerate().map(|(m, &i)| lower_endpoint(&grids[m], i)).collect();
            let v = f(&point);
            let id = *index.entry(v.clone()).or_insert_with(|| {
                values.push(v);
                (values.len() - 1) as u32
            });
            cells.push(id);
        });
        Ok(StepFunction { arity, language, grids, values, cells })
    }

    /// Builds from explicit cells in odometer order (coordinate 0 fastest).
    pub fn from_cells(
        language: Arc<Language>,
        arity: usize,
        grids: Vec<Vec<Rational>>,
        cells: Vec<OrderedQfType>,
    ) -> Result<Self, RecipeError> {
        let expected: usize = grids.iter().map(|g| g.len() + 1).product();
        if cells.len() != expected {
            return Err(RecipeError::BadGrid(format!("expected {expected} cells, found {}", cells.len())));
        }
        if let Some(v) = cells.iter().find(|v| v.vars() != arity || **v.language() != *language) {
            return Err(RecipeError::LanguageMismatch(format!("cell value {v:?}")));
        }
        let mut it = cells.into_iter();
        Self::tabulate(language, arity, grids, usize::MAX, |_| it.next().expect("one value per cell"))
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn grids(&self) -> &[Vec<Rational>] {
        &self.grids
    }

    pub fn grid(&self, mask: usize) -> &[Rational] {
        &self.grids[mask]
    }

    /// Cell values in odometer order.
    pub fn cell_values(&self) -> impl Iterator<Item = &OrderedQfType> {
        self.cells.iter().map(|&i| &self.values[i as usize])
    }

    pub fn is_constant(&self) -> bool {
        self.values.len() == 1
    }

    pub fn eval(&self, y: &[Rational]) -> &OrderedQfType {
        let mut pos = 0;
        let mut stride = 1;
        for (m, g) in self.grids.iter().enumerate() {
            pos += interval_index(g, &y[m]) * stride;
            stride *= g.len() + 1;
        }
        &self.values[self.cells[pos] as usize]
    }

    /// Top relations of the value at `y`.
    pub fn top_at(&self, y: &[Rational]) -> Vec<RelId> {
        self.eval(y).top_relations()
    }
}

/// Per-arity step functions `f_1, ..., f_k` into a target language.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymRecipe {
    language: Arc<Language>,
    functions: Vec<StepFunction>,
}

/// Per-type step functions `f_p` over a canonical base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutRecipe {
    base: Arc<CanonicalPresentation>,
    language: Arc<Language>,
    functions: Vec<StepFunction>,
}

impl SymRecipe {
    /// `functions[n-1]` is `f_n`; there must be one per arity of the language.
    pub fn new(language: Arc<Language>, functions: Vec<StepFunction>) -> Result<Self, RecipeError> {
        if functions.len() < language.max_arity() {
            return Err(RecipeError::LanguageMismatch(format!(
                "relations up to arity {} need as many functions, found {}",
                language.max_arity(),
                functions.len()
            )));
        }
        for (i, f) in functions.iter().enumerate() {
            if f.arity != i + 1 || *f.language != *language {
                return Err(RecipeError::LanguageMismatch(format!(
                    "function {} has the wrong arity or language",
                    i + 1
                )));
            }
        }
        Ok(SymRecipe { language, functions })
    }

    pub fn trivial(language: Arc<Language>) -> Self {
        let functions = (1..=language.max_arity()).map(|k| StepFunction::trivial(language.clone(), k)).collect();
        SymRecipe { language, functions }
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn functions(&self) -> &[StepFunction] {
        &self.functions
    }

    pub fn function(&self, k: usize) -> &StepFunction {
        &self.functions[k - 1]
    }

    /// Runs both recipes on the same array; values are unioned over the
    /// joined language.
    pub fn product(&self, other: &SymRecipe, cap: usize) -> Result<SymRecipe, RecipeError> {
        let joint = Arc::new(self.language.join(&other.language)?);
        let shift = self.language.len();
        let k = self.functions.len().max(other.functions.len());
        let mut functions = Vec::with_capacity(k);
        for n in 1..=k {
            let a = self.functions.get(n - 1);
            let b = other.functions.get(n - 1);
            let grids: Vec<Vec<Rational>> = (0..1usize << n)
                .map(|m| {
                    let mut g: BTreeSet<Rational> = BTreeSet::new();
                    g.extend(a.into_iter().flat_map(|f| f.grids[m].iter().cloned()));
                    g.extend(b.into_iter().flat_map(|f| f.grids[m].iter().cloned()));
                    g.into_iter().collect()
                })
                .collect();
            functions.push(StepFunction::tabulate(joint.clone(), n, grids, cap, |y| {
                let mut rels = a.map(|f| f.top_at(y)).unwrap_or_default();
                rels.extend(b.map(|f| f.top_at(y)).unwrap_or_default().into_iter().map(|r| r + shift));
                OrderedQfType::top(joint.clone(), n, rels)
            })?);
        }
        SymRecipe::new(joint, functions)
    }

    pub fn sample(&self, window: usize, array: &UniformArray) -> Result<WindowStructure, RecipeError> {
        check_window(window)?;
        let coords = array.materialize(window, self.language.max_arity());
        Ok(realize(&self.language, window, |m| coords[&m].clone(), |t| Some(&self.functions[t.len() - 1])))
    }

    /// Samples `count` windows, the `i`-th from the array derived from `(seed, i)`.
    pub fn sample_many(&self, window: usize, seed: u64, count: usize) -> Result<Vec<WindowStructure>, RecipeError> {
        check_window(window)?;
        (0..count).into_par_iter().map(|i| self.sample(window, &UniformArray::for_sample(seed, i as u64))).collect()
    }

    /// Exact distribution over windows of size up to `window`, as a measure
    /// over the pure set.
    pub fn pushforward(&self, window: usize, cap: usize) -> Result<WindowMeasure, RecipeError> {
        check_window(window)?;
        let base = Arc::new(pure_set(window.max(1)));
        let mut tables = Vec::with_capacity(window);
        for m in 1..=window {
            let row = exact_row(&self.language, m, cap, |t| Some(&self.functions[t.len() - 1]))?;
            let d = base.labeled_diagrams(m).pop().expect("one diagram per size");
            tables.push(Table::from([(d, row)]));
        }
        Ok(WindowMeasure::new(base, self.language.clone(), window, tables)?)
    }
}

impl AutRecipe {
    /// `functions[p]` is `f_p` for every relation `p` of the base.
    pub fn new(
        base: Arc<CanonicalPresentation>,
        language: Arc<Language>,
        functions: Vec<StepFunction>,
    ) -> Result<Self, RecipeError> {
        if language.max_arity() > base.max_arity() {
            return Err(RecipeError::LanguageMismatch(format!(
                "target arity {} exceeds the base's {}",
                language.max_arity(),
                base.max_arity()
            )));
        }
        if functions.len() != base.language().len() {
            return Err(RecipeError::LanguageMismatch("one function per base relation".into()));
        }
        for (p, f) in functions.iter().enumerate() {
            if f.arity != base.arity(p) || *f.language != *language {
                return Err(RecipeError::LanguageMismatch(format!(
                    "f_{} has the wrong arity or language",
                    base.name(p)
                )));
            }
        }
        Ok(AutRecipe { base, language, functions })
    }

    pub fn trivial(base: Arc<CanonicalPresentation>, language: Arc<Language>) -> Self {
        let functions =
            (0..base.language().len()).map(|p| StepFunction::trivial(language.clone(), base.arity(p))).collect();
        AutRecipe { base, language, functions }
    }

    pub fn base(&self) -> &Arc<CanonicalPresentation> {
        &self.base
    }

    pub fn language(&self) -> &Arc<Language> {
        &self.language
    }

    pub fn functions(&self) -> &[StepFunction] {
        &self.functions
    }

    pub fn function(&self, p: RelId) -> &StepFunction {
        &self.functions[p]
    }

    fn check_base(&self, d: &WindowStructure) -> Result<(), RecipeError> {
        let missing = |why: &str| RecipeError::BaseRealizationMissing(format!("{d}: {why}"));
        if **d.language() != **self.base.language() {
            return Err(missing("wrong language"));
        }
        for k in 1..=d.size().min(self.base.max_arity()) {
            for t in (0..d.size()).combinations(k) {
                let r = d.relation_of(&to_tuple(&t)).ok_or_else(|| missing("tuple without a type"))?;
                if self.base.arity(r) != k || d.substructure(&t)? != *self.base.witness(r) {
                    return Err(missing("tuple type not realized by its witness"));
                }
            }
        }
        Ok(())
    }

    fn type_of<'a>(&'a self, d: &WindowStructure, t: &[usize]) -> Option<&'a StepFunction> {
        d.relation_of(&to_tuple(t)).map(|p| &self.functions[p])
    }

    /// Samples an expansion of the given base realization.
    pub fn sample(&self, base: &WindowStructure, array: &UniformArray) -> Result<WindowStructure, RecipeError> {
        check_window(base.size())?;
        self.check_base(base)?;
        let coords = array.materialize(base.size(), self.language.max_arity());
        Ok(realize(&self.language, base.size(), |m| coords[&m].clone(), |t| self.type_of(base, t)))
    }

    pub fn sample_many(
        &self,
        base: &WindowStructure,
        seed: u64,
        count: usize,
    ) -> Result<Vec<WindowStructure>, RecipeError> {
        check_window(base.size())?;
        self.check_base(base)?;
        (0..count).into_par_iter().map(|i| self.sample(base, &UniformArray::for_sample(seed, i as u64))).collect()
    }

    pub fn pushforward(&self, window: usize, cap: usize) -> Result<WindowMeasure, RecipeError> {
        check_window(window)?;
        let mut tables = Vec::with_capacity(window);
        for m in 1..=window {
            let diagrams = self.base.labeled_diagrams(m);
            let rows: Result<Vec<(WindowStructure, Row)>, RecipeError> = diagrams
                .into_par_iter()
                .map(|d| {
                    let row = exact_row(&self.language, m, cap, |t| self.type_of(&d, t))?;
                    Ok((d, row))
                })
                .collect();
            tables.push(rows?.into_iter().collect());
        }
        Ok(WindowMeasure::new(self.base.clone(), self.language.clone(), window, tables)?)
    }
}

fn check_window(window: usize) -> Result<(), RecipeError> {
    if window > MAX_WINDOW {
        return Err(RecipeError::WindowTooLarge { window, max: MAX_WINDOW });
    }
    Ok(())
}

fn subset_mask(tuple: &[usize], local: usize) -> u64 {
    tuple.iter().enumerate().filter(|(i, _)| local >> i & 1 == 1).fold(0u64, |m, (_, &a)| m | 1 << a)
}

/// `RandMod`: `R(a)` holds iff `R` is a top fact of `f(hat y_a)`, where
/// coordinate `I` of `hat y_a` is the array value at the set `a ∘ I`.
fn realize<'a>(
    language: &Arc<Language>,
    window: usize,
    coord: impl Fn(u64) -> Rational,
    function: impl Fn(&[usize]) -> Option<&'a StepFunction>,
) -> WindowStructure {
    let arities: BTreeSet<usize> = (0..language.len()).map(|r| language.arity(r)).collect();
    let mut facts = Vec::new();
    for &k in &arities {
        for t in injective_tuples(window, k) {
            let Some(f) = function(&t) else { continue };
            let y: Vec<Rational> = (0..1usize << k).map(|i| coord(subset_mask(&t, i))).collect();
            for r in f.top_at(&y) {
                facts.push(Fact::new(r, &t));
            }
        }
    }
    WindowStructure::general(language.clone(), window, facts).expect("facts on injective tuples")
}

/// Exact distribution of `realize` on `m` points: every array coordinate
/// is refined by all breakpoints it meets, and each cell of the product
/// grid contributes its volume.
fn exact_row<'a>(
    language: &Arc<Language>,
    m: usize,
    cap: usize,
    function: impl Fn(&[usize]) -> Option<&'a StepFunction>,
) -> Result<Row, RecipeError> {
    let arities: BTreeSet<usize> = (0..language.len()).map(|r| language.arity(r)).collect();
    let mut refined: BTreeMap<u64, BTreeSet<Rational>> = BTreeMap::new();
    for &k in &arities {
        for t in injective_tuples(m, k) {
            let Some(f) = function(&t) else { continue };
            for i in 0..1usize << k {
                refined.entry(subset_mask(&t, i)).or_default().extend(f.grids[i].iter().cloned());
            }
        }
    }
    let masks: Vec<u64> = refined.keys().copied().collect();
    let grids: Vec<Vec<Rational>> = refined.into_values().map(|g| g.into_iter().collect()).collect();
    let sizes: Vec<usize> = grids.iter().map(|g| g.len() + 1).collect();
    cell_count(sizes.iter().copied(), cap)?;
    let position: HashMap<u64, usize> = masks.iter().enumerate().map(|(i, &m)| (m, i)).collect();
    let mut row = Row::new();
    for_each_cell(&sizes, |idx| {
        let point: Vec<Rational> = idx.iter().enumerate().map(|(c, &i)| lower_endpoint(&grids[c], i)).collect();
        let volume = idx.iter().enumerate().fold(Rational::one(), |v, (c, &i)| v * interval_length(&grids[c], i));
        let s = realize(language, m, |mask| point[position[&mask]].clone(), &function);
        *row.entry(s).or_insert_with(Rational::zero) += volume;
    });
    Ok(row)
}

/// A seeded array of uniform values indexed by finite subsets of the
/// window. Values are dyadic rationals `x / 2^bits`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UniformArray {
    seed: u64,
    bits: u32,
}

impl UniformArray {
    pub fn new(seed: u64) -> Self {
        UniformArray { seed, bits: 64 }
    }

    pub fn with_precision(seed: u64, bits: u32) -> Self {
        assert!((1..=64).contains(&bits), "precision must be 1..=64 bits");
        UniformArray { seed, bits }
    }

    /// The array used for the `index`-th sample of a seeded run.
    pub fn for_sample(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        UniformArray::new(rng.next_u64())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn precision(&self) -> u32 {
        self.bits
    }

    /// The value at the subset with bitmask `subset`.
    pub fn value(&self, subset: u64) -> Rational {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(subset);
        let x = rng.next_u64() >> (64 - self.bits);
        Rational::new(BigInt::from(x), BigInt::one() << self.bits)
    }

    /// Values at every subset of `0..window` of size at most `k`.
    pub fn materialize(&self, window: usize, k: usize) -> HashMap<u64, Rational> {
        let mut out = HashMap::new();
        for j in 0..=k.min(window) {
            for s in (0..window).combinations(j) {
                let mask = s.iter().fold(0u64, |m, &a| m | 1 << a);
                out.insert(mask, self.value(mask));
            }
        }
        out
    }
}

/// Extension lists of `c^M`: one ordered list per compatible collection,
/// transported from the collection's orbit representative.
#[derive(Clone, Debug)]
pub struct ExtensionLists {
    unary: Vec<RelId>,
    lists: BTreeMap<Vec<RelId>, Vec<RelId>>,
}

impl ExtensionLists {
    pub fn build(base: &CanonicalPresentation, require_free: bool) -> Result<Self, RecipeError> {
        if require_free {
            let report = base.is_free();
            if let Some(w) = report.witness {
                return Err(RecipeError::NotFree(w.display(base.language())));
            }
        }
        let unary = base.relations_of_arity(1);
        let mut lists = BTreeMap::new();
        for a in 2..=base.max_arity() {
            for coll in base.enumerate_compatible(a) {
                let frame = base.collection_frame(&coll);
                let (rep, sigma) = (0..a)
                    .permutations(a)
                    .map(|s| (CanonicalPresentation::faces_along(&frame, &s), s))
                    .min_by(|x, y| x.0.cmp(&y.0))
                    .expect("at least the identity");
                let rep_list = base.extensions_of(&rep)?;
                let rep_frame = base.collection_frame(&rep);
                for s in (0..a).permutations(a) {
                    if CanonicalPresentation::faces_along(&rep_frame, &s) == rep
                        && rep_list.iter().any(|&r| base.permute(r, &s) != r)
                    {
                        return Err(RecipeError::AsymmetricStabilizer(rep.display(base.language())));
                    }
                }
                let own = base.extensions_of(&coll)?;
                let list: Vec<RelId> = rep_list
                    .iter()
                    .map(|&target| {
                        *own.iter()
                            .find(|&&r| base.permute(r, &sigma) == target)
                            .expect("orbit maps extensions onto extensions")
                    })
                    .collect();
                lists.insert(coll.parts, list);
            }
        }
        Ok(ExtensionLists { unary, lists })
    }

    pub fn unary(&self) -> &[RelId] {
        &self.unary
    }

    pub fn list(&self, coll: &CompatibleCollection) -> &[RelId] {
        self.lists.get(&coll.parts).map_or(&[], |v| v.as_slice())
    }

    /// The list a relation of arity at least 2 is drawn from, and its position.
    pub fn position(&self, base: &CanonicalPresentation, r: RelId) -> (usize, usize) {
        let list = if base.arity(r) == 1 {
            &self.unary[..]
        } else {
            self.lists.get(base.faces(r)).map_or(&[][..], |v| v.as_slice())
        };
        let i = list.iter().position(|&x| x == r).expect("every relation sits in its collection's list");
        (i, list.len())
    }

    fn lengths_at(&self, a: usize) -> BTreeSet<usize> {
        if a == 1 {
            return [self.unary.len()].into_iter().collect();
        }
        self.lists.iter().filter(|(k, v)| k.len() == a && !v.is_empty()).map(|(_, v)| v.len()).collect()
    }

    /// Breakpoints of every list of arity `a`, merged.
    fn grid_at(&self, a: usize) -> Vec<Rational> {
        let mut g = BTreeSet::new();
        for n in self.lengths_at(a) {
            for j in 1..n {
                g.insert(rat(j as i64, n as i64));
            }
        }
        g.into_iter().collect()
    }

    /// `c_k` at a point of `[0,1]^{P(k)}`; `None` past a collection
    /// without extensions.
    pub fn eval(&self, k: usize, y: &[Rational]) -> Option<RelId> {
        if k == 1 {
            return Some(IntervalCode::Finite(self.unary.clone()).eval(&y[1]));
        }
        let mut parts = Vec::with_capacity(k);
        for i in 0..k {
            let pos = face_positions(k, i);
            let sub: Vec<Rational> = (0..1usize << (k - 1))
                .map(|j| {
                    let mask = (0..k - 1).filter(|b| j >> b & 1 == 1).fold(0usize, |m, b| m | 1 << pos[b]);
                    y[mask].clone()
                })
                .collect();
            parts.push(self.eval(k - 1, &sub)?);
        }
        let list = self.lists.get(&parts)?;
        if list.is_empty() {
            return None;
        }
        Some(IntervalCode::Finite(list.clone()).eval(&y[(1 << k) - 1]))
    }
}

/// The Erdős–Rényi random `M`-structure `c^M` as a recipe over the
/// canonical language of `base`.
pub fn erdos_renyi(base: &CanonicalPresentation, require_free: bool) -> Result<SymRecipe, RecipeError> {
    let lists = ExtensionLists::build(base, require_free)?;
    cm_recipe(base, &lists)
}

fn cm_recipe(base: &CanonicalPresentation, lists: &ExtensionLists) -> Result<SymRecipe, RecipeError> {
    let lang = base.language().clone();
    let mut functions = Vec::new();
    for k in 1..=base.max_arity() {
        let grids: Vec<Vec<Rational>> = (0..1usize << k)
            .map(|m| if m == 0 { Vec::new() } else { lists.grid_at(m.count_ones() as usize) })
            .collect();
        functions.push(StepFunction::tabulate(lang.clone(), k, grids, DEFAULT_CELL_CAP, |y| {
            OrderedQfType::top(lang.clone(), k, lists.eval(k, y))
        })?);
    }
    SymRecipe::new(lang, functions)
}

/// `c^M` with the top coordinate split in proportion to positive integer
/// weights on relations instead of uniformly.
pub fn erdos_renyi_weighted(
    base: &CanonicalPresentation,
    weights: &[u64],
    require_free: bool,
) -> Result<SymRecipe, RecipeError> {
    let lists = ExtensionLists::build(base, require_free)?;
    let lang = base.language().clone();
    assert_eq!(weights.len(), lang.len(), "one weight per relation");
    let cuts = |list: &[RelId]| -> Vec<Rational> {
        let total: u64 = list.iter().map(|&r| weights[r]).sum();
        let mut acc = 0;
        list.iter()
            .take(list.len().saturating_sub(1))
            .map(|&r| {
                acc += weights[r];
                rat(acc as i64, total as i64)
            })
            .collect()
    };
    let pick = |list: &[RelId], y: &Rational| -> RelId {
        let c = cuts(list);
        if y.is_one() {
            return list[0];
        }
        list[c.partition_point(|b| b <= y)]
    };
    let grid_at = |a: usize| -> Vec<Rational> {
        let mut g = BTreeSet::new();
        if a == 1 {
            g.extend(cuts(&lists.unary));
        } else {
            for (k, v) in &lists.lists {
                if k.len() == a {
                    g.extend(cuts(v));
                }
            }
        }
        g.into_iter().collect()
    };
    fn eval(
        lists: &ExtensionLists,
        pick: &dyn Fn(&[RelId], &Rational) -> RelId,
        k: usize,
        y: &[Rational],
    ) -> Option<RelId> {
        if k == 1 {
            return Some(pick(&lists.unary, &y[1]));
        }
        let mut parts = Vec::with_capacity(k);
        for i in 0..k {
            let pos = face_positions(k, i);
            let sub: Vec<Rational> = (0..1usize << (k - 1))
                .map(|j| y[(0..k - 1).filter(|b| j >> b & 1 == 1).fold(0usize, |m, b| m | 1 << pos[b])].clone())
                .collect();
            parts.push(eval(lists, pick, k - 1, &sub)?);
        }
        let list = lists.lists.get(&parts).filter(|l| !l.is_empty())?;
        Some(pick(list, &y[(1 << k) - 1]))
    }
    let mut functions = Vec::new();
    for k in 1..=base.max_arity() {
        let grids: Vec<Vec<Rational>> =
            (0..1usize << k).map(|m| if m == 0 { Vec::new() } else { grid_at(m.count_ones() as usize) }).collect();
        functions.push(StepFunction::tabulate(lang.clone(), k, grids, DEFAULT_CELL_CAP, |y| {
            OrderedQfType::top(lang.clone(), k, eval(&lists, &pick, k, y))
        })?);
    }
    SymRecipe::new(lang, functions)
}

/// `S_p = c^{-1}(p)` as a box, and the affine bijection `alpha_p` from the
/// unit cube onto it. `intervals[mask]` is the box side at that coordinate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMap {
    pub rel: RelId,
    pub arity: usize,
    pub intervals: Vec<(Rational, Rational)>,
}

impl RegionMap {
    pub fn volume(&self) -> Rational {
        self.intervals.iter().fold(Rational::one(), |v, (lo, hi)| v * (hi - lo))
    }

    pub fn alpha(&self, y: &[Rational]) -> Vec<Rational> {
        self.intervals.iter().zip(y).map(|((lo, hi), y)| lo + (hi - lo) * y).collect()
    }

    pub fn alpha_inv(&self, x: &[Rational]) -> Vec<Rational> {
        self.intervals.iter().zip(x).map(|((lo, hi), x)| (x - lo) / (hi - lo)).collect()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.intervals.iter().zip(x).all(|((lo, hi), x)| lo <= x && x < hi)
    }

    /// The sides at the coordinates inside `sub`, reindexed as subsets of `sub`.
    pub fn restricted(&self, sub: &[usize]) -> Vec<(Rational, Rational)> {
        (0..1usize << sub.len())
            .map(|j| {
                let mask = (0..sub.len()).filter(|b| j >> b & 1 == 1).fold(0usize, |m, b| m | 1 << sub[b]);
                self.intervals[mask].clone()
            })
            .collect()
    }
}

/// `c^M` of a free base together with its region maps.
#[derive(Clone, Debug)]
pub struct RegionMaps {
    base: Arc<CanonicalPresentation>,
    cm: SymRecipe,
    lists: ExtensionLists,
    maps: Vec<RegionMap>,
}

pub fn region_maps(base: &Arc<CanonicalPresentation>, up_to_arity: usize) -> Result<RegionMaps, RecipeError> {
    let lists = ExtensionLists::build(base, true)?;
    let cm = cm_recipe(base, &lists)?;
    let mut maps = Vec::new();
    for p in 0..base.language().len() {
        let k = base.arity(p);
        if k > up_to_arity {
            continue;
        }
        let intervals = (0..1usize << k)
            .map(|mask| {
                if mask == 0 {
                    return (Rational::zero(), Rational::one());
                }
                let idx: Vec<usize> = (0..k).filter(|b| mask >> b & 1 == 1).collect();
                let q = base.restrict(p, &idx);
                let (i, n) = lists.position(base, q);
                IntervalCode::Finite(vec![(); n]).preimage(i)
            })
            .collect();
        maps.push(RegionMap { rel: p, arity: k, intervals });
    }
    Ok(RegionMaps { base: base.clone(), cm, lists, maps })
}

impl RegionMaps {
    pub fn base(&self) -> &Arc<CanonicalPresentation> {
        &self.base
    }

    pub fn cm(&self) -> &SymRecipe {
        &self.cm
    }

    pub fn lists(&self) -> &ExtensionLists {
        &self.lists
    }

    pub fn maps(&self) -> &[RegionMap] {
        &self.maps
    }

    pub fn get(&self, p: RelId) -> Option<&RegionMap> {
        self.maps.iter().find(|m| m.rel == p)
    }
}

/// Extends a recipe over `M` to its free completion: realized types keep
/// their function, fresh types get the constant trivial type.
pub fn extend_to_free(recipe: &AutRecipe, completion: &Arc<CanonicalPresentation>) -> Result<AutRecipe, RecipeError> {
    let sub = is_sub_can(recipe.base(), completion);
    let iota = sub.embedding.ok_or_else(|| {
        RecipeError::NotACompletion(format!(
            "the base does not embed; witness {}",
            sub.witness.map_or_else(String::new, |w| w.to_string())
        ))
    })?;
    if let Some(w) = completion.is_free().witness {
        return Err(RecipeError::NotACompletion(format!(
            "collection {} has no extension",
            w.display(completion.language())
        )));
    }
    let lang = recipe.language().clone();
    let mut functions: Vec<StepFunction> =
        (0..completion.language().len()).map(|q| StepFunction::trivial(lang.clone(), completion.arity(q))).collect();
    for (p, f) in recipe.functions().iter().enumerate() {
        functions[iota[p]] = f.clone();
    }
    AutRecipe::new(completion.clone(), lang, functions)
}

/// `f_p = (L-part of e_k) ∘ alpha_p`, for a Sym recipe `e` over
/// `L_M ⊔ L` whose `L_M`-part is `c^M`.
pub fn compose_with_region(e: &SymRecipe, maps: &RegionMaps, cap: usize) -> Result<AutRecipe, RecipeError> {
    let base = maps.base();
    let inner = base.language();
    let n_inner = inner.len();
    let joint = e.language();
    if joint.len() < n_inner || (0..n_inner).any(|r| joint.relation(r) != inner.relation(r)) {
        return Err(RecipeError::LanguageMismatch("the recipe's language must start with the base language".into()));
    }
    let extra = Arc::new(Language::new(joint.relations()[n_inner..].to_vec())?);
    for k in 1..=base.max_arity() {
        let Some(ek) = e.functions().get(k - 1) else {
            return Err(RecipeError::NotAgreeingWithCM { arity: k, point: "no function".into() });
        };
        let ck = maps.cm().function(k);
        let grids: Vec<Vec<Rational>> = (0..1usize << k)
            .map(|m| {
                ek.grids[m].iter().chain(ck.grids[m].iter()).cloned().collect::<BTreeSet<_>>().into_iter().collect()
            })
            .collect();
        let sizes: Vec<usize> = grids.iter().map(|g| g.len() + 1).collect();
        cell_count(sizes.iter().copied(), cap)?;
        let mut bad = None;
        for_each_cell(&sizes, |idx| {
            if bad.is_some() {
                return;
            }
            let y: Vec<Rational> = idx.iter().enumerate().map(|(c, &i)| lower_endpoint(&grids[c], i)).collect();
            let ours: Vec<RelId> = ek.top_at(&y).into_iter().filter(|&r| r < n_inner).collect();
            if ours != ck.top_at(&y) {
                bad = Some(y.iter().map(format_rational).join(", "));
            }
        });
        if let Some(point) = bad {
            return Err(RecipeError::NotAgreeingWithCM { arity: k, point: format!("({point})") });
        }
    }
    let mut functions = Vec::new();
    for p in 0..inner.len() {
        let k = base.arity(p);
        let region =
            maps.get(p).ok_or_else(|| RecipeError::NotACompletion(format!("no region for {}", base.name(p))))?;
        let ek = &e.functions()[k - 1];
        let grids: Vec<Vec<Rational>> = (0..1usize << k)
            .map(|m| {
                let (lo, hi) = &region.intervals[m];
                ek.grids[m].iter().filter(|b| lo < *b && *b < hi).map(|b| (b - lo) / (hi - lo)).collect()
            })
            .collect();
        functions.push(StepFunction::tabulate(extra.clone(), k, grids, cap, |y| {
            let x = region.alpha(y);
            let rels = ek.top_at(&x).into_iter().filter(|&r| r >= n_inner).map(|r| r - n_inner);
            OrderedQfType::top(extra.clone(), k, rels)
        })?);
    }
    AutRecipe::new(base.clone(), extra, functions)
}

const RANDOM_CUTS: [(i64, i64); 3] = [(1, 3), (1, 2), (2, 3)];

fn random_grid(rng: &mut impl Rng, empty_coord: bool) -> Vec<Rational> {
    if empty_coord {
        return if rng.gen_bool(0.25) { vec![rat(1, 2)] } else { Vec::new() };
    }
    let mut g: Vec<Rational> = RANDOM_CUTS.iter().filter(|_| rng.gen_bool(0.4)).map(|&(p, q)| rat(p, q)).collect();
    g.sort();
    g
}

fn random_function(language: &Arc<Language>, k: usize, rng: &mut impl Rng) -> StepFunction {
    let rels = language.ids_of_arity(k);
    if rels.is_empty() {
        return StepFunction::trivial(language.clone(), k);
    }
    let grids: Vec<Vec<Rational>> = (0..1usize << k).map(|m| random_grid(rng, m == 0)).collect();
    let sizes: usize = grids.iter().map(|g| g.len() + 1).product();
    let cells = (0..sizes)
        .map(|_| OrderedQfType::top(language.clone(), k, rels.iter().copied().filter(|_| rng.gen_bool(0.5))))
        .collect();
    StepFunction::from_cells(language.clone(), k, grids, cells).expect("generated cells are well formed")
}

/// A random Aut recipe with grids drawn from a few small rationals.
pub fn random_aut_recipe(base: &Arc<CanonicalPresentation>, language: &Arc<Language>, rng: &mut impl Rng) -> AutRecipe {
    let functions = (0..base.language().len()).map(|p| random_function(language, base.arity(p), rng)).collect();
    AutRecipe::new(base.clone(), language.clone(), functions).expect("arities match by construction")
}

pub fn random_sym_recipe(language: &Arc<Language>, rng: &mut impl Rng) -> SymRecipe {
    let functions = (1..=language.max_arity()).map(|k| random_function(language, k, rng)).collect();
    SymRecipe::new(language.clone(), functions).expect("arities match by construction")
}

/// `f_1` reads the unary relation `rel` iff `y_{0} < p`, on a target language.
pub fn unary_threshold(language: &Arc<Language>, rel: RelId, p: &Rational) -> StepFunction {
    StepFunction::tabulate(language.clone(), 1, vec![Vec::new(), vec![p.clone()]], 2, |y| {
        OrderedQfType::top(language.clone(), 1, (y[1] < *p).then_some(rel))
    })
    .expect("single breakpoint")
}

/// `f_k` asserting `rel` on the full tuple iff the top coordinate is below `p`.
pub fn top_threshold(language: &Arc<Language>, k: usize, rel: RelId, p: &Rational) -> StepFunction {
    let grids = (0..1usize << k).map(|m| if m == (1 << k) - 1 { vec![p.clone()] } else { Vec::new() }).collect();
    StepFunction::tabulate(language.clone(), k, grids, 2, |y| {
        OrderedQfType::top(language.clone(), k, (y[(1 << k) - 1] < *p).then_some(rel))
    })
    .expect("single breakpoint")
}
