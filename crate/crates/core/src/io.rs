//! JSON file formats. Probabilities and breakpoints are `"p/q"` strings.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical::{free_completion, CanonError, CanonicalPresentation};
use crate::lang::{Age, Fact, LangError, Language, Literal, Mode, QfFormula, Relation, WindowStructure};
use crate::measure::{ConcentratedBaseMeasure, MeasureError, PiEntry, Row, Table, WindowMeasure};
use crate::qftypes::OrderedQfType;
use crate::rational::{format_rational, parse_rational, Rational};
use crate::recipe::{AutRecipe, RecipeError, StepFunction, SymRecipe};
use crate::zoo;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Canon(#[from] CanonError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
}

fn schema(msg: impl Into<String>) -> IoError {
    IoError::Schema(msg.into())
}

fn rational(s: &str) -> Result<Rational, IoError> {
    parse_rational(s).ok_or_else(|| schema(format!("bad rational `{s}`")))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LanguageJson {
    pub relations: Vec<Relation>,
}

impl LanguageJson {
    pub fn from_language(l: &Language) -> Self {
        LanguageJson { relations: l.relations().to_vec() }
    }

    pub fn to_language(&self) -> Result<Arc<Language>, IoError> {
        Ok(Arc::new(Language::new(self.relations.clone())?))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct FactJson {
    pub rel: String,
    pub tuple: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct StructureJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<LanguageJson>,
    pub window: usize,
    #[serde(default = "general")]
    pub mode: Mode,
    pub facts: Vec<FactJson>,
}

fn general() -> Mode {
    Mode::General
}

impl StructureJson {
    pub fn from_structure(s: &WindowStructure, with_language: bool) -> Self {
        let l = s.language();
        StructureJson {
            language: with_language.then(|| LanguageJson::from_language(l)),
            window: s.size(),
            mode: s.mode(),
            facts: s
                .facts()
                .iter()
                .map(|f| FactJson {
                    rel: l.name(f.rel).to_string(),
                    tuple: f.tuple.iter().map(|&x| x as usize).collect(),
                })
                .collect(),
        }
    }

    /// Reads the structure over `language`, or over its own embedded language.
    pub fn to_structure(&self, language: Option<&Arc<Language>>) -> Result<WindowStructure, IoError> {
        let own;
        let l = match (language, &self.language) {
            (Some(l), _) => l,
            (None, Some(j)) => {
                own = j.to_language()?;
                &own
            }
            (None, None) => return Err(schema("structure without a language")),
        };
        let facts: Result<Vec<Fact>, IoError> = self
            .facts
            .iter()
            .map(|f| {
                let r = l.id(&f.rel).ok_or_else(|| LangError::UnknownRelation(f.rel.clone()))?;
                Ok(Fact::new(r, &f.tuple))
            })
            .collect();
        Ok(WindowStructure::new(l.clone(), self.window, self.mode, facts?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgeJson {
    pub language: LanguageJson,
    pub size_bound: usize,
    pub members: Vec<StructureJson>,
}

/// An age given either by a named family or by explicit members.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AgeSource {
    Preset { preset: String, size_bound: usize },
    Explicit(AgeJson),
}

pub fn age_to_json(age: &Age) -> AgeJson {
    AgeJson {
        language: LanguageJson::from_language(age.language()),
        size_bound: age.size_bound(),
        members: age.members().iter().map(|m| StructureJson::from_structure(m, false)).collect(),
    }
}

pub fn age_from_source(src: &AgeSource) -> Result<Age, IoError> {
    match src {
        AgeSource::Preset { preset, size_bound } => match preset.as_str() {
            "graphs" => Ok(zoo::graphs_age(*size_bound)),
            "triangle_free" => Ok(zoo::triangle_free_age(*size_bound)),
            "successor_paths" => Ok(zoo::successor_paths_age(*size_bound)),
            other => Err(schema(format!("unknown age preset `{other}`"))),
        },
        AgeSource::Explicit(j) => {
            let l = j.language.to_language()?;
            let members: Result<Vec<_>, _> = j.members.iter().map(|m| m.to_structure(Some(&l))).collect();
            Ok(Age::from_members(l, j.size_bound, members?))
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct RestrictionJson {
    pub rel: String,
    pub index_set: Vec<usize>,
    pub restricted_rel: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PresentationJson {
    pub language: LanguageJson,
    /// `witnesses[i]` realizes relation `i` on its identity tuple.
    pub witnesses: Vec<StructureJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<AgeJson>,
    #[serde(default)]
    pub restriction_table: Vec<RestrictionJson>,
}

/// A canonical presentation: a named family, a presentation built from an
/// age, or explicit witnesses.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PresentationSource {
    Preset { preset: String, max_arity: usize },
    FromAge { age: AgeSource, max_arity: usize },
    Explicit(PresentationJson),
}

pub fn presentation_to_json(p: &CanonicalPresentation) -> PresentationJson {
    let l = p.language();
    PresentationJson {
        language: LanguageJson::from_language(l),
        witnesses: p.witnesses().iter().map(|w| StructureJson::from_structure(w, false)).collect(),
        age: Some(age_to_json(&p.age(p.max_arity()))),
        restriction_table: p
            .restriction_table()
            .into_iter()
            .map(|e| RestrictionJson {
                rel: l.name(e.rel).to_string(),
                index_set: e.index_set,
                restricted_rel: l.name(e.restricted).to_string(),
            })
            .collect(),
    }
}

pub fn presentation_from_source(src: &PresentationSource) -> Result<CanonicalPresentation, IoError> {
    match src {
        PresentationSource::Preset { preset, max_arity: k } => match preset.as_str() {
            "rado" => Ok(zoo::rado(*k)),
            "triangle_free" => Ok(zoo::triangle_free(*k)),
            "pure_set" => Ok(zoo::pure_set(*k)),
            "two_colored_rado" => Ok(zoo::two_colored_rado(*k)),
            "free_triangle_free" => Ok(free_completion(&zoo::triangle_free(*k), *k)?),
            other => Err(schema(format!("unknown presentation preset `{other}`"))),
        },
        PresentationSource::FromAge { age, max_arity } => {
            Ok(CanonicalPresentation::from_age(&age_from_source(age)?, *max_arity)?)
        }
        PresentationSource::Explicit(j) => {
            let l = j.language.to_language()?;
            if j.witnesses.len() != l.len() {
                return Err(schema("one witness per relation is required"));
            }
            let ws: Result<Vec<_>, _> = j.witnesses.iter().map(|w| w.to_structure(Some(&l))).collect();
            let p = CanonicalPresentation::new(l.clone(), ws?)?;
            for e in &j.restriction_table {
                let got = p.restrict_relation(&e.rel, &e.index_set)?;
                if l.name(got) != e.restricted_rel {
                    return Err(schema(format!(
                        "restriction table says {}{:?} = {}, witnesses give {}",
                        e.rel,
                        e.index_set,
                        e.restricted_rel,
                        l.name(got)
                    )));
                }
            }
            Ok(p)
        }
    }
}

/// Signed atoms on every increasing tuple, as in `{"vars":2,"atoms":[["E",[0,1],true]]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct TypeJson {
    pub vars: usize,
    pub atoms: Vec<(String, Vec<usize>, bool)>,
}

pub fn ordered_type_to_json(t: &OrderedQfType) -> TypeJson {
    let l = t.language();
    let mut atoms = Vec::new();
    for r in 0..l.len() {
        let k = l.arity(r);
        if k > t.vars() {
            continue;
        }
        for tuple in itertools::Itertools::combinations(0..t.vars(), k) {
            let holds = t.contains(r, &tuple);
            atoms.push((l.name(r).to_string(), tuple, holds));
        }
    }
    atoms.sort();
    TypeJson { vars: t.vars(), atoms }
}

pub fn ordered_type_from_json(j: &TypeJson, l: &Arc<Language>) -> Result<OrderedQfType, IoError> {
    let mut facts = Vec::new();
    for (rel, tuple, holds) in &j.atoms {
        let r = l.id(rel).ok_or_else(|| LangError::UnknownRelation(rel.clone()))?;
        if *holds {
            facts.push(Fact::new(r, tuple));
        }
    }
    OrderedQfType::new(l.clone(), j.vars, facts).map_err(|e| schema(e.to_string()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RowJson {
    pub diagram: StructureJson,
    pub prob: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableJson {
    pub size: usize,
    pub base_diagram: StructureJson,
    pub rows: Vec<RowJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureJson {
    pub base_ref: PresentationSource,
    pub extra_language: LanguageJson,
    pub horizon: usize,
    pub tables: Vec<TableJson>,
}

pub fn measure_to_json(mu: &WindowMeasure) -> MeasureJson {
    let mut tables = Vec::new();
    for m in 1..=mu.horizon() {
        for (d, row) in mu.table(m) {
            tables.push(TableJson {
                size: m,
                base_diagram: StructureJson::from_structure(d, false),
                rows: row
                    .iter()
                    .map(|(e, p)| RowJson {
                        diagram: StructureJson::from_structure(e, false),
                        prob: format_rational(p),
                    })
                    .collect(),
            });
        }
    }
    MeasureJson {
        base_ref: PresentationSource::Explicit(presentation_to_json(mu.base())),
        extra_language: LanguageJson::from_language(mu.extra()),
        horizon: mu.horizon(),
        tables,
    }
}

pub fn measure_from_json(j: &MeasureJson) -> Result<WindowMeasure, IoError> {
    let base = Arc::new(presentation_from_source(&j.base_ref)?);
    let extra = j.extra_language.to_language()?;
    let mut tables: Vec<Table> = vec![Table::new(); j.horizon];
    for t in &j.tables {
        if t.size == 0 || t.size > j.horizon {
            return Err(schema(format!("table of size {} outside the horizon", t.size)));
        }
        let d = t.base_diagram.to_structure(Some(base.language()))?;
        let mut row = Row::new();
        for r in &t.rows {
            row.insert(r.diagram.to_structure(Some(&extra))?, rational(&r.prob)?);
        }
        tables[t.size - 1].insert(d, row);
    }
    Ok(WindowMeasure::new(base, extra, j.horizon, tables)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConcentratedJson {
    pub inner: PresentationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projection: Option<Vec<String>>,
    pub measure: MeasureJson,
}

pub fn concentrated_to_json(nu: &ConcentratedBaseMeasure) -> ConcentratedJson {
    let outer = nu.outer().language();
    ConcentratedJson {
        inner: PresentationSource::Explicit(presentation_to_json(nu.inner())),
        projection: nu.projection().map(|p| p.iter().map(|&r| outer.name(r).to_string()).collect()),
        measure: measure_to_json(nu.measure()),
    }
}

pub fn concentrated_from_json(j: &ConcentratedJson) -> Result<ConcentratedBaseMeasure, IoError> {
    let inner = Arc::new(presentation_from_source(&j.inner)?);
    let measure = measure_from_json(&j.measure)?;
    let projection = match &j.projection {
        None => None,
        Some(names) => {
            let outer = measure.base().language();
            let ids: Result<Vec<_>, IoError> =
                names.iter().map(|n| outer.id(n).ok_or_else(|| LangError::UnknownRelation(n.clone()).into())).collect();
            Some(ids?)
        }
    };
    Ok(ConcentratedBaseMeasure::new(inner, measure, projection)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiEntryJson {
    pub base_diagram: StructureJson,
    pub formula: Vec<(String, Vec<usize>, bool)>,
    pub value: String,
}

/// Pre-measure values for `measure build`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PiSystemJson {
    pub base_ref: PresentationSource,
    pub extra_language: LanguageJson,
    pub horizon: usize,
    pub entries: Vec<PiEntryJson>,
}

pub fn pi_system_from_json(
    j: &PiSystemJson,
) -> Result<(Arc<CanonicalPresentation>, Arc<Language>, usize, Vec<PiEntry>), IoError> {
    let base = Arc::new(presentation_from_source(&j.base_ref)?);
    let extra = j.extra_language.to_language()?;
    let mut entries = Vec::new();
    for e in &j.entries {
        entries.push(PiEntry {
            base: e.base_diagram.to_structure(Some(base.language()))?,
            formula: e
                .formula
                .iter()
                .map(|(r, a, s)| Literal { rel: r.clone(), args: a.clone(), positive: *s })
                .collect(),
            value: rational(&e.value)?,
        });
    }
    Ok((base, extra, j.horizon, entries))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellJson {
    pub cell: Vec<usize>,
    pub value_type: TypeJson,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FunctionJson {
    /// The arity for Sym recipes, the base relation name for Aut recipes.
    pub index: String,
    pub grid: Vec<Vec<String>>,
    pub cells: Vec<CellJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecipeKind {
    Sym,
    Aut,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecipeJson {
    pub kind: RecipeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_ref: Option<PresentationSource>,
    pub target_language: LanguageJson,
    pub functions: Vec<FunctionJson>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Recipe {
    Sym(SymRecipe),
    Aut(AutRecipe),
}

fn function_to_json(index: String, f: &StepFunction) -> FunctionJson {
    let sizes: Vec<usize> = f.grids().iter().map(|g| g.len() + 1).collect();
    let mut cells = Vec::new();
    let mut idx = vec![0usize; sizes.len()];
    for v in f.cell_values() {
        cells.push(CellJson { cell: idx.clone(), value_type: ordered_type_to_json(v) });
        for (i, s) in sizes.iter().enumerate() {
            idx[i] += 1;
            if idx[i] < *s {
                break;
            }
            idx[i] = 0;
        }
    }
    FunctionJson { index, grid: f.grids().iter().map(|g| g.iter().map(format_rational).collect()).collect(), cells }
}

fn function_from_json(j: &FunctionJson, l: &Arc<Language>, arity: usize) -> Result<StepFunction, IoError> {
    let grids: Result<Vec<Vec<Rational>>, IoError> =
        j.grid.iter().map(|g| g.iter().map(|s| rational(s)).collect()).collect();
    let grids = grids?;
    let sizes: Vec<usize> = grids.iter().map(|g| g.len() + 1).collect();
    let mut by_cell: BTreeMap<usize, OrderedQfType> = BTreeMap::new();
    for c in &j.cells {
        if c.cell.len() != sizes.len() || c.cell.iter().zip(&sizes).any(|(i, s)| i >= s) {
            return Err(schema(format!("cell {:?} outside the grid", c.cell)));
        }
        let mut pos = 0;
        let mut stride = 1;
        for (i, s) in c.cell.iter().zip(&sizes) {
            pos += i * stride;
            stride *= s;
        }
        by_cell.insert(pos, ordered_type_from_json(&c.value_type, l)?);
    }
    let total: usize = sizes.iter().product();
    if by_cell.len() != total {
        return Err(schema(format!("function {} lists {} of {} cells", j.index, by_cell.len(), total)));
    }
    Ok(StepFunction::from_cells(l.clone(), arity, grids, by_cell.into_values().collect())?)
}

pub fn recipe_to_json(r: &Recipe) -> RecipeJson {
    match r {
        Recipe::Sym(s) => RecipeJson {
            kind: RecipeKind::Sym,
            base_ref: None,
            target_language: LanguageJson::from_language(s.language()),
            functions: s.functions().iter().map(|f| function_to_json(f.arity().to_string(), f)).collect(),
        },
        Recipe::Aut(a) => RecipeJson {
            kind: RecipeKind::Aut,
            base_ref: Some(PresentationSource::Explicit(presentation_to_json(a.base()))),
            target_language: LanguageJson::from_language(a.language()),
            functions: a
                .functions()
                .iter()
                .enumerate()
                .map(|(p, f)| function_to_json(a.base().name(p).to_string(), f))
                .collect(),
        },
    }
}

pub fn recipe_from_json(j: &RecipeJson) -> Result<Recipe, IoError> {
    let l = j.target_language.to_language()?;
    match j.kind {
        RecipeKind::Sym => {
            let mut fs: Vec<Option<StepFunction>> = vec![None; l.max_arity()];
            for f in &j.functions {
                let k: usize = f.index.parse().map_err(|_| schema(format!("bad arity `{}`", f.index)))?;
                if k == 0 || k > fs.len() {
                    return Err(schema(format!("arity {k} outside the language")));
                }
                fs[k - 1] = Some(function_from_json(f, &l, k)?);
            }
            let fs: Vec<StepFunction> = fs
                .into_iter()
                .enumerate()
                .map(|(i, f)| f.unwrap_or_else(|| StepFunction::trivial(l.clone(), i + 1)))
                .collect();
            Ok(Recipe::Sym(SymRecipe::new(l, fs)?))
        }
        RecipeKind::Aut => {
            let src = j.base_ref.as_ref().ok_or_else(|| schema("aut recipe without base_ref"))?;
            let base = Arc::new(presentation_from_source(src)?);
            let mut fs: Vec<Option<StepFunction>> = vec![None; base.language().len()];
            for f in &j.functions {
                let p = base.id(&f.index).ok_or_else(|| schema(format!("unknown base type `{}`", f.index)))?;
                fs[p] = Some(function_from_json(f, &l, base.arity(p))?);
            }
            let fs: Vec<StepFunction> = fs
                .into_iter()
                .enumerate()
                .map(|(p, f)| f.unwrap_or_else(|| StepFunction::trivial(l.clone(), base.arity(p))))
                .collect();
            Ok(Recipe::Aut(AutRecipe::new(base, l, fs)?))
        }
    }
}

/// Parses `E(0,1) & Red(0) & !Red(1)`, with `|` between conjunctions.
/// `true` or an empty string is the empty conjunction.
pub fn parse_formula(s: &str) -> Result<QfFormula, IoError> {
    let parse_lit = |raw: &str| -> Result<Literal, IoError> {
        let raw = raw.trim();
        let (positive, body) = match raw.strip_prefix('!').or_else(|| raw.strip_prefix('¬')) {
            Some(b) => (false, b.trim()),
            None => (true, raw),
        };
        let (name, rest) = body.split_once('(').ok_or_else(|| schema(format!("bad literal `{raw}`")))?;
        let args = rest.strip_suffix(')').ok_or_else(|| schema(format!("bad literal `{raw}`")))?;
        let args: Result<Vec<usize>, _> =
            args.split(',').filter(|a| !a.trim().is_empty()).map(|a| a.trim().parse::<usize>()).collect();
        let args = args.map_err(|_| schema(format!("bad arguments in `{raw}`")))?;
        Ok(Literal { rel: name.trim().to_string(), args, positive })
    };
    let parse_conj = |c: &str| -> Result<Vec<Literal>, IoError> {
        let c = c.trim();
        if c.is_empty() || c == "true" || c == "⊤" {
            return Ok(Vec::new());
        }
        c.split(['&', '∧']).map(parse_lit).collect()
    };
    let parts: Vec<&str> = s.split(['|', '∨']).collect();
    if parts.len() == 1 {
        Ok(QfFormula::Conj(parse_conj(parts[0])?))
    } else {
        Ok(QfFormula::Disj(parts.into_iter().map(parse_conj).collect::<Result<_, _>>()?))
    }
}

pub fn to_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::recipe::{erdos_renyi, DEFAULT_CELL_CAP};

    #[test]
    fn presentation_round_trip() {
        let p = zoo::triangle_free(3);
        let j: PresentationSource = serde_json::from_str(&to_pretty(&presentation_to_json(&p))).unwrap();
        assert_eq!(presentation_from_source(&j).unwrap(), p);
    }

    #[test]
    fn preset_sources() {
        let j: PresentationSource = serde_json::from_str(r#"{"preset":"rado","max_arity":3}"#).unwrap();
        assert_eq!(presentation_from_source(&j).unwrap(), zoo::rado(3));
        let j: PresentationSource =
            serde_json::from_str(r#"{"age":{"preset":"graphs","size_bound":3},"max_arity":3}"#).unwrap();
        assert_eq!(presentation_from_source(&j).unwrap().language().len(), zoo::rado(3).language().len());
    }

    #[test]
    fn measure_round_trip() {
        let base = Arc::new(zoo::rado(2));
        let red = Arc::new(Language::from_pairs([("Red", 1)]).unwrap());
        let mu = WindowMeasure::iid_unary(base, red, 0, &rat(1, 3), 2).unwrap();
        let j: MeasureJson = serde_json::from_str(&to_pretty(&measure_to_json(&mu))).unwrap();
        assert_eq!(measure_from_json(&j).unwrap(), mu);
    }

    #[test]
    fn recipe_round_trip() {
        let r = Recipe::Sym(erdos_renyi(&zoo::rado(3), true).unwrap());
        let j: RecipeJson = serde_json::from_str(&to_pretty(&recipe_to_json(&r))).unwrap();
        let back = recipe_from_json(&j).unwrap();
        assert_eq!(back, r);
        if let Recipe::Sym(s) = back {
            assert!(s.pushforward(2, DEFAULT_CELL_CAP).is_ok());
        }
    }

    #[test]
    fn formulas() {
        let f = parse_formula("E(0,1) & Red(0) & !Red(1)").unwrap();
        assert_eq!(
            f,
            QfFormula::Conj(vec![Literal::pos("E", &[0, 1]), Literal::pos("Red", &[0]), Literal::neg("Red", &[1])])
        );
        assert_eq!(parse_formula("true").unwrap(), QfFormula::top());
        assert!(matches!(parse_formula("E(0) | E(1)").unwrap(), QfFormula::Disj(c) if c.len() == 2));
        assert!(parse_formula("E[0]").is_err());
    }
}
