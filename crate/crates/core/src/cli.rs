//! Command-line front end. Every command reads and writes JSON; exit codes
//! are 0 on success, 1 for unreadable or invalid input, 2 for a violated
//! precondition and 3 when a checked property fails.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::canonical::{free_completion, has_trivial_dcl, is_sub_can, CanonicalPresentation};
use crate::io::{self, IoError, Recipe};
use crate::lang::{age_of, check_age_properties, Age};
use crate::measure::{decompose, from_pi_system, merge, restrict_measure};
use crate::qftypes::{
    enumerate_nonredundant_types, enumerate_ordered_types, merge as merge_parts, split, DEFAULT_SLOT_CAP,
};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::recipe::{compose_with_region, erdos_renyi, extend_to_free, region_maps};
use crate::stats::chi_square;
use crate::verify;

pub const CONFIG_ENV: &str = "AUTMEASURE_CONFIG";

/// Defaults for every command, read from a JSON file and overridden by flags.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub max_arity: usize,
    pub horizon: usize,
    pub sample_count: usize,
    pub chi_square_alpha: String,
    pub seed: u64,
    pub cell_cap: usize,
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_arity: 3,
            horizon: 3,
            sample_count: 100_000,
            chi_square_alpha: "1/1000".into(),
            seed: 0,
            cell_cap: crate::recipe::DEFAULT_CELL_CAP,
            threads: None,
        }
    }
}

impl Config {
    pub fn alpha(&self) -> Rational {
        parse_rational(&self.chi_square_alpha).expect("validated")
    }

    pub fn alpha_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self.alpha()).expect("finite")
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_arity == 0 || self.horizon == 0 || self.sample_count == 0 || self.cell_cap == 0 {
            return Err("max_arity, horizon, sample_count and cell_cap must be positive".into());
        }
        if self.threads == Some(0) {
            return Err("threads must be positive".into());
        }
        match parse_rational(&self.chi_square_alpha) {
            Some(a) if a > Rational::from_integer(0.into()) && a < Rational::from_integer(1.into()) => Ok(()),
            _ => Err(format!("chi_square_alpha `{}` is not a rational in (0,1)", self.chi_square_alpha)),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "autmeasure", version, about = "Exact invariant measures on countable relational structures")]
pub struct Cli {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_arity: Option<usize>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub cell_cap: Option<usize>,
    /// JSON config file with defaults for the flags above.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Languages and quantifier-free types.
    #[command(subcommand)]
    Lang(LangCmd),
    /// Ages: HP/JEP/SAP and generated ages.
    #[command(subcommand)]
    Age(AgeCmd),
    /// Canonical presentations, freeness and free completion.
    #[command(subcommand)]
    Canon(CanonCmd),
    /// Window measures.
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Recipes, samplers and pushforwards.
    #[command(subcommand)]
    Recipe(RecipeCmd),
    /// Run the built-in property suite.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum LangCmd {
    /// Validate a language file.
    Check { file: PathBuf },
    /// Count ordered and non-redundant types and check split/merge.
    Types {
        file: PathBuf,
        #[arg(long)]
        vars: usize,
        #[arg(long)]
        list: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum AgeCmd {
    /// Report HP, JEP and SAP up to the age's size bound.
    Check { file: PathBuf },
    /// The age of a structure, up to `--bound`.
    Of {
        file: PathBuf,
        #[arg(long)]
        bound: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum CanonCmd {
    /// Build a canonical presentation from an age.
    Build {
        file: PathBuf,
    },
    FreeCheck {
        file: PathBuf,
    },
    FreeComplete {
        file: PathBuf,
    },
    DclCheck {
        file: PathBuf,
    },
    /// Test `SMALL ⊆_can LARGE`.
    SubCan {
        small: PathBuf,
        large: PathBuf,
    },
    /// Compatible collections of one arity with their extensions.
    Collections {
        file: PathBuf,
        #[arg(long)]
        arity: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum MeasureCmd {
    /// Build a measure from pre-measure values.
    Build {
        file: PathBuf,
    },
    Check {
        file: PathBuf,
    },
    Restrict {
        file: PathBuf,
        #[arg(long)]
        to: PathBuf,
    },
    Merge {
        mu: PathBuf,
        nu: PathBuf,
    },
    Decompose {
        file: PathBuf,
        #[arg(long)]
        inner: PathBuf,
        /// Outer relation implied by each inner relation, comma separated.
        #[arg(long, value_delimiter = ',')]
        projection: Option<Vec<String>>,
    },
    /// Probability of a formula over a base diagram named by its relation.
    Eval {
        file: PathBuf,
        #[arg(long)]
        base: String,
        #[arg(long)]
        formula: String,
    },
}

#[derive(Subcommand, Debug)]
pub enum RecipeCmd {
    Sample {
        file: PathBuf,
        #[arg(long)]
        window: usize,
        /// Base realization for Aut recipes (structure file).
        #[arg(long)]
        base_diagram: Option<PathBuf>,
    },
    Pushforward {
        file: PathBuf,
        #[arg(long)]
        window: Option<usize>,
    },
    ErdosRenyi {
        file: PathBuf,
        #[arg(long)]
        allow_non_free: bool,
    },
    ExtendFree {
        file: PathBuf,
        #[arg(long)]
        completion: PathBuf,
    },
    ComposeRegion {
        file: PathBuf,
        #[arg(long)]
        base: PathBuf,
    },
    /// Compare sampled frequencies with the exact pushforward.
    CheckSampler {
        file: PathBuf,
        #[arg(long)]
        window: usize,
    },
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// `all`, `list`, or one property name.
    pub target: String,
}

#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Precondition(String),
    Property(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Schema(_) => 1,
            Failure::Precondition(_) => 2,
            Failure::Property(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Schema(m) | Failure::Precondition(m) | Failure::Property(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Schema(e.to_string())
    }
}

fn pre(e: impl std::fmt::Display) -> Failure {
    Failure::Precondition(e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))
}

fn load_presentation(path: &Path) -> Result<Arc<CanonicalPresentation>, Failure> {
    Ok(Arc::new(io::presentation_from_source(&read_json(path)?)?))
}

fn load_age(path: &Path) -> Result<Age, Failure> {
    Ok(io::age_from_source(&read_json(path)?)?)
}

fn load_recipe(path: &Path) -> Result<Recipe, Failure> {
    Ok(io::recipe_from_json(&read_json(path)?)?)
}

fn load_config(path: Option<&Path>) -> Result<Config, Failure> {
    let config: Config = match path {
        Some(p) => read_json(p)?,
        None => Config::default(),
    };
    config.validate().map_err(Failure::Schema)?;
    Ok(config)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = err.write_all(text.as_bytes());
                    2
                }
            };
        }
    };
    let result = load_config(cli.config.as_deref()).and_then(|mut config| {
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(k) = cli.max_arity {
            config.max_arity = k;
        }
        if let Some(h) = cli.horizon {
            config.horizon = h;
        }
        if let Some(c) = cli.count {
            config.sample_count = c;
        }
        if let Some(c) = cli.cell_cap {
            config.cell_cap = c;
        }
        if cli.threads.is_some() {
            config.threads = cli.threads;
        }
        config.validate().map_err(Failure::Schema)?;
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            pool = pool.num_threads(t);
        }
        let pool = pool.build().map_err(pre)?;
        pool.install(|| dispatch(&cli, &config))
    });
    match result {
        Ok(Output { text, code }) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text.as_bytes()).map_err(|e| e.to_string()),
                None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => code,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    2
                }
            }
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message());
            if let Failure::Property(m) = &f {
                let _ = writeln!(out, "{m}");
            }
            f.code()
        }
    }
}

struct Output {
    text: String,
    code: i32,
}

fn ok(text: String) -> Result<Output, Failure> {
    Ok(Output { text, code: 0 })
}

fn json<T: Serialize>(v: &T) -> Result<Output, Failure> {
    ok(io::to_pretty(v))
}

fn dispatch(cli: &Cli, config: &Config) -> Result<Output, Failure> {
    match &cli.command {
        Command::Lang(c) => lang_cmd(c),
        Command::Age(c) => age_cmd(c),
        Command::Canon(c) => canon_cmd(c, cli.max_arity),
        Command::Measure(c) => measure_cmd(c),
        Command::Recipe(c) => recipe_cmd(c, config),
        Command::Verify(v) => verify_cmd(&v.target, config),
    }
}

fn lang_cmd(c: &LangCmd) -> Result<Output, Failure> {
    match c {
        LangCmd::Check { file } => {
            let j: io::LanguageJson = read_json(file)?;
            let l = j.to_language()?;
            json(&io::LanguageJson::from_language(&l))
        }
        LangCmd::Types { file, vars, list } => {
            let l = read_json::<io::LanguageJson>(file)?.to_language()?;
            let ordered = enumerate_ordered_types(&l, *vars, DEFAULT_SLOT_CAP).map_err(pre)?;
            let nonred = enumerate_nonredundant_types(&l, *vars, DEFAULT_SLOT_CAP).map_err(pre)?;
            for q in &nonred {
                if merge_parts(&split(q)).ok().as_ref() != Some(q) {
                    return Err(Failure::Property(format!("split/merge round trip fails on {}", q.structure())));
                }
            }
            #[derive(Serialize)]
            struct Report {
                vars: usize,
                ordered: usize,
                nonredundant: usize,
                split_merge_round_trip: bool,
                #[serde(skip_serializing_if = "Vec::is_empty")]
                types: Vec<io::TypeJson>,
            }
            json(&Report {
                vars: *vars,
                ordered: ordered.len(),
                nonredundant: nonred.len(),
                split_merge_round_trip: true,
                types: if *list { ordered.iter().map(io::ordered_type_to_json).collect() } else { Vec::new() },
            })
        }
    }
}

fn age_cmd(c: &AgeCmd) -> Result<Output, Failure> {
    match c {
        AgeCmd::Check { file } => {
            let age = load_age(file)?;
            let r = check_age_properties(&age);
            #[derive(Serialize)]
            struct Report {
                size_bound: usize,
                members: usize,
                hp: bool,
                jep: bool,
                sap: bool,
                #[serde(skip_serializing_if = "Option::is_none")]
                hp_witness: Option<String>,
                #[serde(skip_serializing_if = "Option::is_none")]
                jep_witness: Option<String>,
                #[serde(skip_serializing_if = "Option::is_none")]
                sap_witness: Option<String>,
            }
            json(&Report {
                size_bound: r.size_bound,
                members: age.members().len(),
                hp: r.hp,
                jep: r.jep,
                sap: r.sap,
                hp_witness: r.hp_witness.map(|w| format!("{} restricted to {:?}", w.member, w.subset)),
                jep_witness: r.jep_witness.map(|w| format!("{} and {}", w.left, w.right)),
                sap_witness: r.sap_witness.map(|w| format!("base {}, left {}, right {}", w.base, w.left, w.right)),
            })
        }
        AgeCmd::Of { file, bound } => {
            let j: io::StructureJson = read_json(file)?;
            let s = j.to_structure(None)?;
            json(&io::age_to_json(&age_of(s.language().clone(), [&s], *bound)))
        }
    }
}

fn canon_cmd(c: &CanonCmd, max_arity: Option<usize>) -> Result<Output, Failure> {
    match c {
        CanonCmd::Build { file } => {
            let age = load_age(file)?;
            let k = max_arity.unwrap_or(age.size_bound());
            let p = CanonicalPresentation::from_age(&age, k).map_err(pre)?;
            json(&io::presentation_to_json(&p))
        }
        CanonCmd::FreeCheck { file } => {
            let p = load_presentation(file)?;
            let r = p.is_free();
            match r.witness {
                None => ok(format!("free up to arity {}\n", r.up_to_arity)),
                Some(w) => Err(Failure::Property(format!(
                    "not free up to arity {}: witness {}",
                    r.up_to_arity,
                    w.display(p.language())
                ))),
            }
        }
        CanonCmd::FreeComplete { file } => {
            let p = load_presentation(file)?;
            let k = max_arity.unwrap_or(p.max_arity());
            json(&io::presentation_to_json(&free_completion(&p, k).map_err(pre)?))
        }
        CanonCmd::DclCheck { file } => {
            let age = load_age(file)?;
            let r = has_trivial_dcl(&age);
            match r.witness {
                None => ok(format!("trivial dcl up to size {}\n", r.size_bound)),
                Some(w) => Err(Failure::Property(format!(
                    "dcl not trivial up to size {}: base {} with extensions {} and {} has no strong amalgam",
                    r.size_bound, w.base, w.left, w.right
                ))),
            }
        }
        CanonCmd::SubCan { small, large } => {
            let m0 = load_presentation(small)?;
            let m1 = load_presentation(large)?;
            let r = is_sub_can(&m0, &m1);
            match r.embedding {
                Some(e) => {
                    let mut text = String::from("contained\n");
                    for (p, q) in e.iter().enumerate() {
                        text.push_str(&format!("{} -> {}\n", m0.name(p), m1.name(*q)));
                    }
                    ok(text)
                }
                None => Err(Failure::Property(format!(
                    "not contained: witness {}",
                    r.witness.map_or_else(String::new, |w| w.to_string())
                ))),
            }
        }
        CanonCmd::Collections { file, arity } => {
            let p = load_presentation(file)?;
            let mut text = String::new();
            for coll in p.enumerate_compatible(*arity) {
                let ext = p.extensions_of(&coll).map_err(pre)?;
                let names: Vec<&str> = ext.iter().map(|&r| p.name(r)).collect();
                text.push_str(&format!("{} -> [{}]\n", coll.display(p.language()), names.join(", ")));
            }
            ok(text)
        }
    }
}

fn measure_cmd(c: &MeasureCmd) -> Result<Output, Failure> {
    match c {
        MeasureCmd::Build { file } => {
            let (base, extra, horizon, entries) = io::pi_system_from_json(&read_json(file)?)?;
            let mu = from_pi_system(base, extra, horizon, &entries).map_err(|e| Failure::Property(e.to_string()))?;
            json(&io::measure_to_json(&mu))
        }
        MeasureCmd::Check { file } => {
            let mu = io::measure_from_json(&read_json(file)?)?;
            match mu.check_invariance().witness {
                None => ok("invariant\n".into()),
                Some(w) => Err(Failure::Property(format!("not invariant: {w}"))),
            }
        }
        MeasureCmd::Restrict { file, to } => {
            let mu = io::measure_from_json(&read_json(file)?)?;
            let m0 = load_presentation(to)?;
            json(&io::measure_to_json(&restrict_measure(&mu, &m0).map_err(pre)?))
        }
        MeasureCmd::Merge { mu, nu } => {
            let mu = io::measure_from_json(&read_json(mu)?)?;
            let nu = io::concentrated_from_json(&read_json(nu)?)?;
            json(&io::measure_to_json(&merge(&mu, &nu).map_err(pre)?))
        }
        MeasureCmd::Decompose { file, inner, projection } => {
            let eta = io::measure_from_json(&read_json(file)?)?;
            let inner = load_presentation(inner)?;
            let proj = match projection {
                None => None,
                Some(names) => {
                    let outer = eta.base().language();
                    let ids: Result<Vec<_>, Failure> = names
                        .iter()
                        .map(|n| outer.id(n).ok_or_else(|| Failure::Precondition(format!("unknown relation `{n}`"))))
                        .collect();
                    Some(ids?)
                }
            };
            let d = decompose(&eta, &inner, proj).map_err(pre)?;
            #[derive(Serialize)]
            struct Out {
                mu: io::MeasureJson,
                nu: io::ConcentratedJson,
                zero_mass: Vec<String>,
            }
            json(&Out {
                mu: io::measure_to_json(&d.mu),
                nu: io::concentrated_to_json(&d.nu),
                zero_mass: d.zero_mass.iter().map(|p| p.to_string()).collect(),
            })
        }
        MeasureCmd::Eval { file, base, formula } => {
            let mu = io::measure_from_json(&read_json(file)?)?;
            let r =
                mu.base().id(base).ok_or_else(|| Failure::Precondition(format!("unknown base relation `{base}`")))?;
            let f = io::parse_formula(formula)?;
            let p = mu.prob(mu.base().witness(r), &f).map_err(pre)?;
            ok(format!("{}\n", format_rational(&p)))
        }
    }
}

fn recipe_cmd(c: &RecipeCmd, config: &Config) -> Result<Output, Failure> {
    match c {
        RecipeCmd::Sample { file, window, base_diagram } => {
            let samples = match (load_recipe(file)?, base_diagram) {
                (Recipe::Sym(r), _) => r.sample_many(*window, config.seed, config.sample_count).map_err(pre)?,
                (Recipe::Aut(r), Some(path)) => {
                    let j: io::StructureJson = read_json(path)?;
                    let d = j.to_structure(Some(r.base().language()))?;
                    if d.size() != *window {
                        return Err(Failure::Precondition(format!(
                            "base realization has {} points, window is {window}",
                            d.size()
                        )));
                    }
                    r.sample_many(&d, config.seed, config.sample_count).map_err(pre)?
                }
                (Recipe::Aut(_), None) => {
                    return Err(Failure::Precondition("aut recipes need --base-diagram".into()));
                }
            };
            let out: Vec<io::StructureJson> =
                samples.iter().map(|s| io::StructureJson::from_structure(s, false)).collect();
            json(&out)
        }
        RecipeCmd::Pushforward { file, window } => {
            let w = window.unwrap_or(config.horizon);
            let mu = match load_recipe(file)? {
                Recipe::Sym(r) => r.pushforward(w, config.cell_cap),
                Recipe::Aut(r) => r.pushforward(w, config.cell_cap),
            }
            .map_err(pre)?;
            json(&io::measure_to_json(&mu))
        }
        RecipeCmd::ErdosRenyi { file, allow_non_free } => {
            let p = load_presentation(file)?;
            let r = erdos_renyi(&p, !allow_non_free).map_err(pre)?;
            json(&io::recipe_to_json(&Recipe::Sym(r)))
        }
        RecipeCmd::ExtendFree { file, completion } => {
            let Recipe::Aut(r) = load_recipe(file)? else {
                return Err(Failure::Precondition("extend-free needs an aut recipe".into()));
            };
            let c = load_presentation(completion)?;
            json(&io::recipe_to_json(&Recipe::Aut(extend_to_free(&r, &c).map_err(pre)?)))
        }
        RecipeCmd::ComposeRegion { file, base } => {
            let Recipe::Sym(e) = load_recipe(file)? else {
                return Err(Failure::Precondition("compose-region needs a sym recipe".into()));
            };
            let base = load_presentation(base)?;
            let maps = region_maps(&base, base.max_arity()).map_err(pre)?;
            let f = compose_with_region(&e, &maps, config.cell_cap).map_err(pre)?;
            json(&io::recipe_to_json(&Recipe::Aut(f)))
        }
        RecipeCmd::CheckSampler { file, window } => {
            let Recipe::Sym(r) = load_recipe(file)? else {
                return Err(Failure::Precondition("check-sampler needs a sym recipe".into()));
            };
            let exact = r.pushforward(*window, config.cell_cap).map_err(pre)?;
            let row = exact.table(*window).values().next().expect("one base diagram");
            let samples = r.sample_many(*window, config.seed, config.sample_count).map_err(pre)?;
            let report = chi_square(&samples, row);
            let line = format!(
                "chi-square {:.4} on {} degrees of freedom, p = {:.6}, {} samples",
                report.statistic, report.dof, report.p_value, report.samples
            );
            if report.passes(config.alpha_f64()) {
                ok(format!("pass: {line}\n"))
            } else {
                Err(Failure::Property(format!("fail: {line}")))
            }
        }
    }
}

fn verify_cmd(target: &str, config: &Config) -> Result<Output, Failure> {
    let checks = verify::suite();
    if target == "list" {
        return ok(checks.iter().map(|c| format!("{}\n", c.name)).collect());
    }
    let selected: Vec<_> = checks.iter().filter(|c| target == "all" || c.name == target).collect();
    if selected.is_empty() {
        return Err(Failure::Precondition(format!("no property named `{target}`")));
    }
    let mut text = String::new();
    let mut failed = false;
    for c in selected {
        match (c.run)(config) {
            Ok(detail) => text.push_str(&format!("PASS {}: {detail}\n", c.name)),
            Err(witness) => {
                failed = true;
                text.push_str(&format!("FAIL {}: {witness}\n", c.name));
            }
        }
    }
    Ok(Output { text, code: if failed { 3 } else { 0 } })
}
