//! Command-line front end: `bound`, `synth`, `eval` and `oracle`.
//!
//! Every command reads a JSON pipeline config; flags override the config.
//! Exit codes: 0 on success, 1 on configuration or input errors, 2 when
//! `bound` finds the minimum infeasible under the cap.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::assignment;
use crate::baselines;
use crate::candidate::{self, BlockingConfig, CandidateSet};
use crate::error::{Error, Result};
use crate::eval::{self, Dataset, EvalConfig, Method, QueryColumns, QueryKind};
use crate::exec::Execution;
use crate::query::{self, BoundQuery, Cap, ResultInterval};
use crate::similarity::{Metric, SimilarityConfig};
use crate::synth::{self, Mode, SynthConfig};
use crate::tables::{self, group_augmenting, EntityGroup, MatchKind, Matching, Relation, Schema};

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Cap selection as written in a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CapConfig {
    Explicit(usize),
    Percentile(f64),
    #[default]
    Unconstrained,
}

impl From<CapConfig> for Cap {
    fn from(c: CapConfig) -> Cap {
        match c {
            CapConfig::Explicit(n) => Cap::Explicit(n),
            CapConfig::Percentile(p) => Cap::Percentile(p),
            CapConfig::Unconstrained => Cap::Unconstrained,
        }
    }
}

/// Workload section of a config, used by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadConfig {
    pub kind: QueryKind,
    pub count: usize,
    #[serde(default)]
    pub columns: QueryColumns,
}

/// Inputs of a pipeline run. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub base: PathBuf,
    pub base_schema: PathBuf,
    pub augmenting: PathBuf,
    pub augmenting_schema: PathBuf,
    pub similarity: SimilarityConfig,
    #[serde(default)]
    pub blocking: BlockingConfig,
    /// Precomputed candidate CSV; built from `similarity` when absent.
    #[serde(default)]
    pub candidates: Option<PathBuf>,
    #[serde(default)]
    pub cap: CapConfig,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub queries: Vec<String>,
    #[serde(default)]
    pub workload: Option<WorkloadConfig>,
    /// Matching the user's pipeline chose, for the nominal result.
    #[serde(default)]
    pub nominal_matching: Option<PathBuf>,
    /// Ground-truth matching, needed by `ga_star` and `eval`.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(dir);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        for p in [&mut self.base, &mut self.base_schema, &mut self.augmenting, &mut self.augmenting_schema] {
            fix(p);
        }
        for p in [&mut self.candidates, &mut self.nominal_matching, &mut self.truth, &mut self.out]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }
}

/// Loaded relations, groups and candidates.
pub struct Loaded {
    pub base: Relation,
    pub aug: Relation,
    pub groups: Vec<EntityGroup>,
    pub psi: CandidateSet,
}

pub fn load_pipeline(cfg: &PipelineConfig, exec: Execution) -> Result<Loaded> {
    let base = tables::load_relation(&cfg.base, &Schema::load(&cfg.base_schema)?)?;
    let aug = tables::load_relation(&cfg.augmenting, &Schema::load(&cfg.augmenting_schema)?)?;
    let groups = group_augmenting(&aug);
    let psi = match &cfg.candidates {
        Some(path) => candidate::load_candidates(path, &base, &groups)?,
        None => candidate::build_candidate_set(&base, &aug, &groups, &cfg.similarity, &cfg.blocking, exec)?,
    };
    Ok(Loaded { base, aug, groups, psi })
}

#[derive(Parser, Debug)]
#[command(name = "linkbound", version, about = "Result intervals for aggregate queries over ambiguously linked tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Bound one query and print the interval as JSON.
    Bound(BoundArgs),
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Run a workload over several methods and write results.
    Eval(EvalArgs),
    /// Exhaustive bounds for small instances.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Default)]
#[group(multiple = false)]
pub struct CapArgs {
    /// Explicit in-degree cap.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Cap at this percentile of candidate degrees, in (0, 1].
    #[arg(long)]
    pub cap_percentile: Option<f64>,
    /// Use the largest candidate degree as the cap.
    #[arg(long)]
    pub uncapped: bool,
}

impl CapArgs {
    fn resolve(&self, config: CapConfig) -> Cap {
        match (self.cap, self.cap_percentile, self.uncapped) {
            (Some(n), _, _) => Cap::Explicit(n),
            (_, Some(p), _) => Cap::Percentile(p),
            (_, _, true) => Cap::Unconstrained,
            _ => config.into(),
        }
    }
}

#[derive(Args, Debug)]
pub struct BoundArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value = "ga")]
    pub method: Method,
    #[command(flatten)]
    pub cap: CapArgs,
    /// Directory for `bound.json` and `candidates.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// JSON with `rows` and the generator settings; defaults apply when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated methods; overrides the config.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub query: Option<String>,
    #[command(flatten)]
    pub cap: CapArgs,
}

/// Settings file for `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthFile {
    pub rows: usize,
    /// Short base titles that lie within a few edits of each other.
    pub confusable_titles: bool,
    pub n_max: usize,
    pub mode: Mode,
    pub typo_distance: (usize, usize),
    pub value_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthFile {
    fn default() -> Self {
        let d = SynthConfig::default();
        SynthFile {
            rows: 100,
            confusable_titles: false,
            n_max: d.n_max,
            mode: d.mode,
            typo_distance: d.typo_distance,
            value_range: d.value_range,
            seed: d.seed,
        }
    }
}

fn interval_json(query: &str, method: Method, iv: &ResultInterval) -> serde_json::Value {
    let rel = match (iv.l, iv.nominal) {
        (Some(l), Some(nominal)) => query::relative_error(l, iv.u, nominal).ok(),
        _ => None,
    };
    json!({
        "query": query,
        "method": method.name(),
        "l": iv.l,
        "u": iv.u,
        "nominal": iv.nominal,
        "rel": rel,
        "diagnostics": iv.diagnostics,
    })
}

fn single_query(flag: &Option<String>, cfg: &PipelineConfig) -> Result<String> {
    flag.clone()
        .or_else(|| cfg.query.clone())
        .ok_or_else(|| Error::Config("no query given; pass --query or set `query` in the config".into()))
}

fn load_truth(cfg: &PipelineConfig, data: &Loaded) -> Result<Matching> {
    let path = cfg
        .truth
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs a `truth` matching in the config".into()))?;
    tables::load_matching(path, &data.base, &data.groups, MatchKind::GroundTruth)
}

/// Runs `bound`; returns the interval and whether the minimum was feasible.
pub fn cmd_bound(args: &BoundArgs, exec: Execution) -> Result<(serde_json::Value, bool)> {
    let cfg = PipelineConfig::load(&args.config)?;
    let text = single_query(&args.query, &cfg)?;
    let data = load_pipeline(&cfg, exec)?;
    let q = BoundQuery::parse(&text, &data.base, &data.aug)?;
    let cap = args.cap.resolve(cfg.cap).resolve(&data.psi)?;
    let Loaded { base, aug, groups, psi } = &data;

    let mut iv = match args.method {
        Method::Ga => query::interval(&q, base, aug, groups, psi, cap, exec)?,
        Method::GaC => {
            let n = Cap::Percentile(0.75).resolve(psi)?;
            query::interval(&q, base, aug, groups, psi, n, exec)?
        }
        Method::GaStar => {
            let truth = load_truth(&cfg, &data)?;
            let dataset = Dataset {
                name: "config".into(),
                base: base.clone(),
                aug: aug.clone(),
                groups: groups.clone(),
                psi: psi.clone(),
                truth,
            };
            let t = dataset.true_result(&q)?;
            eval::ga_star(&q, &dataset, t, exec)?.1
        }
        Method::MaxSum => baselines::max_sum_bounds(&q, base, aug, groups, psi, exec)?,
        Method::MaxSumC => {
            let explicit = args.cap.cap.or(match cfg.cap {
                CapConfig::Explicit(n) => Some(n),
                _ => None,
            });
            baselines::max_sum_constrained_bounds(&q, base, aug, groups, psi, explicit, exec)?
        }
        Method::Range => baselines::range_bounds(&q, base, aug, groups, psi, exec)?,
    };
    let nominal = match &cfg.nominal_matching {
        Some(path) => tables::load_matching(path, base, groups, MatchKind::Nominal)?,
        None => query::greedy_matching(psi, cap, cfg.similarity.metric == Metric::EditDistance),
    };
    iv.nominal = Some(query::nominal_result(&q, base, aug, groups, &nominal)?);

    let out = interval_json(&text, args.method, &iv);
    if let Some(dir) = args.out.as_ref().or(cfg.out.as_ref()) {
        write_atomic(&dir.join("bound.json"), serde_json::to_string_pretty(&out)?.as_bytes())?;
        candidate::write_candidates(psi, base, groups, dir.join("candidates.csv"))?;
    }
    Ok((out, iv.l.is_some()))
}

/// Runs `synth`: writes base and augmenting tables with schemas, the
/// ground truth and a ready-to-use `pipeline.json` into `out`.
pub fn cmd_synth(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<SynthFile>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthFile::default(),
    };
    if let Some(seed) = args.seed {
        file.seed = seed;
    }
    let cfg = SynthConfig {
        n_max: file.n_max,
        mode: file.mode,
        typo_distance: file.typo_distance,
        value_range: file.value_range,
        seed: file.seed,
    };
    cfg.validate()?;
    let shape = if file.confusable_titles {
        synth::BaseConfig::confusable(file.rows)
    } else {
        synth::BaseConfig::distinct(file.rows)
    };
    let base = synth::generate_base_with(&shape, file.seed);
    let (aug, truth) = synth::generate(&base, &cfg)?;
    let groups = group_augmenting(&aug);

    let dir = &args.out;
    let paths: Vec<PathBuf> = ["base.csv", "base.schema.json", "augmenting.csv", "augmenting.schema.json", "truth.csv", "pipeline.json"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    tables::write_relation(&base, &paths[0])?;
    base.schema().save(&paths[1])?;
    tables::write_relation(&aug, &paths[2])?;
    aug.schema().save(&paths[3])?;
    tables::write_matching(&truth.matching, &base, &groups, &paths[4])?;
    let pipeline = PipelineConfig {
        base: "base.csv".into(),
        base_schema: "base.schema.json".into(),
        augmenting: "augmenting.csv".into(),
        augmenting_schema: "augmenting.schema.json".into(),
        similarity: SimilarityConfig {
            metric: Metric::EditDistance,
            threshold: cfg.typo_distance.1 as f64,
            base_attr: "title".into(),
            aug_attr: synth::ID_COLUMN.into(),
        },
        blocking: BlockingConfig::disabled(),
        candidates: None,
        cap: CapConfig::Unconstrained,
        query: Some(format!("SELECT SUM({}) WHERE TRUE", synth::VALUE_COLUMN)),
        queries: Vec::new(),
        workload: Some(WorkloadConfig {
            kind: QueryKind::KeywordSum,
            count: 20,
            columns: QueryColumns::default(),
        }),
        nominal_matching: None,
        truth: Some("truth.csv".into()),
        methods: vec![Method::Ga, Method::GaC, Method::MaxSum, Method::MaxSumC],
        seed: file.seed,
        out: None,
    };
    write_atomic(&paths[5], serde_json::to_string_pretty(&pipeline)?.as_bytes())?;
    Ok(paths)
}

/// Runs `eval`; returns the records written.
pub fn cmd_eval(args: &EvalArgs, exec: Execution) -> Result<Vec<eval::EvalRecord>> {
    let cfg = PipelineConfig::load(&args.config)?;
    let data = load_pipeline(&cfg, exec)?;
    let truth = load_truth(&cfg, &data)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut queries = cfg
        .query
        .iter()
        .chain(&cfg.queries)
        .map(|t| query::parse_query(t))
        .collect::<Result<Vec<_>>>()?;
    if let Some(w) = &cfg.workload {
        queries.extend(eval::random_queries(&data.base, w.count, w.kind, &w.columns, seed)?);
    }
    let methods = match (&args.method[..], &cfg.methods[..]) {
        ([], []) => vec![Method::Ga, Method::GaC, Method::MaxSum, Method::MaxSumC],
        ([], m) => m.to_vec(),
        (m, _) => m.to_vec(),
    };
    let Loaded { base, aug, groups, psi } = data;
    let dataset = Dataset { name: args.config.display().to_string(), base, aug, groups, psi, truth };
    let records = eval::run_workload(&dataset, &queries, &methods, &EvalConfig::default(), exec);

    let dir = args
        .out
        .clone()
        .or(cfg.out.clone())
        .ok_or_else(|| Error::Config("eval needs --out or `out` in the config".into()))?;
    write_atomic(&dir.join("results.csv"), &eval::results_csv(&records)?)?;
    let summary = json!({
        "dataset": dataset.name,
        "queries": queries.iter().map(|q| q.to_string()).collect::<Vec<_>>(),
        "seed": seed,
        "methods": eval::summarize(&records),
        "errors": records.iter().filter_map(|r| r.error.as_ref().map(|e| json!({
            "query_id": r.query_id, "method": r.method.name(), "error": e,
        }))).collect::<Vec<_>>(),
    });
    write_atomic(&dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(records)
}

/// Runs `oracle`: exhaustive bounds for the configured query.
pub fn cmd_oracle(args: &OracleArgs) -> Result<serde_json::Value> {
    let cfg = PipelineConfig::load(&args.config)?;
    let text = single_query(&args.query, &cfg)?;
    let exec = Execution::Sequential;
    let data = load_pipeline(&cfg, exec)?;
    let q = BoundQuery::parse(&text, &data.base, &data.aug)?;
    if q.agg() == query::Aggregate::Avg {
        return Err(Error::Config("the oracle bounds SUM and COUNT queries".into()));
    }
    let cap = args.cap.resolve(cfg.cap).resolve(&data.psi)?;
    let (problem, _) = query::weighted_problem(&q, &data.base, &data.aug, &data.groups, &data.psi, cap, exec)?;
    let bounds = assignment::brute_force(&problem)?;
    Ok(json!({ "query": text, "cap": cap, "l": bounds.lower, "u": bounds.upper }))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, value)?;
    writeln!(stdout).map_err(|e| Error::io("<stdout>", e))
}

/// Entry point used by the binary.
pub fn run(cli: Cli) -> ExitCode {
    let exec = Execution::default();
    let outcome = match &cli.command {
        Command::Bound(a) => cmd_bound(a, exec).and_then(|(v, feasible)| {
            print_json(&v)?;
            if !feasible {
                eprintln!("minimum is infeasible under the cap: some coverable group cannot be matched");
            }
            Ok(if feasible { 0 } else { 2 })
        }),
        Command::Synth(a) => cmd_synth(a).map(|paths| {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }),
        Command::Eval(a) => cmd_eval(a, exec).map(|records| {
            println!("{} records", records.len());
            0
        }),
        Command::Oracle(a) => cmd_oracle(a).and_then(|v| print_json(&v).map(|_| 0)),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
