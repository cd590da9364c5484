//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::Path;
use std::time::{Duration, Instant};

use linkbound::assignment::{self, brute_force, AssignmentProblem, WeightedEdge};
use linkbound::baselines;
use linkbound::candidate::{self, BlockingConfig, CandidateSet};
use linkbound::cli::{self, BoundArgs, CapArgs, PipelineConfig};
use linkbound::eval::{self, Dataset, Method, QueryColumns, QueryKind};
use linkbound::exec::Execution;
use linkbound::query::{self, Aggregate, AggregateQuery, BoundQuery, Cap, ResultInterval};
use linkbound::similarity::{Metric, SimilarityConfig};
use linkbound::synth::{self, BaseConfig, Corruption, FalsePositives, Mode, SynthConfig};
use linkbound::tables::{self, group_augmenting, validate_augmentation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const EXEC: Execution = Execution::Sequential;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    check(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn fixture() -> cli::Loaded {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/stargazer/pipeline.json");
    let cfg = PipelineConfig::load(&path).unwrap();
    cli::load_pipeline(&cfg, EXEC).unwrap()
}

fn edit_distance_sim(threshold: f64) -> SimilarityConfig {
    SimilarityConfig {
        metric: Metric::EditDistance,
        threshold,
        base_attr: "title".into(),
        aug_attr: synth::ID_COLUMN.into(),
    }
}

/// A synthetic dataset whose candidate set comes from an edit-distance join
/// permissive enough to contain every true pair.
fn synthetic(rows: usize, n_max: usize, mode: Mode, seed: u64) -> Dataset {
    let base = synth::generate_base_with(&BaseConfig::confusable(rows), seed);
    let cfg = SynthConfig { n_max, mode, seed, ..Default::default() };
    let (aug, truth) = synth::generate(&base, &cfg).unwrap();
    let groups = group_augmenting(&aug);
    let psi = candidate::build_candidate_set(&base, &aug, &groups, &edit_distance_sim(5.0), &BlockingConfig::disabled(), EXEC)
        .unwrap();
    Dataset { name: format!("seed-{seed}"), base, aug, groups, psi, truth: truth.matching }
}

fn queries(data: &Dataset, seed: u64) -> (AggregateQuery, AggregateQuery) {
    let cols = QueryColumns::default();
    let sum = eval::random_queries(&data.base, 1, QueryKind::KeywordSum, &cols, seed).unwrap().remove(0);
    let count = eval::random_queries(&data.base, 1, QueryKind::YearCount, &cols, seed).unwrap().remove(0);
    (sum, count)
}

fn bind(q: &AggregateQuery, data: &Dataset) -> BoundQuery {
    BoundQuery::bind(q, &data.base, &data.aug).unwrap()
}

fn ga(q: &BoundQuery, data: &Dataset, cap: usize) -> ResultInterval {
    query::interval(q, &data.base, &data.aug, &data.groups, &data.psi, cap, EXEC).unwrap()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn stargazer_golden() -> Outcome {
    let start = Instant::now();
    let d = fixture();
    let q = BoundQuery::parse(
        "SELECT SUM(N_Complaints) WHERE Product_Name = 'StarGazer Premier Pro'",
        &d.base,
        &d.aug,
    )
    .unwrap();
    let iv = query::result_interval(&q, &d.base, &d.aug, &d.groups, &d.psi, 2, EXEC).unwrap();
    check(iv.l == Some(33.0) && iv.u == 84.0, || format!("got [{:?}, {}]", iv.l, iv.u))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("[33, 84] in {:?}", start.elapsed()))
}

fn max_sum_golden() -> Outcome {
    let start = Instant::now();
    let d = fixture();
    let q = BoundQuery::parse("SELECT SUM(N_Complaints) WHERE TRUE", &d.base, &d.aug).unwrap();
    let range = baselines::range_bounds(&q, &d.base, &d.aug, &d.groups, &d.psi, EXEC).unwrap();
    check(range.l == Some(55.0) && range.u == 119.0, || format!("range propagation gave [{:?}, {}]", range.l, range.u))?;
    let clipped = baselines::max_sum_constrained_bounds(&q, &d.base, &d.aug, &d.groups, &d.psi, Some(1), EXEC).unwrap();
    check(clipped == range, || format!("max_sum_c at N=1 gave [{:?}, {}]", clipped.l, clipped.u))?;
    within(Duration::from_secs(1), start)?;
    Ok(format!("[55, 119] in {:?}", start.elapsed()))
}

fn random_problem(rng: &mut impl Rng) -> AssignmentProblem {
    let left = rng.gen_range(1..=5);
    let right = rng.gen_range(1..=7);
    let cap = rng.gen_range(1..=3);
    let density = rng.gen_range(0.2..0.8);
    let mut edges = Vec::new();
    for base in 0..left {
        for group in 0..right {
            if rng.gen_bool(density) {
                edges.push(WeightedEdge { base, group, weight: rng.gen_range(0..=9) as f64 });
            }
        }
    }
    AssignmentProblem::new(left, right, edges, cap).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut agree = 0;
    let mut infeasible = 0;
    for seed in 0..200u64 {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
        let truth = brute_force(&p).unwrap();
        let max = assignment::solve_max(&p).total_weight;
        let min = assignment::solve_min(&p).ok().map(|a| a.total_weight);
        infeasible += usize::from(truth.lower.is_none());
        if max == truth.upper && min == truth.lower {
            agree += 1;
        } else {
            eprintln!("seed {seed}: solver ({min:?}, {max}) vs oracle ({:?}, {})", truth.lower, truth.upper);
        }
    }
    check(agree == 200, || format!("{agree}/200 agree"))?;
    within(Duration::from_secs(60), start)?;
    Ok(format!("200/200 agree ({infeasible} with infeasible minimum) in {:?}", start.elapsed()))
}

/// The 100 datasets shared by the containment criteria.
fn containment_suite() -> Vec<(Dataset, AggregateQuery, AggregateQuery)> {
    (0..100u64)
        .map(|seed| {
            let mode = if seed % 2 == 0 { Mode::Balanced } else { Mode::Skewed };
            let data = synthetic(15, 1 + (seed as usize / 2) % 4, mode, seed);
            let (sum, count) = queries(&data, seed);
            (data, sum, count)
        })
        .collect()
}

fn sum_count_containment(suite: &[(Dataset, AggregateQuery, AggregateQuery)]) -> Outcome {
    let mut bounded = [0usize; 2];
    let mut ambiguous = 0;
    for (data, sum, count) in suite {
        check(validate_augmentation(&data.truth, data.groups.len(), &data.psi).is_valid(), || {
            format!("{}: candidates miss a true pair", data.name)
        })?;
        let cap = Cap::Unconstrained.resolve(&data.psi).unwrap();
        check(cap >= data.truth.max_in_degree(), || format!("{}: cap below true in-degree", data.name))?;
        ambiguous += usize::from(data.psi.len() > data.truth.pairs.len());
        for (i, q) in [sum, count].into_iter().enumerate() {
            let bq = bind(q, data);
            let truth = data.true_result(&bq).unwrap();
            let iv = ga(&bq, data, cap);
            if iv.contains(truth) {
                bounded[i] += 1;
            } else {
                eprintln!("{}: {q} truth {truth} outside [{:?}, {}]", data.name, iv.l, iv.u);
            }
        }
    }
    check(bounded == [100, 100], || format!("SUM {}/100, COUNT {}/100", bounded[0], bounded[1]))?;
    Ok(format!("SUM 100/100, COUNT 100/100 ({ambiguous} datasets with extra candidates)"))
}

fn avg_containment(suite: &[(Dataset, AggregateQuery, AggregateQuery)]) -> Outcome {
    let mut bounded = 0;
    let mut failures = Vec::new();
    let mut explained = 0;
    for (data, sum, _) in suite {
        let q = bind(&sum.with_agg(Aggregate::Avg), data);
        let truth = data.true_result(&q).unwrap();
        let cap = Cap::Unconstrained.resolve(&data.psi).unwrap();
        match query::interval(&q, &data.base, &data.aug, &data.groups, &data.psi, cap, EXEC) {
            Ok(iv) if iv.contains(truth) => bounded += 1,
            Ok(iv) => {
                // d counts groups with some positive edge; k counts the
                // positive pairs the true matching actually uses.
                let sum_q = bind(sum, data);
                let (problem, weights) =
                    query::weighted_problem(&sum_q, &data.base, &data.aug, &data.groups, &data.psi, cap, EXEC).unwrap();
                let d = query::positive_groups(&problem);
                let k = data
                    .psi
                    .edges
                    .iter()
                    .zip(&weights)
                    .filter(|(e, w)| w.weight > 0.0 && data.truth.pairs.contains(&(e.base, e.group)))
                    .count();
                explained += usize::from(k < d && truth > iv.u);
                failures.push(format!(
                    "{} truth {truth:.3} outside [{:.3}, {:.3}], k = {k} < d = {d}",
                    data.name,
                    iv.l.unwrap_or(f64::NAN),
                    iv.u
                ));
            }
            // No positive pair at all: the truth is 0 and no interval is defined.
            Err(linkbound::Error::UndefinedAverage) if truth == 0.0 => bounded += 1,
            Err(e) => failures.push(format!("{}: {e}", data.name)),
        }
    }
    check(bounded == 100, || {
        format!(
            "{bounded}/100 bounded; {explained} of {} violations exceed u_avg with fewer positive true pairs (k) \
             than positive-capable groups (d); first: {}",
            failures.len(),
            failures.first().cloned().unwrap_or_default()
        )
    })?;
    Ok("AVG 100/100".into())
}

fn constraint_monotonicity() -> Outcome {
    const TOP: usize = 6;
    let mut failures = [0usize; TOP + 1];
    let mut total = 0usize;
    for seed in 0..50u64 {
        let data = synthetic(15, 2 + seed as usize % 4, Mode::Skewed, 1000 + seed);
        let (sum, count) = queries(&data, seed);
        for q in [sum, count] {
            let bq = bind(&q, &data);
            let truth = data.true_result(&bq).unwrap();
            let points = eval::sweep_constraint(&bq, &data, (1..=TOP).rev(), truth, EXEC).unwrap();
            let mut previous: Option<f64> = None;
            for p in &points {
                if let Some(len) = p.length {
                    if let Some(prev) = previous {
                        check(len <= prev, || format!("{}: length grew from {prev} to {len} at N={}", data.name, p.n))?;
                    }
                    previous = Some(len);
                }
                failures[p.n] += usize::from(!p.bounded);
            }
            total += 1;
        }
    }
    let rates: Vec<f64> = (1..=TOP).map(|n| failures[n] as f64 / total as f64).collect();
    check(rates.windows(2).all(|w| w[0] >= w[1]), || format!("failure rate by N=1..{TOP}: {rates:?}"))?;
    let ns: Vec<f64> = (1..=TOP).map(|n| n as f64).collect();
    let rho = eval::spearman(&ns, &rates).unwrap_or(0.0);
    check(rho <= 0.0, || format!("Spearman {rho}"))?;
    Ok(format!("lengths monotone on 50 instances; failure rate by N=1..{TOP} {rates:.3?}, rho {rho:.3}"))
}

fn skew_robustness() -> Outcome {
    const ROWS: usize = 30;
    const N: usize = 2;
    let levels = [1.0, 2.0, 5.0, 10.0, 20.0];
    let mut report = Vec::new();
    for &target in &levels {
        let (mut ga_c, mut max_sum, mut skews) = (Vec::new(), Vec::new(), Vec::new());
        for trial in 0..50u64 {
            let seed = 5000 + trial;
            let base = synth::generate_base_with(&BaseConfig::confusable(ROWS), seed);
            let (aug, truth) = synth::generate(&base, &SynthConfig { n_max: N, seed, ..Default::default() }).unwrap();
            let groups = group_augmenting(&aug);
            let exact = truth.candidate_set(base.len(), groups.len());
            // One hub row gains (target - 1) * N false positives.
            let hub = Corruption {
                add_fp: (target - 1.0) / ROWS as f64,
                drop_fn: 0.0,
                placement: FalsePositives::Hub { hubs: 1 },
            };
            let psi = synth::corrupt_candidates(&exact, &truth.matching, &hub, seed).unwrap();
            let data = Dataset { name: format!("skew-{target}-{trial}"), base, aug, groups, psi, truth: truth.matching };
            skews.push(candidate::skew(&data.psi).unwrap());
            let q = bind(&queries(&data, seed).0, &data);
            let c = Cap::Percentile(0.75).resolve(&data.psi).unwrap();
            let capped = ga(&q, &data, c);
            let uncapped = ga(&q, &data, Cap::Unconstrained.resolve(&data.psi).unwrap());
            let ms = baselines::max_sum_bounds(&q, &data.base, &data.aug, &data.groups, &data.psi, EXEC).unwrap();
            check(uncapped.u <= ms.u, || format!("{}: GA upper {} above Max-Sum upper {}", data.name, uncapped.u, ms.u))?;
            ga_c.push(capped.length().ok_or_else(|| format!("{}: GA+C minimum infeasible", data.name))?);
            max_sum.push(ms.length().unwrap());
        }
        let (g, m) = (mean(&ga_c), mean(&max_sum));
        check(g <= m, || format!("skew {target}: mean GA+C length {g} > Max-Sum {m}"))?;
        report.push(format!("skew {:.1}: {g:.1} vs {m:.1}", mean(&skews)));
    }
    Ok(report.join("; "))
}

fn precision_recall() -> Outcome {
    let levels = [0.0, 0.1, 0.2, 0.4, 0.8];
    let trials = 30u64;
    let mut lengths = vec![Vec::new(); levels.len()];
    let mut failures = vec![0usize; levels.len()];
    let mut total = 0usize;
    for trial in 0..trials {
        let seed = 9000 + trial;
        let data = synthetic(20, 3, Mode::Skewed, seed);
        let (sum, count) = queries(&data, seed);
        for q in [sum, count] {
            let bq = bind(&q, &data);
            let truth = data.true_result(&bq).unwrap();
            total += 1;
            for (i, &rate) in levels.iter().enumerate() {
                let run = |c: Corruption| {
                    let psi = synth::corrupt_candidates(&data.psi, &data.truth, &c, seed).unwrap();
                    let noisy = Dataset { psi, ..data.clone() };
                    let cap = Cap::Unconstrained.resolve(&noisy.psi).unwrap();
                    ga(&bq, &noisy, cap)
                };
                let fp = run(Corruption { add_fp: rate, ..Default::default() });
                lengths[i].push(fp.length().unwrap());
                let fn_ = run(Corruption { drop_fn: rate, ..Default::default() });
                failures[i] += usize::from(!fn_.contains(truth));
            }
        }
    }
    let mean_len: Vec<f64> = lengths.iter().map(|l| mean(l)).collect();
    let fail_rate: Vec<f64> = failures.iter().map(|&f| f as f64 / total as f64).collect();
    check(mean_len.windows(2).all(|w| w[0] <= w[1]), || format!("mean length by FP rate {mean_len:?}"))?;
    check(fail_rate.windows(2).all(|w| w[0] <= w[1]), || format!("failure rate by FN rate {fail_rate:?}"))?;
    Ok(format!("length by FP {mean_len:.1?}; failure by FN {fail_rate:.3?}"))
}

fn scale() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = synth::generate_base(2000, 42);
    let (aug, truth) = synth::generate(&base, &SynthConfig { n_max: 5, seed: 42, ..Default::default() }).unwrap();
    tables::write_relation(&base, dir.path().join("base.csv")).unwrap();
    base.schema().save(dir.path().join("base.schema.json")).unwrap();
    tables::write_relation(&aug, dir.path().join("augmenting.csv")).unwrap();
    aug.schema().save(dir.path().join("augmenting.schema.json")).unwrap();
    let groups = group_augmenting(&aug);
    tables::write_matching(&truth.matching, &base, &groups, dir.path().join("truth.csv")).unwrap();
    let cfg = serde_json::json!({
        "base": "base.csv",
        "base_schema": "base.schema.json",
        "augmenting": "augmenting.csv",
        "augmenting_schema": "augmenting.schema.json",
        "similarity": {"metric": "edit_distance", "threshold": 3.0, "base_attr": "title", "aug_attr": synth::ID_COLUMN},
        "query": "SELECT SUM(value) WHERE title CONTAINS 'pro'",
    });
    let path = dir.path().join("pipeline.json");
    std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();

    let start = Instant::now();
    let args = BoundArgs {
        config: path.clone(),
        query: None,
        method: Method::Ga,
        cap: CapArgs { cap: Some(3), ..Default::default() },
        out: Some(dir.path().join("out")),
    };
    let (json, _feasible) = cli::cmd_bound(&args, Execution::default()).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    within(Duration::from_secs(300), start)?;

    let written = std::fs::read(dir.path().join("out/candidates.csv")).unwrap();
    let psi: CandidateSet = candidate::read_candidates(&written[..], &base, &groups).unwrap();
    let mean_degree = psi.len() as f64 / base.len() as f64;
    check(groups.len() == 10_000, || format!("|S| = {}", groups.len()))?;
    check(mean_degree <= 5.0, || format!("mean degree {mean_degree}"))?;
    Ok(format!(
        "|R| = 2000, |S| = 10000, mean degree {mean_degree:.2}, N = 3, u = {} in {took:?}",
        json["u"]
    ))
}

#[test]
fn acceptance() {
    let suite = containment_suite();
    let criteria: Vec<Criterion> = vec![
        ("1 StarGazer golden interval", Box::new(stargazer_golden)),
        ("2 Max-Sum golden interval", Box::new(max_sum_golden)),
        ("3 oracle equivalence", Box::new(oracle_equivalence)),
        ("4 SUM/COUNT containment", Box::new(|| sum_count_containment(&suite))),
        ("5 AVG containment", Box::new(|| avg_containment(&suite))),
        ("6 constraint monotonicity", Box::new(constraint_monotonicity)),
        ("7 skew robustness", Box::new(skew_robustness)),
        ("8 precision/recall sensitivity", Box::new(precision_recall)),
        ("9 scale", Box::new(scale)),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(detail) => {
                println!("FAIL criterion {name}: {detail}");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
