//! Acceptance suite. Runs without the test harness and prints one PASS/FAIL
//! line per criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use kbc::ingest::GoldDataset;
use kbc::pipeline::{addable_statements, estimate_cost, relative_growth, Budget, CostModel};
use kbc::scoring::{calibrate_curve, filter_by_threshold, retain_all_metrics, ThresholdCurve};
use kbc::{Answer, EntityRef, Fact, PromptVariant, ScoredPrediction, Threshold};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// Random scored lists with coarse confidences so that ties are common.
fn random_lists(seed: u64, n: usize) -> Vec<Vec<(f64, bool)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.random_range(1..=200);
            let levels = rng.random_range(1..=50);
            let p_correct: f64 = rng.random_range(0.3..1.0);
            (0..len)
                .map(|_| {
                    let conf = rng.random_range(0..levels) as f64 / levels as f64;
                    (conf, rng.random_bool(p_correct))
                })
                .collect()
        })
        .collect()
}

/// Exhaustive search: try every distinct confidence as a threshold, keep
/// the one retaining the most items with precision strictly above target.
fn oracle(items: &[(f64, bool)], target: f64) -> (f64, Threshold) {
    let taus: BTreeSet<u64> = items.iter().map(|(c, _)| c.to_bits()).collect();
    let mut best = (0usize, Threshold::RetainNothing);
    for bits in taus {
        let tau = f64::from_bits(bits);
        let kept: Vec<bool> = items.iter().filter(|(c, _)| *c >= tau).map(|(_, ok)| *ok).collect();
        let hits = kept.iter().filter(|ok| **ok).count();
        if hits as f64 / kept.len() as f64 > target && kept.len() > best.0 {
            best = (kept.len(), Threshold::Confidence(tau));
        }
    }
    (best.0 as f64 / items.len() as f64, best.1)
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    for (i, items) in random_lists(7, 1000).iter().enumerate() {
        for target in [0.90, 0.95] {
            let got = kbc::scoring::recall_at_precision(items, target).map_err(|e| e.to_string())?;
            let want = oracle(items, target);
            ensure(got == want, || format!("list {i} at {target}: got {got:?}, want {want:?}"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(10))
}

fn monotonicity() -> Check {
    for (i, items) in random_lists(11, 1000).iter().enumerate() {
        let (p95, _) = kbc::scoring::recall_at_precision(items, 0.95).unwrap();
        let (p90, _) = kbc::scoring::recall_at_precision(items, 0.90).unwrap();
        ensure(p90 >= p95, || format!("list {i}: {p90} < {p95}"))?;
    }
    let table = std::fs::read_to_string(fixtures().join("reference/coverage_at_precision.tsv")).unwrap();
    let mut rows = table.lines();
    let header: Vec<&str> = rows.next().unwrap().split('\t').collect();
    for row in rows {
        let cols: Vec<&str> = row.split('\t').collect();
        for pair in (1..cols.len()).step_by(2) {
            let p95: f64 = cols[pair].parse().unwrap();
            let p90: f64 = cols[pair + 1].parse().unwrap();
            ensure(p90 >= p95, || format!("{} {}: {p90} < {p95}", cols[0], header[pair]))?;
        }
    }
    Ok(())
}

fn growth_table() -> Check {
    let start = Instant::now();
    let table = std::fs::read_to_string(fixtures().join("reference/completion_growth.tsv")).unwrap();
    let mut n = 0;
    for row in table.lines().skip(1) {
        let c: Vec<&str> = row.split('\t').collect();
        let num = |i: usize| c[i].parse::<f64>().unwrap();
        let (n_cur, n_miss, f, addable, a, growth) =
            (num(1) as u64, num(2) as u64, num(3) / 100.0, num(4), num(5) / 100.0, num(6));
        let got_addable = addable_statements(f, n_miss) as f64;
        ensure((got_addable - addable).abs() <= 1.0, || format!("{}: addable {got_addable} vs {addable}", c[0]))?;
        let got_growth = relative_growth(addable as u64, a, n_cur).map_err(|e| e.to_string())? as f64;
        ensure((got_growth - growth).abs() <= 1.0, || format!("{}: growth {got_growth} vs {growth}", c[0]))?;
        n += 1;
    }
    ensure(n == 16, || format!("{n} rows"))?;
    ensure(relative_growth(551_263, 0.88, 71_101).ok() == Some(682), || "inContinent growth".into())?;
    within(start.elapsed(), Duration::from_secs(1))
}

fn cost_model() -> Check {
    let start = Instant::now();
    let model = CostModel::new(0.02);
    let e = estimate_cost(48_000_000, &model);
    let rel = |got: f64, want: f64| (got - want).abs() / want;
    ensure(rel(e.total, 168_000.0) <= 0.01, || format!("total {}", e.total))?;
    ensure(rel(e.per_query * 100.0, 0.35) <= 0.05, || format!("per query {} ct", e.per_query * 100.0))?;
    ensure(rel(e.per_retained * 100.0, 0.7) <= 0.05, || format!("per retained {} ct", e.per_retained * 100.0))?;
    within(start.elapsed(), Duration::from_secs(1))
}

fn golden_prompts() -> Check {
    let bad: Vec<_> = golden_cases()
        .into_iter()
        .filter(|(file, text)| *text != golden_text(file))
        .map(|(file, _)| file)
        .collect();
    ensure(bad.is_empty(), || format!("mismatched {bad:?}"))
}

fn retain_all() -> Check {
    let ent = |s: &str| EntityRef::new(s, s);
    let mut gold = GoldDataset::new("hand");
    let gold_rows: [(&str, &[&str]); 5] = [
        ("s1", &["a", "b"]),
        ("s2", &["c"]),
        ("s3", &["e", "f", "g"]),
        ("s4", &["h"]),
        ("s5", &["i", "j"]),
    ];
    for rel in ["R1", "R2"] {
        for (s, objs) in gold_rows {
            gold.insert(Fact::new(ent(s), rel, objs.iter().map(|o| ent(o))));
        }
    }
    let answers: [(&str, Option<&[&str]>); 5] = [
        ("s1", Some(&["a"])),
        ("s2", Some(&["c", "d"])),
        ("s3", Some(&["e", "f", "g"])),
        ("s4", None),
        ("s5", Some(&["k"])),
    ];
    let preds = |rel: &str| -> Vec<ScoredPrediction> {
        answers
            .iter()
            .map(|(s, a)| {
                let answer = match a {
                    Some(objs) => Answer::Objects(objs.iter().map(|o| o.to_string()).collect()),
                    None => Answer::Abstain,
                };
                ScoredPrediction::new(ent(s), rel, answer, Some(0.5), "", PromptVariant::Standard)
            })
            .collect()
    };
    // 5 hits of 7 predicted objects, 9 gold objects.
    let (p, r, f1) = (5.0 / 7.0, 5.0 / 9.0, 0.625);
    let one = retain_all_metrics(&preds("R1"), &gold).map_err(|e| e.to_string())?;
    let m = one.get("R1").unwrap().scores;
    let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
    ensure(close(m.precision, p) && close(m.recall, r) && close(m.f1, f1), || format!("{m:?}"))?;
    let mut both = preds("R1");
    both.extend(preds("R2"));
    let two = retain_all_metrics(&both, &gold).map_err(|e| e.to_string())?;
    let avg = two.macro_average;
    ensure(close(avg.precision, p) && close(avg.recall, r) && close(avg.f1, f1), || format!("macro {avg:?}"))
}

async fn determinism() -> Check {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let relations = calibrated_relations(tmp.path()).await;
    let a = e2e_config(tmp.path(), "a", &relations);
    let b = e2e_config(tmp.path(), "b", &relations);
    complete(&a).await;
    complete(&b).await;
    let reference = read_dir_bytes(&a.output_dir);
    ensure(reference.contains_key("P103.tsv") && reference.contains_key("manifest.json"), || "outputs missing".into())?;
    ensure(reference == read_dir_bytes(&b.output_dir), || "two fresh runs differ".into())?;
    for stop in [1, 17, 40, 49] {
        let name = format!("resume-{stop}");
        let mut partial = e2e_config(tmp.path(), &name, &relations);
        partial.budget = Budget { max_queries: Some(stop), max_spend: None };
        complete(&partial).await;
        let resumed = e2e_config(tmp.path(), &name, &relations);
        complete(&resumed).await;
        ensure(read_dir_bytes(&resumed.output_dir) == reference, || format!("resume after {stop} differs"))?;
    }
    within(start.elapsed(), Duration::from_secs(30))
}

fn threshold_guarantee() -> Check {
    let ent = EntityRef::new("Q1", "x");
    for (i, items) in random_lists(23, 300).iter().enumerate() {
        let curve = ThresholdCurve::from_pairs(items.clone()).unwrap();
        for target in [0.75, 0.90, 0.95] {
            let r = curve.recall_at_precision(target).unwrap();
            if let Some(p) = r.precision {
                ensure(p > target, || format!("list {i}: prefix precision {p} at {target}"))?;
            }
            let kept: Vec<_> = items.iter().filter(|(c, _)| r.threshold.admits(*c)).collect();
            let hits = kept.iter().filter(|(_, ok)| *ok).count();
            ensure(kept.len() == r.retained, || format!("list {i}: threshold keeps {} not {}", kept.len(), r.retained))?;
            ensure(kept.is_empty() || hits as f64 / kept.len() as f64 > target, || format!("list {i}: kept precision"))?;
        }
        let c = calibrate_curve("R", &curve, (0.75, 0.95)).unwrap();
        if let Some(p) = c.precision {
            ensure(p >= 0.75, || format!("list {i}: calibrated precision {p}"))?;
        }
        let preds: Vec<ScoredPrediction> = items
            .iter()
            .map(|(conf, _)| ScoredPrediction::new(ent.clone(), "R", Answer::Objects(vec!["o".into()]), Some(*conf), "", PromptVariant::Standard))
            .collect();
        let kept = filter_by_threshold(&preds, c.threshold);
        let want = items.iter().filter(|(conf, _)| c.threshold.admits(*conf)).count();
        ensure(kept.len() == want, || format!("list {i}: filter kept {} not {want}", kept.len()))?;
        ensure(kept.iter().all(|p| c.threshold.admits(p.confidence.unwrap())), || format!("list {i}: filter admitted below tau"))?;
    }
    Ok(())
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    let results: Vec<(&str, Check)> = vec![
        ("recall@precision matches exhaustive search", oracle_equivalence()),
        ("coverage@P90 >= coverage@P95", monotonicity()),
        ("growth table arithmetic", growth_table()),
        ("cost model", cost_model()),
        ("golden prompts", golden_prompts()),
        ("retain-all metrics", retain_all()),
        ("end-to-end determinism and resume", determinism().await),
        ("threshold guarantee", threshold_guarantee()),
    ];
    let mut failed = 0;
    for (name, result) in &results {
        match result {
            Ok(()) => println!("PASS  {name}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        std::process::ExitCode::SUCCESS
    } else {
        std::process::ExitCode::FAILURE
    }
}
