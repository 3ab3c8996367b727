//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod support;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use qpc_core::bok::{best_of_k_exact, Candidate, CandidatePool, TiePolicy};
use qpc_core::fixtures::{
    fluency_clean_corpus, fluency_degenerate_corpus, table8_rows, verdict_corpus,
};
use qpc_core::fluency::{heuristic_scan, FluencyConfig};
use qpc_core::gate::{update_gate, AuditSchedule, GateDecision, GateState};
use qpc_core::reward::{extract_verdict, group_advantages, score_rollout, Rollout};
use qpc_core::verifier::{decide, ConsistencyPolicy, Decision};
use qpc_core::weights::{compute_weights, WeightScheme};
use qpc_core::Label;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(elapsed < limit, || {
        format!("took {elapsed:?}, limit {limit:?}")
    })
}

fn weight_identities() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for g in 0..1000 {
        let n = rng.random_range(1..=64);
        let lengths: Vec<u64> = (0..n).map(|_| rng.random_range(1..=100_000)).collect();
        let eta = rng.random_range(0.0..=1.0);
        for scheme in [
            WeightScheme::InnerSample,
            WeightScheme::InterSample,
            WeightScheme::Balanced { eta },
        ] {
            let w = compute_weights(&lengths, scheme).map_err(|e| e.to_string())?;
            let mass: f64 = lengths
                .iter()
                .zip(&w.weights)
                .map(|(&l, &x)| l as f64 * x)
                .sum();
            check((mass - 1.0).abs() <= 1e-12, || {
                format!("group {g} {scheme}: mass {mass}")
            })?;
        }
        let bits = |s| {
            compute_weights(&lengths, s)
                .unwrap()
                .weights
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        check(
            bits(WeightScheme::Balanced { eta: 1.0 }) == bits(WeightScheme::InnerSample),
            || format!("group {g}: balanced(1) differs from inner"),
        )?;
        check(
            bits(WeightScheme::Balanced { eta: 0.0 }) == bits(WeightScheme::InterSample),
            || format!("group {g}: balanced(0) differs from inter"),
        )?;
    }
    let w = compute_weights(&[2, 6], WeightScheme::Balanced { eta: 0.6 })
        .unwrap()
        .weights;
    check(
        (w[0] - 0.2).abs() < 1e-12 && (w[1] - 0.1).abs() < 1e-12,
        || format!("[2,6] gave {w:?}"),
    )?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("1000 groups, 3 schemes, {elapsed:.2?}"))
}

fn pool(scores: &[f64], golds: &[bool]) -> CandidatePool {
    CandidatePool {
        question_id: "q".into(),
        candidates: scores
            .iter()
            .zip(golds)
            .enumerate()
            .map(|(i, (&score, &gold))| Candidate {
                id: format!("c{i}"),
                score,
                gold,
            })
            .collect(),
        score_repeats: 8,
    }
}

/// Mean gold value of the selected candidate over every k-subset.
fn enumerate(scores: &[f64], golds: &[bool], k: usize, tie: TiePolicy) -> f64 {
    let n = scores.len();
    let (mut total, mut count) = (0.0, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let best = members.iter().map(|&i| scores[i]).fold(f64::MIN, f64::max);
        let top: Vec<usize> = members.into_iter().filter(|&i| scores[i] == best).collect();
        total += match tie {
            TiePolicy::FirstIndex => f64::from(u8::from(golds[top[0]])),
            TiePolicy::ExpectedUniform => {
                top.iter().filter(|&&i| golds[i]).count() as f64 / top.len() as f64
            }
        };
        count += 1;
    }
    total / count as f64
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn best_of_k() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut pools = 0;
    for n in 1..=10usize {
        for _ in 0..200 {
            // few distinct score levels so ties are common
            let levels = rng.random_range(1..=4);
            let scores: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.random_range(0..levels)) / 4.0)
                .collect();
            let golds: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            let p = pool(&scores, &golds);
            for k in 1..=n {
                for tie in [TiePolicy::ExpectedUniform, TiePolicy::FirstIndex] {
                    let exact = best_of_k_exact(&p, k, tie).map_err(|e| e.to_string())?;
                    let brute = enumerate(&scores, &golds, k, tie);
                    check((exact - brute).abs() <= 1e-12, || {
                        format!("N={n} k={k} {tie:?}: exact {exact} vs enumeration {brute}")
                    })?;
                }
                let c = golds.iter().filter(|&&g| g).count();
                let closed = 1.0 - binom(n - c, k) / binom(n, k);
                let gold_scores: Vec<f64> = golds.iter().map(|&g| f64::from(u8::from(g))).collect();
                let brute = enumerate(&gold_scores, &golds, k, TiePolicy::ExpectedUniform);
                let lib = best_of_k_exact(&p.as_oracle(), k, TiePolicy::ExpectedUniform).unwrap();
                check(
                    (closed - brute).abs() <= 1e-12 && (lib - brute).abs() <= 1e-12,
                    || {
                        format!("oracle N={n} c={c} k={k}: closed {closed}, library {lib}, enumeration {brute}")
                    },
                )?;
            }
            pools += 1;
        }
    }
    let fixture = pool(&[0.9, 0.8, 0.7, 0.6], &[true, false, false, true]);
    let v = best_of_k_exact(&fixture, 2, TiePolicy::ExpectedUniform).unwrap();
    check((v - 0.5).abs() <= 1e-12, || {
        format!("N=4 fixture at k=2 gave {v}")
    })?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "{pools} pools, N=1..10, both tie policies, {elapsed:.2?}"
    ))
}

fn table8() -> Outcome {
    let rows = table8_rows();
    check(rows.len() == 30, || format!("{} rows bundled", rows.len()))?;
    let schedule = AuditSchedule::default();
    let round = |x: f64| (x + 0.5 + 1e-9).floor() as usize;
    let (mut ratio_ok, mut flag_ok) = (0, 0);
    for row in &rows {
        let agree = round(f64::from(row.positive) * row.tp_ratio)
            + round(f64::from(row.negative) * row.tn_ratio);
        let checked = (row.positive + row.negative) as usize;
        let consistency = agree as f64 / checked as f64;
        if (consistency - row.ratio).abs() <= 0.01 + 1e-12 {
            ratio_ok += 1;
        }
        // replay the final batch through the gate with that many agreements
        let ids: Vec<String> = (0..checked).map(|i| format!("i{i}")).collect();
        let silver: BTreeMap<String, Label> =
            ids.iter().map(|i| (i.clone(), Label::True)).collect();
        let human = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), Some(Label::from(i < agree))))
            .collect();
        let state = GateState {
            batch_index: schedule.last_batch(),
            ..GateState::new(row.key())
        };
        let next =
            update_gate(&state, &ids, &human, &silver, &schedule).map_err(|e| e.to_string())?;
        let accepted = next.decision == GateDecision::Accepted;
        if accepted == row.accepted && accepted == (consistency >= 0.90) {
            flag_ok += 1;
        }
    }
    check(ratio_ok == 30 && flag_ok == 30, || {
        format!("ratio {ratio_ok}/30, accepted flag {flag_ok}/30")
    })?;
    Ok("ratio 30/30 within 0.01, accepted flag 30/30".into())
}

fn table3() -> Outcome {
    let out = support::qpc_ok(&["stats", "--fixture", "table3"]);
    let total = |name: &str| {
        out.lines()
            .find(|l| l.starts_with(name))
            .and_then(|l| l.split_whitespace().last())
            .unwrap_or("?")
            .to_owned()
    };
    let got = [
        total("llm-aided"),
        total("human-source"),
        total("auxiliary"),
    ];
    check(
        got == ["15076", "4339", "1489"] && out.contains("total 20904"),
        || format!("groups {got:?}"),
    )?;
    Ok("15076 / 4339 / 1489, total 20904".into())
}

fn tally(labels: &[Label], policy: ConsistencyPolicy) -> Option<Label> {
    let t = labels.iter().filter(|l| l.as_bool()).count();
    let f = labels.len() - t;
    match policy.majority_min {
        _ if policy == ConsistencyPolicy::UNANIMOUS => {
            if f == 0 {
                Some(Label::True)
            } else if t == 0 {
                Some(Label::False)
            } else {
                None
            }
        }
        m if t >= m as usize => Some(Label::True),
        m if f >= m as usize => Some(Label::False),
        _ => None,
    }
}

fn consistency_truth_table() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checks = 0;
    for policy in [ConsistencyPolicy::UNANIMOUS, ConsistencyPolicy::majority(4)] {
        for pattern in 0u32..32 {
            let labels: Vec<Label> = (0..5)
                .map(|i| Label::from(pattern & (1 << i) != 0))
                .collect();
            let got = decide(&labels, policy).map_err(|e| e.to_string())?;
            let kept = match got {
                Decision::Keep(l) => Some(l),
                Decision::Drop(_) => None,
            };
            check(kept == tally(&labels, policy), || {
                format!("{policy} pattern {pattern:05b}: got {got:?}")
            })?;
            let mut shuffled = labels.clone();
            for _ in 0..100 {
                shuffled.shuffle(&mut rng);
                check(decide(&shuffled, policy).unwrap() == got, || {
                    format!("{policy} pattern {pattern:05b} not permutation invariant")
                })?;
            }
            checks += 1;
        }
    }
    Ok(format!("{checks} pattern/policy pairs, 100 shuffles each"))
}

fn verdicts_and_fluency() -> Outcome {
    let corpus = verdict_corpus();
    check(corpus.len() >= 30, || {
        format!("only {} verdict cases", corpus.len())
    })?;
    check(
        corpus
            .iter()
            .any(|c| c.id == "a7-transcript" && c.expected == Some(false)),
        || "transcript case missing".into(),
    )?;
    for case in &corpus {
        let got = extract_verdict(&case.text).map(Label::as_bool);
        check(got == case.expected, || {
            format!("{}: got {got:?}, want {:?}", case.id, case.expected)
        })?;
    }
    let cfg = FluencyConfig::default();
    let degenerate = fluency_degenerate_corpus();
    let clean = fluency_clean_corpus();
    for case in &degenerate {
        let report = heuristic_scan(&case.text, &cfg);
        check(!report.pass, || format!("degenerate {} passed", case.id))?;
        for flag in &case.expected_flags {
            check(report.flags.iter().any(|f| f.as_str() == flag), || {
                format!("degenerate {} missing {flag}", case.id)
            })?;
        }
    }
    for case in &clean {
        check(heuristic_scan(&case.text, &cfg).pass, || {
            format!("clean {} flagged", case.id)
        })?;
    }
    Ok(format!(
        "{} verdicts exact, {}/{} degenerate flagged, 0/{} clean flagged",
        corpus.len(),
        degenerate.len(),
        degenerate.len(),
        clean.len()
    ))
}

fn end_to_end_replay() -> Outcome {
    let start = Instant::now();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = support::pipeline::run_pipeline(a.path());
    let second = support::pipeline::run_pipeline(b.path());
    let verify = support::qpc(&[
        "replay",
        "verify",
        &first.digests.to_string_lossy(),
        &second.digests.to_string_lossy(),
    ]);
    check(verify.status.success(), || {
        String::from_utf8_lossy(&verify.stderr).into_owned()
    })?;
    check(first.question_overlap() == 0, || {
        format!("{} questions overlap", first.question_overlap())
    })?;
    for s in &first.states {
        let key = s.combination.canonical();
        let want = if support::pipeline::agreement_rate(&key) >= 0.95 {
            GateDecision::Accepted
        } else {
            GateDecision::Dropped
        };
        check(s.decision == want, || format!("{key}: {:?}", s.decision))?;
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "{} combinations decided, digests identical, {elapsed:.2?}",
        first.states.len()
    ))
}

fn reward_truth_table() -> Outcome {
    let reasoning = (0..80)
        .map(|i| format!("w{i}"))
        .collect::<Vec<_>>()
        .join(" ");
    let mut cases = 0;
    for predicted in [Some(Label::True), Some(Label::False), None] {
        let generation = match predicted {
            Some(l) => format!("{reasoning}\n### {l}"),
            None => format!("{reasoning}\nno final verdict"),
        };
        let rollout = Rollout {
            item_id: "x".into(),
            generation,
            token_length: 81,
            group_index: 0,
        };
        for gold in [Label::True, Label::False] {
            for fluent in [true, false] {
                let r = score_rollout(&rollout, gold, fluent);
                let want = u8::from(predicted == Some(gold) && fluent);
                check(r.predicted == predicted && r.reward == want, || {
                    format!("predicted {predicted:?} gold {gold} fluent {fluent}: {r:?}")
                })?;
                cases += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for g in 0..1000 {
        let n = rng.random_range(2..=64);
        let rewards: Vec<f64> = (0..n)
            .map(|_| f64::from(u8::from(rng.random_bool(0.4))))
            .collect();
        let sum: f64 = group_advantages(&rewards)
            .map_err(|e| e.to_string())?
            .iter()
            .sum();
        check(sum.abs() <= 1e-12, || {
            format!("group {g}: advantages sum to {sum}")
        })?;
    }
    check(extract_verdict("### True").is_some(), || {
        "bare verdict not extracted".into()
    })?;
    Ok(format!("{cases} grid cells, 1000 groups"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("weight identities", weight_identities),
        ("best-of-k oracle equivalence", best_of_k),
        ("human-check table reproduction", table8),
        ("training-distribution table reproduction", table3),
        ("consistency-filter truth table", consistency_truth_table),
        (
            "verdict extraction and fluency fixtures",
            verdicts_and_fluency,
        ),
        ("end-to-end replay pipeline", end_to_end_replay),
        ("reward truth table", reward_truth_table),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
