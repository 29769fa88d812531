//! One PASS/FAIL line per acceptance criterion, each with its time budget.
//! Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use clarify_core::agents::{AgentDescriptor, AgentRegistry};
use clarify_core::decision::{assemble_evidence_prompt, default_decision_template};
use clarify_core::detectors::knowledge::{EntityKb, EntityRecord};
use clarify_core::detectors::link_entities;
use clarify_core::eval::{
    build_baseline_prompt, compare, compute_metrics, evaluate, load_dataset, ConfusionMatrix,
    EvalRecord, MetricsReport, Pipeline, RunOptions,
};
use clarify_core::model::{validate_query, ClarificationLabel, Feedback};
use clarify_core::service::TurnResponse;
use common::engines::{fixture_service, FAILING_AGENT, SLOW_AGENT};
use common::oracles::{alias_table, leftmost_longest, metrics_from_pairs, pairs_for};
use common::strategies::{entity_records, query_tokens};
use common::stubs::{stub_agent, Behavior};
use common::{fixture_config, fixtures, scan_headers};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cells(m: &MetricsReport) -> [f64; 9] {
    [
        m.needed.precision,
        m.needed.recall,
        m.needed.f1,
        m.not_needed.precision,
        m.not_needed.recall,
        m.not_needed.f1,
        m.macro_avg.precision,
        m.macro_avg.recall,
        m.macro_avg.f1,
    ]
}

/// Scores a matrix through the record-level API.
fn metrics_for(tp: u64, fp: u64, fn_: u64, tn: u64) -> MetricsReport {
    let pairs = pairs_for(tp, fp, fn_, tn);
    let golds: Vec<EvalRecord> = pairs
        .iter()
        .enumerate()
        .map(|(i, (g, _))| EvalRecord {
            id: format!("r{i:03}"),
            query: "q".into(),
            gold_label: *g,
            categories: vec![],
        })
        .collect();
    let preds: BTreeMap<String, ClarificationLabel> =
        pairs.iter().enumerate().map(|(i, (_, p))| (format!("r{i:03}"), *p)).collect();
    compute_metrics(&preds, &golds).expect("non-empty")
}

fn within(got: &[f64; 9], want: &[f64; 9], tol: f64) -> Check {
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        ensure((g - w).abs() <= tol + 1e-9, || format!("cell {i}: got {g}, want {w}"))?;
    }
    Ok(())
}

const MULTI_AGENT_ROW: [f64; 9] = [0.904, 0.635, 0.746, 0.438, 0.808, 0.568, 0.671, 0.721, 0.657];
const BASELINE_ROW: [f64; 9] = [0.732, 0.833, 0.779, 0.333, 0.214, 0.261, 0.533, 0.524, 0.520];

fn multi_agent_row() -> Check {
    within(&cells(&metrics_for(47, 5, 27, 21)), &MULTI_AGENT_ROW, 0.001)
}

fn baseline_row() -> Check {
    let baseline = metrics_for(60, 22, 12, 6);
    within(&cells(&baseline), &BASELINE_ROW, 0.001)?;
    let delta = compare(&metrics_for(47, 5, 27, 21), &baseline).map_err(|e| e.to_string())?;
    ensure((delta.macro_f1 - 0.137).abs() <= 0.001 + 1e-9, || {
        format!("macro-F1 delta {}", delta.macro_f1)
    })
}

fn metric_oracle() -> Check {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 1_000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let counts = (0u64..=50, 0u64..=50, 0u64..=50, 0u64..=50)
        .prop_filter("non-empty", |(a, b, c, d)| a + b + c + d > 0);
    runner
        .run(&counts, |(tp, fp, fn_, tn)| {
            let report = metrics_for(tp, fp, fn_, tn);
            prop_assert_eq!(report.matrix, ConfusionMatrix::new(tp, fp, fn_, tn));
            prop_assert_eq!(cells(&report), metrics_from_pairs(&pairs_for(tp, fp, fn_, tn)));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn entity_oracle() -> Check {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 500,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    runner
        .run(&(entity_records(), query_tokens()), |(records, tokens)| {
            let kb = EntityKb::from_records(
                records
                    .iter()
                    .map(|(id, aliases)| EntityRecord {
                        id: id.clone(),
                        name: id.clone(),
                        entity_type: "t".into(),
                        description: String::new(),
                        aliases: aliases.clone(),
                    })
                    .collect(),
            )
            .unwrap();
            let query = validate_query(&tokens.join(" ")).unwrap();
            let got: Vec<(usize, usize, Vec<String>)> = link_entities(&query, &kb)
                .into_iter()
                .map(|m| (m.start, m.end, m.candidates.iter().map(|e| e.id.clone()).collect()))
                .collect();
            prop_assert_eq!(got, leftmost_longest(&tokens, &alias_table(&records)));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

async fn end_to_end_determinism() -> Check {
    let records = load_dataset(fixtures().join("eval/multi_agent.jsonl")).map_err(|e| e.to_string())?;
    ensure(records.len() == 100, || format!("{} records", records.len()))?;
    let config = fixture_config();
    let mut reports = Vec::new();
    for _ in 0..2 {
        let gateway = config.build_gateway().map_err(|e| e.to_string())?;
        let engine = config.build_engine(&gateway).map_err(|e| e.to_string())?;
        let report = evaluate(&records, Pipeline::MultiAgent(&engine), RunOptions::default())
            .await
            .map_err(|e| e.to_string())?;
        let detected = report.predictions.values().filter(|p| !p.detected_by.is_empty()).count() as u64;
        let calls = engine.gateways().decision.calls();
        ensure(calls == detected, || format!("{calls} decision calls for {detected} detecting records"))?;
        // Zero-detection records must be exactly the ones that skipped the LLM.
        ensure(detected == 76, || format!("{detected} detecting records, fixture plants 76"))?;
        reports.push(report.to_json());
    }
    ensure(reports[0] == reports[1], || "reports differ between runs".into())
}

async fn dispatch_robustness() -> Check {
    let clean = fixture_service(false);
    let faulty = fixture_service(true);
    let query = "what is a schema";
    let mut outcomes = Vec::new();
    for svc in [&clean, &faulty] {
        let sid = svc.create_session();
        let response = svc.post_query(&sid, query).await.map_err(|e| e.to_string())?;
        let TurnResponse::Clarification { choices, question, .. } = response else {
            return Err(format!("expected a clarification, got {response:?}"));
        };
        ensure(choices.len() == 2 && !question.is_empty(), || "malformed clarification".into())?;
        let state = svc.get_session(&sid).await.map_err(|e| e.to_string())?;
        ensure(state.check_invariants(), || "session invariants broken".into())?;
        outcomes.push(state.turns[0].outcomes.clone());
    }
    let (clean, faulty) = (&outcomes[0], &outcomes[1]);
    ensure(faulty.len() == clean.len() + 2, || "fault agents missing from report".into())?;
    ensure(faulty[..clean.len()] == clean[..], || "healthy agents' outcomes changed".into())?;
    let statuses: Vec<(&str, String)> = faulty[clean.len()..]
        .iter()
        .map(|o| (o.agent_id.as_str(), format!("{:?}", o.status)))
        .collect();
    ensure(
        statuses == [(FAILING_AGENT, "Failed".to_owned()), (SLOW_AGENT, "TimedOut".to_owned())],
        || format!("fault statuses {statuses:?}"),
    )
}

async fn prompt_exactness() -> Check {
    const IDS: [&str; 6] = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot"];
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let template = default_decision_template();
    let query = validate_query("where does this data go").unwrap();
    for trial in 0..200 {
        let mask: Vec<bool> = (0..IDS.len()).map(|_| rng.random_bool(0.5)).collect();
        if !mask.contains(&true) {
            continue;
        }
        let mut registry = AgentRegistry::new();
        for (id, &on) in IDS.iter().zip(&mask) {
            let behavior = if on { Behavior::Detect } else { Behavior::Pass };
            let delay = rng.random_range(0..4);
            registry
                .register(AgentDescriptor::detector(*id), stub_agent(id, behavior, delay))
                .unwrap();
        }
        let report = registry.dispatch_all(&query).await.map_err(|e| e.to_string())?;
        let messages = assemble_evidence_prompt(&query, &report, &template).map_err(|e| e.to_string())?;
        let expected: Vec<String> =
            IDS.iter().zip(&mask).filter(|(_, &on)| on).map(|(id, _)| id.to_string()).collect();
        let found = scan_headers(&messages[1].content, "agent");
        ensure(found == expected, || format!("trial {trial}: {found:?} vs {expected:?}"))?;
    }
    let examples = fixture_config().load_few_shot().map_err(|e| e.to_string())?.unwrap_or_default();
    let messages = build_baseline_prompt("where is my report", &examples).map_err(|e| e.to_string())?;
    let blocks = messages[1]
        .content
        .lines()
        .filter(|l| l.starts_with("[example ") && l.ends_with(']'))
        .count();
    ensure(blocks == 10, || format!("{blocks} example blocks"))
}

async fn demo_scenarios() -> Check {
    let svc = fixture_config().build_service().map_err(|e| e.to_string())?;
    let cases = [
        ("how do I create a segment", "product-ambiguity", "P1"),
        ("what is a schema", "entity-linking", "E1"),
    ];
    for (query, agent, pick) in cases {
        let sid = svc.create_session();
        let response = svc.post_query(&sid, query).await.map_err(|e| e.to_string())?;
        let TurnResponse::Clarification { turn_id, choices, evidence, .. } = response else {
            return Err(format!("`{query}`: expected a clarification"));
        };
        let detected: Vec<&str> =
            evidence.iter().filter(|e| e.detected).map(|e| e.agent_id.as_str()).collect();
        ensure(detected == [agent], || format!("`{query}`: detected by {detected:?}"))?;
        ensure(choices.len() == 2, || format!("`{query}`: {} choices", choices.len()))?;
        let label = choices
            .iter()
            .find(|c| c.id == pick)
            .map(|c| c.label.clone())
            .ok_or_else(|| format!("`{query}`: no choice {pick}"))?;
        let fb = svc
            .post_feedback(&sid, turn_id, Feedback::SelectedChoice(pick.into()))
            .await
            .map_err(|e| e.to_string())?;
        ensure(fb.refined_query.contains(&label), || {
            format!("refined query `{}` lacks `{label}`", fb.refined_query)
        })?;
    }
    Ok(())
}

fn report(name: &str, budget: Duration, started: Instant, result: Check) -> bool {
    let elapsed = started.elapsed();
    let in_budget = elapsed <= budget;
    let ok = result.is_ok() && in_budget;
    let detail = match (&result, in_budget) {
        (Err(e), _) => format!(" - {e}"),
        (Ok(()), false) => " - over time budget".to_owned(),
        (Ok(()), true) => String::new(),
    };
    println!(
        "{} {name} ({} ms, budget {} ms){detail}",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_millis(),
        budget.as_millis()
    );
    ok
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let secs = Duration::from_secs;
    let mut all = true;

    let t = Instant::now();
    all &= report("metric reproduction, multi-agent row", secs(1), t, multi_agent_row());
    let t = Instant::now();
    all &= report("metric reproduction, baseline row and macro-F1 delta", secs(1), t, baseline_row());
    let t = Instant::now();
    all &= report("metric oracle equivalence, 1000 matrices", secs(10), t, metric_oracle());
    let t = Instant::now();
    all &= report("entity matching oracle, 500 instances", secs(10), t, entity_oracle());
    let t = Instant::now();
    all &= report(
        "end-to-end determinism and short-circuit, 100 records",
        secs(30),
        t,
        rt.block_on(end_to_end_determinism()),
    );
    let t = Instant::now();
    all &= report("dispatch robustness with failing and slow agents", secs(5), t, rt.block_on(dispatch_robustness()));
    let t = Instant::now();
    all &= report("prompt content exactness", secs(5), t, rt.block_on(prompt_exactness()));
    let t = Instant::now();
    all &= report("demo scenarios", secs(5), t, rt.block_on(demo_scenarios()));

    if !all {
        std::process::exit(1);
    }
}
