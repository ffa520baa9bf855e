//! One PASS/FAIL line per headline criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero on any FAIL.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::future::Future;
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use board_engine::affinity::{self, MAX_REFINEMENT_PASSES};
use board_engine::clock::{Clock, SimClock};
use board_engine::gateway::{Gateway, MockProvider, TemplateId};
use board_engine::ids::{LensId, NoteId, RecordingId, SessionId, UserId, WorkspaceId};
use board_engine::relations;
use board_engine::server::{run_script, Hub, HubOptions, ReplayScript, Ticking, WorkspaceHandle};
use board_engine::snapshot::{FileSnapshotStore, MemorySnapshotStore, SnapshotStore};
use board_engine::speech::{self, Recorder};
use board_engine::sync::sim::{random_op, simulate, SimConfig};
use board_engine::sync::{AiRequest, ClientMessage};
use board_engine::workspace::{
    content_json, from_canonical_json, to_canonical_json, LensScope, MutationKind, RelationType, WorkspaceState,
};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};

type Outcome = Result<String, String>;
type Check = fn() -> Pin<Box<dyn Future<Output = Outcome>>>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

const THRESHOLD: f64 = 0.6;

/// Scores that sit on, just around, or far from the threshold.
fn score(rng: &mut ChaCha20Rng) -> f64 {
    match rng.random_range(0..6) {
        0 => THRESHOLD,
        1 => THRESHOLD - 1e-9,
        2 => THRESHOLD + 1e-9,
        _ => (rng.random_range(0..=1000) as f64) / 1000.0,
    }
}

fn board_with(rng: &mut ChaCha20Rng, notes: usize, users: usize) -> WorkspaceState {
    let mut s = empty_state();
    for i in 0..notes {
        let author = format!("u{}", rng.random_range(0..users));
        add_note(&mut s, &format!("n{i:02}"), &author, &format!("idea number {i}"));
    }
    s
}

// Convergence -------------------------------------------------------------

async fn convergence() -> Outcome {
    let started = Instant::now();
    let mut revisions = 0;
    for seed in 0..20 {
        let report = simulate(SimConfig { clients: 3, ops_per_client: 200, seed }).map_err(|e| e.to_string())?;
        ensure!(report.converged(), "seed {seed}: a replica diverged from the server");
        ensure!(report.replica_json.len() == 3, "seed {seed}: expected 3 replicas");
        revisions += report.final_revision;
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("20 seeds x 3 clients x 200 ops, {revisions} applied, {:.2}s", elapsed.as_secs_f64()))
}

// Threshold conformance ---------------------------------------------------

/// Brute force: for every unordered pair take the candidates that survive
/// the per-candidate rules, keep the most confident (first on ties), order
/// by confidence with first appearance breaking ties, cut to `max`.
fn relation_oracle(cands: &[(NoteId, NoteId, RelationType, f64)], max: usize) -> Vec<(NoteId, NoteId, RelationType, f64)> {
    let valid: Vec<_> = cands.iter().filter(|c| c.0 != c.1 && c.3 >= THRESHOLD).collect();
    let same_pair = |a: &(NoteId, NoteId, RelationType, f64), b: &(NoteId, NoteId, RelationType, f64)| {
        (a.0 == b.0 && a.1 == b.1) || (a.0 == b.1 && a.1 == b.0)
    };
    let mut out: Vec<(NoteId, NoteId, RelationType, f64)> = Vec::new();
    for (i, c) in valid.iter().enumerate() {
        if valid[..i].iter().any(|p| same_pair(p, c)) {
            continue;
        }
        let mut best = *c;
        for other in &valid[i + 1..] {
            if same_pair(other, c) && other.3 > best.3 {
                best = other;
            }
        }
        out.push(best.clone());
    }
    out.sort_by(|a, b| b.3.total_cmp(&a.3));
    out.truncate(max);
    out
}

fn retrieval_oracle(entries: &[(NoteId, String, f64)]) -> Vec<(NoteId, String, f64)> {
    // Equal scores keep the order in which each note first qualified.
    let mut notes: Vec<&NoteId> = Vec::new();
    for e in entries.iter().filter(|e| e.2 > THRESHOLD) {
        if !notes.contains(&&e.0) {
            notes.push(&e.0);
        }
    }
    let mut out = Vec::new();
    for n in notes {
        let mut best: Option<&(NoteId, String, f64)> = None;
        for e in entries.iter().filter(|e| &e.0 == n && e.2 > THRESHOLD) {
            if best.is_none_or(|b| e.2 > b.2) {
                best = Some(e);
            }
        }
        out.extend(best.cloned());
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2));
    out
}

async fn thresholds() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0x7e57);
    let mut surfaced = 0;
    let mut cards = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..9);
        let state = board_with(&mut rng, n, 3);
        let ids: Vec<NoteId> = state.main_notes().iter().map(|n| n.id.clone()).collect();

        let mut raw = Vec::new();
        let mut expected_in = Vec::new();
        for _ in 0..rng.random_range(0..16) {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            let t = RelationType::ALL[rng.random_range(0..13)];
            let conf = score(&mut rng);
            raw.push(json!({"source": (a + 1).to_string(), "target": (b + 1).to_string(), "type": t.label(), "explanation": "e", "confidence": conf}));
            expected_in.push((ids[a].clone(), ids[b].clone(), t, conf));
        }
        let gw = mock(json!({"completions": [{"template": "relation-hints", "responses": [{"relations": raw}]}]}));
        let hints = relations::generate_hints(&scoped(&gw), &state).await.map_err(|e| format!("case {case}: {e}"))?;
        ensure!(hints.iter().all(|h| h.confidence >= THRESHOLD), "case {case}: a hint below the threshold surfaced");
        let got: Vec<_> = hints.iter().map(|h| (h.source.clone(), h.target.clone(), h.relation_type, h.confidence)).collect();
        let want = relation_oracle(&expected_in, state.settings.max_hints_per_refresh);
        ensure!(got == want, "case {case}: relation hints differ from the oracle\n got {got:?}\nwant {want:?}");
        surfaced += got.len();

        let mut raw = Vec::new();
        let mut expected_in = Vec::new();
        for j in 0..rng.random_range(0..12) {
            let a = rng.random_range(0..n);
            let r = score(&mut rng);
            let sentence = format!("sentence {j}");
            raw.push(json!({"note": (a + 1).to_string(), "sentence": sentence, "relevance": r}));
            expected_in.push((ids[a].clone(), sentence, r));
        }
        let gw = mock(json!({"completions": [{"template": "relevant-idea-retrieve", "responses": [{"notes": raw}]}]}));
        let t = speech::Transcript {
            recording: RecordingId::new("r"),
            segments: vec![speech::Segment { index: 0, text: "talk".into(), start_ms: 0, end_ms: 1 }],
            status: speech::TranscriptStatus::Stopped,
        };
        let got = speech::retrieve_relevant_ideas(&scoped(&gw), &state, &t).await.map_err(|e| format!("case {case}: {e}"))?;
        ensure!(got.iter().all(|c| c.relevance > THRESHOLD), "case {case}: a card at or below the threshold surfaced");
        let got: Vec<_> = got.into_iter().map(|c| (c.note, c.matched_sentence, c.relevance)).collect();
        let want = retrieval_oracle(&expected_in);
        ensure!(got == want, "case {case}: retrieval differs from the oracle\n got {got:?}\nwant {want:?}");
        cards += got.len();
    }
    Ok(format!("1000 cases, {surfaced} hints and {cards} cards, 0 violations"))
}

// Relation-hint invariants ------------------------------------------------

async fn relation_fuzz() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(0xf022);
    let odd_types = ["Related to", "related_to", "desires", "PartOf", "Friend of", "", "is-a", "RELATED TO"];
    let mut total = 0;
    for case in 0..1000 {
        let n = rng.random_range(2..10);
        let users = rng.random_range(1..4);
        let mut state = board_with(&mut rng, n, users);
        let cross_user = rng.random_bool(0.5);
        let toggle = relations::toggle_hints(&state, true, cross_user);
        apply(&mut state, "u0", toggle);
        let key = |rng: &mut ChaCha20Rng| match rng.random_range(0..10) {
            0 => "0".to_string(),
            1 => "99".to_string(),
            2 => format!("#{}", rng.random_range(1..=n)),
            3 => format!("n{:02}", rng.random_range(0..n)),
            _ => rng.random_range(1..=n).to_string(),
        };
        let raw: Vec<Value> = (0..rng.random_range(0..25))
            .map(|_| {
                let ty = if rng.random_bool(0.3) {
                    odd_types[rng.random_range(0..odd_types.len())].to_string()
                } else {
                    RelationType::ALL[rng.random_range(0..13)].label().to_string()
                };
                json!({"source": key(&mut rng), "target": key(&mut rng), "type": ty, "explanation": "e", "confidence": score(&mut rng)})
            })
            .collect();
        let gw = mock(json!({"completions": [{"template": "relation-hints", "responses": [{"relations": raw}]}]}));
        let hints = relations::generate_hints(&scoped(&gw), &state).await.map_err(|e| format!("case {case}: {e}"))?;
        let mut pairs = BTreeSet::new();
        for h in &hints {
            ensure!(pairs.insert(h.pair()), "case {case}: pair {:?} appears twice", h.pair());
            ensure!(h.source != h.target, "case {case}: self relation");
            ensure!(RelationType::ALL.contains(&h.relation_type), "case {case}: type outside the catalog");
            ensure!(!h.relation_type.label().eq_ignore_ascii_case("related to"), "case {case}: generic relation surfaced");
            ensure!(h.confidence >= THRESHOLD, "case {case}: below threshold");
            if cross_user {
                ensure!(state.notes[&h.source].author != state.notes[&h.target].author, "case {case}: same-author pair in cross-user mode");
            }
        }
        ensure!(hints.len() <= state.settings.max_hints_per_refresh, "case {case}: too many hints");
        total += hints.len();
        apply(&mut state, "system", MutationKind::ReplaceRelationHints { hints });
        state.check_invariants().map_err(|e| format!("case {case}: {e}"))?;
    }
    Ok(format!("1000 generations, {total} hints, 0 violations"))
}

// Scheduler timing --------------------------------------------------------

async fn scheduler() -> Outcome {
    let mut attempts_total = 0;
    let mut calls_total = 0;
    let mut skipped_total = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let gw = mock(json!({"completions": [{"template": "relation-hints", "responses": [{"relations": [
            {"source": "1", "target": "2", "type": "Causes", "explanation": "x", "confidence": 0.9},
            {"source": "2", "target": "3", "type": "Has a", "explanation": "y", "confidence": 0.7}
        ]}]}]}));
        let h = Harness::new(gw.clone());
        let mut a = h.join("alice").await;
        let mut b = h.join("bob").await;
        for text in ["Airbnb", "rental car", "food budget"] {
            h.submit(&mut a, create_note(None, text, None));
        }
        h.settle(&mut [&mut a]).await;
        h.tick(rng.random_range(1..10_000)).await;

        h.ai(&mut b, AiRequest::ToggleHints { enabled: true, cross_user_only: false });
        h.settle(&mut [&mut b]).await;
        let start = h.clock.now_ms();
        let mut expected = vec![start];
        let mut expected_calls = 1;
        for _ in 0..30 {
            let mut offsets: Vec<u64> = (0..rng.random_range(0..4)).map(|_| rng.random_range(1..10_000)).collect();
            offsets.sort();
            offsets.dedup();
            let base = *expected.last().unwrap();
            let mut dirty = false;
            for off in offsets {
                h.tick(base + off - h.clock.now_ms()).await;
                if rng.random_bool(0.3) {
                    let note = h.state().await.main_notes()[0].id.clone();
                    h.submit(&mut a, MutationKind::EditNoteText { note, text: format!("edit {}", rng.random::<u32>()) });
                    h.settle(&mut [&mut a]).await;
                    dirty = true;
                }
            }
            let due = base + 10_000;
            h.tick(due - h.clock.now_ms()).await;
            expected.push(due);
            if dirty {
                expected_calls += 1;
            } else {
                skipped_total += 1;
            }
        }
        let attempts = h.handle.hint_attempts().await.map_err(|e| e.to_string())?;
        ensure!(attempts == expected, "seed {seed}: attempts {attempts:?} != {expected:?}");
        ensure!(attempts.windows(2).all(|w| w[1] - w[0] == 10_000), "seed {seed}: uneven spacing");
        let calls = gw.completion_calls_for(TemplateId::RelationHints);
        ensure!(calls == expected_calls, "seed {seed}: {calls} provider calls, expected {expected_calls}");
        attempts_total += attempts.len();
        calls_total += calls;
    }
    Ok(format!(
        "20 seeds, {attempts_total} attempts 10000 ms apart, {calls_total} calls, {skipped_total} unchanged ticks without a call"
    ))
}

// Affinity exclusivity ----------------------------------------------------

fn names(rng: &mut ChaCha20Rng, pool: &[&str], k: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    while out.len() < k {
        let n = pool[rng.random_range(0..pool.len())].to_string();
        if !out.iter().any(|o| o.eq_ignore_ascii_case(&n)) {
            out.push(n);
        }
    }
    out
}

fn assign_response(rng: &mut ChaCha20Rng, groups: &[String], keys: usize) -> Value {
    let mut listed: Vec<Value> = groups
        .iter()
        .map(|g| {
            let notes: Vec<String> = (0..rng.random_range(0..=keys))
                .map(|_| match rng.random_range(0..8) {
                    0 => "77".into(),
                    _ => rng.random_range(1..=keys.max(1)).to_string(),
                })
                .collect();
            json!({"name": if rng.random_bool(0.2) { g.to_uppercase() } else { g.clone() }, "notes": notes, "rationale": "r"})
        })
        .collect();
    if rng.random_bool(0.3) {
        listed.push(json!({"name": "Not a group", "notes": ["1"], "rationale": "x"}));
    }
    json!({"groups": listed})
}

fn check_partition(state: &WorkspaceState, lens: &LensId) -> Result<(), String> {
    let l = &state.lenses[lens];
    let page = &state.lens_pages[lens];
    let scope: BTreeSet<NoteId> = state.scope_notes(&l.scope).iter().map(|n| n.id.clone()).collect();
    let (groups, ungrouped) = page.partition(l);
    let mut covered: BTreeSet<NoteId> = BTreeSet::new();
    for (name, members) in &groups {
        for m in members {
            ensure!(covered.insert(m.clone()), "note {m} appears twice (group {name})");
        }
    }
    for m in &ungrouped {
        ensure!(covered.insert(m.clone()), "note {m} is both grouped and ungrouped");
    }
    ensure!(covered == scope, "page does not cover exactly the in-scope notes");
    Ok(())
}

async fn affinity_exclusivity() -> Outcome {
    let pool = ["Cost", "Time", "Comfort", "Location", "Food", "Safety", "Fun", "Transit", "cost", "Budget"];
    let mut rng = ChaCha20Rng::seed_from_u64(0xaff1);
    let mut installs = 0;
    let mut regroups = 0;
    let mut max_passes = 0;
    for case in 0..200 {
        let n = rng.random_range(2..10);
        let mut state = board_with(&mut rng, n, 2);
        let lens_groups: Vec<Vec<String>> = (0..2)
            .map(|_| {
                let k = rng.random_range(2..5);
                names(&mut rng, &pool, k)
            })
            .collect();
        let lenses: Vec<Value> = lens_groups
            .iter()
            .enumerate()
            .map(|(i, g)| json!({"name": format!("lens {i}"), "description": "d", "groups": g.iter().map(|n| json!({"name": n, "description": "d"})).collect::<Vec<_>>()}))
            .collect();
        let similarity: Vec<Value> = (0..rng.random_range(1..9))
            .map(|_| {
                let k = rng.random_range(1..5);
                let revised = names(&mut rng, &pool, k);
                json!({
                    "similarities": [{"first": "a", "second": "b", "score": score(&mut rng)}],
                    "revisedGroups": revised.iter().map(|n| json!({"name": n, "description": "d"})).collect::<Vec<_>>()
                })
            })
            .collect();
        let gw = mock(json!({"completions": [
            {"template": "affinity-lenses", "responses": [{"lenses": lenses}]},
            {"template": "group-name-similarity", "responses": similarity}
        ]}));
        let refined = affinity::generate_lenses(&scoped(&gw), &state, &LensScope::Global)
            .await
            .map_err(|e| format!("case {case}: {e}"))?;
        let passes: usize = refined.iter().map(|r| r.passes).sum();
        let calls = gw.completion_calls_for(TemplateId::GroupNameSimilarity) as usize;
        ensure!(refined.iter().all(|r| r.passes <= MAX_REFINEMENT_PASSES), "case {case}: refinement exceeded {MAX_REFINEMENT_PASSES} passes");
        ensure!(calls == passes, "case {case}: {calls} similarity calls for {passes} passes");
        max_passes = max_passes.max(refined.iter().map(|r| r.passes).max().unwrap_or(0));

        for (i, r) in refined.into_iter().enumerate() {
            let lens = LensId::new(format!("l{i}"));
            let groups: Vec<String> = r.candidate.affinities.iter().map(|a| a.group_name.clone()).collect();
            let keys = state.scope_notes(&r.candidate.scope).len();
            let gw = mock(json!({"completions": [{"template": "affinity-assign", "responses": [assign_response(&mut rng, &groups, keys)]}]}));
            let op = affinity::install_lens(&scoped(&gw), &state, lens.clone(), r.candidate).await.map_err(|e| format!("case {case}: {e}"))?;
            apply(&mut state, "u0", op);
            check_partition(&state, &lens).map_err(|e| format!("case {case} install: {e}"))?;
            installs += 1;

            for step in 0..3 {
                let notes: Vec<NoteId> = state.main_notes().iter().map(|n| n.id.clone()).collect();
                match rng.random_range(0..3) {
                    0 => add_note(&mut state, &format!("m{case}_{i}_{step}"), "u1", "a new idea"),
                    1 => {
                        let note = notes[rng.random_range(0..notes.len())].clone();
                        apply(&mut state, "u1", MutationKind::EditNoteText { note: note.clone(), text: "changed".into() });
                        note
                    }
                    _ if notes.len() > 2 => {
                        let note = notes[rng.random_range(0..notes.len())].clone();
                        apply(&mut state, "u1", MutationKind::DeleteNote { note: note.clone() });
                        note
                    }
                    _ => continue,
                };
                let keys = affinity::plan_regroup(&state, &lens).map_err(|e| e.to_string())?.stale.len();
                let gw = mock(json!({"completions": [{"template": "affinity-assign", "responses": [assign_response(&mut rng, &groups, keys)]}]}));
                if let Some(op) = affinity::regroup(&scoped(&gw), &state, &lens).await.map_err(|e| format!("case {case}: {e}"))? {
                    apply(&mut state, "u0", op);
                    regroups += 1;
                }
                check_partition(&state, &lens).map_err(|e| format!("case {case} regroup: {e}"))?;
                state.check_invariants().map_err(|e| format!("case {case}: {e}"))?;
            }
        }
    }
    Ok(format!("200 cases, {installs} installs, {regroups} regroups, at most {max_passes} refinement passes"))
}

// Snapshot round trip -----------------------------------------------------

async fn submit_random(
    handle: &WorkspaceHandle,
    session: &SessionId,
    rng: &mut ChaCha20Rng,
    seq: &mut u64,
    steps: usize,
) -> Result<(), String> {
    for _ in 0..steps {
        let state = handle.state().await.map_err(|e| e.to_string())?;
        *seq += 1;
        let mutation = random_op(rng, &state);
        handle
            .send(session, ClientMessage::SubmitMutation { client_seq: *seq, mutation })
            .map_err(|e| e.to_string())?;
    }
    handle.wait_idle().await.map_err(|e| e.to_string())
}

async fn snapshots() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store: Arc<dyn SnapshotStore> = Arc::new(FileSnapshotStore::new(dir.path()));
    let clock = SimClock::new(1_000);
    let hub = Hub::new(
        Gateway::mock(MockProvider::new()),
        store.clone(),
        Arc::new(clock.clone()),
        HubOptions { ticking: Ticking::Manual, expire_idle: false, seed: Some(11), ..HubOptions::default() },
    );
    for case in 0..100u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(case);
        let ws = WorkspaceId::new(format!("ws{case}"));
        let handle = hub.create(&ws).0;
        let (session, _rx) = handle.join(UserId::new("alice")).await.map_err(|e| e.to_string())?;
        let mut seq = 0;
        let steps = case as usize % 40 + 1;
        submit_random(&handle, &session, &mut rng, &mut seq, steps).await?;
        let saved = handle.state().await.map_err(|e| e.to_string())?;
        handle.save_snapshot("point", false).await.map_err(|e| e.to_string())?;

        let loaded = store.load(&ws, "point").map_err(|e| e.to_string())?;
        ensure!(to_canonical_json(&loaded) == to_canonical_json(&saved), "case {case}: stored state differs");

        clock.advance(1);
        let steps = rng.random_range(1..10);
        submit_random(&handle, &session, &mut rng, &mut seq, steps).await?;
        let before = handle.state().await.map_err(|e| e.to_string())?.revision;
        let after = handle.load_snapshot("point").await.map_err(|e| e.to_string())?;
        ensure!(after == before + 1, "case {case}: rollback went from revision {before} to {after}");
        let restored = handle.state().await.map_err(|e| e.to_string())?;
        ensure!(restored.revision == after && after > saved.revision, "case {case}: revision is not monotone");
        ensure!(content_json(&restored) == content_json(&saved), "case {case}: restored content differs");
        let reparsed = from_canonical_json(&to_canonical_json(&restored)).map_err(|e| e.to_string())?;
        ensure!(to_canonical_json(&reparsed) == to_canonical_json(&restored), "case {case}: canonical form is not stable");
    }
    hub.shutdown().await;
    Ok("100 states, bit-exact content, revision strictly increasing across rollback".into())
}

// Golden session ----------------------------------------------------------

async fn golden() -> Outcome {
    let (script, dir) = ReplayScript::load(&crate_dir().join("examples/trip-planning.session")).map_err(|e| e.to_string())?;
    let mut finals = BTreeSet::new();
    let mut last = None;
    for run in 0..3 {
        let gw = Gateway::mock(MockProvider::from_dir(trip_fixtures()).map_err(|e| e.to_string())?);
        let report = run_script(&script, &dir, gw, Arc::new(MemorySnapshotStore::new())).await.map_err(|e| e.to_string())?;
        ensure!(report.failures.is_empty(), "run {run}: {:?}", report.failures);
        ensure!(report.golden_match == Some(true), "run {run}: final state differs from the golden file");
        finals.insert(report.final_state.clone());
        last = Some(report);
    }
    ensure!(finals.len() == 1, "final states differ across runs");
    let report = last.unwrap();

    let fee = report.received.values().flatten().any(|wire| {
        let v: Value = serde_json::from_str(wire).unwrap_or_default();
        v["type"] == "aiResult" && v["kind"] == "expandRelation" && wire.contains("extra service fee")
    });
    ensure!(fee, "no Desires expansion offered \"extra service fee\"");

    let state = from_canonical_json(&report.final_state).map_err(|e| e.to_string())?;
    let planning = state
        .lenses
        .values()
        .find(|l| l.name.contains("planning"))
        .ok_or("planning lens missing from the final state")?;
    let groups: Vec<&str> = planning.affinities.iter().map(|a| a.group_name.as_str()).collect();
    ensure!(
        groups == ["Accommodation", "Local Transportation", "Financial Consideration"],
        "planning lens groups are {groups:?}"
    );
    Ok(format!("3 identical runs at revision {}, golden file matched", report.revision))
}

// Speech pipeline ---------------------------------------------------------

async fn speech_pipeline() -> Outcome {
    let fixture: Value = serde_json::from_str(
        &std::fs::read_to_string(trip_fixtures().join("40-speech.json")).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let gw = Gateway::mock(MockProvider::from_dir(trip_fixtures()).map_err(|e| e.to_string())?);
    let sg = scoped(&gw);

    let mut state = empty_state();
    for (i, text) in ["Book an Airbnb near the beach", "Rent a car for the week", "Try local food", "Take the metro"].iter().enumerate() {
        add_note(&mut state, &format!("n{i}"), if i % 2 == 0 { "alice" } else { "bob" }, text);
    }
    let ids: Vec<NoteId> = state.main_notes().iter().map(|n| n.id.clone()).collect();

    let mut recorder = Recorder::new();
    recorder.begin(RecordingId::new("rec"), 0).map_err(|e| e.to_string())?;
    for (i, tag) in ["airbnb-budget", "rideshare", "weather"].iter().enumerate() {
        speech::transcribe_chunk(&sg, &mut recorder, &MockProvider::audio_chunk(tag), i as u64 * 1000)
            .await
            .map_err(|e| e.to_string())?;
    }
    let transcript = recorder.stop().map_err(|e| e.to_string())?.ok_or("transcript still draining")?;
    ensure!(transcript.segments.len() == 3, "expected 3 segments, got {}", transcript.segments.len());

    // Oracles read straight from the fixture file.
    let candidates = fixture["completions"][0]["responses"][0]["keyInformation"].as_array().unwrap();
    let want_summaries: Vec<&str> = candidates
        .iter()
        .filter(|c| c["relevance"].as_f64().unwrap() >= THRESHOLD)
        .map(|c| c["summary"].as_str().unwrap())
        .collect();
    let dropped = candidates.len() - want_summaries.len();
    let cards = speech::extract_key_info(&sg, &state, &transcript).await.map_err(|e| e.to_string())?;
    let got: Vec<&str> = cards.iter().map(|c| c.summary.as_str()).collect();
    ensure!(got == want_summaries, "extraction kept {got:?}, expected {want_summaries:?}");
    ensure!(dropped > 0, "fixture has no sub-threshold candidate");

    let entries: Vec<(NoteId, String, f64)> = fixture["completions"][1]["responses"][0]["notes"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|e| {
            let k: usize = e["note"].as_str()?.parse().ok()?;
            Some((ids.get(k.checked_sub(1)?)?.clone(), e["sentence"].as_str()?.to_string(), e["relevance"].as_f64()?))
        })
        .collect();
    let want = retrieval_oracle(&entries);
    let relevant = speech::retrieve_relevant_ideas(&sg, &state, &transcript).await.map_err(|e| e.to_string())?;
    let got: Vec<_> = relevant.iter().map(|c| (c.note.clone(), c.matched_sentence.clone(), c.relevance)).collect();
    ensure!(got == want, "retrieval returned {got:?}, expected {want:?}");
    let per_note: BTreeSet<_> = relevant.iter().map(|c| &c.note).collect();
    ensure!(per_note.len() == relevant.len(), "more than one card for a note");

    let mut by_text = BTreeMap::new();
    for card in &cards {
        let before: BTreeSet<NoteId> = state.notes.keys().cloned().collect();
        let op = speech::card_to_note(&state, card);
        let op = match op {
            MutationKind::CreateNote { text, position, page, provenance, group, .. } => MutationKind::CreateNote {
                id: Some(NoteId::new(format!("k{}", by_text.len()))),
                text,
                position,
                page,
                provenance,
                group,
            },
            other => return Err(format!("card became {}", other.name())),
        };
        apply(&mut state, "alice", op);
        let made = state.notes.keys().find(|k| !before.contains(*k)).ok_or("no note created")?;
        by_text.insert(card.summary.clone(), state.notes[made].text.clone());
    }
    ensure!(by_text.iter().all(|(a, b)| a == b), "a card's summary changed on the way to the board");
    Ok(format!(
        "{} segments, {} kept and {dropped} dropped, {} retrieval cards, {} notes verbatim",
        transcript.segments.len(),
        cards.len(),
        relevant.len(),
        by_text.len()
    ))
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("convergence", || Box::pin(convergence())),
        ("threshold-conformance", || Box::pin(thresholds())),
        ("relation-hint-invariants", || Box::pin(relation_fuzz())),
        ("scheduler-timing", || Box::pin(scheduler())),
        ("affinity-exclusivity", || Box::pin(affinity_exclusivity())),
        ("snapshot-round-trip", || Box::pin(snapshots())),
        ("golden-session", || Box::pin(golden())),
        ("speech-pipeline", || Box::pin(speech_pipeline())),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().expect("runtime");
    let mut failed = 0;
    for (name, check) in checks {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match runtime.block_on(check()) {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
