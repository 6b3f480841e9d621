mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use common::{config, corpus, run_mock, run_with};
use garment_edit::backends::{
    BackendReply, GraphShape, HttpTransport, MockConfig, MockTransport, Role, TransportError, VirtualClock, VqaPolicy,
};
use garment_edit::pipeline::{
    compute_stats, load_corpus, Manifest, Pipeline, PipelineError, Stage, MANIFEST_FILE, RUN_SUMMARY_FILE,
};
use garment_edit::score::Decision;
use garment_edit::synthesis::EditCategory;

#[test]
fn mock_run_scores_every_task_and_rerun_is_free() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 2);
    let out = dir.path().join("out");
    let (first, summary, transport) = run_mock(config(&out, 11), &images);
    assert_eq!(first.records.len(), 12);
    assert!(first.records.iter().all(|r| r.stage == Stage::Scored && r.check().is_ok()));
    let counters = first.counters();
    assert_eq!(counters.values().map(|c| c.attempted).sum::<usize>(), 12);
    for c in counters.values() {
        assert_eq!(c.attempted, c.kept + c.dropped + c.parked);
    }
    assert!(transport.calls() > 0);
    assert_eq!(summary.backend_attempts, transport.calls() as u64);
    assert!(first.inconsistent_decisions(&garment_edit::score::Weights::default()).is_empty());

    let (second, summary2, transport2) = run_mock(config(&out, 11), &images);
    assert_eq!(transport2.calls(), 0);
    assert_eq!(summary2.backend_attempts, 0);
    assert!(summary2.cache_hits > 0);
    assert_eq!(second.digest(), first.digest());
    assert_eq!(Manifest::read(&out).unwrap().digest(), first.digest());
    assert!(out.join(RUN_SUMMARY_FILE).is_file());
    assert!(!out.join("manifest.partial.jsonl").exists());
}

#[test]
fn same_seed_gives_same_transcript_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 2);
    let (a, _, ta) = run_mock(config(&dir.path().join("a"), 3), &images);
    let (b, _, tb) = run_mock(config(&dir.path().join("b"), 3), &images);
    assert_eq!(ta.transcript(), tb.transcript());
    assert_eq!(a.digest(), b.digest());
    ta.write_transcript(&dir.path().join("ta.jsonl")).unwrap();
    tb.write_transcript(&dir.path().join("tb.jsonl")).unwrap();
    assert_eq!(
        std::fs::read(dir.path().join("ta.jsonl")).unwrap(),
        std::fs::read(dir.path().join("tb.jsonl")).unwrap()
    );
    let (c, _, _) = run_mock(config(&dir.path().join("c"), 4), &images);
    assert_ne!(a.digest(), c.digest());
}

#[test]
fn icq_only_answers_drop_single_icq_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 1);
    let transport = Arc::new(MockTransport::new(0).with_config(MockConfig {
        vqa: VqaPolicy::IcqOnly,
        graph_shape: GraphShape::IcqCpq,
        ..MockConfig::default()
    }));
    let (m, _) = run_with(config(&dir.path().join("out"), 0), transport, &images, Stage::Scored);
    assert_eq!(m.records.len(), 6);
    for r in &m.records {
        assert_eq!(r.score, Some(0.75));
        assert_eq!(r.decision, Some(Decision::Drop));
    }
    let stats = compute_stats(&m, 30).unwrap();
    assert_eq!((stats.kept, stats.dropped), (0, 6));
}

#[test]
fn interrupted_run_resumes_to_the_same_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 2);
    let (reference, _, _) = run_mock(config(&dir.path().join("ref"), 9), &images);

    let out = dir.path().join("out");
    let mut cfg = config(&out, 9);
    cfg.run.workers = 1;
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    let seen = Arc::new(AtomicUsize::new(0));
    let counter = seen.clone();
    let transport = Arc::new(MockTransport::new(9).with_override(move |_| {
        if counter.fetch_add(1, Ordering::SeqCst) == 10 {
            flag.store(true, Ordering::SeqCst);
        }
        None
    }));
    let pipeline =
        Pipeline::new(cfg.clone(), transport, Arc::new(VirtualClock::new())).unwrap().with_cancel_flag(cancel);
    let (partial, summary) = pipeline.run(&images, Stage::Scored).unwrap();
    assert!(summary.cancelled);
    assert!(partial.records.iter().any(|r| r.stage < Stage::Scored));
    assert!(partial.records.iter().all(|r| r.failures.is_empty() && r.check().is_ok()));

    let (resumed, summary, transport) = run_mock(cfg, &images);
    assert!(!summary.cancelled);
    assert!(summary.cache_hits > 0);
    assert!(transport.calls() > 0);
    assert_eq!(resumed.digest(), reference.digest());
}

#[test]
fn failures_park_records_without_aborting() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 1);
    let transport = Arc::new(MockTransport::new(1).with_override(|req| {
        let field = |k: &str| req.fields.get(k).map(String::as_str);
        match (req.role, field("task"), field("category")) {
            (Role::StructuredText, Some("triplet"), Some("object_removal")) => {
                Some(Ok(BackendReply::Text("not json at all".into())))
            }
            (Role::Vqa, _, _) if req.prompt.contains("fine details") => Some(Err(TransportError::Timeout)),
            _ => None,
        }
    }));
    let mut cfg = config(&dir.path().join("out"), 1);
    cfg.backends.vqa.max_retries = 2;
    let (m, _) = run_with(cfg, transport.clone(), &images, Stage::Scored);
    assert_eq!(m.records.len(), 6);
    let removal = m.records.iter().find(|r| r.category == EditCategory::ObjectRemoval).unwrap();
    assert_eq!(removal.stage, Stage::Pending);
    assert_eq!(removal.failures[0].stage, Stage::Synthesized);
    assert_eq!(removal.failures[0].raw_reply.as_deref(), Some("not json at all"));
    for r in m.records.iter().filter(|r| r.category != EditCategory::ObjectRemoval) {
        assert_eq!(r.stage, Stage::GraphBuilt, "{}", r.sample_id);
        assert!(r.answers.is_none() && r.report.is_none());
        assert_eq!(r.failures.len(), 1);
        assert_eq!(r.failures[0].stage, Stage::Answered);
        assert!(r.failures[0].error.contains("q3"), "{}", r.failures[0].error);
    }
    let counters = m.counters();
    assert!(counters.values().all(|c| c.parked == c.attempted));
    // three attempts per timed-out question: one plus two retries
    assert!(transport.transcript().iter().filter(|e| e.role == Role::Vqa && e.source == "override").count() >= 3 * 5);
}

#[test]
fn template_change_recomputes_only_dependent_stages() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 2);
    let out = dir.path().join("out");
    let (base, _, _) = run_mock(config(&out, 2), &images);

    let templates = dir.path().join("templates");
    std::fs::create_dir_all(&templates).unwrap();
    let builtin = garment_edit::synthesis::TemplateSet::default();
    let color = builtin.category(EditCategory::ColorAlteration).content().to_string();
    std::fs::write(templates.join("color_alteration.txt"), format!("{color}\nKeep the garment recognisable.\n"))
        .unwrap();
    let mut cfg = config(&out, 2);
    cfg.synthesis.templates_dir = Some(templates.clone());
    let (changed, _, transport) = run_mock(cfg.clone(), &images);
    assert_eq!(transport.calls_for(Role::StructuredText), 2 + 2);
    assert_eq!(transport.calls_for(Role::ImageEdit), 2);
    let color_questions: usize = changed
        .records
        .iter()
        .filter(|r| r.category == EditCategory::ColorAlteration)
        .map(|r| r.graph.as_ref().unwrap().len())
        .sum();
    assert_eq!(transport.calls_for(Role::Vqa), color_questions);
    for (a, b) in base.records.iter().zip(&changed.records) {
        if a.category != EditCategory::ColorAlteration {
            assert_eq!(a, b);
        }
    }

    std::fs::write(templates.join("extraction.txt"), format!("{}\n\n", builtin.extraction().content())).unwrap();
    let (_, _, transport) = run_mock(cfg, &images);
    assert_eq!(transport.calls_for(Role::StructuredText), 12);
    assert_eq!(transport.calls_for(Role::ImageEdit), 0);
}

#[test]
fn stage_limited_run_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 1);
    let transport = Arc::new(MockTransport::new(0));
    let (m, s) = run_with(config(&dir.path().join("out"), 0), transport.clone(), &images, Stage::ImageEdited);
    assert!(m.records.iter().all(|r| r.stage == Stage::ImageEdited && r.graph.is_none()));
    assert_eq!(transport.calls_for(Role::Vqa), 0);
    assert!(s.counters.values().all(|c| c.pending == c.attempted));
}

#[test]
fn corpus_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    std::fs::write(empty.join("notes.txt"), "x").unwrap();
    assert!(matches!(load_corpus(&empty), Err(PipelineError::CorpusEmpty(_))));

    let small = dir.path().join("small");
    std::fs::create_dir_all(&small).unwrap();
    std::fs::write(small.join("a.png"), common::png(256, 1)).unwrap();
    let files = load_corpus(&small).unwrap();
    let p = Pipeline::new(
        config(&dir.path().join("out"), 0),
        Arc::new(MockTransport::new(0)),
        Arc::new(VirtualClock::new()),
    )
    .unwrap();
    let err = p.run(&files, Stage::Scored).unwrap_err();
    assert!(matches!(err, PipelineError::Corpus(ref m) if m.contains("256x256")), "{err}");
    assert!(matches!(p.run(&[], Stage::Scored), Err(PipelineError::CorpusEmpty(_))));
}

#[test]
fn credentials_never_reach_outputs() {
    const SECRET: &str = "sk-test-7f3a9c1e55d04b2a";
    let var = "GARMENT_EDIT_PIPELINE_TEST_TOKEN";
    // SAFETY: no other test reads or writes this variable
    unsafe { std::env::set_var(var, SECRET) };
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut auth = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap() == 0 || line == "\r\n" {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if lower.starts_with("authorization:") {
                    auth = line.trim().to_string();
                }
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let reply = format!("denied for {auth}");
            let _ = write!(
                stream,
                "HTTP/1.1 403 Forbidden\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });

    let dir = tempfile::tempdir().unwrap();
    let images = corpus(dir.path(), 1);
    let out = dir.path().join("out");
    let mut cfg = config(&out, 0);
    for e in [&mut cfg.backends.structured_text, &mut cfg.backends.image_edit, &mut cfg.backends.vqa] {
        e.base_url = Some(url.clone());
        e.auth_token_env = Some(var.into());
    }
    let p = Pipeline::new(cfg, Arc::new(HttpTransport::new()), Arc::new(VirtualClock::new())).unwrap();
    let (m, _) = p.run(&images, Stage::Scored).unwrap();
    assert!(m.records.iter().all(|r| r.stage == Stage::Pending && r.failures.len() == 1));
    assert!(m.records[0].failures[0].error.contains("403"), "{}", m.records[0].failures[0].error);
    for entry in walk(&out) {
        let bytes = std::fs::read(&entry).unwrap();
        assert!(!String::from_utf8_lossy(&bytes).contains(SECRET), "{} leaks the credential", entry.display());
    }
    assert!(out.join(MANIFEST_FILE).is_file());
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}
