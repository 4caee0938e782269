//! Property tests for the invariants of each stage.

use std::collections::BTreeSet;
use std::time::Instant;

use proptest::prelude::*;
use rigor_core::adapters::{import_from_str, AdapterFormat, AdapterSpec, PositivityRule};
use rigor_core::corpus::{extract_methods_text, methods_section_indices, parse_document, sample_corpus};
use rigor_core::curation::{
    assemble_gold_standard, build_control_set, build_disagreement_queue, CurationLabel, CurationStore, Decision,
    DEFAULT_LINK_TEMPLATE,
};
use rigor_core::detectors::{
    detect_nct_naive, scan_registration_identifiers, Criterion, Detector, OpenCodeDetector, Registry, ToolVerdict,
};
use rigor_core::ensemble::{
    extract_boolean_rule, index_to_bits, minimize, evaluate_terms, parse_rule, EnsembleModel, ModelFamily,
};
use rigor_core::matrix::{merge_into_matrix, RowStatus};
use rigor_core::metrics::{
    adjusted_scores, bland_altman, compare_accuracies, gwet_ac1, ConfusionCounts, RateEstimates,
};

fn counts() -> impl Strategy<Value = ConfusionCounts> {
    (0u64..5000, 0u64..5000, 0u64..5000, 0u64..5000).prop_map(|(tp, fp, fn_, tn)| ConfusionCounts { tp, fp, fn_, tn })
}

fn rates() -> impl Strategy<Value = RateEstimates> {
    (1u64..200, 1u64..200, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(pc, nc, pf, nf)| {
        RateEstimates::from_counts(pc, (pc as f64 * pf).round() as u64, nc, (nc as f64 * nf).round() as u64)
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn adjusted_counts_never_exceed_raw(raw in counts(), r in rates()) {
        let e = adjusted_scores(raw, r);
        prop_assert!(e.adj_tp <= raw.tp as f64);
        prop_assert!(e.adj_fp <= raw.fp as f64);
        prop_assert!(e.adj_fn <= raw.fn_ as f64);
        prop_assert!(e.adj_tn <= raw.tn as f64);
    }

    #[test]
    fn scores_are_scale_free(raw in counts(), r in rates(), c in 1u64..50) {
        let scaled = ConfusionCounts { tp: raw.tp * c, fp: raw.fp * c, fn_: raw.fn_ * c, tn: raw.tn * c };
        let (a, b) = (adjusted_scores(raw, r), adjusted_scores(scaled, r));
        prop_assert!(close(a.accuracy, b.accuracy));
        prop_assert!(close(a.precision, b.precision));
        prop_assert!(close(a.recall, b.recall));
        prop_assert!(close(a.f1, b.f1));
        prop_assert_eq!(a.flags, b.flags);
    }

    #[test]
    fn ac1_bounded_and_symmetric(pairs in prop::collection::vec(any::<(bool, bool)>(), 1..200)) {
        let (x, y): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let a = gwet_ac1(&x, &y).unwrap();
        let b = gwet_ac1(&y, &x).unwrap();
        prop_assert_eq!(a.ac1, b.ac1);
        prop_assert!(a.ac1 <= 1.0);
        prop_assert_eq!(a.ac1 == 1.0, a.pa == 1.0);
        prop_assert!(a.pe < 1.0);
    }

    #[test]
    fn proportion_test_antisymmetric(p1 in 0.01f64..0.99, p2 in 0.01f64..0.99, n1 in 1u64..5000, n2 in 1u64..5000) {
        let a = compare_accuracies(p1, n1, p2, n2).unwrap();
        let b = compare_accuracies(p2, n2, p1, n1).unwrap();
        prop_assert_eq!(a.statistic, -b.statistic);
        prop_assert!(close(a.p_value, b.p_value));
        prop_assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn bland_altman_swap_negates(pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..50)) {
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (b, a)).collect();
        let x = bland_altman(&pairs).unwrap();
        let y = bland_altman(&swapped).unwrap();
        prop_assert!(close(x.mean_diff, -y.mean_diff));
        prop_assert!(close(x.sd_diff, y.sd_diff));
        prop_assert!(x.loa_low <= x.mean_diff && x.mean_diff <= x.loa_high);
    }
}

// Text fragments that mix identifiers, lures and filler.
fn registry_text() -> impl Strategy<Value = String> {
    let pieces = prop::sample::select(vec![
        "NCT04280705",
        "ISRCTN17822126",
        "DRKS00012345",
        "ChiCTR2000029308",
        "CTRI/2018/05/013794",
        "2020-001234-56",
        "ACTRN12618000123456",
        "NTR6817",
        "KCT0003443",
        "NCTC clone 929",
        "grant NCT-2019-44",
        "the trial",
        "was registered",
        "(",
        ")",
        ".",
        ",",
        "NTRK",
    ]);
    prop::collection::vec(pieces, 0..25).prop_map(|v| v.join(" "))
}

proptest! {
    #[test]
    fn scanner_ignores_surrounding_whitespace(text in registry_text(), lead in "[ \t\n]{0,5}", trail in "[ \t\n]{0,5}") {
        let plain: Vec<String> = scan_registration_identifiers(&text).into_iter().map(|h| h.identifier).collect();
        let padded: Vec<String> = scan_registration_identifiers(&format!("{lead}{text}{trail}"))
            .into_iter()
            .map(|h| h.identifier)
            .collect();
        prop_assert_eq!(plain, padded);
    }

    #[test]
    fn scanner_spans_hold_their_identifier(text in registry_text()) {
        let hits = scan_registration_identifiers(&text);
        let mut spans: Vec<(usize, usize)> = hits.iter().map(|h| h.char_span).collect();
        spans.sort();
        for w in spans.windows(2) {
            prop_assert!(w[0].1 <= w[1].0);
        }
        for h in &hits {
            prop_assert!(h.char_span.1 <= text.len());
            prop_assert_eq!(&text[h.char_span.0..h.char_span.1], h.identifier.as_str());
            prop_assert_eq!(Registry::classify(&h.identifier), Some(h.registry));
            if h.registry == Registry::Ctgov {
                prop_assert!(detect_nct_naive(&text));
            }
        }
    }

    #[test]
    fn open_code_positive_has_evidence(words in prop::collection::vec(prop::sample::select(vec![
        "Our", "code", "is", "available", "at", "GitHub", "upon", "request", "We", "used", "software",
        "scripts", "deposited", "in", "Zenodo", "Data", "and", "are", "https://github.com/x/y", "."
    ]), 0..40)) {
        let xml = format!(
            "<article><front><article-meta><article-id pub-id-type=\"pmc\">1</article-id></article-meta></front><body><sec><title>Methods</title><p>{}</p></sec></body></article>",
            words.join(" ")
        );
        let doc = parse_document(&xml).unwrap();
        let v = OpenCodeDetector::default().detect(&doc);
        prop_assert!(!v.present || !v.evidence.is_empty());
        prop_assert!(v.validate().is_ok());
    }
}

fn section_xml() -> impl Strategy<Value = String> {
    let title = prop::sample::select(vec!["Methods", "Results", "Statistical analysis", "Discussion", "Procedures"]);
    let body = "[a-z]{1,8}( [a-z]{1,8}){0,6}";
    let leaf = (title.clone(), body).prop_map(|(t, b)| format!("<sec><title>{t}</title><p>{b}</p></sec>"));
    leaf.prop_recursive(3, 12, 3, move |inner| {
        (title.clone(), prop::collection::vec(inner, 1..3))
            .prop_map(|(t, kids)| format!("<sec><title>{t}</title><p>intro</p>{}</sec>", kids.concat()))
    })
}

proptest! {
    #[test]
    fn parse_is_deterministic_and_methods_come_from_sections(secs in prop::collection::vec(section_xml(), 1..4)) {
        let xml = format!(
            "<article><front><article-meta><article-id pub-id-type=\"pmc\">PMC5</article-id></article-meta></front><body>{}</body></article>",
            secs.concat()
        );
        let a = parse_document(&xml).unwrap();
        let b = parse_document(&xml).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(extract_methods_text(&a), a.methods_text.clone());
        let chosen: Vec<&str> = methods_section_indices(&a).into_iter().map(|i| a.sections[i].text.as_str()).collect();
        for word in a.methods_text.split(' ').filter(|w| !w.is_empty()) {
            prop_assert!(chosen.iter().any(|t| t.split(' ').any(|x| x == word)));
        }
    }

    #[test]
    fn samples_have_no_duplicates(n_cand in 1usize..200, frac in 0.0f64..=1.0, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n_cand).map(|i| format!("PMC{i}")).collect();
        let n = (n_cand as f64 * frac) as usize;
        let s = sample_corpus(&ids, n, seed).unwrap();
        prop_assert_eq!(s.len(), n);
        prop_assert_eq!(s.iter().collect::<BTreeSet<_>>().len(), n);
        prop_assert_eq!(s, sample_corpus(&ids, n, seed).unwrap());
    }
}

proptest! {
    #[test]
    fn raising_a_score_never_flips_true_to_false(scores in prop::collection::vec((0.0f64..1.0, 0.0f64..0.5), 1..30)) {
        let spec = AdapterSpec::new("prerob", AdapterFormat::PrerobCsv, Criterion::Randomization, "randomization")
            .with_id_field("pmcid");
        prop_assert_eq!(spec.positivity_rule.clone(), PositivityRule::Threshold { value: 0.5 });
        let csv = |bump: bool| {
            let mut s = String::from("pmcid,randomization\n");
            for (i, (x, d)) in scores.iter().enumerate() {
                let v = if bump { x + d } else { *x };
                s.push_str(&format!("PMC{i},{v}\n"));
            }
            s
        };
        let before = import_from_str(&spec, &csv(false)).unwrap();
        let after = import_from_str(&spec, &csv(true)).unwrap();
        for (b, a) in before.iter().zip(&after) {
            prop_assert_eq!(&b.pmcid, &a.pmcid);
            prop_assert!(!b.present || a.present);
        }
    }

    #[test]
    fn reexported_verdicts_rebuild_the_same_matrix(rows in prop::collection::vec((0usize..20, prop::option::of(any::<bool>()), prop::option::of(any::<bool>())), 1..20)) {
        let mut verdicts = Vec::new();
        let mut seen = BTreeSet::new();
        for (p, a, b) in rows {
            if !seen.insert(p) {
                continue;
            }
            for (tool, cell) in [("alpha", a), ("beta", b)] {
                if let Some(present) = cell {
                    let mut v = ToolVerdict::new(&format!("PMC{p}"), tool, Criterion::Blinding, present);
                    if present {
                        v.evidence = vec![format!("Sentence from {tool} on {p}.")];
                    }
                    verdicts.push(v);
                }
            }
        }
        prop_assume!(!verdicts.is_empty());
        let m = merge_into_matrix(&verdicts, Criterion::Blinding).unwrap();
        let ndjson: String = m.to_verdicts().iter().map(|v| serde_json::to_string(v).unwrap() + "\n").collect();
        let back: Vec<ToolVerdict> = ndjson.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        prop_assert_eq!(merge_into_matrix(&back, Criterion::Blinding).unwrap(), m);
    }
}

fn model_strategy() -> impl Strategy<Value = EnsembleModel> {
    (1usize..=10).prop_flat_map(|k| {
        (prop::collection::vec(-3.0f64..3.0, k), -3.0f64..3.0).prop_map(move |(weights, bias)| EnsembleModel {
            tool_order: (0..k).map(|i| format!("T{i}")).collect(),
            weights,
            bias,
            family: ModelFamily::Logistic,
            threshold: 0.5,
            warning: None,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rendered_rule_matches_predictions(model in model_strategy()) {
        let k = model.tool_order.len();
        let rule = extract_boolean_rule(&model).unwrap();
        let parsed = parse_rule(&rule.expression, &model.tool_order).unwrap();
        for idx in 0..(1u32 << k) {
            let bits = index_to_bits(idx, k);
            let p = model.predict(&bits).unwrap();
            prop_assert_eq!(rule.evaluate(&bits).unwrap(), p);
            prop_assert_eq!(parsed[idx as usize], p);
        }
    }

    #[test]
    fn minimized_cover_reproduces_table(k in 1usize..=6, seed in any::<u64>()) {
        let table: Vec<bool> = (0..(1u64 << k)).map(|i| (seed.rotate_left(i as u32) ^ (i * 0x9e37)) & 1 == 1).collect();
        let terms = minimize(&table, k).unwrap();
        for (i, &t) in table.iter().enumerate() {
            prop_assert_eq!(evaluate_terms(&terms, i as u32), t);
        }
    }
}

const TOOLS: [&str; 3] = ["SciScore", "Barzooka", "ODDPub"];

fn curation_matrix() -> impl Strategy<Value = Vec<ToolVerdict>> {
    prop::collection::vec(
        (prop::collection::vec(prop::option::weighted(0.9, any::<bool>()), 3), any::<u8>()),
        2..40,
    )
    .prop_map(|rows| {
        let mut out = Vec::new();
        for (p, (cells, mix)) in rows.into_iter().enumerate() {
            for (j, cell) in cells.into_iter().enumerate() {
                if let Some(present) = cell {
                    let tool = TOOLS[j];
                    let mut v = ToolVerdict::new(&format!("PMC{}", 100 + p), tool, Criterion::Blinding, present);
                    if present {
                        // Tools sometimes echo their own or another tool's name.
                        let named = TOOLS[(mix as usize + j) % TOOLS.len()];
                        v.evidence = vec![format!("Outcome assessors were blinded ({}).", named.to_uppercase())];
                    }
                    out.push(v);
                }
            }
        }
        out
    })
}

fn all_tool_names() -> Vec<String> {
    TOOLS.iter().map(|t| t.to_lowercase()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queued_items_never_name_a_tool(verdicts in curation_matrix(), seed in any::<u64>()) {
        let m = merge_into_matrix(&verdicts, Criterion::Blinding).unwrap();
        prop_assume!(m.tools.len() >= 2);
        let queue = build_disagreement_queue(&m, seed, DEFAULT_LINK_TEMPLATE).unwrap();
        let exclude: BTreeSet<String> = queue.iter().map(|i| i.pmcid.clone()).collect();
        let controls = build_control_set(&m, &exclude, seed, 10, DEFAULT_LINK_TEMPLATE);
        for item in queue.iter().chain(&controls.items) {
            let bytes = serde_json::to_string(item).unwrap().to_lowercase();
            for t in all_tool_names() {
                prop_assert!(!bytes.contains(&t), "{} leaked in {}", t, bytes);
            }
        }
        for c in &controls.items {
            prop_assert!(!exclude.contains(&c.pmcid));
            prop_assert!(matches!(m.status_of(&c.pmcid), Some(RowStatus::Unanimous(_))));
        }
        prop_assert_eq!(queue, build_disagreement_queue(&m, seed, DEFAULT_LINK_TEMPLATE).unwrap());
        prop_assert_eq!(controls, build_control_set(&m, &exclude, seed, 10, DEFAULT_LINK_TEMPLATE));
    }

    #[test]
    fn every_paper_lands_in_one_bucket(verdicts in curation_matrix(), decisions in prop::collection::vec(0u8..3, 80)) {
        let m = merge_into_matrix(&verdicts, Criterion::Blinding).unwrap();
        prop_assume!(m.tools.len() >= 2);
        let queue = build_disagreement_queue(&m, 1, DEFAULT_LINK_TEMPLATE).unwrap();
        let mut store = CurationStore::new();
        store.add_items(queue);
        let now = Instant::now();
        let decide = |i: usize| match decisions[i % decisions.len()] {
            0 => Decision::Yes,
            1 => Decision::No,
            _ => Decision::Complicated,
        };
        let mut i = 0;
        loop {
            let open = store.open_items(Criterion::Blinding);
            let Some(id) = open.first() else { break };
            let label = CurationLabel {
                item_id: id.clone(),
                decision: decide(i),
                notes: String::new(),
                notes_2: String::new(),
                curator: "c1".into(),
                timestamp: "2026-01-01T00:00:00Z".into(),
            };
            store.record_label(label, now).unwrap();
            i += 1;
        }
        let gold = assemble_gold_standard(&m, &store).unwrap();
        let mut buckets: Vec<&str> = gold.labels.iter().map(|g| g.pmcid.as_str()).collect();
        buckets.extend(gold.excluded_complicated.iter().map(String::as_str));
        buckets.extend(gold.excluded_absent.iter().map(String::as_str));
        buckets.sort_unstable();
        let papers: Vec<&str> = m.papers.iter().map(String::as_str).collect();
        prop_assert_eq!(buckets, papers);
        for g in &gold.labels {
            if let Some(RowStatus::Unanimous(v)) = m.status_of(&g.pmcid) {
                prop_assert_eq!(g.truth, v);
            }
        }
    }
}
