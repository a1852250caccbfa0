//! Module invariants as property tests.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use proptest::prelude::*;
use synthgov_core::anonymizer::{gendiag, verify_km_anonymity, Action, AnonymizationParams, RecordCluster, UtilityConstraintSet};
use synthgov_core::gateway::{
    parse_response, run_batch, BackendFailure, BatchConfig, CompletionBackend, CompletionRequest, Dispatcher,
    RawResponse, RetryPolicy, StubBackend, StubSpec,
};
use synthgov_core::governance::{
    classify_risk, pillar_scorecard, AuditLog, ControlChecks, RuleTable, RunStats, Sector, UseCaseDescriptor,
};
use synthgov_core::metrics::{
    chi_square, entropy_of, heatmap, jaccard_weighted, mutual_information, nmi, DistributionKind, JointDistribution,
    MetricReport, ResponseDistribution,
};
use synthgov_core::profile::{
    check_minimization, render_with_provenance, Profile, ProfileSchema, PromptBundle, PromptTemplate, Question,
    QuestionBank, LIKERT_5,
};
use synthgov_core::survey::{
    impute_invalid, read_survey, remove_outliers, standardize, write_survey, CategoricalDistribution, MissingCode,
    SurveyDataset, Value, VariableKind, VariableSchema,
};

const CATS: [&str; 4] = ["w", "x", "y", "z"];

fn schema() -> Vec<VariableSchema> {
    vec![
        VariableSchema::new("first", &CATS, VariableKind::Demographic),
        VariableSchema::new("second", &CATS[..3], VariableKind::Opinion),
    ]
}

fn cell() -> impl Strategy<Value = Value> {
    prop_oneof![
        6 => (0usize..3).prop_map(Value::Category),
        1 => prop::sample::select(MissingCode::ALL.to_vec()).prop_map(Value::Missing),
    ]
}

fn dataset() -> impl Strategy<Value = SurveyDataset> {
    prop::collection::vec((cell(), cell()), 1..40).prop_map(|rows| {
        let records = rows.into_iter().map(|(a, b)| vec![a, b]).collect();
        SurveyDataset::new(schema(), records, "prop").unwrap()
    })
}

fn valid_multiset(ds: &SurveyDataset, col: usize) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = ds
        .records
        .iter()
        .enumerate()
        .filter_map(|(r, row)| match row[col] {
            Value::Category(c) => Some((r, c)),
            Value::Missing(_) => None,
        })
        .collect();
    v.sort();
    v
}

fn counts(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..50, n).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn scale_question(n: usize) -> Question {
    Question { id: "q".into(), text: "q?".into(), scale: (0..n).map(|i| format!("c{i}")).collect() }
}

fn dist(q: &Question, v: &[f64], kind: DistributionKind) -> ResponseDistribution {
    ResponseDistribution::new(q, q.scale.iter().cloned().zip(v.iter().copied()), kind).unwrap()
}

fn joint() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..6, 2usize..6)
        .prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0u32..20, c), r))
        .prop_filter_map("empty joint", |raw| {
            let total: u32 = raw.iter().flatten().sum();
            (total > 0).then(|| {
                raw.iter().map(|row| row.iter().map(|&x| f64::from(x) / f64::from(total)).collect()).collect()
            })
        })
}

fn cluster_instance() -> impl Strategy<Value = (RecordCluster, UtilityConstraintSet, AnonymizationParams)> {
    (1usize..=8, 1usize..=3, 1usize..=4, 1usize..=2).prop_flat_map(|(u, g, k, m)| {
        let universe: Vec<String> = (0..u).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
        let groups = prop::collection::vec(0..=g, u);
        let records = prop::collection::vec(prop::collection::vec(any::<bool>(), u), 0..=30);
        (Just(universe), groups, records, Just(g), Just(k), Just(m))
    })
    .prop_map(|(universe, slots, records, g, k, m)| {
        let mut groups = vec![BTreeSet::new(); g];
        for (code, &slot) in universe.iter().zip(&slots) {
            if slot < g {
                groups[slot].insert(code.clone());
            }
        }
        groups.retain(|s: &BTreeSet<String>| !s.is_empty());
        let labels: Vec<Vec<String>> = records
            .iter()
            .map(|bits| universe.iter().zip(bits).filter(|(_, &b)| b).map(|(c, _)| c.clone()).collect())
            .collect();
        (
            RecordCluster::from_labels(&labels, Some(&universe)).unwrap(),
            UtilityConstraintSet::new(groups).unwrap(),
            AnonymizationParams::new(k, m).unwrap(),
        )
    })
}

fn likert_question(id: &str) -> Question {
    Question { id: id.into(), text: format!("About {id}?"), scale: LIKERT_5.iter().map(|s| s.to_string()).collect() }
}

fn profile(values: [usize; 4]) -> Profile {
    let vars = ["age", "qualification", "ethnicity", "job"];
    Profile {
        assignment: vars.iter().zip(values).map(|(v, i)| (v.to_string(), format!("{v}-option-{i}"))).collect(),
    }
}

fn bundles(profiles: &[[usize; 4]], seed: u64) -> Vec<PromptBundle> {
    let bank = QuestionBank::table2_default();
    let template = PromptTemplate::survey_default();
    let mut out = Vec::new();
    for (p, values) in profiles.iter().enumerate() {
        for (qi, q) in bank.questions.iter().take(3).enumerate() {
            out.push(render_with_provenance(&profile(*values), q, &template, seed, (p * 3 + qi) as u64).unwrap());
        }
    }
    out
}

fn stub(seed: u64) -> StubBackend {
    let bank = QuestionBank::table2_default();
    let per_question = bank
        .questions
        .iter()
        .map(|q| {
            let weights = q.scale.iter().enumerate().map(|(i, c)| (c.as_str(), 1.0 + i as f64));
            (q.id.clone(), CategoricalDistribution::from_weights(&q.id, weights).unwrap())
        })
        .collect();
    StubBackend::new(StubSpec { per_question, seed }).unwrap()
}

/// Fails every request whose ordinal is in `failing`.
struct Flaky {
    failing: BTreeSet<u64>,
}

impl CompletionBackend for Flaky {
    fn backend_id(&self) -> &str {
        "flaky"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendFailure> {
        if self.failing.contains(&request.bundle.provenance.ordinal) {
            Err(BackendFailure::Unavailable("down".into()))
        } else {
            Ok("tend to agree".into())
        }
    }
}

fn descriptor() -> impl Strategy<Value = UseCaseDescriptor> {
    let sectors = vec![
        Sector::Healthcare,
        Sector::LawEnforcement,
        Sector::Finance,
        Sector::Education,
        Sector::Retail,
        Sector::Research,
        Sector::Other,
    ];
    (prop::sample::select(sectors), any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(
        |(sector, a, s, o, p)| UseCaseDescriptor {
            sector,
            automated_decision_affecting_rights: a,
            mass_surveillance_capability: s,
            human_oversight_declared: o,
            personal_data_processed: p,
        },
    )
}

fn report(id: usize, nmi: f64, jaccard: f64) -> MetricReport {
    MetricReport {
        question_id: format!("q{id}"),
        chi_square: 0.0,
        jaccard,
        nmi,
        n_observed: 10,
        n_expected: 10,
        unparseable: 0,
        jaccard_bucketed: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn imputation_keeps_valid_entries(ds in dataset(), seed in any::<u64>()) {
        prop_assume!(!valid_multiset(&ds, 0).is_empty());
        let out = impute_invalid(&ds, "first", seed).unwrap();
        for (before, after) in ds.records.iter().zip(&out.records) {
            if let Value::Category(_) = before[0] {
                prop_assert_eq!(before[0], after[0]);
            }
        }
        prop_assert!(out.records.iter().all(|row| matches!(row[0], Value::Category(_))));
        prop_assert_eq!(valid_multiset(&out, 1), valid_multiset(&ds, 1));
    }

    #[test]
    fn outlier_removal_support_excludes_dropped(raw in dataset(), share in 0.0f64..0.5, seed in any::<u64>()) {
        prop_assume!(!valid_multiset(&raw, 0).is_empty());
        let ds = impute_invalid(&raw, "first", seed).unwrap();
        // Dropping every category is a typed error, not an empty dataset.
        let Ok(removal) = remove_outliers(&ds, "first", share) else { return Ok(()) };
        let Ok(after) = standardize(&removal.dataset, "first") else { return Ok(()) };
        let before: BTreeSet<String> = match standardize(&ds, "first") {
            Ok(d) => d.mass.keys().cloned().collect(),
            Err(_) => return Ok(()),
        };
        let kept: BTreeSet<String> = after.mass.keys().cloned().collect();
        let dropped: BTreeSet<String> = removal.dropped_categories.iter().cloned().collect();
        prop_assert_eq!(before.difference(&dropped).cloned().collect::<BTreeSet<_>>(), kept);
    }

    #[test]
    fn written_survey_reads_back_identically(ds in dataset()) {
        let mut buf = Vec::new();
        write_survey(&ds, &mut buf).unwrap();
        let back = read_survey(buf.as_slice(), &ds.schema, "prop").unwrap();
        prop_assert_eq!(back.records, ds.records);
    }

    #[test]
    fn gendiag_invariants((cluster, constraints, params) in cluster_instance()) {
        let out = gendiag(&cluster, &constraints, &params).unwrap();
        prop_assert!(verify_km_anonymity(&out.cluster, &params));
        let traced: usize = out.trace.iter().map(|a| match a { Action::Suppress { leaves, .. } => *leaves, _ => 0 }).sum();
        prop_assert_eq!(traced, out.suppressed);
        for code in out.cluster.records.iter().flatten().filter(|c| c.is_generalized()) {
            let owners = constraints.constraints.iter().filter(|g| code.leaves().all(|l| g.contains(l))).count();
            prop_assert_eq!(owners, 1);
        }
        let again = gendiag(&out.cluster, &constraints, &params).unwrap();
        prop_assert_eq!(&again.cluster, &out.cluster);
        prop_assert_eq!(again.suppressed, 0);
        prop_assert_eq!(gendiag(&cluster, &constraints, &params).unwrap().trace, out.trace);
    }

    #[test]
    fn rendering_is_injective_and_complete(a in prop::array::uniform4(0usize..5), b in prop::array::uniform4(0usize..5)) {
        let template = PromptTemplate::survey_default();
        let q = likert_question("pollution");
        let ra = render_with_provenance(&profile(a), &q, &template, 1, 0).unwrap();
        let rb = render_with_provenance(&profile(b), &q, &template, 1, 0).unwrap();
        prop_assert_eq!(a == b, ra.rendered == rb.rendered);
        let schema = ProfileSchema::from_survey(
            &["age", "qualification", "ethnicity", "job"]
                .iter()
                .map(|v| VariableSchema::new(*v, &["p", "q"], VariableKind::Demographic))
                .collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!(check_minimization(&schema, &template).is_empty());
        for value in profile(a).assignment.values() {
            prop_assert!(ra.rendered.contains(value.as_str()));
        }
    }

    #[test]
    fn stub_batches_are_deterministic_and_ordered(
        profiles in prop::collection::vec(prop::array::uniform4(0usize..3), 1..8),
        seed in any::<u64>(),
        workers in 1usize..6,
    ) {
        let bs = bundles(&profiles, 9);
        let serial = run_batch(&bs, &Dispatcher::new(Arc::new(stub(seed))), &BatchConfig { concurrency: 1, ..BatchConfig::default() });
        let parallel = run_batch(&bs, &Dispatcher::new(Arc::new(stub(seed))), &BatchConfig { concurrency: workers, ..BatchConfig::default() });
        prop_assert_eq!(&serial, &parallel);
        for (o, b) in serial.iter().zip(&bs) {
            prop_assert_eq!(o.ordinal, b.provenance.ordinal);
            prop_assert_eq!(&o.question_id, &b.question.id);
            prop_assert_eq!(&o.fingerprint, &b.fingerprint());
        }
    }

    #[test]
    fn every_request_is_audited_including_failures(
        profiles in prop::collection::vec(prop::array::uniform4(0usize..3), 1..6),
        failing in prop::collection::btree_set(0u64..18, 0..10),
    ) {
        let bs = bundles(&profiles, 2);
        let log = Arc::new(Mutex::new(AuditLog::new()));
        let retry = RetryPolicy { max_attempts: 2, base_delay_ms: 0, max_delay_ms: 0 };
        let dispatcher = Dispatcher::new(Arc::new(Flaky { failing: failing.clone() })).with_retry(retry).with_audit(log.clone(), "prop");
        let out = run_batch(&bs, &dispatcher, &BatchConfig { concurrency: 3, ..BatchConfig::default() });
        let log = log.lock().unwrap();
        prop_assert_eq!(log.len(), bs.len());
        log.verify().unwrap();
        let failed = out.iter().filter(|o| o.error.is_some()).count();
        prop_assert_eq!(failed, bs.iter().filter(|b| failing.contains(&b.provenance.ordinal)).count());
    }

    #[test]
    fn parsing_is_total(text in ".{0,60}", max_words in 1usize..8) {
        let q = likert_question("q");
        let raw = RawResponse { text, latency: Duration::ZERO, backend_id: "t".into(), request_fingerprint: "f".into() };
        let o = parse_response(&raw, &q, max_words);
        if let Some(c) = &o.category {
            prop_assert!(q.scale.contains(c));
        }
    }

    #[test]
    fn chi_square_nonnegative_and_zero_on_scaled_expected(o in counts(5), scale in 0.1f64..10.0) {
        let q = scale_question(5);
        prop_assume!(o.iter().sum::<f64>() > 0.0);
        let exp: Vec<f64> = o.iter().map(|x| x * scale + 1.0).collect();
        prop_assert!(chi_square(&dist(&q, &o, DistributionKind::Observed), &dist(&q, &exp, DistributionKind::Expected)).unwrap() >= 0.0);
        let pos: Vec<f64> = o.iter().map(|x| x + 1.0).collect();
        let scaled: Vec<f64> = pos.iter().map(|x| x * scale).collect();
        let chi = chi_square(&dist(&q, &pos, DistributionKind::Observed), &dist(&q, &scaled, DistributionKind::Expected)).unwrap();
        prop_assert!(chi.abs() < 1e-9);
    }

    #[test]
    fn nmi_symmetric_and_bounded(j in joint()) {
        let joint = JointDistribution::from_matrix(j).unwrap();
        if let Ok(v) = nmi(&joint) {
            prop_assert!((0.0..=1.0).contains(&v));
            prop_assert!((nmi(&joint.transpose()).unwrap() - v).abs() < 1e-12);
        }
    }

    #[test]
    fn permutation_joint_has_unit_nmi(perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle(), w in prop::collection::vec(1u32..20, 5)) {
        let total: u32 = w.iter().sum();
        let mut m = vec![vec![0.0; 5]; 5];
        for (i, &p) in perm.iter().enumerate() {
            m[i][p] = f64::from(w[i]) / f64::from(total);
        }
        let marginal: Vec<f64> = w.iter().map(|&x| f64::from(x) / f64::from(total)).collect();
        let joint = JointDistribution::from_matrix(m).unwrap();
        prop_assert!((nmi(&joint).unwrap() - 1.0).abs() < 1e-9);
        prop_assert!((mutual_information(&joint) - entropy_of(&marginal)).abs() < 1e-9);
    }

    #[test]
    fn jaccard_symmetric_unit_iff_identical(a in counts(4), b in counts(4)) {
        prop_assume!(a.iter().sum::<f64>() > 0.0 && b.iter().sum::<f64>() > 0.0);
        let q = scale_question(4);
        let (da, db) = (dist(&q, &a, DistributionKind::Observed), dist(&q, &b, DistributionKind::Expected));
        let ab = jaccard_weighted(&da, &db);
        prop_assert!((ab - jaccard_weighted(&db, &da)).abs() < 1e-15);
        let identical = (0..4).all(|i| (da.probability(&q.scale[i]) - db.probability(&q.scale[i])).abs() < 1e-12);
        prop_assert_eq!(identical, (ab - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jaccard_shrinks_as_mass_leaves_the_overlap(p in counts(4), from in 0usize..4, to in 0usize..4, step in 0.0f64..1.0) {
        let total: f64 = p.iter().sum();
        prop_assume!(total > 0.0 && from != to && p[from] > 0.0);
        let q = scale_question(4);
        let reference = dist(&q, &p, DistributionKind::Expected);
        let mut moved = p.clone();
        let amount = p[from] * step;
        moved[from] -= amount;
        moved[to] += amount;
        let mut further = moved.clone();
        further[from] -= moved[from] * 0.5;
        further[to] += moved[from] * 0.5;
        let j1 = jaccard_weighted(&dist(&q, &moved, DistributionKind::Observed), &reference);
        let j2 = jaccard_weighted(&dist(&q, &further, DistributionKind::Observed), &reference);
        prop_assert!(j2 <= j1 + 1e-12);
    }

    #[test]
    fn heatmap_rows_are_distributions_or_flagged(answers in prop::collection::vec((0usize..3, proptest::option::of(0usize..5)), 0..40)) {
        let q = likert_question("q");
        let rows: Vec<String> = (0..3).map(|i| format!("r{i}")).collect();
        let mut outcomes = Vec::new();
        let mut profiles = Vec::new();
        for (i, (r, c)) in answers.iter().enumerate() {
            outcomes.push(synthgov_core::gateway::CategoryOutcome {
                question_id: "q".into(),
                category: c.map(|c| q.scale[c].clone()),
                word_count: 1,
                over_limit: false,
                fingerprint: i.to_string(),
                ordinal: i as u64,
                text: String::new(),
                error: None,
            });
            profiles.push(Profile { assignment: [("v".to_string(), rows[*r].clone())].into_iter().collect() });
        }
        let h = heatmap(&outcomes, &profiles, &q, "v", &rows).unwrap();
        for (name, row) in h.rows.iter().zip(&h.cells) {
            let sum: f64 = row.iter().sum();
            if h.empty_rows.contains(name) {
                prop_assert_eq!(sum, 0.0);
            } else {
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn risk_classification_is_deterministic(d in descriptor()) {
        let table = RuleTable::default();
        prop_assert_eq!(classify_risk(&d, &table).unwrap(), classify_risk(&d, &table).unwrap());
    }

    #[test]
    fn scorecard_is_monotone(
        base in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 1..10),
        idx in any::<prop::sample::Index>(),
        bump in 0.0f64..1.0,
    ) {
        let reports: Vec<MetricReport> = base.iter().enumerate().map(|(i, &(n, j))| report(i, n, j)).collect();
        let i = idx.index(reports.len());
        let mut better = reports.clone();
        better[i].nmi = (better[i].nmi + bump).min(1.0);
        better[i].jaccard = (better[i].jaccard + bump).min(1.0);
        let a = pillar_scorecard(&reports, ControlChecks::default(), RunStats::default()).unwrap();
        let b = pillar_scorecard(&better, ControlChecks::default(), RunStats::default()).unwrap();
        prop_assert!(b.ethics >= a.ethics);
        prop_assert!(b.desirability >= a.desirability);
    }

    #[test]
    fn any_single_bit_flip_breaks_the_audit_chain(entries in 1usize..12, pick in any::<prop::sample::Index>(), bit in 0u8..8) {
        let mut log = AuditLog::new();
        for n in 0..entries {
            log.append_at("2026-01-01T00:00:00Z", "stage", "prop", &BTreeMap::from([("n", n)])).unwrap();
        }
        let mut bytes = log.to_jsonl().into_bytes();
        let positions: Vec<usize> = (0..bytes.len()).filter(|&i| bytes[i] != b'\n').collect();
        let at = positions[pick.index(positions.len())];
        bytes[at] ^= 1 << bit;
        let detected = match String::from_utf8(bytes) {
            Err(_) => true,
            Ok(text) => match AuditLog::parse_jsonl(&text) {
                Err(_) => true,
                Ok(parsed) => parsed.verify().is_err() || parsed.entries() != log.entries(),
            },
        };
        prop_assert!(detected);
    }
}
