use std::collections::BTreeSet;

use lambda_nli::corpus::{source, Label, NliExample};
use lambda_nli::datagen::{folded_multiset, generate, Dataset, GenConfig, GenInputs, Generated, ResourcePaths, Split, SplitCounts};
use lambda_nli::ner::{Gazetteer, NerCategory};
use proptest::prelude::*;

fn small(seed: u64) -> GenConfig {
    let c = |train, dev, test| SplitCounts { train, dev, test };
    GenConfig {
        seed,
        ner_changed: c(300, 60, 60),
        role_switched: c(120, 40, 40),
        control: c(100, 30, 30),
        ..GenConfig::default()
    }
}

fn all(g: &Generated) -> impl Iterator<Item = (Dataset, Split, &NliExample)> {
    Dataset::ALL
        .into_iter()
        .flat_map(move |d| Split::ALL.into_iter().flat_map(move |s| g.get(d, s).iter().map(move |ex| (d, s, ex))))
}

/// Positions where the sentences differ, or None if lengths differ.
fn diff_tags(ex: &NliExample, gaz: &Gazetteer) -> Option<Vec<(NerCategory, NerCategory)>> {
    (ex.premise.len() == ex.hypothesis.len()).then(|| {
        ex.premise
            .iter()
            .zip(&ex.hypothesis)
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (gaz.tag(a), gaz.tag(b)))
            .collect()
    })
}

/// The spans left after removing the longest common prefix and suffix.
fn middle<'a>(a: &'a [String], b: &'a [String]) -> (&'a [String], &'a [String]) {
    let pre = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suf = a[pre..].iter().rev().zip(b[pre..].iter().rev()).take_while(|(x, y)| x == y).count();
    (&a[pre..a.len() - suf], &b[pre..b.len() - suf])
}

fn check(g: &Generated, cfg: &GenConfig, gaz: &Gazetteer) -> Result<(), TestCaseError> {
    for d in Dataset::ALL {
        let counts = match d {
            Dataset::NerChanged => cfg.ner_changed,
            Dataset::RoleSwitched => cfg.role_switched,
            Dataset::Control => cfg.control,
        };
        for s in Split::ALL {
            prop_assert_eq!(g.get(d, s).len(), counts.get(s));
        }
    }
    for (d, _, ex) in all(g) {
        let is_ner = ex.source.starts_with("ner_");
        let is_role = ex.source.starts_with("role_");
        prop_assert_eq!(is_ner, d == Dataset::NerChanged);
        prop_assert_eq!(is_role, d == Dataset::RoleSwitched);
        if ex.label == Label::Entailment {
            prop_assert_eq!(&ex.premise, &ex.hypothesis);
            continue;
        }
        prop_assert_ne!(&ex.premise, &ex.hypothesis);
        let tags = diff_tags(ex, gaz);
        match ex.source.as_str() {
            source::NER_NAME | source::NER_LOCATION => {
                prop_assert_eq!(ex.label, Label::Neutral);
                let Some(tags) = tags else { return Err(TestCaseError::fail(format!("{ex:?}"))) };
                prop_assert!(tags.iter().all(|&(a, b)| a == NerCategory::Name && b == NerCategory::Name), "{:?}", ex);
            }
            source::NER_NUMBER | source::NER_DATE => {
                // number words can span several tokens, so compare the changed middle
                prop_assert_eq!(ex.label, Label::Contradiction);
                let (p, h) = middle(&ex.premise, &ex.hypothesis);
                let quantity = |t: &String| matches!(gaz.tag(t), NerCategory::Numeric | NerCategory::Date);
                prop_assert!(p.iter().all(quantity) && h.iter().all(quantity), "{:?}", ex);
            }
            source::ROLE_VN | source::ROLE_QASRL => {
                prop_assert_eq!(ex.label, Label::Neutral);
                prop_assert_eq!(folded_multiset(&ex.premise), folded_multiset(&ex.hypothesis));
            }
            source::CONTROL => {
                prop_assert_eq!(ex.label, Label::Neutral);
                let p: BTreeSet<_> = ex.premise.iter().collect();
                prop_assert!(ex.hypothesis.iter().any(|t| !p.contains(t)));
            }
            other => prop_assert!(false, "unexpected source {}", other),
        }
    }
    // no template and no name or place crosses from train to test
    let text = |s: Split| -> BTreeSet<String> { g.templates[s.index()].iter().map(|t| t.text()).collect() };
    prop_assert!(text(Split::Train).is_disjoint(&text(Split::Test)));
    prop_assert!(text(Split::Train).is_disjoint(&text(Split::Dev)));
    let names = |s: Split| -> BTreeSet<String> {
        all(g)
            .filter(|(_, sp, _)| *sp == s)
            .flat_map(|(_, _, ex)| ex.premise.iter().chain(&ex.hypothesis))
            .filter(|t| gaz.tag(t) == NerCategory::Name)
            .map(|t| t.to_lowercase())
            .collect()
    };
    prop_assert!(names(Split::Train).is_disjoint(&names(Split::Test)));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_pairs_follow_their_construction_rules(seed in any::<u64>()) {
        let inputs = GenInputs::builtin();
        let cfg = small(seed);
        let g = generate(&inputs, &cfg).unwrap();
        check(&g, &cfg, &inputs.gazetteer)?;
    }

    #[test]
    fn seed_changes_pairs_but_not_counts(seed in 0u64..1000) {
        let inputs = GenInputs::builtin();
        let a = generate(&inputs, &small(seed)).unwrap();
        let b = generate(&inputs, &small(seed + 1)).unwrap();
        prop_assert_ne!(&a.corpora, &b.corpora);
        for d in Dataset::ALL {
            for s in Split::ALL {
                prop_assert_eq!(a.get(d, s).len(), b.get(d, s).len());
            }
        }
    }
}

#[test]
fn same_seed_writes_identical_files() {
    let inputs = GenInputs::builtin();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        generate(&inputs, &small(5)).unwrap().write(d.path()).unwrap();
    }
    for d in Dataset::ALL {
        for s in Split::ALL {
            let rel = format!("{}/{}.jsonl", d.as_str(), s.as_str());
            let a = std::fs::read(dirs[0].path().join(&rel)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, std::fs::read(dirs[1].path().join(&rel)).unwrap(), "{rel}");
        }
    }
    let report = std::fs::read_to_string(dirs[0].path().join("report.json")).unwrap();
    assert!(report.contains("\"format_version\": 1"));
}

#[test]
fn report_counts_add_up() {
    let cfg = small(9);
    let g = generate(&GenInputs::builtin(), &cfg).unwrap();
    let nc = &g.report.counts["ner_changed"]["test"];
    let total: usize = nc.values().flat_map(|by_label| by_label.values()).sum();
    assert_eq!(total, cfg.ner_changed.test);
    let entail: usize = nc.values().filter_map(|by_label| by_label.get("entailment")).sum();
    let direct = g.get(Dataset::NerChanged, Split::Test).iter().filter(|e| e.label == Label::Entailment).count();
    assert_eq!(entail, direct);
}

#[test]
fn custom_template_files_replace_the_bundled_ones() {
    let dir = tempfile::tempdir().unwrap();
    let ner = dir.path().join("ner.tsv");
    let mut text = String::new();
    for (kind, slot) in [("ner_single", "{PERSONX}"), ("ner_location", "{CITY}"), ("ner_number", "{NUM}"), ("ner_date", "{DATE}")] {
        for i in 0..10 {
            text.push_str(&format!("{kind}\t{slot} appears in sentence {i} of kind {kind}.\n"));
        }
    }
    for i in 0..10 {
        text.push_str(&format!("ner_double\t{{PERSONX}} met {{PERSONY}} at stop {i}.\n"));
    }
    std::fs::write(&ner, text).unwrap();
    let paths = ResourcePaths {
        ner_templates: Some(ner),
        ..ResourcePaths::default()
    };
    let inputs = GenInputs::load(&paths).unwrap();
    let g = generate(&inputs, &small(1)).unwrap();
    // story sentences still feed the name templates; every other kind comes from the file
    let train = g.get(Dataset::NerChanged, Split::Train);
    for ex in train.iter().filter(|e| e.source != source::NER_NAME) {
        assert!(ex.premise.contains(&"sentence".to_string()), "{:?}", ex.premise);
    }
    assert!(train.iter().any(|e| e.premise.contains(&"met".to_string())));
}

#[test]
fn too_few_templates_for_three_splits_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let ner = dir.path().join("ner.tsv");
    std::fs::write(&ner, "ner_number\tThe shop sold {NUM} lamps.\n").unwrap();
    let paths = ResourcePaths {
        ner_templates: Some(ner),
        ..ResourcePaths::default()
    };
    let inputs = GenInputs::load(&paths).unwrap();
    assert!(generate(&inputs, &small(1)).is_err());
}

#[test]
fn malformed_template_file_names_the_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let ner = dir.path().join("broken.tsv");
    std::fs::write(&ner, "ner_single\t{PERSONX} went home.\nner_single without a tab\n").unwrap();
    let err = GenInputs::load(&ResourcePaths {
        ner_templates: Some(ner),
        ..ResourcePaths::default()
    })
    .unwrap_err()
    .to_string();
    assert!(err.contains("broken.tsv") && err.contains(":2"), "{err}");
}
