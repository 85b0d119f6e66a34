//! Boundary validation of advisor responses against the committed
//! fixture set: every valid fixture parses, every malformed one is
//! rejected with MalformedResponse.

use std::fs;
use std::path::PathBuf;

use bt_recover::advisor::{parse_verdict, AdvisorError, Recovery};

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/advisor")
}

fn fixtures_with_prefix(prefix: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(fixture_dir())
        .unwrap()
        .filter_map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().to_string_lossy().into_owned();
            name.starts_with(prefix)
                .then(|| (name, fs::read_to_string(entry.path()).unwrap()))
        })
        .collect();
    out.sort();
    out
}

#[test]
fn valid_fixtures_parse() {
    let fixtures = fixtures_with_prefix("valid_");
    assert!(fixtures.len() >= 3, "expected at least 3 valid fixtures");
    for (name, text) in fixtures {
        let verdict = parse_verdict(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        verdict.validate().unwrap();
    }
}

#[test]
fn malformed_fixtures_are_rejected() {
    let fixtures = fixtures_with_prefix("malformed_");
    assert_eq!(fixtures.len(), 5, "expected exactly 5 malformed fixtures");
    for (name, text) in fixtures {
        match parse_verdict(&text) {
            Err(AdvisorError::MalformedResponse(_)) => {}
            other => panic!("{name}: expected MalformedResponse, got {other:?}"),
        }
    }
}

#[test]
fn template_fixture_carries_a_usable_template() {
    let text = fs::read_to_string(fixture_dir().join("valid_template.json")).unwrap();
    let verdict = parse_verdict(&text).unwrap();
    match verdict.recovery {
        Some(Recovery::Template { template }) => {
            assert_eq!(template.name, "push");
            assert_eq!(template.params.len(), 1);
        }
        other => panic!("expected a template recovery, got {other:?}"),
    }
}

#[test]
fn fenced_fixture_parses() {
    let text = fs::read_to_string(fixture_dir().join("valid_fenced.json")).unwrap();
    let verdict = parse_verdict(&text).unwrap();
    assert!(!verdict.predicts_success());
}
