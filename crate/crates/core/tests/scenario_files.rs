use std::path::{Path, PathBuf};

use winner_core::lab::ExperimentKind;
use winner_core::scenario::{Overrides, Scenario};
use winner_core::Error;

const BASE: &str = r#"
schema = 1
seed = 5

[model]
alpha = 1.0
weights = { kind = "power", beta = 1.0 }

[[experiment]]
kind = "argmax"
n = [10, 100]
replicates = 2000
"#;

fn config_error(text: &str) -> String {
    match Scenario::from_toml_str(text).and_then(|s| s.experiment_configs()) {
        Err(Error::Config(msg)) => msg,
        other => panic!("expected a config error, got {other:?}"),
    }
}

fn bundled() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn bundled_scenarios_parse_and_validate() {
    let files = bundled();
    assert!(files.len() >= 3);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let scenario = Scenario::from_toml_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        scenario.experiment_configs().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

#[test]
fn round_trip_through_toml() {
    let scenario = Scenario::from_toml_str(BASE).unwrap();
    let again = Scenario::from_toml_str(&scenario.to_toml_string()).unwrap();
    assert_eq!(scenario, again);
}

#[test]
fn unknown_fields_are_rejected() {
    assert!(config_error(&format!("colour = 3\n{BASE}")).contains("colour"));
    let msg = config_error(&BASE.replace("alpha = 1.0", "alpha = 1.0\nshape = 2.0"));
    assert!(msg.contains("shape"), "{msg}");
    let msg = config_error(&BASE.replace("replicates = 2000", "replicates = 2000\nreps = 3"));
    assert!(msg.contains("reps"), "{msg}");
}

#[test]
fn schema_version_is_checked() {
    assert!(config_error(&BASE.replace("schema = 1", "schema = 2")).contains("schema"));
    assert!(Scenario::from_toml_str(&BASE.replace("schema = 1\n", "")).is_err());
}

#[test]
fn missing_seed_needs_an_override() {
    let mut scenario = Scenario::from_toml_str(&BASE.replace("seed = 5\n", "")).unwrap();
    let msg = match scenario.experiment_configs() {
        Err(Error::Config(msg)) => msg,
        other => panic!("{other:?}"),
    };
    assert!(msg.contains("seed"));
    scenario.apply(&Overrides { seed: Some(9), ..Default::default() });
    assert_eq!(scenario.experiment_configs().unwrap()[0].seed, 9);
}

#[test]
fn overrides_take_precedence() {
    let mut scenario = Scenario::from_toml_str(BASE).unwrap();
    scenario.apply(&Overrides {
        seed: Some(11),
        n: vec![500],
        replicates: Some(1500),
        alpha: Some(2.0),
        output: Some("elsewhere".into()),
    });
    let configs = scenario.experiment_configs().unwrap();
    assert_eq!(configs[0].seed, 11);
    assert_eq!(configs[0].n_values, vec![500]);
    assert_eq!(configs[0].replicates, 1500);
    assert_eq!(configs[0].model.alpha(), 2.0);
    assert_eq!(scenario.output.as_deref(), Some(Path::new("elsewhere")));
}

#[test]
fn field_errors_name_the_experiment() {
    let msg = config_error(&BASE.replace("n = [10, 100]", "n = [100, 10]"));
    assert!(msg.starts_with("experiment[1]"), "{msg}");
    let msg = config_error(&BASE.replace("replicates = 2000", "replicates = 2000\ngrid = [0.5]"));
    assert!(msg.contains("experiment[1].grid"), "{msg}");
    let msg = config_error(&BASE.replace("replicates = 2000", "replicates = 10"));
    assert!(msg.contains("replicates"), "{msg}");
    let msg = config_error(&format!(
        "{BASE}\n[[experiment]]\nkind = \"max\"\nname = \"argmax-1\"\nn = [5]\nreplicates = 2000\n"
    ));
    assert!(msg.contains("duplicate"), "{msg}");
}

#[test]
fn explicit_weights_need_a_limit() {
    let text = BASE
        .replace(
            r#"weights = { kind = "power", beta = 1.0 }"#,
            r#"weights = { kind = "explicit", values = [1.0, 2.0, 3.0] }"#,
        )
        .replace("n = [10, 100]", "n = [3]");
    assert!(config_error(&text).contains("limit_beta"));
    let fixed = text.replace("alpha = 1.0", "alpha = 1.0\nlimit_beta = 0.0");
    Scenario::from_toml_str(&fixed).unwrap().experiment_configs().unwrap();
}

#[test]
fn kind_specific_fields_reach_the_experiment() {
    let text = BASE.replace(
        "kind = \"argmax\"\nn = [10, 100]",
        "kind = \"ladder\"\nn = [10, 100]\ngrid = [0.0, 0.5]\njoint = [{ t1 = 0.0, t2 = 0.5, x1 = 1.0, x2 = 0.5 }]",
    );
    let configs = Scenario::from_toml_str(&text).unwrap().experiment_configs().unwrap();
    match &configs[0].kind {
        ExperimentKind::Ladder { grid, joint } => {
            assert_eq!(grid, &vec![0.0, 0.5]);
            assert_eq!(joint.len(), 1);
        }
        other => panic!("{other:?}"),
    }
}
