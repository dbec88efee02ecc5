use std::fs;

use remote_track::ScenarioConfig;

fn shipped() -> Vec<(String, String)> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/configs");
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .map(|p| (p.display().to_string(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn shipped_configs_round_trip() {
    let files = shipped();
    assert!(files.len() >= 2);
    for (path, text) in files {
        let cfg = ScenarioConfig::parse(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
        let again = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again, "{path}");
        let (a, b) = (cfg.build().unwrap(), again.build().unwrap());
        assert_eq!(a.scenario.channel, b.scenario.channel, "{path}");
        assert_eq!(a.scenario.initial, b.scenario.initial, "{path}");
        assert_eq!(a.scenario.internal_model.support, b.scenario.internal_model.support, "{path}");
    }
}

#[test]
fn builtins_match_shipped_files() {
    for name in ["scenario1", "scenario2"] {
        let path = format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"));
        assert_eq!(ScenarioConfig::builtin_text(name).unwrap(), fs::read_to_string(path).unwrap());
    }
}

#[test]
fn config_error_names_key() {
    let text = ScenarioConfig::builtin_text("scenario2").unwrap().replace("bits = 4", "bitz = 4");
    let err = ScenarioConfig::parse(&text).unwrap_err().to_string();
    assert!(err.contains("bitz"), "{err}");
}
