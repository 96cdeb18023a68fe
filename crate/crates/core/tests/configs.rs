use std::path::Path;

use chemotaxis_core::config::RunConfig;

#[test]
fn shipped_configs_build() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.build_model().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.trajectory_options().unwrap();
            assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
