#![no_main]

use libfuzzer_sys::fuzz_target;
use stopgame::cli::config::apply_env_overrides;
use stopgame::cli::RunConfig;

// Input: lines of `NAME=VALUE`, applied as environment overrides.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let env: Vec<(&str, &str)> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let mut table = toml::Table::new();
    let _ = apply_env_overrides(&mut table, env.iter().copied());
    if let Ok(cfg) = RunConfig::load("", env.iter().copied()) {
        cfg.game_spec().expect("validated config builds a game");
    }
});
