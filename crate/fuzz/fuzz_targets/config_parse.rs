#![no_main]

use libfuzzer_sys::fuzz_target;
use stopgame::cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let env: [(&str, &str); 0] = [];
    if let Ok(cfg) = RunConfig::load(text, env) {
        // A loaded config must build its library objects.
        cfg.game_spec().expect("validated config builds a game");
        cfg.sim_config()
            .validate(cfg.game.q)
            .expect("validated config builds a simulator");
    }
});
