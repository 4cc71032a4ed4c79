//! Drive a full run from a JSON configuration, as the command-line tool does,
//! and list the files it writes.
//!
//! `cargo run --release --example config_run -- [output_dir]`

use mcmctdh::config::parse_config_str;
use mcmctdh::run::run;

fn main() -> mcmctdh::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/config_run".into());
    let text = format!(
        r#"{{
            "scenario": "vacuum_rabi",
            "n_trajectories": 100,
            "t_final": 20,
            "oracle": true,
            "sweep": [25, 50, 100],
            "output_dir": "{out}"
        }}"#
    );
    let cfg = parse_config_str(&text)?;
    let outcome = run(&cfg)?;
    println!("{:#?}", outcome.manifest.files);
    Ok(())
}
