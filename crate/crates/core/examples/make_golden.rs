//! Regenerates the golden trace and command logs under `tests/golden/`.
//!
//! ```text
//! cargo run -p teleop-core --example make_golden
//! ```

use std::path::Path;

use teleop_core::config::EngineConfig;
use teleop_core::session::{replay, script};

const DURATION_US: u64 = 60_000_000;

fn main() -> anyhow::Result<()> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let golden = root.join("tests/golden");
    std::fs::create_dir_all(&golden)?;
    let default = EngineConfig::load(root.join("config/default.toml"))?;
    let trace = script::demo_session(DURATION_US, default.hash())?;
    trace.write(golden.join("session.cft"))?;
    for (name, config) in [
        ("coarse_to_fine", "default"),
        ("natural_only", "natural-only"),
        ("relative", "relative"),
    ] {
        let cfg = EngineConfig::load(root.join(format!("config/{config}.toml")))?;
        let out = replay(&trace, &cfg)?;
        std::fs::write(golden.join(format!("{name}.log")), &out.command_log)?;
        println!("{name}: {} ticks, sha256 {}", out.ticks, out.command_log_sha256());
    }
    Ok(())
}
