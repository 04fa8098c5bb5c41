//! Regenerates the demo replay cache from the simulated provider.
//!
//! cargo run -p trustlens-cli --example synth_cache [-- path/to/run_manifest.json]

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use trustlens_cli::commands::assess_with;
use trustlens_cli::manifest::{Overrides, Workspace};
use trustlens_cli::simulate::{simulated_profile, SimulatedProvider, SIM_CREDENTIAL_VAR};
use trustlens_core::gateway::{Gateway, ResponseCache};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let manifest = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../demo/run_manifest.json")));
    let scratch = tempfile::tempdir()?;

    // The workspace refuses a replay model without a cache file.
    let manifest_dir = manifest.parent().unwrap_or(std::path::Path::new("."));
    let text = fs::read_to_string(&manifest)?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let cache_path = manifest_dir.join(raw["cache"].as_str().ok_or("manifest has no cache path")?);
    if let Some(parent) = cache_path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&cache_path, "")?;

    let overrides = Overrides { qm_config: None, out: Some(scratch.path().to_path_buf()) };
    let ws = Workspace::load(&manifest, &overrides)?;
    std::env::set_var(SIM_CREDENTIAL_VAR, "simulated");

    let cache = Arc::new(ResponseCache::in_memory());
    let provider = SimulatedProvider::new(ws.manifest.seed, &ws.truth);
    let gateway = Gateway::new(Arc::clone(&cache), Box::new(provider));
    let profiles: Vec<_> = ws.manifest.models.iter().map(|m| simulated_profile(&m.model_id)).collect();
    let mut stdout = std::io::stdout();
    let code = assess_with(&ws, &gateway, &profiles, &ws.manifest.strategies, ws.manifest.parallelism, &mut stdout)?;
    if code != 0 {
        return Err(format!("simulated sweep exited with {code}").into());
    }

    let mut file = fs::File::create(&cache_path)?;
    for entry in cache.entries() {
        writeln!(file, "{}", serde_json::to_string(&entry)?)?;
    }
    println!("wrote {} entries to {}", cache.len(), cache_path.display());
    Ok(())
}
