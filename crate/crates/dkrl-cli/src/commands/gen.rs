//! `gen`: synthesize a dataset from a spec or preset and write it with a
//! provenance manifest.

use std::path::Path;

use serde_json::json;

use dkrl_core::presets;

use crate::config::GenConfig;
use crate::error::Result;
use crate::io;
use crate::manifest::Manifest;

pub fn run(cfg: &GenConfig) -> Result<()> {
    let spec = cfg.resolve_spec()?;
    // validate everything (spec and output path) before touching the disk
    let (design, _theta, set) = presets::generate_dataset(&spec, cfg.seed)?;
    io::ensure_dir(&cfg.out_dir)?;

    write_outputs(&cfg.out_dir, &design, &set)?;
    let manifest = Manifest::new("gen", json!(cfg.seed), cfg.clone())?.with_dims(json!({
        "p": spec.p,
        "q": spec.q,
        "d1": spec.d1,
        "d2": spec.d2,
        "n": spec.n,
    }));
    manifest.write(&cfg.out_dir.join("manifest.json"))
}

fn write_outputs(
    dir: &Path,
    design: &dkrl_core::FixedBasisDesign,
    set: &dkrl_core::simdata::SampleSet,
) -> Result<()> {
    io::write_matrix(&dir.join("z.csv"), &set.z)?;
    io::write_matrix(&dir.join("x.csv"), &set.x)?;
    io::write_vector(&dir.join("y.csv"), &set.y)?;
    io::write_indices(&dir.join("indices.csv"), &set.indices.e_z, &set.indices.e_x)?;
    io::write_matrix(&dir.join("gamma_star.csv"), &set.gamma_star)?;
    let _ = design;
    Ok(())
}
