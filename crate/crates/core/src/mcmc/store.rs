//! On-disk layout of a run: `config.toml`, `meta.json`, `draws/*.csv` and
//! `checkpoint.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ScaleTable;
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::{Dims, ModelState};
use crate::posterior::{Draw, PosteriorDraws};

pub const DRAWS_DIR: &str = "draws";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const META_FILE: &str = "meta.json";
pub const CONFIG_FILE: &str = "config.toml";

/// Run metadata written next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub seed: u64,
    pub dims: Dims,
    pub iterations_completed: usize,
    pub stored_draws: usize,
    pub completed: bool,
    pub acceptance: BTreeMap<String, f64>,
    pub wall_time_seconds: f64,
    pub config: ModelConfig,
}

/// Everything needed to continue a chain bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub state: ModelState,
    pub rng: ChaCha8Rng,
    pub scales: ScaleTable,
    pub draws: Vec<Draw>,
    pub elapsed_seconds: f64,
}

fn ser_err(e: impl std::fmt::Display) -> Error {
    Error::Serialization(e.to_string())
}

/// Writes through a temporary file and renames, so a crash never leaves a
/// truncated file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(dir: &Path, cp: &Checkpoint) -> Result<()> {
    let bytes = serde_json::to_vec(cp).map_err(ser_err)?;
    write_atomic(&dir.join(CHECKPOINT_FILE), &bytes)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(CHECKPOINT_FILE);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(ser_err)
}

pub fn write_meta(dir: &Path, meta: &RunMeta) -> Result<()> {
    let text = serde_json::to_string_pretty(meta).map_err(ser_err)?;
    write_atomic(&dir.join(META_FILE), text.as_bytes())
}

pub fn read_meta(dir: &Path) -> Result<RunMeta> {
    let path = dir.join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(ser_err)
}

struct Table {
    name: &'static str,
    header: Vec<String>,
    row: fn(&Dims, &Draw) -> Vec<f64>,
    apply: fn(&Dims, &mut Draw, &[f64]),
}

const FAMILIES: [&str; 4] = ["drift_correct", "drift_incorrect", "boundary_correct", "boundary_incorrect"];

fn tables(dims: &Dims) -> Vec<Table> {
    let (n, d0, kn, zz) = (dims.n_subjects, dims.n_categories, dims.n_basis, dims.z_max);
    let combo_cols = || {
        let mut h = Vec::new();
        for s in 1..=d0 {
            for d in 1..=d0 {
                for k in 1..=kn {
                    h.push(format!("s{s}_d{d}_k{k}"));
                }
            }
        }
        h
    };
    let mut latent_h = Vec::new();
    for k in 1..=kn {
        for s in 1..=d0 {
            for d in 1..=d0 {
                latent_h.push(format!("k{k}_s{s}_d{d}"));
            }
        }
    }
    let mut offsets_h = Vec::new();
    for i in 1..=n {
        for s in 1..=d0 {
            offsets_h.push(format!("i{i}_s{s}"));
        }
    }
    let mut trans_h = Vec::new();
    for c in ["correct", "incorrect"] {
        for a in 1..=zz {
            for b in 1..=zz {
                trans_h.push(format!("{c}_{a}_{b}"));
            }
        }
    }
    let mut re_h = Vec::new();
    for i in 1..=n {
        for f in FAMILIES {
            for k in 1..=kn {
                re_h.push(format!("i{i}_{f}_k{k}"));
            }
        }
    }
    let scalars_h = [
        "log_lik",
        "smoothness_drift",
        "smoothness_boundary",
        "re_amplitude_drift",
        "re_smoothness_drift",
        "re_amplitude_boundary",
        "re_smoothness_boundary",
        "concentration_correct",
        "concentration_incorrect",
    ]
    .map(String::from)
    .to_vec();

    vec![
        Table {
            name: "expressed_drift",
            header: combo_cols(),
            row: |_, d| d.expressed[0].clone(),
            apply: |_, d, v| d.expressed[0] = v.to_vec(),
        },
        Table {
            name: "expressed_boundary",
            header: combo_cols(),
            row: |_, d| d.expressed[1].clone(),
            apply: |_, d, v| d.expressed[1] = v.to_vec(),
        },
        Table {
            name: "latent_states",
            header: latent_h,
            row: |_, d| d.latent.iter().map(|&l| l as f64 + 1.0).collect(),
            apply: |_, d, v| d.latent = v.iter().map(|&l| (l - 1.0) as u8).collect(),
        },
        Table {
            name: "offsets",
            header: offsets_h,
            row: |_, d| d.offsets.clone(),
            apply: |_, d, v| d.offsets = v.to_vec(),
        },
        Table {
            name: "scalars",
            header: scalars_h,
            row: |_, d| {
                let mut r = vec![d.log_lik, d.smoothness[0], d.smoothness[1]];
                r.extend_from_slice(&d.re_variances);
                r.extend_from_slice(&d.concentration);
                r
            },
            apply: |_, d, v| {
                d.log_lik = v[0];
                d.smoothness = [v[1], v[2]];
                d.re_variances = [v[3], v[4], v[5], v[6]];
                d.concentration = [v[7], v[8]];
            },
        },
        Table {
            name: "transitions",
            header: trans_h,
            row: |_, d| d.transitions.concat(),
            apply: |dims, d, v| {
                let h = dims.z_max * dims.z_max;
                d.transitions = [v[..h].to_vec(), v[h..].to_vec()];
            },
        },
        Table {
            name: "random_effects",
            header: re_h,
            row: |_, d| d.random_effects.clone(),
            apply: |_, d, v| d.random_effects = v.to_vec(),
        },
    ]
}

/// Column names of draw table `name`, for tools that read the CSVs directly.
pub fn draw_columns(dims: &Dims, name: &str) -> Option<Vec<String>> {
    tables(dims).into_iter().find(|t| t.name == name).map(|t| t.header)
}

/// Writes every draw table under `dir/draws/` plus `dims.json`.
pub fn write_draws(dir: &Path, draws: &PosteriorDraws) -> Result<()> {
    let dd = dir.join(DRAWS_DIR);
    fs::create_dir_all(&dd).map_err(|e| Error::io(&dd, e))?;
    let dims_text = serde_json::to_string_pretty(&draws.dims).map_err(ser_err)?;
    write_atomic(&dd.join("dims.json"), dims_text.as_bytes())?;
    for t in tables(&draws.dims) {
        let mut body = String::from("iteration");
        for h in &t.header {
            body.push(',');
            body.push_str(h);
        }
        body.push('\n');
        for d in &draws.draws {
            body += &d.iteration.to_string();
            for v in (t.row)(&draws.dims, d) {
                body += &format!(",{v}");
            }
            body.push('\n');
        }
        write_atomic(&dd.join(format!("{}.csv", t.name)), body.as_bytes())?;
    }
    Ok(())
}

/// Reads draws written by [`write_draws`]. `dir` is the run directory.
pub fn read_draws(dir: &Path) -> Result<PosteriorDraws> {
    let dd = dir.join(DRAWS_DIR);
    let dims_path = dd.join("dims.json");
    let dims_text = fs::read_to_string(&dims_path).map_err(|e| Error::io(&dims_path, e))?;
    let dims: Dims = serde_json::from_str(&dims_text).map_err(ser_err)?;
    let mut draws: Vec<Draw> = Vec::new();
    for (ti, t) in tables(&dims).into_iter().enumerate() {
        let path = dd.join(format!("{}.csv", t.name));
        let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
        let header = rdr.headers().map_err(ser_err)?.clone();
        if header.len() != t.header.len() + 1 {
            return Err(Error::Serialization(format!(
                "{}: expected {} columns, found {}",
                path.display(),
                t.header.len() + 1,
                header.len()
            )));
        }
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(ser_err)?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Serialization(format!("{}: {e}", path.display()))))
                .collect::<Result<_>>()?;
            if ti == 0 {
                draws.push(empty_draw(vals[0] as usize));
            }
            let d = draws
                .get_mut(row)
                .ok_or_else(|| Error::Serialization(format!("{}: row count mismatch", path.display())))?;
            (t.apply)(&dims, d, &vals[1..]);
        }
    }
    Ok(PosteriorDraws::new(dims, draws))
}

fn empty_draw(iteration: usize) -> Draw {
    Draw {
        iteration,
        log_lik: 0.0,
        expressed: [Vec::new(), Vec::new()],
        latent: Vec::new(),
        offsets: Vec::new(),
        smoothness: [0.0; 2],
        re_variances: [0.0; 4],
        concentration: [0.0; 2],
        transitions: [Vec::new(), Vec::new()],
        random_effects: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::fixtures::fixture;

    #[test]
    fn draws_round_trip_exactly() {
        let mut d = fixture(2, 3, 2, 4);
        for (j, draw) in d.draws.iter_mut().enumerate() {
            draw.log_lik = -1_234.567_890_123 * (j + 1) as f64;
            draw.latent[3] = 1;
            draw.random_effects[5] = std::f64::consts::PI / 7.0;
            draw.smoothness = [0.1 + 1e-17, 3.0];
        }
        let dir = tempfile::tempdir().unwrap();
        write_draws(dir.path(), &d).unwrap();
        let back = read_draws(dir.path()).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn headers_are_one_based_and_sized() {
        let d = fixture(2, 3, 2, 1);
        let h = draw_columns(&d.dims, "latent_states").unwrap();
        assert_eq!(h.len(), 4 * 4);
        assert_eq!(h[0], "k1_s1_d1");
        assert_eq!(draw_columns(&d.dims, "random_effects").unwrap().len(), 2 * 4 * 4);
        assert!(draw_columns(&d.dims, "nope").is_none());
    }
}
