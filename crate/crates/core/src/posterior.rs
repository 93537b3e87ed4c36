//! Stored posterior draws and the quantities derived from them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bspline::SplineBasis;
use crate::error::{Error, Result};
use crate::model::{family, Dims, ModelState, BOUNDARY, CORRECT, DRIFT, INCORRECT, N_FAMILIES};

/// One thinned sample of every parameter family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub log_lik: f64,
    /// Expressed spline coefficients `[p][x * K + k]`.
    pub expressed: [Vec<f64>; 2],
    /// Latent labels `[k * n_combos + x]`.
    pub latent: Vec<u8>,
    /// Offsets `[i * d0 + s]`.
    pub offsets: Vec<f64>,
    pub smoothness: [f64; 2],
    pub re_variances: [f64; 4],
    pub concentration: [f64; 2],
    /// Transition probabilities `[c][z * z_max + z']`.
    pub transitions: [Vec<f64>; 2],
    /// Random-effect coefficients `[(i * 4 + f) * K + k]`.
    pub random_effects: Vec<f64>,
}

impl Draw {
    pub fn from_state(state: &ModelState, log_lik: f64) -> Self {
        let dims = state.dims;
        let expressed = [DRIFT, BOUNDARY].map(|p| (0..dims.n_combos()).flat_map(|x| state.expressed(p, x)).collect());
        Self {
            iteration: state.iteration,
            log_lik,
            expressed,
            latent: state.latent.labels.clone(),
            offsets: state.offsets.clone(),
            smoothness: state.smoothness,
            re_variances: state.re_variances.values,
            concentration: state.transitions.alpha,
            transitions: [state.transitions.probabilities(0), state.transitions.probabilities(1)],
            random_effects: state.random_effects.values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub dims: Dims,
    pub draws: Vec<Draw>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parameter {
    Drift,
    Boundary,
}

impl Parameter {
    pub fn index(self) -> usize {
        match self {
            Parameter::Drift => DRIFT,
            Parameter::Boundary => BOUNDARY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Parameter::Drift => "drift",
            Parameter::Boundary => "boundary",
        }
    }
}

impl PosteriorDraws {
    pub fn new(dims: Dims, draws: Vec<Draw>) -> Self {
        Self { dims, draws }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn basis(&self) -> SplineBasis {
        self.dims.basis()
    }

    /// Blocks `1..=T`.
    pub fn block_grid(&self) -> Vec<f64> {
        (1..=self.dims.n_blocks).map(|t| t as f64).collect()
    }

    /// `per_interval` points per block interval on `[1, T]`.
    pub fn dense_grid(&self, per_interval: usize) -> Vec<f64> {
        self.basis().grid(per_interval)
    }

    fn check(&self, x: usize, subject: Option<usize>) -> Result<()> {
        if self.draws.is_empty() {
            return Err(Error::InvalidArgument("no posterior draws".into()));
        }
        if x >= self.dims.n_combos() {
            return Err(Error::InvalidArgument(format!("combination {x} out of range")));
        }
        if let Some(i) = subject {
            if i >= self.dims.n_subjects {
                return Err(Error::InvalidArgument(format!("subject {} out of range", i + 1)));
            }
        }
        Ok(())
    }

    fn fixed_curve(&self, basis: &SplineBasis, draw: &Draw, p: usize, x: usize, grid: &[f64]) -> Result<Vec<f64>> {
        let kn = self.dims.n_basis;
        let coeffs = &draw.expressed[p][x * kn..(x + 1) * kn];
        grid.iter().map(|&t| basis.eval_function(coeffs, t)).collect()
    }

    fn re_curve(&self, basis: &SplineBasis, draw: &Draw, i: usize, f: usize, grid: &[f64]) -> Result<Vec<f64>> {
        let kn = self.dims.n_basis;
        let o = (i * N_FAMILIES + f) * kn;
        let coeffs = &draw.random_effects[o..o + kn];
        grid.iter().map(|&t| basis.eval_function(coeffs, t)).collect()
    }

    fn family_of(&self, p: usize, x: usize) -> usize {
        let c = if self.dims.transition_type(x) == CORRECT { CORRECT } else { INCORRECT };
        family(p, c)
    }

    /// Per-draw curves `exp(f(t) + u_i(t))`, `[draw][grid point]`.
    pub fn individual_curves(&self, i: usize, x: usize, which: Parameter, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(x, Some(i))?;
        let basis = self.basis();
        let p = which.index();
        let f = self.family_of(p, x);
        self.draws
            .iter()
            .map(|d| {
                let fc = self.fixed_curve(&basis, d, p, x, grid)?;
                let uc = self.re_curve(&basis, d, i, f, grid)?;
                Ok(fc.iter().zip(&uc).map(|(a, b)| (a + b).exp()).collect())
            })
            .collect()
    }

    /// Per-draw curves `exp(f(t) + var_i(u_i(t)) / 2)` with the cross-subject
    /// sample variance (divisor `n - 1`).
    pub fn population_curves(&self, x: usize, which: Parameter, grid: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check(x, None)?;
        let basis = self.basis();
        let p = which.index();
        let f = self.family_of(p, x);
        let n = self.dims.n_subjects;
        if n < 2 {
            log::warn!("population curves with fewer than 2 subjects ignore the random-effect variance");
        }
        self.draws
            .iter()
            .map(|d| {
                let fc = self.fixed_curve(&basis, d, p, x, grid)?;
                let mut var = vec![0.0; grid.len()];
                if n >= 2 {
                    let curves: Vec<Vec<f64>> = (0..n).map(|i| self.re_curve(&basis, d, i, f, grid)).collect::<Result<_>>()?;
                    for g in 0..grid.len() {
                        let mean = curves.iter().map(|c| c[g]).sum::<f64>() / n as f64;
                        var[g] = curves.iter().map(|c| (c[g] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    }
                }
                Ok(fc.iter().zip(&var).map(|(a, v)| (a + 0.5 * v).exp()).collect())
            })
            .collect()
    }
}

/// Pointwise posterior mean and equal-tailed band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
}

/// Empirical quantile with linear interpolation between order statistics
/// (`(n - 1) q` positioning). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summarises per-draw curves `[draw][grid]` at credible `level`.
pub fn summarize_curves(grid: &[f64], curves: &[Vec<f64>], level: f64) -> TrajectorySummary {
    let a = (1.0 - level) / 2.0;
    let m = curves.len() as f64;
    let mut mean = Vec::with_capacity(grid.len());
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let mut col: Vec<f64> = curves.iter().map(|c| c[g]).collect();
        mean.push(col.iter().sum::<f64>() / m);
        col.sort_by(|x, y| x.total_cmp(y));
        lower.push(quantile_sorted(&col, a));
        upper.push(quantile_sorted(&col, 1.0 - a));
    }
    TrajectorySummary {
        grid: grid.to_vec(),
        mean,
        lower,
        upper,
        level,
    }
}

pub fn individual_trajectory(
    draws: &PosteriorDraws,
    i: usize,
    x: usize,
    which: Parameter,
    grid: &[f64],
    level: f64,
) -> Result<TrajectorySummary> {
    Ok(summarize_curves(grid, &draws.individual_curves(i, x, which, grid)?, level))
}

pub fn population_trajectory(
    draws: &PosteriorDraws,
    x: usize,
    which: Parameter,
    grid: &[f64],
    level: f64,
) -> Result<TrajectorySummary> {
    Ok(summarize_curves(grid, &draws.population_curves(x, which, grid)?, level))
}

/// Co-clustering probabilities at block `t` (0-based) among `combos`,
/// row-major `combos.len()²`. A pair co-clusters in a draw when both labels
/// agree at locations `t` and `t + 1`.
pub fn coclustering_among(draws: &PosteriorDraws, t: usize, combos: &[usize]) -> Result<Vec<f64>> {
    if t >= draws.dims.n_blocks {
        return Err(Error::InvalidArgument(format!("block {} out of range", t + 1)));
    }
    if draws.is_empty() {
        return Err(Error::InvalidArgument("no posterior draws".into()));
    }
    let nx = draws.dims.n_combos();
    let m = combos.len();
    let mut out = vec![0.0; m * m];
    for d in &draws.draws {
        for a in 0..m {
            for b in 0..m {
                let (xa, xb) = (combos[a], combos[b]);
                if d.latent[t * nx + xa] == d.latent[t * nx + xb]
                    && d.latent[(t + 1) * nx + xa] == d.latent[(t + 1) * nx + xb]
                {
                    out[a * m + b] += 1.0;
                }
            }
        }
    }
    let n = draws.len() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    Ok(out)
}

/// Success combinations `(s, s)` for every stimulus.
pub fn success_combos(dims: &Dims) -> Vec<usize> {
    (0..dims.n_categories).map(|s| dims.combo(s, s)).collect()
}

/// `d0 × d0` co-clustering matrix among the success combinations at block `t` (0-based).
pub fn coclustering_matrix(draws: &PosteriorDraws, t: usize) -> Result<Vec<f64>> {
    coclustering_among(draws, t, &success_combos(&draws.dims))
}

/// What [`export_summaries`] writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryRequest {
    pub population: bool,
    /// Subjects (0-based) whose individual trajectories are exported.
    pub subjects: Vec<usize>,
    pub coclustering: bool,
    pub offsets: bool,
    pub grid_per_interval: usize,
    pub level: f64,
}

impl Default for SummaryRequest {
    fn default() -> Self {
        Self {
            population: true,
            subjects: Vec::new(),
            coclustering: true,
            offsets: true,
            grid_per_interval: 10,
            level: 0.9,
        }
    }
}

impl SummaryRequest {
    pub fn nothing() -> Self {
        Self {
            population: false,
            subjects: Vec::new(),
            coclustering: false,
            offsets: false,
            ..Default::default()
        }
    }
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
}

fn combo_label(dims: &Dims, x: usize) -> (usize, usize) {
    let (s, d) = dims.split_combo(x);
    (s + 1, d + 1)
}

/// Writes CSV summaries into `outdir` and returns the written paths.
pub fn export_summaries(draws: &PosteriorDraws, outdir: &Path, req: &SummaryRequest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    let dims = draws.dims;
    let grid = draws.dense_grid(req.grid_per_interval);
    let mut written = Vec::new();

    if req.population {
        let mut body = String::from("parameter,stimulus,decision,t,mean,lower,upper\n");
        for which in [Parameter::Drift, Parameter::Boundary] {
            for x in 0..dims.n_combos() {
                let s = population_trajectory(draws, x, which, &grid, req.level)?;
                let (si, di) = combo_label(&dims, x);
                for g in 0..grid.len() {
                    body += &format!("{},{si},{di},{},{},{},{}\n", which.name(), grid[g], s.mean[g], s.lower[g], s.upper[g]);
                }
            }
        }
        let path = outdir.join("population_trajectories.csv");
        write_file(&path, &body)?;
        written.push(path);
    }

    if !req.subjects.is_empty() {
        let mut body = String::from("subject,parameter,stimulus,decision,t,mean,lower,upper\n");
        for &i in &req.subjects {
            for which in [Parameter::Drift, Parameter::Boundary] {
                for x in 0..dims.n_combos() {
                    let s = individual_trajectory(draws, i, x, which, &grid, req.level)?;
                    let (si, di) = combo_label(&dims, x);
                    for g in 0..grid.len() {
                        body += &format!(
                            "{},{},{si},{di},{},{},{},{}\n",
                            i + 1,
                            which.name(),
                            grid[g],
                            s.mean[g],
                            s.lower[g],
                            s.upper[g]
                        );
                    }
                }
            }
        }
        let path = outdir.join("individual_trajectories.csv");
        write_file(&path, &body)?;
        written.push(path);
    }

    if req.coclustering {
        let combos = success_combos(&dims);
        let mut body = String::from("block,x1,x2,probability\n");
        for t in 0..dims.n_blocks {
            let m = coclustering_among(draws, t, &combos)?;
            for a in 0..combos.len() {
                for b in 0..combos.len() {
                    body += &format!("{},{},{},{}\n", t + 1, a + 1, b + 1, m[a * combos.len() + b]);
                }
            }
        }
        let path = outdir.join("coclustering.csv");
        write_file(&path, &body)?;
        written.push(path);
    }

    if req.offsets {
        let a = (1.0 - req.level) / 2.0;
        let mut body = String::from("subject,stimulus,mean,lower,upper\n");
        for i in 0..dims.n_subjects {
            for s in 0..dims.n_categories {
                let j = i * dims.n_categories + s;
                let mut col: Vec<f64> = draws.draws.iter().map(|d| d.offsets[j]).collect();
                let mean = col.iter().sum::<f64>() / col.len() as f64;
                col.sort_by(|x, y| x.total_cmp(y));
                body += &format!(
                    "{},{},{},{},{}\n",
                    i + 1,
                    s + 1,
                    mean,
                    quantile_sorted(&col, a),
                    quantile_sorted(&col, 1.0 - a)
                );
            }
        }
        let path = outdir.join("offsets.csv");
        write_file(&path, &body)?;
        written.push(path);
    }

    let meta = serde_json::json!({
        "draws": draws.len(),
        "dims": dims,
        "request": req,
        "files": written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
    });
    let path = outdir.join("summary_meta.json");
    write_file(&path, &serde_json::to_string_pretty(&meta).map_err(|e| Error::Serialization(e.to_string()))?)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Draws with hand-chosen coefficients: `n` subjects, `T` blocks, `d0` categories.
    pub fn fixture(n: usize, t: usize, d0: usize, m: usize) -> PosteriorDraws {
        let dims = Dims::new(n, t, d0, 2).unwrap();
        let kn = dims.n_basis;
        let nx = dims.n_combos();
        let draws = (0..m)
            .map(|j| Draw {
                iteration: j,
                log_lik: 0.0,
                expressed: [
                    (0..nx * kn).map(|q| 0.1 * (q % kn) as f64 + 0.05 * j as f64).collect(),
                    (0..nx * kn).map(|q| 0.2 - 0.01 * (q / kn) as f64).collect(),
                ],
                latent: vec![0; kn * nx],
                offsets: vec![0.2 + 0.01 * j as f64; n * d0],
                smoothness: [1.0, 1.0],
                re_variances: [1.0; 4],
                concentration: [1.0, 1.0],
                transitions: [vec![0.5; 4], vec![0.5; 4]],
                random_effects: vec![0.0; n * 4 * kn],
            })
            .collect();
        PosteriorDraws::new(dims, draws)
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::fixture;
    use super::*;

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert!((quantile_sorted(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile_sorted(&v, 0.1) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn zero_random_effects_individual_equals_population() {
        let d = fixture(3, 4, 2, 5);
        let grid = d.dense_grid(4);
        for x in 0..4 {
            let a = individual_trajectory(&d, 1, x, Parameter::Drift, &grid, 0.9).unwrap();
            let b = population_trajectory(&d, x, Parameter::Drift, &grid, 0.9).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn single_draw_band_is_degenerate() {
        let d = fixture(2, 3, 2, 1);
        let grid = d.block_grid();
        let s = individual_trajectory(&d, 0, 2, Parameter::Boundary, &grid, 0.9).unwrap();
        assert_eq!(s.mean, s.lower);
        assert_eq!(s.mean, s.upper);
    }

    #[test]
    fn three_draw_hand_computation() {
        let mut d = fixture(1, 2, 2, 3);
        // K = 3; combination 0 drift coefficients per draw, block t=1 uses only β_0
        let kn = 3;
        for (j, v) in [0.0, 0.5, 1.0].iter().enumerate() {
            d.draws[j].expressed[0][..kn].copy_from_slice(&[*v, *v, *v]);
            d.draws[j].random_effects[..kn].copy_from_slice(&[0.1, 0.1, 0.1]);
        }
        let s = individual_trajectory(&d, 0, 0, Parameter::Drift, &[1.0, 1.5], 0.9).unwrap();
        let hand = ((0.1f64).exp() + (0.6f64).exp() + (1.1f64).exp()) / 3.0;
        assert!((s.mean[0] - hand).abs() < 1e-12);
        assert!((s.mean[1] - hand).abs() < 1e-12);
    }

    #[test]
    fn population_variance_multiplier() {
        let mut d = fixture(2, 3, 2, 1);
        let kn = 4;
        let c = 0.3;
        // correct drift family of subject 0 at +c, subject 1 at -c
        d.draws[0].random_effects[..kn].fill(c);
        d.draws[0].random_effects[4 * kn..5 * kn].fill(-c);
        let grid = d.dense_grid(3);
        let x = d.dims.combo(1, 1);
        let pop = population_trajectory(&d, x, Parameter::Drift, &grid, 0.9).unwrap();
        let base = summarize_curves(&grid, &d.population_curves(d.dims.combo(1, 0), Parameter::Drift, &grid).unwrap(), 0.9);
        let basis = d.basis();
        for g in 0..grid.len() {
            let f = basis.eval_function(&d.draws[0].expressed[0][x * kn..(x + 1) * kn], grid[g]).unwrap();
            assert!((pop.mean[g] - (f + c * c).exp()).abs() < 1e-12);
        }
        assert!(base.mean.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn coclustering_extremes() {
        let mut d = fixture(1, 3, 3, 4);
        let m = coclustering_matrix(&d, 1).unwrap();
        assert!(m.iter().all(|&v| v == 1.0));
        let nx = 9;
        for draw in d.draws.iter_mut() {
            for k in 0..4 {
                for s in 0..3 {
                    draw.latent[k * nx + s * 3 + s] = s as u8;
                }
            }
        }
        let m = coclustering_matrix(&d, 0).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m[a * 3 + b], if a == b { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn export_counts_and_idempotence() {
        let d = fixture(2, 3, 2, 3);
        let dir = tempfile::tempdir().unwrap();
        let req = SummaryRequest {
            subjects: vec![0, 1],
            grid_per_interval: 5,
            ..Default::default()
        };
        let files = export_summaries(&d, dir.path(), &req).unwrap();
        assert_eq!(files.len(), 5);
        let grid_len = 2 * 5 + 1;
        let rows = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap().lines().count() - 1;
        assert_eq!(rows("population_trajectories.csv"), grid_len * 2 * 4);
        assert_eq!(rows("individual_trajectories.csv"), grid_len * 2 * 4 * 2);
        assert_eq!(rows("coclustering.csv"), 3 * 4);
        let before = fs::read(dir.path().join("population_trajectories.csv")).unwrap();
        export_summaries(&d, dir.path(), &req).unwrap();
        assert_eq!(before, fs::read(dir.path().join("population_trajectories.csv")).unwrap());

        let empty = tempfile::tempdir().unwrap();
        let files = export_summaries(&d, empty.path(), &SummaryRequest::nothing()).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].ends_with("summary_meta.json"));
    }

    #[test]
    fn wider_level_never_narrows() {
        let mut d = fixture(2, 3, 2, 40);
        for (j, draw) in d.draws.iter_mut().enumerate() {
            for (q, v) in draw.expressed[0].iter_mut().enumerate() {
                *v += ((j * 7 + q * 3) % 11) as f64 * 0.03;
            }
        }
        let grid = d.dense_grid(5);
        let a = population_trajectory(&d, 1, Parameter::Drift, &grid, 0.8).unwrap();
        let b = population_trajectory(&d, 1, Parameter::Drift, &grid, 0.95).unwrap();
        for g in 0..grid.len() {
            assert!(b.lower[g] <= a.lower[g] && b.upper[g] >= a.upper[g]);
            assert!(a.lower[g] <= a.mean[g] && a.mean[g] <= a.upper[g]);
        }
    }
}
