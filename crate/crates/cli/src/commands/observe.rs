use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use faer::Side;
use serde::{Deserialize, Serialize};
use tokenobs::dataset::{generate_trajectory, presets, read_dataset, write_atomic, ConductivitySpec};
use tokenobs::grid::{Field, GridSpec};
use tokenobs::lattice_ops::{build_modified_laplacian, build_tokenizer_matrix, build_wave_generator, SparseOperator};
use tokenobs::observability::{
    annihilation_witness, empirical_lie_logdet, hautus_test, krylov_observable_rank, observability_gramian,
    witness_eigenvalue, ObservabilityReport, DEFAULT_RANK_TOL,
};

use crate::config::{load_section, resolve, write_run_manifest, Flags};
use crate::error::{CliError, CliResult};
use crate::ObservabilityArgs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservabilityConfig {
    pub checks: Vec<String>,
    pub equation: String,
    pub grid: usize,
    pub dx: f64,
    /// Defaults to 4 for lattices and to the dataset's patch for the log-det check.
    pub patch: Option<usize>,
    pub conductivity: String,
    pub conductivity_value: f64,
    pub conductivity_seed: u64,
    pub tol: f64,
    pub rank_tol: f64,
    pub horizon: f64,
    pub quad_steps: usize,
    pub data: Option<PathBuf>,
    pub orders: usize,
    pub window: usize,
    pub burn_in: usize,
    pub out: Option<PathBuf>,
}

impl Default for ObservabilityConfig {
    fn default() -> Self {
        ObservabilityConfig {
            checks: vec!["kalman".into()],
            equation: "heat".into(),
            grid: 32,
            dx: 1.0,
            patch: None,
            conductivity: "constant".into(),
            conductivity_value: 0.05,
            conductivity_seed: presets::CONDUCTIVITY_SEED,
            tol: 1e-8,
            rank_tol: DEFAULT_RANK_TOL,
            horizon: 10.0,
            quad_steps: 200,
            data: None,
            orders: 5,
            window: 100,
            burn_in: 1000,
            out: None,
        }
    }
}

fn conductivity(c: &ObservabilityConfig) -> CliResult<Field> {
    let spec = match c.conductivity.as_str() {
        "constant" => ConductivitySpec::Constant {
            value: c.conductivity_value,
        },
        "grf" => match presets::DEFAULT_CONDUCTIVITY {
            ConductivitySpec::Grf { sigma, m, nu, .. } => ConductivitySpec::Grf {
                scale: c.conductivity_value,
                sigma,
                m,
                nu,
                seed: c.conductivity_seed,
            },
            other => other,
        },
        other => return Err(CliError::Usage(format!("--conductivity must be constant or grf, got {other:?}"))),
    };
    Ok(spec.build(c.grid)?)
}

const LATTICE_PATCH: usize = 4;

fn system(c: &ObservabilityConfig, a: &Field, grid: &GridSpec) -> CliResult<(SparseOperator, SparseOperator)> {
    let p = c.patch.unwrap_or(LATTICE_PATCH);
    match c.equation.as_str() {
        "heat" => Ok((build_modified_laplacian(a, grid)?, build_tokenizer_matrix(grid, p, false)?)),
        "wave" => Ok((build_wave_generator(a, grid)?, build_tokenizer_matrix(grid, p, true)?)),
        other => Err(CliError::Usage(format!("--equation must be heat or wave, got {other:?}"))),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> tokenobs::Error + '_ {
    move |e| tokenobs::Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn observability(a: ObservabilityArgs, cfg: Option<&Path>, seed: Option<u64>) -> CliResult<()> {
    let chosen: Vec<toml::Value> = [
        (a.kalman, "kalman"),
        (a.hautus, "hautus"),
        (a.gramian, "gramian"),
        (a.lie_logdet, "lie_logdet"),
        (a.witness, "witness"),
    ]
    .into_iter()
    .filter(|(on, _)| *on)
    .map(|(_, n)| toml::Value::from(n))
    .collect();
    let mut flags = Flags::default();
    flags
        .set("checks", (!chosen.is_empty()).then_some(toml::Value::Array(chosen)))
        .set("equation", a.equation.clone())
        .set_usize("grid", a.grid)
        .set("dx", a.dx)
        .set_usize("patch", a.patch)
        .set("conductivity", a.conductivity.clone())
        .set("conductivity_value", a.conductivity_value)
        .set_u64("conductivity_seed", seed)
        .set("tol", a.tol)
        .set("rank_tol", a.rank_tol)
        .set("horizon", a.horizon)
        .set_usize("quad_steps", a.quad_steps)
        .set_path("data", a.data.as_deref())
        .set_usize("orders", a.orders)
        .set_usize("window", a.window)
        .set_usize("burn_in", a.burn_in)
        .set_path("out", a.out.as_deref());
    let c: ObservabilityConfig = resolve(
        &ObservabilityConfig::default(),
        &load_section(cfg, "observability")?,
        &flags.0,
        "observability",
    )?;

    let mut report = ObservabilityReport::default();
    let mut extra = String::new();
    let needs_system = c.checks.iter().any(|k| k != "lie_logdet");
    let grid = GridSpec::new(c.grid, c.dx)?;
    let field = if needs_system { Some(conductivity(&c)?) } else { None };
    let sys = field.as_ref().map(|f| system(&c, f, &grid)).transpose()?;

    for check in &c.checks {
        match (check.as_str(), &sys) {
            ("kalman", Some((op, h))) => {
                let r = krylov_observable_rank(op, h, c.rank_tol)?;
                report = report.with_rank(&r);
            }
            ("hautus", Some((op, h))) => {
                let r = hautus_test(op, h, c.tol, None)?;
                let _ = writeln!(extra, "hautus_method = {}", r.method);
                report = report.with_hautus(&r);
            }
            ("gramian", Some((op, h))) => {
                let q = observability_gramian(&op.to_dense(), &h.to_dense(), c.horizon, c.quad_steps)?;
                let evd = q
                    .self_adjoint_eigen(Side::Lower)
                    .map_err(|e| tokenobs::Error::Numerical(format!("Gramian eigensolver failed: {e:?}")))?;
                let s = evd.S().column_vector();
                let (lo, hi) = (s[0], s[q.nrows() - 1]);
                report.state_dim = q.nrows();
                let _ = writeln!(extra, "gramian_min_eigenvalue = {lo:e}");
                let _ = writeln!(extra, "gramian_max_eigenvalue = {hi:e}");
                let _ = writeln!(extra, "gramian_condition = {:e}", hi / lo.abs());
            }
            ("witness", Some((op, h))) => {
                let f = field.as_ref().expect("system implies a conductivity");
                let (lo, hi) = (f.min(), f.max());
                if hi - lo > 1e-12 * hi.abs() {
                    return Err(CliError::Usage("the witness exists only for constant conductivity".into()));
                }
                let p = c.patch.unwrap_or(LATTICE_PATCH);
                let w = annihilation_witness(&grid, p)?;
                let lambda = witness_eigenvalue(lo, &grid, p)?;
                let mut x = w.as_slice().to_vec();
                if c.equation == "wave" {
                    x.extend(std::iter::repeat(0.0).take(grid.points()));
                }
                let tokens = h.apply(&x)?;
                let tok_inf = tokens.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                // Heat: A w = λ w. Wave: A² (w, 0) = λ (w, 0).
                let mut aw = op.apply(&x)?;
                if c.equation == "wave" {
                    aw = op.apply(&aw)?;
                }
                let resid = aw.iter().zip(&x).fold(0.0f64, |m, (p, q)| m.max((p - lambda * q).abs()));
                let _ = writeln!(extra, "witness_token_inf_norm = {tok_inf:e}");
                let _ = writeln!(extra, "witness_eigen_residual = {resid:e}");
                let _ = writeln!(extra, "witness_eigenvalue = {lambda:e}");
            }
            ("lie_logdet", _) => {
                let (traj, recipe_patch) = match &c.data {
                    Some(d) => {
                        let ds = read_dataset(d)?;
                        let p = ds.manifest.recipe.as_ref().map(|r| r.patch);
                        let t = ds
                            .trajectories
                            .into_iter()
                            .next()
                            .ok_or_else(|| CliError::Usage("the log-det dataset is empty".into()))?;
                        (t, p)
                    }
                    None => {
                        let recipe = presets::kse1d_lie();
                        (generate_trajectory(&recipe, 0)?, Some(recipe.patch))
                    }
                };
                let patch = c.patch.or(recipe_patch).unwrap_or(presets::kse1d_lie().patch);
                let r = empirical_lie_logdet(&traj, patch, c.orders, c.window)?;
                let tail: Vec<f64> = r.log_abs_det[c.burn_in.min(r.log_abs_det.len())..]
                    .iter()
                    .copied()
                    .filter(|v| v.is_finite())
                    .collect();
                if report.state_dim == 0 {
                    report.state_dim = traj.frames[0].len();
                }
                let _ = writeln!(extra, "lie_dimension = {}", r.dimension);
                let _ = writeln!(extra, "lie_entries = {}", r.times.len());
                let _ = writeln!(extra, "lie_full_rank_fraction = {}", r.full_rank_fraction(c.burn_in));
                if !tail.is_empty() {
                    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
                    let _ = writeln!(extra, "lie_mean_logdet = {mean:e}");
                }
            }
            (other, _) => {
                return Err(CliError::Usage(format!("unknown observability check {other:?}")));
            }
        }
    }

    let text = format!("{}{}", report.to_text(), extra);
    match &c.out {
        Some(out) => {
            write_atomic(out, |w| w.write_all(text.as_bytes()))?;
            let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
            name.push(".run.toml");
            write_run_manifest(&out.with_file_name(name), "observability", &c, seed)?;
        }
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(())
}
