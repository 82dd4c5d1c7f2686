//! Shared plumbing for the experiment commands: building model objects from
//! the configuration, output-directory handling, and the run manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thermobeam::integrator::{IntegratorConfig, Observers, Scheme};
use thermobeam::model::{BeamState, Forcing, ForcingTerm, ModelParams};
use thermobeam::sampling::{sample_state_with_energy, sample_state_with_norm};
use thermobeam::spectral::{BasisSpec, SpectralField};

use crate::config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;

pub struct RunContext {
    pub cfg: Config,
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub command_line: String,
    started: Instant,
}

impl RunContext {
    pub fn new(cfg: Config, out: PathBuf, seed: u64, threads: usize) -> Result<Self> {
        std::fs::create_dir_all(&out)
            .with_context(|| format!("cannot create output directory {}", out.display()))?;
        Ok(Self {
            cfg,
            out,
            seed,
            threads,
            command_line: std::env::args().collect::<Vec<_>>().join(" "),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, contents).with_context(|| format!("cannot write {}", p.display()))
    }

    /// Resolved-config echo plus the run manifest; call once per run, last.
    pub fn finalize(&self, extra: &[(&str, String)]) -> Result<()> {
        self.write("resolved.cfg", &self.cfg.resolved_echo())?;
        let mut m = String::new();
        m.push_str(&format!("tool = thermobeam {}\n", env!("CARGO_PKG_VERSION")));
        m.push_str(&format!("command = {}\n", self.command_line));
        m.push_str(&format!("seed = {}\n", self.seed));
        m.push_str(&format!("threads = {}\n", self.threads));
        for (k, v) in extra {
            m.push_str(&format!("{k} = {v}\n"));
        }
        m.push_str(&format!(
            "wall_time_s = {:.3}\n",
            self.started.elapsed().as_secs_f64()
        ));
        self.write("manifest.txt", &m)
    }
}

fn forcing_term(
    cfg: &Config,
    basis: &Arc<BasisSpec<f64>>,
    component: &str,
) -> Result<ForcingTerm<f64>> {
    let kind = cfg.str_or(&format!("forcing.{component}.kind"), "zero");
    let coeffs_key = format!("forcing.{component}.coeffs");
    let profile = |cfg: &Config| -> Result<SpectralField<f64>> {
        let mut f = SpectralField::zeros(basis);
        for (mode, amp) in cfg.mode_list(&coeffs_key)? {
            if mode == 0 || mode > basis.len() {
                bail!("forcing.{component}.coeffs: mode {mode} outside 1..={}", basis.len());
            }
            f.coeffs_mut()[mode - 1] = amp;
        }
        Ok(f)
    };
    match kind.as_str() {
        "zero" => Ok(ForcingTerm::zero(basis)),
        "constant" => Ok(ForcingTerm::Constant(profile(cfg)?)),
        "sinusoidal" => Ok(ForcingTerm::Sinusoidal {
            profile: profile(cfg)?,
            omega: cfg.f64_or(&format!("forcing.{component}.omega"), 1.0)?,
            phase: cfg.f64_or(&format!("forcing.{component}.phase"), 0.0)?,
        }),
        "tabulated" => {
            let file = cfg.str_or(&format!("forcing.{component}.file"), "");
            if file.is_empty() {
                bail!("forcing.{component}.file is required for tabulated forcing");
            }
            let (times, values) = read_table(Path::new(&file), basis)?;
            Ok(ForcingTerm::Tabulated { times, values })
        }
        other => bail!("forcing.{component}.kind: unknown kind {other:?}"),
    }
}

/// CSV rows `t,c1,...,cN` (a header line starting with `t` is skipped).
fn read_table(
    path: &Path,
    basis: &Arc<BasisSpec<f64>>,
) -> Result<(Vec<f64>, Vec<SpectralField<f64>>)> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read forcing table {}", path.display()))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('t')) {
            continue;
        }
        let nums: Vec<f64> = line
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad number in {} line {}", path.display(), i + 1))?;
        if nums.len() != basis.len() + 1 {
            bail!(
                "{} line {}: expected {} columns, found {}",
                path.display(),
                i + 1,
                basis.len() + 1,
                nums.len()
            );
        }
        times.push(nums[0]);
        values.push(SpectralField::from_coeffs(basis, nums[1..].to_vec())?);
    }
    if times.is_empty() {
        bail!("forcing table {} is empty", path.display());
    }
    Ok((times, values))
}

pub fn build_params(cfg: &Config) -> Result<ModelParams<f64>> {
    let beta = cfg.f64_or("model.beta", 5.0)?;
    let gamma = cfg.f64_or("model.gamma", 0.0)?;
    let modes = cfg.usize_or("model.modes", BasisSpec::<f64>::DEFAULT_MODES)?;
    let basis = BasisSpec::new(modes)?;
    let f = forcing_term(cfg, &basis, "f")?;
    let g = forcing_term(cfg, &basis, "g")?;
    let forcing = Forcing::new(&basis, f, g)?;
    match cfg.f64_opt("model.alpha")? {
        Some(alpha) => Ok(ModelParams::with_alpha(beta, gamma, alpha, basis, forcing)?),
        None => Ok(ModelParams::new(beta, gamma, basis, forcing)?),
    }
}

pub fn integrator_config(cfg: &Config) -> Result<IntegratorConfig<f64>> {
    let scheme = match cfg.str_or("integrator.scheme", "imex").as_str() {
        "imex" => Scheme::ExponentialImex,
        "rk4" => Scheme::Rk4Reference,
        other => bail!("integrator.scheme: unknown scheme {other:?}"),
    };
    Ok(IntegratorConfig {
        dt: cfg.f64_or("integrator.dt", 1e-3)?,
        scheme,
        fixed_point_iters: cfg.usize_or("integrator.fixed_point_iters", 2)?,
        blowup_threshold: cfg.f64_or("integrator.blowup_threshold", 1e12)?,
        frozen_s: None,
        thermal_damping: true,
    })
}

pub fn observers(cfg: &Config, keep_states: bool) -> Result<Observers<f64>> {
    Ok(Observers {
        sample_every: cfg.f64_or("output.sample_every", 0.1)?,
        keep_states,
        step_residuals: false,
    })
}

/// Initial data: `initial.kind` is `zero`, `modes` (explicit coefficients)
/// or `sample` (seeded random profile scaled to `initial.energy` or
/// `initial.norm`).
pub fn build_initial(cfg: &Config, p: &ModelParams<f64>, seed: u64) -> Result<BeamState<f64>> {
    let kind = cfg.str_or("initial.kind", "zero");
    match kind.as_str() {
        "zero" => Ok(BeamState::zero(&p.basis)),
        "modes" => {
            let mut z = BeamState::zero(&p.basis);
            for (field, key) in [
                (&mut z.u, "initial.u"),
                (&mut z.v, "initial.v"),
                (&mut z.theta, "initial.theta"),
            ] {
                for (mode, amp) in cfg.mode_list(key)? {
                    if mode == 0 || mode > p.basis.len() {
                        bail!("{key}: mode {mode} outside 1..={}", p.basis.len());
                    }
                    field.coeffs_mut()[mode - 1] = amp;
                }
            }
            Ok(z)
        }
        "sample" => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            if let Some(norm) = cfg.f64_opt("initial.norm")? {
                Ok(sample_state_with_norm(p, norm, &mut rng))
            } else {
                let energy = cfg.f64_or("initial.energy", 1.0)?;
                Ok(sample_state_with_energy(p, energy, &mut rng))
            }
        }
        other => bail!("initial.kind: unknown kind {other:?}"),
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}
