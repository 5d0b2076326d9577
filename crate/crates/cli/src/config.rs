use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use surfseg_core::{ColorSpace, RunConfig, SolveMethod};

/// Flags that override values from the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub sigma: Option<f64>,
    /// One weight, or comma-separated per-channel weights.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub n_sub: Option<usize>,
    #[arg(long)]
    pub n0: Option<u32>,
    #[arg(long)]
    pub l_min: Option<f64>,
    #[arg(long)]
    pub l_max: Option<f64>,
    #[arg(long)]
    pub grid_a: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    #[arg(long)]
    pub delete_tol: Option<f64>,
    #[arg(long)]
    pub color_space: Option<ColorSpace>,
    #[arg(long)]
    pub solver: Option<SolveMethod>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    cfg.$f = Some(v);
                }
            )*};
        }
        set!(sigma, lambda, mu, dt, steps, n_sub, n0, color_space, solver, tol, seed);
        set_opt!(l_min, l_max, grid_a, delta0, delete_tol);
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    Ok(toml::from_str(text)?)
}

/// Config file values (or defaults), then flag overrides.
pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}
