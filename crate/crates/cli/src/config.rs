use anyhow::{bail, Context, Result};
use qpseries::model::{golden_mean, FrequencyVector, HoppingKernel, OperatorInstance, PotentialKind, PotentialSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    High,
}

/// Operator parameters. Unset fields take per-subcommand defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceConfig {
    pub potential: Option<PotentialSpec>,
    pub omega: Option<Vec<f64>>,
    pub phase: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    pub order: Option<usize>,
    pub s_used: Option<usize>,
    pub radius: Option<i32>,
    pub epsilons: Option<Vec<f64>>,
    pub beta: Option<f64>,
    pub c_safe: Option<f64>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub phases: Option<Vec<f64>>,
}

/// The file format of `--config`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub instance: InstanceConfig,
    pub run: Knobs,
}

/// Fully resolved settings of one run; its JSON form is what gets hashed.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub precision: Precision,
    pub potential: PotentialSpec,
    pub omega: Vec<f64>,
    pub phase: f64,
    pub epsilon: f64,
    pub order: usize,
    pub s_used: usize,
    pub radius: i32,
    pub epsilons: Vec<f64>,
    pub beta: Option<f64>,
    pub c_safe: f64,
    pub grid: usize,
    pub seed: u64,
    pub samples: usize,
    pub phases: Vec<f64>,
    /// Subcommand-specific options, part of the hash.
    pub options: BTreeMap<String, String>,
}

pub fn load(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

fn pick<T: Clone>(cli: &Option<T>, file: &Option<T>, default: T) -> T {
    cli.clone().or_else(|| file.clone()).unwrap_or(default)
}

impl RunConfig {
    pub fn resolve(
        subcommand: &str,
        precision: Precision,
        file: &FileConfig,
        cli: &FileConfig,
        options: BTreeMap<String, String>,
    ) -> Result<Self> {
        let flat = subcommand == "flatseg";
        let (i, f) = (&cli.instance, &file.instance);
        let (k, g) = (&cli.run, &file.run);
        let default_potential = if flat {
            PotentialSpec::flat_segment(0.0, 0.014, 0.007)?
        } else {
            PotentialSpec::maryland()
        };
        let default_eps = if flat { vec![0.02, 0.01] } else { vec![0.05, 0.025] };
        let default_order = match subcommand {
            "series" => 10,
            "paths" | "classes" => 8,
            _ => 14,
        };
        let default_radius = match subcommand {
            "denominators" => 100,
            "flatseg" => 30,
            _ => 40,
        };
        let order = pick(&k.order, &g.order, default_order);
        let cfg = RunConfig {
            subcommand: subcommand.to_string(),
            precision,
            potential: pick(&i.potential, &f.potential, default_potential),
            omega: pick(&i.omega, &f.omega, vec![golden_mean()]),
            phase: pick(&i.phase, &f.phase, if flat { 0.0 } else { 0.1 }),
            epsilon: pick(&i.epsilon, &f.epsilon, if flat { 0.02 } else { 0.05 }),
            order,
            s_used: pick(&k.s_used, &g.s_used, order.min(6)),
            radius: pick(&k.radius, &g.radius, default_radius),
            epsilons: pick(&k.epsilons, &g.epsilons, default_eps),
            beta: k.beta.or(g.beta),
            c_safe: pick(&k.c_safe, &g.c_safe, 1.0),
            grid: pick(&k.grid, &g.grid, 200),
            seed: pick(&k.seed, &g.seed, 11),
            samples: pick(&k.samples, &g.samples, 100),
            phases: pick(&k.phases, &g.phases, vec![0.1, 0.3]),
            options,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.omega.is_empty() || self.omega.len() > 3 {
            bail!("omega must have 1 to 3 components");
        }
        if !(0.0..=0.5).contains(&self.epsilon) || self.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
            bail!("epsilon values must lie in (0, 0.5]");
        }
        if !(1..=40).contains(&self.order) {
            bail!("order must lie in 1..=40");
        }
        if self.s_used == 0 || self.s_used > self.order {
            bail!("s_used must lie in 1..=order");
        }
        if !(1..=200).contains(&self.radius) {
            bail!("radius must lie in 1..=200");
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b < 1.0) {
                bail!("beta must lie in (0, 1)");
            }
        }
        if self.c_safe <= 0.0 {
            bail!("c_safe must be positive");
        }
        if self.grid < 2 {
            bail!("grid needs at least two points");
        }
        if self.samples == 0 {
            bail!("samples must be positive");
        }
        if self.phases.iter().any(|x| !x.is_finite()) || !self.phase.is_finite() {
            bail!("phases must be finite");
        }
        self.potential.validate()?;
        Ok(())
    }

    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }

    pub fn frequency(&self) -> Result<FrequencyVector> {
        Ok(FrequencyVector::new(self.omega.clone(), 50, None, None)?)
    }

    pub fn instance(&self) -> Result<OperatorInstance> {
        self.instance_at(self.phase)
    }

    pub fn instance_at(&self, phase: f64) -> Result<OperatorInstance> {
        let kernel = HoppingKernel::laplacian(self.omega.len());
        let inst = match self.potential.kind {
            PotentialKind::FlatSegment { .. } => OperatorInstance::new_allow_resonance(
                self.potential.clone(),
                self.frequency()?,
                kernel,
                phase,
                self.epsilon,
            )?,
            _ => OperatorInstance::new(self.potential.clone(), self.frequency()?, kernel, phase, self.epsilon)?,
        };
        Ok(inst)
    }
}
