use std::fmt;
use std::path::Path;
use std::str::FromStr;

use minpair::io::model_from_json;
use minpair::models::{gen_example2, gen_random_mdp, Example1Preset, Example2Config, RandomMdpConfig};
use minpair::{ActionSpec, BirthResetChain, FiniteMdp};

use crate::report::Failure;

/// Named model presets accepted by `--preset`.
#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Ex1(Example1Preset),
    Ex2Gauss,
    Ex2Step,
    /// One state, actions with costs 5 and 2.
    Single,
    Random { n: usize, m: usize, seed: u64 },
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "ex1-harris" => Preset::Ex1(Example1Preset::Harris),
            "ex1-nonharris" => Preset::Ex1(Example1Preset::NonHarris),
            "ex1-linearcost" => Preset::Ex1(Example1Preset::LinearCost),
            "ex1-harris-linear" => Preset::Ex1(Example1Preset::HarrisLinear),
            "ex2-gauss" => Preset::Ex2Gauss,
            "ex2-step" => Preset::Ex2Step,
            "single" => Preset::Single,
            _ => {
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["random", n, m, seed] => {
                        let bad = |what: &str| format!("preset {s}: {what} is not a nonnegative integer");
                        let n: usize = n.parse().map_err(|_| bad("n"))?;
                        let m: usize = m.parse().map_err(|_| bad("m"))?;
                        let seed: u64 = seed.parse().map_err(|_| bad("seed"))?;
                        if n == 0 || m == 0 {
                            return Err(format!("preset {s}: n and m must be at least 1"));
                        }
                        Preset::Random { n, m, seed }
                    }
                    _ => {
                        return Err(format!(
                            "unknown preset {s:?} (expected ex1-harris, ex1-nonharris, ex1-linearcost, \
                             ex1-harris-linear, ex2-gauss, ex2-step, single or random:N:M:SEED)"
                        ))
                    }
                }
            }
        })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Ex1(Example1Preset::Harris) => write!(f, "ex1-harris"),
            Preset::Ex1(Example1Preset::NonHarris) => write!(f, "ex1-nonharris"),
            Preset::Ex1(Example1Preset::LinearCost) => write!(f, "ex1-linearcost"),
            Preset::Ex1(Example1Preset::HarrisLinear) => write!(f, "ex1-harris-linear"),
            Preset::Ex2Gauss => write!(f, "ex2-gauss"),
            Preset::Ex2Step => write!(f, "ex2-step"),
            Preset::Single => write!(f, "single"),
            Preset::Random { n, m, seed } => write!(f, "random:{n}:{m}:{seed}"),
        }
    }
}

/// A loaded model plus whatever structure its preset carries.
pub struct Loaded {
    pub label: String,
    pub model: FiniteMdp,
    pub chain: Option<BirthResetChain>,
    pub ex2: Option<Example2Config>,
}

impl Loaded {
    /// Default start state: 1 for the birth-reset chain, the cell of x = 0
    /// for the control example, 0 otherwise.
    pub fn default_start(&self) -> usize {
        if self.chain.is_some() {
            1
        } else if let Some(cfg) = &self.ex2 {
            cfg.state_of(0.0)
        } else {
            0
        }
    }
}

pub fn load(model: Option<&Path>, preset: Option<&Preset>, truncation: usize) -> Result<Loaded, Failure> {
    match (model, preset) {
        (Some(_), Some(_)) => Err(Failure::config("cli", "single-model-source", "give --model or --preset, not both")),
        (None, None) => Err(Failure::config("cli", "single-model-source", "one of --model or --preset is required")),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::config("cli", "model-file-readable", format!("{}: {e}", path.display())))?;
            let model = model_from_json(&text).map_err(|e| Failure::config("mdp-core", "model-valid", e.to_string()))?;
            Ok(Loaded {
                label: path.display().to_string(),
                model,
                chain: None,
                ex2: None,
            })
        }
        (None, Some(p)) => build_preset(p, truncation),
    }
}

pub fn build_preset(preset: &Preset, truncation: usize) -> Result<Loaded, Failure> {
    let gen_err = |e: minpair::Error| Failure::config("model-gen", "preset-valid", e.to_string());
    let label = preset.to_string();
    Ok(match preset {
        Preset::Ex1(p) => {
            let (model, chain) = p.build(truncation).map_err(gen_err)?;
            Loaded {
                label,
                model,
                chain: Some(chain),
                ex2: None,
            }
        }
        Preset::Ex2Gauss | Preset::Ex2Step => {
            let cfg = if *preset == Preset::Ex2Gauss {
                Example2Config::gaussian()
            } else {
                Example2Config::step_weight()
            };
            Loaded {
                label,
                model: gen_example2(&cfg).map_err(gen_err)?,
                chain: None,
                ex2: Some(cfg),
            }
        }
        Preset::Single => Loaded {
            label,
            model: FiniteMdp::new(1, vec![vec![ActionSpec::dense(0, &[1.0], 5.0), ActionSpec::dense(1, &[1.0], 2.0)]]),
            chain: None,
            ex2: None,
        },
        Preset::Random { n, m, seed } => Loaded {
            label,
            model: gen_random_mdp(&RandomMdpConfig::new(*n, *m, *seed)).map_err(gen_err)?,
            chain: None,
            ex2: None,
        },
    })
}
