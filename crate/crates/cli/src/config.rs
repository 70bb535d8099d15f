//! Run configuration: defaults, `key = value` files and flag overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use qdot_core::harness::{Family, Pairing};
use qdot_core::{SplitMode, Strategy};

use crate::parse::{parse_bool, parse_count, parse_f64, parse_list, Scan};
use crate::CliError;

/// Every setting any subcommand reads. Keys in config files use the same
/// names as the long flags, with `-` or `_`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epsilon: f64,
    pub epsilon_scan: Option<Scan>,
    /// `None` means the subcommand's own default.
    pub split: Option<SplitMode>,
    pub strategy: Strategy,
    pub seed: u64,
    pub threads: Option<usize>,
    pub timings: bool,
    pub output: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub x: Option<PathBuf>,
    pub y: Option<PathBuf>,
    pub family: Vec<Family>,
    pub t: Option<Vec<f64>>,
    pub n: Vec<usize>,
    pub trials: usize,
    pub pairing: Vec<Pairing>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub tau: Option<f64>,
    pub max_iters: Option<usize>,
    pub edge_prob: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 1e-8,
            epsilon_scan: None,
            split: None,
            strategy: Strategy::Exact,
            seed: 0,
            threads: None,
            timings: false,
            output: None,
            summary: None,
            x: None,
            y: None,
            family: vec![Family::UniformExp, Family::NormalExp],
            t: None,
            n: vec![1000],
            trials: 10,
            pairing: vec![Pairing::Same, Pairing::Independent],
            nx: 100,
            ny: 100,
            nz: 1,
            tau: None,
            max_iters: None,
            edge_prob: 0.01,
        }
    }
}

pub const KEYS: &[&str] = &[
    "epsilon",
    "epsilon_scan",
    "split",
    "strategy",
    "seed",
    "threads",
    "timings",
    "output",
    "summary",
    "x",
    "y",
    "family",
    "t",
    "n",
    "trials",
    "pairing",
    "nx",
    "ny",
    "nz",
    "tau",
    "max_iters",
    "edge_prob",
];

fn core_err(e: qdot_core::QdotError) -> CliError {
    CliError::usage(e.to_string())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let nonempty = |v: &str| -> Option<PathBuf> { (!v.is_empty()).then(|| PathBuf::from(v)) };
        match key.as_str() {
            "epsilon" => self.epsilon = parse_f64(value)?,
            "epsilon_scan" => {
                self.epsilon_scan = if value.is_empty() {
                    None
                } else {
                    Some(Scan::parse(value)?)
                }
            }
            "split" => self.split = Some(value.parse().map_err(core_err)?),
            "strategy" => self.strategy = value.parse().map_err(core_err)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| CliError::usage(format!("bad seed `{value}`")))?
            }
            "threads" => {
                self.threads = if value.is_empty() {
                    None
                } else {
                    Some(parse_count(value)?)
                }
            }
            "timings" => self.timings = parse_bool(value)?,
            "output" => self.output = nonempty(value),
            "summary" => self.summary = nonempty(value),
            "x" => self.x = nonempty(value),
            "y" => self.y = nonempty(value),
            "family" => self.family = parse_list(value, |s| s.parse::<Family>().map_err(core_err))?,
            "t" => {
                self.t = if value.is_empty() {
                    None
                } else {
                    Some(parse_list(value, parse_f64)?)
                }
            }
            "n" => self.n = parse_list(value, parse_count)?,
            "trials" => self.trials = parse_count(value)?,
            "pairing" => {
                self.pairing = parse_list(value, |s| s.parse::<Pairing>().map_err(core_err))?
            }
            "nx" => self.nx = parse_count(value)?,
            "ny" => self.ny = parse_count(value)?,
            "nz" => self.nz = parse_count(value)?,
            "tau" => self.tau = Some(parse_f64(value)?),
            "max_iters" => self.max_iters = Some(parse_count(value)?),
            "edge_prob" => self.edge_prob = parse_f64(value)?,
            _ => return Err(CliError::usage(format!("unknown setting `{key}`"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::usage(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(k, v)
                .map_err(|e| CliError::usage(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    /// Serializes every setting so that [`RunConfig::apply_text`] on a
    /// default config restores it.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default()
        };
        let join = |v: Vec<String>| v.join(",");
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("epsilon", format!("{:e}", self.epsilon));
        put(
            "epsilon_scan",
            self.epsilon_scan
                .as_ref()
                .map(|s| s.to_string())
                .unwrap_or_default(),
        );
        if let Some(split) = self.split {
            put("split", split.to_string());
        }
        put("strategy", self.strategy.to_string());
        put("seed", self.seed.to_string());
        put(
            "threads",
            self.threads.map(|t| t.to_string()).unwrap_or_default(),
        );
        put("timings", self.timings.to_string());
        put("output", path(&self.output));
        put("summary", path(&self.summary));
        put("x", path(&self.x));
        put("y", path(&self.y));
        put(
            "family",
            join(self.family.iter().map(|f| f.to_string()).collect()),
        );
        put(
            "t",
            self.t
                .as_ref()
                .map(|t| join(t.iter().map(|v| format!("{v:e}")).collect()))
                .unwrap_or_default(),
        );
        put("n", join(self.n.iter().map(|v| v.to_string()).collect()));
        put("trials", self.trials.to_string());
        put(
            "pairing",
            join(self.pairing.iter().map(|p| p.to_string()).collect()),
        );
        put("nx", self.nx.to_string());
        put("ny", self.ny.to_string());
        put("nz", self.nz.to_string());
        if let Some(tau) = self.tau {
            put("tau", format!("{tau:e}"));
        }
        if let Some(m) = self.max_iters {
            put("max_iters", m.to_string());
        }
        put("edge_prob", format!("{:e}", self.edge_prob));
        out
    }

    /// Tolerances to run: the scan if one is set, the single tolerance otherwise.
    pub fn epsilons(&self) -> Vec<f64> {
        match &self.epsilon_scan {
            Some(scan) => scan.values(),
            None => vec![self.epsilon],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text(
            "# experiment\nepsilon = 2^-34\nsplit = per-bin  # trailing comment\nstrategy = ranged:3\n\
             n = 1e2,1e4\nfamily = B\nt = 2,4.5\nepsilon-scan = 1e-8:1e-2:x10\noutput = out.csv\ntau = 1e-6\n",
        )
        .unwrap();
        assert_eq!(c.epsilon, 2f64.powi(-34));
        assert_eq!(c.split, Some(SplitMode::PerBin));
        assert_eq!(c.strategy, Strategy::Ranged(3));
        assert_eq!(c.n, vec![100, 10_000]);
        assert_eq!(c.family, vec![Family::NormalExp]);
        assert_eq!(c.epsilons().len(), 7);

        let mut back = RunConfig::default();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);

        let d = RunConfig::default();
        let mut back = RunConfig::default();
        back.apply_text(&d.to_text()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn errors_name_the_line() {
        let mut c = RunConfig::default();
        let e = c.apply_text("seed = 1\nbogus = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(c.apply_text("epsilon 3").is_err());
        assert!(c.apply_text("split = sometimes").is_err());
    }

    #[test]
    fn every_key_is_settable() {
        let mut c = RunConfig::default();
        for key in KEYS {
            let text = RunConfig::default().to_text();
            let line = text.lines().find(|l| l.starts_with(&format!("{key} ")));
            if let Some(line) = line {
                let (_, v) = line.split_once('=').unwrap();
                c.set(key, v).unwrap();
            }
        }
    }
}
