//! Build settings from flags, an optional TOML file and defaults, in that
//! order of precedence.

use std::path::{Path, PathBuf};

use anyhow::Context;
use lforge_core::cosine::{default_t, BuildConfig, Mode};
use lforge_core::discrepancy::WalkConfig;
use lforge_core::pipeline::PipelineConfig;
use lforge_core::verifier::CertificateKind;
use serde::Deserialize;

use crate::UsageError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkFile {
    pub step: Option<f64>,
    pub max_steps: Option<u64>,
    pub tight_margin: Option<f64>,
    pub snap_tol: Option<f64>,
    pub retries: Option<u32>,
    pub base_case_dim: Option<usize>,
}

/// Settings accepted by `build`, both as flags and as TOML keys.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildSettings {
    pub n: Option<u64>,
    pub t: Option<u32>,
    pub shift: Option<u32>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub grid_size: Option<usize>,
    pub certificate: Option<CertificateKind>,
    pub rel_tol: Option<f64>,
    pub min_target: Option<f64>,
    pub push_amplitude: Option<f64>,
    pub good_threshold: Option<f64>,
    pub delta: Option<f64>,
    #[serde(default)]
    pub walk: WalkFile,
}

macro_rules! prefer {
    ($hi:expr, $lo:expr, $($f:ident),*) => {
        $( if $hi.$f.is_none() { $hi.$f = $lo.$f.take(); } )*
    };
}

impl BuildSettings {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).map_err(|e| UsageError(format!("{}: {e}", path.display())).into())
    }

    /// Fills every unset field of `self` from `other`.
    pub fn or(mut self, mut other: BuildSettings) -> Self {
        prefer!(
            self, other, n, t, shift, mode, seed, out, grid_size, certificate, rel_tol, min_target,
            push_amplitude, good_threshold, delta
        );
        prefer!(self.walk, other.walk, step, max_steps, tight_margin, snap_tol, retries, base_case_dim);
        self
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn resolve(&self) -> anyhow::Result<PipelineConfig> {
        let mode = self.mode.unwrap_or(Mode::Scaled);
        let mut build = match mode {
            Mode::PaperExact => {
                let t = self.t.ok_or_else(|| UsageError("paper-exact mode needs --t".into()))?;
                if self.n.is_some() || self.shift.is_some() {
                    return Err(UsageError("paper-exact mode fixes n and shift; pass only --t".into()).into());
                }
                BuildConfig::paper_exact(t)?
            }
            Mode::Scaled => {
                let n = self.n.ok_or_else(|| UsageError("scaled mode needs --n".into()))?;
                let shift = self.shift.unwrap_or(2);
                let t = match self.t {
                    Some(t) => t,
                    None => default_t(n, shift).ok_or_else(|| {
                        UsageError(format!("n = {n} is too small for any odd t with shift {shift}"))
                    })?,
                };
                BuildConfig::scaled(n, t, shift)?
            }
        };
        if let Some(k) = self.push_amplitude {
            build = build.with_push_amplitude(Some(k))?;
        }
        if let Some(thr) = self.good_threshold {
            build = build.with_good_threshold(thr)?;
        }
        if let Some(d) = self.delta {
            build = build.with_delta(d)?;
        }
        let mut pc = PipelineConfig::new(build, self.seed.unwrap_or(0));
        let w = &self.walk;
        let d = WalkConfig::default();
        pc.walk = WalkConfig {
            step: w.step.or(d.step),
            max_steps: w.max_steps.or(d.max_steps),
            tight_margin: w.tight_margin.unwrap_or(d.tight_margin),
            snap_tol: w.snap_tol.unwrap_or(d.snap_tol),
            retries: w.retries.unwrap_or(d.retries),
            base_case_dim: w.base_case_dim.unwrap_or(d.base_case_dim),
        };
        pc.grid_size = self.grid_size;
        if let Some(c) = self.certificate {
            pc.certificate = c;
        }
        if let Some(r) = self.rel_tol {
            pc.rel_tol = r;
        }
        if let Some(m) = self.min_target {
            pc.min_target = m;
        }
        Ok(pc)
    }
}
