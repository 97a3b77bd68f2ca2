use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::eval::{evaluate, EvalReport};
use super::train::{train, TrainConfig, TrainHistory};
use crate::error::{Error, Result};
use crate::model::{param_shapes, ModelConfig, Pose2Gaze};
use crate::motiondata::SampleWindow;

/// The full model and its single-branch ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationVariant {
    Full,
    NoDct,
    NoSgcn,
    NoTgcn,
    NoPose,
    NoPartner,
    NoHead,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 7] = [
        AblationVariant::Full,
        AblationVariant::NoDct,
        AblationVariant::NoSgcn,
        AblationVariant::NoTgcn,
        AblationVariant::NoPose,
        AblationVariant::NoPartner,
        AblationVariant::NoHead,
    ];

    /// Full model plus every ablation applicable to `base`.
    pub fn applicable(base: &ModelConfig) -> Vec<AblationVariant> {
        Self::ALL
            .into_iter()
            .filter(|v| *v != AblationVariant::NoPartner || base.partner)
            .collect()
    }

    pub fn label(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoDct => "no-dct",
            AblationVariant::NoSgcn => "no-sgcn",
            AblationVariant::NoTgcn => "no-tgcn",
            AblationVariant::NoPose => "no-pose",
            AblationVariant::NoPartner => "no-partner",
            AblationVariant::NoHead => "no-head",
        }
    }

    pub fn apply(self, base: &ModelConfig) -> Result<ModelConfig> {
        let mut c = base.clone();
        match self {
            AblationVariant::Full => {}
            AblationVariant::NoDct => c.use_dct = false,
            AblationVariant::NoSgcn => c.use_sgcn = false,
            AblationVariant::NoTgcn => c.use_tgcn = false,
            AblationVariant::NoPose => c.use_pose = false,
            AblationVariant::NoHead => c.use_head = false,
            AblationVariant::NoPartner => {
                if !base.partner {
                    return Err(Error::Config(
                        "the no-partner ablation needs recordings with an interaction partner"
                            .into(),
                    ));
                }
                c.use_partner = false;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.label() == s)
            .ok_or_else(|| Error::Parameter(format!("unknown ablation variant '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub param_count: usize,
    /// Tensors of the full model absent from this variant.
    pub removed: Vec<String>,
    /// Tensors present in both but with a different shape.
    pub resized: Vec<String>,
    pub history: TrainHistory,
    pub report: EvalReport,
}

impl AblationRow {
    pub fn csv(rows: &[AblationRow]) -> String {
        let mut out =
            String::from("variant,param_count,removed_tensors,resized_tensors,mean_deg,windows\n");
        for r in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.variant,
                r.param_count,
                r.removed.join(" "),
                r.resized.join(" "),
                r.report.overall_deg,
                r.report.windows
            ));
        }
        out
    }
}

/// Trains and evaluates every requested variant with the same seed and
/// schedule.
pub fn run_ablation_suite(
    base: &ModelConfig,
    train_windows: &[SampleWindow],
    test_windows: &[SampleWindow],
    tcfg: &TrainConfig,
    variants: &[AblationVariant],
) -> Result<Vec<AblationRow>> {
    let full = param_shapes(base);
    let configs = variants
        .iter()
        .map(|v| Ok((*v, v.apply(base)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (variant, cfg) in configs {
        let shapes = param_shapes(&cfg);
        let mut removed = Vec::new();
        let mut resized = Vec::new();
        for (name, shape) in &full {
            match shapes.iter().find(|(n, _)| n == name) {
                None => removed.push(name.clone()),
                Some((_, s)) if s != shape => resized.push(name.clone()),
                Some(_) => {}
            }
        }
        let mut model = Pose2Gaze::new(cfg, tcfg.seed)?;
        log::info!("ablation {variant}: {} parameters", model.param_count());
        let history = train(&mut model, train_windows, tcfg, None)?;
        let report = evaluate(&model, test_windows, variant.label())?;
        rows.push(AblationRow {
            variant,
            param_count: model.param_count(),
            removed,
            resized,
            history,
            report,
        });
    }
    Ok(rows)
}
