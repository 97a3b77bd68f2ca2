use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BodyPart {
    Torso,
    Arm,
    Leg,
}

impl BodyPart {
    pub const ALL: [BodyPart; 3] = [BodyPart::Torso, BodyPart::Arm, BodyPart::Leg];
}

impl fmt::Display for BodyPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BodyPart::Torso => "Torso",
            BodyPart::Arm => "Arm",
            BodyPart::Leg => "Leg",
        };
        f.write_str(s)
    }
}

/// Named joint layout with its Torso/Arm/Leg grouping.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonSpec {
    pub name: String,
    pub joints: Vec<String>,
    pub parts: BTreeMap<BodyPart, Vec<String>>,
    pub head_joint: String,
}

const MOGAZE21: [&str; 21] = [
    "base", "pelvis", "torso", "neck", "head", "l_col", "r_col", "l_sho", "r_sho", "l_elb",
    "r_elb", "l_wri", "r_wri", "l_hip", "r_hip", "l_kne", "r_kne", "l_ank", "r_ank", "l_toe",
    "r_toe",
];

const GIMO23: [&str; 23] = [
    "pelvis", "spine1", "spine2", "spine3", "neck", "head", "jaw", "l_col", "r_col", "l_sho",
    "r_sho", "l_elb", "r_elb", "l_wri", "r_wri", "l_hip", "r_hip", "l_kne", "r_kne", "l_ank",
    "r_ank", "l_foot", "r_foot",
];

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl SkeletonSpec {
    pub fn new(
        name: impl Into<String>,
        joints: Vec<String>,
        parts: BTreeMap<BodyPart, Vec<String>>,
        head_joint: impl Into<String>,
    ) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            joints,
            parts,
            head_joint: head_joint.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 21-joint MoGaze layout.
    pub fn mogaze21() -> Self {
        let mut parts = BTreeMap::new();
        parts.insert(
            BodyPart::Torso,
            names(&["base", "pelvis", "torso", "neck", "head"]),
        );
        parts.insert(
            BodyPart::Arm,
            names(&[
                "l_col", "l_sho", "l_elb", "l_wri", "r_col", "r_sho", "r_elb", "r_wri",
            ]),
        );
        parts.insert(
            BodyPart::Leg,
            names(&[
                "l_hip", "l_kne", "l_ank", "l_toe", "r_hip", "r_kne", "r_ank", "r_toe",
            ]),
        );
        Self::new("mogaze21", names(&MOGAZE21), parts, "head").expect("builtin skeleton")
    }

    /// The 23-joint GIMO layout.
    pub fn gimo23() -> Self {
        let mut parts = BTreeMap::new();
        parts.insert(
            BodyPart::Torso,
            names(&[
                "pelvis", "spine1", "spine2", "spine3", "neck", "head", "jaw",
            ]),
        );
        parts.insert(
            BodyPart::Arm,
            names(&[
                "l_col", "l_sho", "l_elb", "l_wri", "r_col", "r_sho", "r_elb", "r_wri",
            ]),
        );
        parts.insert(
            BodyPart::Leg,
            names(&[
                "l_hip", "l_kne", "l_ank", "l_foot", "r_hip", "r_kne", "r_ank", "r_foot",
            ]),
        );
        Self::new("gimo23", names(&GIMO23), parts, "head").expect("builtin skeleton")
    }

    /// A generic `n`-joint layout: joint 0 is `head`, the rest are split
    /// into Torso, Arm and Leg thirds.
    pub fn generic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("skeleton needs at least one joint".into()));
        }
        let joints: Vec<String> = (0..n)
            .map(|i| {
                if i == 0 {
                    "head".to_string()
                } else {
                    format!("j{i}")
                }
            })
            .collect();
        let torso_end = n.div_ceil(3);
        let arm_end = (torso_end + (n - torso_end).div_ceil(2)).min(n);
        let mut parts = BTreeMap::new();
        parts.insert(BodyPart::Torso, joints[..torso_end].to_vec());
        parts.insert(BodyPart::Arm, joints[torso_end..arm_end].to_vec());
        parts.insert(BodyPart::Leg, joints[arm_end..].to_vec());
        Self::new(format!("generic{n}"), joints, parts, "head")
    }

    /// Resolves `mogaze21`, `gimo23`, `genericN` or `custom:PATH`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "mogaze21" => Ok(Self::mogaze21()),
            "gimo23" => Ok(Self::gimo23()),
            _ => {
                if let Some(path) = name.strip_prefix("custom:") {
                    return Self::from_json_file(Path::new(path));
                }
                if let Some(n) = name.strip_prefix("generic").and_then(|s| s.parse().ok()) {
                    return Self::generic(n);
                }
                Err(Error::Parameter(format!("unknown skeleton '{name}'")))
            }
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: Self =
            serde_json::from_str(&text).map_err(|e| Error::load(path, e.to_string()))?;
        spec.validate()
            .map_err(|e| Error::load(path, e.to_string()))?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for j in &self.joints {
            if !seen.insert(j.as_str()) {
                return Err(Error::Parameter(format!(
                    "skeleton {}: duplicate joint '{j}'",
                    self.name
                )));
            }
        }
        if !seen.contains(self.head_joint.as_str()) {
            return Err(Error::Parameter(format!(
                "skeleton {}: head joint '{}' not among joints",
                self.name, self.head_joint
            )));
        }
        let mut covered = HashSet::new();
        for (part, members) in &self.parts {
            for j in members {
                if !seen.contains(j.as_str()) {
                    return Err(Error::Parameter(format!(
                        "skeleton {}: {part} lists unknown joint '{j}'",
                        self.name
                    )));
                }
                if !covered.insert(j.as_str()) {
                    return Err(Error::Parameter(format!(
                        "skeleton {}: joint '{j}' belongs to more than one part",
                        self.name
                    )));
                }
            }
        }
        if covered.len() != seen.len() {
            return Err(Error::Parameter(format!(
                "skeleton {}: parts cover {} of {} joints",
                self.name,
                covered.len(),
                seen.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }

    pub fn index_of(&self, joint: &str) -> Option<usize> {
        self.joints.iter().position(|j| j == joint)
    }

    pub fn head_index(&self) -> usize {
        self.index_of(&self.head_joint)
            .expect("validated head joint")
    }

    pub fn part_of(&self, joint: &str) -> Option<BodyPart> {
        self.parts
            .iter()
            .find(|(_, members)| members.iter().any(|m| m == joint))
            .map(|(p, _)| *p)
    }
}
