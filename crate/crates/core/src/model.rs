//! Physical description of the planar flat-footed biped.
//!
//! The tree is fixed: a torso+pelvis base carrying two legs of
//! thigh → shank → foot. Generalized coordinates are
//! `(p_x, p_z, pitch, hip_l, knee_l, ankle_l, hip_r, knee_r, ankle_r)`.
//! All angles are counter-clockwise in the sagittal (x forward, z up) plane,
//! so positive hip angles swing the leg forward and positive pitch leans the
//! torso back.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Number of generalized coordinates.
pub const NQ: usize = 9;
/// Number of actuated joints.
pub const NU: usize = 6;
/// Number of rigid links.
pub const NLINKS: usize = 7;

pub const TORSO: usize = 0;
pub const THIGH_L: usize = 1;
pub const SHANK_L: usize = 2;
pub const FOOT_L: usize = 3;
pub const THIGH_R: usize = 4;
pub const SHANK_R: usize = 5;
pub const FOOT_R: usize = 6;

/// Parent link of each joint; the child of joint `j` is link `j + 1`.
pub const JOINT_PARENTS: [usize; NU] = [TORSO, THIGH_L, SHANK_L, TORSO, THIGH_R, SHANK_R];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// Index of the hip joint within the actuated vector.
    pub fn hip(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 3,
        }
    }

    pub fn knee(self) -> usize {
        self.hip() + 1
    }

    pub fn ankle(self) -> usize {
        self.hip() + 2
    }

    pub fn foot_link(self) -> usize {
        match self {
            Side::Left => FOOT_L,
            Side::Right => FOOT_R,
        }
    }
}

/// Mass properties and geometry of one link.
///
/// `length` runs from the proximal joint to the distal joint along the link
/// axis (downwards for leg links, upwards for the torso). For a foot the
/// length is the ankle height above the sole. The COM sits `com_along` along
/// the axis and `com_perp` forward of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkParams {
    pub name: String,
    /// kg
    pub mass: f64,
    /// m
    pub length: f64,
    /// m
    pub com_along: f64,
    /// m
    pub com_perp: f64,
    /// kg·m² about the COM
    pub inertia: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    pub parent: usize,
    pub child: usize,
    /// +1 or -1; flips the positive direction of the joint coordinate.
    pub axis_sign: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FootGeometry {
    /// Distance of the toe ahead of the ankle, m.
    pub toe_offset: f64,
    /// Distance of the heel behind the ankle, m.
    pub heel_offset: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotModel {
    pub links: Vec<LinkParams>,
    pub joints: Vec<JointSpec>,
    pub foot: FootGeometry,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    pub friction: f64,
}

fn default_gravity() -> f64 {
    9.81
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("expected {expected} links, found {found}")]
    LinkCount { expected: usize, found: usize },
    #[error("expected {expected} joints, found {found}")]
    JointCount { expected: usize, found: usize },
    #[error("link `{name}`: {what} must be positive, got {value}")]
    NonPositive {
        name: String,
        what: &'static str,
        value: f64,
    },
    #[error("link `{name}`: non-finite parameter")]
    NonFinite { name: String },
    #[error("joint {index} connects {parent}->{child}, expected {want_parent}->{want_child}")]
    Topology {
        index: usize,
        parent: usize,
        child: usize,
        want_parent: usize,
        want_child: usize,
    },
    #[error("joint {index}: axis_sign must be +1 or -1, got {value}")]
    AxisSign { index: usize, value: f64 },
    #[error("foot geometry must satisfy toe_offset > 0 > -heel_offset")]
    DegenerateSole,
    #[error("gravity must be finite and non-negative, friction finite and non-negative")]
    Environment,
}

impl RobotModel {
    /// Desk-scale default plant: 36 kg, 0.86 m hip height.
    pub fn planar_biped() -> Self {
        let leg = |side: &str| {
            vec![
                LinkParams {
                    name: format!("thigh_{side}"),
                    mass: 4.0,
                    length: 0.40,
                    com_along: 0.17,
                    com_perp: 0.0,
                    inertia: 0.06,
                },
                LinkParams {
                    name: format!("shank_{side}"),
                    mass: 2.5,
                    length: 0.40,
                    com_along: 0.17,
                    com_perp: 0.0,
                    inertia: 0.035,
                },
                LinkParams {
                    name: format!("foot_{side}"),
                    mass: 1.5,
                    length: 0.06,
                    com_along: 0.04,
                    com_perp: 0.04,
                    inertia: 0.01,
                },
            ]
        };
        let mut links = vec![LinkParams {
            name: "torso".to_string(),
            mass: 20.0,
            length: 0.50,
            com_along: 0.20,
            com_perp: 0.0,
            inertia: 0.60,
        }];
        links.extend(leg("l"));
        links.extend(leg("r"));
        let names = ["hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r"];
        let joints = names
            .iter()
            .enumerate()
            .map(|(j, n)| JointSpec {
                name: n.to_string(),
                parent: JOINT_PARENTS[j],
                child: j + 1,
                axis_sign: 1.0,
            })
            .collect();
        Self {
            links,
            joints,
            foot: FootGeometry {
                toe_offset: 0.16,
                heel_offset: 0.06,
            },
            gravity: 9.81,
            friction: 0.8,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.links.len() != NLINKS {
            return Err(ModelError::LinkCount {
                expected: NLINKS,
                found: self.links.len(),
            });
        }
        if self.joints.len() != NU {
            return Err(ModelError::JointCount {
                expected: NU,
                found: self.joints.len(),
            });
        }
        for l in &self.links {
            let vals = [l.mass, l.length, l.com_along, l.com_perp, l.inertia];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite {
                    name: l.name.clone(),
                });
            }
            for (what, value) in [("mass", l.mass), ("length", l.length), ("inertia", l.inertia)] {
                if value <= 0.0 {
                    return Err(ModelError::NonPositive {
                        name: l.name.clone(),
                        what,
                        value,
                    });
                }
            }
        }
        for (index, j) in self.joints.iter().enumerate() {
            if j.parent != JOINT_PARENTS[index] || j.child != index + 1 {
                return Err(ModelError::Topology {
                    index,
                    parent: j.parent,
                    child: j.child,
                    want_parent: JOINT_PARENTS[index],
                    want_child: index + 1,
                });
            }
            if j.axis_sign != 1.0 && j.axis_sign != -1.0 {
                return Err(ModelError::AxisSign {
                    index,
                    value: j.axis_sign,
                });
            }
        }
        let f = self.foot;
        if !(f.toe_offset > 0.0 && -f.heel_offset < 0.0) || !f.toe_offset.is_finite() || !f.heel_offset.is_finite() {
            return Err(ModelError::DegenerateSole);
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite() && self.friction >= 0.0 && self.friction.is_finite()) {
            return Err(ModelError::Environment);
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    /// Hip height above the ground with straight legs and flat feet.
    pub fn standing_height(&self) -> f64 {
        self.links[THIGH_L].length + self.links[SHANK_L].length + self.links[FOOT_L].length
    }

    pub fn ankle_height(&self) -> f64 {
        self.links[FOOT_L].length
    }

    pub fn axis_sign(&self, joint: usize) -> f64 {
        self.joints[joint].axis_sign
    }

    /// Copy with the torso+pelvis mass changed by `delta` kg.
    pub fn with_pelvis_mass_delta(&self, delta: f64) -> Self {
        let mut m = self.clone();
        m.links[TORSO].mass += delta;
        m
    }

    /// Copy with the torso+pelvis COM shifted forward by `dx` m.
    pub fn with_pelvis_com_offset(&self, dx: f64) -> Self {
        let mut m = self.clone();
        m.links[TORSO].com_perp += dx;
        m
    }

    /// SHA-256 over the bit patterns of every parameter, as lowercase hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.links {
            h.update(l.name.as_bytes());
            for v in [l.mass, l.length, l.com_along, l.com_perp, l.inertia] {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for j in &self.joints {
            h.update(j.name.as_bytes());
            h.update((j.parent as u64).to_le_bytes());
            h.update((j.child as u64).to_le_bytes());
            h.update(j.axis_sign.to_bits().to_le_bytes());
        }
        for v in [self.foot.toe_offset, self.foot.heel_offset, self.gravity, self.friction] {
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}
