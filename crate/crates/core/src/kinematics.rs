//! Planar forward kinematics and point Jacobians.

use crate::model::{RobotModel, Side, NLINKS, NQ, TORSO};

/// Joints between the base and each link, proximal first.
const PATHS: [&[usize]; NLINKS] = [&[], &[0], &[0, 1], &[0, 1, 2], &[3], &[3, 4], &[3, 4, 5]];

/// Rotate a local `(x, z)` vector by a counter-clockwise angle.
#[inline]
pub fn rotate(theta: f64, r: [f64; 2]) -> [f64; 2] {
    let (s, c) = libm::sincos(theta);
    [c * r[0] - s * r[1], s * r[0] + c * r[1]]
}

/// Derivative of `rotate(θ, r)` with respect to θ, given the rotated vector.
#[inline]
fn perp(w: [f64; 2]) -> [f64; 2] {
    [-w[1], w[0]]
}

/// Position, velocity and first-order kinematics of one body-fixed point.
#[derive(Clone, Debug)]
pub struct PointKinematics {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    /// Rows are world x and z.
    pub jac: [[f64; NQ]; 2],
    /// `J̇ q̇`, the velocity-product part of the point acceleration.
    pub bias: [f64; 2],
}

/// Link angles and rates for one `(q, q̇)`.
#[derive(Clone, Debug)]
pub struct Pose<'m> {
    model: &'m RobotModel,
    q: [f64; NQ],
    qd: [f64; NQ],
    theta: [f64; NLINKS],
    omega: [f64; NLINKS],
}

impl<'m> Pose<'m> {
    pub fn new(model: &'m RobotModel, q: &[f64; NQ], qd: &[f64; NQ]) -> Self {
        let mut theta = [q[2]; NLINKS];
        let mut omega = [qd[2]; NLINKS];
        for (link, path) in PATHS.iter().enumerate() {
            for &j in path.iter() {
                let s = model.axis_sign(j);
                theta[link] += s * q[3 + j];
                omega[link] += s * qd[3 + j];
            }
        }
        Self {
            model,
            q: *q,
            qd: *qd,
            theta,
            omega,
        }
    }

    pub fn at_rest(model: &'m RobotModel, q: &[f64; NQ]) -> Self {
        Self::new(model, q, &[0.0; NQ])
    }

    /// Absolute (world) angle of a link.
    pub fn angle(&self, link: usize) -> f64 {
        self.theta[link]
    }

    pub fn angular_rate(&self, link: usize) -> f64 {
        self.omega[link]
    }

    /// Jacobian row of a link's absolute angle.
    pub fn angle_jac(&self, link: usize) -> [f64; NQ] {
        let mut row = [0.0; NQ];
        row[2] = 1.0;
        for &j in PATHS[link] {
            row[3 + j] = self.model.axis_sign(j);
        }
        row
    }

    /// Local-frame COM of a link.
    pub fn com_local(&self, link: usize) -> [f64; 2] {
        let l = &self.model.links[link];
        if link == TORSO {
            [l.com_perp, l.com_along]
        } else {
            [l.com_perp, -l.com_along]
        }
    }

    /// Kinematics of the point at local coordinates `local` on `link`.
    pub fn point(&self, link: usize, local: [f64; 2]) -> PointKinematics {
        let mut pos = [self.q[0], self.q[1]];
        let mut jac = [[0.0; NQ]; 2];
        jac[0][0] = 1.0;
        jac[1][1] = 1.0;
        let mut bias = [0.0; 2];

        let path = PATHS[link];
        let mut add_segment = |seg_link: usize, w: [f64; 2], joints: &[usize]| {
            pos[0] += w[0];
            pos[1] += w[1];
            let dw = perp(w);
            for r in 0..2 {
                jac[r][2] += dw[r];
                for &j in joints {
                    jac[r][3 + j] += self.model.axis_sign(j) * dw[r];
                }
            }
            let om = self.omega[seg_link];
            bias[0] -= om * om * w[0];
            bias[1] -= om * om * w[1];
        };
        // proximal leg segments: each ancestor link contributes its full length
        for k in 0..path.len().saturating_sub(1) {
            let anc = path[k] + 1;
            let len = self.model.links[anc].length;
            let w = rotate(self.theta[anc], [0.0, -len]);
            add_segment(anc, w, &path[..=k]);
        }
        let w = rotate(self.theta[link], local);
        add_segment(link, w, path);

        let mut vel = [0.0; 2];
        for r in 0..2 {
            vel[r] = jac[r].iter().zip(&self.qd).map(|(a, b)| a * b).sum();
        }
        PointKinematics { pos, vel, jac, bias }
    }

    pub fn com_point(&self, link: usize) -> PointKinematics {
        self.point(link, self.com_local(link))
    }

    pub fn ankle(&self, side: Side) -> PointKinematics {
        self.point(side.foot_link(), [0.0, 0.0])
    }

    pub fn toe(&self, side: Side) -> PointKinematics {
        let h = self.model.ankle_height();
        self.point(side.foot_link(), [self.model.foot.toe_offset, -h])
    }

    pub fn heel(&self, side: Side) -> PointKinematics {
        let h = self.model.ankle_height();
        self.point(side.foot_link(), [-self.model.foot.heel_offset, -h])
    }

    /// Height of the lower of toe and heel.
    pub fn sole_height(&self, side: Side) -> f64 {
        self.toe(side).pos[1].min(self.heel(side).pos[1])
    }

    /// Whole-body centre of mass.
    pub fn com(&self) -> [f64; 2] {
        let mut acc = [0.0; 2];
        let total = self.model.total_mass();
        for link in 0..NLINKS {
            let m = self.model.links[link].mass;
            let p = self.com_point(link).pos;
            acc[0] += m * p[0];
            acc[1] += m * p[1];
        }
        [acc[0] / total, acc[1] / total]
    }
}
