use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Obb, PosedMesh, Pose, CONTACT_TOLERANCE};

/// Thickness of the inner pad layer that may touch the grasped object
/// during collision checks at grasp width.
pub const PAD_CLEARANCE: f64 = 0.003;

/// Simplified parallel-jaw hand.
///
/// Grasp frame: origin midway between the pad inner faces, x the closing
/// axis, z the approach direction (the hand body lies towards -z). Each
/// finger is a box whose tip, `pad_height` long, is the contact pad; the
/// `finger_length` above it links to the palm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallelJawGripper {
    pub max_opening: f64,
    pub pad_height: f64,
    pub pad_width: f64,
    pub pad_thickness: f64,
    pub finger_length: f64,
    /// Palm box extents along the grasp-frame x, y, z axes.
    pub palm: [f64; 3],
}

impl Default for ParallelJawGripper {
    fn default() -> Self {
        ParallelJawGripper {
            max_opening: 0.08,
            pad_height: 0.018,
            pad_width: 0.022,
            pad_thickness: 0.010,
            finger_length: 0.045,
            palm: [0.063, 0.028, 0.035],
        }
    }
}

/// Collision boxes of one gripper configuration in the grasp frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GripperBoxes {
    /// Finger at -x, finger at +x, palm.
    pub boxes: [Obb; 3],
}

impl GripperBoxes {
    pub fn transformed(&self, pose: &Pose) -> GripperBoxes {
        GripperBoxes { boxes: self.boxes.map(|b| b.transformed(pose)) }
    }

    pub fn min_z(&self) -> f64 {
        self.boxes.iter().map(Obb::min_z).fold(f64::INFINITY, f64::min)
    }

    pub fn touches_ground(&self) -> bool {
        self.min_z() < CONTACT_TOLERANCE
    }

    pub fn collides(&self, mesh: &PosedMesh) -> bool {
        self.boxes.iter().any(|b| b.collides(mesh))
    }
}

impl ParallelJawGripper {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("max_opening", self.max_opening),
            ("pad_height", self.pad_height),
            ("pad_width", self.pad_width),
            ("pad_thickness", self.pad_thickness),
            ("palm", self.palm[0].min(self.palm[1]).min(self.palm[2])),
        ];
        for (name, v) in dims {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.finger_length.is_finite() && self.finger_length >= 0.0) {
            return Err(Error::invalid("finger_length", "must be non-negative"));
        }
        if self.pad_thickness <= PAD_CLEARANCE {
            return Err(Error::invalid("pad_thickness", format!("must exceed the {PAD_CLEARANCE} m pad clearance")));
        }
        Ok(())
    }

    /// Boxes with pad inner faces at `+/-width/2`; `clearance` strips that
    /// much from each finger's inner side.
    pub fn boxes(&self, width: f64, clearance: f64) -> GripperBoxes {
        let frame = Pose::identity();
        let (t, h) = (self.pad_thickness, self.pad_height / 2.0);
        let y = self.pad_width / 2.0;
        let z_top = h;
        let z_root = -h - self.finger_length;
        let x_in = width / 2.0 + clearance;
        let x_out = width / 2.0 + t;
        let left = Obb::from_bounds(&frame, Vector3::new(-x_out, -y, z_root), Vector3::new(-x_in, y, z_top));
        let right = Obb::from_bounds(&frame, Vector3::new(x_in, -y, z_root), Vector3::new(x_out, y, z_top));
        let [px, py, pz] = self.palm;
        let palm = Obb::from_bounds(
            &frame,
            Vector3::new(-px / 2.0, -py / 2.0, z_root - pz),
            Vector3::new(px / 2.0, py / 2.0, z_root),
        );
        GripperBoxes { boxes: [left, right, palm] }
    }

    /// Pad contact face of finger `side` (0: -x, 1: +x) at opening `width`,
    /// as (centre, half extent along y, half extent along z) in the grasp frame.
    pub fn pad_face(&self, width: f64, side: usize) -> (Vector3<f64>, f64, f64) {
        let sign = if side == 0 { -1.0 } else { 1.0 };
        (Vector3::new(sign * width / 2.0, 0.0, 0.0), self.pad_width / 2.0, self.pad_height / 2.0)
    }
}
