//! Boundary-object flags and indicator-gated loss aggregation.
//!
//! Shape-related losses (depth extent, z-center, voxel, mesh) only count for
//! instances whose amodal extent is fully inside the image and whose
//! z-center is in front of the camera.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DEPTH_EPS;
use crate::scalar::Scalar;
use crate::segmentation::{bbox_of_mask, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryReason {
    Ok,
    TouchesBorder,
    NonpositiveZc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFlag")]
pub struct CenteredFlag {
    pub is_centered: bool,
    pub reason: BoundaryReason,
}

#[derive(Deserialize)]
struct RawFlag {
    is_centered: bool,
    reason: BoundaryReason,
}

impl TryFrom<RawFlag> for CenteredFlag {
    type Error = String;

    fn try_from(raw: RawFlag) -> Result<Self, String> {
        if raw.is_centered != (raw.reason == BoundaryReason::Ok) {
            return Err(format!(
                "is_centered = {} contradicts reason {:?}",
                raw.is_centered, raw.reason
            ));
        }
        Ok(Self::from_reason(raw.reason))
    }
}

impl CenteredFlag {
    pub fn from_reason(reason: BoundaryReason) -> Self {
        Self {
            is_centered: reason == BoundaryReason::Ok,
            reason,
        }
    }

    pub fn centered() -> Self {
        Self::from_reason(BoundaryReason::Ok)
    }

    /// Both tests must pass; the first failure is reported.
    pub fn and(self, other: Self) -> Self {
        if self.is_centered {
            other
        } else {
            self
        }
    }
}

/// Boundary iff the mask's bounding box comes within `margin` pixels of an
/// image edge (`margin = 0` means touching it).
pub fn classify_boundary(
    amodal_mask: &BinaryMask,
    width: usize,
    height: usize,
    margin: usize,
) -> Result<CenteredFlag> {
    Error::check_dims((width, height), amodal_mask.dims())?;
    let b = bbox_of_mask(amodal_mask)?;
    let touches = b.x_min <= margin
        || b.y_min <= margin
        || b.x_max + margin >= width - 1
        || b.y_max + margin >= height - 1;
    Ok(CenteredFlag::from_reason(if touches {
        BoundaryReason::TouchesBorder
    } else {
        BoundaryReason::Ok
    }))
}

pub fn frustum_validity<T: Scalar>(z_c: T) -> CenteredFlag {
    CenteredFlag::from_reason(if z_c > T::lit(DEPTH_EPS) {
        BoundaryReason::Ok
    } else {
        BoundaryReason::NonpositiveZc
    })
}

/// Instance-independent loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UngatedLosses<T> {
    pub mask: T,
    pub r#box: T,
    pub class: T,
    pub panoptic: T,
    pub semantic: T,
    pub depth: T,
}

impl<T: Scalar> UngatedLosses<T> {
    fn terms(&self) -> [(&'static str, T); 6] {
        [
            ("mask", self.mask),
            ("box", self.r#box),
            ("class", self.class),
            ("panoptic", self.panoptic),
            ("semantic", self.semantic),
            ("depth", self.depth),
        ]
    }
}

/// Shape-related loss terms of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GatedLosses<T> {
    pub dz: T,
    pub zc: T,
    pub voxel: T,
    pub mesh: T,
}

impl<T: Scalar> GatedLosses<T> {
    fn terms(&self) -> [(&'static str, T); 4] {
        [
            ("dz", self.dz),
            ("zc", self.zc),
            ("voxel", self.voxel),
            ("mesh", self.mesh),
        ]
    }

    pub fn sum(&self) -> T {
        self.dz + self.zc + self.voxel + self.mesh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GatedReduction {
    Sum,
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLedger<T> {
    pub ungated: UngatedLosses<T>,
    pub gated: Vec<GatedLosses<T>>,
    pub flags: Vec<CenteredFlag>,
    #[serde(default)]
    pub reduction: GatedReduction,
}

impl<T: Scalar> LossLedger<T> {
    pub fn validate(&self) -> Result<()> {
        if self.gated.len() != self.flags.len() {
            return Err(Error::InvalidLedger(format!(
                "{} gated entries but {} flags",
                self.gated.len(),
                self.flags.len()
            )));
        }
        let check = |label: String, v: T| {
            if v.is_finite() && v >= T::zero() {
                Ok(())
            } else {
                Err(Error::InvalidLedger(format!("{label} = {v}")))
            }
        };
        for (name, v) in self.ungated.terms() {
            check(name.to_string(), v)?;
        }
        for (i, g) in self.gated.iter().enumerate() {
            for (name, v) in g.terms() {
                check(format!("instance {i} {name}"), v)?;
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ledger: Self = serde_json::from_str(text)?;
        ledger.validate()?;
        Ok(ledger)
    }
}

/// Total loss: every ungated term plus the reduced gated terms of centered
/// instances. Boundary instances never touch the arithmetic.
pub fn aggregate_loss<T: Scalar>(ledger: &LossLedger<T>) -> Result<T> {
    ledger.validate()?;
    let ungated = ledger
        .ungated
        .terms()
        .iter()
        .fold(T::zero(), |acc, (_, v)| acc + *v);
    let mut gated = T::zero();
    let mut centered = 0usize;
    for (g, flag) in ledger.gated.iter().zip(&ledger.flags) {
        if flag.is_centered {
            gated = gated + g.sum();
            centered += 1;
        }
    }
    let gated = match (ledger.reduction, centered) {
        (_, 0) => T::zero(),
        (GatedReduction::Sum, _) => gated,
        (GatedReduction::Mean, n) => gated / T::from_usize(n).unwrap(),
    };
    Ok(ungated + gated)
}
