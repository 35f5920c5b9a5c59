//! Mechanical energy and external-work bookkeeping.

use serde::{Deserialize, Serialize};

use crate::dynamics::{MotionKind, StepReport, World, WorldState};
use crate::geometry::Vec2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub gravitational: f64,
    pub elastic: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostIncrement {
    pub d_work_ext_abs: f64,
    pub d_energy: f64,
    pub d_noncons: f64,
}

/// Kinetic, gravitational and spring energy of the dynamic bodies.
///
/// Gravitational energy is measured against a datum line at `datum_height`, taken
/// along the world y axis; kinematic and static bodies carry no energy.
pub fn mechanical_energy(world: &World, state: &WorldState, datum_height: f64) -> EnergyBreakdown {
    let g = world.gravity();
    let datum = Vec2::new(0.0, datum_height);
    let mut kinetic = 0.0;
    let mut gravitational = 0.0;
    for (i, b) in world.bodies().iter().enumerate() {
        if b.motion_kind != MotionKind::Dynamic {
            continue;
        }
        let t = state.twists[i];
        kinetic += 0.5 * b.mass * (t.vx * t.vx + t.vy * t.vy) + 0.5 * b.inertia * t.omega * t.omega;
        gravitational -= b.mass * g.dot(state.poses[i].position() - datum);
    }
    let mut elastic = 0.0;
    for (s, sp) in world.springs().iter().enumerate() {
        if world.bodies()[sp.body_index].motion_kind != MotionKind::Dynamic {
            continue;
        }
        let anchor = state.anchors.get(s).copied().unwrap_or(sp.anchor_world);
        let ext = (state.poses[sp.body_index].position() - anchor).norm() - sp.rest_length;
        elastic += 0.5 * sp.stiffness * ext * ext;
    }
    EnergyBreakdown {
        kinetic,
        gravitational,
        elastic,
        total: kinetic + gravitational + elastic,
    }
}

/// Per-step external work magnitude: whatever changed the energy that contact
/// dissipation does not explain.
pub fn cost_increment(e_before: f64, e_after: f64, report: &StepReport) -> CostIncrement {
    let d_energy = e_after - e_before;
    let d_noncons = report.w_noncons;
    CostIncrement {
        d_work_ext_abs: (d_energy - d_noncons).abs(),
        d_energy,
        d_noncons,
    }
}

pub fn path_cost(increments: &[CostIncrement]) -> f64 {
    increments.iter().map(|c| c.d_work_ext_abs).sum()
}
