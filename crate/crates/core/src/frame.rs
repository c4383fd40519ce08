use crate::gate::{OccupancyWindow, Sigma, Zone};
use crate::geometry::Point;

/// Immutable per-tick V2V snapshot of one vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastFrame {
    pub id: usize,
    pub sigma: Sigma,
    pub z: f64,
    pub position: Point,
    pub v: f64,
    /// Arc length along the declared path.
    pub s: f64,
    /// Distance from the intersection center.
    pub d: f64,
    pub t_dz: Option<f64>,
    pub window: Option<OccupancyWindow>,
    pub zone: Zone,
}
