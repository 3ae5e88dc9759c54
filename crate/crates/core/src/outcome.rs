use alloc::vec::Vec;

/// Result of one algorithm run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub declared_arm: usize,
    /// Stopping time: number of box selections.
    pub tau: u64,
    /// Whether `declared_arm` is the instance's best arm.
    pub correct: bool,
    /// Selections per box.
    pub box_counts: Vec<u64>,
    /// Pulls per arm.
    pub arm_counts: Vec<u64>,
    pub trace: Vec<TracePoint>,
}

/// Diagnostic sample of a track-and-stop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    /// `d_inf(N(t, .) / t, W*)` against the reference optimizer set.
    pub tracking_distance: f64,
    /// `Z(t)`, or NaN before every arm has been pulled.
    pub z: f64,
    pub zeta: f64,
}
