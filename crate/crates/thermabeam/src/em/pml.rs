//! Uniaxial absorbing-layer coefficient tables.
//!
//! The stretching `s = kappa + sigma / (j omega eps0)` is applied per axis in
//! the D/B formulation: each first-order "divide by s" update uses the damped
//! pair `(a, b)` and each "multiply by s" recovery uses `(kappa, sigma)`
//! directly. Conductivity is graded polynomially from zero at the interface
//! to `sigma_max` at the outer wall; `sigma_max` comes from the requested
//! theoretical normal-incidence reflection through the layer and back.
//!
//! All tables are evaluated at both integer (node) and half-integer (edge)
//! positions so the staggered fields see a continuous profile.

use crate::constants::{EPS0, MU0};
use crate::grid::GridSpec;

/// Per-side enable switches; disabling an axis leaves that boundary as a bare
/// perfect electric conductor (used by quasi-1D validation setups).
#[derive(Clone, Copy, Debug)]
pub struct PmlAxes {
    pub x: bool,
    pub y: bool,
}

impl Default for PmlAxes {
    fn default() -> Self {
        PmlAxes { x: true, y: true }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PmlConfig {
    pub axes: PmlAxes,
    /// Polynomial grading order.
    pub order: f64,
    /// Target theoretical round-trip reflection (power ratio at normal
    /// incidence); the discrete layer performs a little worse.
    pub r0: f64,
    /// Real coordinate-stretch maximum; 1 disables stretching.
    pub kappa_max: f64,
}

impl Default for PmlConfig {
    fn default() -> Self {
        PmlConfig {
            axes: PmlAxes::default(),
            order: 3.0,
            r0: 1e-8,
            kappa_max: 1.0,
        }
    }
}

/// Damped-update pair for "divide by s": `new = a * old + b * rhs`.
#[inline]
fn update_pair(kappa: f64, sigma: f64, dt: f64) -> (f64, f64) {
    let den = 2.0 * EPS0 * kappa + sigma * dt;
    ((2.0 * EPS0 * kappa - sigma * dt) / den, 2.0 * EPS0 * dt / den)
}

/// One axis worth of coefficient tables.
pub struct AxisTables {
    /// Pz/By-style update pair at node (integer) positions.
    pub node_a: Vec<f64>,
    pub node_b: Vec<f64>,
    /// Division pair without the timestep factor, for updates driven by a
    /// difference of an auxiliary quantity rather than a time derivative:
    /// `new = node_a * old + node_c * (aux_new - aux_old)`.
    pub node_c: Vec<f64>,
    /// Update pair at edge (half-integer, +1/2) positions.
    pub edge_a: Vec<f64>,
    pub edge_b: Vec<f64>,
    /// Recovery multipliers from node-position (kappa, sigma):
    /// `h += rec_k * dB + rec_s * (B_new + B_old)`.
    pub rec_k: Vec<f64>,
    pub rec_s: Vec<f64>,
    /// First and one-past-last node index with zero stretching.
    pub interior: (usize, usize),
    /// Same for edge positions.
    pub interior_edge: (usize, usize),
}

impl AxisTables {
    /// Build tables for an axis of `n` nodes with an absorbing layer of
    /// `thickness` cells on each end, or a disabled (pass-through) axis.
    pub fn build(
        n: usize,
        thickness: usize,
        dx: f64,
        dt: f64,
        cfg: &PmlConfig,
        enabled: bool,
        n_background: f64,
    ) -> AxisTables {
        let mut t = AxisTables {
            node_a: vec![1.0; n],
            node_b: vec![dt; n],
            node_c: vec![1.0; n],
            edge_a: vec![1.0; n],
            edge_b: vec![dt; n],
            rec_k: vec![1.0 / MU0; n],
            rec_s: vec![0.0; n],
            interior: (0, n),
            interior_edge: (0, n),
        };
        if !enabled {
            return t;
        }
        let m = cfg.order;
        let d = thickness as f64 * dx;
        // one-way decay exponent of a normally incident wave through the
        // graded layer is n * eta0 * sigma_max * d / (m + 1); round trip
        // doubles it, giving R0 = exp(-2 n eta0 sigma_max d / (m + 1))
        let eta0 = (MU0 / EPS0).sqrt();
        let sigma_max = -(m + 1.0) * cfg.r0.ln() / (2.0 * eta0 * n_background.max(1.0) * d);
        let tf = thickness as f64;
        let last = (n - 1) as f64;
        let profile = |u: f64| -> (f64, f64) {
            // depth in [0, 1] from the interface towards the outer wall
            let depth = if u < tf {
                (tf - u) / tf
            } else if u > last - tf {
                (u - (last - tf)) / tf
            } else {
                return (1.0, 0.0);
            };
            let g = depth.powf(m);
            (1.0 + (cfg.kappa_max - 1.0) * g, sigma_max * g)
        };
        for i in 0..n {
            let (k_node, s_node) = profile(i as f64);
            let (a, b) = update_pair(k_node, s_node, dt);
            t.node_a[i] = a;
            t.node_b[i] = b;
            t.node_c[i] = b / dt;
            t.rec_k[i] = k_node / MU0;
            t.rec_s[i] = s_node * dt / (2.0 * EPS0 * MU0);
            let (k_edge, s_edge) = profile(i as f64 + 0.5);
            let (ea, eb) = update_pair(k_edge, s_edge, dt);
            t.edge_a[i] = ea;
            t.edge_b[i] = eb;
        }
        // nodes t .. n-1-t carry zero stretch (inclusive); edges t .. n-2-t
        t.interior = (thickness, n - thickness);
        t.interior_edge = (thickness, n - 1 - thickness);
        t
    }
}

/// Electromagnetic timestep and samples-per-period for a grid and carrier.
///
/// The Courant-limited raw step is shrunk (never grown) so one carrier period
/// is an exact integer number of steps, which keeps period-synchronous
/// averages free of leakage.
pub fn timestep_for(grid: &GridSpec, carrier_hz: f64) -> (f64, usize) {
    let period = 1.0 / carrier_hz;
    let n_p = (period / grid.dt_raw()).ceil() as usize;
    (period / n_p as f64, n_p)
}
