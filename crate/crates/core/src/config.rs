//! Numerical and classification parameters.
//!
//! Defaults are chosen so that the table accuracy (~1e-9 absolute over one
//! period) comfortably supports the verification tolerances: the adaptive
//! solver runs at rtol 1e-11 / atol 1e-12, and the fixed-step hierarchy solves
//! use the shared grid with two substeps per interval (fifth-order local
//! advance, interval h ≈ T/8192).

/// Parameters of the integrators, the shared grid and root/event refinement.
#[derive(Debug, Clone)]
pub struct NumericsConfig {
    /// Relative tolerance of the adaptive orbit integration.
    pub rtol: f64,
    /// Absolute tolerance of the adaptive orbit integration.
    pub atol: f64,
    /// Number of intervals of the shared storage grid on [0, T].
    pub grid_intervals: usize,
    /// Fixed-step substeps per grid interval in the hierarchy solves.
    pub substeps: usize,
    /// Give up searching for the period beyond this time.
    pub max_time: f64,
    /// Scan range for the automatic y_max bracket search.
    pub ymax_scan_lo: f64,
    pub ymax_scan_hi: f64,
    /// Samples of the bracket scan.
    pub ymax_scan_samples: usize,
    /// Energy-conservation guard along the orbit.
    pub tol_energy: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-12,
            grid_intervals: 4096,
            substeps: 2,
            max_time: 1e4,
            ymax_scan_lo: -64.0,
            ymax_scan_hi: 64.0,
            ymax_scan_samples: 1 << 16,
            tol_energy: 1e-9,
        }
    }
}

/// Tolerances of the bifurcation decision cascade.
///
/// Commensurate with table accuracy ~1e-9: the singularity test is looser (the
/// trace carries integration error), the discriminators tighter.
#[derive(Debug, Clone)]
pub struct ClassifyTols {
    /// |trace − 2| below this means singular.
    pub tol_singular: f64,
    /// |Tr′| below this means the crossing is not transversal.
    pub tol_prime: f64,
    /// |P̃_q̃q̃| above this means transcritical.
    pub tol_2: f64,
    /// |ε_B″(0)| above this means fork.
    pub tol_3: f64,
    /// Denominator guard for the fork-curvature division.
    pub tol_guard: f64,
}

impl Default for ClassifyTols {
    fn default() -> Self {
        Self {
            tol_singular: 1e-6,
            tol_prime: 1e-8,
            tol_2: 1e-8,
            tol_3: 1e-8,
            tol_guard: 1e-10,
        }
    }
}

/// Parameters of the finite-difference oracle.
#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Fixed steps per reference period in the direct flow integration.
    pub steps_per_period: usize,
    /// Base step in q and p (multiplied by max(1, |y_max|)).
    pub h_q: f64,
    /// Base step in ε.
    pub h_eps: f64,
    /// Base step in δ.
    pub h_delta: f64,
    /// Damped-Newton iteration cap for the starting-point equation.
    pub newton_max: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 4096,
            h_q: 1e-3,
            h_eps: 1e-4,
            h_delta: 1e-4,
            newton_max: 50,
        }
    }
}
