/// Tolerances and limits shared by the float paths and the pattern enumerator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    /// Relative tolerance used wherever a comparison has to go through floats.
    pub tol: f64,
    /// Maximum number of (z, sign) patterns a diamond-distance query may enumerate.
    pub pattern_cap: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            pattern_cap: 1 << 20,
        }
    }
}
