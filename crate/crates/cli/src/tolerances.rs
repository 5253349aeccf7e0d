//! Pinned thresholds and resolutions of the acceptance suite. No other
//! numbers decide a verdict.

/// Pairs exercised by the zonal criteria: three critical, four not.
pub const PAIRS: [(u32, u32); 7] = [(1, 2), (2, 4), (3, 6), (1, 3), (2, 5), (3, 7), (1, 4)];

/// Critical pairs with the `n = 2m` closed forms.
pub const CRITICAL_PAIRS: [(u32, u32); 3] = [(1, 2), (2, 4), (3, 6)];

/// Non-critical pairs with the renormalized closed forms.
pub const SUBCRITICAL_PAIRS: [(u32, u32); 3] = [(1, 3), (2, 5), (1, 4)];

/// Pairs of the local-inverse and witness criterion.
pub const FREDHOLM_PAIRS: [(u32, u32); 3] = [(1, 2), (1, 3), (2, 4)];

/// Zonal band limit and oversampling of the experiments: the smallest
/// setting at which amplitude-0.2 fields pass every aliasing check.
pub const ZONAL_LMAX: usize = 32;
pub const ZONAL_OVERSAMPLE: f64 = 5.0;

/// Band limit and oversampling on the full two-sphere.
pub const SPHERE2_LMAX: usize = 32;
pub const SPHERE2_OVERSAMPLE: f64 = 3.0;

/// Exhaustive exact range: `m <= 5`, `n <= 12`, `i <= 50`.
pub const SPECTRA_MAX_M: u32 = 5;
pub const SPECTRA_MAX_N: u32 = 12;
pub const SPECTRA_IMAX: u64 = 50;
pub const SPECTRA_RUNTIME_SECONDS: f64 = 1.0;

/// `|L z| / |z|`.
pub const KERNEL: f64 = 1e-11;

pub const SELF_ADJOINT_SEEDS: u64 = 20;
pub const SELF_ADJOINT_AMPLITUDE: f64 = 0.2;
/// Relative asymmetry of `dQ[u]` in `L2(dmu_u)`.
pub const SELF_ADJOINT: f64 = 1e-9;

/// Richardson step of the coefficient extraction: the `h^4` truncation and
/// the `eps / h^3` roundoff balance near `2e-3` for every pair.
pub const EXPANSION_STEP: f64 = 0.002;
/// Relative L2 agreement of `c2`, `c3` with the closed forms.
pub const CLOSED_FORM: f64 = 1e-6;

/// `32 pi / 15` on the two-sphere, absolute.
pub const Z_PAIRING_S2: f64 = 1e-8;

pub const LOCAL_INVERSE_SEEDS: u64 = 20;
pub const LOCAL_INVERSE_AMPLITUDE: f64 = 0.1;
/// `sup |S(modified_op(u)) - u|`.
pub const LOCAL_INVERSE: f64 = 1e-10;
/// Fredholm residual bound, in units of `tol max(1, |f|)`.
pub const FREDHOLM_FACTOR: f64 = 10.0;
/// Relative agreement of the witness cubic with `P1 c3`.
pub const WITNESS_CUBIC: f64 = 0.02;
/// Absolute size of the witness linear coefficient.
pub const WITNESS_LINEAR: f64 = 1e-8;

pub const KW_ZONAL_SEEDS: u64 = 20;
pub const KW_SPHERE2_SEEDS: u64 = 10;
pub const KW_AMPLITUDE: f64 = 0.2;
/// Amplitude on the two-sphere.
pub const KW_SPHERE2_AMPLITUDE: f64 = 0.15;
/// Scale-relative Kazdan-Warner integral.
pub const KW: f64 = 1e-8;
/// Off-graph control against `lambda_1 int z^2`, absolute.
pub const KW_CONTROL: f64 = 1e-10;

pub const MOSER_SEEDS: u64 = 5;
pub const MOSER_AMPLITUDE: f64 = 0.05;
/// `|D(f)|` and `|Q[S(f)] - f|` for even data.
pub const MOSER: f64 = 1e-9;

pub const PULLBACK_T: [f64; 3] = [0.05, 0.1, 0.5];
/// `|Q[u_t]|`, absolute.
pub const PULLBACK_FLAT: f64 = 1e-9;
/// Initial step and halvings of the derivative check.
pub const DERIVATIVE_STEP: f64 = 0.1;
pub const DERIVATIVE_LEVELS: usize = 4;
/// Observed order must lie within this distance of 2.
pub const DERIVATIVE_ORDER: f64 = 0.1;
/// `(t, s)` pairs of the group law.
pub const GROUP_LAW_PAIRS: [(f64, f64); 3] = [(0.05, 0.1), (0.1, 0.5), (0.5, -0.3)];
pub const GROUP_LAW: f64 = 1e-10;
/// Nodal agreement of the two conformal-factor expressions.
pub const CONFORMALITY: f64 = 1e-11;

pub const EQUIVARIANCE_ROTATIONS: u64 = 5;
pub const EQUIVARIANCE_AMPLITUDE: f64 = 0.05;
pub const EQUIVARIANCE: f64 = 1e-8;
