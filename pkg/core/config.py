"""
Numerical constants and defaults for the coded AMP toolkit.

Every library function takes these as keyword defaults, so each knob can be
overridden per call. The harness reads the same module for its defaults.
"""

# Scalar MMSE quadrature
QUADRATURE_ORDER = 40  # Gauss-Hermite nodes per real dimension
MC_FALLBACK_SIZE = 64  # Constellations larger than this use Monte Carlo
MC_SAMPLES = 1_000_000  # Samples for the Monte Carlo fallback
MC_SEED = 20_190_101  # Fixed seed keeps the fallback deterministic

# Integral grid for ρ (log-spaced, trapezoid rule)
GRID_MIN = 1e-4
GRID_MAX = 1e4  # Cap for the infinite-limit integrals
GRID_POINTS = 2000

# State evolution
SE_STEP_TOL = 1e-12  # Stop when |v(t+1) - v(t)| drops below this
SE_RESIDUAL_TOL = 1e-10  # Fixed-point residual |ω(ρ*) - φ⁻¹(ρ*)|
SE_MAX_ITER = 10_000
CROSSING_GRID_POINTS = 4000  # Log grid for the single-crossing scan
BISECT_RTOL = 1e-10

# AMP receiver
AMP_MAX_ITER = 50
AMP_TOL = 1e-6
BLOWUP_FACTOR = 10.0  # Abort when v̂ exceeds this multiple of its minimum
BLOWUP_FLOOR = 1e-6  # v̂ minimum is floored here so round-off cannot trip the guard
RHO_CAP = 1e12  # Tracked SINR ceiling; the denoisers take finite rho only

# LDPC decoding
BP_MAX_ITER = 200  # Inner iterations per APP call (library default)
LLR_CLIP = 50.0  # Message magnitude clip for the tanh rule
CODE_SEED = 7  # Default seed for constructions and the coset word

# Coded runs driven by the harness (desk scale)
CODED_OUTER_ITER = 60
CODED_INNER_ITER = 50
CODED_BLOCK_LENGTH = 2**14

# Matching / code design
MATCH_MARGIN = 1e-3  # Safety margin ε in MSE units, also the convergence floor
LP_GRID_POINTS = 64  # ρ points carrying LP constraints
LP_TUNNEL_POINTS = 48  # Check-to-variable MI points per tunnel constraint
LP_MAX_ROUNDS = 20  # Re-linearisation rounds of the LP
LP_MAX_DV = 12
LP_CHECK_POINTS = 200  # MI points when verifying a candidate mixture
LP_PAIR_STEPS = 20  # Bisection steps of the two-degree mixture search
LP_STARTS = 3  # Best two-degree mixtures used as extra LP starting points
THRESHOLD_DB_RANGE = (-10.0, 30.0)
THRESHOLD_DB_TOL = 1e-3

# Debugging parameters
DEBUG_ENABLED = False  # Master debug toggle
DEBUG_LEVEL = 1  # 1=basic, 2=detailed, 3=verbose
DEBUG_SE = True  # Fixed-point progress and crossing flags
DEBUG_AMP = True  # Per-iteration AMP tracking
DEBUG_BP = True  # Inner decoder iterations
DEBUG_LP = True  # Code design rounds
DEBUG_RATE = True  # Rate notices
DEBUG_RUN = True  # Harness orchestration
