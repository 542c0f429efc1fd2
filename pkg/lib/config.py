class DefaultConfig:
    """
    Central configuration values for the secrecy engine.

    Parameters:
        None
    Returns:
        None
    Raises:
        None
    """

    SERIES_DEPTH = 25
    SERIES_MAX_DEPTH = 400
    SERIES_PRUNE = 1e-16
    SHADOWING_SURROGATE_M = 200.0
    COMPOSITION_BUDGET = 5_000_000
    EXPANSION = "convolution"

    EI_CROSSOVER = 2.0
    SPECFUN_MAX_ITER = 2000
    SPECFUN_EPS = 1e-15

    QUAD_ABS_TOL = 1e-9
    QUAD_REL_TOL = 1e-8
    QUAD_LIMIT = 400
    QUAD_ACCEPT_FACTOR = 1000.0

    MC_TRIALS = 1_000_000
    MC_SEED = 20240521
    MC_BLOCK_SIZE = 1 << 16
    MC_MODE = "analysis_consistent"
    INVERSE_CDF_TOL = 1e-10

    WORKERS = 4
    DEFAULT_METHOD = "quadrature"

    TOL_PROBABILITY = 5e-4
    TOL_CAPACITY_BITS = 5e-3
    MC_CONFIDENCE_Z = 2.576
    CLAMP_WARN_MARGIN = 1e-6

    LOG_FILE = "secrecy_engine.log"
    LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
