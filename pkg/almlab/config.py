"""
Solver configuration
"""
import os
from dotenv import load_dotenv

load_dotenv()


class SolverConfig:
    """Configuration for solver defaults, sampling and output"""

    BETA: float = float(os.getenv("ALMLAB_BETA", "1.0"))
    MAX_OUTER: int = int(os.getenv("ALMLAB_MAX_OUTER", "500"))
    TOL_PRIMAL: float = float(os.getenv("ALMLAB_TOL_PRIMAL", "1e-9"))
    TOL_STEP: float = float(os.getenv("ALMLAB_TOL_STEP", "1e-9"))

    INNER_TOL: float = float(os.getenv("ALMLAB_INNER_TOL", "1e-8"))
    INNER_MAX_ITER: int = int(os.getenv("ALMLAB_INNER_MAX_ITER", "100000"))
    INNER_TOL_EXPONENT: float = float(os.getenv("ALMLAB_INNER_TOL_EXPONENT", "2.0"))
    INNER_TOL_FLOOR: float = float(os.getenv("ALMLAB_INNER_TOL_FLOOR", "1e-13"))

    RANK_TOL: float = float(os.getenv("ALMLAB_RANK_TOL", "1e-10"))
    SAMPLES: int = int(os.getenv("ALMLAB_SAMPLES", "64"))
    SEED: int = int(os.getenv("ALMLAB_SEED", "0"))

    # Above this size operators stay implicit
    DENSE_LIMIT: int = int(os.getenv("ALMLAB_DENSE_LIMIT", "512"))

    OUT_DIR: str = os.getenv("ALMLAB_OUT_DIR", "almlab-out")


def resolve_out_dir(flag_value: str) -> str:
    """ALMLAB_OUT_DIR, when set, wins over the command-line flag."""
    return os.getenv("ALMLAB_OUT_DIR") or flag_value
