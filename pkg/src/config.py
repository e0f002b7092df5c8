"""
Configuration and run settings for the mixlab numerical laboratory.
"""

import os
from enum import Enum
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

# Load environment variables
load_dotenv('local.env')

DEFAULT_RHO = 2.0 ** 0.25
FINE_RHO = 2.0 ** 0.125
DEFAULT_KAPPA = 1.0 / 3.0
SCHEME_KAPPA = 1.0 / 12.0
OUTER_RADIUS = 0.25

QUAD_EPSABS = 1e-12
QUAD_EPSREL = 1e-9
QUAD_LIMIT = 200

# Rectangle pairs summed one by one before switching to structured sums
EXACT_PAIR_BUDGET = 20000
# Explicit same-level offsets before the zeta tail takes over
SAME_LEVEL_CUTOFF = 256

SLIDE_BFS_MAX_N = 2


class FlowFamily(Enum):
    """Analytic divergence-free flow families."""
    SHEAR = "shear"
    ALTERNATING = "alternating"
    TRANSLATION = "translation"


class SlideMode(Enum):
    """Modes of the sliding-puzzle explorer."""
    BFS = "bfs"
    GREEDY = "greedy"


class GreedyStrategy(Enum):
    """Round shapes of the greedy slider."""
    HALVING = "halving"
    CAT_MAP = "cat-map"


class MoveKind(Enum):
    """Generators of the sliding puzzle."""
    STRIP = "strip"
    ROTATE = "rotate"


class PlotKind(Enum):
    """Figures the plot subcommand knows how to draw."""
    SCHEME_COST = "scheme-cost"
    COUNTEREXAMPLE = "counterexample"


def validate_flow_family(family: str) -> FlowFamily:
    """Validate and return a FlowFamily enum from string."""
    try:
        return FlowFamily(family.lower())
    except ValueError:
        raise ValueError(f"Invalid flow family: {family}. Must be one of: {[f.value for f in FlowFamily]}")


def validate_slide_mode(mode: str) -> SlideMode:
    """Validate and return a SlideMode enum from string."""
    try:
        return SlideMode(mode.lower())
    except ValueError:
        raise ValueError(f"Invalid slider mode: {mode}. Must be one of: {[m.value for m in SlideMode]}")


def validate_greedy_strategy(strategy: str) -> GreedyStrategy:
    """Validate and return a GreedyStrategy enum from string."""
    try:
        return GreedyStrategy(strategy.lower())
    except ValueError:
        raise ValueError(f"Invalid greedy strategy: {strategy}. Must be one of: {[s.value for s in GreedyStrategy]}")


def validate_plot_kind(kind: str) -> PlotKind:
    """Validate and return a PlotKind enum from string."""
    try:
        return PlotKind(kind.lower())
    except ValueError:
        raise ValueError(f"Invalid plot kind: {kind}. Must be one of: {[k.value for k in PlotKind]}")


def get_thread_count() -> int:
    """Worker threads allowed by MIXLAB_THREADS (defaults to the CPU count)."""
    raw = os.getenv('MIXLAB_THREADS')
    if not raw:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(f"Invalid MIXLAB_THREADS environment value: {raw!r} (expected a positive integer)")
    if threads < 1:
        raise ValueError(f"Invalid MIXLAB_THREADS environment value: {raw!r} (expected a positive integer)")
    return threads


def get_log_file() -> Optional[str]:
    """Optional log file path from MIXLAB_LOG_FILE."""
    return os.getenv('MIXLAB_LOG_FILE') or None


def get_log_level() -> str:
    return os.getenv('MIXLAB_LOG_LEVEL', 'INFO').upper()


def ensure_parent_exists(path: str):
    """Ensure the directory holding an output file exists."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


class RunConfig(BaseModel):
    """Fully resolved settings of one CLI run."""
    model_config = ConfigDict(extra='forbid', frozen=True)

    subcommand: str
    flags: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(default=0, ge=0)

    def comment_line(self) -> str:
        """First CSV line echoing the resolved configuration."""
        parts = [f"{key}={self.flags[key]}" for key in sorted(self.flags)]
        parts.append(f"seed={self.seed}")
        return f"# mixlab {self.subcommand} " + " ".join(parts)
