"""
Mixing diagnostics on the discrete torus.

The truncated Bianchini semi-norm integrates the L1 distance between a field
and its ball averages against dr/r over [eps, 1/4]. The radius integral is a
log-trapezoid rule on a geometric grid; every quantity here is computed from
the exact disk stencils of torus_grid.
"""

import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import DEFAULT_KAPPA, DEFAULT_RHO, OUTER_RADIUS
from .parallel import WorkerPool, ordered_sum
from .torus_grid import (
    IndicatorField,
    ScalarField,
    ball_average,
    ball_counts,
    disk_stencil,
    require_resolved,
)

logger = logging.getLogger(__name__)

Field2D = Union[IndicatorField, ScalarField]

# A final geometric step shorter than this fraction of log(rho) is merged into 1/4
_MERGE_FRACTION = 1e-6


def _validate_kappa(kappa: float) -> float:
    if not 0.0 < kappa < 0.5:
        raise ValueError(f"Invalid mixing constant kappa={kappa}: must lie in (0, 1/2)")
    return kappa


class SemiNormParams(BaseModel):
    """Radius grid, weights and mixing constant of one semi-norm evaluation."""
    model_config = ConfigDict(frozen=True)

    eps: float
    rho: float = DEFAULT_RHO
    kappa: float = DEFAULT_KAPPA
    radii: Tuple[float, ...]
    weights: Tuple[float, ...]

    @field_validator('eps')
    @classmethod
    def _eps_range(cls, value: float) -> float:
        if not 0.0 < value < 0.125:
            raise ValueError(f"Invalid inner cutoff eps={value}: must lie in (0, 1/8)")
        return value

    @field_validator('rho')
    @classmethod
    def _rho_range(cls, value: float) -> float:
        if not value > 1.0:
            raise ValueError(f"Invalid radius ratio rho={value}: must be > 1")
        return value

    @field_validator('kappa')
    @classmethod
    def _kappa_range(cls, value: float) -> float:
        return _validate_kappa(value)

    @model_validator(mode='after')
    def _check_grid(self):
        if len(self.radii) != len(self.weights) or len(self.radii) < 2:
            raise ValueError("Invalid radius grid: need at least two radii with one weight each")
        if any(b <= a for a, b in zip(self.radii, self.radii[1:])):
            raise ValueError("Invalid radius grid: radii must increase strictly")
        return self

    @classmethod
    def build(cls, eps: float, rho: float = DEFAULT_RHO, kappa: float = DEFAULT_KAPPA) -> 'SemiNormParams':
        """Geometric radii eps, eps*rho, ... with the last one clamped to 1/4."""
        if not 0.0 < eps < 0.125:
            raise ValueError(f"Invalid inner cutoff eps={eps}: must lie in (0, 1/8)")
        if not rho > 1.0:
            raise ValueError(f"Invalid radius ratio rho={rho}: must be > 1")
        radii = [eps]
        step = math.log(rho)
        while math.log(OUTER_RADIUS / radii[-1]) > step * (1.0 + _MERGE_FRACTION):
            radii.append(radii[-1] * rho)
        if math.log(OUTER_RADIUS / radii[-1]) < step * _MERGE_FRACTION and len(radii) > 1:
            radii[-1] = OUTER_RADIUS
        else:
            radii.append(OUTER_RADIUS)

        gaps = [math.log(b / a) for a, b in zip(radii, radii[1:])]
        weights = [0.5 * gaps[0]]
        weights.extend(0.5 * (gaps[j - 1] + gaps[j]) for j in range(1, len(gaps)))
        weights.append(0.5 * gaps[-1])
        return cls(eps=eps, rho=rho, kappa=kappa, radii=tuple(radii), weights=tuple(weights))

    def total_weight(self) -> float:
        return ordered_sum(self.weights)


class RadiusSample(BaseModel):
    """Extremes of the ball averages at one radius."""
    model_config = ConfigDict(frozen=True)

    r: float
    min_avg: float = Field(ge=0.0, le=1.0)
    max_avg: float = Field(ge=0.0, le=1.0)
    mixed: bool


class MixReport(BaseModel):
    """Result of a mixing-scale sweep; scale is None when no radius qualifies."""
    model_config = ConfigDict(frozen=True)

    scale: Optional[float]
    kappa: float
    per_radius: List[RadiusSample]

    @property
    def is_mixed_somewhere(self) -> bool:
        return self.scale is not None

    def describe_scale(self) -> str:
        if self.scale is None:
            return "not mixed at any tested radius"
        return repr(self.scale)


def mixed_counts(counts: np.ndarray, total: int, kappa: float) -> bool:
    """Every count lies in [kappa total, (1 - kappa) total]."""
    lower = kappa * total
    upper = (1.0 - kappa) * total
    return bool(counts.min() >= lower - 1e-9 and counts.max() <= upper + 1e-9)


def is_mixed(E: IndicatorField, r: float, kappa: float) -> bool:
    """kappa <= |E cap B_r(x)| / |B_r(x)| <= 1 - kappa at every cell centre."""
    _validate_kappa(kappa)
    require_resolved(E.spec, r)
    stencil = disk_stencil(E.spec, r)
    return mixed_counts(ball_counts(E, stencil), stencil.count, kappa)


def _radius_sample(E: IndicatorField, r: float, kappa: float) -> RadiusSample:
    stencil = disk_stencil(E.spec, r)
    counts = ball_counts(E, stencil)
    return RadiusSample(
        r=r,
        min_avg=float(counts.min()) / stencil.count,
        max_avg=float(counts.max()) / stencil.count,
        mixed=mixed_counts(counts, stencil.count, kappa),
    )


def mixing_scale(E: IndicatorField, params: SemiNormParams) -> MixReport:
    """Smallest tested radius above which every tested radius is mixed."""
    require_resolved(E.spec, params.radii[0], "eps")
    with WorkerPool() as pool:
        samples = pool.map_ordered(lambda r: _radius_sample(E, r, params.kappa), params.radii)

    scale = None
    for sample in reversed(samples):
        if not sample.mixed:
            break
        scale = sample.r
    logger.debug(f"Mixing scale sweep over {len(samples)} radii: scale={scale}")
    return MixReport(scale=scale, kappa=params.kappa, per_radius=samples)


def _deviation_at(f: Field2D, r: float) -> float:
    spec = f.spec
    stencil = disk_stencil(spec, r)
    cells = spec.N * spec.N
    if isinstance(f, IndicatorField):
        # |count * 1_A - #(A cap B)| summed exactly in integers
        counts = ball_counts(f, stencil)
        scaled = f.cells.astype(np.int64) * stencil.count
        total = int(np.abs(scaled - counts).sum())
        return total / (stencil.count * cells)
    averages = ball_average(f, stencil)
    return math.fsum(np.abs(f.values - averages).ravel()) / cells


def per_radius_deviation(f: Field2D, params: SemiNormParams) -> List[float]:
    """h^2 sum_x |f(x) - avg_{B_r(x)} f| at every radius of the grid."""
    require_resolved(f.spec, params.radii[0], "eps")
    with WorkerPool() as pool:
        return pool.map_ordered(lambda r: _deviation_at(f, r), params.radii)


def bianchini_seminorm(f: Field2D, params: SemiNormParams) -> float:
    """Truncated Bianchini semi-norm ||f||_{B(eps)}."""
    deviations = per_radius_deviation(f, params)
    return ordered_sum(w * d for w, d in zip(params.weights, deviations))


def observation_floor(E: IndicatorField, params: SemiNormParams) -> float:
    """kappa times the weight of every radius at which E is mixed.

    Where E is mixed at r, |1_E(x) - avg| >= kappa at every x, so this is a
    lower bound for bianchini_seminorm(E, params).
    """
    report = mixing_scale(E, params)
    return params.kappa * ordered_sum(
        w for w, sample in zip(params.weights, report.per_radius) if sample.mixed
    )


def fA_of(A: IndicatorField) -> ScalarField:
    """f_A = 1_A - 1_{A^c}."""
    return ScalarField(spec=A.spec, values=np.where(A.cells, 1.0, -1.0))


def fourier_coefficients(f: ScalarField) -> np.ndarray:
    """Unitary coefficients f_hat(xi) = h^2 sum_x f(x) e^{-2 pi i xi.x}."""
    N = f.spec.N
    return np.fft.fft2(f.values) / (N * N)


def leger_V(f: ScalarField) -> float:
    """Sum over xi != 0 of |f_hat(xi)|^2 log|xi|.

    Pass fA_of(A) for a set A; the 0/1 indicator of A has a quarter of that value.
    """
    if not isinstance(f, ScalarField):
        raise TypeError(f"leger_V takes a ScalarField, got {type(f).__name__}; pass fA_of(A) for a set")
    N = f.spec.N
    power = np.abs(fourier_coefficients(f)) ** 2
    k = np.fft.fftfreq(N, d=1.0 / N)
    k1, k2 = np.meshgrid(k, k, indexing='ij')
    radius = np.hypot(k1, k2)
    radius[0, 0] = 1.0  # log 1 = 0 removes the zero mode
    return math.fsum((power * np.log(radius)).ravel())
