"""
Evolution of sets under analytic divergence-free flows and the singular
integral forms that govern the growth of the Bianchini semi-norm.

For a measure-preserving flow the semi-norm of 1_{Phi_t(A)} changes at rate
S[f, f, v(t)] / (2 pi), where f = f_{Phi_t(A)} and S is the annulus-truncated
form with kernel <x - y, b(x) - b(y)> / |x - y|^4. verify_prop22 compares both
sides of the integrated identity on a grid.

Pair sums are evaluated as convolutions with the odd kernel components
W_c(z) = z_c / |z|^4 restricted to the annulus, so
S[f, g, b] = h^4 sum_c ( <f b_c, W_c * g> + <g b_c, W_c * f> ).
"""

import logging
import math
from abc import abstractmethod
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import fftconvolve

from .bianchini import SemiNormParams, bianchini_seminorm, fA_of
from .config import FINE_RHO, OUTER_RADIUS, FlowFamily, validate_flow_family
from .error_handler import ResolutionError
from .parallel import WorkerPool, ordered_sum
from .torus_grid import GridSpec, IndicatorField, ScalarField, cell_centers, geodesic_offset

logger = logging.getLogger(__name__)

VelocityField = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]

TWO_PI = 2.0 * math.pi
# Area of the unit disk
V_D = math.pi
_ANNULUS_SLACK = 1e-9


# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------

class AnalyticFlow(BaseModel):
    """Flow with closed-form maps; coordinates are lifted to R^2 (no wrap)."""
    model_config = ConfigDict(frozen=True)

    family: FlowFamily

    @abstractmethod
    def forward(self, x1: np.ndarray, x2: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Position at time t of the particle that starts at x."""

    @abstractmethod
    def backward(self, x1: np.ndarray, x2: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        """Start of the particle that sits at x at time t."""

    @abstractmethod
    def velocity(self, x1: np.ndarray, x2: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
        pass

    def velocity_at(self, t: float) -> VelocityField:
        """Freeze the time argument."""
        return lambda x1, x2: self.velocity(x1, x2, t)


class ShearFlow(AnalyticFlow):
    """Steady shear v = (0, a sin 2 pi x1)."""
    family: FlowFamily = FlowFamily.SHEAR
    a: float = 1.0

    def forward(self, x1, x2, t):
        return x1 + 0.0 * x2, x2 + self.a * t * np.sin(TWO_PI * x1)

    def backward(self, x1, x2, t):
        return x1 + 0.0 * x2, x2 - self.a * t * np.sin(TWO_PI * x1)

    def velocity(self, x1, x2, t):
        return np.zeros_like(x1 + x2), self.a * np.sin(TWO_PI * x1) + 0.0 * x2


class AlternatingShearFlow(AnalyticFlow):
    """Shear along x2 until period/2, then shear along x1 with v = (a sin 2 pi x2, 0)."""
    family: FlowFamily = FlowFamily.ALTERNATING
    a: float = 1.0
    period: float = Field(default=1.0, gt=0.0)

    def _split(self, t: float) -> Tuple[float, float]:
        half = 0.5 * self.period
        return min(t, half), max(t - half, 0.0)

    def forward(self, x1, x2, t):
        first, second = self._split(t)
        y2 = x2 + self.a * first * np.sin(TWO_PI * x1)
        y1 = x1 + self.a * second * np.sin(TWO_PI * y2)
        return y1, y2

    def backward(self, x1, x2, t):
        first, second = self._split(t)
        y1 = x1 - self.a * second * np.sin(TWO_PI * x2)
        y2 = x2 - self.a * first * np.sin(TWO_PI * y1)
        return y1, y2

    def velocity(self, x1, x2, t):
        zero = np.zeros_like(x1 + x2)
        if t < 0.5 * self.period:
            return zero, self.a * np.sin(TWO_PI * x1) + 0.0 * x2
        return self.a * np.sin(TWO_PI * x2) + 0.0 * x1, zero


class TranslationFlow(AnalyticFlow):
    """Rigid translation v = c."""
    family: FlowFamily = FlowFamily.TRANSLATION
    c: Tuple[float, float] = (0.0, 0.0)

    def forward(self, x1, x2, t):
        return x1 + self.c[0] * t, x2 + self.c[1] * t

    def backward(self, x1, x2, t):
        return x1 - self.c[0] * t, x2 - self.c[1] * t

    def velocity(self, x1, x2, t):
        shape = np.broadcast(x1, x2).shape
        return np.full(shape, self.c[0]), np.full(shape, self.c[1])


def make_flow(family: str, a: float = 1.0, period: float = 1.0,
              c: Tuple[float, float] = (0.0, 0.0)) -> AnalyticFlow:
    """Build a flow from its family name."""
    kind = validate_flow_family(family) if isinstance(family, str) else family
    if kind == FlowFamily.SHEAR:
        return ShearFlow(a=a)
    if kind == FlowFamily.ALTERNATING:
        return AlternatingShearFlow(a=a, period=period)
    return TranslationFlow(c=c)


def advect_set(A: IndicatorField, flow: AnalyticFlow, t: float) -> IndicatorField:
    """Pull back cell centres: output cell is in the set iff Phi_t^{-1}(centre) lands in A."""
    N = A.spec.N
    x1, x2 = cell_centers(A.spec)
    y1, y2 = flow.backward(x1, x2, t)
    i = np.mod(np.floor(y1 * N).astype(np.int64), N)
    j = np.mod(np.floor(y2 * N).astype(np.int64), N)
    return IndicatorField(spec=A.spec, cells=A.cells[i, j])


# ---------------------------------------------------------------------------
# Singular forms
# ---------------------------------------------------------------------------

class FormSpec(BaseModel):
    """Annulus eps <= |x - y| <= R and, for planar forms, the quadrature step."""
    model_config = ConfigDict(frozen=True)

    eps: float = Field(gt=0.0)
    R: float = OUTER_RADIUS
    periodic: bool = True
    step: Optional[float] = Field(default=None, gt=0.0)

    @model_validator(mode='after')
    def _check_annulus(self):
        if not self.eps < self.R:
            raise ValueError(f"Invalid annulus: need eps < R, got eps={self.eps}, R={self.R}")
        if self.periodic and self.R > OUTER_RADIUS:
            raise ValueError(f"Invalid outer radius R={self.R}: periodic forms need R <= 1/4")
        if not self.periodic:
            if self.R >= 1.0:
                raise ValueError(f"Invalid outer radius R={self.R}: planar forms need R < 1")
            if self.step is None:
                raise ValueError("Invalid planar form: a quadrature step is required")
        return self


def _annulus_kernels(offset_1: np.ndarray, offset_2: np.ndarray, step: float,
                     eps: float, R: float) -> Tuple[np.ndarray, np.ndarray]:
    """W_c = z_c / |z|^4 on the annulus, zero elsewhere; offsets in steps."""
    d2 = offset_1.astype(np.float64) ** 2 + offset_2.astype(np.float64) ** 2
    inner = (eps / step) ** 2 * (1.0 - _ANNULUS_SLACK)
    outer = (R / step) ** 2 * (1.0 + _ANNULUS_SLACK)
    inside = (d2 >= inner) & (d2 <= outer)
    safe = np.where(inside, d2, 1.0) * step * step
    weight = np.where(inside, 1.0 / (safe * safe), 0.0)
    return offset_1 * step * weight, offset_2 * step * weight


@lru_cache(maxsize=16)
def _periodic_kernel_spectra(N: int, eps: float, R: float) -> Tuple[np.ndarray, np.ndarray]:
    index = geodesic_offset(np.arange(N), N)
    d1, d2 = np.meshgrid(index, index, indexing='ij')
    w1, w2 = _annulus_kernels(d1, d2, 1.0 / N, eps, R)
    return np.fft.rfft2(w1), np.fft.rfft2(w2)


def _require_form_resolution(spec: GridSpec, form: FormSpec):
    if form.eps < 2.0 * spec.dx * (1.0 - _ANNULUS_SLACK):
        raise ResolutionError(f"eps {form.eps:g} is below two cell widths 2/{spec.N}")


def _sample_velocity(spec: GridSpec, b: VelocityField) -> Tuple[np.ndarray, np.ndarray]:
    x1, x2 = cell_centers(spec)
    b1, b2 = b(x1, x2)
    return (np.broadcast_to(np.asarray(b1, dtype=np.float64), x1.shape),
            np.broadcast_to(np.asarray(b2, dtype=np.float64), x1.shape))


def singular_form_periodic(f: ScalarField, g: ScalarField, b: VelocityField, form: FormSpec) -> float:
    """S^per_eps[f, g, b] by midpoint quadrature over cell pairs in the annulus."""
    if f.spec != g.spec:
        raise ValueError(f"Invalid densities: grids N={f.spec.N} and N={g.spec.N} differ")
    spec = f.spec
    _require_form_resolution(spec, form)
    N = spec.N
    spectra = _periodic_kernel_spectra(N, form.eps, form.R)
    velocity = _sample_velocity(spec, b)
    f_hat = np.fft.rfft2(f.values)
    g_hat = np.fft.rfft2(g.values)

    parts = []
    for kernel_hat, b_c in zip(spectra, velocity):
        w_g = np.fft.irfft2(kernel_hat * g_hat, s=(N, N))
        w_f = np.fft.irfft2(kernel_hat * f_hat, s=(N, N))
        parts.append(math.fsum((f.values * b_c * w_g).ravel()))
        parts.append(math.fsum((g.values * b_c * w_f).ravel()))
    return ordered_sum(parts) * spec.cell_area ** 2


def singular_form_periodic_direct(f: ScalarField, g: ScalarField, b: VelocityField, form: FormSpec) -> float:
    """Pair-by-pair evaluation of the same quadrature, for small grids."""
    spec = f.spec
    _require_form_resolution(spec, form)
    N = spec.N
    b1, b2 = _sample_velocity(spec, b)
    fv = f.values.ravel()
    gv = g.values.ravel()
    b1 = b1.ravel()
    b2 = b2.ravel()
    index = np.arange(N * N)
    xi, xj = np.divmod(index, N)
    total = []
    for x in range(N * N):
        d1 = geodesic_offset(xi[x] - xi, N)
        d2 = geodesic_offset(xj[x] - xj, N)
        w1, w2 = _annulus_kernels(d1, d2, 1.0 / N, form.eps, form.R)
        kernel = w1 * (b1[x] - b1) + w2 * (b2[x] - b2)
        total.append(fv[x] * math.fsum(kernel * gv))
    return math.fsum(total) * spec.cell_area ** 2


class PlanarDensity(BaseModel):
    """Compactly supported density on R^2: bounding box plus sampler."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    box: Tuple[float, float, float, float]
    sampler: Callable[[np.ndarray, np.ndarray], np.ndarray]

    @model_validator(mode='after')
    def _check_box(self):
        x0, x1, y0, y1 = self.box
        if not (x0 < x1 and y0 < y1):
            raise ValueError(f"Invalid bounding box {self.box}")
        return self

    @classmethod
    def from_rects(cls, rects: Sequence[Tuple[float, float, float, float]]) -> 'PlanarDensity':
        """Indicator of a union of rectangles (x1, x2, y1, y2)."""
        if not rects:
            raise ValueError("Invalid planar density: need at least one rectangle")
        rects = tuple(tuple(float(v) for v in rect) for rect in rects)
        box = (min(r[0] for r in rects), max(r[1] for r in rects),
               min(r[2] for r in rects), max(r[3] for r in rects))

        def sampler(x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
            inside = np.zeros(np.broadcast(x1, x2).shape, dtype=bool)
            for a1, a2, c1, c2 in rects:
                inside |= (x1 >= a1) & (x1 < a2) & (x2 >= c1) & (x2 < c2)
            return inside.astype(np.float64)

        return cls(box=box, sampler=sampler)


def _planar_grid(f: PlanarDensity, g: PlanarDensity, step: float):
    x0 = min(f.box[0], g.box[0])
    x1 = max(f.box[1], g.box[1])
    y0 = min(f.box[2], g.box[2])
    y1 = max(f.box[3], g.box[3])
    n1 = max(int(math.ceil((x1 - x0) / step - 1e-9)), 1)
    n2 = max(int(math.ceil((y1 - y0) / step - 1e-9)), 1)
    c1 = x0 + (np.arange(n1) + 0.5) * step
    c2 = y0 + (np.arange(n2) + 0.5) * step
    return np.meshgrid(c1, c2, indexing='ij')


def singular_form_planar(f: PlanarDensity, g: PlanarDensity, b: VelocityField, form: FormSpec) -> float:
    """S_{eps,R}[f, g, b] on R^2 by midpoint quadrature with step form.step."""
    if form.periodic:
        raise ValueError("Invalid form: singular_form_planar needs a planar FormSpec")
    step = form.step
    if form.eps < step * (1.0 - _ANNULUS_SLACK):
        raise ResolutionError(f"eps {form.eps:g} is below the quadrature step {step:g}")

    x1, x2 = _planar_grid(f, g, step)
    fv = f.sampler(x1, x2)
    gv = g.sampler(x1, x2)
    b1, b2 = b(x1, x2)
    b1 = np.broadcast_to(np.asarray(b1, dtype=np.float64), x1.shape)
    b2 = np.broadcast_to(np.asarray(b2, dtype=np.float64), x1.shape)

    reach = int(math.ceil(form.R / step))
    offsets = np.arange(-reach, reach + 1)
    d1, d2 = np.meshgrid(offsets, offsets, indexing='ij')
    kernels = _annulus_kernels(d1, d2, step, form.eps, form.R)

    parts = []
    for kernel, b_c in zip(kernels, (b1, b2)):
        w_g = fftconvolve(gv, kernel, mode='same')
        w_f = fftconvolve(fv, kernel, mode='same')
        parts.append(math.fsum((fv * b_c * w_g).ravel()))
        parts.append(math.fsum((gv * b_c * w_f).ravel()))
    return ordered_sum(parts) * step ** 4


# ---------------------------------------------------------------------------
# Identity check
# ---------------------------------------------------------------------------

class Prop22Result(BaseModel):
    model_config = ConfigDict(frozen=True)

    lhs: float
    rhs: float
    gap: float
    times: List[float]
    integrands: List[float]


def relative_gap(lhs: float, rhs: float) -> float:
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-6)


def verify_prop22(A: IndicatorField, flow: AnalyticFlow, T: float, eps: float, steps: int,
                  rho: float = FINE_RHO) -> Prop22Result:
    """Seminorm growth over [0, T] against the time integral of the singular form."""
    if steps < 1:
        raise ValueError(f"Invalid number of time steps {steps}: must be >= 1")
    if T < 0:
        raise ValueError(f"Invalid final time T={T}: must be >= 0")
    form = FormSpec(eps=eps)
    _require_form_resolution(A.spec, form)
    params = SemiNormParams.build(eps, rho=rho)

    before = bianchini_seminorm(A, params)
    after = bianchini_seminorm(advect_set(A, flow, T), params)
    lhs = after - before

    dt = T / steps
    times = [(k + 0.5) * dt for k in range(steps)]

    def integrand(t: float) -> float:
        f = fA_of(advect_set(A, flow, t))
        return singular_form_periodic(f, f, flow.velocity_at(t), form)

    with WorkerPool() as pool:
        values = pool.map_ordered(integrand, times)
    rhs = ordered_sum(dt * v for v in values) / (2.0 * V_D)
    gap = relative_gap(lhs, rhs)
    logger.info(f"Seminorm identity check N={A.spec.N} steps={steps}: lhs={lhs:.6g} rhs={rhs:.6g} gap={gap:.3g}")
    return Prop22Result(lhs=lhs, rhs=rhs, gap=gap, times=times, integrands=values)
