import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import quad


class MobilityVariant(str, Enum):
    PLAIN = "plain"
    TRUNCATED = "truncated"
    ABSOLUTE = "absolute"


class MobilityDomainError(ValueError):
    """Raised when the plain mobility is evaluated outside |u| <= 1 for non-integer n."""


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of one PDE instance: interface width, degeneracy exponent and mobility form
    """
    epsilon: float = 0.1
    n: float = 4.0
    mobility_variant: MobilityVariant = MobilityVariant.PLAIN

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        # n = 0 is the constant-mobility reference case
        if not self.n >= 0:
            raise ValueError(f"n must be nonnegative, got {self.n}")
        object.__setattr__(self, "mobility_variant", MobilityVariant(self.mobility_variant))

    @property
    def integer_n(self) -> bool:
        return float(self.n).is_integer()


@dataclass(frozen=True)
class RadialGrid:
    """
    Equidistant grid r_i = i/N on [0, 1]
    """
    num_cells: int

    def __post_init__(self):
        if self.num_cells < 2:
            raise ValueError(f"need at least 2 cells, got {self.num_cells}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.num_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.num_cells + 1) * self.spacing

    @property
    def half_nodes(self) -> np.ndarray:
        return (np.arange(self.num_cells) + 0.5) * self.spacing

    @classmethod
    def for_values(cls, values: np.ndarray) -> "RadialGrid":
        return cls(len(values) - 1)


@dataclass
class RadialState:
    """
    Order parameter u at the grid nodes at time t; v = 1 - u is the view the analysis uses
    """
    time: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or len(self.values) < 3:
            raise ValueError("values must be a 1-d array with at least 3 nodes")
        if self.time < 0:
            raise ValueError(f"time must be nonnegative, got {self.time}")

    @property
    def v(self) -> np.ndarray:
        return 1.0 - self.values

    @property
    def grid(self) -> RadialGrid:
        return RadialGrid.for_values(self.values)

    @property
    def exceeds_bounds(self) -> bool:
        return bool(np.max(np.abs(self.values)) > 1.0)


def free_energy_terms(u):
    """
    Quartic double well f(u) = (1 - u^2)^2 / 2 and its derivative f'(u) = -2u(1 - u^2)
    """
    u = np.asarray(u, dtype=float)
    w = 1.0 - u * u
    return 0.5 * w * w, -2.0 * u * w


def free_energy_curvature(u):
    u = np.asarray(u, dtype=float)
    return 6.0 * u * u - 2.0


def _mobility_base(u, params: ModelParams) -> np.ndarray:
    base = 1.0 - np.asarray(u, dtype=float) ** 2
    variant = params.mobility_variant
    if variant is MobilityVariant.TRUNCATED:
        return np.maximum(base, 0.0)
    if variant is MobilityVariant.ABSOLUTE:
        return np.abs(base)
    if not params.integer_n and np.any(base < 0.0):
        raise MobilityDomainError(
            f"plain mobility with non-integer n={params.n} is undefined for |u| > 1"
        )
    return base


def mobility(u, params: ModelParams):
    """
    Degenerate mobility M(u) in the plain, truncated or absolute-value form
    """
    if params.n == 0:
        return np.ones_like(np.asarray(u, dtype=float))
    return np.power(_mobility_base(u, params), params.n)


def mobility_derivative(u, params: ModelParams):
    """
    dM/du, used by the analytic Newton Jacobian; taken as zero where the base vanishes and n < 1
    """
    u = np.asarray(u, dtype=float)
    if params.n == 0:
        return np.zeros_like(u)
    base = _mobility_base(u, params)
    raw = 1.0 - u * u
    if params.mobility_variant is MobilityVariant.PLAIN:
        dbase = -2.0 * u
    elif params.mobility_variant is MobilityVariant.TRUNCATED:
        dbase = np.where(raw > 0.0, -2.0 * u, 0.0)
    else:
        dbase = np.sign(raw) * (-2.0 * u)
    if params.n == 1:
        return dbase
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.power(base, params.n - 1.0)
    power = np.where(np.isfinite(power), power, 0.0)
    return params.n * power * dbase


def initial_profile(grid: RadialGrid, epsilon: float, amplitude: float = 0.95,
                    center: float = 0.5, flat_ends: bool = False) -> RadialState:
    """
    Scaled tanh interface u = -amplitude * tanh((r - center) / epsilon) at t = 0.
    With flat_ends the two end nodes are clamped to +amplitude and -amplitude.
    """
    if not 0.0 < center < 1.0:
        raise ValueError(f"center must lie in (0, 1), got {center}")
    values = -amplitude * np.tanh((grid.nodes - center) / epsilon)
    if flat_ends:
        values[0] = amplitude
        values[-1] = -amplitude
    return RadialState(time=0.0, values=values)


def initial_mass(epsilon: float, amplitude: float = 0.95, center: float = 0.5) -> float:
    """
    m0 = int_0^1 u_init(r) r dr by adaptive quadrature, split at the interface
    """
    integrand = lambda r: -amplitude * math.tanh((r - center) / epsilon) * r
    left, _ = quad(integrand, 0.0, center, epsabs=1e-14, epsrel=1e-13, limit=200)
    right, _ = quad(integrand, center, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return left + right
