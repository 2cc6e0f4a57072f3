# core/operators.py
"""
The weight Q, the symmetric kernel operator K v = Q^(1/p) Phi * (Q^(1/p) v)
and the energy J0(v) = (1/p') sum |v|^p' - (1/2) sum v K(v) with its gradient.
"""

import abc
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .lattice import DomainKind, LatticeField, NormKind, TruncatedDomain, norm, transfer
from .utils.error_handler import InvalidProblemError

logger = logging.getLogger(__name__)


def _radii(points):
    return np.sqrt(np.sum(np.asarray(points, dtype=np.float64) ** 2, axis=-1))


class PotentialSpec(abc.ABC):
    """A nonnegative weight Q on the lattice, not identically zero"""

    @abc.abstractmethod
    def evaluate(self, points):
        ...

    @property
    @abc.abstractmethod
    def decay_exponent(self):
        """alpha in Q ~ (1+|x|)^-alpha; math.inf for compact support"""

    @property
    def bounded(self):
        return True

    @property
    def vanishing_weight(self):
        """lim Q(x) |x|^alpha = 0"""
        return False

    @abc.abstractmethod
    def describe(self):
        ...


@dataclass(frozen=True)
class PowerLaw(PotentialSpec):
    """c (1+|x|)^-alpha"""
    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise InvalidProblemError(f"power-law weight needs c > 0, got {self.c}")
        if not math.isfinite(self.alpha):
            raise InvalidProblemError("use CompactSupport for alpha = inf")

    def evaluate(self, points):
        return self.c * (1.0 + _radii(points)) ** (-self.alpha)

    @property
    def decay_exponent(self):
        return self.alpha

    @property
    def bounded(self):
        return self.alpha >= 0

    def describe(self):
        return {'form': 'power_law', 'alpha': self.alpha, 'c': self.c}


@dataclass(frozen=True)
class CompactSupport(PotentialSpec):
    """`level` on the ball |x| <= radius, zero outside"""
    radius: float
    level: float = 1.0

    def __post_init__(self):
        if not (self.radius >= 0 and self.level > 0):
            raise InvalidProblemError("compact weights need radius >= 0 and level > 0")

    def evaluate(self, points):
        return np.where(_radii(points) <= self.radius, self.level, 0.0)

    @property
    def decay_exponent(self):
        return math.inf

    @property
    def vanishing_weight(self):
        return True

    def describe(self):
        return {'form': 'compact', 'radius': self.radius, 'level': self.level}


@dataclass(frozen=True, eq=False)
class TablePotential(PotentialSpec):
    """Q read off a stored field; zero wherever the field has no value"""
    field: LatticeField

    def __post_init__(self):
        if np.any(self.field.values < 0) or not np.any(self.field.values > 0):
            raise InvalidProblemError("tabulated weights must be nonnegative and not identically zero")

    def evaluate(self, points):
        return np.asarray(self.field.values_at(points), dtype=np.float64)

    @property
    def decay_exponent(self):
        return math.inf

    @property
    def vanishing_weight(self):
        return True

    def describe(self):
        return {'form': 'table', 'domain': self.field.domain.describe(),
                'support': int(np.count_nonzero(self.field.values))}


@dataclass
class ProblemSpec:
    d: int
    kind: DomainKind
    Q: PotentialSpec
    p: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.kind = DomainKind(self.kind)
        if self.kind is DomainKind.WHOLE and self.d < 3:
            raise InvalidProblemError(f"the whole lattice needs d >= 3, got d = {self.d}")
        if self.d < 2:
            raise InvalidProblemError(f"dimension must be at least 2, got {self.d}")
        if not self.p > 1:
            raise InvalidProblemError(f"p must exceed 1, got {self.p}")

    @property
    def p_prime(self):
        return self.p / (self.p - 1.0)

    @property
    def q(self):
        return self.p - 1.0

    @property
    def beta(self):
        return self.kind.beta

    @property
    def alpha(self):
        return self.Q.decay_exponent

    def domain(self, R):
        return TruncatedDomain(self.kind, self.d, R)

    def weight(self, domain):
        key = ('Q', domain)
        if key not in self._cache:
            self._cache[key] = sample_potential(self.Q, domain)
        return self._cache[key]

    def root_weight(self, domain):
        """Q^(1/p) on the interior of `domain`, computed once per truncation"""
        key = ('root', domain)
        if key not in self._cache:
            self._cache[key] = self.weight(domain).with_values(self.weight(domain).values ** (1.0 / self.p))
        return self._cache[key]

    def describe(self):
        return {'d': self.d, 'kind': self.kind.value, 'Q': self.Q.describe(), 'p': self.p}


def sample_potential(Q, domain, reflect=False):
    """
    Q on the interior of `domain`. With `reflect`, the even extension across
    the Dirichlet hyperplanes on the whole ball of the same radius, with 0 on
    the hyperplanes.
    """
    if reflect:
        whole = TruncatedDomain(DomainKind.WHOLE, domain.d, domain.radius)

        def extended(points):
            folded = points.copy()
            for axis in domain.kind.dirichlet_axes:
                folded[:, axis] = np.abs(folded[:, axis])
            values = np.maximum(Q.evaluate(folded), 0.0)
            for axis in domain.kind.dirichlet_axes:
                values = np.where(points[:, axis] == 0, 0.0, values)
            return values
        return LatticeField.from_function(whole, extended)
    return LatticeField.from_function(domain, lambda points: np.maximum(Q.evaluate(points), 0.0))


def _on(field_, domain):
    return field_ if field_.domain == domain else transfer(field_, domain)


def apply_K(v, spec, kernel):
    """Q^(1/p) (Phi * (Q^(1/p) v)) on the domain of v"""
    root = spec.root_weight(v.domain)
    return root * kernel.convolve(root * v)


def quadratic_form(u, v, spec, kernel):
    """B(u, v) = sum u K(v)"""
    return u.dot(_on(apply_K(v, spec, kernel), u.domain))


def _require_superlinear(spec):
    if not spec.p > 2:
        raise InvalidProblemError(f"the energy functional needs p > 2, got p = {spec.p}")


def energy(v, spec, kernel):
    _require_superlinear(spec)
    pp = spec.p_prime
    return float(np.sum(np.abs(v.values) ** pp) / pp - 0.5 * quadratic_form(v, v, spec, kernel))


def energy_gradient(v, spec, kernel):
    """|v|^(p'-2) v - K(v), with 0 at v = 0"""
    _require_superlinear(spec)
    values = np.sign(v.values) * np.abs(v.values) ** (spec.p_prime - 1.0)
    return v.with_values(values) - apply_K(v, spec, kernel)


def rayleigh_ratio(v, spec, kernel):
    """B(v, v) / ||v||_{p'}^2"""
    scale = norm(v, NormKind.STRONG, spec.p_prime)
    if scale == 0:
        raise InvalidProblemError("Rayleigh ratio of the zero field")
    return quadratic_form(v, v, spec, kernel) / scale ** 2


class FormConstant(NamedTuple):
    c_star: float
    rho: float
    energy_floor: float
    samples: int


def form_constant_estimate(spec, kernel, domain, samples=20, seed=0):
    """
    Largest measured Rayleigh ratio over random fields supported on the
    weight, with the small-sphere radius rho = (1/(p' c*))^(1/(2-p')) on which
    J0 >= rho^p' / (2p').
    """
    rng = np.random.default_rng(seed)
    support = domain.interior_mask & (spec.weight(domain).values > 0)
    if not np.any(support):
        raise InvalidProblemError("the weight vanishes on the truncation")
    best = 0.0
    for _ in range(samples):
        values = np.zeros(domain.shape)
        values[support] = rng.random(int(support.sum()))
        best = max(best, rayleigh_ratio(LatticeField(domain, values), spec, kernel))
    pp = spec.p_prime
    rho = (1.0 / (pp * best)) ** (1.0 / (2.0 - pp)) if spec.p > 2 and best > 0 else math.nan
    floor = rho ** pp / (2.0 * pp) if math.isfinite(rho) else math.nan
    logger.debug(f"Form constant over {samples} samples: c* = {best:.6g}")
    return FormConstant(float(best), float(rho), float(floor), samples)
