# core/lattice.py
"""
Lattice geometry for Z^d, the half lattice (x1 > 0) and the quadrant
(x1, x2 > 0): truncated domains, finitely supported fields, the discrete
Laplacian, the norm family and the barrier profiles.

Fields are stored densely over the bounding box of a truncation with a
membership mask; every value outside interior and boundary is zero.
"""

import enum
import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from django.conf import settings
from scipy import ndimage, sparse
from scipy.sparse.linalg import cg, factorized

from .utils.error_handler import ConvergenceError, InvalidProblemError

logger = logging.getLogger(__name__)


class DomainKind(str, enum.Enum):
    WHOLE = 'whole'
    HALF = 'half'
    QUADRANT = 'quadrant'

    @property
    def dirichlet_axes(self):
        """Axes whose zero hyperplane carries the Dirichlet condition"""
        if self is DomainKind.HALF:
            return (0,)
        if self is DomainKind.QUADRANT:
            return (0, 1)
        return ()

    @property
    def beta(self):
        """Kernel decay parameter: Phi decays like |x|^(2*beta - d) off the cone walls"""
        if self is DomainKind.HALF:
            return Fraction(1, 2)
        if self is DomainKind.QUADRANT:
            return Fraction(0)
        return Fraction(1)

    def contains(self, coords):
        coords = np.asarray(coords)
        inside = np.ones(coords.shape[:-1], dtype=bool)
        for axis in self.dirichlet_axes:
            inside &= coords[..., axis] > 0
        return inside


def as_point(x, d=None):
    point = tuple(int(c) for c in x)
    if len(point) < 2:
        raise InvalidProblemError(f"lattice points need d >= 2 coordinates, got {point}")
    if d is not None and len(point) != d:
        raise InvalidProblemError(f"point {point} is not in dimension {d}")
    return point


def neighbors(x):
    """The 2d lattice neighbours of x in the order +e1, -e1, +e2, -e2, ..."""
    x = as_point(x)
    out = []
    for axis in range(len(x)):
        for sign in (1, -1):
            y = list(x)
            y[axis] += sign
            out.append(tuple(y))
    return out


def reflect(x, axis):
    y = list(x)
    y[axis] = -y[axis]
    return tuple(y)


@dataclass(frozen=True)
class TruncatedDomain:
    """
    Points of `kind` with Euclidean norm at most `radius` (the interior) and
    their outer lattice neighbours (the boundary).
    """
    kind: DomainKind
    d: int
    radius: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', DomainKind(self.kind))
        if self.d < 2:
            raise InvalidProblemError(f"lattice dimension must be at least 2, got {self.d}")
        if not self.radius > 0:
            raise InvalidProblemError(f"truncation radius must be positive, got {self.radius}")

    @cached_property
    def half_width(self):
        return int(math.floor(self.radius)) + 1

    @cached_property
    def lower(self):
        lower = np.full(self.d, -self.half_width, dtype=np.int64)
        for axis in self.kind.dirichlet_axes:
            lower[axis] = 0
        return lower

    @cached_property
    def shape(self):
        return tuple(int(self.half_width - lo + 1) for lo in self.lower)

    def axis_coordinates(self, axis):
        """Coordinates along `axis`, shaped to broadcast against the box"""
        shape = [1] * self.d
        shape[axis] = self.shape[axis]
        return (np.arange(self.shape[axis], dtype=np.int64) + self.lower[axis]).reshape(shape)

    @cached_property
    def squared_radii(self):
        r2 = np.zeros(self.shape, dtype=np.int64)
        for axis in range(self.d):
            r2 = r2 + self.axis_coordinates(axis) ** 2
        return r2

    @cached_property
    def radii(self):
        return np.sqrt(self.squared_radii)

    @cached_property
    def interior_mask(self):
        mask = self.squared_radii <= self.radius ** 2
        for axis in self.kind.dirichlet_axes:
            mask = mask & (self.axis_coordinates(axis) > 0)
        mask.flags.writeable = False
        return mask

    @cached_property
    def boundary_mask(self):
        cross = ndimage.generate_binary_structure(self.d, 1)
        grown = ndimage.binary_dilation(self.interior_mask, structure=cross)
        mask = grown & ~self.interior_mask
        mask.flags.writeable = False
        return mask

    @cached_property
    def stored_mask(self):
        mask = self.interior_mask | self.boundary_mask
        mask.flags.writeable = False
        return mask

    def _points(self, mask):
        return np.argwhere(mask) + self.lower

    @cached_property
    def interior(self):
        """Interior points, lexicographically sorted, as an (N, d) integer array"""
        return self._points(self.interior_mask)

    @cached_property
    def boundary(self):
        return self._points(self.boundary_mask)

    @property
    def n_interior(self):
        return int(self.interior_mask.sum())

    def coordinates(self):
        """Full coordinate grid of the box, shape (*box, d)"""
        return np.stack(np.broadcast_arrays(*(self.axis_coordinates(a) for a in range(self.d))), axis=-1)

    def index(self, points):
        """Box indices for `points`; returns (inside_box, index tuple clipped to the box)"""
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        if points.shape[-1] != self.d:
            raise InvalidProblemError(f"points of dimension {points.shape[-1]} on a {self.d}-dimensional domain")
        offsets = points - self.lower
        upper = np.asarray(self.shape) - 1
        inside = np.all((offsets >= 0) & (offsets <= upper), axis=1)
        clipped = np.clip(offsets, 0, upper)
        return inside, tuple(clipped.T)

    def is_interior(self, x):
        inside, idx = self.index([as_point(x, self.d)])
        return bool(inside[0] and self.interior_mask[idx][0])

    def is_boundary(self, x):
        inside, idx = self.index([as_point(x, self.d)])
        return bool(inside[0] and self.boundary_mask[idx][0])

    def describe(self):
        return {'kind': self.kind.value, 'd': self.d, 'radius': self.radius}


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Real field on a truncation; zero outside interior and boundary"""
    domain: TruncatedDomain
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != self.domain.shape:
            raise InvalidProblemError(f"field of shape {values.shape} does not fit box {self.domain.shape}")
        if not np.issubdtype(values.dtype, np.integer):
            values = values.astype(np.float64, copy=False)
            if not np.all(np.isfinite(values)):
                raise InvalidProblemError("field values must be finite")
        values = np.where(self.domain.stored_mask, values, 0).astype(values.dtype, copy=False)
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @classmethod
    def zeros(cls, domain, dtype=np.float64):
        return cls(domain, np.zeros(domain.shape, dtype=dtype))

    @classmethod
    def from_function(cls, domain, fn, include_boundary=False):
        """Evaluate `fn` on an (N, d) point array over the interior (and boundary)"""
        mask = domain.stored_mask if include_boundary else domain.interior_mask
        values = np.zeros(domain.shape, dtype=np.float64)
        points = np.argwhere(mask) + domain.lower
        values[mask] = fn(points)
        return cls(domain, values)

    @classmethod
    def from_interior(cls, domain, vector):
        values = np.zeros(domain.shape, dtype=np.float64)
        values[domain.interior_mask] = vector
        return cls(domain, values)

    @classmethod
    def delta(cls, domain, y, dtype=np.float64):
        field = np.zeros(domain.shape, dtype=dtype)
        inside, idx = domain.index([as_point(y, domain.d)])
        if not inside[0]:
            raise InvalidProblemError(f"point {tuple(y)} lies outside the truncation")
        field[idx] = 1
        return cls(domain, field)

    def at(self, x):
        return self.values_at([as_point(x, self.domain.d)])[0]

    def values_at(self, points):
        inside, idx = self.domain.index(points)
        return np.where(inside, self.values[idx], 0)

    def interior_values(self):
        return self.values[self.domain.interior_mask]

    def boundary_values(self):
        return self.values[self.domain.boundary_mask]

    def with_values(self, values):
        return LatticeField(self.domain, values)

    def _other(self, other):
        if isinstance(other, LatticeField):
            if other.domain != self.domain:
                raise InvalidProblemError("fields live on different truncations")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def abs(self):
        return self.with_values(np.abs(self.values))

    def sup(self):
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def dot(self, other):
        return float(np.sum(self.values * self._other(other)))

    def support_points(self):
        return np.argwhere(self.values != 0) + self.domain.lower


def transfer(field, domain):
    """Re-express `field` on `domain`; points not stored in `field` become zero"""
    values = np.zeros(domain.shape, dtype=np.float64)
    points = np.argwhere(domain.stored_mask) + domain.lower
    values[domain.stored_mask] = field.values_at(points)
    return LatticeField(domain, values)


def _neighbour_sum(values):
    d = values.ndim
    padded = np.pad(values, 1)
    total = np.zeros_like(values)
    centre = [slice(1, -1)] * d
    for axis in range(d):
        ahead = list(centre)
        ahead[axis] = slice(2, None)
        behind = list(centre)
        behind[axis] = slice(0, -2)
        total = total + padded[tuple(ahead)] + padded[tuple(behind)]
    return total


def laplacian_apply(u):
    """(Delta u)(x) = sum over neighbours y of u(y) - u(x), at interior points"""
    d = u.domain.d
    lap = _neighbour_sum(u.values) - 2 * d * u.values
    return LatticeField(u.domain, np.where(u.domain.interior_mask, lap, 0).astype(u.values.dtype, copy=False))


def dirichlet_form(u, v):
    """Sum over lattice edges of grad u . grad v (forward differences)"""
    a = np.pad(u.values.astype(np.float64), 1)
    b = np.pad(v.values.astype(np.float64), 1)
    return float(sum(np.sum(np.diff(a, axis=k) * np.diff(b, axis=k)) for k in range(u.domain.d)))


def dirichlet_energy(u):
    return dirichlet_form(u, u)


class NormKind(str, enum.Enum):
    STRONG = 'strong'
    SUP = 'sup'
    WEAK = 'weak'


def norm(u, kind=NormKind.STRONG, q=2.0):
    """
    Strong L^q, sup and weak L^{q,inf} norms of a finitely supported field.

    The weak norm is the supremum over lambda of lambda * |{|u| > lambda}|^(1/q);
    on a finite field it is attained as lambda increases to a value level,
    i.e. max over levels a of a * |{|u| >= a}|^(1/q).
    """
    kind = NormKind(kind)
    magnitudes = np.abs(np.asarray(u.values, dtype=np.float64)).ravel()
    if kind is NormKind.SUP:
        return float(magnitudes.max()) if magnitudes.size else 0.0
    if q < 1:
        raise InvalidProblemError(f"norm exponent must be >= 1, got {q}")
    peak = magnitudes.max() if magnitudes.size else 0.0
    if peak == 0:
        return 0.0
    if kind is NormKind.STRONG:
        return float(peak * np.sum((magnitudes / peak) ** q) ** (1.0 / q))
    levels = np.sort(magnitudes[magnitudes > 0])[::-1]
    counts = np.arange(1, levels.size + 1, dtype=np.float64)
    return float(np.max(levels * counts ** (1.0 / q)))


def l1_ball(center, ell, domain):
    """Mask of the cube {x : sum |x_i - center_i| <= ell} over the box"""
    center = as_point(center, domain.d)
    distance = np.zeros(domain.shape, dtype=np.int64)
    for axis in range(domain.d):
        distance = distance + np.abs(domain.axis_coordinates(axis) - center[axis])
    return distance <= ell


class BarrierFamily(str, enum.Enum):
    POWER_TAIL = 'power_tail'
    HALF = 'half'
    QUADRANT = 'quadrant'
    LOG = 'log'


@dataclass(frozen=True)
class BarrierField:
    """
    Comparison profiles: |x|^-tau, x1 |x|^-tau, x1 x2 |x|^-tau and
    (e + |x|^2)^((2-d)/2) * ln(e + |x|^2)^sigma.
    """
    family: BarrierFamily
    parameter: float

    def __post_init__(self):
        object.__setattr__(self, 'family', BarrierFamily(self.family))

    def evaluate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = points.shape[-1]
        r2 = np.sum(points ** 2, axis=-1)
        if self.family is BarrierFamily.LOG:
            s = math.e + r2
            return s ** ((2 - d) / 2) * np.log(s) ** self.parameter
        if np.any(r2 == 0):
            raise InvalidProblemError(f"{self.family.value} barrier is not defined at the origin")
        tail = r2 ** (-self.parameter / 2)
        if self.family is BarrierFamily.HALF:
            return points[:, 0] * tail
        if self.family is BarrierFamily.QUADRANT:
            return points[:, 0] * points[:, 1] * tail
        return tail

    def laplacian(self, points):
        """Lattice Laplacian of the profile at `points` (all neighbours must be nonzero)"""
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        d = points.shape[-1]
        total = -2 * d * self.evaluate(points)
        for axis in range(d):
            for sign in (1, -1):
                shifted = points.copy()
                shifted[:, axis] += sign
                total = total + self.evaluate(shifted)
        return total

    def sample(self, domain):
        """Profile on the interior; the origin, where power profiles blow up, is set to 0"""
        def profile(points):
            out = np.zeros(len(points))
            nonzero = np.any(points != 0, axis=1)
            if self.family is BarrierFamily.LOG:
                nonzero[:] = True
            out[nonzero] = self.evaluate(points[nonzero])
            return out
        return LatticeField.from_function(domain, profile)


class DirichletLaplacian:
    """
    Sparse -Delta on the interior of a truncation with zero boundary data.
    Symmetric positive definite; solved by conjugate gradients, or by a
    cached sparse LU factorization on small systems.
    """

    def __init__(self, domain):
        self.domain = domain

    @cached_property
    def ordering(self):
        order = np.full(self.domain.shape, -1, dtype=np.int64)
        order[self.domain.interior_mask] = np.arange(self.domain.n_interior)
        return order

    @cached_property
    def matrix(self):
        d = self.domain.d
        idx = np.nonzero(self.domain.interior_mask)
        n = idx[0].size
        rows = [np.arange(n)]
        cols = [np.arange(n)]
        data = [np.full(n, 2.0 * d)]
        for axis in range(d):
            for sign in (1, -1):
                shifted = list(idx)
                shifted[axis] = shifted[axis] + sign
                j = self.ordering[tuple(shifted)]
                keep = j >= 0
                rows.append(np.arange(n)[keep])
                cols.append(j[keep])
                data.append(np.full(int(keep.sum()), -1.0))
        matrix = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )
        logger.debug(f"Assembled Dirichlet Laplacian: {n} unknowns, {matrix.nnz} nonzeros")
        return matrix

    @cached_property
    def _lu(self):
        return factorized(self.matrix.tocsc())

    @property
    def size(self):
        return self.domain.n_interior

    def default_method(self):
        limit = getattr(settings, 'LANE_EMDEN_DIRECT_SOLVE_MAX_UNKNOWNS', 20000)
        return 'direct' if self.size <= limit else 'cg'

    def restrict(self, field):
        if isinstance(field, LatticeField):
            if field.domain != self.domain:
                field = transfer(field, self.domain)
            return np.asarray(field.interior_values(), dtype=np.float64)
        return np.asarray(field, dtype=np.float64)

    def to_field(self, vector):
        return LatticeField.from_interior(self.domain, vector)

    def apply(self, vector):
        return self.matrix @ vector

    def solve(self, rhs, tol=None, x0=None, method=None, record=False):
        """
        Solve -Delta u = rhs on the interior. Returns (vector, info) with
        info = {'method', 'iterations', 'residual', 'history'}.
        """
        b = self.restrict(rhs)
        tol = getattr(settings, 'LANE_EMDEN_LINEAR_TOL', 1e-10) if tol is None else tol
        method = method or self.default_method()
        bnorm = float(np.linalg.norm(b))
        if bnorm == 0.0:
            return np.zeros_like(b), {'method': method, 'iterations': 0, 'residual': 0.0, 'history': []}

        history = []
        if method == 'direct':
            x = self._lu(b)
            iterations = 1
        else:
            counter = {'n': 0}

            def callback(xk):
                counter['n'] += 1
                if record:
                    history.append(float(np.linalg.norm(b - self.matrix @ xk)) / bnorm)

            cap = max(100, int(getattr(settings, 'LANE_EMDEN_CG_ITER_FACTOR', 50) * math.ceil(self.domain.radius)))
            x0 = None if x0 is None else self.restrict(x0)
            x, status = cg(self.matrix, b, x0=x0, rtol=tol, atol=0.0, maxiter=cap, callback=callback)
            iterations = counter['n']
            if status != 0:
                residual = float(np.linalg.norm(b - self.matrix @ x)) / bnorm
                raise ConvergenceError("conjugate gradients did not reach the tolerance",
                                       residual=residual, iterations=iterations)

        residual = float(np.linalg.norm(b - self.matrix @ x)) / bnorm
        if residual > max(tol, 1e-12) * 10:
            raise ConvergenceError(f"{method} Dirichlet solve above tolerance {tol:g}",
                                   residual=residual, iterations=iterations)
        return x, {'method': method, 'iterations': iterations, 'residual': residual, 'history': history}


@functools.lru_cache(maxsize=16)
def dirichlet_laplacian(domain):
    return DirichletLaplacian(domain)
