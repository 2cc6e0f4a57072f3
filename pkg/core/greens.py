# core/greens.py
"""
Fundamental solutions of -Delta on Z^d, the half lattice and the quadrant.

Whole-space tables are truncated Dirichlet solves, Richardson-extrapolated in
1/R^(d-2) for d >= 3 and renormalized to vanish at the pole for d = 2.
Half-space and quadrant kernels are signed image sums over a whole-space base.
"""

import abc
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from django.conf import settings
from scipy.signal import fftconvolve

from .analysis import ConeSpec
from .lattice import (
    DomainKind,
    LatticeField,
    TruncatedDomain,
    as_point,
    dirichlet_laplacian,
    laplacian_apply,
    reflect,
    transfer,
)
from .utils import artifacts
from .utils.error_handler import CoverageError, InvalidProblemError

logger = logging.getLogger(__name__)

# gamma_0 of the planar potential kernel; reported next to the fitted constant only
GAMMA_0 = (0.5772156649015329 + 0.5 * math.log(2.0)) / math.pi


def _linear_tol(tol):
    return getattr(settings, 'LANE_EMDEN_LINEAR_TOL', 1e-10) if tol is None else tol


@dataclass
class GreenTable:
    kind: DomainKind
    d: int
    pole: tuple
    values: LatticeField
    radius: float
    tol: float
    residual: float
    fitted_constant: Optional[float] = None
    fitted_slope: Optional[float] = None
    extrapolation_record: list = field(default_factory=list)

    @property
    def domain(self):
        return self.values.domain

    def value_at(self, x):
        x = as_point(x, self.d)
        if not (self.domain.is_interior(x) or self.domain.is_boundary(x)):
            raise CoverageError(f"point {x} is outside the R={self.radius} table")
        return float(self.values.at(x))

    def offsets_covered(self, offsets):
        points = np.asarray(offsets, dtype=np.int64) + np.asarray(self.pole)
        inside, idx = self.domain.index(points)
        return inside & self.domain.stored_mask[idx]

    def values_at_offsets(self, offsets):
        """Phi(pole + z) for each offset z; raises when any offset is not tabulated"""
        offsets = np.atleast_2d(np.asarray(offsets, dtype=np.int64))
        covered = self.offsets_covered(offsets)
        if not np.all(covered):
            bad = tuple(offsets[~covered][0])
            raise CoverageError(f"offset {bad} is outside the R={self.radius} table")
        return self.values.values_at(offsets + np.asarray(self.pole))

    def sidecar(self):
        return {
            'kind': self.kind.value,
            'd': self.d,
            'pole': list(self.pole),
            'R': self.radius,
            'tol': self.tol,
            'residual': self.residual,
            'fitted_constant': self.fitted_constant,
            'fitted_slope': self.fitted_slope,
            'extrapolation_record': [list(pair) for pair in self.extrapolation_record],
        }


def green_residual(values, pole):
    """max over interior of |(-Delta Phi)(x) - delta_pole(x)|"""
    defect = -laplacian_apply(values).values - LatticeField.delta(values.domain, pole).values
    return float(np.max(np.abs(defect[values.domain.interior_mask])))


def _solve_column(domain, pole, tol):
    if not domain.is_interior(pole):
        raise InvalidProblemError(f"pole {pole} is not an interior point of the truncation")
    operator = dirichlet_laplacian(domain)
    vector, info = operator.solve(LatticeField.delta(domain, pole), tol=tol)
    logger.debug(f"Green column {domain.kind.value} d={domain.d} R={domain.radius} pole={pole}: "
                 f"{info['method']} {info['iterations']} it, residual {info['residual']:.2e}")
    return operator.to_field(vector)


def _shell(domain, centre, rmin, rmax):
    offsets = domain.interior - np.asarray(centre)
    r = np.sqrt(np.sum(offsets.astype(np.float64) ** 2, axis=1))
    keep = (r >= rmin) & (r <= rmax)
    return domain.interior[keep], r[keep]


def whole_green(d, pole=None, R=40, tol=None):
    """
    Whole-lattice fundamental solution on the ball of radius R.

    d >= 3: solves at R and 2R and extrapolates pointwise with the model
    value(R) = value(inf) + a / R^(d-2). Boundary values of the R-ball are kept
    so the defining equation holds on the whole interior.
    d = 2: returns G_R - G_R(pole), which vanishes at the pole and is nonpositive.
    """
    if d < 2:
        raise InvalidProblemError(f"dimension must be at least 2, got {d}")
    if R < 10:
        raise InvalidProblemError(f"whole-space tables need R >= 10, got {R}")
    tol = _linear_tol(tol)
    pole = as_point(pole if pole is not None else (0,) * d, d)
    domain = TruncatedDomain(DomainKind.WHOLE, d, R)

    if d >= 3:
        near = _solve_column(domain, pole, tol / 4)
        far = _solve_column(TruncatedDomain(DomainKind.WHOLE, d, 2 * R), pole, tol / 4)
        weight = 2.0 ** (d - 2)
        far_here = transfer(far, domain)
        values = far_here.with_values((weight * far_here.values - near.values) / (weight - 1.0))
        record = [(float(R), float(near.at(pole))), (float(2 * R), float(far.at(pole)))]
        points, r = _shell(domain, pole, R / 4, R / 2)
        fitted = float(np.mean(values.values_at(points) * r ** (d - 2)))
        slope = None
    else:
        near = _solve_column(domain, pole, tol / 4)
        centre = float(near.at(pole))
        values = near.with_values(np.where(domain.stored_mask, near.values - centre, 0.0))
        record = [(float(R), centre)]
        points, r = _shell(domain, pole, R / 8, R / 2)
        design = np.column_stack([np.log(r), np.ones_like(r)])
        (slope, fitted), *_ = np.linalg.lstsq(design, values.values_at(points), rcond=None)
        slope, fitted = float(slope), float(fitted)
        logger.debug(f"Planar kernel fit: slope {slope:.5f} (-1/2pi = {-0.5 / math.pi:.5f}), "
                     f"constant {fitted:.5f} (-gamma_0/2 = {-GAMMA_0 / 2:.5f})")

    residual = green_residual(values, pole)
    logger.info(f"Whole-space table d={d} R={R}: residual {residual:.2e}, record {record}")
    return GreenTable(DomainKind.WHOLE, d, pole, values, float(R), tol, residual,
                      fitted_constant=fitted, fitted_slope=slope, extrapolation_record=record)


def dirichlet_green(kind, d, pole, R, tol=None):
    """Direct truncated Dirichlet solve of -Delta u = delta_pole on the kind's ball"""
    tol = _linear_tol(tol)
    domain = TruncatedDomain(DomainKind(kind), d, R)
    pole = as_point(pole, d)
    values = _solve_column(domain, pole, tol)
    residual = green_residual(values, pole)
    return GreenTable(domain.kind, d, pole, values, float(R), tol, residual)


class GreenKernel(abc.ABC):
    """A Green function Phi(x, y) usable as a convolution kernel"""
    kind = DomainKind.WHOLE
    d = None

    @abc.abstractmethod
    def pair(self, x, y):
        ...

    @abc.abstractmethod
    def column(self, y, domain):
        ...

    @abc.abstractmethod
    def convolve(self, f):
        ...


class TableKernel(GreenKernel):
    """Translation-invariant whole-lattice kernel Phi(x, y) = table(x - y)"""

    def __init__(self, table):
        if table.kind is not DomainKind.WHOLE:
            raise InvalidProblemError("translation kernels need a whole-space table")
        self.table = table
        self.d = table.d

    def pair(self, x, y):
        z = np.subtract(as_point(x, self.d), as_point(y, self.d))
        return float(self.table.values_at_offsets([z])[0])

    def column(self, y, domain):
        y = np.asarray(as_point(y, self.d))
        values = np.zeros(domain.shape)
        points = np.argwhere(domain.stored_mask) + domain.lower
        values[domain.stored_mask] = self.table.values_at_offsets(points - y)
        return LatticeField(domain, values)

    def _check_coverage(self, f):
        support = f.support_points()
        if support.size == 0:
            return
        reach = f.domain.radius + float(np.max(np.sqrt(np.sum(support.astype(np.float64) ** 2, axis=1))))
        available = self.table.radius - math.sqrt(sum(c * c for c in self.table.pole))
        if reach > available + 1e-12:
            raise CoverageError(f"convolution needs offsets up to {reach:.1f}, "
                                f"the table covers {available:.1f}")

    def convolve(self, f):
        self._check_coverage(f)
        kernel = self.table.values.values
        full = fftconvolve(f.values.astype(np.float64), kernel, mode='full')
        start = np.asarray(self.table.pole) - self.table.domain.lower
        window = tuple(slice(int(s), int(s) + n) for s, n in zip(start, f.domain.shape))
        out = np.where(f.domain.interior_mask, full[window], 0.0)
        return LatticeField(f.domain, out)


class DirichletKernel(GreenKernel):
    """Green function of the truncation itself, applied by SPD solves"""

    def __init__(self, domain, tol=None):
        self.domain = domain
        self.kind = domain.kind
        self.d = domain.d
        self.tol = _linear_tol(tol)
        self._columns = {}

    @property
    def operator(self):
        return dirichlet_laplacian(self.domain)

    def _column(self, y):
        y = as_point(y, self.d)
        if y not in self._columns:
            self._columns[y] = _solve_column(self.domain, y, self.tol)
        return self._columns[y]

    def pair(self, x, y):
        x = as_point(x, self.d)
        if not (self.domain.is_interior(x) or self.domain.is_boundary(x)):
            raise CoverageError(f"point {x} is outside the truncation")
        if not self.domain.is_interior(y):
            return 0.0
        return float(self._column(y).at(x))

    def column(self, y, domain=None):
        col = self._column(y)
        return col if domain is None or domain == self.domain else transfer(col, domain)

    def solve(self, rhs, x0=None, tol=None):
        """Phi * rhs on the truncation, with an optional warm start; returns (field, info)"""
        vector, info = self.operator.solve(rhs, tol=tol or self.tol, x0=x0)
        return self.operator.to_field(vector), info

    def convolve(self, f):
        source = f if f.domain == self.domain else transfer(f, self.domain)
        outside = f.values_at(f.support_points())
        if outside.size and not np.isclose(np.sum(np.abs(source.interior_values())), np.sum(np.abs(outside))):
            raise CoverageError("source is not supported in the kernel's truncation interior")
        result, _ = self.solve(source)
        return result if f.domain == self.domain else transfer(result, f.domain)


def _image_terms(kind, y):
    """Signed reflections of y across the Dirichlet hyperplanes of `kind`"""
    terms = [(1.0, tuple(y))]
    for axis in DomainKind(kind).dirichlet_axes:
        terms = terms + [(-sign, reflect(point, axis)) for sign, point in terms]
    return terms


class ImageKernel(GreenKernel):
    """
    Half-space and quadrant kernels by signed images: two terms for the half
    lattice, the four-term alternating sum for the quadrant.
    """

    def __init__(self, kind, base):
        kind = DomainKind(kind)
        if kind is DomainKind.WHOLE:
            raise InvalidProblemError("image kernels are for half-space and quadrant domains")
        if base.kind is not DomainKind.WHOLE:
            raise InvalidProblemError("the image base must be a whole-space kernel")
        self.kind = kind
        self.base = base
        self.d = base.d
        if self.d < len(kind.dirichlet_axes):
            raise InvalidProblemError(f"{kind.value} kernels need d >= {len(kind.dirichlet_axes)}")

    def _check_closed(self, point):
        for axis in self.kind.dirichlet_axes:
            if point[axis] < 0:
                raise InvalidProblemError(f"point {point} is outside the closed {self.kind.value} domain")

    def on_wall(self, point):
        return any(point[axis] == 0 for axis in self.kind.dirichlet_axes)

    def pair(self, x, y):
        x, y = as_point(x, self.d), as_point(y, self.d)
        self._check_closed(x)
        self._check_closed(y)
        if self.on_wall(x) or self.on_wall(y):
            return 0.0
        return float(sum(sign * self.base.pair(x, image) for sign, image in _image_terms(self.kind, y)))

    def column(self, y, domain):
        y = as_point(y, self.d)
        self._check_closed(y)
        values = np.zeros(domain.shape)
        if not self.on_wall(y):
            for sign, image in _image_terms(self.kind, y):
                values = values + sign * self.base.column(image, domain).values
        for axis in self.kind.dirichlet_axes:
            values = np.where(domain.axis_coordinates(axis) > 0, values, 0.0)
        return LatticeField(domain, values)

    def odd_extension(self, f):
        """Antisymmetric extension of f across the Dirichlet hyperplanes, on the whole ball"""
        whole = TruncatedDomain(DomainKind.WHOLE, self.d, f.domain.radius)
        values = transfer(f, whole).values
        for axis in self.kind.dirichlet_axes:
            values = values - np.flip(values, axis=axis)
        return LatticeField(whole, values)

    def convolve(self, f):
        extended = self.base.convolve(self.odd_extension(f))
        result = transfer(extended, f.domain)
        return result.with_values(np.where(f.domain.interior_mask, result.values, 0.0))


def convolve(kernel, f):
    """(Phi * f)(x) = sum_y Phi(x, y) f(y)"""
    return kernel.convolve(f)


def half_green(d, x, y, base):
    """Phi_{d,+}(x, y) = Phi_d(x - y) - Phi_d(x - y*), zero on the wall x1 = 0"""
    base = TableKernel(base) if isinstance(base, GreenTable) else base
    if base.d != d:
        raise InvalidProblemError(f"base kernel has dimension {base.d}, expected {d}")
    return ImageKernel(DomainKind.HALF, base).pair(x, y)


def quadrant_green(d, x, y, base):
    """Four-image quadrant kernel, zero on x1 = 0 and on x2 = 0"""
    base = TableKernel(base) if isinstance(base, GreenTable) else base
    if base.d != d:
        raise InvalidProblemError(f"base kernel has dimension {base.d}, expected {d}")
    return ImageKernel(DomainKind.QUADRANT, base).pair(x, y)


@dataclass
class BoundReport:
    kind: DomainKind
    profile: str
    minimum: float
    maximum: float
    count: int

    @property
    def spread(self):
        return self.maximum / self.minimum if self.minimum > 0 else math.inf

    def to_record(self):
        return {'kind': self.kind.value, 'profile': self.profile, 'min': self.minimum,
                'max': self.maximum, 'count': self.count, 'spread': self.spread}


def kernel_bound_report(table, cone=None, rmin=None, rmax=None):
    """
    min and max of Phi(x, y) / profile(x) over rmin <= |x| <= rmax (default
    [R/4, R/2]); profiles are (1+|x-y|)^(2-d), x1 (1+|x-y|)^-d and
    x1 x2 (1+|x-y|)^(-d-2). Two-sided bounds are sampled on |x| >= 2|y|.
    """
    rmin = table.radius / 4 if rmin is None else rmin
    rmax = table.radius / 2 if rmax is None else rmax
    domain = table.domain
    points = domain.interior
    r = np.sqrt(np.sum(points.astype(np.float64) ** 2, axis=1))
    keep = (r >= rmin) & (r <= rmax)
    pole = np.asarray(table.pole, dtype=np.float64)
    if table.kind is not DomainKind.WHOLE:
        keep &= r >= 2 * np.linalg.norm(pole)
    if cone is not None:
        keep &= ConeSpec(cone).contains(points)
    points = points[keep]
    if points.size == 0:
        raise InvalidProblemError("kernel bound report over an empty region")

    distance = 1.0 + np.sqrt(np.sum((points - pole) ** 2, axis=1))
    d = table.d
    if table.kind is DomainKind.WHOLE:
        if d < 3:
            raise InvalidProblemError("the whole-space decay bound needs d >= 3")
        profile, name = distance ** (2 - d), '(1+|x-y|)^(2-d)'
    elif table.kind is DomainKind.HALF:
        profile, name = points[:, 0] * distance ** (-d), 'x1 (1+|x-y|)^(-d)'
    else:
        profile, name = points[:, 0] * points[:, 1] * distance ** (-d - 2), 'x1 x2 (1+|x-y|)^(-d-2)'
    ratio = table.values.values_at(points) / profile
    return BoundReport(table.kind, name, float(ratio.min()), float(ratio.max()), int(ratio.size))


def cached_whole_table(d, R, tol=None):
    """Whole-space table for the origin pole, read from or written to the kernel cache"""
    tol = _linear_tol(tol)
    cache_dir = getattr(settings, 'LANE_EMDEN_CACHE_DIR')
    stem = f"whole_d{d}_R{R:g}_tol{tol:g}"
    csv_path = cache_dir / f"{stem}.csv"
    json_path = cache_dir / f"{stem}.json"
    if csv_path.exists() and json_path.exists():
        meta = artifacts.read_json(json_path)
        domain = TruncatedDomain(DomainKind.WHOLE, d, R)
        values = artifacts.read_field_csv(csv_path, domain)
        logger.info(f"Loaded cached kernel {stem}")
        return GreenTable(DomainKind.WHOLE, d, tuple(meta['pole']), values, float(meta['R']), meta['tol'],
                          meta['residual'], meta['fitted_constant'], meta.get('fitted_slope'),
                          [tuple(pair) for pair in meta['extrapolation_record']])
    table = whole_green(d, None, R, tol)
    cache_dir.mkdir(parents=True, exist_ok=True)
    artifacts.write_field_csv(table.values, csv_path, include_boundary=True)
    artifacts.write_json(json_path, table.sidecar())
    logger.info(f"Cached kernel {stem}")
    return table
