# core/analysis.py
"""
Exponent bookkeeping and diagnostics: critical exponents per domain, the
(alpha, p) classifier, bootstrap decay sequences with their divergent-sum
certificate, cone predicates, shell-averaged decay fits and the maximum
principle checker.

Exponents and classifier boundaries are computed with Fractions so inputs
lying exactly on a critical curve land on the documented side of it.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np
from scipy import ndimage

from .lattice import DomainKind, laplacian_apply
from .utils.error_handler import InvalidProblemError

logger = logging.getLogger(__name__)

INF = math.inf

# bootstrap exponents beyond this magnitude are not representable as floats
TAU_CAP = Fraction(10) ** 300


def exact(value):
    """Fraction for finite inputs (floats via their shortest repr), math.inf passes through"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        if math.isinf(value):
            return value
        return Fraction(repr(value))
    if isinstance(value, str):
        return INF if value.strip().lower() in ('inf', '+inf', 'infinity') else Fraction(value)
    return Fraction(value)


def _float(value):
    return float(value) if not isinstance(value, float) else value


class ExponentPair(NamedTuple):
    kind: DomainKind
    d: int
    alpha: object
    serrin: object
    sobolev: object

    def as_floats(self):
        return float(self.serrin), float(self.sobolev)

    def to_record(self):
        return {'kind': self.kind.value, 'd': self.d, 'alpha': str(self.alpha),
                'serrin': str(self.serrin), 'sobolev': str(self.sobolev)}


def _check_dimension(kind, d):
    if kind is DomainKind.WHOLE and d < 3:
        raise InvalidProblemError(f"whole-space exponents need d >= 3, got {d}")
    if d < 2:
        raise InvalidProblemError(f"dimension must be at least 2, got {d}")


def exponents(kind, d, alpha):
    """
    serrin = 1 + (d - alpha)/(d - 2 beta), sobolev = 2 (d - alpha)/(d - 2 beta)
    with beta = 1, 1/2, 0 for the whole lattice, the half lattice and the quadrant.
    Compactly supported weights (alpha = inf) give -inf for both.
    """
    kind = DomainKind(kind)
    _check_dimension(kind, d)
    alpha = exact(alpha)
    if alpha == INF:
        return ExponentPair(kind, d, alpha, -INF, -INF)
    gap = d - 2 * kind.beta
    return ExponentPair(kind, d, alpha, 1 + (d - alpha) / gap, 2 * (d - alpha) / gap)


class Verdict(str, enum.Enum):
    EXISTS_VARIATIONAL = 'ExistsVariational'
    EXISTS_SUBLINEAR_UNIQUE = 'ExistsSublinearUnique'
    LINEAR_EIGEN_REGIME = 'LinearEigenRegime'
    NONEXISTENT = 'Nonexistent'
    OPEN = 'Open'
    OUT_OF_THEORY = 'OutOfTheory'


@dataclass
class Classification:
    verdict: Verdict
    citation: str
    kind: DomainKind
    d: int
    alpha: object
    p: object
    form_bound: Optional[bool] = None

    def to_record(self):
        return {'kind': self.kind.value, 'd': self.d, 'alpha': str(self.alpha), 'p': str(self.p),
                'verdict': self.verdict.value, 'citation': self.citation,
                'form_bound': self.form_bound}


def form_bound_predicate(d, beta, alpha_tilde, p):
    """
    Exponent condition under which sum v K(v) <= c ||v||_{p'}^2 for
    Q <~ (1+|x|)^(-alpha_tilde): 1 <= dp/(dp - d + alpha_tilde) <= 2d/(d + 2 beta)
    on [0, d], and no condition beyond d.
    """
    beta, alpha_tilde, p = exact(beta), exact(alpha_tilde), exact(p)
    if alpha_tilde < 0:
        raise InvalidProblemError("the decay rate of Q must be nonnegative")
    if alpha_tilde == INF or alpha_tilde > d:
        return True
    ratio = (d * p) / (d * p - d + alpha_tilde)
    return 1 <= ratio <= Fraction(2 * d) / (d + 2 * beta)


def classify(kind, d, alpha, p, bounded=True, vanishing_weight=False):
    """
    Total verdict for Q ~ (1+|x|)^(-alpha). `bounded` is limsup Q < inf and
    `vanishing_weight` is lim Q(x)|x|^alpha = 0, the extra hypothesis that
    admits p equal to the Sobolev exponent.
    """
    kind = DomainKind(kind)
    alpha, p = exact(alpha), exact(p)
    if not p > 1:
        raise InvalidProblemError(f"p must exceed 1, got {p}")

    def verdict(v, citation, form_bound=None):
        return Classification(v, citation, kind, d, alpha, p, form_bound)

    if kind is DomainKind.WHOLE and d < 3:
        return verdict(Verdict.OUT_OF_THEORY, 'whole lattice needs d >= 3 for a decaying Green function')
    exps = exponents(kind, d, alpha)
    two_beta = 2 * kind.beta
    serrin, sobolev = exps.serrin, exps.sobolev
    name = {DomainKind.WHOLE: 'whole', DomainKind.HALF: 'half', DomainKind.QUADRANT: 'quadrant'}[kind]
    form_bound = form_bound_predicate(d, kind.beta, max(alpha, 0), p) if alpha != INF else True

    if p < 2:
        if alpha > two_beta:
            return verdict(Verdict.EXISTS_SUBLINEAR_UNIQUE, f'{name}: sublinear, alpha > {two_beta}, p in (1,2)')
        if alpha < two_beta:
            return verdict(Verdict.NONEXISTENT, f'{name}: alpha < {two_beta} and p < serrin {serrin}')
        return verdict(Verdict.OUT_OF_THEORY, f'{name}: sublinear boundary alpha = {two_beta}')

    if p == 2:
        if sobolev < 2 or (sobolev == 2 and vanishing_weight):
            return verdict(Verdict.LINEAR_EIGEN_REGIME, f'{name}: p = 2 with 2*_(beta,alpha) = {sobolev} admitted',
                           form_bound)
        if alpha < two_beta and p < serrin:
            return verdict(Verdict.NONEXISTENT, f'{name}: alpha < {two_beta} and p < serrin {serrin}')
        return verdict(Verdict.OUT_OF_THEORY, f'{name}: p = 2 outside the eigenvalue regime (2*_(beta,alpha) = {sobolev})')

    # p > 2
    if kind is DomainKind.QUADRANT:
        if alpha >= 0 and bounded:
            return verdict(Verdict.EXISTS_VARIATIONAL, 'quadrant: p > 2 and limsup Q < inf', form_bound)
        if alpha < 0 and p < serrin:
            return verdict(Verdict.NONEXISTENT, f'quadrant: alpha < 0 and p < serrin {serrin}')
        if alpha < 0 and p == serrin:
            return verdict(Verdict.OPEN, 'quadrant: p equals serrin, no equality case is known')
        return verdict(Verdict.OUT_OF_THEORY, f'quadrant: alpha = {alpha}, p = {p} not covered')

    clause = 'A' if kind is DomainKind.WHOLE else 'B'
    if alpha >= 0 and bounded and p > sobolev:
        return verdict(Verdict.EXISTS_VARIATIONAL, f'{name}: ({clause}1) p > sobolev {sobolev}', form_bound)
    if alpha >= 0 and vanishing_weight and p >= sobolev:
        return verdict(Verdict.EXISTS_VARIATIONAL,
                       f'{name}: ({clause}2) p >= sobolev {sobolev} with vanishing weight', form_bound)
    if alpha < two_beta and p <= serrin:
        side = 'p = serrin' if p == serrin else f'p < serrin {serrin}'
        return verdict(Verdict.NONEXISTENT, f'{name}: alpha < {two_beta} and {side}')
    if 0 <= alpha < two_beta and serrin < p <= sobolev:
        return verdict(Verdict.OPEN, f'{name}: serrin {serrin} < p <= sobolev {sobolev} is open')
    return verdict(Verdict.OUT_OF_THEORY, f'{name}: alpha = {alpha}, p = {p} not covered')


class BootstrapVerdict(str, enum.Enum):
    TERMINATES = 'Terminates'
    CONVERGES_BELOW_THRESHOLD = 'ConvergesBelowThreshold'
    INVALID_REGIME = 'InvalidRegime'


@dataclass
class BootstrapTrace:
    kind: DomainKind
    d: int
    alpha: object
    q: object
    tau: list = field(default_factory=list)
    j0: Optional[int] = None
    verdict: BootstrapVerdict = BootstrapVerdict.CONVERGES_BELOW_THRESHOLD
    reason: str = ''
    cut_at: Optional[int] = None

    @property
    def limit(self):
        """Fixed point (2 beta - alpha)/(1 - q) of the recurrence, for q < 1"""
        q, alpha = self.q, self.alpha
        if q >= 1:
            return INF
        return float((2 * self.kind.beta - alpha) / (1 - q))

    @property
    def threshold(self):
        return -2 * self.kind.beta

    def to_record(self):
        return {'kind': self.kind.value, 'd': self.d, 'alpha': str(self.alpha), 'q': str(self.q),
                'tau': self.tau, 'j0': self.j0, 'verdict': self.verdict.value, 'reason': self.reason,
                'cut_at': self.cut_at}


def bootstrap(kind, d, alpha, q, max_steps=200):
    """
    tau_0 = 2 beta - d, tau_{j+1} = q tau_j + 2 beta - alpha.

    j0 is the first index with q tau_j - alpha >= -2 beta; the full
    `max_steps` sequence is kept either way so the tail can be inspected,
    unless |tau| passes TAU_CAP, where it is cut and `cut_at` records the step.
    """
    kind = DomainKind(kind)
    _check_dimension(kind, d)
    alpha, q = exact(alpha), exact(q)
    two_beta = 2 * kind.beta
    trace = BootstrapTrace(kind, d, alpha, q)
    if alpha == INF:
        trace.verdict = BootstrapVerdict.INVALID_REGIME
        trace.reason = 'compactly supported Q has no decay rate to bootstrap'
        return trace
    upper = (d - alpha) / (d - two_beta)
    if not 0 < q < upper:
        trace.verdict = BootstrapVerdict.INVALID_REGIME
        trace.reason = f"hypothesis q in (0, (d-alpha)/(d-2beta)) = (0, {upper}) fails for q = {q}"
        logger.warning(f"Bootstrap rejected: {trace.reason}")
        return trace

    tau = Fraction(two_beta - d)
    for j in range(max_steps + 1):
        trace.tau.append(float(tau))
        if trace.j0 is None and q * tau - alpha >= -two_beta:
            trace.j0 = j
        tau = q * tau + two_beta - alpha
        if abs(tau) > TAU_CAP:
            trace.cut_at = j + 1
            logger.info(f"Bootstrap sequence left the float range at step {j + 1}")
            break
        # keep the exact recurrence from growing unbounded denominators
        if tau.denominator > 10 ** 30:
            tau = Fraction(float(tau))
    trace.verdict = BootstrapVerdict.TERMINATES if trace.j0 is not None else BootstrapVerdict.CONVERGES_BELOW_THRESHOLD
    logger.debug(f"Bootstrap {kind.value} d={d} alpha={alpha} q={q}: j0={trace.j0}")
    return trace


class ConeSpec(str, enum.Enum):
    A0 = 'A0'
    A1 = 'A1'

    def contains(self, points):
        """x1 > |x|/4 for A0; x1 > |x|/8 and x2 > |x|/8 for A1; exact in integers"""
        points = np.atleast_2d(np.asarray(points, dtype=np.int64))
        sq = np.sum(points * points, axis=1)
        x1 = points[:, 0]
        if self is ConeSpec.A0:
            return (x1 > 0) & (16 * x1 * x1 > sq)
        x2 = points[:, 1]
        return (x1 > 0) & (x2 > 0) & (64 * x1 * x1 > sq) & (64 * x2 * x2 > sq)


CERTIFICATE_CONES = {DomainKind.HALF: ConeSpec.A0, DomainKind.QUADRANT: ConeSpec.A1}


@dataclass
class Certificate:
    kind: DomainKind
    d: int
    source_exponent: float
    weight_exponent: int
    diverges: bool
    partial_sums: list
    increment_ratio: float

    @property
    def verdict(self):
        return 'consistent with nonexistence' if self.diverges else 'no divergence'

    def to_record(self):
        return {'kind': self.kind.value, 'd': self.d, 'source_exponent': self.source_exponent,
                'weight_exponent': self.weight_exponent, 'diverges': self.diverges,
                'partial_sums': self.partial_sums, 'increment_ratio': self.increment_ratio,
                'verdict': self.verdict}


def certificate(kind, d, alpha, q, n_max=64, tau=None):
    """
    Partial sums S_n = sum_{|x| <= n} f(x) w(x) for f = (1+|x|)^(q tau - alpha)
    with w = (1+|x|)^(2-d) on the whole lattice, (1+|x|)^(1-d) on A0 for the half
    lattice and (1+|x|)^(-d) on A1 for the quadrant. The sum diverges exactly
    when q tau - alpha >= -2 beta; tau defaults to the first bootstrap index
    where that happens, or the last one computed.
    """
    kind = DomainKind(kind)
    if tau is None:
        trace = bootstrap(kind, d, alpha, q)
        if trace.verdict is BootstrapVerdict.INVALID_REGIME:
            raise InvalidProblemError(trace.reason)
        tau = trace.tau[trace.j0 if trace.j0 is not None else -1]
    alpha_q, q_q = exact(alpha), exact(q)
    source = q_q * exact(tau) - alpha_q
    weight = {DomainKind.WHOLE: 2 - d, DomainKind.HALF: 1 - d, DomainKind.QUADRANT: -d}[kind]
    diverges = source >= -2 * kind.beta

    lower = -n_max if kind is DomainKind.WHOLE else 1
    axes = [np.arange(lower if a in kind.dirichlet_axes else -n_max, n_max + 1) for a in range(d)]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, d)
    if kind in CERTIFICATE_CONES:
        grid = grid[CERTIFICATE_CONES[kind].contains(grid)]
    r = np.sqrt(np.sum(grid.astype(np.float64) ** 2, axis=1))
    terms = (1.0 + r) ** (float(source) + weight)

    radii = sorted({max(1, n_max // 4), max(2, n_max // 2), n_max})
    partial = [(n, float(np.sum(terms[r <= n]))) for n in radii]
    increments = [b - a for (_, a), (_, b) in zip(partial, partial[1:])]
    ratio = increments[-1] / increments[0] if len(increments) > 1 and increments[0] > 0 else math.nan
    logger.info(f"Certificate {kind.value} d={d}: exponent {float(source):.4f}, "
                f"diverges={diverges}, increment ratio {ratio:.3f}")
    return Certificate(kind, d, float(source), weight, bool(diverges), partial, ratio)


class DecayFit(NamedTuple):
    exponent: float
    log_power: Optional[float]
    residual: float
    shells: int

    def to_record(self):
        return dict(self._asdict())


def _shell_profile(u, rmin, rmax, cone, ray):
    domain = u.domain
    points = domain.interior
    values = u.values[domain.interior_mask]
    if ray is not None:
        ray = np.asarray(ray, dtype=np.int64)
        steps = np.arange(1, domain.half_width + 1)
        candidates = steps[:, None] * ray[None, :]
        inside, idx = domain.index(candidates)
        keep = inside & domain.interior_mask[idx]
        r = steps[keep] * float(np.linalg.norm(ray))
        samples = u.values[idx][keep]
        sel = (r >= rmin) & (r <= rmax)
        return r[sel], samples[sel]
    if cone is not None:
        keep = ConeSpec(cone).contains(points)
        points, values = points[keep], values[keep]
    r = np.sqrt(np.sum(points.astype(np.float64) ** 2, axis=1))
    shell = np.rint(r).astype(np.int64)
    sel = (shell >= math.ceil(rmin)) & (shell <= math.floor(rmax))
    shell, values = shell[sel], values[sel]
    if shell.size == 0:
        return np.empty(0), np.empty(0)
    labels, inverse = np.unique(shell, return_inverse=True)
    means = np.bincount(inverse, weights=values) / np.bincount(inverse)
    return labels.astype(np.float64), means


def decay_fit(u, rmin, rmax, cone=None, with_log=False, ray=None):
    """
    Least-squares slope of ln(shell average of u) against ln r, with an extra
    ln ln r column when `with_log`. Shells are integer-rounded radii about the
    origin; `ray` samples the multiples of an integer direction instead.
    """
    r, avg = _shell_profile(u, rmin, rmax, cone, ray)
    if r.size < 5:
        raise InvalidProblemError(f"decay fit needs at least 5 nonempty shells in [{rmin}, {rmax}], got {r.size}")
    if np.any(avg <= 0):
        raise InvalidProblemError("decay fit needs positive samples")
    if with_log and np.any(r <= math.e):
        raise InvalidProblemError("log-corrected fits need radii above e")
    columns = [np.log(r)]
    if with_log:
        columns.append(np.log(np.log(r)))
    design = np.column_stack(columns + [np.ones_like(r)])
    coeffs, *_ = np.linalg.lstsq(design, np.log(avg), rcond=None)
    residual = float(np.sqrt(np.mean((design @ coeffs - np.log(avg)) ** 2)))
    log_power = float(coeffs[1]) if with_log else None
    return DecayFit(float(coeffs[0]), log_power, residual, int(r.size))


@dataclass
class MaxPrincipleReport:
    hypotheses_hold: bool
    source_defects: list
    boundary_ok: bool
    shell_ok: bool
    violations: list
    components: list
    zero_branch: bool
    dichotomy_ok: bool

    @property
    def implication_holds(self):
        return not self.hypotheses_hold or not self.violations

    @property
    def passed(self):
        return self.implication_holds and self.dichotomy_ok

    def to_record(self):
        return {'hypotheses_hold': self.hypotheses_hold, 'source_defects': self.source_defects,
                'boundary_ok': self.boundary_ok, 'shell_ok': self.shell_ok,
                'violations': self.violations, 'components': self.components,
                'zero_branch': self.zero_branch, 'dichotomy_ok': self.dichotomy_ok,
                'passed': self.passed}


def check_max_principle(u, kappa=None, tol=None):
    """
    Check that -Delta u + kappa u >= 0 inside with u >= 0 on the boundary and
    on the outermost shell forces u >= 0, and that an interior zero of a
    nonnegative u forces u = 0 on its component. Negative points are reported
    with their connected components regardless of the hypotheses.
    """
    domain = u.domain
    if tol is None:
        tol = 1e-10 * max(1.0, u.sup())
    kappa_values = np.zeros(domain.shape) if kappa is None else kappa.values
    if np.any(kappa_values < 0):
        raise InvalidProblemError("kappa must be nonnegative")
    interior = domain.interior_mask
    source = -laplacian_apply(u).values + kappa_values * u.values

    def listed(mask):
        return [tuple(int(c) for c in p) for p in np.argwhere(mask) + domain.lower]

    source_defects = listed(interior & (source < -tol))
    boundary_ok = bool(np.all(u.boundary_values() >= -tol)) if u.boundary_values().size else True
    outer = interior & (np.rint(domain.radii) >= math.floor(domain.radius))
    shell_ok = bool(np.all(u.values[outer] >= -tol)) if np.any(outer) else True
    hypotheses = not source_defects and boundary_ok and shell_ok

    negative = interior & (u.values < -tol)
    labels, count = ndimage.label(negative)
    components = [listed(labels == k) for k in range(1, count + 1)]

    zero_branch = bool(np.all(np.abs(u.values[interior]) <= tol))
    dichotomy_ok = True
    if hypotheses and not np.any(negative) and not zero_branch:
        zeros = interior & (np.abs(u.values) <= tol)
        if np.any(zeros):
            parts, _ = ndimage.label(interior)
            for k in np.unique(parts[zeros]):
                if np.any(np.abs(u.values[parts == k]) > tol):
                    dichotomy_ok = False
    report = MaxPrincipleReport(bool(hypotheses), source_defects, boundary_ok, shell_ok,
                                listed(negative), components, zero_branch, dichotomy_ok)
    if report.violations:
        logger.warning(f"Maximum principle check: {len(report.violations)} negative points in {count} components")
    return report
