# core/solvers.py
"""
Constructive solvers on a truncation with zero Dirichlet data:

    solve_poisson          -Delta u = f
    monotone_solve         p in (1, 2): u_n = Phi * (Q u_{n-1}^(p-1)) between sub- and supersolution
    eigen_solve            p = 2: power iteration on K
    ground_state_solve     p > 2: normalized fixed point of v = |K v|^(p-1) sgn(K v) plus Nehari rescale
    nonexistence_scan      amplitude trend over radii and the divergent-sum certificate (heuristic)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from django.conf import settings

from .analysis import Verdict, bootstrap, certificate, classify, decay_fit, exponents
from .greens import DirichletKernel
from .lattice import (
    DomainKind,
    LatticeField,
    NormKind,
    TruncatedDomain,
    as_point,
    dirichlet_laplacian,
    l1_ball,
    norm,
    transfer,
)
from .operators import apply_K, energy
from .utils.error_handler import (
    ConvergenceError,
    DegenerateInputError,
    InvalidProblemError,
    IterationCollapseError,
    MonotonicityError,
    RegimeError,
)

logger = logging.getLogger(__name__)


def _nonlinear_tol(tol):
    return getattr(settings, 'LANE_EMDEN_NONLINEAR_TOL', 1e-8) if tol is None else tol


def _max_iter(max_iter):
    return getattr(settings, 'LANE_EMDEN_NONLINEAR_MAX_ITER', 10000) if max_iter is None else max_iter


@dataclass
class SolveResult:
    u: LatticeField
    iterations: int
    residual: float
    monotone: bool = False
    history: list = field(default_factory=list)
    decay_fit: Optional[object] = None
    extras: dict = field(default_factory=dict)
    dual: Optional[LatticeField] = None

    def to_record(self, spec=None, R=None, tol=None):
        record = {
            'iterations': self.iterations,
            'residual': self.residual,
            'monotone': self.monotone,
            'history': self.history,
            'decay_fit': self.decay_fit.to_record() if self.decay_fit is not None else None,
            'extras': self.extras,
        }
        if spec is not None:
            record['spec'] = spec.describe()
        if R is not None:
            record['R'] = R
        if tol is not None:
            record['tol'] = tol
        return record


@dataclass
class EigenResult:
    lambda1: float
    v1: LatticeField
    rayleigh_history: list
    residual: float
    iterations: int
    regime: dict = field(default_factory=dict)

    def to_record(self, spec=None, R=None, tol=None):
        record = {'lambda1': self.lambda1, 'residual': self.residual, 'iterations': self.iterations,
                  'rayleigh_history': self.rayleigh_history, 'regime': self.regime}
        if spec is not None:
            record['spec'] = spec.describe()
        if R is not None:
            record['R'] = R
        if tol is not None:
            record['tol'] = tol
        return record


def _try_decay_fit(u, R):
    try:
        return decay_fit(u, R / 8, R / 4)
    except InvalidProblemError as exc:
        logger.debug(f"Decay fit skipped: {exc}")
        return None


def solve_poisson(kind, f, R=None, tol=None):
    """-Delta u = f on the interior of the kind's R-ball, u = 0 on its boundary"""
    kind = DomainKind(kind)
    domain = TruncatedDomain(kind, f.domain.d, R if R is not None else f.domain.radius)
    source = f if f.domain == domain else transfer(f, domain)
    total = float(np.sum(np.abs(f.values)))
    if not math.isclose(float(np.sum(np.abs(source.interior_values()))), total, rel_tol=1e-12, abs_tol=1e-300):
        raise InvalidProblemError("the source must be supported in the truncation interior")
    operator = dirichlet_laplacian(domain)
    vector, info = operator.solve(source, tol=tol, record=True)
    u = operator.to_field(vector)
    logger.info(f"Poisson solve {kind.value} d={domain.d} R={domain.radius}: "
                f"{info['method']}, {info['iterations']} iterations, residual {info['residual']:.2e}")
    return SolveResult(u, info['iterations'], info['residual'], history=info['history'],
                       extras={'method': info['method']})


class Supersolution(NamedTuple):
    field: LatticeField
    t1: float
    tau_p: float
    profile_constant: float


def _sublinear_hypothesis(spec):
    two_beta = 2 * spec.beta
    if not 1 < spec.p < 2:
        raise RegimeError('p in (1,2)', f"the sublinear construction needs p in (1,2), got {spec.p}")
    if not spec.alpha > two_beta:
        raise RegimeError(f'alpha > {two_beta}', f"the sublinear construction needs alpha > {two_beta}, "
                                                 f"got {spec.alpha}")


def supersolution_exponent(kind, d, alpha, p):
    """tau_p = max{-(alpha - 2 beta)/(2 - p), (2 beta - d)/2}"""
    two_beta = float(2 * DomainKind(kind).beta)
    decay = -(alpha - two_beta) / (2.0 - p) if math.isfinite(alpha) else -math.inf
    return max(decay, (two_beta - d) / 2.0)


def build_supersolution(spec, R, tol=None):
    """
    t1 * Phi * g with g = (1+|x|)^(tau_p - 2 beta) and t1 the smallest scale
    (up to a 1e-9 margin) at which Q ubar^(p-1) <= -Delta ubar on the interior.
    """
    _sublinear_hypothesis(spec)
    domain = spec.domain(R)
    tau = supersolution_exponent(spec.kind, spec.d, spec.alpha, spec.p)
    shift = float(2 * spec.beta)
    g = LatticeField.from_function(domain, lambda pts: (1.0 + np.sqrt(np.sum(pts.astype(np.float64) ** 2, axis=1)))
                                   ** (tau - shift))
    operator = dirichlet_laplacian(domain)
    vector, _ = operator.solve(g, tol=tol)
    base = operator.to_field(np.maximum(vector, 0.0))
    Q = spec.weight(domain).values
    inside = domain.interior_mask
    ratio = Q[inside] * base.values[inside] ** (spec.p - 1.0) / g.values[inside]
    constant = float(ratio.max())
    if constant <= 0:
        raise DegenerateInputError("Q vanishes on the truncation")
    t1 = constant ** (1.0 / (2.0 - spec.p)) * (1.0 + 1e-9)
    logger.debug(f"Supersolution: tau_p = {tau}, profile constant {constant:.6g}, t1 = {t1:.6g}")
    return Supersolution(base * t1, t1, tau, constant)


def _argmax_point(values, domain):
    masked = np.where(domain.interior_mask, values, -np.inf)
    index = np.asarray(np.unravel_index(np.argmax(masked), domain.shape))
    return tuple(int(c) for c in index + domain.lower)


def monotone_solve(spec, R, tol=None, seed_point=None, max_iter=None):
    """
    Sublinear iteration from the subsolution t2 Phi(., x0), x0 a maximizer of
    Q unless `seed_point` is given. t2 is the largest power of two keeping the
    seed below both Phi * (Q w^(p-1)) and the supersolution.
    """
    tol = _nonlinear_tol(tol)
    max_iter = _max_iter(max_iter)
    slack = getattr(settings, 'LANE_EMDEN_MONOTONE_SLACK', 1e-12)
    upper = build_supersolution(spec, R)
    domain = spec.domain(R)
    kernel = DirichletKernel(domain)
    Q = spec.weight(domain)
    inside = domain.interior_mask

    x0 = as_point(seed_point, spec.d) if seed_point is not None else _argmax_point(Q.values, domain)
    if Q.at(x0) <= 0:
        raise InvalidProblemError(f"Q vanishes at the seed point {x0}")
    col = kernel.column(x0).values
    image = kernel.convolve(LatticeField(domain, Q.values * np.maximum(col, 0.0) ** (spec.p - 1.0))).values
    m = float(np.min(image[inside] / col[inside]))
    cap = min(m ** (1.0 / (2.0 - spec.p)), float(np.min(upper.field.values[inside] / col[inside])))
    t2 = 2.0 ** math.floor(math.log2(cap))
    u = LatticeField(domain, t2 * col)
    logger.info(f"Monotone solve d={spec.d} {spec.kind.value} R={R}: t1 = {upper.t1:.4g}, t2 = {t2:.4g}, seed {x0}")

    # after the first step only the increment Phi * (Q (u_n^(p-1) - u_{n-1}^(p-1))) is solved,
    # so linear-solve error scales with the increment rather than with u
    history = []
    change = math.inf
    iterations = 0
    previous_rhs = None
    for iterations in range(1, max_iter + 1):
        rhs = Q * u.with_values(np.maximum(u.values, 0.0) ** (spec.p - 1.0))
        if previous_rhs is None:
            nxt, info = kernel.solve(rhs, x0=u)
        else:
            step, info = kernel.solve(rhs - previous_rhs)
            nxt = u + step
        previous_rhs = rhs
        scale = max(1.0, u.sup())
        drop = float(np.max(u.values[inside] - nxt.values[inside]))
        if drop > slack * scale:
            raise MonotonicityError(f"iterate decreased by {drop:.3e} at step {iterations}",
                                    residual=drop, iterations=iterations)
        change = (nxt - u).sup() / nxt.sup()
        history.append({'iteration': iterations, 'sup': nxt.sup(), 'change': change,
                        'linear_iterations': info['iterations']})
        logger.debug(f"Monotone step {iterations}: sup {nxt.sup():.6g}, change {change:.3e}")
        u = nxt
        if change <= tol:
            break
    else:
        raise ConvergenceError("monotone iteration reached the iteration cap", residual=change, iterations=iterations)

    image = kernel.convolve(Q * u.with_values(np.maximum(u.values, 0.0) ** (spec.p - 1.0)))
    residual = (u - image).sup() / u.sup()
    below = bool(np.all(u.values[inside] <= upper.field.values[inside] * (1.0 + 1e-9)))
    if not below:
        logger.warning("Monotone solution exceeds the supersolution on the truncation")
    extras = {'t1': upper.t1, 't2': t2, 'tau_p': upper.tau_p, 'seed_point': list(x0),
              'decay_bracket': [float(2 * spec.beta - spec.d), upper.tau_p], 'below_supersolution': below}
    logger.info(f"Monotone solve converged in {iterations} iterations, fixed-point residual {residual:.2e}")
    return SolveResult(u, iterations, float(residual), monotone=True, history=history,
                       decay_fit=_try_decay_fit(u, R), extras=extras)


def linear_regime(spec):
    """2*_(beta,alpha) < 2, or = 2 with a vanishing weight"""
    sobolev = exponents(spec.kind, spec.d, spec.alpha).sobolev
    admitted = sobolev < 2 or (sobolev == 2 and spec.Q.vanishing_weight)
    return admitted, {'sobolev': str(sobolev), 'admitted': admitted}


def eigen_solve(spec, R, tol=None, max_iter=None, exploratory=False):
    """Top eigenpair of K for p = 2 by power iteration from the constant seed"""
    if spec.p != 2:
        raise InvalidProblemError(f"the eigenvalue problem needs p = 2, got {spec.p}")
    admitted, regime = linear_regime(spec)
    if not admitted:
        if not exploratory:
            raise RegimeError('2*_{beta,alpha} < 2')
        logger.warning(f"Eigen solve outside the admitted regime: {regime}")
    tol = _nonlinear_tol(tol)
    max_iter = _max_iter(max_iter)
    domain = spec.domain(R)
    kernel = DirichletKernel(domain)

    v = LatticeField(domain, domain.interior_mask.astype(np.float64))
    v = v * (1.0 / norm(v))
    history = []
    residual = math.inf
    lam = 0.0
    for iteration in range(1, max_iter + 1):
        w = apply_K(v, spec, kernel)
        lam = v.dot(w)
        if lam < 1e-14:
            raise DegenerateInputError(f"top eigenvalue {lam:.3e} is numerically zero; Q is trivial here")
        history.append(lam)
        residual = norm(w - v * lam)
        v = w * (1.0 / norm(w))
        if residual <= tol:
            break
    else:
        raise ConvergenceError("power iteration reached the iteration cap", residual=residual, iterations=max_iter)
    regime['exploratory'] = not admitted
    logger.info(f"Eigen solve: lambda1 = {lam:.10g} after {iteration} iterations, residual {residual:.2e}")
    return EigenResult(float(lam), v, history, float(residual), iteration, regime)


def _p_norm(v, q):
    return norm(v, NormKind.STRONG, q)


def form_peak(spec, domain, kernel, candidates=8):
    """
    Interior maximizer of B(e_x, e_x) = Q(x)^(2/p) Phi(x, x).

    Candidates are ranked by Q^(2/p) times the torsion function Phi * 1 and
    the diagonal is evaluated exactly on the best few. Ties go to the point
    nearest the centroid of the interior, then lexicographically.
    """
    inside = domain.interior_mask
    scale = spec.weight(domain).values ** (2.0 / spec.p)
    if not np.any(scale[inside] > 0):
        raise DegenerateInputError("Q vanishes on the truncation")
    torsion, _ = kernel.solve(LatticeField(domain, inside.astype(np.float64)))
    offset = np.sqrt(np.sum((domain.coordinates() - domain.interior.mean(axis=0)) ** 2, axis=-1))

    points = domain.interior
    idx = tuple((points - domain.lower).T)
    score = scale[idx] * torsion.values[idx]
    order = np.lexsort((offset[idx], -np.round(score / score.max(), 10)))
    ranked = []
    for i in order[:candidates]:
        x = tuple(int(c) for c in points[i])
        at = tuple(int(c) for c in points[i] - domain.lower)
        ranked.append((float(scale[at]) * kernel.pair(x, x), float(offset[at]), x))
    top = max(value for value, _, _ in ranked)
    return min((dist, x) for value, dist, x in ranked if value >= top * (1 - 1e-10))[1]


def ground_state_solve(spec, R, tol=None, max_iter=None):
    """
    Normalized fixed point v <- |K v|^(p-1) sgn(K v) / ||.||_p' from the
    weighted kernel column at the form peak, then the ray rescale
    t* = (A/B)^(1/(2-p')) and the recovered u = Phi * (Q^(1/p) t* v).
    Concentration is the p'-mass of v on the l1 ball of radius 2 around
    the current maximum of |v|.
    """
    if not spec.p > 2:
        raise InvalidProblemError(f"ground states need p > 2, got {spec.p}")
    tol = _nonlinear_tol(tol)
    max_iter = _max_iter(max_iter)
    verdict = classify(spec.kind, spec.d, spec.alpha, spec.p, spec.Q.bounded, spec.Q.vanishing_weight)
    exploratory = verdict.verdict is not Verdict.EXISTS_VARIATIONAL
    if exploratory:
        logger.warning(f"Ground state outside the variational regime ({verdict.verdict.value}: "
                       f"{verdict.citation}); result is exploratory")

    pp = spec.p_prime
    domain = spec.domain(R)
    kernel = DirichletKernel(domain)
    root = spec.root_weight(domain)
    peak = form_peak(spec, domain, kernel)

    v = root * kernel.column(peak)
    v = v * (1.0 / _p_norm(v, pp))
    history = []
    change = math.inf
    for iteration in range(1, max_iter + 1):
        w = apply_K(v, spec, kernel)
        B = v.dot(w)
        level = (1.0 / pp - 0.5) * B ** (-pp / (2.0 - pp)) if B > 0 else math.nan
        centre = _argmax_point(np.abs(v.values), domain)
        concentration = float(np.sum(np.abs(v.values[l1_ball(centre, 2, domain)]) ** pp))
        history.append({'iteration': iteration, 'rayleigh': B, 'level': level, 'concentration': concentration,
                        'centre': list(centre)})
        nxt = w.with_values(np.sign(w.values) * np.abs(w.values) ** (spec.p - 1.0))
        size = _p_norm(nxt, pp)
        if not size > 1e-300 or not math.isfinite(size):
            raise IterationCollapseError(residual=change, iterations=iteration)
        nxt = nxt * (1.0 / size)
        change = (nxt - v).sup() / nxt.sup()
        v = nxt
        logger.debug(f"Ground state step {iteration}: B = {B:.10g}, change {change:.3e}")
        if change <= tol:
            break
    else:
        raise ConvergenceError("normalized fixed point reached the iteration cap", residual=change,
                               iterations=max_iter)
    if concentration < 1e-12:
        raise IterationCollapseError(residual=change, iterations=iteration)

    A = float(np.sum(np.abs(v.values) ** pp))
    B = v.dot(apply_K(v, spec, kernel))
    t_star = (A / B) ** (1.0 / (2.0 - pp))
    dual = v * t_star
    gradient = dual.with_values(np.sign(dual.values) * np.abs(dual.values) ** (pp - 1.0)) - apply_K(dual, spec, kernel)
    residual = gradient.sup() / float(np.max(np.abs(dual.values) ** (pp - 1.0)))

    u = kernel.convolve(root * dual)
    Q = spec.weight(domain)
    image = kernel.convolve(Q * u.with_values(np.abs(u.values) ** (spec.p - 1.0)))
    u_residual = (u - image).sup() / u.sup()
    extras = {
        'level': energy(dual, spec, kernel),
        't_star': t_star,
        'u_residual': u_residual,
        'weighted_norm': float(np.sum(Q.values * np.abs(u.values) ** spec.p)),
        'dual_norm': float(np.sum(np.abs(dual.values) ** pp)),
        'exploratory': exploratory,
        'classification': verdict.to_record(),
        'peak': list(peak),
    }
    logger.info(f"Ground state d={spec.d} {spec.kind.value} p={spec.p} R={R}: {iteration} iterations, "
                f"residual {residual:.2e}, level {extras['level']:.6g}")
    return SolveResult(u, iteration, float(residual), history=history, decay_fit=_try_decay_fit(u, R),
                       extras=extras, dual=dual)


@dataclass
class ScanReport:
    amplitudes: list
    trend: str
    certificate: Optional[dict]
    classification: dict
    heuristic: bool = True

    def to_record(self):
        return {'amplitudes': self.amplitudes, 'trend': self.trend, 'certificate': self.certificate,
                'classification': self.classification, 'heuristic': self.heuristic}


def amplitude_trend(amplitudes):
    values = [a for _, a in amplitudes]
    if any(a is None for a in values):
        return 'collapse'
    if len(values) < 2:
        return 'inconclusive'
    if all(b < a for a, b in zip(values, values[1:])):
        return 'vanishing trend'
    if max(values) <= 1.1 * min(values):
        return 'stable'
    return 'inconclusive'


def nonexistence_scan(spec, R_schedule, tol=None, n_max=64):
    """
    Heuristic: sup u of ground states across increasing radii, plus the
    divergent weighted-sum certificate built on the bootstrap exponent.
    """
    radii = list(R_schedule)
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise InvalidProblemError("the radius schedule must be increasing")
    verdict = classify(spec.kind, spec.d, spec.alpha, spec.p, spec.Q.bounded, spec.Q.vanishing_weight)

    amplitudes = []
    if spec.p > 2:
        for R in radii:
            try:
                result = ground_state_solve(spec, R, tol)
                amplitudes.append((R, result.u.sup()))
            except (IterationCollapseError, ConvergenceError) as exc:
                logger.warning(f"Scan at R={R}: {exc}")
                amplitudes.append((R, None))
        trend = amplitude_trend(amplitudes)
    else:
        trend = 'not applicable'

    cert = None
    if math.isfinite(spec.alpha):
        trace = bootstrap(spec.kind, spec.d, spec.alpha, spec.q)
        try:
            cert = certificate(spec.kind, spec.d, spec.alpha, spec.q, n_max=n_max).to_record()
            cert['j0'] = trace.j0
        except InvalidProblemError as exc:
            cert = {'verdict': 'not applicable', 'reason': str(exc)}
    logger.warning(f"Nonexistence scan (heuristic) {spec.kind.value} d={spec.d} p={spec.p}: trend {trend}, "
                   f"certificate {cert['verdict'] if cert else 'none'}")
    return ScanReport(amplitudes, trend, cert, verdict.to_record())
