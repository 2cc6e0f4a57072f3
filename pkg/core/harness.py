# core/harness.py
"""
Glue between validated run configs and the numerics: problem construction,
regime dispatch through the classifier, exact grids and the sweep.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import Verdict, classify
from .lattice import BarrierField, BarrierFamily, DomainKind, LatticeField, TruncatedDomain
from .operators import CompactSupport, PowerLaw, ProblemSpec
from .solvers import eigen_solve, ground_state_solve, linear_regime, monotone_solve
from .utils import artifacts
from .utils.error_handler import LaneEmdenError, RegimeError, get_friendly_error_message

logger = logging.getLogger(__name__)


def build_potential(config):
    if config['form'] == 'compact':
        return CompactSupport(config['radius'], config.get('level', 1.0))
    return PowerLaw(config['alpha'], config.get('c', 1.0))


def build_spec(problem):
    return ProblemSpec(problem['d'], DomainKind(problem['kind']), build_potential(problem['potential']),
                       problem['p'])


def build_source(kind, d, R, source):
    """Delta at a pole, (1+|x|)^(tau-2) or (1+|x|)^-d ln(e+|x|^2)^(sigma-1) on the kind's R-ball"""
    domain = TruncatedDomain(kind, d, R)
    form = source['form']
    if form == 'delta':
        pole = source.get('pole') or [1 if axis in domain.kind.dirichlet_axes else 0 for axis in range(d)]
        return LatticeField.delta(domain, pole)

    def radial(points):
        r = np.sqrt(np.sum(points.astype(np.float64) ** 2, axis=1))
        if form == 'power':
            return (1.0 + r) ** (source['tau'] - 2.0)
        return (1.0 + r) ** (-d) * np.log(math.e + r * r) ** (source['sigma'] - 1.0)
    return LatticeField.from_function(domain, radial)


def comparison_profile(kind, d, source):
    """Barrier the Poisson solution of `source` is compared against on shells"""
    if source['form'] == 'log':
        return BarrierField(BarrierFamily.LOG, source['sigma'])
    if source['form'] == 'power':
        return BarrierField(BarrierFamily.POWER_TAIL, -source['tau'])
    family = {DomainKind.WHOLE: BarrierFamily.POWER_TAIL, DomainKind.HALF: BarrierFamily.HALF,
              DomainKind.QUADRANT: BarrierFamily.QUADRANT}[DomainKind(kind)]
    return BarrierField(family, {DomainKind.WHOLE: d - 2, DomainKind.HALF: d,
                                 DomainKind.QUADRANT: d + 2}[DomainKind(kind)])


def select_regime(spec, exploratory=False):
    """Solver name for `spec`: monotone, eigen or ground_state; raises RegimeError when none applies"""
    verdict = classify(spec.kind, spec.d, spec.alpha, spec.p, spec.Q.bounded, spec.Q.vanishing_weight)
    chosen = {
        Verdict.EXISTS_SUBLINEAR_UNIQUE: 'monotone',
        Verdict.LINEAR_EIGEN_REGIME: 'eigen',
        Verdict.EXISTS_VARIATIONAL: 'ground_state',
    }.get(verdict.verdict)
    if chosen is not None:
        return chosen, verdict
    if spec.p == 2 and not linear_regime(spec)[0] and not exploratory:
        raise RegimeError('2*_{beta,alpha} < 2')
    if not exploratory:
        raise RegimeError(verdict.citation, f"{verdict.verdict.value}: {verdict.citation}")
    logger.warning(f"Exploratory run outside the theory: {verdict.verdict.value} ({verdict.citation})")
    return ('monotone' if spec.p < 2 else 'eigen' if spec.p == 2 else 'ground_state'), verdict


def dispatch_solve(spec, R, tol=None, max_iter=None, exploratory=False, seed_point=None):
    """Run the solver the classifier selects; returns (regime, verdict, result)"""
    regime, verdict = select_regime(spec, exploratory)
    if regime == 'monotone':
        result = monotone_solve(spec, R, tol, seed_point=seed_point, max_iter=max_iter)
    elif regime == 'eigen':
        result = eigen_solve(spec, R, tol, max_iter=max_iter, exploratory=exploratory)
    else:
        result = ground_state_solve(spec, R, tol, max_iter=max_iter)
    return regime, verdict, result


def grid_points(grid):
    """start, start+step, ... up to stop inclusive, exact"""
    start, stop, step = grid['start'], grid['stop'], grid['step']
    count = math.floor((stop - start) / step)
    points = [start + k * step for k in range(count + 1)]
    return points if grid.get('include_start', True) else points[1:]


def classify_cell(kind, d, bounded, vanishing_weight, alpha, p):
    return classify(kind, d, alpha, p, bounded, vanishing_weight)


def sweep_grid(config):
    """Classification of every (alpha, p) cell, alpha-major, evaluated on a thread pool"""
    alphas, ps = grid_points(config['alpha']), grid_points(config['p'])
    cells = [(a, p) for a in alphas for p in ps]
    kind, d = DomainKind(config['kind']), config['d']
    with ThreadPoolExecutor(max_workers=config.get('workers', 4)) as pool:
        verdicts = list(pool.map(lambda cell: classify_cell(kind, d, config['bounded'],
                                                            config['vanishing_weight'], *cell), cells))
    return verdicts


def _spot_solve(kind, d, alpha, p, R, tol, path):
    alpha_f, p_f = float(alpha), float(p)
    record = {'alpha': str(alpha), 'p': str(p)}
    try:
        spec = ProblemSpec(d, kind, PowerLaw(alpha_f), p_f)
        regime, verdict, result = dispatch_solve(spec, R, tol)
        record.update({'regime': regime, 'verdict': verdict.verdict.value, 'result': result.to_record(R=R)})
    except LaneEmdenError as exc:
        record.update({'regime': None, 'error': get_friendly_error_message(exc)})
    artifacts.write_json(path, record)
    return path


def run_spots(config, spot_dir):
    """Spot solves at marked cells, one JSON per cell, merged back in grid order"""
    spots = sorted(tuple(cell) for cell in config.get('spots') or [])
    if not spots:
        return []
    kind, d = DomainKind(config['kind']), config['d']
    spot_dir = Path(spot_dir)
    paths = [spot_dir / f"cell_{i:04d}.json" for i in range(len(spots))]
    with ThreadPoolExecutor(max_workers=config.get('workers', 4)) as pool:
        list(pool.map(lambda job: _spot_solve(kind, d, job[0][0], job[0][1], config['R'], config.get('tol'), job[1]),
                      zip(spots, paths)))
    return [artifacts.read_json(path) for path in paths]
