# core/management/commands/poisson.py

import numpy as np
from django.conf import settings

from core.harness import build_source, comparison_profile
from core.lattice import DomainKind
from core.serializers import PoissonConfigSerializer
from core.solvers import solve_poisson
from core.utils import artifacts

from ._base import RunCommand


def shell_ratio(u, profile, rmin, rmax):
    """min and max of u / profile over interior points with rmin <= |x| <= rmax"""
    points = u.domain.interior
    r = np.sqrt(np.sum(points.astype(np.float64) ** 2, axis=1))
    points = points[(r >= max(rmin, 1.0)) & (r <= rmax)]
    reference = profile.evaluate(points)
    keep = reference > 0
    if not np.any(keep):
        return None
    ratio = u.values_at(points[keep]) / reference[keep]
    return {'min': float(ratio.min()), 'max': float(ratio.max()), 'rmin': rmin, 'rmax': rmax}


class Command(RunCommand):
    help = 'Solve -Delta u = f with zero Dirichlet data on a truncated domain'
    serializer_class = PoissonConfigSerializer
    flags = (
        ('--kind', 'kind', {'choices': [kind.value for kind in DomainKind]}),
        ('--d', 'd', {'type': int}),
        ('--R', 'R', {'type': float}),
        ('--tol', 'tol', {'type': float}),
        ('--source', 'source.form', {'choices': ['delta', 'power', 'log']}),
        ('--pole', 'source.pole', {'type': int, 'nargs': '+'}),
        ('--tau', 'source.tau', {'type': float}),
        ('--sigma', 'source.sigma', {'type': float}),
    )

    def run(self, config, validated):
        kind, d, R = DomainKind(validated['kind']), validated['d'], validated['R']
        source = validated['source']
        f = build_source(kind, d, R, source)
        result = solve_poisson(kind, f, R, validated.get('tol'))
        tol = validated.get('tol') or settings.LANE_EMDEN_LINEAR_TOL

        record = result.to_record(R=R, tol=tol)
        record['source'] = source
        record['shell_ratio'] = shell_ratio(result.u, comparison_profile(kind, d, source), R / 8, R / 4)
        checks = {'residual': result.residual <= 10 * tol}
        record['checks'] = checks

        out = self.output_dir(validated)
        stem = f"poisson_{kind.value}_d{d}_R{R:g}_{source['form']}"
        csv_path = artifacts.write_field_csv(result.u, out / f"{stem}.csv")
        json_path = out / f"{stem}.json"
        digest = self.report(json_path, config, record)
        return {
            'checks': checks,
            'files': [csv_path, json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'residual': result.residual, 'iterations': result.iterations},
            'message': f"Poisson solve done in {result.iterations} iterations",
        }
