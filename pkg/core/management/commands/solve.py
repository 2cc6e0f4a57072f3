# core/management/commands/solve.py

import numpy as np
from django.conf import settings

from core.harness import build_spec, dispatch_solve
from core.lattice import DomainKind
from core.serializers import SolveConfigSerializer
from core.solvers import nonexistence_scan
from core.utils import artifacts

from ._base import RunCommand

PROBLEM_FLAGS = (
    ('--kind', 'problem.kind', {'choices': [kind.value for kind in DomainKind]}),
    ('--d', 'problem.d', {'type': int}),
    ('--p', 'problem.p', {'type': float}),
    ('--potential', 'problem.potential.form', {'choices': ['power_law', 'compact']}),
    ('--alpha', 'problem.potential.alpha', {'type': float}),
    ('--c', 'problem.potential.c', {'type': float}),
    ('--support-radius', 'problem.potential.radius', {'type': float}),
    ('--R', 'R', {'type': float}),
    ('--tol', 'tol', {'type': float}),
    ('--max-iter', 'max_iter', {'type': int}),
    ('--seed-point', 'seed_point', {'type': int, 'nargs': '+'}),
    ('--exploratory', 'exploratory', {'action': 'store_const', 'const': True}),
)


def solver_checks(regime, result, tol):
    if regime == 'monotone':
        return {
            'residual': result.residual <= 10 * tol,
            'monotone': result.monotone,
            'below_supersolution': result.extras['below_supersolution'],
        }
    if regime == 'eigen':
        return {'residual': result.residual <= max(tol, 1e-12), 'lambda1_positive': result.lambda1 > 0}
    interior = result.u.interior_values()
    return {
        'residual': result.residual <= max(100 * tol, 1e-6),
        'level_positive': result.extras['level'] > 0,
        'u_positive': bool(np.all(interior > 0)),
    }


class Command(RunCommand):
    help = 'Solve -Delta u = Q |u|^(p-2) u with the solver the (alpha, p) regime selects'
    serializer_class = SolveConfigSerializer
    flags = PROBLEM_FLAGS + (
        ('--scan', 'scan_schedule', {'type': float, 'nargs': '+'}),
    )

    def run(self, config, validated):
        spec = build_spec(validated['problem'])
        R = validated['R']
        tol = validated.get('tol') or settings.LANE_EMDEN_NONLINEAR_TOL
        self.stdout.write(f"Solving {spec.kind.value} d={spec.d} p={spec.p:g} alpha={spec.alpha:g} at R={R:g}...")
        regime, verdict, result = dispatch_solve(spec, R, tol, validated.get('max_iter'),
                                                 validated['exploratory'], validated.get('seed_point'))
        record = result.to_record(spec, R, tol)
        record['regime'] = regime
        record['classification'] = verdict.to_record()
        checks = solver_checks(regime, result, tol)
        record['checks'] = checks

        out = self.output_dir(validated)
        stem = f"solve_{spec.kind.value}_d{spec.d}_p{spec.p:g}_R{R:g}"
        field = result.v1 if regime == 'eigen' else result.u
        files = [artifacts.write_field_csv(field, out / f"{stem}.csv")]

        if validated.get('scan_schedule'):
            scan = nonexistence_scan(spec, validated['scan_schedule'], tol, validated['scan_n_max'])
            record['scan'] = scan.to_record()

        json_path = out / f"{stem}.json"
        digest = self.report(json_path, config, record)
        files.append(json_path)
        return {
            'checks': checks,
            'files': files,
            'content_hash': digest,
            'output_dir': out,
            'summary': {'regime': regime, 'verdict': verdict.verdict.value, 'residual': result.residual},
            'message': f"{regime} solve finished ({verdict.verdict.value}), residual {result.residual:.2e}",
        }
