# core/management/commands/eigen.py

from django.conf import settings

from core.harness import build_spec
from core.serializers import SolveConfigSerializer
from core.solvers import eigen_solve
from core.utils import artifacts
from core.utils.error_handler import ConfigError

from ._base import RunCommand
from .solve import PROBLEM_FLAGS


class Command(RunCommand):
    help = 'Top eigenpair of the p = 2 kernel operator by power iteration'
    serializer_class = SolveConfigSerializer
    flags = PROBLEM_FLAGS

    def apply_defaults(self, config):
        config.setdefault('problem', {}).setdefault('p', 2.0)

    def run(self, config, validated):
        spec = build_spec(validated['problem'])
        if spec.p != 2:
            raise ConfigError(f"the eigen command needs p = 2, got {spec.p}")
        R = validated['R']
        tol = validated.get('tol') or settings.LANE_EMDEN_NONLINEAR_TOL
        result = eigen_solve(spec, R, tol, validated.get('max_iter'), validated['exploratory'])
        history = result.rayleigh_history
        checks = {
            'residual': result.residual <= tol,
            'lambda1_positive': result.lambda1 > 0,
            'rayleigh_nondecreasing': all(b >= a * (1 - 1e-12) for a, b in zip(history, history[1:])),
            'v1_nonnegative': bool((result.v1.values >= -1e-12 * result.v1.sup()).all()),
        }
        record = result.to_record(spec, R, tol)
        record['checks'] = checks

        out = self.output_dir(validated)
        stem = f"eigen_{spec.kind.value}_d{spec.d}_R{R:g}"
        csv_path = artifacts.write_field_csv(result.v1, out / f"{stem}.csv")
        json_path = out / f"{stem}.json"
        digest = self.report(json_path, config, record)
        return {
            'checks': checks,
            'files': [csv_path, json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'lambda1': result.lambda1, 'residual': result.residual},
            'message': f"lambda1 = {result.lambda1:.10g}",
        }
