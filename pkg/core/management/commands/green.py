# core/management/commands/green.py

import numpy as np

from core.greens import (
    DirichletKernel,
    ImageKernel,
    cached_whole_table,
    dirichlet_green,
    kernel_bound_report,
    whole_green,
)
from core.lattice import DomainKind, TruncatedDomain
from core.utils import artifacts
from core.utils.error_handler import InvalidProblemError

from ._base import RunCommand
from core.serializers import GreenConfigSerializer


def image_agreement(table, near_radius=10):
    """Max relative gap between the image formula and the direct table at interior points with |x| <= near_radius"""
    whole = DirichletKernel(TruncatedDomain(DomainKind.WHOLE, table.d, table.radius), tol=table.tol)
    kernel = ImageKernel(table.kind, whole)
    domain = table.domain
    points = domain.interior
    r = np.sqrt(np.sum(points.astype(np.float64) ** 2, axis=1))
    points = points[r <= near_radius]
    column = kernel.column(table.pole, domain)
    direct = table.values.values_at(points)
    images = column.values_at(points)
    return float(np.max(np.abs(images - direct) / np.maximum(np.abs(direct), 1e-300)))


class Command(RunCommand):
    help = 'Tabulate a lattice Green function with its sidecar and bound report'
    serializer_class = GreenConfigSerializer
    flags = (
        ('--kind', 'kind', {'choices': [kind.value for kind in DomainKind]}),
        ('--d', 'd', {'type': int}),
        ('--R', 'R', {'type': float}),
        ('--pole', 'pole', {'type': int, 'nargs': '+'}),
        ('--tol', 'tol', {'type': float}),
        ('--cone', 'cone', {}),
        ('--no-cache', 'use_cache', {'action': 'store_const', 'const': False}),
    )

    def run(self, config, validated):
        kind, d, R = DomainKind(validated['kind']), validated['d'], validated['R']
        tol = validated.get('tol')
        pole = tuple(validated.get('pole') or (0,) * d)
        self.stdout.write(f"Tabulating {kind.value} Green function, d={d}, R={R:g}, pole {pole}...")

        if kind is DomainKind.WHOLE:
            if validated['use_cache'] and not any(pole):
                table = cached_whole_table(d, R, tol)
            else:
                table = whole_green(d, pole, R, tol)
        else:
            table = dirichlet_green(kind, d, pole, R, tol)

        try:
            bounds = kernel_bound_report(table, cone=validated.get('cone')).to_record()
        except InvalidProblemError as exc:
            bounds = {'skipped': str(exc)}

        checks = {'residual': table.residual <= 10 * table.tol}
        result = {'table': table.sidecar(), 'bounds': bounds}
        if kind is not DomainKind.WHOLE:
            checks['boundary_zero'] = bool(np.all(table.values.boundary_values() == 0))
            result['image_agreement'] = image_agreement(table)
            checks['image_agreement'] = result['image_agreement'] <= 1e-6
        result['checks'] = checks

        out = self.output_dir(validated)
        stem = f"green_{kind.value}_d{d}_R{R:g}"
        # whole-space rows cover the interior; Dirichlet tables also list their zero boundary
        csv_path = artifacts.write_field_csv(table.values, out / f"{stem}.csv",
                                             include_boundary=kind is not DomainKind.WHOLE)
        json_path = out / f"{stem}.json"
        digest = self.report(json_path, config, result)
        return {
            'checks': checks,
            'files': [csv_path, json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'residual': table.residual, 'bounds': bounds},
            'message': f"Green table written, residual {table.residual:.2e}",
        }
