# core/management/commands/sweep.py

from collections import Counter

from core.harness import grid_points, run_spots, sweep_grid
from core.lattice import DomainKind
from core.serializers import SweepConfigSerializer
from core.utils import artifacts

from ._base import RunCommand


class Command(RunCommand):
    help = 'Classify an (alpha, p) grid and optionally spot-solve marked cells'
    serializer_class = SweepConfigSerializer
    flags = (
        ('--kind', 'kind', {'choices': [kind.value for kind in DomainKind]}),
        ('--d', 'd', {'type': int}),
        ('--alpha-start', 'alpha.start', {}),
        ('--alpha-stop', 'alpha.stop', {}),
        ('--alpha-step', 'alpha.step', {}),
        ('--p-start', 'p.start', {}),
        ('--p-stop', 'p.stop', {}),
        ('--p-step', 'p.step', {}),
        ('--p-open-start', 'p.include_start', {'action': 'store_const', 'const': False}),
        ('--vanishing-weight', 'vanishing_weight', {'action': 'store_const', 'const': True}),
        ('--R', 'R', {'type': float}),
        ('--workers', 'workers', {'type': int}),
    )

    def run(self, config, validated):
        kind, d = DomainKind(validated['kind']), validated['d']
        verdicts = sweep_grid(validated)
        rows = [(str(c.alpha), str(c.p), c.verdict.value, c.citation) for c in verdicts]
        counts = Counter(row[2] for row in rows)
        self.stdout.write(f"Classified {len(rows)} cells: " +
                          ', '.join(f"{name} {count}" for name, count in sorted(counts.items())))

        out = self.output_dir(validated)
        stem = f"sweep_{kind.value}_d{d}"
        csv_path = artifacts.write_rows(out / f"{stem}.csv", ['alpha', 'p', 'verdict', 'citation'], rows)
        spots = run_spots(validated, out / f"{stem}_spots")

        result = {
            'cells': len(rows),
            'alpha_points': len(grid_points(validated['alpha'])),
            'p_points': len(grid_points(validated['p'])),
            'counts': dict(sorted(counts.items())),
            'classifier_csv_hash': artifacts.content_hash(rows),
            'spots': spots,
        }
        json_path = out / f"{stem}.json"
        digest = self.report(json_path, config, result)
        return {
            'checks': {},
            'files': [csv_path, json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'cells': len(rows), 'counts': result['counts']},
            'message': f"Sweep of {len(rows)} cells written",
        }
