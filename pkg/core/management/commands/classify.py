# core/management/commands/classify.py

from core.analysis import classify, exponents
from core.lattice import DomainKind
from core.serializers import ClassifyConfigSerializer

from ._base import RunCommand


class Command(RunCommand):
    help = 'Classify a single (alpha, p) point for a domain'
    serializer_class = ClassifyConfigSerializer
    flags = (
        ('--kind', 'kind', {'choices': [kind.value for kind in DomainKind]}),
        ('--d', 'd', {'type': int}),
        ('--alpha', 'alpha', {}),
        ('--p', 'p', {}),
        ('--unbounded', 'bounded', {'action': 'store_const', 'const': False}),
        ('--vanishing-weight', 'vanishing_weight', {'action': 'store_const', 'const': True}),
    )

    def run(self, config, validated):
        kind, d = DomainKind(validated['kind']), validated['d']
        verdict = classify(kind, d, validated['alpha'], validated['p'],
                           validated['bounded'], validated['vanishing_weight'])
        result = verdict.to_record()
        if not (kind is DomainKind.WHOLE and d < 3):
            result['exponents'] = exponents(kind, d, validated['alpha']).to_record()
        self.stdout.write(f"{verdict.verdict.value}: {verdict.citation}")

        out = self.output_dir(validated)
        name = f"classify_{kind.value}_d{d}_alpha{validated['alpha']}_p{validated['p']}.json".replace('/', '_')
        json_path = out / name
        digest = self.report(json_path, config, result)
        return {
            'checks': {},
            'files': [json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'verdict': verdict.verdict.value},
            'message': verdict.verdict.value,
        }
