# core/management/commands/bootstrap.py

from core.analysis import BootstrapVerdict, bootstrap, certificate
from core.lattice import DomainKind
from core.serializers import BootstrapConfigSerializer

from ._base import RunCommand


class Command(RunCommand):
    help = 'Bootstrap decay exponents and the divergent weighted-sum certificate'
    serializer_class = BootstrapConfigSerializer
    flags = (
        ('--kind', 'kind', {'choices': [kind.value for kind in DomainKind]}),
        ('--d', 'd', {'type': int}),
        ('--alpha', 'alpha', {}),
        ('--q', 'q', {}),
        ('--max-steps', 'max_steps', {'type': int}),
        ('--n-max', 'n_max', {'type': int}),
    )

    def run(self, config, validated):
        kind, d = DomainKind(validated['kind']), validated['d']
        trace = bootstrap(kind, d, validated['alpha'], validated['q'], validated['max_steps'])
        result = trace.to_record()
        valid = trace.verdict is not BootstrapVerdict.INVALID_REGIME
        if valid:
            result['limit'] = trace.limit
            tau = trace.tau[trace.j0] if trace.j0 is not None else trace.tau[-1]
            result['certificate'] = certificate(kind, d, validated['alpha'], validated['q'],
                                                validated['n_max'], tau).to_record()
            self.stdout.write(f"j0 = {trace.j0}, verdict {trace.verdict.value}")
        else:
            self.stdout.write(self.style.WARNING(f"InvalidRegime: {trace.reason}"))

        out = self.output_dir(validated)
        name = f"bootstrap_{kind.value}_d{d}_alpha{validated['alpha']}_q{validated['q']}.json".replace('/', '_')
        json_path = out / name
        digest = self.report(json_path, config, result)
        return {
            'checks': {'regime': valid},
            'files': [json_path],
            'content_hash': digest,
            'output_dir': out,
            'summary': {'verdict': trace.verdict.value, 'j0': trace.j0},
            'message': f"Bootstrap {trace.verdict.value}",
        }
