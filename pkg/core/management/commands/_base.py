# core/management/commands/_base.py

import logging

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError
from rest_framework.exceptions import ValidationError

from core.models import RunRecord
from core.utils import artifacts
from core.utils.error_handler import ConfigError, LaneEmdenError, command_error_from

logger = logging.getLogger(__name__)

HANDLED_ERRORS = (LaneEmdenError, ValidationError, OSError, ArithmeticError, np.linalg.LinAlgError, MemoryError)


def set_path(config, dotted, value):
    node = config
    *parents, leaf = dotted.split('.')
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


class RunCommand(BaseCommand):
    """
    Shared flow: read --config TOML, overlay flags, validate with the command's
    serializer, run, write artifacts and log a RunRecord. Failed checks exit 1,
    errors exit with the error's code.
    """
    serializer_class = None
    # (flag, dotted config key, argparse kwargs)
    flags = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML run configuration')
        parser.add_argument('--output-dir', dest='output_dir', help='Directory for artifacts')
        for flag, key, kwargs in self.flags:
            parser.add_argument(flag, dest=key.replace('.', '__'), **kwargs)

    def load_config(self, options):
        config = {}
        if options.get('config'):
            try:
                with open(options['config'], 'rb') as handle:
                    config = tomllib.load(handle)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{options['config']}: {exc}")
        for _, key, _ in self.flags:
            value = options.get(key.replace('.', '__'))
            if value is not None:
                set_path(config, key, value)
        if options.get('output_dir'):
            config['output_dir'] = options['output_dir']
        self.apply_defaults(config)
        serializer = self.serializer_class(data=config)
        serializer.is_valid(raise_exception=True)
        return config, serializer.validated_data

    def apply_defaults(self, config):
        pass

    def output_dir(self, validated):
        return Path(validated.get('output_dir') or settings.LANE_EMDEN_OUTPUT_DIR)

    def record(self, config, status, exit_code, summary=None, content_hash='', output_dir=''):
        try:
            RunRecord.objects.create(command=self.command_name, config=artifacts.to_plain(config),
                                     content_hash=content_hash, status=status, exit_code=exit_code,
                                     summary=artifacts.to_plain(summary or {}), output_dir=str(output_dir))
        except DatabaseError as exc:
            logger.warning(f"Run log skipped: {exc}")

    @property
    def command_name(self):
        return self.__class__.__module__.rsplit('.', 1)[-1]

    def handle(self, *args, **options):
        config = {}
        try:
            config, validated = self.load_config(options)
            outcome = self.run(config, validated)
        except HANDLED_ERRORS as exc:
            error = command_error_from(exc)
            self.record(config, 'error', error.returncode, {'error': str(exc)})
            raise error

        checks = outcome.get('checks', {})
        failed = sorted(name for name, ok in checks.items() if not ok)
        status = 'failed' if failed else 'passed'
        self.record(config, status, 1 if failed else 0, outcome.get('summary'),
                    outcome.get('content_hash', ''), outcome.get('output_dir', ''))
        for path in outcome.get('files', []):
            self.stdout.write(f"Wrote {path}")
        if failed:
            raise CommandError(f"Checks failed: {', '.join(failed)}", returncode=1)
        self.stdout.write(self.style.SUCCESS(outcome.get('message', 'Done')))

    def run(self, config, validated):
        raise NotImplementedError

    def report(self, path, config, result):
        """Write the JSON report; returns its content hash"""
        artifacts.write_report(path, config, result)
        return artifacts.read_json(path)['content_hash']
