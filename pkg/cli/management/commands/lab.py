from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from cli.models import CommandInvocation, Subcommand
from cli.services import LabRunner
from core.exception import ConfigError
from core.utils import canonical_json


def _ladder(text):
    try:
        return tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise CommandError(f"--ladder expects comma separated sizes, got '{text}'.", returncode=2)


class Command(BaseCommand):
    help = "Run a lab subcommand: sample, spectrum, limit, solve, potential or verify."

    def add_arguments(self, parser):
        parser.add_argument('subcommand', choices=Subcommand.CHOICES)
        parser.add_argument('--config', type=Path, help="JSON config; defaults to cli/configs/<subcommand>.json")
        parser.add_argument('--out', type=Path, help="Output directory; defaults to LAB_OUTPUT_DIR/<subcommand>")
        parser.add_argument('--seed', type=int, help="Override ensemble.master_seed")
        parser.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                            help="Dotted override such as ensemble.rho=0.3 (repeatable)")
        parser.add_argument('--threads', type=int, help="Worker threads for Monte Carlo trials")
        parser.add_argument('--ladder', help='Matrix sizes for verify, e.g. "64,128,256"')

    def handle(self, *args, **options):
        try:
            invocation = CommandInvocation(
                subcommand=options['subcommand'],
                config_path=options['config'],
                out_dir=options['out'],
                overrides=tuple(options['overrides']),
                seed=options['seed'],
                threads=options['threads'],
                ladder=_ladder(options['ladder']) if options['ladder'] else None,
            )
        except ConfigError as exc:
            raise CommandError(str(exc.detail), returncode=exc.exit_code)

        envelope = LabRunner(invocation).execute()
        self.stdout.write(canonical_json(envelope), ending='')
        if envelope['exit_code'] != 0:
            raise CommandError(envelope.get('message', 'lab run failed'), returncode=envelope['exit_code'])
