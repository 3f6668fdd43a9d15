"""
Subcommand runner behind `manage.py lab`.

A run loads a JSON config, applies `--set`, `--seed` and `--ladder` to a
copy, validates the result with the app serializers and hands it to the
handler of the subcommand. Every file a handler writes lands under the
output directory and is listed with its SHA-256 in `manifest.json`.
Wall-clock timings go to `timings.json`.
"""
import copy
import json
import logging
import time
from pathlib import Path

from django.conf import settings

from cli.models import CommandInvocation, Subcommand
from cli.serializer import LimitGridSerializer, PotentialRunSerializer, SampleConfigSerializer, SpectrumConfigSerializer
from core.exception import ConfigError, LabException
from core.utils import ReportResponseMixin, write_csv, write_json, write_manifest
from ensemble.serializer import EnsembleSpecSerializer
from ensemble.services import export_matrix_csv, sample_factors
from harness.executor import TrialExecutor
from harness.serializer import ExperimentConfigSerializer
from harness.services import verify
from limitlaw.models import LimitLaw
from limitlaw.services import evaluate_grid, export_grid_csv
from potential.services import export_density_csv, export_potential_csv, laplacian_density, mean_potential_grid
from spectra.services import (
    build_linearization, eigenvalues, export_complex_spectrum, export_metadata, export_symmetrized_spectrum, product,
    symmetrized_spectrum,
)
from stieltjes.serializer import DensitySweepSerializer
from stieltjes.services import density_from_inversion, export_profile_csv

logger = logging.getLogger(__name__)


def _flatten_errors(errors, path=()):
    """DRF error trees as 'dotted.path: message' lines."""
    if isinstance(errors, dict):
        for key, value in errors.items():
            yield from _flatten_errors(value, path + (str(key),))
    elif isinstance(errors, list) and any(isinstance(item, (dict, list)) for item in errors):
        for index, item in enumerate(errors):
            yield from _flatten_errors(item, path + (str(index),))
    else:
        messages = errors if isinstance(errors, list) else [errors]
        yield f"{'.'.join(path) or 'config'}: {' '.join(str(message) for message in messages)}"


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc.strerror}.")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}.")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must hold a JSON object.")
    return data


def parse_override(text):
    """'ensemble.rho=0.3' -> (['ensemble', 'rho'], 0.3); values that are not JSON stay strings."""
    key, separator, raw = text.partition('=')
    if not separator or not key.strip():
        raise ConfigError(f"Override '{text}' is not of the form key=value.")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split('.'), value


def _set_path(data, keys, value):
    node = data
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"Cannot override '{'.'.join(keys)}': '{key}' is not an object.")
    node[keys[-1]] = value


class SubcommandHandler:
    """
    Base handler: validate the config with `serializer_class`, then
    `handle()` writes the outputs and returns (files, data, failure).
    """
    serializer_class = None
    module = 'core'
    seeded = True
    laddered = False

    def __init__(self, out_dir: Path, executor: TrialExecutor):
        self.out_dir = out_dir
        self.executor = executor
        self.timings = {}

    def apply_overrides(self, config, invocation: CommandInvocation):
        data = copy.deepcopy(config)
        for text in invocation.overrides:
            _set_path(data, *parse_override(text))
        if invocation.seed is not None:
            if not self.seeded:
                raise ConfigError(f"--seed does not apply to '{invocation.subcommand}'.")
            _set_path(data, ['ensemble', 'master_seed'], invocation.seed)
        if invocation.ladder is not None:
            if not self.laddered:
                raise ConfigError(f"--ladder does not apply to '{invocation.subcommand}'.")
            data['n_ladder'] = list(invocation.ladder)
        return data

    def validate(self, data):
        serializer = self.serializer_class(data=data)
        if not serializer.is_valid():
            raise ConfigError('; '.join(_flatten_errors(serializer.errors)))
        return serializer

    def ensemble(self, serializer):
        return EnsembleSpecSerializer().create(serializer.validated_data['ensemble'])

    def path(self, name):
        return self.out_dir / name

    def handle(self, serializer):
        raise NotImplementedError


class SampleHandler(SubcommandHandler):
    serializer_class = SampleConfigSerializer
    module = 'ensemble'

    def handle(self, serializer):
        spec = self.ensemble(serializer)
        files = [write_json(self.path('ensemble.json'), spec.as_dict())]
        for trial in range(serializer.validated_data['trials']):
            for q, factor in enumerate(sample_factors(spec, trial), start=1):
                files.append(export_matrix_csv(self.path(f'factor_t{trial}_q{q}.csv'), factor))
        return files, {'n': spec.n, 'm': spec.m, 'trials': serializer.validated_data['trials']}, None


class SpectrumHandler(SubcommandHandler):
    serializer_class = SpectrumConfigSerializer
    module = 'spectra'

    def handle(self, serializer):
        spec = self.ensemble(serializer)
        z = serializer.validated_data['z']
        files = []
        for trial in range(serializer.validated_data['trials']):
            factors = sample_factors(spec, trial)
            files.append(export_complex_spectrum(self.path(f'eigenvalues_t{trial}.csv'), eigenvalues(product(factors))))
            files.append(export_symmetrized_spectrum(
                self.path(f'symmetrized_t{trial}.csv'), symmetrized_spectrum(build_linearization(factors, z)),
            ))
            files.append(export_metadata(self.path(f'metadata_t{trial}.json'), spec.n, spec.m, spec.rho, z,
                                         spec.master_seed))
        return files, {'n': spec.n, 'm': spec.m, 'z': z, 'trials': serializer.validated_data['trials']}, None


class LimitHandler(SubcommandHandler):
    serializer_class = LimitGridSerializer
    module = 'limitlaw'
    seeded = False

    def handle(self, serializer):
        law = LimitLaw(serializer.validated_data['m'])
        grid = serializer.grid_spec()
        files = [
            export_grid_csv(self.path(f'{quantity}.csv'), evaluate_grid(law, quantity, grid.xs, grid.ys))
            for quantity in serializer.validated_data['quantities']
        ]
        return files, {'m': law.m, 'grid': grid.as_dict()}, None


class SolveHandler(SubcommandHandler):
    serializer_class = DensitySweepSerializer
    module = 'stieltjes'
    seeded = False

    def handle(self, serializer):
        data = serializer.validated_data
        profile = density_from_inversion(
            data['z'], data['m'], data['form'], serializer.grid(), data['eps'], tol=data['tol'], max_iter=data['max_iter'],
        )
        files = [export_profile_csv(self.path('profile.csv'), profile)]
        summary = {
            'z': profile.z, 'm': profile.m, 'form': profile.form, 'eps': profile.eps,
            'total_mass': profile.total_mass(), 'failures': profile.failures,
        }
        failure = None
        if profile.failures:
            failure = f"{len(profile.failures)} of {profile.x.size} grid points failed"
        return files, summary, failure


class PotentialHandler(SubcommandHandler):
    serializer_class = PotentialRunSerializer
    module = 'potential'

    def handle(self, serializer):
        spec = self.ensemble(serializer)
        data = serializer.validated_data
        grid = mean_potential_grid(spec, serializer.grid_spec(), data['trials'], data['method'], self.executor)
        field = laplacian_density(grid)
        files = [
            export_potential_csv(self.path('potential.csv'), grid),
            export_density_csv(self.path('density.csv'), field),
        ]
        summary = {
            'trials': grid.trials,
            'method': grid.method,
            'masked_fraction': grid.masked_fraction(),
            'excluded_trials': grid.excluded_trials,
        }
        return files, summary, None


class VerifyHandler(SubcommandHandler):
    serializer_class = ExperimentConfigSerializer
    module = 'harness'
    laddered = True

    def handle(self, serializer):
        config = serializer.save()
        report = verify(config, self.executor, timings=self.timings)
        files = [write_json(self.path('report.json'), report.as_dict())]
        for name, (header, rows) in sorted(report.tables.items()):
            files.append(write_csv(self.path(f'{name}.csv'), header, rows))
        failed = [check.name for check in report.checks if not check.passed]
        failure = f"{len(failed)} checks failed: {', '.join(failed)}" if failed else None
        return files, {'passed': report.passed, 'checks': len(report.checks), 'failed': failed}, failure


HANDLERS = {
    Subcommand.SAMPLE: SampleHandler,
    Subcommand.SPECTRUM: SpectrumHandler,
    Subcommand.LIMIT: LimitHandler,
    Subcommand.SOLVE: SolveHandler,
    Subcommand.POTENTIAL: PotentialHandler,
    Subcommand.VERIFY: VerifyHandler,
}


class LabRunner(ReportResponseMixin):
    """Runs one invocation and returns the report envelope."""

    def __init__(self, invocation: CommandInvocation):
        self.invocation = invocation
        self.out_dir = Path(invocation.out_dir or Path(settings.LAB_OUTPUT_DIR) / invocation.subcommand)
        self.config_path = Path(
            invocation.config_path or Path(settings.LAB_DEFAULT_CONFIG_DIR) / f'{invocation.subcommand}.json'
        )
        self.handler = HANDLERS[invocation.subcommand](self.out_dir, TrialExecutor(threads=invocation.threads))

    def execute(self):
        handler = self.handler
        started = time.perf_counter()
        try:
            data = handler.apply_overrides(load_config(self.config_path), self.invocation)
            serializer = handler.validate(data)
            files, summary, failure = handler.handle(serializer)
        except LabException as exc:
            message = f"{handler.module}: {exc.detail}"
            logger.error("lab %s failed: %s", self.invocation.subcommand, message)
            return self.failure_report(message=message, exit_code=exc.exit_code)

        timings = {'blocks': handler.timings, 'total': time.perf_counter() - started}
        files.append(write_json(self.out_dir / 'timings.json', timings))
        write_manifest(self.out_dir, files)
        summary['out_dir'] = str(self.out_dir)
        summary['files'] = sorted(str(Path(path).relative_to(self.out_dir)) for path in files)
        if failure:
            message = f"{handler.module}: {failure}"
            logger.warning("lab %s: %s", self.invocation.subcommand, message)
            return self.failure_report(data=summary, message=message, exit_code=1)
        return self.success_report(data=summary, message=f"lab {self.invocation.subcommand} finished")


def run(invocation: CommandInvocation) -> int:
    """Run a subcommand; returns the exit status (0 ok, 1 failed check or solver, 2 bad config)."""
    return LabRunner(invocation).execute()['exit_code']
