import json
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from cli.models import CommandInvocation
from cli.services import LabRunner, load_config, parse_override, run
from core.exception import ConfigError
from core.utils import file_hash
from ensemble.models import EntryDist, EntryDistKind
from harness.serializer import ExperimentConfigSerializer

SPECTRUM_CONFIG = {
    'ensemble': {'n': 8, 'm': 2, 'rho': 0.3, 'master_seed': 7},
    'z': [0.5, 0.2],
    'trials': 2,
}


class LabRunTestCase(SimpleTestCase):

    def setUp(self):
        self.workdir = tempfile.TemporaryDirectory()
        self.root = Path(self.workdir.name)

    def tearDown(self):
        self.workdir.cleanup()

    def write_config(self, data, name='config.json'):
        path = self.root / name
        path.write_text(data if isinstance(data, str) else json.dumps(data), encoding='utf-8')
        return path

    def invocation(self, subcommand, config, out='out', **kwargs):
        return CommandInvocation(subcommand=subcommand, config_path=config, out_dir=self.root / out, **kwargs)


class SpectrumCommandTests(LabRunTestCase):

    def test_repeated_runs_are_byte_identical(self):
        config = self.write_config(SPECTRUM_CONFIG)
        self.assertEqual(run(self.invocation('spectrum', config, out='first')), 0)
        self.assertEqual(run(self.invocation('spectrum', config, out='second')), 0)
        for name in ('eigenvalues_t0.csv', 'eigenvalues_t1.csv', 'symmetrized_t1.csv', 'metadata_t0.json'):
            self.assertEqual((self.root / 'first' / name).read_bytes(), (self.root / 'second' / name).read_bytes())

    def test_outputs_and_manifest(self):
        config = self.write_config(SPECTRUM_CONFIG)
        self.assertEqual(run(self.invocation('spectrum', config)), 0)
        out = self.root / 'out'
        self.assertEqual((out / 'eigenvalues_t0.csv').read_text().splitlines()[0], 're,im')
        self.assertEqual(len((out / 'eigenvalues_t0.csv').read_text().splitlines()), 9)
        self.assertEqual(len((out / 'symmetrized_t0.csv').read_text().splitlines()), 17)
        metadata = json.loads((out / 'metadata_t0.json').read_text())
        self.assertEqual(metadata, {'n': 8, 'm': 2, 'rho': 0.3, 'z_re': 0.5, 'z_im': 0.2, 'seed': 7})

        manifest = json.loads((out / 'manifest.json').read_text())['files']
        self.assertIn('timings.json', manifest)
        self.assertNotIn('manifest.json', manifest)
        for name, digest in manifest.items():
            self.assertEqual(file_hash(out / name), digest)

    def test_overrides_leave_config_file_untouched(self):
        config = self.write_config(SPECTRUM_CONFIG)
        before = config.read_bytes()
        envelope = LabRunner(self.invocation('spectrum', config, overrides=('ensemble.n=6',), seed=11)).execute()
        self.assertTrue(envelope['success'])
        self.assertEqual(config.read_bytes(), before)
        metadata = json.loads((self.root / 'out' / 'metadata_t0.json').read_text())
        self.assertEqual((metadata['n'], metadata['seed']), (6, 11))


class ConfigErrorTests(LabRunTestCase):

    def test_rho_outside_unit_interval(self):
        data = dict(SPECTRUM_CONFIG, ensemble={'n': 8, 'rho': 1.5})
        envelope = LabRunner(self.invocation('spectrum', self.write_config(data))).execute()
        self.assertEqual(envelope['exit_code'], 2)
        self.assertIn('ensemble.rho', envelope['message'])
        self.assertIn('|rho| <= 1', envelope['message'])
        self.assertFalse((self.root / 'out' / 'manifest.json').exists())

    def test_malformed_json_reports_position(self):
        config = self.write_config('{\n  "ensemble": {"n": 8,\n  }\n}')
        envelope = LabRunner(self.invocation('spectrum', config)).execute()
        self.assertEqual(envelope['exit_code'], 2)
        self.assertIn('line 3, column 3', envelope['message'])

    def test_missing_config_file(self):
        self.assertEqual(run(self.invocation('sample', self.root / 'absent.json')), 2)

    def test_unknown_key(self):
        data = dict(SPECTRUM_CONFIG, trails=3)
        envelope = LabRunner(self.invocation('spectrum', self.write_config(data))).execute()
        self.assertEqual(envelope['exit_code'], 2)
        self.assertIn('trails', envelope['message'])

    def test_ladder_only_for_verify(self):
        config = self.write_config(SPECTRUM_CONFIG)
        self.assertEqual(run(self.invocation('spectrum', config, ladder=(8, 16))), 2)

    def test_seed_not_for_limit_grids(self):
        config = self.write_config({'m': 2})
        self.assertEqual(run(self.invocation('limit', config, seed=3)), 2)

    def test_invocation_checks(self):
        with self.assertRaises(ConfigError):
            CommandInvocation(subcommand='plot')
        with self.assertRaises(ConfigError):
            CommandInvocation(subcommand='verify', threads=0)

    def test_parse_override(self):
        self.assertEqual(parse_override('ensemble.rho=0.3'), (['ensemble', 'rho'], 0.3))
        self.assertEqual(parse_override('form=statement'), (['form'], 'statement'))
        self.assertEqual(parse_override('z_list=[[0.5,0.2]]'), (['z_list'], [[0.5, 0.2]]))
        with self.assertRaises(ConfigError):
            parse_override('ensemble.rho')


class OtherSubcommandTests(LabRunTestCase):

    def test_sample_writes_factor_csvs(self):
        config = self.write_config({'ensemble': {'n': 3, 'm': 2, 'master_seed': 1}})
        self.assertEqual(run(self.invocation('sample', config)), 0)
        lines = (self.root / 'out' / 'factor_t0_q2.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'i,j,value')
        self.assertEqual(len(lines), 10)
        self.assertTrue(lines[1].startswith('1,1,'))

    def test_limit_grids(self):
        config = self.write_config({'m': 2, 'grid': {'x_min': -1, 'x_max': 1, 'y_min': -1, 'y_max': 1, 'step': 0.5}})
        self.assertEqual(run(self.invocation('limit', config)), 0)
        for quantity in ('density', 'radial_cdf', 'potential'):
            lines = (self.root / 'out' / f'{quantity}.csv').read_text().splitlines()
            self.assertEqual(lines[0], 'x,y,value')
            self.assertEqual(len(lines), 26)

    def test_solve_profile(self):
        config = self.write_config({'z': [0.0, 0.0], 'm': 2, 'x_min': -2.0, 'x_max': 2.0, 'points': 41, 'eps': 0.05})
        envelope = LabRunner(self.invocation('solve', config)).execute()
        self.assertEqual(envelope['exit_code'], 0, envelope.get('message'))
        lines = (self.root / 'out' / 'profile.csv').read_text().splitlines()
        self.assertEqual(lines[0], 'x,eps,density,s_re,s_im,w_re,w_im,iters,residual')
        self.assertEqual(len(lines), 42)

    def test_potential_grids(self):
        config = self.write_config({
            'ensemble': {'n': 16, 'm': 2, 'master_seed': 4},
            'trials': 2,
            'grid': {'x_min': -1, 'x_max': 1, 'y_min': -1, 'y_max': 1, 'step': 0.25},
        })
        self.assertEqual(run(self.invocation('potential', config)), 0)
        self.assertEqual((self.root / 'out' / 'potential.csv').read_text().splitlines()[0], 'z_re,z_im,U,variance,masked')
        self.assertEqual((self.root / 'out' / 'density.csv').read_text().splitlines()[0], 'z_re,z_im,density')

    def test_verify_subset(self):
        config = self.write_config({'ensemble': {'n': 16, 'm': 2, 'rho': 0.3}, 'checks': ['linearization']})
        self.assertEqual(run(self.invocation('verify', config)), 0)
        report = json.loads((self.root / 'out' / 'report.json').read_text())
        self.assertTrue(report['passed'])
        self.assertIn('linearization.pairing', report['checks'])

    def test_shipped_verify_config(self):
        data = load_config(Path(__file__).resolve().parent / 'configs' / 'verify.json')
        serializer = ExperimentConfigSerializer(data=data)
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.ensemble.rho, 0.5)
        self.assertEqual(config.truncation_dist, EntryDist(EntryDistKind.HEAVY_TAIL, 2.5))

    def test_verify_failure_exits_one(self):
        # Eight eigenvalues cannot get a KS distance below 1/16.
        config = self.write_config({'ensemble': {'n': 8, 'm': 2}, 'trials': 1, 'checks': ['limit_law']})
        envelope = LabRunner(self.invocation('verify', config)).execute()
        self.assertEqual(envelope['exit_code'], 1)
        self.assertTrue(envelope['message'].startswith('harness:'))
        self.assertIn('limit_law.radial_ks', envelope['data']['failed'])
        self.assertTrue((self.root / 'out' / 'limit_law.radial_ks.csv').exists())


class LabCommandTests(LabRunTestCase):

    def test_command_prints_envelope(self):
        config = self.write_config(SPECTRUM_CONFIG)
        stdout = StringIO()
        call_command('lab', 'spectrum', '--config', str(config), '--out', str(self.root / 'out'), stdout=stdout)
        envelope = json.loads(stdout.getvalue())
        self.assertEqual(envelope['status'], 'success')
        self.assertIn('eigenvalues_t0.csv', envelope['data']['files'])

    def test_config_error_exit_status(self):
        config = self.write_config(dict(SPECTRUM_CONFIG, ensemble={'n': 8, 'rho': 1.5}))
        with self.assertRaises(CommandError) as raised:
            call_command('lab', 'spectrum', '--config', str(config), '--out', str(self.root / 'out'), stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)

    def test_bad_ladder(self):
        config = self.write_config(SPECTRUM_CONFIG)
        with self.assertRaises(CommandError) as raised:
            call_command('lab', 'verify', '--config', str(config), '--ladder', '64,x', stdout=StringIO())
        self.assertEqual(raised.exception.returncode, 2)
