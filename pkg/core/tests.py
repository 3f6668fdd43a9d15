import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from rest_framework import serializers

from core.exception import (
    AcceptanceFailure, BranchError, CheckSkipped, ConfigError, ContractError, ConvergenceFailure, DimensionMismatch,
    DomainError, LabException,
)
from core.serializer import ComplexField, StrictSerializer
from core.utils import (
    ReportResponseMixin, canonical_json, content_hash, file_hash, parse_complex, to_jsonable, write_csv, write_manifest,
)


class ExitCodeTests(SimpleTestCase):

    def test_exit_codes(self):
        for exc, code in (
            (DomainError, 2), (ContractError, 2), (DimensionMismatch, 2), (ConfigError, 2),
            (ConvergenceFailure, 1), (BranchError, 1), (AcceptanceFailure, 1), (CheckSkipped, 0),
        ):
            self.assertTrue(issubclass(exc, LabException))
            self.assertEqual(exc.exit_code, code)

    def test_convergence_failure_carries_residuals(self):
        exc = ConvergenceFailure("no fixed point", residuals=[1e-3], iterations=500)
        self.assertEqual(str(exc.detail), "no fixed point")
        self.assertEqual(exc.residuals, [1e-3])
        self.assertEqual(exc.iterations, 500)


class CanonicalJsonTests(SimpleTestCase):

    def test_plain_types(self):
        data = {'b': np.float64(0.5), 'a': np.arange(3), 'z': 1 + 2j, 'flag': np.bool_(True)}
        self.assertEqual(to_jsonable(data), {'b': 0.5, 'a': [0, 1, 2], 'z': [1.0, 2.0], 'flag': True})

    def test_non_finite_floats(self):
        self.assertEqual(to_jsonable([math.inf, -math.inf, math.nan]), ['inf', '-inf', 'nan'])
        json.loads(canonical_json({'value': math.nan}))

    def test_key_order_does_not_matter(self):
        self.assertEqual(canonical_json({'a': 1, 'b': 2}), canonical_json({'b': 2, 'a': 1}))
        self.assertEqual(content_hash({'a': 1, 'b': 2}), content_hash({'b': 2, 'a': 1}))
        self.assertNotEqual(content_hash({'a': 1}), content_hash({'a': 2}))


class OutputFileTests(SimpleTestCase):

    def setUp(self):
        self.workdir = tempfile.TemporaryDirectory()
        self.root = Path(self.workdir.name)

    def tearDown(self):
        self.workdir.cleanup()

    def test_csv_uses_repr_floats(self):
        path = write_csv(self.root / 'values.csv', ['x', 'flag'], [(0.1, True), (np.float64(1 / 3), False)])
        self.assertEqual(path.read_text(), 'x,flag\n0.1,1\n0.3333333333333333,0\n')

    def test_manifest_lists_hashes(self):
        first = write_csv(self.root / 'a.csv', ['x'], [(1.0,)])
        second = write_csv(self.root / 'nested' / 'b.csv', ['x'], [(2.0,)])
        manifest = write_manifest(self.root, [second, first])
        files = json.loads(manifest.read_text())['files']
        self.assertEqual(list(files), ['a.csv', str(Path('nested') / 'b.csv')])
        self.assertEqual(files['a.csv'], file_hash(first))


class ParseComplexTests(SimpleTestCase):

    def test_forms(self):
        self.assertEqual(parse_complex([0.5, -1]), 0.5 - 1j)
        self.assertEqual(parse_complex(2), 2 + 0j)
        self.assertEqual(parse_complex('0.5+0.2i'), 0.5 + 0.2j)

    def test_wrong_length(self):
        with self.assertRaises(ValueError):
            parse_complex([1.0, 2.0, 3.0])


class PointSerializer(StrictSerializer):
    z = ComplexField()
    label = serializers.CharField(default='point')


class StrictSerializerTests(SimpleTestCase):

    def test_complex_field(self):
        serializer = PointSerializer(data={'z': [0.5, 0.2]})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.validated_data['z'], 0.5 + 0.2j)
        self.assertEqual(PointSerializer({'z': 1j, 'label': 'i'}).data['z'], [0.0, 1.0])

    def test_bad_complex(self):
        serializer = PointSerializer(data={'z': {'re': 1}})
        self.assertFalse(serializer.is_valid())
        self.assertIn('z', serializer.errors)

    def test_unknown_key(self):
        serializer = PointSerializer(data={'z': [0, 1], 'lable': 'x'})
        self.assertFalse(serializer.is_valid())
        self.assertEqual(list(serializer.errors), ['lable'])


class ReportEnvelopeTests(SimpleTestCase):

    def test_success(self):
        report = ReportResponseMixin.success_report(data={'n': 8}, message='done')
        self.assertEqual(report, {'success': True, 'status': 'success', 'exit_code': 0, 'message': 'done',
                                  'data': {'n': 8}})

    def test_failure(self):
        report = ReportResponseMixin.failure_report(message='stieltjes: 3 grid points failed', exit_code=1)
        self.assertFalse(report['success'])
        self.assertEqual(report['status'], 'failure')
        self.assertEqual(report['exit_code'], 1)
        self.assertNotIn('data', report)
