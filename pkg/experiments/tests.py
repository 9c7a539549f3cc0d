import csv
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings, tag
from numpy.testing import assert_array_equal

from timechange.choices import Scheme
from .campaigns import ClockSettings, run_campaign
from .checks import CHECKS, run_check
from .choices import CheckName, CheckStatus, SchemeSelection
from .config import build_config, read_config_file
from .serializers import ExperimentConfigSerializer
from .writers import format_number, render_json, sha256_file, write_long_csv, write_path_csv


BASE = {
    'alpha': '0', 'x0': '1', 'y0': '0', 'horizon': '1',
    'n_steps': '16', 'n_paths': '3', 'seed': '7',
}
BASE_FLAGS = {
    'alpha': 0, 'x0': 1, 'y0': 0, 'horizon': 1, 'steps': 16, 'paths': 3, 'seed': 7,
}


def _flags(**values):
    args = []
    for key, value in values.items():
        flag = f"--{key.replace('_', '-')}"
        args += [flag] if value is True else [flag, str(value)]
    return args


def _read_csv(path):
    with open(path, newline='', encoding='utf-8') as fh:
        return list(csv.reader(fh))


class ExperimentConfigSerializerTests(SimpleTestCase):

    def _validate(self, **changes):
        return ExperimentConfigSerializer(data={**BASE, **changes})

    def test_valid_config(self):
        serializer = self._validate(scheme='both')
        self.assertTrue(serializer.is_valid(), serializer.errors)
        config = serializer.save()
        self.assertEqual(config.n_steps, 16)
        self.assertEqual(config.scheme, SchemeSelection.BOTH)
        self.assertIsNone(config.trunc)
        self.assertEqual(config.grid.n_steps, 16)

    def test_alpha_lower_bound(self):
        serializer = self._validate(alpha='-0.5')
        self.assertFalse(serializer.is_valid())
        self.assertIn('alpha', serializer.errors)

    def test_origin_needs_em_and_flag(self):
        self.assertFalse(self._validate(x0='0', y0='0').is_valid())
        self.assertFalse(self._validate(x0='0', y0='0', scheme='em').is_valid())
        self.assertTrue(self._validate(x0='0', y0='0', scheme='em', allow_origin=True).is_valid())

    def test_timechange_rejects_positive_alpha(self):
        self.assertFalse(self._validate(alpha='0.5').is_valid())
        self.assertFalse(self._validate(alpha='0.5', scheme='both').is_valid())
        self.assertTrue(self._validate(alpha='0.5', scheme='em').is_valid())

    def test_em_with_negative_alpha_needs_truncation(self):
        self.assertTrue(self._validate(alpha='-0.25').is_valid())
        self.assertFalse(self._validate(alpha='-0.25', scheme='em').is_valid())
        self.assertTrue(self._validate(alpha='-0.25', scheme='em', trunc_n='6').is_valid())

    def test_small_grids_and_empty_campaigns_rejected(self):
        self.assertFalse(self._validate(n_steps='1').is_valid())
        self.assertFalse(self._validate(n_paths='0').is_valid())

    @override_settings(SDE_TOOLKIT={**settings.SDE_TOOLKIT, 'OUTPUT_DIR': 'elsewhere'})
    def test_output_dir_defaults_to_setting(self):
        serializer = self._validate()
        self.assertTrue(serializer.is_valid())
        self.assertEqual(serializer.save().output_dir, 'elsewhere')

    def test_to_dict_leaves_out_output_dir(self):
        config = build_config(BASE, {'output_dir': '/tmp/a'})
        data = config.to_dict()
        self.assertNotIn('output_dir', data)
        self.assertEqual(data['scheme'], 'timechange')


class ConfigFileTests(SimpleTestCase):

    def test_file_values_and_overrides(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.env'
            path.write_text(
                "# campaign\nalpha = -0.25\nx0 = 1\ny0 = 0\nhorizon = 2\n"
                "steps = 32\npaths = 4\nseed = \"11\"\nout = runs/a\n",
                encoding='utf-8',
            )
            values = read_config_file(path)
            self.assertEqual(values['n_steps'], '32')
            self.assertEqual(values['seed'], '11')
            config = build_config(values, {'n_paths': '2', 'seed': None})
        self.assertEqual(config.alpha, -0.25)
        self.assertEqual(config.n_paths, 2)
        self.assertEqual(config.seed, 11)
        self.assertEqual(config.output_dir, 'runs/a')

    def test_missing_file(self):
        with self.assertRaises(ValidationError) as ctx:
            read_config_file('/nonexistent/run.env')
        self.assertEqual(ctx.exception.code, 'config_file')

    def test_invalid_values_are_flattened(self):
        with self.assertRaises(ValidationError) as ctx:
            build_config({**BASE, 'n_steps': 'many'})
        self.assertEqual(ctx.exception.code, 'invalid_config')
        self.assertIn('n_steps', ctx.exception.message)


class WriterTests(SimpleTestCase):

    def test_seventeen_digits(self):
        self.assertEqual(format_number(0.1), '0.10000000000000001')
        self.assertEqual(float(format_number(1.0 / 3.0)), 1.0 / 3.0)

    def test_csv_uses_crlf_and_header(self):
        config = build_config(BASE, {'zero_noise': True})
        path = run_campaign(config, workers=1).paths[Scheme.TIMECHANGE][0]
        with tempfile.TemporaryDirectory() as tmp:
            target = write_path_csv(path, Path(tmp) / 'p.csv')
            raw = target.read_bytes()
            long = write_long_csv([(0, path), (1, path)], Path(tmp) / 'long.csv')
            rows = _read_csv(long)
        self.assertTrue(raw.startswith(b't,x,y\r\n'))
        self.assertEqual(raw.count(b'\r\n'), 18)
        self.assertEqual(rows[0], ['path_id', 't', 'x', 'y'])
        self.assertEqual(len(rows), 1 + 2 * 17)

    def test_json_is_strict(self):
        data = json.loads(render_json({'a': math.inf, 'b': np.float64(0.5), 'c': [np.nan, np.int64(3)]}))
        self.assertEqual(data, {'a': None, 'b': 0.5, 'c': [None, 3]})

    def test_hash_follows_content(self):
        with tempfile.TemporaryDirectory() as tmp:
            a = Path(tmp) / 'a'
            b = Path(tmp) / 'b'
            a.write_bytes(b'x')
            b.write_bytes(b'x')
            self.assertEqual(sha256_file(a), sha256_file(b))
            b.write_bytes(b'y')
            self.assertNotEqual(sha256_file(a), sha256_file(b))


class CampaignTests(SimpleTestCase):

    def test_worker_count_does_not_change_paths(self):
        config = build_config({**BASE, 'alpha': '-0.25', 'n_paths': '4'})
        clock = ClockSettings.from_settings()
        serial = run_campaign(config, clock=clock, workers=1)
        parallel = run_campaign(config, clock=clock, workers=2)
        self.assertEqual(serial.cap_hits, parallel.cap_hits)
        for (k, mine), (j, theirs) in zip(serial.completed(Scheme.TIMECHANGE), parallel.completed(Scheme.TIMECHANGE)):
            self.assertEqual(k, j)
            assert_array_equal(mine.x, theirs.x)
            assert_array_equal(mine.y, theirs.y)

    def test_both_schemes_share_streams(self):
        config = build_config({**BASE, 'scheme': 'both'})
        result = run_campaign(config, workers=1)
        for k in range(3):
            tc = result.paths[Scheme.TIMECHANGE][k]
            em = result.paths[Scheme.EM][k]
            self.assertEqual((tc.seed, tc.stream_id), (em.seed, em.stream_id))

    def test_cap_hits_are_skipped(self):
        config = build_config({**BASE, 'alpha': '-0.25'})
        result = run_campaign(config, clock=ClockSettings.from_settings(max_steps=8), workers=1)
        self.assertEqual(result.cap_hits, [0, 1, 2])
        self.assertEqual(result.completed(Scheme.TIMECHANGE), [])


class CheckRegistryTests(SimpleTestCase):

    def test_every_check_is_registered(self):
        self.assertEqual(set(CHECKS), set(CheckName))

    def test_roundtrip(self):
        report = run_check(CheckName.ROUNDTRIP, build_config(BASE))
        self.assertEqual(report.status, CheckStatus.PASS)
        self.assertEqual(report.statistics['oddness_failures'], 0)
        self.assertEqual(report.config['seed'], 7)

    def test_mean_value(self):
        report = run_check(CheckName.MEAN_VALUE, build_config(BASE))
        self.assertEqual(report.status, CheckStatus.PASS)
        self.assertEqual(set(report.statistics['violations']), {'-0.25', '0', '0.25', '0.75'})

    def test_driver_covariance(self):
        report = run_check(CheckName.DRIVER_COV, build_config({**BASE, 'n_paths': '2000'}), z=5.0)
        self.assertEqual(report.status, CheckStatus.PASS)

    def test_gaussian_marginal_at_alpha_zero(self):
        report = run_check(CheckName.KS_ALPHA0, build_config({**BASE, 'n_paths': '500'}), workers=1)
        self.assertTrue(report.statistics['bitwise_identical'])
        self.assertEqual(report.status, CheckStatus.PASS)

    def test_gronwall_is_decided_by_the_coarse_fine_pair(self):
        config = build_config({**BASE, 'alpha': '0.75', 'x0': '0', 'y0': '1', 'scheme': 'em',
                               'trunc_n': '4', 'n_steps': '64', 'n_paths': '100'})
        report = run_check(CheckName.GRONWALL, config)
        stats = report.statistics
        self.assertEqual(stats['negative_control']['verdict'], 'violated')
        self.assertEqual(stats['truncation_identity']['max_d'], 0.0)
        self.assertGreater(stats['coarse_vs_fine']['max_d'], 0.0)
        self.assertIn(report.status, (CheckStatus.PASS, CheckStatus.INCONCLUSIVE))
        if stats['coarse_vs_fine']['verdict'] == 'holds':
            self.assertEqual(report.status, CheckStatus.PASS)
            self.assertIsNone(stats['reason'])
        else:
            self.assertEqual(report.status, CheckStatus.INCONCLUSIVE)
            self.assertTrue(stats['reason'])

    def test_strong_convergence_fails_without_noise(self):
        config = build_config({**BASE, 'alpha': '0.75', 'scheme': 'em', 'n_steps': '4', 'n_paths': '2',
                               'zero_noise': True})
        report = run_check(CheckName.STRONG_CONVERGENCE, config)
        self.assertEqual(report.status, CheckStatus.FAIL)
        self.assertFalse(report.statistics['strictly_decreasing'])

    def test_small_time_needs_a_fine_grid(self):
        config = build_config({**BASE, 'n_steps': '4'})
        with self.assertRaises(ValidationError) as ctx:
            run_check(CheckName.SMALL_TIME, config)
        self.assertEqual(ctx.exception.code, 'invalid_check_config')

    @tag("slow")
    def test_quadratic_variation(self):
        config = build_config({**BASE, 'alpha': '-0.25', 'n_steps': str(2**14), 'n_paths': '100'})
        report = run_check(CheckName.QV, config)
        self.assertEqual(report.status, CheckStatus.PASS)

    @tag("slow")
    def test_origin_avoidance(self):
        config = build_config({**BASE, 'alpha': '-0.25', 'horizon': '5', 'n_steps': '500', 'n_paths': '10000'})
        report = run_check(CheckName.ORIGIN, config)
        self.assertTrue(report.statistics['monotone'])
        self.assertEqual(report.status, CheckStatus.PASS)

    @tag("slow")
    def test_small_time_slope(self):
        config = build_config({**BASE, 'alpha': '0.75', 'x0': '0', 'y0': '1', 'scheme': 'em',
                               'n_steps': '1024', 'n_paths': '1000'})
        report = run_check(CheckName.SMALL_TIME, config)
        self.assertEqual(report.status, CheckStatus.PASS)


class SampleCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _sample(self, out, *extra, **values):
        stdout = StringIO()
        call_command('sde', 'sample', *_flags(**{**BASE_FLAGS, **values, 'out': out}), *extra, stdout=stdout)
        return stdout.getvalue()

    def _manifest(self, out):
        return json.loads((Path(out) / 'manifest.json').read_text(encoding='utf-8'))

    def test_zero_noise_at_alpha_zero_is_a_line(self):
        self._sample(self.tmp, '--zero-noise', x0=1, y0=2, paths=1)
        rows = _read_csv(self.tmp / 'paths' / 'timechange_000000.csv')
        self.assertEqual(rows[0], ['t', 'x', 'y'])
        self.assertEqual(len(rows), 1 + 17)
        for t, x, y in rows[1:]:
            self.assertEqual(float(x), 1.0 + 2.0 * float(t))
            self.assertEqual(float(y), 2.0)

    def test_rerun_is_byte_identical(self):
        first, second = self.tmp / 'a', self.tmp / 'b'
        self._sample(first, alpha=-0.25)
        self._sample(second, alpha=-0.25)
        self.assertEqual((first / 'manifest.json').read_bytes(), (second / 'manifest.json').read_bytes())
        for entry in self._manifest(first)['files']:
            self.assertEqual(sha256_file(first / entry['file']), sha256_file(second / entry['file']))

    def test_manifest_contents(self):
        self._sample(self.tmp)
        manifest = self._manifest(self.tmp)
        self.assertEqual(manifest['command'], 'sample')
        self.assertEqual(manifest['config']['n_paths'], 3)
        self.assertEqual(manifest['cap_hits'], {'count': 0, 'path_ids': []})
        self.assertEqual([p['stream_id'] for p in manifest['paths']], [0, 1, 2])
        self.assertEqual(len(manifest['files']), 3)
        for entry in manifest['files']:
            self.assertEqual(sha256_file(self.tmp / entry['file']), entry['sha256'])

    def test_both_schemes_write_paired_files(self):
        self._sample(self.tmp, scheme='both')
        manifest = self._manifest(self.tmp)
        by_scheme = {}
        for entry in manifest['paths']:
            by_scheme.setdefault(entry['scheme'], []).append((entry['path_id'], entry['stream_id']))
        self.assertEqual(by_scheme['timechange'], by_scheme['em'])
        self.assertTrue((self.tmp / 'paths' / 'em_000002.csv').exists())
        self.assertTrue((self.tmp / 'paths' / 'timechange_000002.csv').exists())

    def test_long_format(self):
        self._sample(self.tmp, '--long')
        rows = _read_csv(self.tmp / 'timechange_paths.csv')
        self.assertEqual(rows[0], ['path_id', 't', 'x', 'y'])
        self.assertEqual(len(rows), 1 + 3 * 17)
        self.assertEqual(self._manifest(self.tmp)['format'], 'long')

    def test_cap_hits_in_manifest(self):
        with override_settings(SDE_TOOLKIT={**settings.SDE_TOOLKIT, 'MAX_CLOCK_STEPS': 8}):
            self._sample(self.tmp, alpha=-0.25)
        manifest = self._manifest(self.tmp)
        self.assertEqual(manifest['cap_hits'], {'count': 3, 'path_ids': [0, 1, 2]})
        self.assertEqual(manifest['files'], [])
        self.assertEqual(manifest['toolkit']['max_steps'], 8)

    def test_from_manifest_reproduces(self):
        first, second = self.tmp / 'a', self.tmp / 'b'
        self._sample(first, alpha=-0.25)
        stdout = StringIO()
        call_command('sde', 'sample', '--from-manifest', str(first / 'manifest.json'), '--out', str(second),
                     stdout=stdout)
        self.assertIn('reproduced 3 file(s)', stdout.getvalue())
        self.assertEqual((first / 'manifest.json').read_bytes(), (second / 'manifest.json').read_bytes())

    def test_from_manifest_detects_changes(self):
        self._sample(self.tmp)
        manifest = self._manifest(self.tmp)
        manifest['files'][0]['sha256'] = '0' * 64
        tampered = self.tmp / 'tampered.json'
        tampered.write_text(json.dumps(manifest), encoding='utf-8')
        with self.assertRaises(CommandError) as ctx:
            call_command('sde', 'sample', '--from-manifest', str(tampered), '--out', str(self.tmp / 'again'),
                         stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_config_file_with_overrides(self):
        config = self.tmp / 'run.env'
        config.write_text("alpha = 0\nx0 = 1\ny0 = 0\nhorizon = 1\nsteps = 8\npaths = 5\nseed = 1\n", encoding='utf-8')
        out = self.tmp / 'out'
        call_command('sde', 'sample', '--config', str(config), '--paths', '2', '--out', str(out), stdout=StringIO())
        self.assertEqual(len(self._manifest(out)['files']), 2)

    def test_invalid_config_is_a_usage_error(self):
        for values in ({'alpha': -0.75}, {'steps': 1}, {'x0': 0, 'y0': 0}):
            with self.subTest(values=values):
                with self.assertRaises(CommandError) as ctx:
                    self._sample(self.tmp, **values)
                self.assertEqual(ctx.exception.returncode, 2)

    def test_missing_fields_are_a_usage_error(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('sde', 'sample', '--alpha', '0', '--out', str(self.tmp), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_workers_must_be_positive(self):
        with self.assertRaises(CommandError) as ctx:
            self._sample(self.tmp, workers=0)
        self.assertEqual(ctx.exception.returncode, 2)


class CheckCommandTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def _check(self, name, **values):
        stdout = StringIO()
        call_command('sde', 'check', name, *_flags(**{**BASE_FLAGS, **values, 'out': self.tmp}), stdout=stdout)
        return stdout.getvalue()

    def test_roundtrip_passes_and_writes_report(self):
        printed = json.loads(self._check('roundtrip'))
        written = json.loads((self.tmp / 'check_roundtrip.json').read_text(encoding='utf-8'))
        self.assertEqual(printed, written)
        self.assertEqual(written['status'], 'pass')
        self.assertEqual(set(written), {'version', 'name', 'status', 'statistics', 'thresholds', 'config'})

    def test_standalone_checks_need_no_sampling_flags(self):
        for name in ('roundtrip', 'mean-value'):
            stdout = StringIO()
            call_command('sde', 'check', name, '--out', str(self.tmp), stdout=stdout)
            self.assertEqual(json.loads(stdout.getvalue())['status'], 'pass')

    def test_sampling_checks_still_need_a_config(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('sde', 'check', 'qv', '--out', str(self.tmp), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_unknown_check(self):
        with self.assertRaises(CommandError) as ctx:
            self._check('bogus')
        self.assertEqual(ctx.exception.returncode, 2)

    def test_failing_check_exits_one(self):
        with self.assertRaises(CommandError) as ctx:
            self._check('strong-convergence', alpha=0.75, scheme='em', steps=4, paths=2, zero_noise=True)
        self.assertEqual(ctx.exception.returncode, 1)
        report = json.loads((self.tmp / 'check_strong-convergence.json').read_text(encoding='utf-8'))
        self.assertEqual(report['status'], 'fail')

    def test_unusable_config_for_check(self):
        with self.assertRaises(CommandError) as ctx:
            self._check('small-time', steps=4)
        self.assertEqual(ctx.exception.returncode, 2)

