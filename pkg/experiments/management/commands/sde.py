"""
python manage.py sde sample|check

Exit codes: 0 success, 1 check failure or manifest mismatch, 2 usage error or invalid config.
"""
import io
import logging
from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser

from Sde_Main import __version__
from experiments.campaigns import ClockSettings, run_campaign
from experiments.checks import STANDALONE_CHECKS, STANDALONE_DEFAULTS, run_check
from experiments.choices import CheckName, CheckStatus
from experiments.config import build_config, read_config_file
from experiments.writers import render_json, sha256_file, write_json, write_long_csv, write_path_csv

logger = logging.getLogger(__name__)

USAGE_ERROR = 2
FAILURE = 1

# flag name -> config key
CONFIG_FLAGS = {
    'alpha': 'alpha',
    'x0': 'x0',
    'y0': 'y0',
    'horizon': 'horizon',
    'steps': 'n_steps',
    'paths': 'n_paths',
    'seed': 'seed',
    'scheme': 'scheme',
    'trunc_n': 'trunc_n',
    'out': 'output_dir',
    'allow_origin': 'allow_origin',
    'zero_noise': 'zero_noise',
}
LONG_FORMAT = 'long'
PER_PATH_FORMAT = 'per-path'


def _usage_error(exc):
    message = '; '.join(exc.messages) if isinstance(exc, ValidationError) else str(exc)
    return CommandError(message, returncode=USAGE_ERROR)


class Command(BaseCommand):
    help = "Sample paths of dX = Y dt, dY = |X|^alpha dB, or run a verification check."

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(dest='action', required=True)

        sample = subparsers.add_parser('sample', help="Write path CSV files and a manifest.")
        self._add_config_arguments(sample)
        sample.add_argument('--long', action='store_true', help="One CSV per scheme with a path_id column.")
        sample.add_argument('--from-manifest', dest='from_manifest', help="Rerun a previous sample and verify its hashes.")

        check = subparsers.add_parser('check', help="Run a named check and write a JSON report.")
        check.add_argument('name', help=f"One of: {', '.join(CheckName.values)}.")
        self._add_config_arguments(check)
        check.add_argument('--allow-inconclusive', dest='allow_inconclusive', action='store_true')

    def _add_config_arguments(self, parser):
        # values stay strings here; the config serializer parses and validates them
        for flag in ('alpha', 'x0', 'y0', 'horizon', 'steps', 'paths', 'seed', 'scheme', 'out'):
            parser.add_argument(f'--{flag}')
        parser.add_argument('--trunc-n', dest='trunc_n')
        parser.add_argument('--config', help="Flat key = value file; flags override it.")
        parser.add_argument('--allow-origin', dest='allow_origin', action='store_true', default=None)
        parser.add_argument('--zero-noise', dest='zero_noise', action='store_true', default=None,
                            help="Debug: replace the driver by zero.")
        parser.add_argument('--workers', type=int)

    def handle(self, *args, **options):
        if options['action'] == 'sample':
            return self.handle_sample(options)
        return self.handle_check(options)

    def _config(self, options, file_values=None):
        overrides = {key: options.get(flag) for flag, key in CONFIG_FLAGS.items()}
        try:
            if options.get('config'):
                file_values = {**(file_values or {}), **read_config_file(options['config'])}
            return build_config(file_values, overrides)
        except ValidationError as exc:
            raise _usage_error(exc)

    def _workers(self, options):
        workers = options.get('workers')
        if workers is not None and workers < 1:
            raise CommandError("--workers must be at least 1.", returncode=USAGE_ERROR)
        return workers

    def _output_dir(self, config):
        out = Path(config.output_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise _usage_error(exc)
        return out

    # sample

    def _read_manifest(self, path):
        try:
            with open(path, 'rb') as fh:
                manifest = JSONParser().parse(io.BytesIO(fh.read()))
            return manifest, ClockSettings(**manifest['toolkit'])
        except (OSError, KeyError, TypeError, ValueError, ParseError) as exc:
            raise CommandError(f"Cannot read manifest {path}: {exc}", returncode=USAGE_ERROR)

    def handle_sample(self, options):
        manifest_path = options.get('from_manifest')
        expected = None
        if manifest_path:
            previous, clock = self._read_manifest(manifest_path)
            file_values = dict(previous['config'])
            file_values.setdefault('output_dir', str(Path(manifest_path).parent))
            config = self._config({**options, 'config': None}, file_values)
            long_format = previous.get('format') == LONG_FORMAT
            expected = {entry['file']: entry['sha256'] for entry in previous.get('files', [])}
        else:
            config = self._config(options)
            clock = ClockSettings.from_settings()
            long_format = bool(options.get('long'))

        out = self._output_dir(config)
        try:
            result = run_campaign(config, clock=clock, workers=self._workers(options))
        except ValidationError as exc:
            raise _usage_error(exc)

        manifest = self._write_paths(config, clock, result, out, long_format)
        write_json(manifest, out / 'manifest.json')
        self.stdout.write(
            f"wrote {len(manifest['files'])} file(s) to {out}; {manifest['cap_hits']['count']} cap hit(s)"
        )

        if expected is not None:
            produced = {entry['file']: entry['sha256'] for entry in manifest['files']}
            if produced != expected:
                differing = sorted(f for f in produced.keys() | expected.keys() if produced.get(f) != expected.get(f))
                raise CommandError(f"Outputs differ from {manifest_path}: {', '.join(differing)}", returncode=FAILURE)
            self.stdout.write(f"reproduced {len(produced)} file(s) from {manifest_path}")

    def _write_paths(self, config, clock, result, out, long_format):
        entries, files = [], []

        def record(target):
            relative = target.relative_to(out).as_posix()
            files.append({'file': relative, 'sha256': sha256_file(target)})
            return relative

        for scheme in result.paths:
            completed = result.completed(scheme)
            if long_format:
                name = record(write_long_csv(completed, out / f"{scheme.value}_paths.csv"))
                names = {k: name for k, _ in completed}
            else:
                (out / 'paths').mkdir(exist_ok=True)
                names = {k: record(write_path_csv(p, out / 'paths' / f"{scheme.value}_{k:06d}.csv")) for k, p in completed}
            for k, path in completed:
                entries.append({
                    'path_id': k, 'scheme': str(scheme), 'seed': path.seed,
                    'stream_id': path.stream_id, 'file': names[k],
                })
        logger.info("sample: %s path file(s) in %s", len(files), out)

        return {
            'version': __version__,
            'command': 'sample',
            'config': config.to_dict(),
            'toolkit': clock.to_dict(),
            'format': LONG_FORMAT if long_format else PER_PATH_FORMAT,
            'paths': entries,
            'files': files,
            'cap_hits': {'count': len(result.cap_hits), 'path_ids': result.cap_hits},
        }

    # check

    def handle_check(self, options):
        name = options['name']
        if name not in CheckName.values:
            raise CommandError(
                f"Unknown check '{name}'; choose one of: {', '.join(CheckName.values)}.", returncode=USAGE_ERROR,
            )
        defaults = dict(STANDALONE_DEFAULTS) if CheckName(name) in STANDALONE_CHECKS else None
        config = self._config(options, defaults)
        out = self._output_dir(config)
        try:
            report = run_check(name, config, workers=self._workers(options))
        except ValidationError as exc:
            raise _usage_error(exc)

        data = {'version': __version__, **report.to_dict()}
        write_json(data, out / f"check_{name}.json")
        self.stdout.write(render_json(data).decode('utf-8'), ending='')

        if report.status == CheckStatus.FAIL:
            raise CommandError(f"check {name} failed", returncode=FAILURE)
        if report.status == CheckStatus.INCONCLUSIVE and not options.get('allow_inconclusive'):
            raise CommandError(f"check {name} is inconclusive; pass --allow-inconclusive to accept it", returncode=FAILURE)
