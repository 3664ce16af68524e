"""
End-to-end tests of job handling: exit codes, reports and determinism.
"""

import json

import numpy as np
import pytest

import main
from data.settings_data_storage import JobSpec


def _write_state(path, dims, matrix):
    content = {'dims': dims, 'matrix': [[[float(v), 0.0] for v in row] for row in matrix]}
    path.write_text(json.dumps(content), encoding='utf-8')
    return str(path)


def test_global_robustness_report(tmp_path, settings):
    out = tmp_path / 'rg.json'
    job = JobSpec(command='measure', kind='rg', named='phi2', out=str(out))
    assert main.run(job, settings) == main.EXIT_OK
    report = json.loads(out.read_text(encoding='utf-8'))
    assert report['results'][0]['lower'] == pytest.approx(1.0, abs=1e-5)
    assert report['seed'] == 0
    assert not (tmp_path / 'rg.csv').exists()


def test_sweep_is_deterministic(tmp_path, settings):
    tables = []
    for index in range(2):
        out = tmp_path / f'run{index}' / 'stein.json'
        job = JobSpec(command='sweep', kind='stein', named='phi2', y=(0.0, 0.5, 1.0), out=str(out))
        assert main.run(job, settings) == main.EXIT_OK
        tables.append((tmp_path / f'run{index}' / 'stein.csv').read_bytes())
    assert tables[0] == tables[1]
    assert len(tables[0].decode('utf-8').splitlines()) == 4


def test_workers_keep_grid_order(settings):
    job = JobSpec(command='sweep', kind='stein', named='phi2', y=(0.0, 0.5, 1.0), workers=3)
    results = main.evaluate_job(job, main.input_module.named_state('phi2'), settings)
    assert [cell.y for cell in results] == [0.0, 0.5, 1.0]


def test_distill_protocol(tmp_path, settings):
    out = tmp_path / 'distill.json'
    job = JobSpec(command='protocol', kind='distill', named='phi2', K=2, out=str(out), save_certificates=True)
    assert main.run(job, settings) == main.EXIT_OK
    extra = json.loads(out.read_text(encoding='utf-8'))['results'][0]['extra']
    assert extra['cptp'] is True
    assert extra['epsilon'] <= 1e-4
    assert (tmp_path / 'distill.h5').exists()


class TestExitCodes:
    def test_size_mismatch(self, tmp_path, settings):
        state = _write_state(tmp_path / 'bad.json', [2, 3], np.eye(4) / 4)
        assert main.run(JobSpec(command='measure', kind='rg', state=state), settings) == main.EXIT_INPUT

    def test_non_psd_state(self, tmp_path, settings):
        state = _write_state(tmp_path / 'negative.json', [2, 2], np.diag([1.5, -0.5, 0.0, 0.0]))
        assert main.run(JobSpec(command='measure', kind='rg', state=state), settings) == main.EXIT_STATE

    def test_too_many_copies(self, settings):
        job = JobSpec(command='measure', kind='regularized', measure='er', named='phi2', n=(4,))
        assert main.run(job, settings) == main.EXIT_DIMENSION

    @pytest.mark.parametrize('job', [
        JobSpec(command='measure', kind='squashed', named='phi2'),
        JobSpec(command='measure', kind='rg'),
        JobSpec(command='fsep', named='phi2', K=1),
        JobSpec(command='stein', kind='probe', named='phi2', eps=(0.0,)),
        JobSpec(command='measure', kind='lrg_smoothed', named='phi2', eps=(-0.1,)),
    ])
    def test_bad_input(self, settings, job):
        assert main.run(job, settings) == main.EXIT_INPUT

    def test_separable_formation_target(self, settings):
        job = JobSpec(command='protocol', kind='form', named='mixed:2:2')
        assert main.run(job, settings) == main.EXIT_STATE


class TestBuildJob:
    def test_flags_override_job_file(self, tmp_path):
        job_file = tmp_path / 'job.toml'
        job_file.write_text('command = "stein"\nnamed = "phi2"\ny = "0:0.5:1"\nseed = 3\n', encoding='utf-8')
        arguments = main.parse_command_line_args(['-j', str(job_file), '--y', '2.0', '--n', '1..2'])
        job = main.build_job(arguments)
        assert job.command == 'stein'
        assert job.y == (2.0,)
        assert job.n == (1, 2)
        assert job.seed == 3

    def test_needs_a_command(self):
        with pytest.raises(main.input_module.StateFileError):
            main.build_job(main.parse_command_line_args(['--named', 'phi2']))

    def test_grid_cells(self):
        job = JobSpec(command='fsep', variant='relaxed', named='phi2', n=(1, 2), y=(0.5, 1.0), eps=(0.1,))
        assert main.grid_cells(job) == [(1, None, 0.5, 0.1), (1, None, 1.0, 0.1), (2, None, 0.5, 0.1),
                                        (2, None, 1.0, 0.1)]
