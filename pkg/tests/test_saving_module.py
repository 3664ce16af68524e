"""
Tests for the JSON report, the sweep table and the certificate file.
"""

import json

import h5py
import numpy as np
import pytest

from data.result_data_storage import Bracket, CellResult, ConeSolution, ConeStatus
from data.settings_data_storage import JobSpec
from data.state_data_storage import SeparableDecomposition, bipartite
from saving_module import CSV_HEADER, bracket_summary, save_certificates, write_report, write_sweep_csv


@pytest.fixture
def job() -> JobSpec:
    return JobSpec(command='sweep', kind='stein', named='phi2', y=(0.0, 1.0))


@pytest.fixture
def decomposition() -> SeparableDecomposition:
    e0, e1 = np.eye(2, dtype=complex)
    return SeparableDecomposition(np.array([0.5, 0.5]), ((e0, e0), (e1, e1)), bipartite(2, 2), 2.0)


@pytest.fixture
def dual_solution() -> ConeSolution:
    return ConeSolution({'sigma': np.eye(4) / 4}, {'psd/sigma': np.eye(4), 'trace': 0.5}, 0.5, 0.5, 0.0, 1e-9,
                        ConeStatus.OPTIMAL, iterations=12)


@pytest.fixture
def results(decomposition, dual_solution):
    return [CellResult('sweep', 'stein', 1, None, 0.0, None, Bracket(0.5, 0.5, dual_solution, decomposition),
                       seconds=0.25),
            CellResult('sweep', 'stein', 1, None, 1.0, None, Bracket(0.0, 1e-7), seconds=0.5,
                       extra={'b': 0.75, 'povm': np.eye(4)})]


class TestSweepCsv:
    def test_rows_and_empty_seconds(self, tmp_path, job, results):
        filepath = tmp_path / 'sweep.csv'
        write_sweep_csv(str(filepath), job, results)
        lines = filepath.read_text(encoding='utf-8').splitlines(keepends=True)
        assert lines[0] == CSV_HEADER
        assert lines[1] == 'sweep,phi2,1,,0.0,,0.5,0.5,0.0,optimal,\n'
        assert lines[2].endswith(',optimal,\n')
        assert len(lines) == 3

    def test_timings_fill_seconds(self, tmp_path, job, results):
        filepath = tmp_path / 'nested' / 'sweep.csv'
        write_sweep_csv(str(filepath), job, results, timings=True)
        lines = filepath.read_text(encoding='utf-8').splitlines()
        assert lines[1].endswith(',0.25')
        assert lines[2].endswith(',0.5')


class TestReport:
    def test_keys_and_results(self, tmp_path, job, results):
        filepath = tmp_path / 'report.json'
        write_report(str(filepath), job, results, 'CLARABEL', 1.5)
        report = json.loads(filepath.read_text(encoding='utf-8'))
        assert set(report) == {'inputs', 'seed', 'tolerance', 'results', 'solver', 'wall_seconds'}
        assert report['inputs']['named'] == 'phi2'
        assert report['inputs']['y'] == [0.0, 1.0]
        assert report['solver'] == {'name': 'CLARABEL', 'iterations': 0}
        first, second = report['results']
        assert first['lower'] == 0.5
        assert first['lower_certificate']['type'] == 'cone-solution'
        assert first['upper_certificate'] == {'type': 'separable-decomposition', 'terms': 2, 'scale': 2.0}
        assert second['extra'] == {'b': 0.75}

    def test_bracket_summary(self):
        summary = bracket_summary(Bracket(0.25, 0.5))
        assert summary['gap'] == 0.25
        assert summary['status'] == 'optimal'
        assert summary['relaxation'] == 'bracket'
        assert summary['lower_certificate'] is None


def test_certificates_are_saved(tmp_path, results, decomposition):
    filepath = tmp_path / 'certificates.h5'
    save_certificates(str(filepath), results)
    with h5py.File(filepath, 'r') as saved:
        assert set(saved) == {'result0', 'result1'}
        first = saved['result0']
        assert first.attrs['lower'] == 0.5
        np.testing.assert_allclose(first['upper_certificate/weights'][()], decomposition.weights)
        assert first['upper_certificate/factors_party0'].shape == (2, 2)
        assert first['upper_certificate'].attrs['scale'] == 2.0
        np.testing.assert_allclose(first['lower_certificate/psd_sigma'][()], np.eye(4))
        assert 'trace' not in first['lower_certificate']
        np.testing.assert_allclose(saved['result1/povm'][()], np.eye(4))
