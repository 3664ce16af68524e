"""
Contains functions necessary for saving reports, sweep tables and certificates.
"""

import json
import os
from dataclasses import asdict
from typing import Any, Dict, List, Sequence

import h5py
import numpy as np

from data.result_data_storage import Bracket, CellResult, ConeSolution, MixingCertificate
from data.settings_data_storage import JobSpec
from data.state_data_storage import SeparableDecomposition

CSV_HEADER = 'command,state_id,n,K,y,eps,lower,upper,gap,status,seconds\n'


def _make_directory(filepath: str) -> None:
    directory = os.path.dirname(filepath)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)


def _certificate_summary(certificate) -> Any:
    if certificate is None:
        return None
    if isinstance(certificate, ConeSolution):
        return {'type': 'cone-solution', 'objective': certificate.objective,
                'dual_objective': certificate.dual_objective, 'gap': certificate.gap,
                'residual': certificate.residual, 'dual_residual': certificate.dual_residual,
                'status': certificate.status.value, 'iterations': certificate.iterations}
    if isinstance(certificate, SeparableDecomposition):
        return {'type': 'separable-decomposition', 'terms': certificate.terms, 'scale': certificate.scale}
    if isinstance(certificate, MixingCertificate):
        return {'type': 'mixing-certificate', 'identity_weight': certificate.identity_weight,
                'mixer': _certificate_summary(certificate.mixer), 'mixture': _certificate_summary(certificate.mixture),
                'smoothed': certificate.state is not None}
    if isinstance(certificate, (tuple, list)):
        return [_certificate_summary(item) for item in certificate]
    return {'type': type(certificate).__name__}


def bracket_summary(bracket: Bracket) -> Dict[str, Any]:
    return {'lower': bracket.lower, 'upper': bracket.upper, 'gap': bracket.gap,
            'status': bracket.status.value, 'relaxation': bracket.relaxation.value,
            'iterations': bracket.iterations,
            'lower_certificate': _certificate_summary(bracket.lower_certificate),
            'upper_certificate': _certificate_summary(bracket.upper_certificate)}


def _plain(value: Any) -> Any:
    if isinstance(value, Bracket):
        return bracket_summary(value)
    if isinstance(value, np.ndarray):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {key: _plain(item) for key, item in value.items() if not isinstance(item, np.ndarray)}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    return value


def write_report(filepath: str, job: JobSpec, results: Sequence[CellResult], solver: str,
                 wall_seconds: float) -> None:
    """
    Writes the JSON report of a job.

    :param filepath: Where the report goes.
    :param job: The job, echoed under "inputs".
    :param results: The evaluated cells, in grid order.
    :param solver: The configured cone solver.
    :param wall_seconds: Wall-clock time of the whole job.
    :return: Nothing, since this is a void function.
    """
    _make_directory(filepath)
    report = {
        'inputs': _plain(asdict(job)),
        'seed': job.seed,
        'tolerance': job.tol,
        'results': [{'command': cell.command, 'kind': cell.kind, 'n': cell.n, 'K': cell.K, 'y': cell.y,
                     'eps': cell.eps, **bracket_summary(cell.bracket), 'extra': _plain(cell.extra)}
                    for cell in results],
        'solver': {'name': solver, 'iterations': int(sum(cell.bracket.iterations for cell in results))},
        'wall_seconds': wall_seconds,
    }
    with open(filepath, mode='w', encoding='utf-8') as f:
        json.dump(report, f, indent=2)


def _field(value) -> str:
    return '' if value is None else repr(value)


def write_sweep_csv(filepath: str, job: JobSpec, results: Sequence[CellResult], timings: bool = False) -> None:
    """
    Writes one row per grid cell. Floats are written with repr; the seconds
    column stays empty unless timings are requested.
    """
    _make_directory(filepath)
    with open(filepath, mode='w', encoding='utf-8', newline='') as f:
        f.write(CSV_HEADER)
        for cell in results:
            bracket = cell.bracket
            seconds = repr(cell.seconds) if timings else ''
            f.write(f'{cell.command},{job.state_id},{_field(cell.n)},{_field(cell.K)},{_field(cell.y)},'
                    f'{_field(cell.eps)},{float(bracket.lower)!r},{float(bracket.upper)!r},'
                    f'{float(bracket.gap)!r},{bracket.status.value},{seconds}\n')


def _save_decomposition(group: h5py.Group, decomposition: SeparableDecomposition) -> None:
    group.attrs['scale'] = decomposition.scale
    group.attrs['dims'] = list(decomposition.profile.dims)
    group.attrs['parties'] = list(decomposition.profile.parties)
    group.create_dataset('weights', data=decomposition.weights)
    for party in range(len(decomposition.profile.party_labels)):
        group.create_dataset(f'factors_party{party}',
                             data=np.array([factors[party] for factors in decomposition.factors]))


def _save_certificate(group: h5py.Group, name: str, certificate) -> None:
    if isinstance(certificate, SeparableDecomposition):
        _save_decomposition(group.create_group(name), certificate)
    elif isinstance(certificate, MixingCertificate):
        mixing = group.create_group(name)
        mixing.attrs['identity_weight'] = certificate.identity_weight
        for part in ('mixer', 'mixture'):
            if getattr(certificate, part) is not None:
                _save_decomposition(mixing.create_group(part), getattr(certificate, part))
        if certificate.state is not None:
            mixing.create_dataset('state', data=certificate.state)
    elif isinstance(certificate, ConeSolution):
        duals = group.create_group(name)
        duals.attrs['dual_objective'] = certificate.dual_objective
        for key, value in certificate.dual.items():
            if value is not None and np.ndim(value) == 2:
                duals.create_dataset(key.replace('/', '_'), data=np.asarray(value))
    elif isinstance(certificate, (tuple, list)):
        for index, item in enumerate(certificate):
            _save_certificate(group, f'{name}{index}', item)


def save_certificates(filepath: str, results: List[CellResult]) -> None:
    """
    Saves every certificate to an HDF5 file, one group per result.
    """
    _make_directory(filepath)
    with h5py.File(filepath, 'w') as certificate_saver:
        for index, cell in enumerate(results):
            group = certificate_saver.create_group(f'result{index}')
            group.attrs['command'] = cell.command
            group.attrs['lower'] = cell.bracket.lower
            group.attrs['upper'] = cell.bracket.upper
            _save_certificate(group, 'lower_certificate', cell.bracket.lower_certificate)
            _save_certificate(group, 'upper_certificate', cell.bracket.upper_certificate)
            for key, value in cell.extra.items():
                if isinstance(value, np.ndarray):
                    group.create_dataset(key, data=value)
