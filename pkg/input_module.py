"""
Contains functions necessary for processing state files and .toml job files.
"""
import json
from typing import Any, Dict, List, Tuple

import numpy as np
import toml

from data.settings_data_storage import JobSpec
from data.state_data_storage import DimProfile, IsotropicParams, MultiState
from states import isotropic, max_entangled, maximally_mixed, werner


class StateFileError(Exception):
    """
    Exception raised when a state file or a job file cannot be read or is malformed.
    """

    def __init__(self, message: str = 'The input file is malformed'):
        super().__init__(message)


class JobFileConfiguration:
    """
    Stores the keys of a job file; every attribute is a key that may appear.
    """
    command: str = None
    kind: str = None
    state: str = None
    named: str = None
    K: int = None
    variant: str = None
    measure: str = None
    n: Any = None
    y: Any = None
    eps: Any = None
    tol: float = None
    seed: int = None
    out: str = None
    workers: int = None
    save_certificates: bool = None
    timings: bool = None

    def __init__(self):
        pass

    def given(self) -> Dict[str, Any]:
        """
        :return: The keys that the job file actually set.
        """
        return {key: getattr(self, key) for key in self.__class__.__annotations__
                if getattr(self, key) is not None}


def parse_job_file(file_name: str) -> Dict[str, Any]:
    """
    Parses a job file of the given filename.

    :param file_name: The name of a .toml job file.
    :return: The keys the file sets, with grids already expanded.
    """
    if not file_name.endswith('.toml'):
        raise StateFileError(f'Job files must be .toml files, got {file_name}')

    try:
        with open(file_name, mode='r', encoding='utf-8') as input_file:
            configuration_file = toml.load(input_file)
    except (OSError, toml.TomlDecodeError) as error:
        raise StateFileError(f'Cannot read {file_name}: {error}') from error

    job_configuration = JobFileConfiguration()
    for key, value in configuration_file.items():
        if key not in JobFileConfiguration.__annotations__:
            raise StateFileError(f'Unknown key "{key}" in {file_name}')
        setattr(job_configuration, key, value)

    values = job_configuration.given()
    for key, parse in (('n', parse_int_grid), ('y', parse_float_grid), ('eps', parse_float_grid)):
        if key in values:
            values[key] = parse(values[key])
    return values


def _grid_points(start: float, step: float, stop: float) -> List[float]:
    if step <= 0:
        raise StateFileError(f'A grid step must be positive, got {step}')
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(max(count, 0))]


def parse_float_grid(value) -> Tuple[float, ...]:
    """
    Accepts a number, a list of numbers, "a,b,c" or a "start:step:stop" grid.
    """
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        text = str(value).strip()
        if ':' in text:
            start, step, stop = (float(part) for part in text.split(':'))
            return tuple(_grid_points(start, step, stop))
        return tuple(float(part) for part in text.split(','))
    except ValueError as error:
        raise StateFileError(f'Cannot read the grid "{value}"') from error


def parse_int_grid(value) -> Tuple[int, ...]:
    """
    Accepts an integer, a list, "1,2,3" or an inclusive range "1..3".
    """
    if isinstance(value, int):
        return (value,)
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    try:
        text = str(value).strip()
        if '..' in text:
            first, last = (int(part) for part in text.split('..'))
            return tuple(range(first, last + 1))
        return tuple(int(part) for part in text.split(','))
    except ValueError as error:
        raise StateFileError(f'Cannot read the integer grid "{value}"') from error


def load_state(filepath: str) -> MultiState:
    """
    Loads a state from a JSON file {"dims": [...], "matrix": [[[re, im], ...], ...]},
    with an optional "parties" list assigning subsystems to parties.

    :param filepath: The filepath of the .json state file.
    :return: The validated state.
    """
    try:
        with open(filepath, mode='r', encoding='utf-8') as state_file:
            content = json.load(state_file)
    except (OSError, json.JSONDecodeError) as error:
        raise StateFileError(f'Cannot read {filepath}: {error}') from error

    if not isinstance(content, dict) or 'dims' not in content or 'matrix' not in content:
        raise StateFileError(f'{filepath} needs "dims" and "matrix" entries')
    try:
        profile = DimProfile(tuple(int(d) for d in content['dims']),
                             tuple(content['parties']) if 'parties' in content else None)
        pairs = np.array(content['matrix'], dtype=float)
    except (TypeError, ValueError) as error:
        raise StateFileError(f'Malformed state in {filepath}: {error}') from error

    if pairs.ndim != 3 or pairs.shape[2] != 2 or pairs.shape[0] != pairs.shape[1]:
        raise StateFileError(f'The matrix in {filepath} must be square with [re, im] entries')
    if pairs.shape[0] != profile.total:
        raise StateFileError(f'dims {profile.dims} need a {profile.total}x{profile.total} matrix, '
                             f'got {pairs.shape[0]}x{pairs.shape[1]}')
    return MultiState.from_matrix(pairs[:, :, 0] + 1j * pairs[:, :, 1], profile)


def state_to_json(rho: MultiState) -> Dict[str, Any]:
    matrix = rho.matrix
    return {'dims': list(rho.profile.dims),
            'parties': list(rho.profile.parties),
            'matrix': [[[float(entry.real), float(entry.imag)] for entry in row] for row in matrix]}


def named_state(name: str) -> MultiState:
    """
    Builds a state from a short name: phi2, phi3, phi:K, iso:K:F, werner:d:p or mixed:d1:d2.
    """
    parts = name.split(':')
    try:
        if name in ('phi2', 'phi3'):
            return max_entangled(int(name[-1]))
        if parts[0] == 'phi' and len(parts) == 2:
            return max_entangled(int(parts[1]))
        if parts[0] == 'iso' and len(parts) == 3:
            return isotropic(IsotropicParams(int(parts[1]), float(parts[2])))
        if parts[0] == 'werner' and len(parts) == 3:
            return werner(int(parts[1]), float(parts[2]))
        if parts[0] == 'mixed' and len(parts) == 3:
            return maximally_mixed(DimProfile((int(parts[1]), int(parts[2]))))
    except ValueError as error:
        raise StateFileError(f'Cannot build the named state "{name}": {error}') from error
    raise StateFileError(f'Unknown named state "{name}"')


def resolve_state(job: JobSpec) -> MultiState:
    if job.state is not None:
        return load_state(job.state)
    if job.named is not None:
        return named_state(job.named)
    raise StateFileError('The job needs --state or --named')
