"""
Tests for the solver configuration file.
"""

from config_file_parser import CONFIG_FILE_NAME, SolverConfigParser
from data.settings_data_storage import default_settings


def test_default_file_is_created(tmp_path):
    assert not SolverConfigParser.config_file_exists(str(tmp_path))
    parser = SolverConfigParser(str(tmp_path))
    assert (tmp_path / CONFIG_FILE_NAME).exists()
    assert parser.parse_config() == default_settings()


def test_values_are_read(tmp_path):
    (tmp_path / CONFIG_FILE_NAME).write_text('[CONE_SOLVER]\nsolver = scs\n\n[PROTOCOLS]\nfidelity_threshold = 0.9\n',
                                             encoding='utf-8')
    settings = SolverConfigParser(str(tmp_path)).parse_config()
    assert settings.cone.solver == 'SCS'
    assert settings.protocols.fidelity_threshold == 0.9
    assert settings.protocols.y_grid_points == default_settings().protocols.y_grid_points
    assert settings.limits == default_settings().limits
