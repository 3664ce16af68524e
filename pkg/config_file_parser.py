"""
Utilities to parse the config file.
"""

import configparser
import os

from data.settings_data_storage import ColumnGenerationParameters, ConditionalGradientParameters, \
    ConeSolverParameters, HypothesisTestingParameters, LimitParameters, ProductSearchParameters, \
    ProtocolParameters, SolverSettings

CONFIG_FILE_NAME = 'solver.conf'


class SolverConfigParser:
    """
    A class that parses a configuration file
    for the solvers rather than utilizing hardcoded
    values. Makes tolerances and iteration limits
    easier to adjust over time.
    """

    def __init__(self, filepath: str = '.'):
        self.filepath = filepath
        if not self.config_file_exists(filepath):
            self.create_default_config(filepath)

    @staticmethod
    def create_default_config(filepath: str = '.'):
        """
        Creates a default configuration file
        from a set of default values, sized for
        local dimensions 2 to 3 and at most three copies.
        """
        solver_maker = configparser.ConfigParser()
        solver_maker['CONE_SOLVER'] = {
            'solver': 'CLARABEL',
            'fallback_solver': 'SCS',
            'max_iterations': '500',
            'max_program_dimension': '200'
        }
        solver_maker['PRODUCT_SEARCH'] = {
            'restarts': '32',
            'pricing_restarts': '8',
            'sweep_tolerance': '1e-9',
            'max_sweeps': '500'
        }
        solver_maker['CONDITIONAL_GRADIENT'] = {
            'max_iterations': '2000',
            'support_regularization': '1e-9',
            'corrective_every': '1',
            'max_atoms': '200'
        }
        solver_maker['COLUMN_GENERATION'] = {
            'max_rounds': '60',
            'patience': '3'
        }
        solver_maker['HYPOTHESIS_TESTING'] = {
            'b_grid_points': '64',
            'b_grid_floor': '-2.0',
            'golden_tolerance': '1e-4'
        }
        solver_maker['LIMITS'] = {
            'max_total_dimension': '100'
        }
        solver_maker['PROTOCOLS'] = {
            'fidelity_threshold': '0.99',
            'y_grid_points': '11'
        }
        with open(os.path.join(filepath, CONFIG_FILE_NAME), 'w') as configfile:
            solver_maker.write(configfile)

    @staticmethod
    def config_file_exists(filepath: str = '.') -> bool:
        """
        Determines whether or not a configuration file exists
        in the given path, which defaults to the directory
        which this program was executed.

        :param filepath: A given filepath.
        :return: A boolean value representing whether the file exists.
        """
        return os.path.exists(os.path.join(filepath, CONFIG_FILE_NAME))

    def parse_config(self) -> SolverSettings:
        """
        Parses the configuration file, and gets the relevant data.
        Missing sections or keys fall back to the defaults.

        :return: The SolverSettings gathered from every section.
        """

        def section(name: str) -> configparser.SectionProxy:
            if not solver_parser.has_section(name):
                solver_parser.add_section(name)
            return solver_parser[name]

        def parse_cone_solver(key: configparser.SectionProxy) -> ConeSolverParameters:
            """
            Parses the cone solver parameters in the provided key.

            :param key: A key that represents a map of cone solver parameters.
            :return: A dataclass of parsed cone solver parameters.
            """
            return ConeSolverParameters(solver=key.get('solver', 'CLARABEL').upper(),
                                        fallback_solver=key.get('fallback_solver', 'SCS').upper(),
                                        max_iterations=int(key.get('max_iterations', '500')),
                                        max_program_dimension=int(key.get('max_program_dimension', '200')))

        def parse_product_search(key: configparser.SectionProxy) -> ProductSearchParameters:
            return ProductSearchParameters(restarts=int(key.get('restarts', '32')),
                                           pricing_restarts=int(key.get('pricing_restarts', '8')),
                                           sweep_tolerance=float(key.get('sweep_tolerance', '1e-9')),
                                           max_sweeps=int(key.get('max_sweeps', '500')))

        def parse_conditional_gradient(key: configparser.SectionProxy) -> ConditionalGradientParameters:
            """
            Parses the relative-entropy descent parameters in the provided key.

            :param key: A key that represents a map of descent parameters.
            :return: A dataclass of parsed descent parameters.
            """
            return ConditionalGradientParameters(
                max_iterations=int(key.get('max_iterations', '2000')),
                support_regularization=float(key.get('support_regularization', '1e-9')),
                corrective_every=int(key.get('corrective_every', '1')),
                max_atoms=int(key.get('max_atoms', '200')))

        def parse_column_generation(key: configparser.SectionProxy) -> ColumnGenerationParameters:
            return ColumnGenerationParameters(max_rounds=int(key.get('max_rounds', '60')),
                                              patience=int(key.get('patience', '3')))

        def parse_hypothesis_testing(key: configparser.SectionProxy) -> HypothesisTestingParameters:
            return HypothesisTestingParameters(b_grid_points=int(key.get('b_grid_points', '64')),
                                               b_grid_floor=float(key.get('b_grid_floor', '-2.0')),
                                               golden_tolerance=float(key.get('golden_tolerance', '1e-4')))

        solver_parser = configparser.ConfigParser()
        solver_parser.read(os.path.join(self.filepath, CONFIG_FILE_NAME))
        limits = section('LIMITS')
        protocols = section('PROTOCOLS')
        return SolverSettings(
            cone=parse_cone_solver(section('CONE_SOLVER')),
            product_search=parse_product_search(section('PRODUCT_SEARCH')),
            conditional_gradient=parse_conditional_gradient(section('CONDITIONAL_GRADIENT')),
            column_generation=parse_column_generation(section('COLUMN_GENERATION')),
            hypothesis_testing=parse_hypothesis_testing(section('HYPOTHESIS_TESTING')),
            limits=LimitParameters(max_total_dimension=int(limits.get('max_total_dimension', '100'))),
            protocols=ProtocolParameters(fidelity_threshold=float(protocols.get('fidelity_threshold', '0.99')),
                                         y_grid_points=int(protocols.get('y_grid_points', '11'))))
