"""
Sets up the virtual environment.
"""

import subprocess
import sys


def install(package_name: str) -> None:
    subprocess.check_call([sys.executable, '-m', 'pip', 'install', package_name])


if __name__ == '__main__':
    if len(sys.argv) > 1:
        # Invoked by pip/setuptools (e.g. `pip install -e .`): build package metadata.
        from setuptools import setup

        with open('package_list.txt') as packages:
            requirements = [p for p in packages.read().split() if p != 'pytest']
        setup(
            name='sepbracket',
            version='0.1.0',
            py_modules=[
                'cone_solver', 'config_file_parser', 'hypotest', 'input_module', 'main',
                'measures', 'protocols', 'saving_module', 'sep_geometry', 'states', 'tensor_core',
            ],
            packages=['data'],
            install_requires=requirements,
            python_requires='>=3.10',
        )
    else:
        with open('package_list.txt') as packages:
            for package in packages.read().split():
                install(package)
