from setuptools import setup
from specshift import __version__

setup(
    name='specshift',
    version=__version__,
    packages=['specshift'],
    install_requires=[
        'click',
        'numpy',
        'scipy',
        'pandas',
        'sqlalchemy',
        'alembic',
    ],
    extras_require={
        'tests': [
            'pytest',
            'hypothesis',
        ],
    },
    entry_points={
        'console_scripts': [
            'specshift=specshift.cli:cli',
        ],
    },
)
