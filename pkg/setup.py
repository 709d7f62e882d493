"""Setup script for gsclosure, surface closure of Gaussian splats."""
from setuptools import setup, find_packages


# refer to http://python-packaging.readthedocs.io/en/latest/metadata.html
# the numba kernels in `gsclosure.ops` compile on first use
setup(
    name="gsclosure",
    version="0.1.0",
    description="""Constant-field flux of Gaussian splat surfaces for """
                """scoring, refining and evaluating 3D boxes""",
    packages=find_packages(exclude=["tests", "experiments"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "scipy>=1.8",
        "scikit-learn",
        "tqdm",
        "numba",
        "matplotlib",
        "plyfile",
        "tomli; python_version < '3.11'",
    ],
    extras_require={
        "tests": ["pytest"],
    },
    entry_points={
        "console_scripts": ["gsclosure = gsclosure.cli:main"],
    },
)
