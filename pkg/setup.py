import re
from setuptools import setup
import pathlib

here = pathlib.Path(__file__).parent.resolve()

# Version string from constants.py
VERSION_FILE = here / "src" / "sperimeter" / "constants.py"
LAB_VERSION = re.search(r'LAB_VERSION = "([^"]+)"', VERSION_FILE.read_text(encoding="utf-8")).group(1)

# Get the long description from the README file
long_description = (here / "README.md").read_text(encoding="utf-8")

setup(
    name="sperimeter-lab",
    version=LAB_VERSION,
    description="Discrete laboratory for fractional perimeters, nonlocal minimal surfaces and their boundary behavior.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
    ],
    keywords="fractional perimeter, nonlocal minimal surfaces, min-cut",
    package_dir={"": "src"},
    packages=["sperimeter"],
    package_data={"sperimeter": ["schemas/*.json"]},
    python_requires=">=3.11, <4",
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "PyMaxflow>=1.3",
        "jsonschema>=4.17",
    ],
    entry_points={
        "console_scripts": ["sperimeter=sperimeter.cli:main"],
    },
    license='MIT License',
)
