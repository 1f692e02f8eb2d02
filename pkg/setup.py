import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="hfsltool",
    version="0.1.0",
    description="Split and bandwidth optimisation for hybrid federated "
                "split learning",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['tests', 'tests.*']),
    package_data={'hfsltool': ['scenarios/*.json', 'scenarios/*.yaml']},
    python_requires='>=3.9',
    install_requires=[
        'numpy',
        'funcy',
        'attrs',
        'pandas',
        'PyYAML',
        'pymoo',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': ['hfsltool = hfsltool.cli:main'],
    },
)
