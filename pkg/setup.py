from setuptools import find_packages, setup

setup(
    name="chainads",
    version="0.1.0",
    description='Authenticated Boolean range queries over an append-only block store',
    python_requires=">=3.9.1",
    include_package_data=True,
    install_requires=["numpy", "pympler", "py_ecc", "pytest", "hypothesis"],
    packages=find_packages(exclude=["tests"]),
    entry_points={"console_scripts": ["chainads=chainads.cli:main"]}
)
