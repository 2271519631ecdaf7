# setuptools build script for ola.
#
# The console script entry point is ola:console_main, the package is ola_core and
# the synthetic runtime profile ships in data/.

from setuptools import setup

from ola_core import version as cli_version


setup(
    name="ola",
    version=cli_version.version_string,
    description=("Distribution-aware polynomial replacement of activation "
                 "functions under a private-inference runtime budget"),
    long_description=open("README.rst").read(),
    license="GPLv3",
    packages=["ola_core"],
    py_modules=["ola"],
    data_files=[("data", ["data/synthetic_profile_19.csv"])],
    python_requires=">=3.8",
    install_requires=["numpy",
                      "scipy",
                      "progressbar2"],
    extras_require={"test": ["pytest",
                             "hypothesis"]},
    entry_points={"console_scripts": ["ola = ola:console_main"]},
)
