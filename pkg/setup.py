"""Welcome to install sphverify.

Just use `pip install .` to install.
"""
import os

from setuptools import find_packages, setup


def readme():
    with open(os.path.join(this_directory, 'README.md'), encoding="utf8") as f:
        return f.read()


if __name__ == '__main__':
    this_directory = os.path.abspath(os.path.dirname(__file__))

    tests_require = ['pytest-sugar', 'pytest-cov',
                     "codecov>=1.4.0", "pytest-console-scripts",
                     "pytest-mock", "pytest-benchmark",
                     ]
    setup(name='sphverify',
          description='Convergence verification of SPH boundary conditions',
          keywords="SPH boundary conditions convergence manufactured solutions",
          packages=find_packages(),
          python_requires='>=3.7',
          install_requires=[
              'numpy>=1.17', 'scipy>=1.4', 'sympy>=1.5',
              'matplotlib', 'scour', 'tqdm',
              'coloredlogs',
              'pandas',
          ],
          entry_points={'console_scripts': [
              'sphverify=sphverify.commandline:_commandline',
          ]
          },
          test_suite='sphverify.test',
          tests_require=tests_require,
          extras_require={
              "test": tests_require,
              "docs": ['sphinx-markdown-builder'],
          },
          setup_requires=[
              'setuptools>=18.0',
              'pytest-runner',
          ],
          package_data={
              'sphverify': ['test/test.json',
                            ],
          },
          long_description=readme(),
          long_description_content_type='text/markdown',
          classifiers=[
              "Natural Language :: English",
              "Operating System :: POSIX :: Linux",
              "Operating System :: Microsoft :: Windows",
              "Programming Language :: Python :: 3.7",
              "Programming Language :: Python :: 3.8",
              "Topic :: Scientific/Engineering :: Physics",
              "Topic :: Scientific/Engineering :: Mathematics",
              "Topic :: Software Development :: Libraries :: Python Modules",
          ],
          zip_safe=True,
          version="1.0.0",
          )
