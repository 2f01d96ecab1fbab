# -*- coding: utf-8 -*-
from setuptools import find_packages, setup
from glob import glob
from os.path import splitext, basename

with open("README.md") as fh:
    long_description = fh.read()

__version__ = '0.1.0'

setup(name='humsearch',
      version=__version__,
      license='GPL-3.0',
      description='Melody fingerprinting, fragment alignment and '
                  'query-by-humming retrieval',
      long_description=long_description,
      long_description_content_type='text/markdown',
      packages=find_packages('src'),
      package_dir={'': 'src'},
      py_modules=[splitext(basename(path))[0] for path in glob('src/*.py')],
      include_package_data=True,
      keywords='query-by-humming cover-song audio-fingerprinting cqt '
               'nearest-neighbour',
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Intended Audience :: Science/Research',
          'Intended Audience :: Developers',
          'License :: OSI Approved :: GNU General Public License (GPL)',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.8',
          'Programming Language :: Python :: 3.9',
          'Programming Language :: Python :: 3.10',
          'Programming Language :: Python :: 3.11',
          'Programming Language :: Python :: 3.12',
          'Topic :: Multimedia :: Sound/Audio :: Analysis'],
      python_requires='>=3.8',
      install_requires=['numpy>=1.20', 'scipy', 'librosa>=0.10',
                        'soundfile', 'scikit-learn'],
      extras_require={'dev': ['pytest', 'hypothesis', 'tox']},
      tests_require=['pytest', 'hypothesis'],
      entry_points={'console_scripts': ['humsearch = humsearch.cli:main']})
