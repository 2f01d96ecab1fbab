# -*- coding: utf-8 -*-
#
# Humsearch documentation build configuration file.

import os
import sys

sys.path.insert(0, os.path.abspath(os.path.join("..", "..", "src")))

import humsearch  # noqa: E402

extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.autosummary',
              'sphinx.ext.doctest',
              'sphinx.ext.mathjax',
              'sphinx.ext.viewcode',
              'numpydoc']

templates_path = ['.templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'Humsearch'
copyright = u'2026, the humsearch developers'
author = u'the humsearch developers'

version = humsearch.__version__
release = humsearch.__version__

language = 'en'
exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

html_theme = 'alabaster'
html_static_path = ['.static']
html_sidebars = {
    '**': [
        'relations.html',
        'searchbox.html',
    ]
}
htmlhelp_basename = 'Humsearchdoc'

latex_documents = [
    (master_doc, 'Humsearch.tex', u'Humsearch Documentation',
     author, 'manual'),
]

man_pages = [
    (master_doc, 'humsearch', u'Humsearch Documentation',
     [author], 1)
]

numpydoc_show_class_members = False
