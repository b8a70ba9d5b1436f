# -*- coding: utf-8 -*-
#
# alpha_discovery documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import sys
import os

# The package lives two directories up from docs/source.
sys.path.insert(0, os.path.abspath('../..'))

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc', 'numpydoc',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'alpha_discovery'
copyright = u'alpha_discovery contributors'
author = u'alpha_discovery contributors'

version = u'1.0'
release = u'1.0'

language = None
exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

# numpydoc would otherwise list every dataclass field twice.
numpydoc_show_class_members = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'alpha_discoverydoc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
    (master_doc, 'alpha_discovery.tex', u'alpha\\_discovery Documentation',
     author, 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'alpha-discovery', u'alpha_discovery Documentation',
     [author], 1)
]

# -- Options for Texinfo output -------------------------------------------

texinfo_documents = [
    (master_doc, 'alpha_discovery', u'alpha_discovery Documentation',
     author, 'alpha_discovery',
     'Alpha feature construction with genetic programming and '
     'correlation-trained networks.', 'Miscellaneous'),
]
