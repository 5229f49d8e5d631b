# -*- coding: utf-8 -*-
#
# Pincer documentation build configuration file.
import os
import sys

import sphinx_rtd_theme

sys.path.insert(0, os.path.abspath('..'))

project = u'Pincer'
copyright = u'2017-2026, Pincer contributors'
version = '0.3'
release = '0.3.0'

autoclass_content = 'class'
exclude_patterns = ['build/html/README.rst', '.DS_Store', 'Thumbs.db']
html_static_path = []
html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
master_doc = 'index'
modindex_common_prefix = ['pincer.']
pygments_style = 'sphinx'
source_suffix = '.rst'
templates_path = ['_templates']

extensions = [
    'sphinx.ext.autodoc',
]
