# Sphinx configuration for the qareuse documentation.

import os
import sys

sys.path.insert(0, os.path.abspath('..'))

project = 'qareuse'
copyright = '2025, Fawad Ali'
author = 'Fawad Ali'
release = '0.1.0'

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx_autodoc_typehints',
    'sphinx_copybutton',
]

exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'
html_theme_options = {
    'collapse_navigation': False,
    'navigation_depth': 3,
}

# Docstrings mix Google sections and :ivar: field lists
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_use_ivar = True

autodoc_default_options = {
    'member-order': 'bysource',
}
# runtime dependencies are not needed to build the API pages
autodoc_mock_imports = ['lxml', 'git', 'click', 'tqdm', 'tabulate', 'requests']

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
}

copybutton_prompt_text = r">>> |\$ "
copybutton_prompt_is_regexp = True
