# Configuration file for the Sphinx documentation builder.
#
# For the full list of built-in configuration values, see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Project information -----------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('../'))  # project root


project = 'AdmgToolkit'
copyright = '2026, AdmgToolkit developers'
author = 'AdmgToolkit developers'
release = '2026'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',           # documentation from docstrings
    'sphinx.ext.napoleon',          # Google and NumPy style docstrings
    'sphinx_autodoc_typehints',     # type hints
]

templates_path = ['_templates']
exclude_patterns = []


# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']
