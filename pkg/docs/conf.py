#
# dqrng documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.
#
import os
import sys

# The package lives one directory up.
sys.path.insert(0, os.path.abspath(".."))
from dqrng import about

# -- General configuration ------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.napoleon",
    "sphinx_autodoc_typehints",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "dqrng"
copyright = "2025, The dqrng developers"

version = about.__version__
release = about.__version__

exclude_patterns = ["_build"]
pygments_style = "sphinx"

# -- Options for HTML output ----------------------------------------------

html_theme = "default"
try:
    import sphinx_rtd_theme

    html_theme = "sphinx_rtd_theme"
    html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
except ImportError:
    pass

htmlhelp_basename = "dqrngdoc"

# -- Options for manual page output ---------------------------------------

man_pages = [
    ("index", "dqrng", "dqrng Documentation", ["The dqrng developers"], 1),
]
