# sievebrush documentation build configuration

import os
import sys

sys.path.insert(0, os.path.abspath("../src"))

extensions = ["sphinx.ext.autodoc", "sphinx.ext.viewcode"]
templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "sievebrush"
copyright = "2026, James Turk"
version = "0.1"
release = "0.1.0"

exclude_patterns = ["_build"]
pygments_style = "sphinx"

html_theme = "default"
html_static_path = ["_static"]
htmlhelp_basename = "sievebrushdoc"

latex_documents = [
    ("index", "sievebrush.tex", "sievebrush Documentation", "James Turk", "manual"),
]
man_pages = [("index", "sievebrush", "sievebrush Documentation", ["James Turk"], 1)]
