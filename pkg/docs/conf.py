import os
import sys

sys.path.insert(0, os.path.abspath("../src"))

import pyroomgp  # noqa: E402

# -- Project information -----------------------------------------------------

project = "pyroomgp"
copyright = "2026, pyroomgp contributors"
author = "pyroomgp contributors"

version = pyroomgp.__version__
release = pyroomgp.__title__

# -- General configuration ---------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.autosectionlabel",
    "myst_parser",
    "sphinx_copybutton",
    "sphinx_design",
    "sphinx_iconify",
]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "scipy": ("https://docs.scipy.org/doc/scipy", None),
}

templates_path = ["_templates"]
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]

suppress_warnings = [
    "autodoc",
    "myst.xref_ambiguous",
    "autosectionlabel.*",
]

# Autodoc configuration
add_module_names = False
autodoc_typehints = "both"
autodoc_member_order = "bysource"
autosectionlabel_prefix_document = True
toc_object_entries_show_parents = "hide"

# MyST opts
myst_enable_extensions = [
    "colon_fence",
    "dollarmath",
    "substitution",
]

myst_heading_anchors = 3

myst_substitutions = {
    "version": version,
}

# -- Options for copy button -------------------------------------------------

copybutton_prompt_text = r">>> |\.\.\. |\$ "
copybutton_prompt_is_regexp = True

# -- Options for HTML output -------------------------------------------------

html_theme = "shibuya"
html_title = f"{release}"

html_theme_options = {
    "dark_code": True,
    "nav_links": [
        {
            "title": "PyPI",
            "url": "https://pypi.org/project/pyroomgp/",
            "external": True,
        },
    ],
}
