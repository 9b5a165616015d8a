# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

project = "semcom.via"
author = "The semcom developers"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.napoleon",
    "sphinx_click",
]

master_doc = "index"
exclude_patterns = ["_build", "README.rst"]
