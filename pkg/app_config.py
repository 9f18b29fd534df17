#!/usr/bin/env python3
"""
Application paths.
Follows the XDG Base Directory standard with an environment variable override.
"""

import os
from pathlib import Path
from typing import Optional

# Application name
APP_NAME = "gikit"

# Artifact directory (manifests, embedding files, reports)
# Can be overridden with GIKIT_OUTPUT_DIR environment variable
# Default: ~/.local/share/gikit
GIKIT_OUTPUT_DIR = os.environ.get(
    "GIKIT_OUTPUT_DIR",
    os.path.expanduser(f"~/.local/share/{APP_NAME}")
)


def output_dir(override: Optional[str] = None) -> Path:
    """Resolve the artifact directory (--output-dir > GIKIT_OUTPUT_DIR > default) and create it"""
    path = Path(override) if override else Path(GIKIT_OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path
