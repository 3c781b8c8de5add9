"""soclang: a DSL for modeling SoC security, with a symbolic-execution
verifier that proves scenarios or reconstructs concrete attack traces."""

from .parser import parse_program
from .typecheck import check_program
from .elaborate import elaborate

__version__ = "0.1.0"

__all__ = ["parse_program", "check_program", "elaborate", "__version__"]
