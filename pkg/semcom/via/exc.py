# Copyright (C) 2026  The semcom developers
# See the AUTHORS file at the top-level directory of this distribution
# License: GNU General Public License version 3, or any later version
# See top-level LICENSE file for more information

from typing import Optional


class ViaError(Exception):
    pass


class InvalidParameterError(ViaError, ValueError):
    """Raised when a probability or policy parameter is out of its domain."""

    pass


class DivergenceError(ViaError, ArithmeticError):
    """Raised when a closed-form average or series does not converge."""

    pass


class UnsupportedPolicyError(ViaError, NotImplementedError):
    """Raised when no closed form exists for the requested policy."""

    pass


class ReducibleChainError(ViaError):
    """Raised when a chain has more than one closed communicating class."""

    pass


class NonConvergenceError(ViaError):
    """Raised when the stationary solver exhausts its iteration budget."""

    pass


class UnreachableConstraintError(InvalidParameterError):
    """Raised when the reconstruction-error constraint cannot be met by any
    sampling probability."""

    pass


class ConfigError(ViaError):
    """Raised on any invalid experiment configuration.

    ``path`` is the dotted location of the offending field and ``line`` its
    1-based line in the configuration file, when known.
    """

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        self.message = message
        self.path = path
        self.line = line
        super().__init__(str(self))

    def __str__(self) -> str:
        location = self.path or "<config>"
        if self.line is not None:
            location += f" (line {self.line})"
        return f"{location}: {self.message}"
