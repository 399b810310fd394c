"""Error taxonomy shared across the package.

Every error carries the process exit code the CLI maps it to:
2 = usage/configuration, 3 = data format, 4 = computation.
"""

from __future__ import annotations


class DdigError(Exception):
    """Base class for all package errors."""

    exit_code = 4
    display_name: str | None = None

    def oneline(self) -> str:
        """Single-line machine-parseable rendering: ``<Name>: <detail>``."""
        detail = " ".join(str(self).split())
        return f"{self.display_name or type(self).__name__}: {detail}"


class ConfigError(DdigError):
    """Invalid configuration or incompatible inputs (exit 2)."""

    exit_code = 2


class DataFormatError(DdigError):
    """Malformed or inconsistent on-disk data (exit 3)."""

    exit_code = 3


class ComputationError(DdigError):
    """Valid inputs that cannot be computed on (exit 4)."""

    exit_code = 4


# -- embedstore -----------------------------------------------------------

class MagicMismatch(DataFormatError):
    pass


class VersionUnsupported(DataFormatError):
    pass


class TruncatedPayload(DataFormatError):
    pass


class NonFiniteValue(DataFormatError):
    def __init__(self, row: int, message: str | None = None):
        self.row = row
        super().__init__(message or f"non-finite value at row {row}")


class ManifestMismatch(DataFormatError):
    pass


class IoFailure(DataFormatError):
    pass


# -- decompose ------------------------------------------------------------

class IndivisibleGrid(ConfigError):
    pass


class MalformedMask(DataFormatError):
    pass


# -- manifold -------------------------------------------------------------

class TooFewPoints(ComputationError):
    pass


class DimensionMismatch(ComputationError):
    pass


class ZeroDenominator(ComputationError):
    pass


# -- analysis -------------------------------------------------------------

class SingleRegion(ComputationError):
    pass


class ManifestNotFound(ConfigError):
    """Manifest path missing at invocation time.

    Usage-level error (exit 2), reported under the manifest contract's
    name so scripted callers match one string for manifest trouble.
    """

    display_name = "ManifestMismatch"


class ConfigMismatch(ConfigError):
    pass
