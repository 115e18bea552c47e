"""Exception hierarchy.

Every error raised on bad input derives from :class:`TelenowError`; the CLI
maps these to exit status 1.
"""

from __future__ import annotations

from typing import Optional, Sequence


class TelenowError(Exception):
    """Base class for all domain errors."""


class InvalidValue(TelenowError, ValueError):
    """A value violates a domain invariant."""


class InputError(TelenowError):
    """A problem located in an input file.

    ``line`` is 1-based and counts the header as line 1.
    """

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.message = message
        self.line = line
        self.path = path
        super().__init__(self._render())

    def _render(self) -> str:
        where = ""
        if self.path is not None and self.line is not None:
            where = f"{self.path}:{self.line}: "
        elif self.path is not None:
            where = f"{self.path}: "
        elif self.line is not None:
            where = f"line {self.line}: "
        return where + self.message

    def at(self, path: str) -> "InputError":
        self.path = path
        self.args = (self._render(),)
        return self


class MissingColumn(InputError):
    def __init__(self, name: str, line: int = 1, path: Optional[str] = None):
        self.name = name
        super().__init__(f"missing column {name!r}", line, path)


class MalformedRow(InputError):
    pass


class UnknownMunicipality(InputError):
    def __init__(self, code: str, line: int, path: Optional[str] = None):
        self.code = code
        super().__init__(f"municipality code {code!r} not in municipality map", line, path)


class NegativeVolume(InputError):
    pass


class BadDate(InputError):
    pass


class DuplicateKey(InputError):
    def __init__(self, key, line: int, path: Optional[str] = None):
        self.key = key
        super().__init__(f"duplicate key {key}", line, path)


class ShareOutOfRange(InputError):
    pass


class UnknownRegion(InputError):
    def __init__(self, name: str, line: int, path: Optional[str] = None):
        self.name = name
        super().__init__(f"unknown region {name!r}", line, path)


class DuplicateCode(InputError):
    def __init__(self, code: str, line: int, path: Optional[str] = None):
        self.code = code
        super().__init__(f"municipality code {code!r} mapped to conflicting regions", line, path)


class MissingCombination(InputError):
    def __init__(self, region, sex, path: Optional[str] = None):
        self.region = region
        self.sex = sex
        super().__init__(f"no row for ({region}, {sex})", None, path)


# aggregation


class EmptyQuarter(TelenowError):
    pass


class MissingCell(TelenowError):
    def __init__(self, only_mobility: Sequence, only_lfs: Sequence):
        self.only_mobility = list(only_mobility)
        self.only_lfs = list(only_lfs)
        parts = []
        if self.only_mobility:
            parts.append("no LFS row for: " + ", ".join(_fmt_key(k) for k in self.only_mobility))
        if self.only_lfs:
            parts.append("no mobility for: " + ", ".join(_fmt_key(k) for k in self.only_lfs))
        super().__init__("; ".join(parts))

    @property
    def keys(self) -> list:
        return self.only_mobility + self.only_lfs


# regression


class NonPositiveMobility(TelenowError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"mobility must be positive for log transform at {_fmt_key(key)}")


class MissingTeleworking(TelenowError):
    pass


class RankDeficient(TelenowError):
    def __init__(self, labels: Sequence[str]):
        self.labels = list(labels)
        super().__init__("design matrix is rank deficient; dependent columns: " + ", ".join(self.labels))


class TooFewRows(TelenowError):
    pass


class UnknownDummy(TelenowError):
    def __init__(self, region, sex):
        self.region = region
        self.sex = sex
        super().__init__(f"fit has no coefficient for {region}:{sex}")


# analysis


class TooFewPoints(TelenowError):
    pass


class ZeroVariance(TelenowError, ValueError):
    pass


class LengthMismatch(TelenowError, ValueError):
    pass


class MissingGroup(TelenowError):
    pass


# nowcast


class MissingMobility(TelenowError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no mobility for {_fmt_key(key)}")


class MissingEmploymentBase(TelenowError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no employment available for {_fmt_key(key)}")


class MissingSex(TelenowError):
    def __init__(self, region, sex=None):
        self.region = region
        super().__init__(f"region {region} lacks a prediction for sex {sex}")


def _fmt_key(key) -> str:
    if isinstance(key, tuple):
        return "(" + ", ".join(str(k) for k in key) + ")"
    return str(key)
