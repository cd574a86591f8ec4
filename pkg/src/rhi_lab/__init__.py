"""rhi_lab: exact verification of sharp reverse Holder inequalities for
one-sided and dyadic maximal operators on finitely-described weights."""

from .core import (
    ConstantKind,
    ConstantReport,
    Cube,
    DomainError,
    InternalConsistencyError,
    Interval,
    ParseError,
    RangeError,
    Real,
    StepWeight,
    Verdict,
    average,
    power_average,
    restrict,
)

__version__ = "0.1.0"
