"""Model-independent types for the three-measurement dephasing protocol.

A qubit prepared along +x is measured in the x basis at times 0, t and
t + tau, giving outcomes x, y, z in {+1, -1}.  Conditioned on the middle
outcome y, the statistics of the outer pair are fixed by three moments,

    f_t     = <x y | y>     past correlation over the first interval,
    f_tau   = <z y | y>     future correlation over the second interval,
    f_joint = <z x | y>     joint moment coupling past and future,

through the probability table

    P(z, x | y) = (1 + x*y*f_t + z*y*f_tau + z*x*f_joint) / 4.

The conditional past-future correlation is the connected combination

    C_pf = f_joint - f_t * f_tau,

which vanishes identically when the evolution between measurements is
memoryless.  This module owns the outcome bookkeeping, the moment and table
containers with their validity constraints, and the C_pf combination rules.
Dynamical models that produce the moments live in the sibling modules.

Conventions: outcomes are the integers +1 and -1 (the measured eigenvalues),
and the conditioning outcome y is always explicit in table constructors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMomentSet, InvalidProbabilityTable

OUTCOMES: tuple[int, int] = (+1, -1)

# Absolute tolerance on table normalization and marginal consistency.
NORMALIZATION_TOL = 1e-12
# Entries may fall outside [0, 1] by at most this much before rejection;
# violations inside the band are clipped to the boundary.
ENTRY_TOL = 1e-9

METHOD_TAGS = ("analytic", "montecarlo", "oracle")


def validate_outcome(value: int, name: str = "outcome") -> int:
    """Return ``value`` as a plain int after checking it is +1 or -1."""
    v = int(value)
    if v != value or v not in OUTCOMES:
        raise ValueError(f"{name} must be +1 or -1, got {value!r}")
    return v


@dataclass(frozen=True)
class OutcomeTriple:
    """One realization (x, y, z) of the three-measurement record."""

    x: int
    y: int
    z: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, validate_outcome(getattr(self, name), name))


@dataclass(frozen=True)
class TimePair:
    """Measurement intervals (t, tau), both non-negative and finite."""

    t: float
    tau: float

    def __post_init__(self) -> None:
        for name in ("t", "tau"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0.0:
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
            object.__setattr__(self, name, v)


def joint_moment_bounds(f_t: float, f_tau: float) -> tuple[float, float]:
    """Range of f_joint compatible with non-negative table entries.

    For given marginal moments the table is a valid probability distribution
    iff  -1 + |f_t + f_tau| <= f_joint <= 1 - |f_t - f_tau|.
    """
    lo = -1.0 + abs(f_t + f_tau)
    hi = 1.0 - abs(f_t - f_tau)
    if lo > hi:
        # mathematically lo == hi here (one moment has magnitude 1); the two
        # roundings can invert the degenerate window by an ulp
        lo = hi = 0.5 * (lo + hi)
    return lo, hi


@dataclass(frozen=True)
class MomentSet:
    """The three conditional moments (f_t, f_tau, f_joint).

    Each moment must be finite and lie in [-1, +1].  Whether the triple is
    jointly realizable as a probability table is only decided at table
    construction time; see :func:`joint_moment_bounds`.
    """

    f_t: float
    f_tau: float
    f_joint: float

    def __post_init__(self) -> None:
        for name in ("f_t", "f_tau", "f_joint"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidMomentSet(f"{name} must be finite, got {v!r}")
            if abs(v) > 1.0 + 1e-12:
                raise InvalidMomentSet(f"{name} must lie in [-1, +1], got {v!r}")
            object.__setattr__(self, name, v)


def cpf_from_moments(moments: MomentSet) -> float:
    """Connected correlation C_pf = f_joint - f_t * f_tau."""
    return moments.f_joint - moments.f_t * moments.f_tau


@dataclass(frozen=True)
class CpfProbabilityTable:
    """Conditional distribution P(z, x | y) for one value of y.

    ``entries`` maps (z, x) to a probability; ``marginal_x`` and
    ``marginal_z`` are the implied single-outcome conditionals P(x|y) and
    P(z|y).  Construction validates positivity, normalization to within
    ``NORMALIZATION_TOL`` and marginal consistency.
    """

    y: int
    entries: dict[tuple[int, int], float]
    marginal_x: dict[int, float] = field(default_factory=dict)
    marginal_z: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "y", validate_outcome(self.y, "y"))
        keys = {(z, x) for z in OUTCOMES for x in OUTCOMES}
        if set(self.entries) != keys:
            raise InvalidProbabilityTable(
                f"entries must cover all four (z, x) pairs, got {sorted(self.entries)}"
            )
        entries = {k: float(v) for k, v in self.entries.items()}
        for k, p in entries.items():
            if not math.isfinite(p) or p < 0.0 or p > 1.0:
                raise InvalidProbabilityTable(f"entry {k} out of [0, 1]: {p!r}")
        total = sum(entries.values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise InvalidProbabilityTable(f"entries sum to {total!r}, not 1")
        mx = {x: entries[(+1, x)] + entries[(-1, x)] for x in OUTCOMES}
        mz = {z: entries[(z, +1)] + entries[(z, -1)] for z in OUTCOMES}
        if self.marginal_x:
            for x in OUTCOMES:
                if abs(float(self.marginal_x[x]) - mx[x]) > NORMALIZATION_TOL:
                    raise InvalidProbabilityTable(
                        f"marginal_x[{x:+d}] inconsistent with entry sums"
                    )
        if self.marginal_z:
            for z in OUTCOMES:
                if abs(float(self.marginal_z[z]) - mz[z]) > NORMALIZATION_TOL:
                    raise InvalidProbabilityTable(
                        f"marginal_z[{z:+d}] inconsistent with entry sums"
                    )
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "marginal_x", mx)
        object.__setattr__(self, "marginal_z", mz)

    def moment_set(self) -> MomentSet:
        """Recover (f_t, f_tau, f_joint) from the table.

        The explicit pairwise sums keep the recovery bitwise invariant under
        y -> -y, which permutes the entries as (z, x) -> (-z, -x).
        """
        e = self.entries
        f_t = self.y * (self.marginal_x[+1] - self.marginal_x[-1])
        f_tau = self.y * (self.marginal_z[+1] - self.marginal_z[-1])
        f_joint = (e[(+1, +1)] + e[(-1, -1)]) - (e[(+1, -1)] + e[(-1, +1)])
        return MomentSet(f_t=f_t, f_tau=f_tau, f_joint=f_joint)


def cpf_probability_table(moments: MomentSet, y: int) -> CpfProbabilityTable:
    """Build P(z, x | y) from the three moments.

    Raises InvalidMomentSet if any implied entry falls outside [0, 1] by more
    than ``ENTRY_TOL``; smaller excursions (floating-point dust from upstream
    engines) are clipped to the boundary.
    """
    y = validate_outcome(y, "y")
    entries: dict[tuple[int, int], float] = {}
    for z in OUTCOMES:
        for x in OUTCOMES:
            p = 0.25 * (
                1.0
                + x * y * moments.f_t
                + z * y * moments.f_tau
                + z * x * moments.f_joint
            )
            if p < -ENTRY_TOL or p > 1.0 + ENTRY_TOL:
                raise InvalidMomentSet(
                    f"moments {moments} imply P(z={z:+d}, x={x:+d} | y={y:+d}) = {p!r}"
                )
            entries[(z, x)] = min(max(p, 0.0), 1.0)
    return CpfProbabilityTable(y=y, entries=entries)


def cpf_from_table(table: CpfProbabilityTable) -> float:
    """C_pf evaluated directly from a probability table.

    Equals <zx> - <z><x> conditioned on the table's y.  Going through the
    recovered moments keeps the value bitwise invariant under y -> -y,
    which permutes the entries as (z, x) -> (-z, -x).
    """
    return cpf_from_moments(table.moment_set())


@dataclass(frozen=True)
class Estimate:
    """A Monte Carlo estimate: value, standard error and sample count."""

    value: float
    std_error: float
    n_samples: int

    def __post_init__(self) -> None:
        v = float(self.value)
        se = float(self.std_error)
        n = int(self.n_samples)
        if not math.isfinite(v):
            raise ValueError(f"value must be finite, got {v!r}")
        if not math.isfinite(se) or se < 0.0:
            raise ValueError(f"std_error must be finite and >= 0, got {se!r}")
        if n < 1:
            raise ValueError(f"n_samples must be >= 1, got {n}")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "std_error", se)
        object.__setattr__(self, "n_samples", n)

    def __str__(self) -> str:
        return f"{self.value:.6g} +/- {self.std_error:.3g} (n={self.n_samples})"


@dataclass(frozen=True)
class CpfSurface:
    """C_pf evaluated on a cartesian (t, tau) grid.

    ``values[i, j]`` corresponds to (t_grid[i], tau_grid[j]).  Estimated
    surfaces carry elementwise standard errors and a sample count; exact
    surfaces leave both as None.
    """

    t_grid: np.ndarray
    tau_grid: np.ndarray
    values: np.ndarray
    model_tag: str
    method_tag: str
    std_errors: np.ndarray | None = None
    n_samples: int | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.t_grid, dtype=float)
        u = np.asarray(self.tau_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        for name, g in (("t_grid", t), ("tau_grid", u)):
            if g.ndim != 1 or g.size == 0:
                raise ValueError(f"{name} must be a non-empty 1-d array")
            if not np.all(np.isfinite(g)) or np.any(g < 0.0):
                raise ValueError(f"{name} must be finite and >= 0")
            if g.size > 1 and not np.all(np.diff(g) > 0.0):
                raise ValueError(f"{name} must be strictly increasing")
        if v.shape != (t.size, u.size):
            raise ValueError(f"values shape {v.shape} != ({t.size}, {u.size})")
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > 1.0 + 1e-9):
            raise ValueError("values must be finite and lie in [-1, +1]")
        if self.method_tag not in METHOD_TAGS:
            raise ValueError(f"method_tag must be one of {METHOD_TAGS}")
        se = self.std_errors
        if se is not None:
            se = np.asarray(se, dtype=float)
            if se.shape != v.shape or not np.all(np.isfinite(se)) or np.any(se < 0):
                raise ValueError("std_errors must match values and be >= 0")
        n = None if self.n_samples is None else int(self.n_samples)
        if n is not None and n < 1:
            raise ValueError("n_samples must be >= 1")
        object.__setattr__(self, "t_grid", t)
        object.__setattr__(self, "tau_grid", u)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "std_errors", se)
        object.__setattr__(self, "n_samples", n)
