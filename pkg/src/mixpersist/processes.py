"""Process descriptions and evaluation grids."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

# kind -> (needs K, component kind, integrated)
# kind -> whether it has a second component
_KINDS = {
    "bm": False,
    "fbm": False,
    "rl": False,
    "ifbm": False,
    "mixed": True,
    "ccm": True,
    "imixed": True,
    "iccm": True,
    "mixed_rl": True,
}

PURE_KINDS = ("bm", "fbm", "rl", "ifbm")
INDEPENDENT_MIXTURES = ("mixed", "imixed", "mixed_rl")
CORRELATED_MIXTURES = ("ccm", "iccm")


class SpecError(ValueError):
    """Invalid process description."""


def _check_hurst(kind: str, value: float, name: str) -> None:
    if not math.isfinite(value):
        raise SpecError(f"{name} must be finite, got {value}")
    if kind == "rl":
        if value <= 0:
            raise SpecError(f"Riemann-Liouville {name} must be > 0, got {value}")
    elif not 0 < value < 1:
        raise SpecError(f"{name} must lie in (0, 1), got {value}")


@dataclass(frozen=True)
class ProcessSpec:
    """A Gaussian process family together with its parameters.

    Pure variants are ``bm``, ``fbm``, ``rl`` (Riemann-Liouville) and ``ifbm``
    (integrated FBM).  Two-component variants ``a X^H + b X^K`` with ``K < H``:

    ``mixed``
        independent FBMs.
    ``ccm``
        completely correlated FBMs, both driven by one Brownian motion through
        the Molchan-Golosov kernel.
    ``imixed``
        independent integrated FBMs.
    ``iccm``
        the time integral of ``ccm``.
    ``mixed_rl``
        independent Riemann-Liouville processes (``H`` may exceed 1).

    Use the classmethod constructors rather than the raw initializer.
    """

    kind: str
    H: float = 0.5
    K: float | None = None
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise SpecError(f"unknown process kind {self.kind!r}")
        object.__setattr__(self, "H", float(self.H))
        if self.kind == "bm" and self.H != 0.5:
            raise SpecError("Brownian motion has H = 0.5")
        needs_k = _KINDS[self.kind]
        base = "rl" if self.kind == "mixed_rl" else "fbm"
        _check_hurst(base if needs_k else self.kind, self.H, "H")
        if needs_k:
            if self.K is None:
                raise SpecError(f"{self.kind} needs a second index K")
            object.__setattr__(self, "K", float(self.K))
            _check_hurst(base, self.K, "K")
            if not self.K < self.H:
                raise SpecError(f"mixtures need K < H, got H={self.H}, K={self.K}")
            object.__setattr__(self, "a", float(self.a))
            object.__setattr__(self, "b", float(self.b))
            if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.a * self.b == 0:
                raise SpecError("mixture weights must be finite with a*b != 0")
        else:
            if self.K is not None:
                raise SpecError(f"{self.kind} takes no second index")
            object.__setattr__(self, "a", 1.0)
            object.__setattr__(self, "b", 1.0)

    # constructors -----------------------------------------------------------

    @classmethod
    def brownian(cls) -> "ProcessSpec":
        return cls("bm")

    @classmethod
    def fbm(cls, H: float) -> "ProcessSpec":
        return cls("fbm", H)

    @classmethod
    def riemann_liouville(cls, H: float) -> "ProcessSpec":
        return cls("rl", H)

    @classmethod
    def integrated_fbm(cls, H: float) -> "ProcessSpec":
        return cls("ifbm", H)

    @classmethod
    def mixed_independent(cls, a: float, H: float, b: float, K: float) -> "ProcessSpec":
        return cls("mixed", H, K, a, b)

    @classmethod
    def mixed_correlated(cls, a: float, H: float, b: float, K: float) -> "ProcessSpec":
        return cls("ccm", H, K, a, b)

    @classmethod
    def integrated_mixed_independent(cls, a: float, H: float, b: float, K: float) -> "ProcessSpec":
        return cls("imixed", H, K, a, b)

    @classmethod
    def integrated_mixed_correlated(cls, a: float, H: float, b: float, K: float) -> "ProcessSpec":
        return cls("iccm", H, K, a, b)

    @classmethod
    def mixed_rl(cls, a: float, H: float, b: float, K: float) -> "ProcessSpec":
        return cls("mixed_rl", H, K, a, b)

    # properties -------------------------------------------------------------

    @property
    def is_pure(self) -> bool:
        return self.kind in PURE_KINDS

    @property
    def is_integrated(self) -> bool:
        return self.kind in ("ifbm", "imixed", "iccm")

    @property
    def nonnegative_correlation(self) -> bool:
        """Whether ``a*b > 0``; advisory for correlated mixtures."""
        return self.a * self.b > 0

    @property
    def index(self) -> float:
        """Self-similarity index of the dominant component."""
        return self.H + 1.0 if self.is_integrated else self.H

    def components(self) -> list[tuple[float, "ProcessSpec"]]:
        """Weighted pure components, dominant first.

        For correlated mixtures the components are not independent; the list
        only describes the marginal laws.
        """
        if self.is_pure:
            return [(1.0, self)]
        base = {"mixed": "fbm", "ccm": "fbm", "imixed": "ifbm", "iccm": "ifbm", "mixed_rl": "rl"}[
            self.kind
        ]

        def make(h):
            return ProcessSpec("bm") if base == "fbm" and h == 0.5 else ProcessSpec(base, h)

        return [(self.a, make(self.H)), (self.b, make(self.K))]

    def dominant(self) -> "ProcessSpec":
        return self.components()[0][1]

    # descriptor -------------------------------------------------------------

    def descriptor(self) -> str:
        """Compact text form, e.g. ``fbm(H=0.75)`` or ``ccm(a=1,H=0.7,b=1,K=0.5)``."""
        if self.kind == "bm":
            return "bm()"
        if self.is_pure:
            return f"{self.kind}(H={self.H!r})"
        return f"{self.kind}(a={self.a!r},H={self.H!r},b={self.b!r},K={self.K!r})"

    __str__ = descriptor

    @classmethod
    def parse(cls, text: str) -> "ProcessSpec":
        """Inverse of :meth:`descriptor`."""
        m = re.fullmatch(r"\s*([a-z_]+)\s*\((.*)\)\s*", text)
        if not m:
            raise SpecError(f"malformed process descriptor {text!r}")
        kind, body = m.group(1), m.group(2).strip()
        kwargs: dict[str, float] = {}
        if body:
            for part in body.split(","):
                key, sep, value = part.partition("=")
                key = key.strip()
                if not sep or key not in ("H", "K", "a", "b") or key in kwargs:
                    raise SpecError(f"bad field {part!r} in {text!r}")
                try:
                    kwargs[key] = float(value)
                except ValueError as exc:
                    raise SpecError(f"bad number in {part!r}") from exc
        return cls(kind, **kwargs)


# ---------------------------------------------------------------------------


class GridError(ValueError):
    """Invalid time grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing evaluation times.

    ``policy`` is ``"uniform"`` (``t_k = k t_max / n``), ``"lamperti"``
    (log-uniform between ``t_min`` and ``t_max``) or ``"explicit"``.  When
    ``includes_origin`` is true the first time is 0, where every process is
    pinned to 0; ``n`` never counts that point.
    """

    times: np.ndarray = field(repr=False)
    policy: str
    includes_origin: bool
    params: tuple = ()

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        if t.ndim != 1 or t.size == 0:
            raise GridError("grid needs at least one time")
        if not np.all(np.isfinite(t)):
            raise GridError("grid times must be finite")
        if np.any(np.diff(t) <= 0):
            raise GridError("grid times must be strictly increasing")
        pos = t[1:] if self.includes_origin else t
        if self.includes_origin and t[0] != 0.0:
            raise GridError("grid flagged with origin must start at 0")
        if pos.size and pos[0] <= 0:
            raise GridError("grid times must be positive apart from the origin")
        if self.policy not in ("uniform", "lamperti", "explicit"):
            raise GridError(f"unknown grid policy {self.policy!r}")

    @classmethod
    def uniform(cls, t_max: float, n: int, include_origin: bool = True) -> "TimeGrid":
        """``n`` points ``t_max/n, 2 t_max/n, ..., t_max``, optionally with 0."""
        if n < 1 or not t_max > 0:
            raise GridError("uniform grid needs n >= 1 and t_max > 0")
        t = np.arange(1, n + 1) * (t_max / n)
        t[-1] = t_max
        if include_origin:
            t = np.concatenate([[0.0], t])
        return cls(t, "uniform", include_origin, (float(t_max), int(n)))

    @classmethod
    def lamperti(
        cls, t_min: float, t_max: float, n: int, include_origin: bool = True
    ) -> "TimeGrid":
        """``n`` log-uniform points from ``t_min`` to ``t_max``, optionally with 0."""
        if n < 2 or not 0 < t_min < t_max:
            raise GridError("Lamperti grid needs n >= 2 and 0 < t_min < t_max")
        t = t_min * np.exp(np.arange(n) * cls._log_step(t_min, t_max, n))
        t[0], t[-1] = t_min, t_max
        if include_origin:
            t = np.concatenate([[0.0], t])
        return cls(t, "lamperti", include_origin, (float(t_min), float(t_max), int(n)))

    @classmethod
    def explicit(cls, times, include_origin: bool | None = None) -> "TimeGrid":
        t = np.asarray(times, dtype=np.float64)
        if include_origin is None:
            include_origin = bool(t.size and t[0] == 0.0)
        elif include_origin and (t.size == 0 or t[0] != 0.0):
            t = np.concatenate([[0.0], t])
        return cls(t, "explicit", include_origin, ())

    @staticmethod
    def _log_step(t_min: float, t_max: float, n: int) -> float:
        return math.log(t_max / t_min) / (n - 1)

    @property
    def positive_times(self) -> np.ndarray:
        return self.times[1:] if self.includes_origin else self.times

    @property
    def n(self) -> int:
        """Number of positive times."""
        return self.positive_times.size

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    @property
    def log_step(self) -> float:
        """Constant log-spacing of a Lamperti grid."""
        if self.policy != "lamperti":
            raise GridError("log_step is defined for Lamperti grids only")
        t_min, t_max, n = self.params
        return self._log_step(t_min, t_max, n)

    @property
    def step(self) -> float:
        if self.policy != "uniform":
            raise GridError("step is defined for uniform grids only")
        t_max, n = self.params
        return t_max / n

    def scaled(self, c: float) -> "TimeGrid":
        """The grid ``c * t`` with the same policy."""
        if self.policy == "uniform":
            return TimeGrid.uniform(self.params[0] * c, self.params[1], self.includes_origin)
        if self.policy == "lamperti":
            t_min, t_max, n = self.params
            return TimeGrid.lamperti(t_min * c, t_max * c, n, self.includes_origin)
        return TimeGrid.explicit(self.times * c, self.includes_origin)

    def describe(self) -> str:
        if self.policy == "uniform":
            return f"uniform(t_max={self.params[0]!r},n={self.params[1]})"
        if self.policy == "lamperti":
            return f"lamperti(t_min={self.params[0]!r},t_max={self.params[1]!r},n={self.params[2]})"
        return f"explicit(n={self.n})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeGrid):
            return NotImplemented
        return (
            self.policy == other.policy
            and self.includes_origin == other.includes_origin
            and self.params == other.params
            and np.array_equal(self.times, other.times)
        )

    def __hash__(self) -> int:
        return hash((self.policy, self.includes_origin, self.params, self.times.tobytes()))
