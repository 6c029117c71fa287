"""Butcher tableaux, the named-scheme registry, and stability-function evaluation.

A Runge-Kutta scheme applied to the scalar test problem u' = -xi*u with step
dt advances the solution by the factor lam(w) = 1 - w*b^T (I + w*A)^{-1} 1,
where w = dt*xi.  Everything downstream (convergence bounds, time-grid solves
on diagonalizable operators) is built on evaluating this rational function in
complex arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PoleError",
    "OrderMismatch",
    "ButcherTableau",
    "SchemeRegistry",
    "REGISTRY",
    "get_scheme",
    "scheme_names",
    "stability_eval",
    "stability_eval_batch",
    "stability_eval_det",
    "verify_order",
    "classify_stability",
    "tableau_to_text",
    "tableau_from_text",
]

A_STABLE = "A_stable"
L_STABLE = "L_stable"
CONDITIONALLY_STABLE = "conditionally_stable"

# Pivot magnitudes below this are treated as a pole of the rational stability
# function rather than propagated as inf/nan.
_POLE_PIVOT = 1e-300


class PoleError(ArithmeticError):
    """Stage system I + w*A is singular: w sits at a pole of lam(w)."""


class OrderMismatch(ValueError):
    """Numerically measured order disagrees with the declared order."""


def _as_readonly(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ButcherTableau:
    """An s-stage Runge-Kutta scheme (A, b, c) with declared order and class.

    ``stiffly_accurate`` and ``explicit_flag`` are derived from the
    coefficients; row-sum consistency c_i = sum_j A_ij is enforced at
    construction.
    """

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int
    stability_class: str

    def __post_init__(self):
        object.__setattr__(self, "A", _as_readonly(np.atleast_2d(self.A)))
        object.__setattr__(self, "b", _as_readonly(np.atleast_1d(self.b)))
        object.__setattr__(self, "c", _as_readonly(np.atleast_1d(self.c)))
        s = self.b.size
        if self.A.shape != (s, s) or self.c.size != s:
            raise ValueError(f"{self.name}: inconsistent tableau shapes")
        if self.order < 1:
            raise ValueError(f"{self.name}: order must be >= 1")
        if self.stability_class not in (A_STABLE, L_STABLE, CONDITIONALLY_STABLE):
            raise ValueError(f"{self.name}: unknown stability class")
        rowsum = self.A.sum(axis=1)
        if not np.allclose(rowsum, self.c, rtol=0, atol=1e-12):
            raise ValueError(f"{self.name}: c_i != sum_j A_ij")

    @property
    def s(self) -> int:
        return self.b.size

    @property
    def stiffly_accurate(self) -> bool:
        return bool(np.all(np.abs(self.A[-1] - self.b) <= 1e-14))

    @property
    def explicit_flag(self) -> bool:
        return bool(np.all(np.abs(np.triu(self.A)) == 0.0))

    def __repr__(self):
        return (f"ButcherTableau({self.name!r}, s={self.s}, order={self.order},"
                f" {self.stability_class})")


def _gauss_solve(M, rhs):
    """Batched dense Gaussian elimination with partial pivoting.

    M has shape (..., s, s), rhs shape (s,).  Works for any inexact dtype
    (complex128 for plane evaluation, longdouble for order measurement).
    Raises PoleError when a pivot falls below the pole threshold.
    """
    M = np.asarray(M)
    s = M.shape[-1]
    aug = np.concatenate(
        [M, np.broadcast_to(rhs.astype(M.dtype), M.shape[:-1]).copy()[..., None]],
        axis=-1,
    )
    flat = aug.reshape(-1, s, s + 1)
    for col in range(s):
        piv = col + np.argmax(np.abs(flat[:, col:, col]), axis=1)
        rows = np.arange(flat.shape[0])
        tmp = flat[rows, piv].copy()
        flat[rows, piv] = flat[:, col]
        flat[:, col] = tmp
        pivots = flat[:, col, col]
        if np.min(np.abs(pivots)) < _POLE_PIVOT:
            raise PoleError("singular stage system: w is at a pole")
        for r in range(col + 1, s):
            factor = flat[:, r, col] / pivots
            flat[:, r, col:] -= factor[:, None] * flat[:, col, col:]
    x = np.empty(flat.shape[:1] + (s,), dtype=flat.dtype)
    for r in range(s - 1, -1, -1):
        acc = flat[:, r, s]
        if r + 1 < s:
            acc = acc - np.einsum("ij,ij->i", flat[:, r, r + 1:s], x[:, r + 1:])
        x[:, r] = acc / flat[:, r, r]
    return x.reshape(M.shape[:-2] + (s,))


def stability_eval_batch(tab: ButcherTableau, w, dtype=complex):
    """Vectorized lam(w) = 1 - w*b^T (I + w*A)^{-1} 1 over an array of w.

    For stiffly accurate tableaux the weight row equals the last row of A,
    so lam is exactly the last stage value; using it avoids the catastrophic
    1 - w*b^T x cancellation for schemes with an explicit first stage at
    large |w|.
    """
    w = np.asarray(w, dtype=dtype)
    A = tab.A.astype(dtype)
    s = tab.s
    M = np.eye(s, dtype=dtype) + w[..., None, None] * A
    x = _gauss_solve(M, np.ones(s))
    if tab.stiffly_accurate:
        return x[..., -1]
    return 1.0 - w * (x @ tab.b.astype(dtype))


def stability_eval(tab: ButcherTableau, w: complex) -> complex:
    """Stability function factor lam(w) for a single complex w."""
    return complex(stability_eval_batch(tab, np.asarray([w], dtype=complex))[0])


def _det(M):
    """Determinant via the same pivoted elimination (product of pivots)."""
    M = np.array(M, dtype=complex)
    s = M.shape[0]
    sign = 1.0
    det = 1.0 + 0.0j
    for col in range(s):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
            sign = -sign
        p = M[col, col]
        if abs(p) < _POLE_PIVOT:
            return 0.0 + 0.0j
        det *= p
        for r in range(col + 1, s):
            M[r, col:] -= (M[r, col] / p) * M[col, col:]
    return sign * det


def stability_eval_det(tab: ButcherTableau, w: complex) -> complex:
    """Determinant form det(I + wA - w 1 b^T) / det(I + wA).

    Independent route used to cross-check the stage-solve form.
    """
    s = tab.s
    A = tab.A.astype(complex)
    bT = np.outer(np.ones(s), tab.b).astype(complex)
    num = _det(np.eye(s) + w * (A - bT))
    den = _det(np.eye(s) + w * A)
    if abs(den) < _POLE_PIVOT:
        raise PoleError("denominator determinant vanished: w is at a pole")
    return complex(num / den)


def verify_order(tab: ButcherTableau) -> int:
    """Measure the approximation order from |lam(w) - exp(-w)| on w in [1e-3, 1e-2].

    Returns the largest p whose required log-log slope p+1 - 0.1 is met.
    Evaluation runs in extended precision: for order-4 schemes the signal at
    the bottom of the window is ~1e-18, below double-precision cancellation
    noise.  Raises OrderMismatch when the result differs from tab.order.
    """
    ld = np.longdouble
    ws = np.geomspace(ld(1e-3), ld(1e-2), 9, dtype=ld)
    lam = stability_eval_batch(tab, ws, dtype=ld)
    diff = np.abs(lam - np.exp(-ws))
    diff = np.maximum(diff, np.finfo(ld).tiny)
    slope, _ = np.polyfit(np.log(ws.astype(float)),
                          np.log(diff.astype(float)), 1)
    measured = int(math.floor(slope + 0.1)) - 1
    if measured != tab.order:
        raise OrderMismatch(
            f"{tab.name}: declared order {tab.order}, measured {measured}"
            f" (slope {slope:.3f})")
    return measured


def classify_stability(tab: ButcherTableau) -> str:
    """Classify A-/L-/conditional stability by boundary and large-|w| sampling.

    Samples |lam| on the imaginary w-axis (the right-half-plane boundary,
    |Im w| up to 1e6, log-spaced) and on a large arc, then checks the
    L-stable limit |lam(1e12)| < 1e-6.  A regression guard for known classes,
    not a prover.
    """
    y = np.geomspace(1e-6, 1e6, 2001)
    boundary = np.concatenate([1j * y, -1j * y])
    angles = np.linspace(-np.pi / 2 + 1e-3, np.pi / 2 - 1e-3, 181)
    arc = 1e9 * np.exp(1j * angles)
    try:
        vals = stability_eval_batch(tab, np.concatenate([boundary, arc]))
    except PoleError:
        return CONDITIONALLY_STABLE
    if np.any(np.abs(vals) > 1.0 + 1e-12):
        return CONDITIONALLY_STABLE
    if abs(stability_eval(tab, 1e12)) < 1e-6:
        return L_STABLE
    return A_STABLE


# ---------------------------------------------------------------------------
# Scheme registry
# ---------------------------------------------------------------------------

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)


def _make_registry_entries():
    entries = {}

    def add(name, A, b, c, order, cls):
        entries[name] = ButcherTableau(name, A, b, c, order, cls)

    add("bwe", [[1.0]], [1.0], [1.0], 1, L_STABLE)
    add("fwe", [[0.0]], [1.0], [0.0], 1, CONDITIONALLY_STABLE)
    add("midpoint", [[0.5]], [1.0], [0.5], 2, A_STABLE)
    add("trapezoid", [[0.0, 0.0], [0.5, 0.5]], [0.5, 0.5], [0.0, 1.0],
        2, A_STABLE)

    g = (2.0 - _SQRT2) / 2.0
    add("sdirk22", [[g, 0.0], [1.0 - g, g]], [1.0 - g, g], [g, 1.0],
        2, L_STABLE)

    g = (3.0 + _SQRT3) / 6.0
    add("sdirk23", [[g, 0.0], [1.0 - 2.0 * g, g]], [0.5, 0.5],
        [g, 1.0 - g], 3, A_STABLE)

    # sdirk33 constants are published as decimals; stored verbatim.
    g = 0.435866521508458999416019
    bb = 1.20849664917601007033648
    cc = 0.717933260754229499708010
    add("sdirk33",
        [[g, 0.0, 0.0], [cc - g, g, 0.0], [bb, 1.0 - bb - g, g]],
        [bb, 1.0 - bb - g, g], [g, cc, 1.0], 3, L_STABLE)

    g = (3.0 + 2.0 * _SQRT3 * math.cos(math.pi / 18.0)) / 6.0
    bb = 1.0 / (6.0 * (1.0 - 2.0 * g) ** 2)
    add("sdirk34",
        [[g, 0.0, 0.0], [0.5 - g, g, 0.0], [2.0 * g, 1.0 - 4.0 * g, g]],
        [bb, 1.0 - 2.0 * bb, bb], [g, 0.5, 1.0 - g], 4, A_STABLE)

    g = (2.0 - _SQRT2) / 2.0
    bb = (1.0 - 2.0 * g) / (4.0 * g)
    add("esdirk32",
        [[0.0, 0.0, 0.0], [g, g, 0.0], [1.0 - bb - g, bb, g]],
        [1.0 - bb - g, bb, g], [0.0, 2.0 * g, 1.0], 2, L_STABLE)

    g = (3.0 + _SQRT3) / 6.0
    b2 = 1.0 / (12.0 * g * (1.0 - 2.0 * g))
    b3 = (1.0 - 3.0 * g) / (3.0 * (1.0 - 2.0 * g))
    add("esdirk33",
        [[0.0, 0.0, 0.0], [g, g, 0.0],
         [(6.0 * g - 1.0) / (4.0 * g) - g, (1.0 - 2.0 * g) / (4.0 * g), g]],
        [1.0 - b2 - b3, b2, b3], [0.0, 2.0 * g, 1.0], 3, A_STABLE)

    add("gauss4",
        [[0.25, (3.0 - 2.0 * _SQRT3) / 12.0],
         [(3.0 + 2.0 * _SQRT3) / 12.0, 0.25]],
        [0.5, 0.5], [(3.0 - _SQRT3) / 6.0, (3.0 + _SQRT3) / 6.0],
        4, A_STABLE)

    add("erk2", [[0.0, 0.0], [1.0, 0.0]], [0.5, 0.5], [0.0, 1.0],
        2, CONDITIONALLY_STABLE)
    add("erk3", [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [-1.0, 2.0, 0.0]],
        [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], [0.0, 0.5, 1.0],
        3, CONDITIONALLY_STABLE)
    add("erk4",
        [[0.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0],
         [0.0, 0.5, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
        [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        [0.0, 0.5, 0.5, 1.0], 4, CONDITIONALLY_STABLE)
    return entries


TRBDF2_DEFAULT_GAMMA = 2.0 - _SQRT2


def make_trbdf2(gamma: float = TRBDF2_DEFAULT_GAMMA) -> ButcherTableau:
    """One-parameter blend of trapezoid and two-step BDF as a 3-stage ESDIRK.

    L-stable exactly at the default parameter, A-stable elsewhere in the
    usable range.
    """
    g = float(gamma)
    if not 0.0 < g < 2.0:
        raise ValueError("trbdf2 parameter must lie in (0, 2)")
    last = [(3.0 * g - g * g - 1.0) / (2.0 * g), (1.0 - g) / (2.0 * g), g / 2.0]
    cls = L_STABLE if abs(g - TRBDF2_DEFAULT_GAMMA) < 1e-12 else A_STABLE
    name = ("trbdf2" if abs(g - TRBDF2_DEFAULT_GAMMA) < 1e-12
            else f"trbdf2:{g!r}")
    return ButcherTableau(
        name,
        [[0.0, 0.0, 0.0], [g / 2.0, g / 2.0, 0.0], last],
        last, [0.0, g, 1.0], 2, cls)


@dataclass(frozen=True)
class SchemeRegistry:
    """Immutable name -> tableau mapping with trbdf2:<gamma> parameterization."""

    entries: dict = field(default_factory=dict)

    def names(self):
        return sorted(self.entries) + ["trbdf2"]

    def get(self, name: str) -> ButcherTableau:
        key = name.strip().lower()
        if key in self.entries:
            return self.entries[key]
        if key == "trbdf2":
            return make_trbdf2()
        if key.startswith("trbdf2:"):
            try:
                gamma = float(key.split(":", 1)[1])
            except ValueError:
                raise KeyError(f"bad trbdf2 parameter in {name!r}") from None
            return make_trbdf2(gamma)
        raise KeyError(f"unknown scheme {name!r}")

    def __iter__(self):
        yield from self.entries.values()
        yield make_trbdf2()


REGISTRY = SchemeRegistry(_make_registry_entries())


def get_scheme(name: str) -> ButcherTableau:
    return REGISTRY.get(name)


def scheme_names():
    return REGISTRY.names()


# ---------------------------------------------------------------------------
# Plain-text serialization for user-supplied schemes
# ---------------------------------------------------------------------------

def tableau_to_text(tab: ButcherTableau) -> str:
    """Key-value block: name, s, order, class, row-major A, b, c."""
    lines = [
        f"name = {tab.name}",
        f"s = {tab.s}",
        f"order = {tab.order}",
        f"class = {tab.stability_class}",
        "A = " + " ".join(repr(float(v)) for v in tab.A.ravel()),
        "b = " + " ".join(repr(float(v)) for v in tab.b),
        "c = " + " ".join(repr(float(v)) for v in tab.c),
    ]
    return "\n".join(lines) + "\n"


def tableau_from_text(text: str) -> ButcherTableau:
    fields = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad tableau line: {raw!r}")
        key, _, val = line.partition("=")
        fields[key.strip().lower()] = val.strip()
    try:
        name = fields["name"]
        s = int(fields["s"])
        order = int(fields["order"])
        cls = fields["class"]
        A = np.array([float(v) for v in fields["a"].split()]).reshape(s, s)
        b = np.array([float(v) for v in fields["b"].split()])
        c = np.array([float(v) for v in fields["c"].split()])
    except KeyError as exc:
        raise ValueError(f"missing tableau field: {exc}") from None
    return ButcherTableau(name, A, b, c, order, cls)
