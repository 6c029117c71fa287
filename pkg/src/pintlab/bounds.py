"""Two-grid convergence bounds for Parareal/MGRIT as functions of w = dt*xi.

For a fine propagator with per-interval factor lam(w)^k and a coarse
propagator with factor mu(w) = lam_coarse(k*w), the worst-case two-level
convergence over a spectrum is a sup over w of

    phi_F   = |mu - lam^k| / D,      phi_FCF = |lam^k| * phi_F,

where D is either the plain 1 - |mu| ("simple") or the N_c-aware
sqrt((1-|mu|)^2 + pi^2 |mu| / (C*Nc^2)) with C = 1 (lower) / C = 6 (upper).
A scalar weight theta rescales the coarse propagator (mu -> theta*mu); a
scalar weight omega blends the correction with the identity.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .butcher import ButcherTableau, get_scheme, stability_eval_batch

__all__ = [
    "UNBOUNDED",
    "INFINITY",
    "StabilityError",
    "PropagatorSpec",
    "BoundQuery",
    "BoundCurve",
    "coarse_eigenvalue",
    "fine_interval_eigenvalue",
    "pointwise_bound",
    "bound_values",
    "sweep",
    "sweep_function",
    "max_over_k",
    "two_iteration_product",
    "spectrum_max",
]

UNBOUNDED = math.inf
INFINITY = math.inf

RELAX_F = "F"
RELAX_FCF = "FCF"
SIMPLE = "simple"
LOWER_TIGHT = "lower_tight"
UPPER_TIGHT = "upper_tight"
REAL_AXIS = "real_positive"
IMAG_AXIS = "imaginary"

# Denominators below this are treated as vanished (limit guard on the real
# axis; never guarded on the imaginary axis).
_DEN_EPS = 1e-13
# Tight kinds tolerate |theta*mu| = 1 (marginally stable coarse propagator,
# e.g. trapezoid on the imaginary axis); beyond this they are unstable too.
_TIGHT_SLACK = 1e-12


class StabilityError(RuntimeError):
    """Coarse propagator unstable at w: the bound is undefined there."""


@dataclass(frozen=True)
class PropagatorSpec:
    """Fine propagator over one coarse interval: ordered (tableau, fraction) steps.

    Fractions are in fine-step units and sum to the coarsening factor k.  The
    uniform case is k identical steps of fraction 1; a mixed spec front-loads
    differently damped schemes (e.g. two strongly damped steps followed by
    k-2 steps of another scheme).
    """

    steps: tuple

    def __post_init__(self):
        steps = tuple((tab, float(frac)) for tab, frac in self.steps)
        if not steps:
            raise ValueError("PropagatorSpec needs at least one step")
        for tab, frac in steps:
            if frac <= 0:
                raise ValueError("step fractions must be positive")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def uniform(cls, tab: ButcherTableau, k: int) -> "PropagatorSpec":
        return cls(tuple((tab, 1.0) for _ in range(int(k))))

    @property
    def k(self) -> float:
        return sum(frac for _, frac in self.steps)

    @property
    def is_uniform(self) -> bool:
        first = self.steps[0]
        return all(tab is first[0] and frac == 1.0 for tab, frac in self.steps)


@dataclass(frozen=True)
class BoundQuery:
    """One bound request: propagator pair, relaxation, kind, weights, axis.

    `fine` may be given as a bare tableau, which is expanded to the uniform
    k-step propagator.
    """

    fine: PropagatorSpec
    coarse: ButcherTableau
    k: int
    relaxation: str = RELAX_F
    Nc: float = INFINITY
    bound_kind: str = SIMPLE
    theta: float = 1.0
    omega: float = 1.0
    axis: str = REAL_AXIS

    def __post_init__(self):
        if isinstance(self.fine, ButcherTableau):
            object.__setattr__(self, "fine", PropagatorSpec.uniform(self.fine, self.k))
        if self.k < 2:
            raise ValueError("coarsening factor k must be >= 2")
        if abs(self.fine.k - self.k) > 1e-9:
            raise ValueError("fine propagator fractions must sum to k")
        if self.relaxation not in (RELAX_F, RELAX_FCF):
            raise ValueError(f"unknown relaxation {self.relaxation!r}")
        if self.bound_kind not in (SIMPLE, LOWER_TIGHT, UPPER_TIGHT):
            raise ValueError(f"unknown bound kind {self.bound_kind!r}")
        if self.axis not in (REAL_AXIS, IMAG_AXIS):
            raise ValueError(f"unknown axis {self.axis!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.theta != 1.0 and self.relaxation != RELAX_F:
            raise ValueError("theta-weighting is defined for F-relaxation only")
        if not 0.0 < self.omega <= 2.0 - 1e-15:
            raise ValueError("omega must lie in (0, 2)")
        if self.bound_kind in (LOWER_TIGHT, UPPER_TIGHT):
            if not (self.Nc == INFINITY or self.Nc >= 1):
                raise ValueError("Nc must be >= 1 or INFINITY")

    def describe(self) -> str:
        fine = (self.fine.steps[0][0].name if self.fine.is_uniform
                else "+".join(t.name for t, _ in self.fine.steps))
        parts = [f"fine={fine}", f"coarse={self.coarse.name}", f"k={self.k}",
                 f"relax={self.relaxation}", f"kind={self.bound_kind}",
                 f"Nc={'inf' if self.Nc == INFINITY else self.Nc}",
                 f"axis={self.axis}"]
        if self.theta != 1.0:
            parts.append(f"theta={self.theta}")
        if self.omega != 1.0:
            parts.append(f"omega={self.omega}")
        return " ".join(parts)


def _axis_points(w, axis):
    w = np.asarray(w, dtype=float)
    return w * 1j if axis == IMAG_AXIS else w.astype(complex)


def coarse_eigenvalue(coarse: ButcherTableau, k: int, w: complex) -> complex:
    """Per-interval factor of the coarse propagator, mu(w) = lam_coarse(k*w)."""
    return complex(stability_eval_batch(coarse, np.asarray([k * w], complex))[0])


def fine_interval_eigenvalue(fine: PropagatorSpec, w: complex) -> complex:
    """Product of per-step factors across one coarse interval."""
    return complex(_fine_interval_batch(fine, np.asarray([w], complex))[0])


def _fine_interval_batch(fine: PropagatorSpec, w, dtype=complex):
    out = np.ones_like(np.asarray(w, dtype))
    for tab, frac in fine.steps:
        out = out * stability_eval_batch(tab, frac * np.asarray(w, dtype),
                                         dtype=dtype)
    return out


def _eigen_parts(q: BoundQuery, pts, dtype=complex):
    """lam^k, |theta*mu - lam^k|, theta*|mu|, 1 - theta*|mu| at the points."""
    lamk = _fine_interval_batch(q.fine, pts.astype(dtype), dtype)
    mu = q.theta * stability_eval_batch(q.coarse, q.k * pts.astype(dtype),
                                        dtype=dtype)
    num = np.abs(mu - lamk).astype(float)
    amu = np.abs(mu).astype(float)
    one_minus = (1.0 - np.abs(mu)).astype(float)
    return lamk.astype(complex), num, amu, one_minus


def bound_values(q: BoundQuery, w):
    """Vectorized bound over magnitudes w on the query's axis.

    Unstable and unbounded samples come back as inf (never raises
    StabilityError); PoleError still propagates since registry poles cannot
    lie on either sweep axis.  On the imaginary axis 1 - |mu| shrinks like
    w^2, so samples with w < 1e-4 are evaluated in extended precision to
    keep the cancellation noise below the signal.
    """
    pts = _axis_points(w, q.axis)
    lamk, num, amu, one_minus = _eigen_parts(q, pts)
    if q.axis == IMAG_AXIS:
        small = np.abs(pts) < 1e-4
        if np.any(small):
            parts = _eigen_parts(q, pts[small], np.clongdouble)
            lamk = lamk.copy(); num = num.copy()
            amu = amu.copy(); one_minus = one_minus.copy()
            lamk[small], num[small], amu[small], one_minus[small] = parts
    with np.errstate(divide="ignore", invalid="ignore"):
        if q.bound_kind == SIMPLE:
            phi = num / one_minus
            tiny = one_minus < _DEN_EPS
            if q.axis == REAL_AXIS:
                phi = np.where(tiny, np.where(num < _DEN_EPS, 0.0, np.inf),
                               phi)
            else:
                phi = np.where(tiny, np.inf, phi)
        else:
            C = 1.0 if q.bound_kind == LOWER_TIGHT else 6.0
            extra = (0.0 if q.Nc == INFINITY
                     else (np.pi ** 2) * amu / (C * q.Nc ** 2))
            phi = num / np.sqrt(one_minus ** 2 + extra)
            phi = np.where(amu > 1.0 + _TIGHT_SLACK, np.inf, phi)
            phi = np.where(np.isnan(phi), np.inf, phi)
    if q.relaxation == RELAX_FCF:
        phi = np.abs(lamk) * phi
    if q.omega != 1.0:
        base = 1.0 if q.relaxation == RELAX_F else np.abs(lamk)
        phi = (1.0 - q.omega) * base + q.omega * phi
    return phi


def pointwise_bound(q: BoundQuery, w: float) -> float:
    """Scalar bound at magnitude w; raises StabilityError when undefined.

    The simple kind requires theta*|mu| < 1; the tight kinds tolerate a
    marginally stable coarse propagator (|theta*mu| = 1) since their
    denominator stays positive for finite Nc.
    """
    pt = _axis_points(np.asarray([w]), q.axis)
    mu = q.theta * stability_eval_batch(q.coarse, q.k * pt)[0]
    amu = abs(mu)
    if q.bound_kind == SIMPLE:
        if amu >= 1.0 and not (q.axis == REAL_AXIS and 1.0 - amu > -_DEN_EPS):
            raise StabilityError(
                f"coarse propagator unstable at w={w!r}: theta*|mu|={amu}")
    elif amu > 1.0 + _TIGHT_SLACK:
        raise StabilityError(
            f"coarse propagator unstable at w={w!r}: theta*|mu|={amu}")
    return float(bound_values(q, np.asarray([w]))[0])


@dataclass(frozen=True)
class BoundCurve:
    """Sampled bound curve with max / argmax / convergence-threshold summary.

    max_phi == UNBOUNDED (inf) marks a genuinely unbounded curve; a finite
    max with argmax_w == INFINITY marks a supremum approached only as
    w -> infinity.  threshold is the largest w-hat with phi < 1 for all
    w < w-hat (INFINITY when the curve stays below 1, 0.0 when it starts
    at or above 1).
    """

    query: BoundQuery
    samples: np.ndarray  # shape (n, 2): columns w, phi; strictly increasing w
    max_phi: float
    argmax_w: float
    threshold: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.max_phi)

    def to_csv(self, fileobj, header_lines=()) -> None:
        for line in header_lines:
            fileobj.write(f"# {line}\n")
        fileobj.write("w,phi\n")
        for w, phi in self.samples:
            fileobj.write(f"{float(w)!r},"
                          f"{'unbounded' if math.isinf(phi) else repr(float(phi))}\n")
        max_str = "unbounded" if math.isinf(self.max_phi) else repr(self.max_phi)
        arg_str = "inf" if math.isinf(self.argmax_w) else repr(self.argmax_w)
        thr_str = "inf" if math.isinf(self.threshold) else repr(self.threshold)
        fileobj.write(f"# max_phi = {max_str}\n")
        fileobj.write(f"# argmax_w = {arg_str}\n")
        fileobj.write(f"# threshold = {thr_str}\n")


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_refine(fun, w_lo, w_hi, rel_tol=1e-4):
    """Golden-section maximization on a log-w interval.

    Returns (w_star, phi_star) plus every probed sample for the record.
    """
    lo, hi = math.log(w_lo), math.log(w_hi)
    probes = []

    def f(x):
        w = math.exp(x)
        v = float(fun(np.asarray([w]))[0])
        probes.append((w, v))
        return v

    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > rel_tol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
    xm = 0.5 * (lo + hi)
    return math.exp(xm), f(xm), probes


def _bisect_crossing(fun, w_lo, w_hi, level=1.0, iters=60):
    """Locate the first up-crossing of `level` between bracketed samples."""
    lo, hi = math.log(w_lo), math.log(w_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if float(fun(np.asarray([math.exp(mid)]))[0]) < level:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def sweep_function(fun, w_min: float, w_max: float, n_base: int = 512,
                   workers: int = 1):
    """Shared sweep engine: sample fun on a log grid, refine maxima, summarize.

    `fun` maps an array of w magnitudes to bound values (inf allowed).
    Returns (samples, max_phi, argmax_w, threshold).
    """
    if not (0.0 < w_min < w_max):
        raise ValueError("need 0 < w_min < w_max")
    if n_base < 64:
        raise ValueError("n_base must be >= 64")
    grid = np.geomspace(w_min, w_max, n_base)
    if workers > 1:
        chunks = np.array_split(grid, workers * 4)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fun, chunks))
        phi = np.concatenate(parts)
    else:
        phi = np.asarray(fun(grid), dtype=float)
    samples = [(w, v) for w, v in zip(grid, phi)]

    finite = np.where(np.isfinite(phi), phi, -np.inf)
    peak = np.max(finite)
    candidates = []
    prev = -10
    for i in range(n_base):
        left = finite[i - 1] if i > 0 else -np.inf
        right = finite[i + 1] if i < n_base - 1 else -np.inf
        if not (np.isfinite(finite[i]) and finite[i] >= left
                and finite[i] >= right):
            continue
        # skip plateau continuations and humps far below the global peak:
        # neither can move the max/argmax summary
        if i == prev + 1 and candidates and \
                abs(finite[i] - candidates[-1][0]) <= 1e-9 * abs(finite[i]):
            prev = i
            continue
        if peak > 0 and finite[i] < 0.3 * peak:
            continue
        candidates.append((finite[i], i))
        prev = i
    candidates.sort(reverse=True)
    refined = []
    for _, i in candidates[:64]:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, n_base - 1)]
        if lo < hi:
            _, _, probes = _golden_refine(fun, lo, hi)
            refined.extend(probes)
    samples.extend(refined)
    samples.sort(key=lambda p: p[0])
    arr = np.asarray(samples, dtype=float)
    w_all, phi_all = arr[:, 0], arr[:, 1]

    unbounded = bool(np.any(~np.isfinite(phi_all)) or np.any(phi_all > 1e6))
    end_increasing = phi[-1] >= phi[-2] and np.isfinite(phi[-1])
    tail = float(fun(np.asarray([10.0 * w_max]))[0])
    max_phi = float(np.max(np.where(np.isfinite(phi_all), phi_all, np.inf)))
    argmax_at_inf = False
    if unbounded or not math.isfinite(tail) or tail > 1e6:
        max_phi = UNBOUNDED
        argmax_at_inf = not unbounded
    elif (end_increasing and tail > 1.01 * phi[-1]
          and phi[-1] >= 0.5 * max_phi):
        # still climbing hard at the window edge with the global max there
        max_phi = UNBOUNDED
        argmax_at_inf = True
    elif max_phi > 0 and tail >= max_phi * (1.0 - 1e-6):
        # supremum approached asymptotically: report the far-tail estimate
        max_phi = max(max_phi, float(tail))
        argmax_at_inf = True

    if argmax_at_inf:
        argmax_w = INFINITY
    elif math.isinf(max_phi):
        # unbounded curve: report where it blew up, unless it is still high
        # or climbing at the window edge (supremum at w -> infinity)
        bad = np.where(~np.isfinite(phi_all) | (phi_all > 1e6))[0]
        end_bad = (not math.isfinite(phi[-1]) or phi[-1] > 1e6
                   or not math.isfinite(tail) or tail > 1e6)
        argmax_w = INFINITY if (end_bad or not len(bad)) \
            else float(w_all[bad[0]])
    else:
        attained = np.where(phi_all >= max_phi * (1.0 - 1e-6))[0]
        argmax_w = float(w_all[attained[0]])

    over = np.where(~(phi_all < 1.0))[0]  # inf counts as over
    if len(over) == 0:
        threshold = INFINITY if not tail >= 1.0 else \
            _bisect_crossing(fun, w_max, 10.0 * w_max)
    elif over[0] == 0:
        threshold = 0.0
    else:
        i = over[0]
        threshold = _bisect_crossing(fun, w_all[i - 1], w_all[i])
    return arr, max_phi, argmax_w, threshold


def sweep(q: BoundQuery, w_min: float = 1e-8, w_max: float = 1e8,
          n_base: int = 512, workers: int = 1) -> BoundCurve:
    """Sample the bound on [w_min, w_max] and summarize max/argmax/threshold."""
    fun = lambda w: bound_values(q, w)
    samples, max_phi, argmax_w, threshold = sweep_function(
        fun, w_min, w_max, n_base, workers)
    return BoundCurve(q, samples, max_phi, argmax_w, threshold)


def max_over_k(fine: str, coarse: str, relaxation: str, k_set,
               bound_kind: str = SIMPLE, Nc: float = INFINITY,
               axis: str = REAL_AXIS, w_min: float = 1e-8,
               w_max: float = 1e8, n_base: int = 512) -> float:
    """Max over coarsening factors of the sweep maximum; UNBOUNDED dominates."""
    k_list = list(k_set)
    if not k_list:
        raise ValueError("k_set must be nonempty")
    fine_tab = get_scheme(fine)
    coarse_tab = get_scheme(coarse)
    worst = 0.0
    for k in k_list:
        q = BoundQuery(PropagatorSpec.uniform(fine_tab, k), coarse_tab, int(k),
                       relaxation, Nc, bound_kind, axis=axis)
        curve = sweep(q, w_min, w_max, n_base)
        worst = max(worst, curve.max_phi)
        if math.isinf(worst):
            break
    return worst


def two_iteration_product(q1: BoundQuery, q2: BoundQuery,
                          w_min: float = 1e-8, w_max: float = 1e8,
                          n_base: int = 512) -> BoundCurve:
    """Worst case of two successive iterations: pointwise product of bounds."""
    if (q1.fine is not q2.fine and q1.fine != q2.fine) or \
            q1.coarse is not q2.coarse or q1.k != q2.k or q1.axis != q2.axis:
        raise ValueError("queries must share fine/coarse/k/axis")
    fun = lambda w: bound_values(q1, w) * bound_values(q2, w)
    samples, max_phi, argmax_w, threshold = sweep_function(
        fun, w_min, w_max, n_base)
    return BoundCurve(q1, samples, max_phi, argmax_w, threshold)


def spectrum_max(q: BoundQuery, w_values) -> float:
    """Sup of the bound over a prescribed set of w magnitudes (a model spectrum)."""
    vals = bound_values(q, np.asarray(w_values, dtype=float))
    return float(np.max(vals))
