"""Model spatial operators: prescribed eigenvalue multisets (SPD and
skew-symmetric) plus small tridiagonal/circulant matrix realizations for
cross-validating the diagonal solver path."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ModelProblem",
    "make_spd_interval",
    "make_fd_diffusion",
    "make_skew_advection",
    "eigenvalues_to_csv",
    "eigenvalues_from_csv",
]

DIAGONAL_SPD = "diagonal_spd"
DIAGONAL_SKEW = "diagonal_skew"
FD_DIFFUSION_1D = "fd_diffusion_1d"
FD_ADVECTION_1D = "fd_advection_1d_periodic"


@dataclass(frozen=True)
class ModelProblem:
    """A simultaneously diagonalizable operator given by its eigenvalues.

    SPD kinds carry strictly positive real eigenvalues; skew kinds carry
    purely imaginary ones.  `matrix`, when present, is an explicit
    realization whose spectrum matches `eigenvalues`.
    """

    kind: str
    eigenvalues: np.ndarray
    matrix: np.ndarray | None = None
    h_x: float | None = None

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=complex)
        eig.flags.writeable = False
        object.__setattr__(self, "eigenvalues", eig)
        if self.matrix is not None:
            mat = np.asarray(self.matrix, dtype=float)
            mat.flags.writeable = False
            object.__setattr__(self, "matrix", mat)
        if self.kind in (DIAGONAL_SPD, FD_DIFFUSION_1D):
            if np.any(eig.imag != 0) or np.any(eig.real <= 0):
                raise ValueError("SPD eigenvalues must be real and positive")
        elif self.kind in (DIAGONAL_SKEW, FD_ADVECTION_1D):
            if np.any(eig.real != 0):
                raise ValueError("skew eigenvalues must be purely imaginary")
        else:
            raise ValueError(f"unknown problem kind {self.kind!r}")

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def is_spd(self) -> bool:
        return self.kind in (DIAGONAL_SPD, FD_DIFFUSION_1D)


def make_spd_interval(xi_max: float, n: int, include=()) -> ModelProblem:
    """Log-spaced SPD spectrum filling (0, xi_max], two decades deep.

    `include` injects extra critical eigenvalues (for example the w*/dt value
    at which a convergence bound attains its maximum) so that worst-case
    modes are guaranteed to be present.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if xi_max <= 0:
        raise ValueError("xi_max must be positive")
    fill = np.geomspace(xi_max * 1e-2, xi_max, int(n))
    extra = [float(v) for v in include if 0.0 < float(v) <= xi_max]
    eig = np.sort(np.concatenate([fill, np.asarray(extra, dtype=float)]))
    return ModelProblem(DIAGONAL_SPD, eig)


def make_fd_diffusion(M: int) -> ModelProblem:
    """1D Dirichlet Laplacian, M interior points, h = 1/(M+1).

    Matrix (1/h^2) tridiag(-1, 2, -1) with eigenvalues
    (4/h^2) sin^2(j*pi*h/2), j = 1..M.
    """
    if M < 2:
        raise ValueError("need M >= 2")
    h = 1.0 / (M + 1)
    mat = (np.diag(2.0 * np.ones(M)) + np.diag(-np.ones(M - 1), 1)
           + np.diag(-np.ones(M - 1), -1)) / h ** 2
    j = np.arange(1, M + 1)
    eig = (4.0 / h ** 2) * np.sin(j * np.pi * h / 2.0) ** 2
    return ModelProblem(FD_DIFFUSION_1D, eig, mat, h)


def make_skew_advection(M: int, h_x: float) -> ModelProblem:
    """Periodic central-difference advection operator (circulant, skew).

    First row (0, 1, 0, ..., 0, -1)/(2 h_x); eigenvalues
    i*sin(2*pi*j/M)/h_x, j = 0..M-1.
    """
    if M < 3:
        raise ValueError("need M >= 3")
    first = np.zeros(M)
    first[1] = 1.0 / (2.0 * h_x)
    first[-1] = -1.0 / (2.0 * h_x)
    mat = np.empty((M, M))
    for r in range(M):
        mat[r] = np.roll(first, r)
    j = np.arange(M)
    eig = 1j * np.sin(2.0 * np.pi * j / M) / h_x
    return ModelProblem(FD_ADVECTION_1D, eig, mat, h_x)


def eigenvalues_to_csv(problem: ModelProblem, fileobj, header_lines=()) -> None:
    for line in header_lines:
        fileobj.write(f"# {line}\n")
    fileobj.write("re,im\n")
    for xi in problem.eigenvalues:
        fileobj.write(f"{float(xi.real)!r},{float(xi.imag)!r}\n")


def eigenvalues_from_csv(fileobj) -> ModelProblem:
    """Load a user-supplied spectrum; kind inferred from the values."""
    vals = []
    for raw in fileobj:
        line = raw.strip()
        if not line or line.startswith("#") or line.lower().startswith("re,"):
            continue
        re_s, im_s = line.split(",")
        vals.append(complex(float(re_s), float(im_s)))
    eig = np.asarray(vals, dtype=complex)
    if eig.size == 0:
        raise ValueError("no eigenvalues in CSV")
    if np.all(eig.imag == 0):
        return ModelProblem(DIAGONAL_SPD, eig.real.astype(complex))
    if np.all(eig.real == 0):
        return ModelProblem(DIAGONAL_SKEW, eig)
    raise ValueError("spectrum must be real-positive or purely imaginary")
