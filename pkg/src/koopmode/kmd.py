"""Koopman mode decomposition of snapshot data.

Four interchangeable algorithms produce a :class:`KoopmanDecomposition`:

* :func:`decompose_arnoldi` -- companion-matrix (Krylov) method; N-1 modes
  from N snapshots, with the one-step residual orthogonal to the data span.
* :func:`decompose_prony` -- vector Prony analysis on a block-Hankel system;
  N/2 modes from N snapshots.  The tall Hankel system keeps the coefficient
  solve full-rank even for few channels, where the Arnoldi normal equations
  are singular.
* :func:`decompose_dmd` -- SVD-based dynamic mode decomposition; at most
  min(m, N-1) modes, best suited to many channels and few snapshots.
* :func:`decompose_fourier` -- harmonic averages at caller-chosen
  frequencies; assumes on-attractor (unit-modulus) dynamics.

Eigenvalue moduli are per-step growth rates; arguments map to frequencies in
Hz through the sampling period (:func:`eigen_frequency`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEigenvalues,
    FrequencyOutOfRange,
    NotAPair,
    OddSampleCount,
    RankCollapse,
    SolveFailure,
    TooFewSnapshots,
    ZeroEigenvalue,
)
from .timeseries import SnapshotSeries

ALGORITHMS = ("arnoldi", "prony", "fourier", "dmd")

# Normal equations are used below this condition estimate, SVD least squares
# with a 1e-12 relative singular-value cutoff above it.
COND_LIMIT = 1e8
RCOND = 1e-12
DEGENERACY_RTOL = 1e-10
PAIR_MATCH_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class KoopmanDecomposition:
    """Eigenvalue/mode pairs extracted from one snapshot window.

    Attributes
    ----------
    eigenvalues : ndarray, shape (M,), complex
    modes : ndarray, shape (m, M), complex
        Column j is the mode attached to ``eigenvalues[j]``; its scale
        absorbs the initial condition, so ``sum_j eigenvalues[j]**k * modes[:, j]``
        reconstructs snapshot k directly.
    residual : ndarray, real
        Least-squares residual of the coefficient solve: length m for
        arnoldi/dmd, length m*N/2 for prony, zeros for fourier.
    algorithm : str
        One of ``arnoldi``, ``prony``, ``fourier``, ``dmd``.
    period_s, n_snapshots, channels
        Copied from the input series.

    For real input the eigenvalue multiset is closed under conjugation and
    ordering keeps each conjugate pair adjacent, positive frequency first.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    residual: np.ndarray
    algorithm: str
    period_s: float
    n_snapshots: int
    channels: tuple

    def __post_init__(self):
        eig = np.atleast_1d(np.asarray(self.eigenvalues, dtype=complex))
        modes = np.asarray(self.modes, dtype=complex)
        residual = np.asarray(self.residual, dtype=float)
        if modes.ndim != 2 or modes.shape[1] != eig.shape[0]:
            raise ValueError("modes must be m x M matching eigenvalues")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if len(self.channels) != modes.shape[0]:
            raise ValueError("one channel label per mode row")
        for a in (eig, modes, residual):
            a.flags.writeable = False
        object.__setattr__(self, "eigenvalues", eig)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "residual", residual)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def mode_norms(self) -> np.ndarray:
        return np.linalg.norm(self.modes, axis=0)

    @property
    def residual_norm(self) -> float:
        return float(np.linalg.norm(self.residual))

    def growth_rates(self) -> np.ndarray:
        return np.abs(self.eigenvalues)

    def frequencies_hz(self) -> np.ndarray:
        return np.angle(self.eigenvalues) / (2.0 * np.pi * self.period_s)


def conjugate_partner(decomp: KoopmanDecomposition, j: int) -> int | None:
    """Index of the conjugate partner of mode j, or None for a real mode.

    Raises NotAPair when the eigenvalue is complex but no matching conjugate
    exists in the decomposition.
    """
    lam = decomp.eigenvalues[j]
    if lam.imag == 0.0:
        return None
    tol = PAIR_MATCH_RTOL * max(abs(lam), 1.0)
    # ordering puts partners adjacent, so try the neighbours first
    for k in (j + 1, j - 1):
        if 0 <= k < decomp.n_modes and abs(decomp.eigenvalues[k] - lam.conjugate()) <= tol:
            return k
    dists = np.abs(decomp.eigenvalues - lam.conjugate())
    dists[j] = np.inf
    k = int(np.argmin(dists))
    if dists[k] <= tol:
        return k
    raise NotAPair(f"mode {j} (eigenvalue {lam:.6g}) has no conjugate partner")


def eigen_frequency(lam: complex, period_s: float):
    """(growth_rate, frequency_hz) of one eigenvalue at the given sampling period."""
    lam = complex(lam)
    if lam == 0:
        raise ZeroEigenvalue("zero eigenvalue has no frequency")
    return abs(lam), float(np.angle(lam) / (2.0 * np.pi * period_s))


@dataclass(frozen=True)
class ProjectionResult:
    """Harmonic average at a single normalized frequency ``nu`` in [-1/2, 1/2)."""

    nu: float
    vector: np.ndarray

    def __post_init__(self):
        vector = np.asarray(self.vector, dtype=complex)
        if not np.all(np.isfinite(vector)):
            raise ValueError("projection vector must be finite")
        vector.flags.writeable = False
        object.__setattr__(self, "vector", vector)


# ---------------------------------------------------------------------------
# shared numerics


def _companion(last_column: np.ndarray) -> np.ndarray:
    n = last_column.shape[0]
    c = np.zeros((n, n))
    c[1:, :-1] = np.eye(n - 1)
    c[:, -1] = last_column
    return c


def _check_distinct(eigvals: np.ndarray, rtol: float = DEGENERACY_RTOL) -> None:
    dist = np.abs(eigvals[:, None] - eigvals[None, :])
    scale = np.maximum(np.abs(eigvals)[:, None], np.abs(eigvals)[None, :])
    mask = np.triu(np.ones(dist.shape, dtype=bool), k=1)
    bad = mask & (dist <= rtol * scale)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DegenerateEigenvalues(
            f"eigenvalues {i} and {j} coincide within relative {rtol:g}: "
            f"{eigvals[i]:.12g} vs {eigvals[j]:.12g}"
        )


def _recurrence_coefficients(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``a @ x = b`` (a is m x M, possibly wide).

    Normal equations when a'a is square, full-rank and well conditioned;
    otherwise minimum-norm SVD least squares with relative cutoff RCOND.
    """
    m, M = a.shape
    if m >= M:
        gram = a.T @ a
        if np.linalg.cond(gram) < COND_LIMIT:
            try:
                return np.linalg.solve(gram, a.T @ b)
            except np.linalg.LinAlgError as exc:
                raise SolveFailure(f"normal equations failed: {exc}") from exc
    x, _, _, _ = np.linalg.lstsq(a, b, rcond=RCOND)
    return x


def _vandermonde_modes(eigvals: np.ndarray, krylov: np.ndarray) -> np.ndarray:
    """Mode matrix V with V @ T = K, T the Vandermonde matrix of the eigenvalues.

    Solved as the transposed linear system T' V' = K'.  LU is tried first; if
    it is singular or leaves a poor reconstruction residual (possible for
    hundreds of eigenvalues spread over the unit disk), the minimum-norm SVD
    solution is used instead, which keeps the mode norms and the residual of
    the defining identity bounded.
    """
    M = eigvals.shape[0]
    if krylov.shape[1] != M:
        raise ValueError("Krylov block and eigenvalue count disagree")
    vand = np.vander(eigvals, N=M, increasing=True)  # row j: [1, lam_j, ...]
    k_norm = np.linalg.norm(krylov)
    modes = None
    try:
        modes = np.linalg.solve(vand.T, krylov.T.astype(complex)).T
    except np.linalg.LinAlgError:
        modes = None
    if modes is not None and k_norm > 0:
        rel = np.linalg.norm(modes @ vand - krylov) / k_norm
        if not np.isfinite(rel) or rel > 1e-9:
            modes = None
    if modes is None:
        sol, _, _, _ = np.linalg.lstsq(vand.T, krylov.T.astype(complex), rcond=RCOND)
        modes = sol.T
        if not np.all(np.isfinite(modes)):
            raise SolveFailure("Vandermonde mode recovery produced non-finite modes")
    return modes


def _pair_ordering(eigvals: np.ndarray, modes: np.ndarray, order: str) -> np.ndarray:
    """Permutation sorting modes and keeping conjugate pairs adjacent.

    ``order='norm'`` ranks by descending mode norm (then growth rate);
    ``order='growth'`` ranks by descending growth rate (then norm).  The
    positive-frequency member leads each pair.
    """
    norms = np.linalg.norm(modes, axis=0)
    moduli = np.abs(eigvals)
    if order == "norm":
        rank = np.lexsort((-eigvals.imag, -moduli, -norms))
    elif order == "growth":
        rank = np.lexsort((-eigvals.imag, -norms, -moduli))
    else:
        raise ValueError(f"unknown ordering {order!r}")
    used = np.zeros(eigvals.shape[0], dtype=bool)
    out = []
    for j in rank:
        if used[j]:
            continue
        used[j] = True
        lam = eigvals[j]
        if lam.imag != 0.0:
            tol = PAIR_MATCH_RTOL * max(abs(lam), 1.0)
            cand = np.abs(eigvals - lam.conjugate())
            cand[used] = np.inf
            k = int(np.argmin(cand))
            if np.isfinite(cand[k]) and cand[k] <= tol:
                used[k] = True
                pair = (j, k) if lam.imag > 0 else (k, j)
                out.extend(pair)
                continue
        out.append(j)
    return np.asarray(out, dtype=int)


# ---------------------------------------------------------------------------
# algorithms


def decompose_arnoldi(series: SnapshotSeries, order: str = "norm") -> KoopmanDecomposition:
    """Companion-matrix decomposition returning all N-1 empirical mode pairs.

    Steps: least-squares fit of the one-step recurrence over the Krylov block
    of the first N-1 snapshots, eigenvalues of the resulting companion
    matrix, and mode recovery through the Vandermonde system.  For noiseless
    data that is exactly a short sum of exponentials the planted eigenvalues
    and modes are recovered to near machine precision.
    """
    y = series.samples
    m, n = y.shape
    if n < 3:
        raise TooFewSnapshots(f"need N >= 3 snapshots, got {n}")
    krylov = y[:, :-1]
    last = y[:, -1]
    coeff = _recurrence_coefficients(krylov, last)
    residual = last - krylov @ coeff
    eig = np.linalg.eigvals(_companion(coeff))
    _check_distinct(eig)
    modes = _vandermonde_modes(eig, krylov)
    perm = _pair_ordering(eig, modes, order)
    return KoopmanDecomposition(
        eigenvalues=eig[perm],
        modes=modes[:, perm],
        residual=residual,
        algorithm="arnoldi",
        period_s=series.period_s,
        n_snapshots=n,
        channels=series.channels,
    )


def decompose_prony(series: SnapshotSeries, order: str = "norm") -> KoopmanDecomposition:
    """Vector Prony analysis: N/2 mode pairs from N snapshots.

    The polynomial coefficients solve the stacked block-Hankel system, so
    every time shift of the data constrains the fit.  This is what makes the
    solve unique even for single-channel data, at the price of twice the
    snapshots per recovered mode compared to the companion-matrix route.
    """
    y = series.samples
    m, n2 = y.shape
    if n2 < 4:
        raise TooFewSnapshots(f"need N >= 4 snapshots, got {n2}")
    if n2 % 2:
        raise OddSampleCount(f"vector Prony needs an even snapshot count, got {n2}")
    n = n2 // 2
    hank = np.empty((m * n, n))
    for shift in range(n):
        hank[shift * m:(shift + 1) * m, :] = y[:, shift:shift + n]
    rhs = -y[:, n:].T.reshape(-1)
    poly = _recurrence_coefficients(hank, rhs)
    residual = rhs - hank @ poly
    eig = np.linalg.eigvals(_companion(-poly))
    _check_distinct(eig)
    modes = _vandermonde_modes(eig, y[:, :n])
    perm = _pair_ordering(eig, modes, order)
    return KoopmanDecomposition(
        eigenvalues=eig[perm],
        modes=modes[:, perm],
        residual=residual,
        algorithm="prony",
        period_s=series.period_s,
        n_snapshots=n2,
        channels=series.channels,
    )


def decompose_dmd(series: SnapshotSeries, order: str = "norm",
                  svd_rtol: float = 1e-10) -> KoopmanDecomposition:
    """SVD-based DMD; returns min(m, N-1, rank) modes.

    Singular values below ``svd_rtol`` times the largest are truncated.  Mode
    columns are scaled by the least-squares fit to the first snapshot so the
    usual reconstruction ``sum_j lam_j**k V_j`` applies.  With few channels
    (m much smaller than N) at most m modes exist, which may not resolve all
    dynamics present in the data; prefer arnoldi/prony there.
    """
    y = series.samples
    m, n = y.shape
    if n < 3:
        raise TooFewSnapshots(f"need N >= 3 snapshots, got {n}")
    x_now, x_next = y[:, :-1], y[:, 1:]
    q1, sing, q2h = np.linalg.svd(x_now, full_matrices=False)
    if sing.size == 0 or sing[0] == 0.0:
        raise RankCollapse("snapshot matrix is zero")
    rank = int(np.sum(sing > svd_rtol * sing[0]))
    if rank == 0:
        raise RankCollapse(f"all singular values below {svd_rtol:g} relative")
    q1 = q1[:, :rank]
    reduced = q1.T @ x_next @ q2h[:rank].T @ np.diag(1.0 / sing[:rank])
    eig, vec = np.linalg.eig(reduced)
    raw_modes = q1 @ vec
    amps, _, _, _ = np.linalg.lstsq(raw_modes, y[:, 0].astype(complex), rcond=None)
    modes = raw_modes * amps
    one_step = x_next - (q1 @ reduced @ (q1.T @ x_now))
    residual = np.sqrt(np.mean(one_step ** 2, axis=1))
    perm = _pair_ordering(eig, modes, order)
    return KoopmanDecomposition(
        eigenvalues=eig[perm],
        modes=modes[:, perm],
        residual=residual,
        algorithm="dmd",
        period_s=series.period_s,
        n_snapshots=n,
        channels=series.channels,
    )


def project_fourier(series: SnapshotSeries, freq_hz: float) -> ProjectionResult:
    """Harmonic average ``(1/N) sum_k exp(-2i pi k nu) y_k`` at ``nu = freq_hz * T``.

    This approximates the mode (times its eigenfunction value at the initial
    state) attached to the unit-modulus eigenvalue of that frequency; the
    finite-N error decays like 1/N.
    """
    nyquist = 0.5 / series.period_s
    if not (0.0 <= freq_hz <= nyquist * (1.0 + 1e-12)):
        raise FrequencyOutOfRange(f"{freq_hz} Hz outside [0, {nyquist}] Hz")
    nu = freq_hz * series.period_s
    k = np.arange(series.n_samples)
    vector = (series.samples * np.exp(-2j * np.pi * k * nu)).mean(axis=1)
    nu_wrapped = (nu + 0.5) % 1.0 - 0.5
    return ProjectionResult(nu=float(nu_wrapped), vector=vector)


def decompose_fourier(series: SnapshotSeries, freqs_hz) -> KoopmanDecomposition:
    """Projection-based decomposition at the given frequencies.

    Each positive frequency contributes a conjugate pair with unit-modulus
    eigenvalues ``exp(+-2i pi nu)``; frequency 0 (or exactly Nyquist)
    contributes a single real mode.  Mode order follows the caller's
    frequency list.
    """
    eigs = []
    cols = []
    for f in freqs_hz:
        proj = project_fourier(series, float(f))
        lam = np.exp(2j * np.pi * proj.nu)
        if proj.nu in (0.0, -0.5):
            eigs.append(lam)
            cols.append(proj.vector.real.astype(complex))
        else:
            eigs.extend([lam, lam.conjugate()])
            cols.extend([proj.vector, proj.vector.conjugate()])
    if not eigs:
        raise ValueError("need at least one frequency")
    return KoopmanDecomposition(
        eigenvalues=np.asarray(eigs),
        modes=np.column_stack(cols),
        residual=np.zeros(series.n_channels),
        algorithm="fourier",
        period_s=series.period_s,
        n_snapshots=series.n_samples,
        channels=series.channels,
    )


# ---------------------------------------------------------------------------
# serialization


def decomposition_to_dict(decomp: KoopmanDecomposition) -> dict:
    """JSON-ready dict: one entry per mode plus run metadata."""
    modes = []
    for j in range(decomp.n_modes):
        lam = decomp.eigenvalues[j]
        growth, freq = eigen_frequency(lam, decomp.period_s) if lam != 0 else (0.0, 0.0)
        col = decomp.modes[:, j]
        modes.append({
            "re": float(lam.real),
            "im": float(lam.imag),
            "growth_rate": growth,
            "frequency_hz": freq,
            "norm": float(np.linalg.norm(col)),
            "mode": [
                {
                    "channel": ch,
                    "re": float(col[i].real),
                    "im": float(col[i].imag),
                    "amplitude": float(abs(col[i])),
                    "phase_rad": float(np.angle(col[i])),
                }
                for i, ch in enumerate(decomp.channels)
            ],
        })
    return {
        "algorithm": decomp.algorithm,
        "residual_norm": decomp.residual_norm,
        "n_snapshots": decomp.n_snapshots,
        "period_s": decomp.period_s,
        "channels": list(decomp.channels),
        "residual": [float(v) for v in decomp.residual],
        "modes": modes,
    }


def decomposition_from_dict(data: dict) -> KoopmanDecomposition:
    """Inverse of :func:`decomposition_to_dict`."""
    channels = tuple(data["channels"])
    entries = data["modes"]
    eigs = np.array([complex(e["re"], e["im"]) for e in entries])
    modes = np.zeros((len(channels), len(entries)), dtype=complex)
    for j, entry in enumerate(entries):
        by_channel = {c["channel"]: complex(c["re"], c["im"]) for c in entry["mode"]}
        for i, ch in enumerate(channels):
            modes[i, j] = by_channel[ch]
    return KoopmanDecomposition(
        eigenvalues=eigs,
        modes=modes,
        residual=np.asarray(data.get("residual", [0.0] * len(channels)), dtype=float),
        algorithm=data["algorithm"],
        period_s=float(data["period_s"]),
        n_snapshots=int(data["n_snapshots"]),
        channels=channels,
    )
