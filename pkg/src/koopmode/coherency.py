"""Per-mode amplitude/phase tables, modal dynamics, and coherent channel groups.

A conjugate mode pair drives every channel at one frequency; channels whose
initial phases agree within a small angle swing together.  Groups are formed
by single-linkage clustering on circular phase distance, which matches the
pairwise closeness notion and is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAPair
from .kmd import KoopmanDecomposition, conjugate_partner, eigen_frequency
from .timeseries import SnapshotSeries


@dataclass(frozen=True, eq=False)
class ModeSummary:
    """One collapsed mode pair: per-channel amplitudes and initial phases.

    ``amplitudes[i]`` is the full swing amplitude of channel i under this
    mode pair (twice the raw mode-entry modulus; raw modulus for a real
    mode), ``phases[i]`` its initial phase in (-pi, pi].  ``norm`` is the
    Euclidean norm of the raw complex mode column.
    """

    mode_index: int
    growth_rate: float
    frequency_hz: float
    norm: float
    amplitudes: np.ndarray
    phases: np.ndarray
    channels: tuple

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=float)
        phases = np.asarray(self.phases, dtype=float)
        if amplitudes.shape != phases.shape or amplitudes.ndim != 1:
            raise ValueError("amplitudes and phases must be matching 1-D arrays")
        if np.any(amplitudes < 0):
            raise ValueError("amplitudes must be nonnegative")
        if len(self.channels) != amplitudes.shape[0]:
            raise ValueError("one channel label per amplitude")
        amplitudes.flags.writeable = False
        phases.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "channels", tuple(self.channels))


@dataclass(frozen=True)
class CoherentGroup:
    """Channels phase-coherent (within ``epsilon_rad``) for one mode pair.

    Built by single-linkage, so membership is chained: every member is within
    epsilon of some other member, not necessarily of the reference phase.
    """

    mode_index: int
    epsilon_rad: float
    members: tuple
    reference_phase_rad: float


def _representative(decomp: KoopmanDecomposition, index: int):
    """(representative index, partner index or None), positive frequency first."""
    lam = decomp.eigenvalues[index]
    if lam.imag == 0.0:
        return index, None
    partner = conjugate_partner(decomp, index)
    if lam.imag < 0.0:
        return partner, index
    return index, partner


def summarize(decomp: KoopmanDecomposition):
    """One ModeSummary per mode pair, conjugate pairs collapsed.

    Entries follow the decomposition's mode order; the positive-frequency
    member represents each pair and its amplitudes are doubled so they read
    as full per-channel swing amplitudes.  Complex modes lacking a conjugate
    partner are summarized alone (undoubled) rather than rejected.
    """
    if decomp.n_modes == 0:
        raise ValueError("empty decomposition")
    seen = set()
    out = []
    for j in range(decomp.n_modes):
        if j in seen:
            continue
        lam = decomp.eigenvalues[j]
        rep, partner = j, None
        if lam.imag != 0.0:
            try:
                rep, partner = _representative(decomp, j)
            except NotAPair:
                rep, partner = j, None
        seen.add(rep)
        if partner is not None:
            seen.add(partner)
        col = decomp.modes[:, rep]
        growth, freq = eigen_frequency(decomp.eigenvalues[rep], decomp.period_s)
        double = 2.0 if partner is not None else 1.0
        out.append(ModeSummary(
            mode_index=rep,
            growth_rate=growth,
            frequency_hz=freq,
            norm=float(np.linalg.norm(col)),
            amplitudes=double * np.abs(col),
            phases=np.angle(col),
            channels=decomp.channels,
        ))
    return out


def modal_dynamics(decomp: KoopmanDecomposition, pair: int, k_max: int) -> SnapshotSeries:
    """Real time series of one mode pair: ``2 |lam|^k A_i cos(2 pi k nu + alpha_i)``.

    ``pair`` may point at either member of a conjugate pair; a real mode is
    accepted as a degenerate pair.  Raises NotAPair when the index has a
    complex eigenvalue with no conjugate partner present.
    """
    rep, _ = _representative(decomp, pair)
    lam = decomp.eigenvalues[rep]
    col = decomp.modes[:, rep]
    k = np.arange(k_max + 1)
    arg = np.angle(lam)
    growth = np.abs(lam) ** k
    samples = 2.0 * growth * (np.abs(col)[:, None]
                              * np.cos(k * arg + np.angle(col)[:, None]))
    return SnapshotSeries(
        channels=decomp.channels,
        samples=samples,
        period_s=decomp.period_s,
        t0_s=0.0,
    )


def circular_distance(a, b):
    """Shortest angular distance |a - b| on the circle, in [0, pi]."""
    return np.abs((np.asarray(a) - np.asarray(b) + np.pi) % (2.0 * np.pi) - np.pi)


def _circular_mean(phases: np.ndarray) -> float:
    z = np.exp(1j * phases).sum()
    return float(np.angle(z)) if z != 0 else 0.0


def phase_groups(summary: ModeSummary, epsilon_rad: float, min_amplitude: float = 0.0):
    """Single-linkage groups of channels by circular phase distance.

    Channels below ``min_amplitude`` are ignored (near-silent channels have
    meaningless phases).  Two channels link when their phase distance is
    <= epsilon_rad; groups are the connected components, listed by first
    channel appearance, members in channel order.
    """
    if not (0.0 < epsilon_rad < np.pi):
        raise ValueError(f"epsilon_rad must be in (0, pi), got {epsilon_rad}")
    idx = [i for i in range(len(summary.channels)) if summary.amplitudes[i] >= min_amplitude]
    parent = {i: i for i in idx}

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, i in enumerate(idx):
        for j in idx[a_pos + 1:]:
            if circular_distance(summary.phases[i], summary.phases[j]) <= epsilon_rad:
                parent[find(j)] = find(i)

    components = {}
    for i in idx:
        components.setdefault(find(i), []).append(i)

    groups = []
    for root in sorted(components, key=lambda r: min(components[r])):
        members = sorted(components[root])
        groups.append(CoherentGroup(
            mode_index=summary.mode_index,
            epsilon_rad=float(epsilon_rad),
            members=tuple(summary.channels[i] for i in members),
            reference_phase_rad=_circular_mean(summary.phases[members]),
        ))
    return groups


def summary_table(summaries) -> list:
    """Plot-ready rows (mode_index, frequency_hz, growth_rate, norm, channel,
    amplitude, phase_rad), one row per channel per mode."""
    rows = []
    for s in summaries:
        for i, ch in enumerate(s.channels):
            rows.append({
                "mode_index": s.mode_index,
                "frequency_hz": s.frequency_hz,
                "growth_rate": s.growth_rate,
                "norm": s.norm,
                "channel": ch,
                "amplitude": float(s.amplitudes[i]),
                "phase_rad": float(s.phases[i]),
            })
    return rows
