"""New England 39-bus network data and its reduction to the classical model.

The raw tables are the standard published load-flow data of the 10-machine
New England test system (100 MVA system base, 60 Hz) together with the usual
machine constants (inertia H and transient reactance x'd).  From these, the
builder solves the load flow, computes internal machine voltages, folds the
loads in as constant impedances, and Kron-reduces the network onto the ten
machine internal nodes.  The unit at bus 39 aggregates the external system
(H = 500 s); following common practice it is frozen as the infinite bus and
the remaining nine machines keep their swing dynamics.

The shipped ``data/ne39.json`` file is generated by :func:`build_ne39_system`
and is the single source of truth for simulation parameters; regenerating it
reproduces the file up to floating-point formatting.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence

BASE_MVA = 100.0
F_BASE_HZ = 60.0

# bus, Pd [MW], Qd [Mvar]
_LOADS = [
    (1, 97.6, 44.2),
    (3, 322.0, 2.4),
    (4, 500.0, 184.0),
    (7, 233.8, 84.0),
    (8, 522.0, 176.6),
    (9, 6.5, -66.6),
    (12, 8.53, 88.0),
    (15, 320.0, 153.0),
    (16, 329.0, 32.3),
    (18, 158.0, 30.0),
    (20, 680.0, 103.0),
    (21, 274.0, 115.0),
    (23, 247.5, 84.6),
    (24, 308.6, -92.2),
    (25, 224.0, 47.2),
    (26, 139.0, 17.0),
    (27, 281.0, 75.5),
    (28, 206.0, 27.6),
    (29, 283.5, 26.9),
    (31, 9.2, 4.6),
    (39, 1104.0, 250.0),
]

# from bus, to bus, r, x, total line charging b (all p.u.), off-nominal tap
# (0 = plain line)
_BRANCHES = [
    (1, 2, 0.0035, 0.0411, 0.6987, 0.0),
    (1, 39, 0.0010, 0.0250, 0.7500, 0.0),
    (2, 3, 0.0013, 0.0151, 0.2572, 0.0),
    (2, 25, 0.0070, 0.0086, 0.1460, 0.0),
    (2, 30, 0.0000, 0.0181, 0.0000, 1.025),
    (3, 4, 0.0013, 0.0213, 0.2214, 0.0),
    (3, 18, 0.0011, 0.0133, 0.2138, 0.0),
    (4, 5, 0.0008, 0.0128, 0.1342, 0.0),
    (4, 14, 0.0008, 0.0129, 0.1382, 0.0),
    (5, 6, 0.0002, 0.0026, 0.0434, 0.0),
    (5, 8, 0.0008, 0.0112, 0.1476, 0.0),
    (6, 7, 0.0006, 0.0092, 0.1130, 0.0),
    (6, 11, 0.0007, 0.0082, 0.1389, 0.0),
    (6, 31, 0.0000, 0.0250, 0.0000, 1.070),
    (7, 8, 0.0004, 0.0046, 0.0780, 0.0),
    (8, 9, 0.0023, 0.0363, 0.3804, 0.0),
    (9, 39, 0.0010, 0.0250, 1.2000, 0.0),
    (10, 11, 0.0004, 0.0043, 0.0729, 0.0),
    (10, 13, 0.0004, 0.0043, 0.0729, 0.0),
    (10, 32, 0.0000, 0.0200, 0.0000, 1.070),
    (12, 11, 0.0016, 0.0435, 0.0000, 1.006),
    (12, 13, 0.0016, 0.0435, 0.0000, 1.006),
    (13, 14, 0.0009, 0.0101, 0.1723, 0.0),
    (14, 15, 0.0018, 0.0217, 0.3660, 0.0),
    (15, 16, 0.0009, 0.0094, 0.1710, 0.0),
    (16, 17, 0.0007, 0.0089, 0.1342, 0.0),
    (16, 19, 0.0016, 0.0195, 0.3040, 0.0),
    (16, 21, 0.0008, 0.0135, 0.2548, 0.0),
    (16, 24, 0.0003, 0.0059, 0.0680, 0.0),
    (17, 18, 0.0007, 0.0082, 0.1319, 0.0),
    (17, 27, 0.0013, 0.0173, 0.3216, 0.0),
    (19, 20, 0.0007, 0.0138, 0.0000, 1.060),
    (19, 33, 0.0007, 0.0142, 0.0000, 1.070),
    (20, 34, 0.0009, 0.0180, 0.0000, 1.009),
    (21, 22, 0.0008, 0.0140, 0.2565, 0.0),
    (22, 23, 0.0006, 0.0096, 0.1846, 0.0),
    (22, 35, 0.0000, 0.0143, 0.0000, 1.025),
    (23, 24, 0.0022, 0.0350, 0.3610, 0.0),
    (23, 36, 0.0005, 0.0272, 0.0000, 1.000),
    (25, 26, 0.0032, 0.0323, 0.5310, 0.0),
    (25, 37, 0.0006, 0.0232, 0.0000, 1.025),
    (26, 27, 0.0014, 0.0147, 0.2396, 0.0),
    (26, 28, 0.0043, 0.0474, 0.7802, 0.0),
    (26, 29, 0.0057, 0.0625, 1.0290, 0.0),
    (28, 29, 0.0014, 0.0151, 0.2490, 0.0),
    (29, 38, 0.0008, 0.0156, 0.0000, 1.025),
]

# unit number, bus, Pg [MW], voltage setpoint, inertia H [s], transient
# reactance x'd [p.u.] -- unit 1 is the external-system aggregate
_MACHINES = [
    (1, 39, 1000.0, 1.0300, 500.0, 0.006),
    (2, 31, 0.0, 0.9820, 30.3, 0.0697),  # slack unit, Pg from the load flow
    (3, 32, 650.0, 0.9841, 35.8, 0.0531),
    (4, 33, 632.0, 0.9972, 28.6, 0.0436),
    (5, 34, 508.0, 1.0123, 26.0, 0.1320),
    (6, 35, 650.0, 1.0494, 34.8, 0.0500),
    (7, 36, 560.0, 1.0636, 26.4, 0.0490),
    (8, 37, 540.0, 1.0275, 24.3, 0.0570),
    (9, 38, 830.0, 1.0265, 34.5, 0.0570),
    (10, 30, 250.0, 1.0499, 42.0, 0.0310),
]

SLACK_BUS = 31

# Uniform D/H ratio giving per-step eigenvalue moduli near 0.998 at the 50 Hz
# sampling used throughout; the damped runs decay slowly but visibly.
DAMPING_OVER_H = 9.0e-4

N_BUS = 39


def build_ybus() -> np.ndarray:
    """Complex 39 x 39 bus admittance matrix from the branch table."""
    y = np.zeros((N_BUS, N_BUS), dtype=complex)
    for f, t, r, x, b, tap in _BRANCHES:
        i, j = f - 1, t - 1
        ys = 1.0 / complex(r, x)
        ysh = 0.5j * b
        a = tap if tap else 1.0
        y[i, i] += (ys + ysh) / a ** 2
        y[j, j] += ys + ysh
        y[i, j] -= ys / a
        y[j, i] -= ys / a
    return y


def solve_load_flow(tol: float = 1e-10, max_iter: int = 30):
    """Newton-Raphson load flow.

    Returns (V, S_gen): complex bus voltages and per-unit complex power
    produced by each machine in unit order.
    """
    ybus = build_ybus()
    p_load = np.zeros(N_BUS)
    q_load = np.zeros(N_BUS)
    for bus, p, q in _LOADS:
        p_load[bus - 1] = p / BASE_MVA
        q_load[bus - 1] = q / BASE_MVA

    p_gen = np.zeros(N_BUS)
    v_set = np.ones(N_BUS)
    gen_bus = []
    for _, bus, pg, vset, _, _ in _MACHINES:
        p_gen[bus - 1] = pg / BASE_MVA
        v_set[bus - 1] = vset
        gen_bus.append(bus - 1)

    slack = SLACK_BUS - 1
    pv = [b for b in gen_bus if b != slack]
    pq = [b for b in range(N_BUS) if b not in gen_bus]
    p_spec = p_gen - p_load
    q_spec = -q_load

    vm = v_set.copy()
    va = np.zeros(N_BUS)

    def injections(vm, va):
        v = vm * np.exp(1j * va)
        s = v * np.conj(ybus @ v)
        return s.real, s.imag

    ang_idx = pv + pq     # unknown angles
    mag_idx = pq          # unknown magnitudes
    for _ in range(max_iter):
        p_calc, q_calc = injections(vm, va)
        mis = np.concatenate([(p_spec - p_calc)[ang_idx], (q_spec - q_calc)[mag_idx]])
        if np.max(np.abs(mis)) < tol:
            break
        v = vm * np.exp(1j * va)
        ibus = ybus @ v
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_e = np.diag(v / vm)
        # complex power flow derivatives, standard polar formulation
        ds_dva = 1j * diag_v @ np.conj(diag_i - ybus @ diag_v)
        ds_dvm = diag_v @ np.conj(ybus @ diag_e) + np.conj(diag_i) @ diag_e
        j11 = ds_dva[np.ix_(ang_idx, ang_idx)].real
        j12 = ds_dvm[np.ix_(ang_idx, mag_idx)].real
        j21 = ds_dva[np.ix_(mag_idx, ang_idx)].imag
        j22 = ds_dvm[np.ix_(mag_idx, mag_idx)].imag
        jac = np.block([[j11, j12], [j21, j22]])
        step = np.linalg.solve(jac, mis)
        va[ang_idx] += step[:len(ang_idx)]
        vm[mag_idx] += step[len(ang_idx):]
    else:
        raise NoConvergence(f"load flow not converged in {max_iter} iterations")

    v = vm * np.exp(1j * va)
    p_calc, q_calc = injections(vm, va)
    s_gen = []
    for _, bus, _, _, _, _ in _MACHINES:
        b = bus - 1
        s_gen.append(complex(p_calc[b] + p_load[b], q_calc[b] + q_load[b]))
    return v, np.asarray(s_gen)


def reduce_to_internal_nodes(v: np.ndarray, s_gen: np.ndarray):
    """Kron reduction onto machine internal nodes with constant-impedance loads.

    Returns (E, delta, y_red): internal voltage magnitudes and angles per
    unit, and the reduced 10 x 10 complex admittance matrix.
    """
    ybus = build_ybus().copy()
    for bus, p, q in _LOADS:
        b = bus - 1
        ybus[b, b] += complex(p, -q) / (BASE_MVA * abs(v[b]) ** 2)

    n_mach = len(_MACHINES)
    y_aug = np.zeros((N_BUS + n_mach, N_BUS + n_mach), dtype=complex)
    y_aug[:N_BUS, :N_BUS] = ybus
    e_int = np.zeros(n_mach, dtype=complex)
    for g, (_, bus, _, _, _, xdp) in enumerate(_MACHINES):
        b = bus - 1
        y_g = 1.0 / complex(0.0, xdp)
        gi = N_BUS + g
        y_aug[b, b] += y_g
        y_aug[gi, gi] += y_g
        y_aug[b, gi] -= y_g
        y_aug[gi, b] -= y_g
        current = np.conj(s_gen[g] / v[b])
        e_int[g] = v[b] + 1j * xdp * current

    y_bb = y_aug[:N_BUS, :N_BUS]
    y_bg = y_aug[:N_BUS, N_BUS:]
    y_gb = y_aug[N_BUS:, :N_BUS]
    y_gg = y_aug[N_BUS:, N_BUS:]
    y_red = y_gg - y_gb @ np.linalg.solve(y_bb, y_bg)
    return np.abs(e_int), np.angle(e_int), y_red


def build_ne39_system():
    """Full pipeline: load flow, internal voltages, Kron reduction.

    Returns a :class:`koopmode.swingsim.SwingSystem` whose stored equilibrium
    is the load-flow operating point (the electrical output there defines the
    mechanical input powers, so it is an exact fixed point of the reduced
    model).
    """
    from .swingsim import SwingSystem  # local import avoids a cycle

    v, s_gen = solve_load_flow()
    e_mag, delta, y_red = reduce_to_internal_nodes(v, s_gen)
    g_red = y_red.real
    b_red = y_red.imag

    # electrical power at the load-flow point; machine 0 is the aggregate
    n = len(_MACHINES)
    theta = delta[:, None] - delta[None, :]
    ee = np.outer(e_mag, e_mag)
    p_el = (ee * (g_red * np.cos(theta) + b_red * np.sin(theta))).sum(axis=1)

    h = np.array([m[4] for m in _MACHINES])
    labels = tuple(f"g{m[0]}" for m in _MACHINES[1:])
    return SwingSystem(
        gen_labels=labels,
        f_b=F_BASE_HZ,
        H=h[1:],
        D=DAMPING_OVER_H * h[1:],
        P_m=p_el[1:],
        E=e_mag[1:],
        G=g_red[1:, 1:],
        B=b_red[1:, 1:],
        e_ib=float(e_mag[0]),
        delta_ib=float(delta[0]),
        g_ib=g_red[1:, 0],
        b_ib=b_red[1:, 0],
        delta_star=delta[1:],
    )
