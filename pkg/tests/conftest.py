"""Shared fixtures and the acceptance report."""

import numpy as np
import pytest

from magbd.experiments import PRESETS
from magbd.scenario import distance_matrix, make_channel

_REPORT = []


def record(name, ok, detail=""):
    """Log one acceptance criterion; the lines are printed at session end."""
    _REPORT.append((name, bool(ok), detail))
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _REPORT:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture(scope="session")
def desk():
    return PRESETS["desk"]


@pytest.fixture(scope="session")
def desk_D(desk):
    return distance_matrix(desk.grid())


def degenerate_channel(scenario, seed, copy=(0, 1), factor=0.7 - 0.2j):
    """Scenario channel with column ``copy[1]`` a multiple of column ``copy[0]``.

    Any placement that uses both positions sees a rank-one channel, so with
    two users and a target above 0 dB it is infeasible while the other
    placements stay feasible.
    """
    ch = scenario.channel(seed)
    H = ch.H_base.copy()
    H[:, copy[1]] = factor * H[:, copy[0]]
    return make_channel(H, ch.M, ch.noise)


def fixed_point_power(H, gamma, noise, iters=5000, tol=1e-13):
    """Minimum downlink power by the uplink-downlink duality fixed point.

    ``lambda_k = 1 / ((1 + 1/gamma_k) h_k^H (I + sum_j lambda_j h_j h_j^H)^-1 h_k)``
    on noise-whitened channels; the power is ``sum_k lambda_k``. Returns
    ``inf`` when the iteration diverges (targets not attainable).
    """
    H = np.asarray(H, dtype=complex) / np.sqrt(np.asarray(noise, dtype=float))[:, None]
    K, M = H.shape
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), (K,))
    hs = H.conj().T  # column k is the conjugate of row k
    lam = np.zeros(K)
    for _ in range(iters):
        S = np.eye(M, dtype=complex) + (hs * lam) @ hs.conj().T
        q = np.real(np.einsum("mk,mk->k", hs.conj(), np.linalg.solve(S, hs)))
        new = 1.0 / ((1.0 + 1.0 / gamma) * q)
        if not np.all(np.isfinite(new)) or new.sum() > 1e30:
            return np.inf
        if np.max(np.abs(new - lam) / new) < tol:
            return float(new.sum())
        lam = new
    return float(lam.sum())
