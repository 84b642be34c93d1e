"""Reference detectors the multi-branch receiver is compared against."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .mbdf import FilterDomain, mmse_sorted_base, plain_domain, wl_domain
from .numerics import hermitian_solve
from .signal_model import ChannelRealization, IqImbalance, Modulation


class DetectorKind(str, Enum):
    RMF = "rmf"
    MMSE = "mmse"
    SIC = "sic"
    WL_SIC = "wl-sic"
    LAS = "las"
    MB_DF = "mb-df"
    WL_MB_DF = "wl-mb-df"


def rmf_detect(r_iq: np.ndarray, channel: ChannelRealization, iq: IqImbalance,
               modulation: Modulation) -> np.ndarray:
    """Receive matched filter on the imbalance-distorted effective channel A1 H."""
    h_eff = iq.a1[:, None] * channel.H
    norms = np.sum(np.abs(h_eff) ** 2, axis=0)
    if np.any(norms == 0):
        raise ValueError("effective channel has a zero-norm column")
    z = (h_eff.conj().T @ r_iq) / norms[:, None]
    return modulation.slice_symbols(z)


def mmse_detect(obs: np.ndarray, domain: FilterDomain,
                modulation: Modulation) -> np.ndarray:
    """Bank of (widely-)linear MMSE filters, no interference cancellation."""
    w = hermitian_solve(domain.R, domain.p)
    return modulation.slice_symbols(w.conj().T @ obs)


def sic_detect(obs: np.ndarray, domain: FilterDomain, modulation: Modulation,
               order: np.ndarray | None = None) -> np.ndarray:
    """Successive interference cancellation with MMSE filters.

    Streams are detected in ascending feedback-free MMSE order; after each
    decision its reconstructed contribution (the design cross-correlation
    column scaled by the decision) is subtracted and the remaining filters
    are recomputed on the deflated statistics.  Pass the augmented domain
    for WL-SIC, the plain domain for linear SIC.
    """
    R, p, s2 = domain.R, domain.p, domain.sym_power
    w0 = hermitian_solve(R, p)
    mmse = np.clip(s2 - np.real(np.sum(p.conj() * w0, axis=0)), 0.0, None)
    if order is None:
        order = mmse_sorted_base(mmse)

    obs = obs.astype(complex, copy=True)
    A = R.copy()
    s_hat = np.zeros((domain.n_streams, obs.shape[1]), dtype=complex)
    for j in order:
        w = hermitian_solve(A, p[:, j])
        s_hat[j] = modulation.slice_symbols(w.conj() @ obs)
        obs -= np.outer(p[:, j] / s2, s_hat[j])
        A = A - np.outer(p[:, j], p[:, j].conj()) / s2
    return s_hat


def las_detect(r_iq: np.ndarray, channel: ChannelRealization, iq: IqImbalance,
               modulation: Modulation, initial: np.ndarray) -> np.ndarray:
    """Likelihood-ascent search: best single-symbol updates until no 1-change
    lowers the Euclidean cost through the imbalance-distorted channel."""
    M1 = iq.a1[:, None] * channel.H
    M2 = iq.a2[:, None] * np.conj(channel.H)
    points = modulation.points
    n_streams = channel.H.shape[1]

    s_hat = initial.astype(complex, copy=True)
    resid = r_iq - M1 @ s_hat - M2 @ np.conj(s_hat)
    for col in range(r_iq.shape[1]):
        r_col = resid[:, col].copy()
        cost = float(np.vdot(r_col, r_col).real)
        while True:
            best = None
            for j in range(n_streams):
                cur = s_hat[j, col]
                for a in points:
                    if a == cur:
                        continue
                    cand = r_col - M1[:, j] * (a - cur) - M2[:, j] * np.conj(a - cur)
                    c = float(np.vdot(cand, cand).real)
                    if c < cost - 1e-12 and (best is None or c < best[0]):
                        best = (c, j, a, cand)
            if best is None:
                break
            cost, j, a, r_col = best
            s_hat[j, col] = a
    return s_hat


def ml_detect(r_iq: np.ndarray, channel: ChannelRealization, iq: IqImbalance,
              modulation: Modulation, max_streams: int = 4) -> np.ndarray:
    """Exhaustive minimum-distance detection; test oracle for small systems."""
    n_streams = channel.H.shape[1]
    if n_streams > max_streams:
        raise ValueError(f"ml_detect supports up to {max_streams} streams, got {n_streams}")
    points = modulation.points
    grids = np.meshgrid(*([points] * n_streams), indexing="ij")
    cand = np.stack([g.ravel() for g in grids])          # n_streams x n_cand
    M1 = iq.a1[:, None] * channel.H
    M2 = iq.a2[:, None] * np.conj(channel.H)
    sig = M1 @ cand + M2 @ np.conj(cand)                 # n_a x n_cand
    # ||r - sig||^2 = ||r||^2 + ||sig||^2 - 2 Re(sig^H r), minimized per column
    cross = np.real(sig.conj().T @ r_iq)                 # n_cand x Q
    cost = np.sum(np.abs(sig) ** 2, axis=0)[:, None] - 2.0 * cross
    return cand[:, np.argmin(cost, axis=0)]


__all__ = [
    "DetectorKind", "rmf_detect", "mmse_detect", "sic_detect", "las_detect",
    "ml_detect", "plain_domain", "wl_domain",
]
