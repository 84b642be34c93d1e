"""Uplink system model: channels, modulation, receiver I/Q imbalance and the
second-order statistics (plain and augmented) that every detector consumes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import SeededRng, complex_gaussian


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected SeededRng or numpy Generator, got {type(rng)}")


@dataclass(frozen=True)
class SystemDims:
    """K users, N_U antennas each, N_A receive antennas (N_A >= K*N_U)."""

    k: int
    n_u: int
    n_a: int

    def __post_init__(self):
        if min(self.k, self.n_u, self.n_a) < 1:
            raise ValueError("all dimensions must be >= 1")
        if self.n_a < self.k * self.n_u:
            raise ValueError(f"need n_a >= k*n_u, got {self.n_a} < {self.k * self.n_u}")

    @property
    def n_streams(self) -> int:
        return self.k * self.n_u


@dataclass(frozen=True)
class Modulation:
    """Gray-labeled constellation with average power sym_power.

    points[i] is the symbol whose bit label is the binary expansion of i
    (MSB first); labels[i] is that bit tuple.  pseudo_power is E[s^2]: equal
    to sym_power for the real-valued BPSK alphabet, zero for QPSK.
    """

    kind: str
    bits_per_symbol: int
    sym_power: float
    points: np.ndarray
    labels: np.ndarray
    pseudo_power: float

    @classmethod
    def qpsk(cls, sym_power: float = 1.0) -> "Modulation":
        # Gray map: first bit selects the I sign, second bit the Q sign.
        amp = np.sqrt(sym_power / 2.0)
        labels = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
        points = amp * ((1 - 2 * labels[:, 0]) + 1j * (1 - 2 * labels[:, 1]))
        return cls("qpsk", 2, sym_power, points, labels, 0.0)

    @classmethod
    def bpsk(cls, sym_power: float = 1.0) -> "Modulation":
        amp = np.sqrt(sym_power)
        labels = np.array([[0], [1]])
        points = amp * (1 - 2 * labels[:, 0]) + 0j
        return cls("bpsk", 1, sym_power, points, labels, sym_power)

    @classmethod
    def from_name(cls, name: str, sym_power: float = 1.0) -> "Modulation":
        name = name.lower()
        if name == "qpsk":
            return cls.qpsk(sym_power)
        if name == "bpsk":
            return cls.bpsk(sym_power)
        raise ValueError(f"unknown modulation {name!r} (expected qpsk or bpsk)")

    def modulate(self, bits: np.ndarray) -> np.ndarray:
        """Map a flat 0/1 array (length divisible by bits_per_symbol) to symbols."""
        bits = np.asarray(bits)
        c = self.bits_per_symbol
        if bits.size % c:
            raise ValueError(f"bit count {bits.size} not divisible by {c}")
        groups = bits.reshape(-1, c)
        idx = groups @ (1 << np.arange(c - 1, -1, -1))
        return self.points[idx]

    def slice_symbols(self, z: np.ndarray) -> np.ndarray:
        """Minimum-distance decision, ties to the lowest label index."""
        idx = self.slice_indices(z)
        return self.points[idx]

    def slice_indices(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        d = np.abs(z[..., None] - self.points)
        return np.argmin(d, axis=-1)

    def demap_hard(self, symbols: np.ndarray) -> np.ndarray:
        """Left inverse of modulate on noiseless symbols (nearest-point bits)."""
        idx = self.slice_indices(symbols)
        return self.labels[idx].reshape(-1)


@dataclass(frozen=True)
class ChannelRealization:
    """Flat-fading channel H (n_a x n_streams), static over a packet."""

    H: np.ndarray
    noise_var: float


def generate_channel(dims: SystemDims, rng, noise_var: float = 1.0) -> ChannelRealization:
    """i.i.d. CN(0, 1) channel entries, one draw per packet."""
    gen = _generator(rng)
    H = complex_gaussian(gen, (dims.n_a, dims.n_streams), 1.0)
    return ChannelRealization(H, noise_var)


@dataclass(frozen=True)
class IqImbalance:
    """Per-antenna gain/phase mismatch of a direct-conversion receiver.

    The baseband effect is r_iq = A1 r + A2 conj(r) with diagonal
    A1 = diag((1 + g*exp(-j*phi))/2) and A2 = diag((1 - g*exp(-j*phi))/2),
    normalized so that g=1, phi=0 gives A1 = I, A2 = 0 and so that
    A1 + A2 = I (real inputs pass through unchanged).
    """

    g: np.ndarray
    phi: np.ndarray
    a1: np.ndarray = field(repr=False)
    a2: np.ndarray = field(repr=False)

    @property
    def A1(self) -> np.ndarray:
        return np.diag(self.a1)

    @property
    def A2(self) -> np.ndarray:
        return np.diag(self.a2)

    @classmethod
    def none(cls, n_a: int) -> "IqImbalance":
        return make_iq_matrices(np.ones(n_a), np.zeros(n_a))

    @classmethod
    def draw(cls, rng, n_a: int,
             gain_range=(0.85, 1.15),
             phase_range_deg=(-15.0, 15.0)) -> "IqImbalance":
        """Independent uniform mismatch per antenna, fresh draw per packet."""
        gen = _generator(rng)
        g = gen.uniform(gain_range[0], gain_range[1], n_a)
        phi = np.deg2rad(gen.uniform(phase_range_deg[0], phase_range_deg[1], n_a))
        return make_iq_matrices(g, phi)


def make_iq_matrices(g: np.ndarray, phi: np.ndarray) -> IqImbalance:
    g = np.atleast_1d(np.asarray(g, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    if g.shape != phi.shape:
        raise ValueError(f"gain/phase length mismatch: {g.shape} vs {phi.shape}")
    rot = g * np.exp(-1j * phi)
    return IqImbalance(g, phi, (1.0 + rot) / 2.0, (1.0 - rot) / 2.0)


def apply_iq_imbalance(r: np.ndarray, iq: IqImbalance) -> np.ndarray:
    """r_iq = A1 r + A2 conj(r); works on vectors or (n_a x Q) sample blocks."""
    r = np.asarray(r)
    if r.shape[0] != iq.a1.shape[0]:
        raise ValueError(f"r has {r.shape[0]} rows, imbalance has {iq.a1.shape[0]}")
    if r.ndim == 1:
        return iq.a1 * r + iq.a2 * np.conj(r)
    return iq.a1[:, None] * r + iq.a2[:, None] * np.conj(r)


def augment(r_iq: np.ndarray) -> np.ndarray:
    """Stack a signal block on top of its conjugate: [r_iq; conj(r_iq)]."""
    return np.concatenate([r_iq, np.conj(r_iq)], axis=0)


@dataclass(frozen=True)
class AugmentedStatistics:
    """All second-order statistics of one channel + imbalance realization.

    R, C          covariance / pseudo-covariance of the ideal received vector,
                  R = sym_power * H H^H + noise_var I, C = pseudo_power * H H^T.
    R_iq, C_iq    the same moments after the imbalance map.
    R_a           2N_A x 2N_A augmented covariance [[R_iq, C_iq], [C_iq*, R_iq*]].
    p_a           2N_A x KN_U; column j is E[r_a s_j*].  Under the
                  perfect-decision design model this matrix also plays the
                  role of the feedback cross-correlation Q_a = E[r_a s^H].
    p_plain       N_A x KN_U; column j is E[r_iq s_j*] (top block of p_a).
    Per-stream symbol moments are scalar multiples of unit vectors:
    E[s s_j*] = sym_power * e_j and E[s* s_j*] = pseudo_power * e_j.
    """

    R: np.ndarray
    C: np.ndarray
    R_iq: np.ndarray
    C_iq: np.ndarray
    R_a: np.ndarray
    p_a: np.ndarray
    sym_power: float
    pseudo_power: float
    noise_var: float

    @property
    def Q_a(self) -> np.ndarray:
        return self.p_a

    @property
    def p_plain(self) -> np.ndarray:
        n_a = self.R.shape[0]
        return self.p_a[:n_a]

    @property
    def n_streams(self) -> int:
        return self.p_a.shape[1]


def build_second_order_stats(H: np.ndarray, modulation: Modulation,
                             noise_var: float, iq: IqImbalance) -> AugmentedStatistics:
    """Analytic R, C, R_iq, C_iq, R_a and cross-correlations for one realization.

    The conjugate-conjugate moment in C_iq is A2 conj(C) A2^T (the unconjugated
    second moment of conj(r) is conj(C)); the cross-correlation columns carry
    the pseudo-power factor, so the conjugate-channel terms vanish for QPSK.
    """
    H = np.asarray(H, dtype=complex)
    n_a = H.shape[0]
    if iq.a1.shape[0] != n_a:
        raise ValueError(f"imbalance size {iq.a1.shape[0]} != n_a {n_a}")
    s2 = modulation.sym_power
    p2 = modulation.pseudo_power
    A1, A2 = iq.A1, iq.A2

    R = s2 * H @ H.conj().T + noise_var * np.eye(n_a)
    C = p2 * H @ H.T

    R_iq = (A1 @ R @ A1.conj().T + A1 @ C @ A2.conj().T
            + A2 @ C.conj() @ A1.conj().T + A2 @ R.conj() @ A2.conj().T)
    C_iq = (A1 @ C @ A1.T + A1 @ R @ A2.T
            + A2 @ R.conj() @ A1.T + A2 @ C.conj() @ A2.T)
    R_a = np.block([[R_iq, C_iq], [C_iq.conj(), R_iq.conj()]])

    p_top = s2 * A1 @ H + p2 * A2 @ H.conj()
    p_bot = p2 * A1.conj() @ H.conj() + s2 * A2.conj() @ H
    p_a = np.vstack([p_top, p_bot])

    return AugmentedStatistics(R=R, C=C, R_iq=R_iq, C_iq=C_iq, R_a=R_a, p_a=p_a,
                               sym_power=s2, pseudo_power=p2, noise_var=noise_var)


@dataclass
class Frame:
    """One packet end to end: bits, symbols and the received sample blocks."""

    info_bits: np.ndarray | None
    coded_bits: np.ndarray | None
    interleaved_bits: np.ndarray | None
    symbols: np.ndarray          # n_streams x Q
    r: np.ndarray                # n_a x Q, before imbalance
    r_iq: np.ndarray             # n_a x Q
    r_a: np.ndarray              # 2 n_a x Q


def transmit(symbols: np.ndarray, channel: ChannelRealization,
             iq: IqImbalance, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pass a symbol block through the channel, add noise, apply imbalance."""
    gen = _generator(rng)
    n_a = channel.H.shape[0]
    noise = complex_gaussian(gen, (n_a, symbols.shape[1]), channel.noise_var)
    r = channel.H @ symbols + noise
    r_iq = apply_iq_imbalance(r, iq)
    return r, r_iq, augment(r_iq)
