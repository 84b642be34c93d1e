"""Convolutional encoding, interleaving and exact log-domain BCJR decoding.

LLR convention throughout: lambda = log P(bit = 1) / P(bit = 0), so positive
values favor bit 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LLR_CLAMP = 50.0
_NEG = -1e30


def clamp_llr(x: np.ndarray) -> np.ndarray:
    return np.clip(x, -LLR_CLAMP, LLR_CLAMP)


def _parity(x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x = x >> 1
    return out


@dataclass(frozen=True)
class ConvCode:
    """Rate-1/2 non-recursive convolutional code, terminated trellis.

    The default is the 4-state code with octal generators (7, 5), constraint
    length 3.  Termination appends constraint_length - 1 zero tail bits, so
    encode() emits 2 * (n_info + memory) coded bits.
    """

    generators: tuple[int, int] = (0o7, 0o5)
    constraint_length: int = 3

    # Trellis tables, derived once in __post_init__.
    _next_state: np.ndarray = field(init=False, repr=False)
    _out_bits: np.ndarray = field(init=False, repr=False)
    _incoming: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.memory
        n_states = 1 << m
        states = np.arange(n_states)
        nxt = np.zeros((n_states, 2), dtype=int)
        out = np.zeros((n_states, 2, self.n_out), dtype=int)
        for b in (0, 1):
            window = (b << m) | states           # (x[k], x[k-1], ..., x[k-m])
            nxt[:, b] = (states >> 1) | (b << (m - 1))
            for c, g in enumerate(self.generators):
                out[:, b, c] = _parity(g & window)
        # incoming[t] lists the two (source state, input bit) pairs landing on t.
        inc = np.zeros((n_states, 2, 2), dtype=int)
        fill = np.zeros(n_states, dtype=int)
        for s in range(n_states):
            for b in (0, 1):
                t = nxt[s, b]
                inc[t, fill[t]] = (s, b)
                fill[t] += 1
        object.__setattr__(self, "_next_state", nxt)
        object.__setattr__(self, "_out_bits", out)
        object.__setattr__(self, "_incoming", inc)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    def n_coded(self, n_info: int) -> int:
        return self.n_out * (n_info + self.memory)

    def n_info(self, n_coded: int) -> int:
        n, rem = divmod(n_coded, self.n_out)
        if rem:
            raise ValueError(f"coded length {n_coded} not divisible by {self.n_out}")
        return n - self.memory

    def encode(self, info_bits: np.ndarray) -> np.ndarray:
        """Shift-register encoding followed by the zero tail."""
        info_bits = np.asarray(info_bits, dtype=int).ravel()
        if info_bits.size and not np.all((info_bits == 0) | (info_bits == 1)):
            raise ValueError("info bits must be 0 or 1")
        bits = np.concatenate([info_bits, np.zeros(self.memory, dtype=int)])
        coded = np.empty(self.n_out * bits.size, dtype=int)
        state = 0
        for k, b in enumerate(bits):
            coded[self.n_out * k: self.n_out * (k + 1)] = self._out_bits[state, b]
            state = self._next_state[state, b]
        return coded

    def bcjr_decode(self, coded_llrs: np.ndarray,
                    info_priors: np.ndarray | None = None
                    ) -> tuple[np.ndarray, np.ndarray]:
        """Exact log-domain forward-backward APP decoding, batched.

        coded_llrs has shape (..., n_out*(n+memory)); info_priors, if given,
        has shape (..., n).  Returns (info posterior LLRs, coded posterior
        LLRs) of shapes (..., n) and coded_llrs.shape.  The recursion uses
        exact max-star (logaddexp); values are not clamped here so that the
        posteriors can be checked against exhaustive enumeration.
        """
        coded_llrs = np.asarray(coded_llrs, dtype=float)
        squeeze = coded_llrs.ndim == 1
        lc = np.atleast_2d(coded_llrs)
        batch = lc.shape[0]
        n_steps = lc.shape[1] // self.n_out
        n_info = n_steps - self.memory
        if n_info < 1:
            raise ValueError("coded block too short for the terminated trellis")
        if info_priors is None:
            lp = np.zeros((batch, n_info))
        else:
            lp = np.atleast_2d(np.asarray(info_priors, dtype=float))
            if lp.shape != (batch, n_info):
                raise ValueError(f"info prior shape {lp.shape} != {(batch, n_info)}")

        n_states = 1 << self.memory
        nxt = self._next_state                       # (S, 2)
        out = self._out_bits                         # (S, 2, n_out)

        # gamma[k]: (batch, S, 2) branch metrics; tail steps forbid input 1.
        gammas = np.empty((n_steps, batch, n_states, 2))
        for k in range(n_steps):
            lck = lc[:, self.n_out * k: self.n_out * (k + 1)]   # (batch, n_out)
            g = np.einsum("bc,stc->bst", lck, out.astype(float))
            if k < n_info:
                g[:, :, 1] += lp[:, k][:, None]
            else:
                g[:, :, 1] = _NEG
            gammas[k] = g

        inc_s = self._incoming[:, :, 0]              # (S, 2)
        inc_b = self._incoming[:, :, 1]

        alpha = np.full((n_steps + 1, batch, n_states), _NEG)
        alpha[0, :, 0] = 0.0
        for k in range(n_steps):
            src = alpha[k][:, :, None] + gammas[k]              # (batch, S, 2)
            merged = np.logaddexp(src[:, inc_s[:, 0], inc_b[:, 0]],
                                  src[:, inc_s[:, 1], inc_b[:, 1]])
            alpha[k + 1] = np.maximum(merged, _NEG)

        out_flat = out.reshape(-1, self.n_out)
        ones_masks = [out_flat[:, c] == 1 for c in range(self.n_out)]
        beta = np.full((batch, n_states), _NEG)
        beta[:, 0] = 0.0
        info_post = np.empty((batch, n_info))
        coded_post = np.empty_like(lc)
        for k in range(n_steps - 1, -1, -1):
            g_plus_beta = gammas[k] + beta[:, nxt]              # (batch, S, 2)
            metric = alpha[k][:, :, None] + g_plus_beta
            flat = metric.reshape(batch, -1)
            for c in range(self.n_out):
                num = _lse(flat[:, ones_masks[c]])
                den = _lse(flat[:, ~ones_masks[c]])
                coded_post[:, self.n_out * k + c] = num - den
            if k < n_info:
                info_post[:, k] = _lse(metric[:, :, 1]) - _lse(metric[:, :, 0])
            beta = np.maximum(np.logaddexp(g_plus_beta[:, :, 0],
                                           g_plus_beta[:, :, 1]), _NEG)

        if squeeze:
            return info_post[0], coded_post[0]
        return info_post, coded_post


def _lse(x: np.ndarray) -> np.ndarray:
    """logsumexp over the last axis, safe for -inf-like floor values."""
    m = np.max(x, axis=-1)
    return m + np.log(np.sum(np.exp(x - m[..., None]), axis=-1))


@dataclass(frozen=True)
class Interleaver:
    """Bijective index permutation with its inverse."""

    permutation: np.ndarray

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=int)
        if sorted(perm.tolist()) != list(range(perm.size)):
            raise ValueError("permutation is not a bijection on 0..n-1")
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def random(cls, length: int, rng) -> "Interleaver":
        gen = rng.generator() if hasattr(rng, "generator") else rng
        return cls(gen.permutation(length))

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        return cls(np.arange(length))

    def interleave(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.permutation.size:
            raise ValueError(f"length {x.shape[-1]} != interleaver size {self.permutation.size}")
        return x[..., self.permutation]

    def deinterleave(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[-1] != self.permutation.size:
            raise ValueError(f"length {y.shape[-1]} != interleaver size {self.permutation.size}")
        out = np.empty_like(y)
        out[..., self.permutation] = y
        return out
