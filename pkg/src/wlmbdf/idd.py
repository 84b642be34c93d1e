"""Iterative detection and decoding: the soft multi-branch detector exchanging
extrinsic LLRs with per-stream MAP decoders."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import ConvCode, Interleaver, clamp_llr
from .mbdf import BranchFilterBank, DetectionResult, detect_frame, soft_filter_outputs
from .signal_model import Frame, Modulation

SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianOutputModel:
    """Filter-output model z = V s + xi with complex amplitude V and
    Gaussian residual variance sigma2 (clamped to a small positive floor)."""

    V: complex
    sigma2: float


def estimate_output_model(z: np.ndarray, s_reference: np.ndarray,
                          sym_power: float) -> GaussianOutputModel:
    """Time-average estimates of the output amplitude and residual variance.

    The reference symbols are the detector's hard decisions on the first
    pass and the decoder's soft symbols afterwards.
    """
    z = np.asarray(z).ravel()
    s_ref = np.asarray(s_reference).ravel()
    if z.size == 0:
        raise ValueError("cannot estimate the output model from zero samples")
    if z.size != s_ref.size:
        raise ValueError(f"sample count mismatch: {z.size} vs {s_ref.size}")
    v = complex(np.mean(np.conj(s_ref) * z) / sym_power)
    sigma2 = float(np.mean(np.abs(z - v * s_ref) ** 2))
    return GaussianOutputModel(v, max(sigma2, SIGMA_FLOOR))


def detector_extrinsic_llr(z: np.ndarray, model: GaussianOutputModel,
                           modulation: Modulation) -> np.ndarray:
    """Per-bit extrinsic LLRs of the Gaussian-output model, clamped to +-50.

    Output shape is (len(z), bits_per_symbol); entry c compares the
    constellation subsets whose c-th label bit is 1 versus 0 under the
    metric exp(-|z - V a|^2 / (2 sigma2)).
    """
    z = np.asarray(z).ravel()
    metric = -np.abs(z[:, None] - model.V * modulation.points) ** 2 / (2.0 * model.sigma2)
    c = modulation.bits_per_symbol
    llr = np.empty((z.size, c))
    for bit in range(c):
        ones = modulation.labels[:, bit] == 1
        llr[:, bit] = _lse(metric[:, ones]) - _lse(metric[:, ~ones])
    return clamp_llr(llr)


def _lse(x: np.ndarray) -> np.ndarray:
    m = np.max(x, axis=-1)
    return m + np.log(np.sum(np.exp(x - m[..., None]), axis=-1))


def select_branch_llr(candidates: np.ndarray) -> np.ndarray:
    """Per-bit selection over the branch axis (axis 0): the largest LLR wins."""
    candidates = np.asarray(candidates)
    if candidates.ndim < 2 or candidates.shape[0] < 1:
        raise ValueError("expected a (branches, ...) candidate array")
    return np.max(candidates, axis=0)


def soft_symbols_from_llrs(coded_llrs: np.ndarray, modulation: Modulation) -> np.ndarray:
    """Posterior-mean symbols from per-bit LLRs in symbol-major bit order."""
    llrs = np.asarray(coded_llrs, dtype=float)
    c = modulation.bits_per_symbol
    if llrs.size % c:
        raise ValueError(f"LLR count {llrs.size} not divisible by {c}")
    p1 = 1.0 / (1.0 + np.exp(-llrs.reshape(-1, c)))        # (Q, C)
    labels = modulation.labels                              # (n_points, C)
    probs = np.prod(np.where(labels[None, :, :] == 1,
                             p1[:, None, :], 1.0 - p1[:, None, :]), axis=2)
    return probs @ modulation.points


@dataclass
class IddState:
    """Per-iteration bookkeeping of the LLR exchange (symbol-major bit order)."""

    iteration: int
    lambda1: np.ndarray          # detector extrinsic, selected over branches
    prior: np.ndarray            # lambda2^p used by this iteration
    Lambda1: np.ndarray          # lambda1 + prior
    coded_input: np.ndarray      # deinterleaved lambda1 fed to the decoder
    coded_posterior: np.ndarray  # Lambda2 from the decoder
    coded_extrinsic: np.ndarray  # lambda2 = Lambda2 - coded_input
    info_posterior: np.ndarray


@dataclass
class IddResult:
    decoded_bits: np.ndarray              # (n_streams, n_info)
    ber_per_iteration: list[float]
    errors_per_iteration: list[int] = field(default_factory=list)
    states: list[IddState] = field(default_factory=list)


def run_idd(frame: Frame, bank: BranchFilterBank, code: ConvCode,
            interleavers: list[Interleaver], modulation: Modulation,
            cost_fn, obs: np.ndarray, iterations: int = 5,
            keep_states: bool = False) -> IddResult:
    """Iterate the soft detector and the per-stream MAP decoders.

    Pass 1 detects with hard sequential decisions (as in the uncoded
    detector) and estimates the Gaussian output model against them; later
    passes place the decoder's soft symbols in the feedback path and use
    them as the model reference.  Each pass selects, per coded bit, the
    best branch LLR, decodes per stream, and feeds the decoder extrinsic
    back (interleaved) as the next prior.
    """
    n_streams = bank.n_streams
    q_len = obs.shape[1]
    c = modulation.bits_per_symbol
    n_coded = q_len * c
    n_info = code.n_info(n_coded)
    if len(interleavers) != n_streams:
        raise ValueError(f"need {n_streams} interleavers, got {len(interleavers)}")

    prior = np.zeros((n_streams, n_coded))
    s_tilde = np.zeros((n_streams, q_len), dtype=complex)
    result = IddResult(decoded_bits=np.zeros((n_streams, n_info), dtype=int),
                       ber_per_iteration=[])
    true_bits = frame.info_bits

    for it in range(1, iterations + 1):
        if it == 1:
            det: DetectionResult = detect_frame(obs, frame.r_iq, bank, modulation, cost_fn)
            z_all = det.z
            refs = det.branch_symbols
        else:
            z_all = soft_filter_outputs(obs, bank, s_tilde)
            refs = np.broadcast_to(s_tilde, z_all.shape)

        lambda1 = np.empty((n_streams, n_coded))
        for j in range(n_streams):
            cand = np.empty((bank.n_branches, n_coded))
            for l in range(bank.n_branches):
                model = estimate_output_model(z_all[l, j], refs[l, j], bank.sym_power)
                cand[l] = detector_extrinsic_llr(z_all[l, j], model, modulation).ravel()
            lambda1[j] = select_branch_llr(cand)
        prior_used = prior
        Lambda1 = lambda1 + prior_used

        coded_input = np.stack([interleavers[j].deinterleave(lambda1[j])
                                for j in range(n_streams)])
        info_post, coded_raw = code.bcjr_decode(coded_input)
        coded_ext = coded_raw - coded_input
        # Reported posterior is defined by the additive decomposition, so the
        # bookkeeping identity Lambda2 = lambda2 + lambda1^p holds exactly.
        coded_post = coded_ext + coded_input

        prior = clamp_llr(np.stack([interleavers[j].interleave(coded_ext[j])
                                    for j in range(n_streams)]))
        app = np.stack([interleavers[j].interleave(coded_post[j])
                        for j in range(n_streams)])
        s_tilde = np.stack([soft_symbols_from_llrs(clamp_llr(app[j]), modulation)
                            for j in range(n_streams)])

        decoded = (info_post > 0).astype(int)
        result.decoded_bits = decoded
        if true_bits is not None:
            errs = int(np.sum(decoded != true_bits))
            result.errors_per_iteration.append(errs)
            result.ber_per_iteration.append(errs / decoded.size)
        if keep_states:
            result.states.append(IddState(
                iteration=it, lambda1=lambda1, prior=prior_used,
                Lambda1=Lambda1, coded_input=coded_input,
                coded_posterior=coded_post, coded_extrinsic=coded_ext,
                info_posterior=info_post))
    return result
