"""Tests for the iterative detection-and-decoding chain."""

import numpy as np
import pytest

from wlmbdf.coding import ConvCode, Interleaver, clamp_llr
from wlmbdf.harness import snr_to_noise_variance
from wlmbdf.idd import (GaussianOutputModel, detector_extrinsic_llr,
                        estimate_output_model, run_idd, select_branch_llr,
                        soft_symbols_from_llrs)
from wlmbdf.mbdf import (DetectorConfig, design_branch_filters,
                         euclidean_cost_model, soft_filter_outputs, wl_domain)
from wlmbdf.numerics import complex_gaussian
from wlmbdf.signal_model import (Frame, IqImbalance, Modulation, SystemDims,
                                 build_second_order_stats, generate_channel,
                                 transmit)


def _coded_frame(rng, dims, mod, code, noise_var, q_len=200, imbalance=True):
    ch = generate_channel(dims, rng, noise_var)
    iq = IqImbalance.draw(rng, dims.n_a) if imbalance else IqImbalance.none(dims.n_a)
    n_coded = q_len * mod.bits_per_symbol
    n_info = code.n_info(n_coded)
    info = rng.integers(0, 2, (dims.n_streams, n_info))
    ilvs = [Interleaver(rng.permutation(n_coded)) for _ in range(dims.n_streams)]
    coded = np.stack([code.encode(info[j]) for j in range(dims.n_streams)])
    inter = np.stack([ilvs[j].interleave(coded[j]) for j in range(dims.n_streams)])
    sym = np.stack([mod.modulate(inter[j]) for j in range(dims.n_streams)])
    r, r_iq, r_a = transmit(sym, ch, iq, rng)
    frame = Frame(info, coded, inter, sym, r, r_iq, r_a)
    stats = build_second_order_stats(ch.H, mod, noise_var, iq)
    return frame, ch, iq, stats, ilvs


class TestOutputModel:
    def test_exact_passthrough(self):
        rng = np.random.default_rng(0)
        mod = Modulation.qpsk()
        s = mod.modulate(rng.integers(0, 2, 1000))
        model = estimate_output_model(s, s, mod.sym_power)
        assert model.V == pytest.approx(1.0, abs=1e-12)
        assert model.sigma2 == pytest.approx(1e-12)

    def test_amplitude_and_variance_moments(self):
        rng = np.random.default_rng(1)
        mod = Modulation.qpsk()
        s = mod.modulate(rng.integers(0, 2, 2 * 100_000)).reshape(-1)
        z = 2.0 * s + complex_gaussian(rng, s.size, 1.0)
        model = estimate_output_model(z, s, 1.0)
        assert 1.98 <= abs(model.V) <= 2.02
        assert 0.97 <= model.sigma2 <= 1.03

    def test_uncorrelated_reference(self):
        rng = np.random.default_rng(2)
        n = 100_000
        s = complex_gaussian(rng, n, 1.0)
        z = complex_gaussian(rng, n, 1.0)
        model = estimate_output_model(z, s, 1.0)
        assert abs(model.V) <= 3.0 / np.sqrt(n)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="zero samples"):
            estimate_output_model(np.zeros(0), np.zeros(0), 1.0)


class TestExtrinsicLlr:
    def test_symmetric_point_gives_equal_positive_llrs(self):
        mod = Modulation.qpsk()
        z = np.array([(1 + 1j) / np.sqrt(2)])
        llr = detector_extrinsic_llr(z, GaussianOutputModel(1.0, 1.0), mod)
        # label bit 1 flips the sign axes, so the all-zeros symbol pushes
        # both bit LLRs negative with equal magnitude
        assert llr[0, 0] == pytest.approx(llr[0, 1])
        assert llr[0, 0] < 0

    def test_equidistant_point_gives_zero(self):
        mod = Modulation.qpsk()
        llr = detector_extrinsic_llr(np.array([0.0 + 0.0j]),
                                     GaussianOutputModel(1.0, 1.0), mod)
        assert np.allclose(llr, 0.0, atol=1e-12)

    def test_matches_probability_domain(self):
        rng = np.random.default_rng(3)
        mod = Modulation.qpsk()
        model = GaussianOutputModel(0.8 - 0.2j, 0.7)
        z = complex_gaussian(rng, 50, 1.0)
        llr = detector_extrinsic_llr(z, model, mod)
        for i, zi in enumerate(z):
            w = np.exp(-np.abs(zi - model.V * mod.points) ** 2 / (2 * model.sigma2))
            for c in range(2):
                ones = mod.labels[:, c] == 1
                direct = np.log(w[ones].sum() / w[~ones].sum())
                assert llr[i, c] == pytest.approx(direct, abs=1e-9)

    def test_clamped(self):
        mod = Modulation.qpsk()
        z = np.array([100.0 + 100.0j])
        llr = detector_extrinsic_llr(z, GaussianOutputModel(1.0, 1e-6), mod)
        assert np.abs(llr).max() <= 50.0


class TestBranchSelection:
    def test_single_candidate_identity(self):
        cand = np.array([[0.5, -1.0, 2.0]])
        assert np.array_equal(select_branch_llr(cand), cand[0])

    def test_argmax(self):
        assert select_branch_llr(np.array([[-2.0], [3.0], [1.0]]))[0] == 3.0

    def test_dominates_candidates(self):
        rng = np.random.default_rng(4)
        cand = rng.normal(0, 2, (5, 40))
        out = select_branch_llr(cand)
        assert np.all(out[None, :] >= cand)


class TestSoftSymbols:
    def test_zero_llrs_give_zero_symbols(self):
        mod = Modulation.qpsk()
        assert np.allclose(soft_symbols_from_llrs(np.zeros(20), mod), 0.0)

    def test_saturated_llrs_hit_constellation(self):
        mod = Modulation.qpsk()
        s = soft_symbols_from_llrs(np.array([50.0, -50.0]), mod)   # label (1, 0)
        assert s[0] == pytest.approx(mod.points[2], abs=1e-12)

    def test_convex_hull_bound(self):
        rng = np.random.default_rng(5)
        mod = Modulation.qpsk()
        s = soft_symbols_from_llrs(rng.normal(0, 3, 400), mod)
        assert np.all(np.abs(s) <= np.abs(mod.points).max() + 1e-12)


class TestRunIdd:
    def test_noise_free_is_error_free_at_first_iteration(self):
        rng = np.random.default_rng(6)
        dims = SystemDims(2, 1, 4)
        mod, code = Modulation.qpsk(), ConvCode()
        frame, ch, iq, stats, ilvs = _coded_frame(rng, dims, mod, code, 1e-9,
                                                  q_len=100)
        bank = design_branch_filters(wl_domain(stats), DetectorConfig(2, 1.0))
        res = run_idd(frame, bank, code, ilvs, mod,
                      euclidean_cost_model(ch, iq), frame.r_a, iterations=2)
        assert res.ber_per_iteration[0] == 0.0
        assert np.array_equal(res.decoded_bits, frame.info_bits)

    def test_llr_additivity_bookkeeping(self):
        """Lambda1 = lambda1 + prior and Lambda2 = lambda2 + input, exactly."""
        rng = np.random.default_rng(7)
        dims = SystemDims(2, 1, 4)
        mod, code = Modulation.qpsk(), ConvCode()
        noise_var = snr_to_noise_variance(4.0, dims.n_streams, 1.0, code.rate, 2)
        frame, ch, iq, stats, ilvs = _coded_frame(rng, dims, mod, code, noise_var,
                                                  q_len=100)
        bank = design_branch_filters(wl_domain(stats), DetectorConfig(2, 1.0))
        res = run_idd(frame, bank, code, ilvs, mod,
                      euclidean_cost_model(ch, iq), frame.r_a, iterations=3,
                      keep_states=True)
        for state in res.states:
            assert np.array_equal(state.Lambda1, state.lambda1 + state.prior)
            assert np.array_equal(state.coded_posterior,
                                  state.coded_extrinsic + state.coded_input)
        assert np.all(res.states[0].prior == 0.0)

    def test_prior_chain_carries_decoder_extrinsic(self):
        rng = np.random.default_rng(8)
        dims = SystemDims(2, 1, 4)
        mod, code = Modulation.qpsk(), ConvCode()
        noise_var = snr_to_noise_variance(2.0, dims.n_streams, 1.0, code.rate, 2)
        frame, ch, iq, stats, ilvs = _coded_frame(rng, dims, mod, code, noise_var,
                                                  q_len=100)
        bank = design_branch_filters(wl_domain(stats), DetectorConfig(2, 1.0))
        res = run_idd(frame, bank, code, ilvs, mod,
                      euclidean_cost_model(ch, iq), frame.r_a, iterations=2,
                      keep_states=True)
        prev, cur = res.states
        for j in range(dims.n_streams):
            expect = clamp_llr(ilvs[j].interleave(prev.coded_extrinsic[j]))
            assert np.array_equal(cur.prior[j], expect)

    def test_decoding_gain_in_waterfall_region(self):
        """Decoded info BER does not exceed the raw BER at the decoder input
        (hard decisions on the detector LLRs) within 95% confidence."""
        rng = np.random.default_rng(10)
        dims = SystemDims(2, 2, 6)
        mod, code = Modulation.qpsk(), ConvCode()
        noise_var = snr_to_noise_variance(4.0, dims.n_streams, 1.0, code.rate, 2)
        raw_err = raw_bits = dec_err = dec_bits = 0
        for _ in range(20):
            frame, ch, iq, stats, ilvs = _coded_frame(rng, dims, mod, code,
                                                      noise_var, q_len=400)
            bank = design_branch_filters(wl_domain(stats), DetectorConfig(4, 1.0))
            res = run_idd(frame, bank, code, ilvs, mod,
                          euclidean_cost_model(ch, iq), frame.r_a, iterations=1,
                          keep_states=True)
            hard_in = (res.states[0].coded_input > 0).astype(int)
            raw_err += int(np.sum(hard_in != frame.coded_bits))
            raw_bits += frame.coded_bits.size
            dec_err += res.errors_per_iteration[0]
            dec_bits += frame.info_bits.size
        p_raw, p_dec = raw_err / raw_bits, dec_err / dec_bits
        spread = 1.96 * np.sqrt(p_raw * (1 - p_raw) / raw_bits
                                + p_dec * (1 - p_dec) / max(dec_bits, 1))
        assert p_dec <= p_raw + spread
        assert raw_err >= 100

    def test_genie_priors_reach_interference_free_bound(self):
        """Truth-fed feedback performs at least as well as a single-stream
        genie within the binomial confidence of the comparison."""
        rng = np.random.default_rng(9)
        dims = SystemDims(2, 2, 4)
        mod, code = Modulation.qpsk(), ConvCode()
        noise_var = snr_to_noise_variance(-3.0, dims.n_streams, 1.0, code.rate, 2)
        genie_errors = genie_bits = 0
        multi_errors = multi_bits = 0
        for trial in range(24):
            frame, ch, iq, stats, ilvs = _coded_frame(rng, dims, mod, code,
                                                      noise_var, q_len=200)
            bank = design_branch_filters(wl_domain(stats), DetectorConfig(4, 1.0))
            # detector pass with the true symbols in the feedback path
            z_all = soft_filter_outputs(frame.r_a, bank, frame.symbols)
            n_coded = frame.interleaved_bits.shape[1]
            for j in range(dims.n_streams):
                cand = np.empty((bank.n_branches, n_coded))
                for l in range(bank.n_branches):
                    model = estimate_output_model(z_all[l, j], frame.symbols[j],
                                                  bank.sym_power)
                    cand[l] = detector_extrinsic_llr(z_all[l, j], model, mod).ravel()
                sel = select_branch_llr(cand)
                info_post, _ = code.bcjr_decode(ilvs[j].deinterleave(sel))
                multi_errors += int(np.sum((info_post > 0).astype(int) != frame.info_bits[j]))
                multi_bits += info_post.size
            # single-stream genie on the same noise level and antenna count
            genie_dims = SystemDims(1, 1, dims.n_a)
            gframe, gch, giq, gstats, gilvs = _coded_frame(
                rng, genie_dims, mod, code, noise_var, q_len=200)
            gbank = design_branch_filters(wl_domain(gstats), DetectorConfig(1, 1.0))
            gres = run_idd(gframe, gbank, code, gilvs, mod,
                           euclidean_cost_model(gch, giq), gframe.r_a, iterations=1)
            genie_errors += gres.errors_per_iteration[0]
            genie_bits += gframe.info_bits.size
        p_multi = multi_errors / multi_bits
        p_genie = genie_errors / genie_bits
        spread = 3.0 * np.sqrt(p_genie * (1 - p_genie) / genie_bits
                               + p_multi * (1 - p_multi) / max(multi_bits, 1))
        assert p_multi <= p_genie + spread
