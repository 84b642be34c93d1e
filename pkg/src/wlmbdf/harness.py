"""Monte Carlo orchestration: configuration, detector registry, SNR sweeps,
Wilson statistics and CSV emission."""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import yaml

from . import baselines
from .coding import ConvCode, Interleaver
from .idd import run_idd
from .mbdf import (DetectorConfig, design_branch_filters, detect_frame,
                   domain_observation, euclidean_cost_model, plain_domain, wl_domain)
from .signal_model import (Frame, IqImbalance, Modulation, SystemDims,
                           build_second_order_stats, generate_channel, transmit)

# Packets are always simulated in whole batches of this size so that the
# early-stop decision (and therefore the CSV) cannot depend on --threads.
PACKET_BATCH = 8

WILSON_Z = 1.959963984540054  # 97.5% normal quantile


class ConfigError(ValueError):
    """Invalid or unknown configuration input."""


@dataclass(frozen=True)
class ImbalanceSpec:
    enabled: bool = True
    gain: tuple[float, float] = (0.85, 1.15)
    phase_deg: tuple[float, float] = (-15.0, 15.0)

    def draw(self, gen: np.random.Generator, n_a: int) -> IqImbalance:
        if not self.enabled:
            return IqImbalance.none(n_a)
        return IqImbalance.draw(gen, n_a, self.gain, self.phase_deg)


@dataclass(frozen=True)
class SimConfig:
    """One sweep: dimensions, waveform, detectors and stopping rules."""

    dims: SystemDims = SystemDims(4, 2, 16)
    modulation: str = "qpsk"
    detectors: tuple[str, ...] = ("wl-mb-df",)
    branches: int = 8
    # Default from the calibration sweep over {0, 0.25, 0.5, 0.75, 1.0}.
    beta: float | str = 1.0
    snr_db: tuple[float, ...] = (0.0, 4.0, 8.0, 12.0)
    imbalance: ImbalanceSpec = ImbalanceSpec()
    coded: bool = False
    iterations: int = 5
    symbols_per_packet: int | None = None
    packets_per_point: int = 200
    max_bit_errors: int = 500
    master_seed: int = 1234
    sym_power: float = 1.0
    output: str | None = None

    def __post_init__(self):
        if not self.snr_db:
            raise ConfigError("snr_db grid must not be empty")
        if self.packets_per_point < 1:
            raise ConfigError("packets_per_point must be >= 1")
        if isinstance(self.beta, str) and self.beta != "calibrate":
            raise ConfigError(f"beta must be a number or 'calibrate', got {self.beta!r}")
        for name in self.detectors:
            if name not in DETECTOR_REGISTRY:
                raise ConfigError(f"unknown detector {name!r}; registered: "
                                  f"{sorted(DETECTOR_REGISTRY)}")

    @property
    def packet_symbols(self) -> int:
        if self.symbols_per_packet is not None:
            return self.symbols_per_packet
        return 1000 if self.coded else 500

    def modulation_obj(self) -> Modulation:
        return Modulation.from_name(self.modulation, self.sym_power)

    def beta_value(self) -> float:
        if isinstance(self.beta, str):
            raise ConfigError("beta is 'calibrate'; run calibrate-beta first")
        return float(self.beta)


def snr_to_noise_variance(snr_db: float, n_streams: int, sym_power: float,
                          code_rate: float, bits_per_symbol: int) -> float:
    """SNR definition: SNR = 10 log10(K N_U sym_power / (R C sigma^2))."""
    if not 0 < code_rate <= 1:
        raise ValueError(f"code rate must be in (0, 1], got {code_rate}")
    if bits_per_symbol < 1:
        raise ValueError("bits_per_symbol must be >= 1")
    return n_streams * sym_power / (code_rate * bits_per_symbol * 10.0 ** (snr_db / 10.0))


def wilson_halfwidth(errors: int, trials: int, z: float = WILSON_Z) -> float:
    if trials <= 0:
        return 0.5
    p = errors / trials
    denom = 1.0 + z * z / trials
    return (z * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))) / denom


def wilson_interval(errors: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return (0.0, 1.0)
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    hw = wilson_halfwidth(errors, trials, z)
    return (max(center - hw, 0.0), min(center + hw, 1.0))


def intervals_separated(lo_errors, lo_trials, hi_errors, hi_trials) -> bool:
    """True when the first rate's 95% interval lies strictly below the second's."""
    return wilson_interval(lo_errors, lo_trials)[1] < wilson_interval(hi_errors, hi_trials)[0]


@dataclass(frozen=True)
class BerRecord:
    detector: str
    snr_db: float
    iteration: int
    trials_bits: int
    bit_errors: int
    seed: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.trials_bits if self.trials_bits else 0.0

    @property
    def ci_halfwidth(self) -> float:
        return wilson_halfwidth(self.bit_errors, self.trials_bits)

    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.bit_errors, self.trials_bits)


# ---------------------------------------------------------------------------
# Detector registry


@dataclass
class PacketContext:
    frame: Frame
    channel: object
    iq: IqImbalance
    stats: object
    modulation: Modulation
    config: DetectorConfig


def _engine_detect(ctx: PacketContext, widely_linear: bool, branches: int,
                   beta: float) -> np.ndarray:
    cfg = DetectorConfig(branches=branches, beta=beta, widely_linear=widely_linear)
    domain = wl_domain(ctx.stats) if widely_linear else plain_domain(ctx.stats)
    bank = design_branch_filters(domain, cfg)
    obs = domain_observation(ctx.frame.r_iq, ctx.frame.r_a, widely_linear)
    cost = euclidean_cost_model(ctx.channel, ctx.iq)
    return detect_frame(obs, ctx.frame.r_iq, bank, ctx.modulation, cost).symbols


def _detect_rmf(ctx):
    return baselines.rmf_detect(ctx.frame.r_iq, ctx.channel, ctx.iq, ctx.modulation)


def _detect_mmse(ctx):
    return baselines.mmse_detect(ctx.frame.r_iq, plain_domain(ctx.stats), ctx.modulation)


def _detect_sic(ctx):
    return baselines.sic_detect(ctx.frame.r_iq, plain_domain(ctx.stats), ctx.modulation)


def _detect_wl_sic(ctx):
    return baselines.sic_detect(ctx.frame.r_a, wl_domain(ctx.stats), ctx.modulation)


def _detect_las(ctx):
    initial = _detect_mmse(ctx)
    return baselines.las_detect(ctx.frame.r_iq, ctx.channel, ctx.iq,
                                ctx.modulation, initial)


def _detect_mbdf(ctx):
    return _engine_detect(ctx, False, ctx.config.branches, ctx.config.beta)


def _detect_wl_mbdf(ctx):
    return _engine_detect(ctx, True, ctx.config.branches, ctx.config.beta)


DETECTOR_REGISTRY = {
    "rmf": _detect_rmf,
    "mmse": _detect_mmse,
    "sic": _detect_sic,
    "wl-sic": _detect_wl_sic,
    "las": _detect_las,
    "mb-df": _detect_mbdf,
    "wl-mb-df": _detect_wl_mbdf,
}

# Coded detection runs through the filter-bank engine; each entry maps to
# (widely_linear, branches, beta) with None meaning "from config".
IDD_DETECTORS = {
    "mmse": (False, 1, 0.0),
    "sic": (False, 1, 1.0),
    "wl-sic": (True, 1, 1.0),
    "mb-df": (False, None, None),
    "wl-mb-df": (True, None, None),
}


# ---------------------------------------------------------------------------
# Packet simulation


def packet_stream_seed(detector: str, snr_index: int, packet_index: int) -> int:
    key = f"{detector}|{snr_index}|{packet_index}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def _packet_generator(cfg: SimConfig, detector: str, snr_index: int,
                      packet_index: int) -> np.random.Generator:
    stream = packet_stream_seed(detector, snr_index, packet_index)
    return np.random.default_rng(np.random.SeedSequence([cfg.master_seed, stream]))


def simulate_uncoded_packet(cfg: SimConfig, detector: str, snr_index: int,
                            packet_index: int) -> tuple[int, int]:
    """One packet for one detector at one SNR; returns (bits, bit errors)."""
    gen = _packet_generator(cfg, detector, snr_index, packet_index)
    mod = cfg.modulation_obj()
    n_streams = cfg.dims.n_streams
    q_len = cfg.packet_symbols
    noise_var = snr_to_noise_variance(cfg.snr_db[snr_index], n_streams,
                                      cfg.sym_power, 1.0, mod.bits_per_symbol)

    channel = generate_channel(cfg.dims, gen, noise_var)
    iq = cfg.imbalance.draw(gen, cfg.dims.n_a)
    bits = gen.integers(0, 2, n_streams * q_len * mod.bits_per_symbol)
    symbols = mod.modulate(bits).reshape(n_streams, q_len)
    r, r_iq, r_a = transmit(symbols, channel, iq, gen)
    frame = Frame(None, None, None, symbols, r, r_iq, r_a)
    stats = build_second_order_stats(channel.H, mod, noise_var, iq)

    det_cfg = DetectorConfig(branches=cfg.branches, beta=cfg.beta_value(),
                             widely_linear=detector.startswith("wl"))
    ctx = PacketContext(frame, channel, iq, stats, mod, det_cfg)
    s_hat = DETECTOR_REGISTRY[detector](ctx)
    bits_hat = np.concatenate([mod.demap_hard(s_hat[j]) for j in range(n_streams)])
    tx = bits.reshape(n_streams, -1)
    errors = int(np.sum(bits_hat.reshape(n_streams, -1) != tx))
    return bits.size, errors


def simulate_coded_packet(cfg: SimConfig, detector: str, snr_index: int,
                          packet_index: int) -> tuple[int, list[int]]:
    """One coded packet; returns (info bits, errors per IDD iteration)."""
    if detector not in IDD_DETECTORS:
        raise ConfigError(f"detector {detector!r} has no coded (IDD) mode; "
                          f"supported: {sorted(IDD_DETECTORS)}")
    gen = _packet_generator(cfg, detector, snr_index, packet_index)
    mod = cfg.modulation_obj()
    code = ConvCode()
    n_streams = cfg.dims.n_streams
    q_len = cfg.packet_symbols
    n_coded = q_len * mod.bits_per_symbol
    n_info = code.n_info(n_coded)
    noise_var = snr_to_noise_variance(cfg.snr_db[snr_index], n_streams,
                                      cfg.sym_power, code.rate, mod.bits_per_symbol)

    channel = generate_channel(cfg.dims, gen, noise_var)
    iq = cfg.imbalance.draw(gen, cfg.dims.n_a)
    info = gen.integers(0, 2, (n_streams, n_info))
    interleavers = [Interleaver(gen.permutation(n_coded)) for _ in range(n_streams)]
    coded = np.stack([code.encode(info[j]) for j in range(n_streams)])
    inter = np.stack([interleavers[j].interleave(coded[j]) for j in range(n_streams)])
    symbols = np.stack([mod.modulate(inter[j]) for j in range(n_streams)])
    r, r_iq, r_a = transmit(symbols, channel, iq, gen)
    frame = Frame(info, coded, inter, symbols, r, r_iq, r_a)
    stats = build_second_order_stats(channel.H, mod, noise_var, iq)

    wl, branches, beta = IDD_DETECTORS[detector]
    branches = cfg.branches if branches is None else branches
    beta = cfg.beta_value() if beta is None else beta
    det_cfg = DetectorConfig(branches=branches, beta=beta, widely_linear=wl)
    domain = wl_domain(stats) if wl else plain_domain(stats)
    bank = design_branch_filters(domain, det_cfg)
    obs = domain_observation(r_iq, r_a, wl)
    cost = euclidean_cost_model(channel, iq)
    res = run_idd(frame, bank, code, interleavers, mod, cost, obs,
                  iterations=cfg.iterations)
    return info.size, res.errors_per_iteration


def _uncoded_task(args):
    cfg, detector, snr_index, packet_index = args
    return simulate_uncoded_packet(cfg, detector, snr_index, packet_index)


def _coded_task(args):
    cfg, detector, snr_index, packet_index = args
    return simulate_coded_packet(cfg, detector, snr_index, packet_index)


# ---------------------------------------------------------------------------
# Sweeps


def run_point(cfg: SimConfig, detector: str, snr_index: int,
              executor=None) -> list[BerRecord]:
    """Accumulate packets for one (detector, SNR) until the stop rule fires.

    Packets are processed in whole fixed-size batches so the result is
    byte-identical regardless of the executor's parallelism.
    """
    task = _coded_task if cfg.coded else _uncoded_task
    seed = cfg.master_seed
    total_bits = 0
    if cfg.coded:
        errors = [0] * cfg.iterations
    else:
        errors = [0]
    done = 0
    while done < cfg.packets_per_point:
        batch = range(done, min(done + PACKET_BATCH, cfg.packets_per_point))
        args = [(cfg, detector, snr_index, p) for p in batch]
        results = list(executor.map(task, args)) if executor else [task(a) for a in args]
        for bits, errs in results:
            total_bits += bits
            if cfg.coded:
                for i, e in enumerate(errs):
                    errors[i] += e
            else:
                errors[0] += errs
        done += len(args)
        if errors[-1] >= cfg.max_bit_errors:
            break
    if cfg.coded:
        return [BerRecord(detector, cfg.snr_db[snr_index], it + 1, total_bits,
                          errors[it], seed) for it in range(cfg.iterations)]
    return [BerRecord(detector, cfg.snr_db[snr_index], 0, total_bits,
                      errors[0], seed)]


def run_sweep(cfg: SimConfig, threads: int = 1) -> list[BerRecord]:
    """Full sweep over detectors x SNR grid; optionally writes the CSV."""
    records: list[BerRecord] = []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            for det in cfg.detectors:
                for si in range(len(cfg.snr_db)):
                    records.extend(run_point(cfg, det, si, executor=ex))
    else:
        for det in cfg.detectors:
            for si in range(len(cfg.snr_db)):
                records.extend(run_point(cfg, det, si))
    records.sort(key=lambda r: (r.detector, r.snr_db, r.iteration))
    if cfg.output:
        write_csv(records, cfg.output)
    return records


CSV_COLUMNS = ("detector", "snr_db", "iteration", "trials_bits", "bit_errors",
               "ber", "ci_halfwidth", "seed")


def _g6(x: float) -> str:
    return f"{x:.6g}"


def format_csv(records: list[BerRecord]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in records:
        lines.append(",".join([r.detector, _g6(r.snr_db), str(r.iteration),
                               str(r.trials_bits), str(r.bit_errors),
                               _g6(r.ber), _g6(r.ci_halfwidth), str(r.seed)]))
    return "\n".join(lines) + "\n"


def write_csv(records: list[BerRecord], path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_csv(records))


def calibrate_beta(cfg: SimConfig, snr_db: float | None = None,
                   grid=(0.0, 0.25, 0.5, 0.75, 1.0),
                   detector: str = "wl-mb-df") -> tuple[float, list[tuple[float, float]]]:
    """Grid sweep of the feedback scaling at one SNR; returns (best, table)."""
    if snr_db is None:
        snr_db = cfg.snr_db[len(cfg.snr_db) // 2]
    table = []
    for beta in grid:
        sub = replace(cfg, beta=beta, snr_db=(snr_db,), detectors=(detector,),
                      output=None)
        rec = run_sweep(sub)[-1]
        table.append((beta, rec.ber))
    best = min(table, key=lambda t: (t[1], t[0]))[0]
    return best, table


# ---------------------------------------------------------------------------
# Config file handling


def _require_mapping(obj, name):
    if not isinstance(obj, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    return obj


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def config_from_dict(data: dict) -> SimConfig:
    data = _require_mapping(data, "config")
    allowed = {"dims", "modulation", "detectors", "branches", "beta", "snr_db",
               "imbalance", "coded", "iterations", "symbols_per_packet",
               "packets_per_point", "max_bit_errors", "master_seed",
               "sym_power", "output"}
    _check_keys(data, allowed, "config")
    kwargs = {}
    if "dims" in data:
        d = _require_mapping(data["dims"], "dims")
        _check_keys(d, {"k", "n_u", "n_a"}, "dims")
        kwargs["dims"] = SystemDims(int(d["k"]), int(d["n_u"]), int(d["n_a"]))
    if "imbalance" in data:
        im = _require_mapping(data["imbalance"], "imbalance")
        _check_keys(im, {"enabled", "gain", "phase_deg"}, "imbalance")
        kwargs["imbalance"] = ImbalanceSpec(
            enabled=bool(im.get("enabled", True)),
            gain=tuple(im.get("gain", (0.85, 1.15))),
            phase_deg=tuple(im.get("phase_deg", (-15.0, 15.0))))
    for key in ("modulation", "branches", "beta", "coded", "iterations",
                "symbols_per_packet", "packets_per_point", "max_bit_errors",
                "master_seed", "sym_power", "output"):
        if key in data:
            kwargs[key] = data[key]
    if "detectors" in data:
        dets = data["detectors"]
        if isinstance(dets, str):
            dets = [dets]
        kwargs["detectors"] = tuple(dets)
    if "snr_db" in data:
        grid = data["snr_db"]
        if not isinstance(grid, (list, tuple)):
            grid = [grid]
        kwargs["snr_db"] = tuple(float(s) for s in grid)
    try:
        return SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> SimConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if data is None:
        data = {}
    return config_from_dict(data)
