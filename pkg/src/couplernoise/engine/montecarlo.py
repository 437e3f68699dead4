"""Monte Carlo averaging over telegraph-noise trajectories.

Each trajectory of a fluctuator is a list of switching times.  For a noise
weight ``W(t) = int_0^t h(s) u(s) ds`` (filter sign times amplitude profile)
the accumulated phase of a trajectory with initial state ``x0`` and switches
``s_1 < ... < s_k`` before ``T`` is exactly

    int_0^T xi dW = x0 [(-1)^k W(T) + 2 sum_i (-1)^(i-1) W(s_i)],

so no time stepping is involved.  White noise adds an independent Gaussian
phase with variance ``4 sigma^2 int u^2``.

Trajectories are processed in blocks of :data:`~couplernoise.noise.BLOCK_SIZE`;
block ``b`` draws from its own stream keyed on ``(seed, b)`` and blocks are
reduced in index order, so results do not depend on ``workers``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..curves import DecayCurve
from ..device import DeviceParams, DEFAULT_DEVICE
from ..noise import BLOCK_SIZE, Fluctuator, NoiseModel, block_rng, sample_switch_times
from ..sequences import (
    GateProfile, SequenceSpec, WeightTable, cpmg_weights, gate_averaged_lambda,
    gate_profile, gate_pulse_area, ramsey_weights,
)

__all__ = [
    "SimResult",
    "mc_ramsey_chi",
    "mc_cpmg_chi",
    "mc_ramsey",
    "mc_cpmg",
    "effective_noise",
]

# cap on (rows x max switches) held at once
_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class SimResult:
    curve: DecayCurve
    n_traj: int
    seed: int

    @property
    def stderr(self) -> np.ndarray:
        return self.curve.stderr


def _check_traj(n_traj: int):
    if int(n_traj) < 1:
        raise ValueError("n_traj must be >= 1")


def _rows_per_chunk(fluctuators, t_max: float, size: int) -> int:
    mu = max([f.gamma * t_max for f in fluctuators] + [0.0])
    kmax = mu + 10 * np.sqrt(mu) + 10
    return int(max(1, min(size, _CHUNK_ELEMENTS // kmax)))


def _alternating(kmax: int) -> np.ndarray:
    return np.where(np.arange(kmax) % 2 == 0, 2.0, -2.0)


def _ramsey_phase(x0, times, W: WeightTable, ends):
    """Phase ``int_0^T xi dW`` at every ``T`` in ``ends`` for one fluctuator."""
    rows, kmax = times.shape
    nT = ends.size
    if kmax == 0:
        return x0[:, None] * W(ends)[None, :]
    finite = np.isfinite(times)
    ws = np.where(finite, W(np.where(finite, times, 0.0)), 0.0)
    cum = np.concatenate([np.zeros((rows, 1)), np.cumsum(ws * _alternating(kmax), axis=1)], axis=1)
    # k[r, j] = number of switches strictly before ends[j]
    idx = np.searchsorted(ends, times, side="right")
    flat = (np.arange(rows)[:, None] * (nT + 1) + idx).ravel()
    counts = np.bincount(flat, minlength=rows * (nT + 1)).reshape(rows, nT + 1)
    k = np.cumsum(counts[:, :nT], axis=1)
    term = np.take_along_axis(cum, k, axis=1)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return x0[:, None] * (sign * W(ends)[None, :] + term)


def _single_phase(x0, times, W: WeightTable):
    """Phase at ``W.end`` for one fluctuator."""
    rows, kmax = times.shape
    if kmax == 0:
        return x0 * W.end_value
    before = times < W.end
    ws = np.where(before, W(np.where(before, times, 0.0)), 0.0)
    k = before.sum(axis=1)
    term = np.sum(ws * _alternating(kmax), axis=1)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    return x0 * (sign * W.end_value + term)


def _reduce(blocks: list[tuple[np.ndarray, np.ndarray]], n_traj: int):
    s = np.zeros_like(blocks[0][0])
    s2 = np.zeros_like(blocks[0][1])
    for a, b in blocks:
        s = s + a
        s2 = s2 + b
    mean = s / n_traj
    if n_traj > 1:
        var = np.maximum(s2 - n_traj * mean * mean, 0.0) / (n_traj - 1)
    else:
        var = np.zeros_like(mean)
    return mean, np.sqrt(var / n_traj)


def _run(n_traj: int, seed: int, workers: int, block_fn: Callable):
    _check_traj(n_traj)
    n_blocks = -(-int(n_traj) // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, n_traj - b * BLOCK_SIZE) for b in range(n_blocks)]
    job = lambda b: block_fn(block_rng(seed, b), sizes[b])
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as ex:
            blocks = list(ex.map(job, range(n_blocks)))
    else:
        blocks = [job(b) for b in range(n_blocks)]
    return _reduce(blocks, int(n_traj))


def mc_ramsey_chi(fluctuators: Sequence[Fluctuator], times, n_traj: int = 100_000,
                  seed: int = 0, white_sigma: float = 0.0, weights: WeightTable | None = None,
                  square: np.ndarray | None = None, control_phase=None, workers: int = 1):
    """Trajectory average of ``cos(2 int lambda u xi + white + control_phase)``.

    Parameters
    ----------
    fluctuators : sequence of Fluctuator
        Amplitudes are the (gate-averaged) ``lambda`` values in rad/us.
    times : array_like
        Increasing sample times (us).
    weights : WeightTable, optional
        Cumulative amplitude profile ``int_0^t u``; constant ``u = 1`` if omitted.
    square : array_like, optional
        ``int_0^t u^2`` at each sample time, for white noise (defaults to ``t``).
    control_phase : array_like, optional
        Deterministic phase ``2 G(t)`` added before taking the cosine.

    Returns
    -------
    mean, stderr : ndarray
    """
    ends = np.asarray(times, dtype=float)
    if ends.ndim != 1 or np.any(np.diff(ends) <= 0) or np.any(ends < 0):
        raise ValueError("times must be non-negative and strictly increasing")
    W = weights if weights is not None else WeightTable(
        np.array([0.0, max(ends[-1], 1e-300)]), np.array([0.0, max(ends[-1], 1e-300)]), ends[-1])
    sq = ends if square is None else np.asarray(square, dtype=float)
    ctrl = np.zeros_like(ends) if control_phase is None else np.asarray(control_phase, dtype=float)
    fls = [f for f in fluctuators if f.lambda_ > 0]
    t_max = float(ends[-1])
    chunk = _rows_per_chunk(fls, t_max, BLOCK_SIZE)

    def block(rng, size):
        s = np.zeros(ends.size)
        s2 = np.zeros(ends.size)
        for r0 in range(0, size, chunk):
            rows = min(chunk, size - r0)
            phase = np.zeros((rows, ends.size))
            for f in fls:
                x0, st, _ = sample_switch_times(f.gamma, t_max, rows, rng)
                phase += 2.0 * f.lambda_ * _ramsey_phase(x0, st, W, ends)
            if white_sigma > 0:
                inc = np.diff(np.concatenate([[0.0], sq]))
                z = rng.standard_normal((rows, ends.size))
                phase += np.cumsum(2.0 * white_sigma * np.sqrt(inc) * z, axis=1)
            v = np.cos(phase + ctrl)
            s += v.sum(axis=0)
            s2 += (v * v).sum(axis=0)
        return s, s2

    return _run(n_traj, seed, workers, block)


def mc_cpmg_chi(fluctuators: Sequence[Fluctuator], n: int, T_C_values=None,
                n_traj: int = 100_000, seed: int = 0, white_sigma: float = 0.0,
                weights: Sequence[WeightTable] | None = None, workers: int = 1):
    """Trajectory average of ``cos(2 int h lambda u xi)`` for a family of CPMG runs.

    Either give cycle times ``T_C_values`` (constant amplitude, instantaneous
    pulses) or one prepared :class:`WeightTable` per point in ``weights``.
    All points share the same noise trajectories.
    """
    if weights is None:
        if T_C_values is None:
            raise ValueError("give T_C_values or weights")
        Tc = np.atleast_1d(np.asarray(T_C_values, dtype=float))
        if np.any(Tc <= 0):
            raise ValueError("T_C values must be positive")
        weights = [cpmg_weights(n, float(T)) for T in Tc]
    weights = list(weights)
    t_max = max(w.end for w in weights)
    fls = [f for f in fluctuators if f.lambda_ > 0]
    chunk = _rows_per_chunk(fls, t_max, BLOCK_SIZE)
    sq = np.array([w.square for w in weights])

    def block(rng, size):
        s = np.zeros(len(weights))
        s2 = np.zeros(len(weights))
        for r0 in range(0, size, chunk):
            rows = min(chunk, size - r0)
            phase = np.zeros((rows, len(weights)))
            for f in fls:
                x0, st, _ = sample_switch_times(f.gamma, t_max, rows, rng)
                for j, w in enumerate(weights):
                    phase[:, j] += 2.0 * f.lambda_ * _single_phase(x0, st, w)
            if white_sigma > 0:
                z = rng.standard_normal((rows, len(weights)))
                phase += 2.0 * white_sigma * np.sqrt(sq) * z
            v = np.cos(phase)
            s += v.sum(axis=0)
            s2 += (v * v).sum(axis=0)
        return s, s2

    return _run(n_traj, seed, workers, block)


def effective_noise(model: NoiseModel, seq: SequenceSpec,
                    p: DeviceParams = DEFAULT_DEVICE) -> tuple[list[Fluctuator], float]:
    """Resolve flux-scaled sources into gate-averaged amplitudes for ``seq``."""
    lam_dev = None
    fls = []
    for f in model.fluctuators:
        if f.flux_scale is not None:
            if lam_dev is None:
                lam_dev = gate_averaged_lambda(seq.pulse, p)
            fls.append(f.with_lambda(f.flux_scale * lam_dev))
        else:
            fls.append(f)
    sigma = model.white_sigma
    if model.white_flux_scale is not None:
        if lam_dev is None:
            lam_dev = gate_averaged_lambda(seq.pulse, p)
        sigma = model.white_flux_scale * lam_dev
    return fls, float(sigma)


def _profile(seq: SequenceSpec, p: DeviceParams, profile: str) -> GateProfile:
    if profile == "pulse":
        return gate_profile(seq.pulse, p)
    if profile == "constant":
        return GateProfile.constant(seq.pulse.duration)
    raise ValueError(f"profile must be 'pulse' or 'constant', got {profile!r}")


def _meta(seq: SequenceSpec) -> dict:
    return {"kind": seq.kind, "n": seq.n if seq.kind == "cpmg" else 0,
            "m": seq.m if seq.kind == "cpmg" else 0, "t_g": seq.pulse.duration,
            "g_max": seq.pulse.g_max, "rise_time": seq.pulse.rise_time, "t_p": seq.t_p}


def mc_ramsey(model: NoiseModel, seq: SequenceSpec, p: DeviceParams = DEFAULT_DEVICE,
              n_traj: int = 10_000, seed: int = 0, profile: str = "pulse",
              workers: int = 1) -> SimResult:
    """Coupler Ramsey curve ``N = <cos(2 int (g + lambda xi))>``, sampled at gate boundaries."""
    if seq.kind != "ramsey":
        raise ValueError("mc_ramsey needs a Ramsey sequence")
    _check_traj(n_traj)
    fls, sigma = effective_noise(model, seq, p)
    prof = _profile(seq, p, profile)
    k = seq.curve_points()
    times = seq.curve_times()
    W = ramsey_weights(seq.n_gates, prof)
    square = k * prof.cum2[-1]
    ctrl = 2.0 * k * gate_pulse_area(seq.pulse)
    # t = 0 is noiseless; keep it in the curve
    mean, err = mc_ramsey_chi(fls, times[1:], n_traj, seed, sigma, W, square[1:],
                              ctrl[1:], workers) if times.size > 1 else (np.zeros(0), np.zeros(0))
    mean = np.concatenate([[1.0], mean])
    err = np.concatenate([[0.0], err])
    pref = np.exp(-0.25 * model.gamma_phi * times)
    curve = DecayCurve(times, np.clip(mean * pref, -1, 1), err * pref, _meta(seq))
    return SimResult(curve, int(n_traj), int(seed))


def mc_cpmg(model: NoiseModel, seq: SequenceSpec, p: DeviceParams = DEFAULT_DEVICE,
            n_traj: int = 10_000, seed: int = 0, profile: str = "pulse",
            workers: int = 1) -> SimResult:
    """Coupler CPMG curve over ``m = 1..seq.m``; the control phase cancels."""
    if seq.kind != "cpmg":
        raise ValueError("mc_cpmg needs a CPMG sequence")
    _check_traj(n_traj)
    fls, sigma = effective_noise(model, seq, p)
    prof = _profile(seq, p, profile)
    weights = [cpmg_weights(seq.n, 0.0, prof, int(m), seq.t_p) for m in seq.curve_points()]
    times = seq.curve_times()
    mean, err = mc_cpmg_chi(fls, seq.n, None, n_traj, seed, sigma, weights, workers)
    pref = np.exp(-0.25 * model.gamma_phi * times)
    curve = DecayCurve(times, np.clip(mean * pref, -1, 1), err * pref, _meta(seq))
    return SimResult(curve, int(n_traj), int(seed))
