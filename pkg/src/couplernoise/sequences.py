"""Coupler Ramsey and Coupler CPMG schedules.

A Ramsey run is a train of identical coupler gates.  A CPMG run repeats a
cycle of ``m`` gates, a refocusing pi-pulse on the qubit frequency, and ``m``
more gates; the pi-pulse flips the sign with which coupling noise enters the
accumulated phase.  The sign pattern is the filter function ``h(t)``.

Times are in us and couplings in rad/us.
"""
from __future__ import annotations

from dataclasses import dataclass, asdict, field

import numpy as np
from scipy import integrate

from .device import DeviceParams, DEFAULT_DEVICE, operating_lambda

__all__ = [
    "GatePulse",
    "SequenceSpec",
    "FilterFunction",
    "GateProfile",
    "WeightTable",
    "build_filter",
    "ramsey_filter",
    "ramsey_constant_weights",
    "gate_pulse_value",
    "gate_pulse_area",
    "gate_averaged_lambda",
    "calibrate_g_max",
    "gate_profile",
    "ramsey_weights",
    "cpmg_weights",
    "schedule",
]


@dataclass(frozen=True)
class GatePulse:
    """Smoothed trapezoid with raised-cosine edges.

    Parameters
    ----------
    duration : float
        Gate time ``t_g`` (us).
    rise_time : float
        Length of each cosine edge (us); zero gives a rectangle.
    g_max : float
        Plateau coupling magnitude (rad/us).
    """

    duration: float = 0.040
    rise_time: float = 0.008
    g_max: float = 2 * np.pi * 10.0
    shape: str = "raised_cosine"

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("gate duration must be positive")
        if not (0 <= 2 * self.rise_time <= self.duration):
            raise ValueError("need 0 <= 2*rise_time <= duration")
        if self.g_max < 0:
            raise ValueError("g_max is a magnitude and must be >= 0")
        if self.shape != "raised_cosine":
            raise ValueError(f"unsupported pulse shape {self.shape!r}")

    def with_g_max(self, g_max: float) -> "GatePulse":
        return GatePulse(self.duration, self.rise_time, float(g_max), self.shape)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GatePulse":
        unknown = set(d) - {"duration", "rise_time", "g_max", "shape"}
        if unknown:
            raise ValueError(f"unknown pulse field(s): {sorted(unknown)}")
        kw = {k: float(v) for k, v in d.items() if k != "shape"}
        if "shape" in d:
            kw["shape"] = str(d["shape"])
        return cls(**kw)


def gate_pulse_value(pulse: GatePulse, t):
    """Coupling magnitude ``|g(t)|`` during one gate; zero outside ``[0, t_g]``."""
    t = np.asarray(t, dtype=float)
    tg, r, g = pulse.duration, pulse.rise_time, pulse.g_max
    out = np.where((t >= 0) & (t <= tg), g, 0.0)
    if r > 0:
        up = (t >= 0) & (t < r)
        down = (t > tg - r) & (t <= tg)
        out = np.where(up, 0.5 * g * (1 - np.cos(np.pi * t / r)), out)
        out = np.where(down, 0.5 * g * (1 - np.cos(np.pi * (tg - t) / r)), out)
    return out if out.ndim else float(out)


def gate_pulse_area(pulse: GatePulse) -> float:
    """``int g dt`` over one gate; each cosine edge contributes half its length."""
    return pulse.g_max * (pulse.duration - pulse.rise_time)


def calibrate_g_max(pulse: GatePulse, target_phase: float = np.pi) -> GatePulse:
    """Rescale the plateau so that one gate accumulates ``2 int g dt = target_phase``."""
    if target_phase < 0:
        raise ValueError("target phase must be non-negative")
    return pulse.with_g_max(target_phase / (2.0 * (pulse.duration - pulse.rise_time)))


def _edge_breaks(pulse: GatePulse) -> list[float]:
    r, tg = pulse.rise_time, pulse.duration
    return [x for x in (r, tg - r) if 0 < x < tg]


def gate_averaged_lambda(pulse: GatePulse, p: DeviceParams = DEFAULT_DEVICE) -> float:
    """Mean of the device g-noise amplitude ``lambda(g(t))`` over one gate."""
    f = lambda t: operating_lambda(gate_pulse_value(pulse, t), p)
    if pulse.rise_time == 0:
        return float(f(0.5 * pulse.duration))
    val, _ = integrate.quad(f, 0.0, pulse.duration, points=_edge_breaks(pulse),
                            epsabs=0.0, epsrel=1e-10, limit=200)
    return val / pulse.duration


@dataclass(frozen=True)
class SequenceSpec:
    """A Ramsey or CPMG experiment.

    For CPMG the curve is swept over the number of gates per half-cycle,
    ``m = 1..m``; for Ramsey over the gate count ``0..n_gates`` in steps of
    ``stride``.  ``t_p`` is the refocusing pulse length (0 = instantaneous).
    """

    kind: str = "ramsey"
    n: int = 1
    m: int = 1
    n_gates: int = 100
    pulse: GatePulse = field(default_factory=GatePulse)
    t_p: float = 0.0
    stride: int = 1

    def __post_init__(self):
        if self.kind not in ("ramsey", "cpmg"):
            raise ValueError(f"kind must be 'ramsey' or 'cpmg', got {self.kind!r}")
        if self.n < 1 or self.m < 1 or self.n_gates < 1 or self.stride < 1:
            raise ValueError("n, m, n_gates and stride must be >= 1")
        if self.t_p < 0:
            raise ValueError("t_p must be >= 0")

    @property
    def cycle_time(self) -> float:
        """``T_C = 2 m t_g`` (+ ``t_p`` for a finite refocusing pulse)."""
        return 2 * self.m * self.pulse.duration + self.t_p

    @property
    def total_time(self) -> float:
        if self.kind == "cpmg":
            return self.n * self.cycle_time
        return self.n_gates * self.pulse.duration

    def curve_points(self) -> np.ndarray:
        """Gate counts (Ramsey) or ``m`` values (CPMG) at which the curve is sampled."""
        if self.kind == "cpmg":
            return np.arange(1, self.m + 1)
        return np.arange(0, self.n_gates + 1, self.stride)

    def curve_times(self) -> np.ndarray:
        k = self.curve_points()
        if self.kind == "cpmg":
            return self.n * (2 * k * self.pulse.duration + self.t_p)
        return k * self.pulse.duration

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pulse"] = self.pulse.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SequenceSpec":
        unknown = set(d) - {"kind", "n", "m", "n_gates", "pulse", "t_p", "stride"}
        if unknown:
            raise ValueError(f"unknown sequence field(s): {sorted(unknown)}")
        kw = {k: int(d[k]) for k in ("n", "m", "n_gates", "stride") if k in d}
        if "kind" in d:
            kw["kind"] = str(d["kind"]).lower()
        if "t_p" in d:
            kw["t_p"] = float(d["t_p"])
        if "pulse" in d:
            kw["pulse"] = GatePulse.from_dict(d["pulse"])
        return cls(**kw)


@dataclass(frozen=True)
class FilterFunction:
    """Piecewise-constant sign function ``h(t)`` on ``[breakpoints[0], breakpoints[-1]]``."""

    breakpoints: np.ndarray
    signs: np.ndarray

    def __post_init__(self):
        if len(self.signs) != len(self.breakpoints) - 1:
            raise ValueError("need one sign per interval")

    @property
    def duration(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])

    @property
    def flip_times(self) -> np.ndarray:
        return self.breakpoints[1:-1][np.diff(self.signs) != 0]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1,
                      0, len(self.signs) - 1)
        inside = (t >= self.breakpoints[0]) & (t <= self.breakpoints[-1])
        return np.where(inside, self.signs[idx], 0.0)

    def integral(self) -> float:
        return float(np.sum(self.signs * np.diff(self.breakpoints)))

    def edge_terms(self) -> tuple[np.ndarray, np.ndarray]:
        """Edge positions ``b_p`` and jumps ``a_p`` with
        ``int h e^{i w t} dt = (i/w) sum_p a_p e^{i w b_p}``; ``sum a_p = 0``."""
        s = np.concatenate([[0.0], self.signs, [0.0]])
        return np.asarray(self.breakpoints, dtype=float), s[1:] - s[:-1]


def build_filter(n: int, T_C: float) -> FilterFunction:
    """CPMG sign function: ``+1`` at start, flipping at ``(k + 1/2) T_C``."""
    if n < 1 or T_C <= 0:
        raise ValueError("need n >= 1 and T_C > 0")
    flips = (np.arange(n) + 0.5) * T_C
    bp = np.concatenate([[0.0], flips, [n * T_C]])
    signs = (-1.0) ** np.arange(n + 1)
    return FilterFunction(bp, signs)


def ramsey_filter(t: float) -> FilterFunction:
    if t <= 0:
        raise ValueError("Ramsey filter needs t > 0")
    return FilterFunction(np.array([0.0, float(t)]), np.array([1.0]))


@dataclass(frozen=True)
class GateProfile:
    """Shape of the noise amplitude within one gate, normalised to unit mean.

    ``cum[j]`` is ``int_0^{nodes[j]} u`` and ``cum2[j]`` the same for ``u**2``.
    """

    nodes: np.ndarray
    cum: np.ndarray
    cum2: np.ndarray

    @property
    def duration(self) -> float:
        return float(self.nodes[-1])

    @classmethod
    def constant(cls, duration: float) -> "GateProfile":
        x = np.array([0.0, float(duration)])
        return cls(x, x.copy(), x.copy())


def gate_profile(pulse: GatePulse, p: DeviceParams = DEFAULT_DEVICE,
                 nodes: int = 64, oversample: int = 32) -> GateProfile:
    """Tabulate the normalised within-gate profile of ``lambda(g(t))``.

    Cumulative integrals come from a dense Simpson rule and are stored on
    ``nodes + 1`` points; between nodes the engine interpolates linearly.
    """
    tg = pulse.duration
    fine = np.linspace(0.0, tg, nodes * oversample + 1)
    mean = gate_averaged_lambda(pulse, p)
    if mean <= 0:
        return GateProfile.constant(tg)
    u = operating_lambda(gate_pulse_value(pulse, fine), p) / mean
    c1 = integrate.cumulative_simpson(u, x=fine, initial=0.0)
    c2 = integrate.cumulative_simpson(u * u, x=fine, initial=0.0)
    take = slice(None, None, oversample)
    return GateProfile(fine[take], c1[take], c2[take])


@dataclass(frozen=True)
class WeightTable:
    """Cumulative noise weight ``W(t) = int_0^t h u`` tabulated on ``knots``.

    ``W`` is piecewise linear between knots.  ``end`` is the measurement time
    and ``square`` is ``int_0^end u**2`` (the white-noise variance weight).
    """

    knots: np.ndarray
    values: np.ndarray
    square: float

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    @property
    def end_value(self) -> float:
        return float(self.values[-1])

    def __call__(self, t):
        return np.interp(t, self.knots, self.values)


def _gate_train(starts, sign, prof: GateProfile):
    """Knots and increments of ``W`` for gates beginning at ``starts``."""
    x = (np.asarray(starts)[:, None] + prof.nodes[None, 1:]).ravel()
    dw = np.tile(np.diff(prof.cum), len(starts)) * np.repeat(sign, len(prof.nodes) - 1)
    return x, dw


def ramsey_weights(n_gates: int, prof: GateProfile) -> WeightTable:
    starts = np.arange(n_gates) * prof.duration
    x, dw = _gate_train(starts, np.ones(n_gates), prof)
    knots = np.concatenate([[0.0], x])
    vals = np.concatenate([[0.0], np.cumsum(dw)])
    return WeightTable(knots, vals, n_gates * prof.cum2[-1])


def ramsey_constant_weights(t_end: float) -> WeightTable:
    return WeightTable(np.array([0.0, float(t_end)]), np.array([0.0, float(t_end)]),
                       float(t_end))


def cpmg_weights(n: int, T_C: float, prof: GateProfile | None = None,
                 m: int | None = None, t_p: float = 0.0) -> WeightTable:
    """Weight table for an ``n``-cycle CPMG run.

    With ``prof=None`` the noise amplitude is constant and ``T_C`` is free.
    Otherwise each half-cycle holds ``m`` gates of profile ``prof`` and the
    refocusing pulse (length ``t_p``) carries no coupling noise.
    """
    if prof is None:
        fl = build_filter(n, T_C)
        w = np.concatenate([[0.0], np.cumsum(fl.signs * np.diff(fl.breakpoints))])
        return WeightTable(fl.breakpoints, w, n * T_C)
    if m is None or m < 1:
        raise ValueError("shaped CPMG weights need m >= 1")
    tg = prof.duration
    T_C = 2 * m * tg + t_p
    half = m * tg
    # gate starts: first half of each cycle, then the second half after the pulse
    k = np.arange(n)[:, None] * T_C
    j = np.arange(m)[None, :] * tg
    first = (k + j).ravel()
    second = (k + half + t_p + j).ravel()
    starts = np.concatenate([first, second])
    sign = np.concatenate([np.ones(first.size), -np.ones(second.size)])
    sign = sign * np.concatenate([(-1.0) ** np.repeat(np.arange(n), m)] * 2)
    order = np.argsort(starts, kind="stable")
    x, dw = _gate_train(starts[order], sign[order], prof)
    if t_p > 0:
        # the pulse window is flat in W
        x = np.concatenate([x, (np.arange(n) * T_C + half + t_p)])
        dw = np.concatenate([dw, np.zeros(n)])
        o = np.argsort(x, kind="stable")
        x, dw = x[o], dw[o]
    knots = np.concatenate([[0.0], x])
    vals = np.concatenate([[0.0], np.cumsum(dw)])
    return WeightTable(knots, vals, 2 * n * m * prof.cum2[-1])


def schedule(seq: SequenceSpec, samples_per_gate: int = 16) -> dict[str, np.ndarray]:
    """Sampled control waveform ``(t, g, h)`` for the longest curve point."""
    tg = seq.pulse.duration
    local = np.linspace(0.0, tg, samples_per_gate + 1)[:-1]
    if seq.kind == "ramsey":
        starts = np.arange(seq.n_gates) * tg
        t = (starts[:, None] + local[None, :]).ravel()
        t = np.append(t, seq.n_gates * tg)
        g = np.append(np.tile(gate_pulse_value(seq.pulse, local), seq.n_gates), 0.0)
        return {"t": t, "g": g, "h": np.ones_like(t)}
    T_C = seq.cycle_time
    half = seq.m * tg
    ts, gs, hs = [], [], []
    for c in range(seq.n):
        for part in (0, 1):
            base = c * T_C + part * (half + seq.t_p)
            for j in range(seq.m):
                tt = base + j * tg + local
                ts.append(tt)
                gs.append(gate_pulse_value(seq.pulse, local))
                hs.append(np.full(local.size, (-1.0) ** (c + part)))
            if part == 0 and seq.t_p > 0:
                ts.append(np.array([base + half]))
                gs.append(np.zeros(1))
                hs.append(np.array([(-1.0) ** c]))
    ts.append(np.array([seq.n * T_C]))
    gs.append(np.zeros(1))
    hs.append(np.array([(-1.0) ** seq.n]))
    return {"t": np.concatenate(ts), "g": np.concatenate(gs), "h": np.concatenate(hs)}
