"""Telegraph-noise sources, their exact statistics and trajectory sampling.

Units used throughout the package: time in microseconds, switching and decay
rates in 1/us, coupling-noise amplitudes in angular units (rad/us).  A value
quoted as ``lambda/2pi`` in MHz converts as ``lambda = 2*pi*value``.

A fluctuator switches symmetrically between +1 and -1 with total flip rate
``gamma``; its correlator is ``exp(-2 gamma |t|)``.  The conventional
correlation time is reported as ``1/gamma`` even though the correlator decays
at ``2 gamma`` -- the factor of two is intentional and kept visible.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Fluctuator",
    "NoiseModel",
    "Trajectory",
    "block_rng",
    "sample_rtn_trajectory",
    "sample_switch_times",
    "rtn_correlator",
    "rtn_psd",
    "make_one_over_f_ensemble",
    "ensemble_psd",
    "one_over_f_band_psd",
]

#: trajectories are generated in fixed-size blocks, each with its own stream
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class Fluctuator:
    """A single symmetric random-telegraph source.

    Parameters
    ----------
    lambda_ : float
        Coupling amplitude in rad/us (gate-averaged value).
    gamma : float
        Switching rate in 1/us.
    label : str
        Free-form identifier.
    flux_scale : float, optional
        When set, the amplitude is instead derived from the device flux
        sensitivity as ``flux_scale * lambda_device(g(t))``.
    """

    lambda_: float
    gamma: float
    label: str = ""
    flux_scale: float | None = None

    def __post_init__(self):
        if not (self.lambda_ >= 0 and self.gamma >= 0):
            raise ValueError(
                f"fluctuator needs lambda >= 0 and gamma >= 0, got "
                f"lambda={self.lambda_}, gamma={self.gamma}")
        if self.flux_scale is not None and self.flux_scale < 0:
            raise ValueError("flux_scale must be non-negative")

    @property
    def correlation_time(self) -> float:
        return np.inf if self.gamma == 0 else 1.0 / self.gamma

    @property
    def underdamped(self) -> bool:
        return 2 * self.lambda_ > self.gamma

    def with_lambda(self, lambda_: float) -> "Fluctuator":
        return Fluctuator(lambda_, self.gamma, self.label, self.flux_scale)

    def to_dict(self) -> dict:
        d = {"lambda": self.lambda_, "gamma": self.gamma, "label": self.label}
        if self.flux_scale is not None:
            d["flux_scale"] = self.flux_scale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Fluctuator":
        return cls(float(d["lambda"]), float(d["gamma"]), str(d.get("label", "")),
                   None if d.get("flux_scale") is None else float(d["flux_scale"]))


@dataclass(frozen=True)
class NoiseModel:
    """Coupling noise plus single-qubit relaxation and dephasing.

    ``white_sigma`` is the strength of white g-noise (rad/us per sqrt(us));
    on its own it produces ``exp(-2 white_sigma**2 t)`` under any sequence.
    ``gamma_phi``, ``gamma_1`` and ``delta_gamma_1`` are the summed
    single-qubit dephasing rate, the summed relaxation rate and the
    relaxation asymmetry (qubit 2 minus qubit 1).
    """

    fluctuators: tuple[Fluctuator, ...] = ()
    white_sigma: float = 0.0
    gamma_phi: float = 0.0
    gamma_1: float = 0.0
    delta_gamma_1: float = 0.0
    white_flux_scale: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "fluctuators", tuple(self.fluctuators))
        for name in ("white_sigma", "gamma_phi", "gamma_1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if abs(self.delta_gamma_1) > self.gamma_1:
            raise ValueError("|delta_gamma_1| must not exceed gamma_1")

    @property
    def has_coupler_noise(self) -> bool:
        return any(f.lambda_ > 0 or f.flux_scale for f in self.fluctuators) \
            or self.white_sigma > 0 or bool(self.white_flux_scale)

    def to_dict(self) -> dict:
        d = {
            "fluctuators": [f.to_dict() for f in self.fluctuators],
            "white_sigma": self.white_sigma,
            "gamma_phi": self.gamma_phi,
            "gamma_1": self.gamma_1,
            "delta_gamma_1": self.delta_gamma_1,
        }
        if self.white_flux_scale is not None:
            d["white_flux_scale"] = self.white_flux_scale
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseModel":
        known = {"fluctuators", "white_sigma", "gamma_phi", "gamma_1",
                 "delta_gamma_1", "white_flux_scale"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown noise field(s): {sorted(unknown)}")
        return cls(
            fluctuators=tuple(Fluctuator.from_dict(f) for f in d.get("fluctuators", [])),
            white_sigma=float(d.get("white_sigma", 0.0)),
            gamma_phi=float(d.get("gamma_phi", 0.0)),
            gamma_1=float(d.get("gamma_1", 0.0)),
            delta_gamma_1=float(d.get("delta_gamma_1", 0.0)),
            white_flux_scale=(None if d.get("white_flux_scale") is None
                              else float(d["white_flux_scale"])),
        )


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise ValueError("times and values must have equal length")


def _check_grid(times) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a non-empty 1-d array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return times


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator for trajectory block ``block`` of a run.

    Streams are keyed on ``(seed, block)`` so a batch can be split over any
    number of workers and still reproduce bit-for-bit.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(block),))
    return np.random.Generator(np.random.PCG64(ss))


def sample_rtn_trajectory(f: Fluctuator, times, seed: int) -> Trajectory:
    """Sample a telegraph trajectory on ``times`` using exact flip probabilities.

    The state at ``times[0]`` is +1 or -1 with probability 1/2 and between
    successive grid points it flips with probability
    ``(1 - exp(-2 gamma dt)) / 2``, so coarse grids carry no discretisation
    bias.
    """
    times = _check_grid(times)
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    x0 = 1 if rng.random() < 0.5 else -1
    p_flip = 0.5 * (-np.expm1(-2.0 * f.gamma * np.diff(times)))
    flips = rng.random(times.size - 1) < p_flip
    sign = np.concatenate([[1], np.where(flips, -1, 1)])
    return Trajectory(times, (x0 * np.cumprod(sign)).astype(np.int8))


def sample_switch_times(gamma: float, t_max: float, size: int,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Draw initial states and switching events on ``[0, t_max]`` for a batch.

    Returns ``(x0, times, count)``: ``x0`` is ``(size,)`` of +-1, ``times`` a
    ``(size, kmax)`` array padded with ``inf`` and ``count`` the number of
    switches per row.  Switches form a Poisson process of rate ``gamma``;
    given the count, their times are uniform order statistics.
    """
    x0 = np.where(rng.random(size) < 0.5, 1.0, -1.0)
    count = rng.poisson(gamma * t_max, size) if gamma > 0 else np.zeros(size, dtype=np.int64)
    kmax = int(count.max()) if size else 0
    times = np.full((size, kmax), np.inf)
    if kmax:
        mask = np.arange(kmax)[None, :] < count[:, None]
        times = np.sort(np.where(mask, rng.random((size, kmax)) * t_max, np.inf), axis=1)
    return x0, times, count


def rtn_correlator(f: Fluctuator, t) -> np.ndarray | float:
    """``<xi(t) xi(0)> = exp(-2 gamma |t|)``."""
    return np.exp(-2.0 * f.gamma * np.abs(t))


def rtn_psd(f: Fluctuator, freq) -> np.ndarray | float:
    """Two-sided power spectrum of a unit telegraph signal at ordinary frequency ``freq``.

    ``S(f) = gamma / (pi^2 f^2 + gamma^2)``, normalised so its integral over
    all frequencies is ``<xi^2> = 1``.
    """
    freq = np.asarray(freq, dtype=float)
    if f.gamma == 0 and np.any(freq == 0):
        raise ValueError("spectrum of a frozen fluctuator is singular at f = 0")
    with np.errstate(divide="ignore"):
        out = f.gamma / (np.pi**2 * freq**2 + f.gamma**2)
    return out if out.ndim else float(out)


def ensemble_psd(fluctuators: Sequence[Fluctuator], freq) -> np.ndarray | float:
    """Sum of ``lambda_k**2 * rtn_psd(f_k, freq)`` over independent sources."""
    freq = np.asarray(freq, dtype=float)
    total = np.zeros_like(freq)
    for f in fluctuators:
        total = total + f.lambda_**2 * rtn_psd(f, freq)
    return total if total.ndim else float(total)


def one_over_f_band_psd(lambda_: float, count: int, gamma_min: float, gamma_max: float, freq):
    """Continuum limit of a log-uniform ensemble of ``count`` fluctuators.

    ``lambda^2 K (arccot(pi f/gmax) - arccot(pi f/gmin)) / (pi f ln(gmax/gmin))``
    which tends to ``lambda^2 K / (2 f ln(gmax/gmin))`` deep inside the band.
    """
    freq = np.asarray(freq, dtype=float)
    acot = lambda x: np.arctan2(1.0, x)
    num = acot(np.pi * freq / gamma_max) - acot(np.pi * freq / gamma_min)
    return lambda_**2 * count * num / (np.pi * freq * np.log(gamma_max / gamma_min))


def make_one_over_f_ensemble(lambda_: float, gamma_min: float, gamma_max: float,
                             count: int, seed: int) -> list[Fluctuator]:
    """Fluctuators with equal amplitude and log-uniformly distributed rates.

    A log-uniform density of switching rates makes the summed Lorentzians a
    ``1/f`` spectrum between ``gamma_min/pi`` and ``gamma_max/pi``.
    """
    if gamma_min <= 0 or gamma_max < gamma_min:
        raise ValueError("need 0 < gamma_min <= gamma_max")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(int(seed) & (2**64 - 1))
    if gamma_max == gamma_min:
        gammas = np.full(count, float(gamma_min))
    else:
        gammas = np.exp(rng.uniform(np.log(gamma_min), np.log(gamma_max), count))
    return [Fluctuator(float(lambda_), float(g), f"tls{k}") for k, g in enumerate(gammas)]
