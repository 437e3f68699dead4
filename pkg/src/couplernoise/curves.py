"""Decay curves, their text formats and shot-noise emulation."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["DecayCurve", "sample_shots", "shot_stderr", "CURVE_HEADER"]

CURVE_HEADER = ("t_us", "value", "stderr")


@dataclass(frozen=True)
class DecayCurve:
    """Normalised population difference sampled against total time.

    ``meta`` carries the sequence description: ``kind`` ('ramsey' or
    'cpmg'), ``n``, ``m``, ``t_g`` (us), ``g_max`` (rad/us) and, when known,
    ``shots``.
    """

    times: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        e = np.asarray(self.stderr, dtype=float) if self.stderr is not None else np.zeros_like(v)
        if not (t.ndim == 1 and t.shape == v.shape == e.shape):
            raise ValueError("times, values and stderr must be 1-d arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("curve times must be strictly increasing")
        if np.any(np.abs(v) > 1 + 1e-9):
            raise ValueError("normalised values must lie in [-1, 1]")
        if np.any(e < 0):
            raise ValueError("stderr must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "stderr", e)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self):
        return self.times.size

    @property
    def kind(self) -> str:
        return str(self.meta.get("kind", "ramsey"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for row in zip(self.times, self.values, self.stderr):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, meta: dict | None = None) -> "DecayCurve":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or tuple(rows[0]) != CURVE_HEADER:
            raise ValueError(f"curve CSV must start with header {','.join(CURVE_HEADER)}")
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
        except ValueError as exc:
            raise ValueError(f"malformed curve CSV: {exc}") from None
        if data.size == 0:
            raise ValueError("curve CSV has no data rows")
        if data.shape[1] != 3:
            raise ValueError("curve CSV rows need exactly three columns")
        return cls(data[:, 0], data[:, 1], data[:, 2], meta or {})

    def meta_json(self) -> str:
        return json.dumps(self.meta, sort_keys=True, indent=2)


def shot_stderr(values, shots: int):
    """Binomial standard error of a +-1 average over ``shots`` samples.

    ``sqrt((1 - v**2)/shots)``, floored at ``1/shots`` so saturated points
    keep a finite weight.
    """
    v = np.clip(np.asarray(values, dtype=float), -1.0, 1.0)
    return np.maximum(np.sqrt((1.0 - v * v) / shots), 1.0 / shots)


def sample_shots(curve: DecayCurve, shots: int, rng: np.random.Generator) -> DecayCurve:
    """Replace each expectation value by a ``shots``-sample binomial estimate."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = 0.5 * (1.0 + np.clip(curve.values, -1.0, 1.0))
    k = rng.binomial(shots, p)
    v = 2.0 * k / shots - 1.0
    meta = dict(curve.meta, shots=int(shots))
    return DecayCurve(curve.times, v, shot_stderr(v, shots), meta)
