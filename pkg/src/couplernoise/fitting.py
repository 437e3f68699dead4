"""Recover noise parameters from measured or synthetic decay curves.

All fits are weighted least squares (``scipy.optimize.least_squares``,
trust-region reflective with bounds) restarted from several points: the given initial guess plus the
best-scoring points of a seeded quasi-random design over the bounds.
Rates and amplitudes that must stay positive are optimised in log space;
quantities that may vanish (white-noise variance, ``Gamma_phi``) are kept
linear with a lower bound of zero so that "absent" is a reachable answer.
The covariance is ``(J^T J)^-1`` scaled by the reduced chi-square.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import signal
from scipy.optimize import least_squares
from scipy.stats import qmc

from .curves import DecayCurve
from .envelopes import cpmg_rtn, ramsey_rtn
from .noise import Fluctuator

__all__ = [
    "FitError",
    "FitModel",
    "FitResult",
    "RamseyGaussianFit",
    "fit_cpmg_family",
    "fit_g_scaling",
    "fit_ramsey_gaussian",
    "predict",
    "pulse_moments",
    "quadratic_scaling_fit",
]

# singular values of the column-normalised Jacobian below this are "flat"
FLAT_TOL = 1e-4
# function-evaluation budget of the scouting pass, and how many starts get polished
SCOUT_NFEV = 40
N_POLISH = 2

_DEFAULT_BOUNDS = {
    "lambda": (1e-3, 50.0),
    "gamma": (1e-4, 100.0),
    "white_sigma_sq": (0.0, 5.0),
    "gamma_phi": (0.0, 5.0),
    "scale": (1e-4, 1e4),
    "lam_c0": (0.0, 5.0),
    "lam_c1": (1e-7, 1.0),
    "lam_c2": (0.0, 1e-2),
    "white_ratio_sq": (0.0, 1.0),
}

_UNITS = {
    "lambda": "rad/us",
    "gamma": "1/us",
    "white_sigma_sq": "rad^2/us",
    "gamma_phi": "1/us",
    "scale": "1",
    "lam_c0": "rad/us",
    "lam_c1": "1",
    "lam_c2": "us/rad",
    "white_ratio_sq": "us",
}

_LOG = {"lambda", "gamma", "scale", "lam_c1"}
_ZERO_OK = {"white_sigma_sq", "white_ratio_sq", "gamma_phi", "lam_c0", "lam_c2"}


class FitError(RuntimeError):
    """No start converged; ``diagnostics`` lists what each start reported."""

    def __init__(self, message: str, diagnostics: list[dict] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


@dataclass(frozen=True)
class FitModel:
    """Which noise sources a fit includes and where it may look.

    Parameters
    ----------
    n_fluctuators : int
        Number of telegraph sources.
    share_chi_shape : bool
        Amplitudes follow one common flux-sensitivity polynomial and differ
        only by a scale per fluctuator (needed by :func:`fit_g_scaling`).
    include_white, include_gamma_phi : bool
        Fit white g-noise and single-qubit dephasing.  When
        ``include_gamma_phi`` is false, ``gamma_phi`` is held at the given value.
    bounds : dict
        Overrides keyed by parameter family (``'lambda'``, ``'gamma'``, ...)
        or by full parameter name (``'gamma_2'``).
    initial : dict
        Starting values by full parameter name; missing ones use the
        geometric middle of their bounds.
    n_starts : int
        Total number of starts, each run for a short scouting budget before
        the two best are refined to convergence; start 0 is ``initial``, for CPMG families
        start 1 is a guess from the step frequency, the rest are the
        lowest-cost points of a ``seed``-scrambled Sobol design of at
        least ``32 * (n_starts - 1)`` points.
    """

    n_fluctuators: int = 1
    share_chi_shape: bool = False
    include_white: bool = False
    include_gamma_phi: bool = False
    gamma_phi: float = 0.0
    bounds: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    n_starts: int = 8
    seed: int = 0
    max_nfev: int = 3000

    def __post_init__(self):
        if self.n_fluctuators < 0:
            raise ValueError("n_fluctuators must be >= 0")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.gamma_phi < 0:
            raise ValueError("gamma_phi must be >= 0")

    def to_dict(self) -> dict:
        return {"n_fluctuators": self.n_fluctuators, "share_chi_shape": self.share_chi_shape,
                "include_white": self.include_white, "include_gamma_phi": self.include_gamma_phi,
                "gamma_phi": self.gamma_phi,
                "bounds": {k: list(v) for k, v in sorted(self.bounds.items())},
                "initial": dict(sorted(self.initial.items())), "n_starts": self.n_starts,
                "seed": self.seed, "max_nfev": self.max_nfev}

    @classmethod
    def from_dict(cls, d: dict) -> "FitModel":
        known = {"n_fluctuators", "share_chi_shape", "include_white", "include_gamma_phi",
                 "gamma_phi", "bounds", "initial", "n_starts", "seed", "max_nfev"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown fit-model field(s): {sorted(unknown)}")
        kw = dict(d)
        if "bounds" in kw:
            kw["bounds"] = {k: (float(v[0]), float(v[1])) for k, v in kw["bounds"].items()}
        if "initial" in kw:
            kw["initial"] = {k: float(v) for k, v in kw["initial"].items()}
        return cls(**kw)


@dataclass
class FitResult:
    """Best-fit parameters with curvature-based uncertainties.

    ``stderr`` comes from ``(J^T J)^-1`` times the reduced chi-square (the
    delta method for log-space parameters).  ``warnings`` flags parameters
    at a bound and nearly flat directions of the objective.
    """

    kind: str
    params: dict
    units: dict
    stderr: dict
    chi2: float
    dof: int
    n_points: int
    converged: bool
    best_start: int
    n_starts: int
    nfev: int
    message: str
    warnings: list = field(default_factory=list)
    covariance: np.ndarray | None = None
    param_names: tuple = ()
    derived: dict = field(default_factory=dict)
    model: FitModel | None = None
    diagnostics: list = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return float(np.sqrt(self.chi2))

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def confidence(self, name: str, z: float = 1.96) -> tuple[float, float]:
        v, s = self.params[name], self.stderr[name]
        return v - z * s, v + z * s

    def fluctuators(self) -> list[Fluctuator]:
        """Fitted sources (family fits only)."""
        k = 1
        out = []
        while f"lambda_{k}" in self.params:
            out.append(Fluctuator(self.params[f"lambda_{k}"], self.params[f"gamma_{k}"], f"fit{k}"))
            k += 1
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: float(v) for k, v in self.params.items()},
            "units": dict(self.units),
            "stderr": {k: float(v) for k, v in self.stderr.items()},
            "chi2": float(self.chi2),
            "dof": int(self.dof),
            "reduced_chi2": float(self.reduced_chi2),
            "residual_norm": self.residual_norm,
            "n_points": int(self.n_points),
            "converged": bool(self.converged),
            "best_start": int(self.best_start),
            "n_starts": int(self.n_starts),
            "nfev": int(self.nfev),
            "message": self.message,
            "warnings": list(self.warnings),
            "derived": _jsonable(self.derived),
            "model": self.model.to_dict() if self.model else None,
            "diagnostics": _jsonable(self.diagnostics),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def report(self) -> str:
        lines = [f"fit: {self.kind}",
                 f"chi2 = {self.chi2:.6g} on {self.dof} dof (reduced {self.reduced_chi2:.4g})",
                 f"best of {self.n_starts} starts: #{self.best_start}, {self.message}"]
        for name in self.param_names:
            lines.append(f"  {name:16s} = {self.params[name]:.6g} +- {self.stderr[name]:.3g} "
                         f"{self.units.get(name, '')}")
        for k, v in self.derived.items():
            lines.append(f"  {k}: {v}")
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class _Param:
    name: str
    family: str
    lo: float
    hi: float

    @property
    def log(self) -> bool:
        return self.family in _LOG

    def to_internal(self, v):
        return np.log(v) if self.log else v

    def to_natural(self, u):
        return np.exp(u) if self.log else u

    @property
    def ibounds(self):
        return (np.log(self.lo), np.log(self.hi)) if self.log else (self.lo, self.hi)

    def default(self) -> float:
        if self.log:
            return float(np.sqrt(self.lo * self.hi))
        return self.lo + 1e-3 * (self.hi - self.lo)


def _param_list(model: FitModel, g_scaling: bool) -> list[_Param]:
    names = []
    if g_scaling:
        names += [("lam_c0", "lam_c0"), ("lam_c1", "lam_c1"), ("lam_c2", "lam_c2")]
    for k in range(1, model.n_fluctuators + 1):
        if not g_scaling:
            names.append((f"lambda_{k}", "lambda"))
        elif k > 1:
            names.append((f"scale_{k}", "scale"))
        names.append((f"gamma_{k}", "gamma"))
    if model.include_white:
        names.append(("white_ratio_sq", "white_ratio_sq") if g_scaling
                     else ("white_sigma_sq", "white_sigma_sq"))
    if model.include_gamma_phi:
        names.append(("gamma_phi", "gamma_phi"))
    out = []
    for name, fam in names:
        lo, hi = model.bounds.get(name, model.bounds.get(fam, _DEFAULT_BOUNDS[fam]))
        if not lo < hi:
            raise ValueError(f"empty bounds for {name}: ({lo}, {hi})")
        if fam in _LOG and lo <= 0:
            raise ValueError(f"{name} is fitted in log space; its lower bound must be > 0")
        out.append(_Param(name, fam, float(lo), float(hi)))
    return out


# ---------------------------------------------------------------- models

def pulse_moments(t_g: float, rise_time: float) -> tuple[float, float]:
    """Gate averages of the unit pulse shape and its square.

    For the raised-cosine trapezoid these are ``(t_g - r)/t_g`` and
    ``(t_g - 5 r/4)/t_g``.
    """
    return (t_g - rise_time) / t_g, (t_g - 1.25 * rise_time) / t_g


def _curve_info(c: DecayCurve) -> dict:
    m = c.meta
    kind = m.get("kind", "cpmg")
    info = {"kind": kind, "t": c.times}
    if kind == "cpmg":
        n = int(m.get("n", 0))
        if n < 1:
            raise ValueError("CPMG curve metadata needs n >= 1")
        info["n"] = n
        info["T_C"] = c.times / n
    if "g_max" in m:
        t_g = float(m.get("t_g", 0.040))
        a1, a2 = pulse_moments(t_g, float(m.get("rise_time", 0.008)))
        g = float(m["g_max"])
        info["g_max"] = g
        info["g1"], info["g2"] = a1 * g, a2 * g * g
    return info


def _envelope(info: dict, lams, gams, white_sq: float, gamma_phi: float) -> np.ndarray:
    t = info["t"]
    out = np.exp(-0.25 * gamma_phi * t - 2.0 * white_sq * t)
    for lam, gam in zip(lams, gams):
        f = Fluctuator(float(lam), float(gam))
        if info["kind"] == "cpmg":
            out = out * cpmg_rtn(f, info["n"], info["T_C"])
        else:
            out = out * ramsey_rtn(f, t)
    return out


def _family_eval(p: dict, info: dict, model: FitModel) -> np.ndarray:
    k = model.n_fluctuators
    lams = [p[f"lambda_{i}"] for i in range(1, k + 1)]
    gams = [p[f"gamma_{i}"] for i in range(1, k + 1)]
    return _envelope(info, lams, gams, p.get("white_sigma_sq", 0.0),
                     p.get("gamma_phi", model.gamma_phi))


def _chi_shape(p: dict, info: dict) -> float:
    """Amplitude of the first source at this curve's gate averages."""
    return abs(p["lam_c0"] + p["lam_c1"] * info["g1"] + p["lam_c2"] * info["g2"])


def _scaling_eval(p: dict, info: dict, model: FitModel) -> np.ndarray:
    k = model.n_fluctuators
    shape = _chi_shape(p, info)
    lams = [p.get(f"scale_{i}", 1.0) * shape for i in range(1, k + 1)]
    gams = [p[f"gamma_{i}"] for i in range(1, k + 1)]
    white = p.get("white_ratio_sq", 0.0) * shape**2
    return _envelope(info, lams, gams, white, p.get("gamma_phi", model.gamma_phi))


_EVALUATORS: dict[str, Callable] = {"cpmg_family": _family_eval, "g_scaling": _scaling_eval}


def predict(result: FitResult, curve: DecayCurve) -> np.ndarray:
    """Model values of a fit at the points of ``curve``."""
    return _EVALUATORS[result.kind](result.params, _curve_info(curve), result.model)


def _sigma(c: DecayCurve) -> np.ndarray:
    """Per-point errors used for the first pass (data-based, floored)."""
    e = np.asarray(c.stderr, dtype=float)
    shots = c.meta.get("shots")
    floor = 1.0 / float(shots) if shots else 1e-3
    return np.where(e > 0, np.maximum(e, floor), floor)


# ---------------------------------------------------------------- driver

def _screened_starts(resid, lo, hi, count: int, seed: int) -> list[np.ndarray]:
    """Lowest-cost points of a scrambled Sobol design over the bounds.

    Linear parameters bounded below by zero are spread over five decades
    below their upper bound, since small values are the interesting ones.
    """
    if count <= 0:
        return []
    lo_f = np.where(np.isfinite(lo), lo, -1e3)
    hi_f = np.where(np.isfinite(hi), hi, 1e3)
    m = int(np.ceil(np.log2(32 * count)))
    design = qmc.Sobol(d=lo.size, scramble=True, seed=seed).random_base2(m)
    pts = lo_f + design * (hi_f - lo_f)
    decades = (lo == 0) & np.isfinite(hi)
    pts[:, decades] = hi_f[decades] * 10.0 ** (-5.0 * (1.0 - design[:, decades]))
    cost = np.array([np.sum(resid(u) ** 2) for u in pts])
    order = np.argsort(cost, kind="stable")[:count]
    return [pts[i] for i in order]


def _spectral_guess(infos: list[dict], data: list[np.ndarray]) -> dict | None:
    """Rough ``(lambda, gamma)`` of one underdamped source from CPMG steps.

    The steps of an underdamped fluctuator repeat in ``T_C`` with angular
    frequency ``w = sqrt(4 lambda^2 - gamma^2)``; the decay rate of the
    envelope approximates ``gamma``.  Periodograms of the curves minus an
    exponential trend are summed and the peak taken as ``w``; ``snr`` is
    the peak over the median power.
    """
    rates, pieces = [], []
    for info, y in zip(infos, data):
        if info["kind"] != "cpmg":
            continue
        t, T = info["t"], info["T_C"]
        ok = y > 0.05
        if ok.sum() < 8:
            continue
        slope, icpt = np.polyfit(t[ok], np.log(y[ok]), 1)
        rates.append(max(-slope, 1e-4))
        pieces.append((T[ok], y[ok] - np.exp(icpt + slope * t[ok])))
    if not pieces:
        return None
    dT = min(np.min(np.diff(T)) for T, _ in pieces)
    span = max(T[-1] - T[0] for T, _ in pieces)
    if span <= 0 or dT <= 0:
        return None
    w = np.linspace(np.pi / span, np.pi / dT, 4000)
    power = sum(signal.lombscargle(T, d - d.mean(), w) for T, d in pieces)
    i = int(np.argmax(power))
    gamma = float(np.median(rates))
    return {"lambda": 0.5 * np.hypot(w[i], gamma), "gamma": gamma,
            "snr": float(power[i] / max(np.median(power), 1e-300))}


def _scaling_guess(infos: list[dict], data: list[np.ndarray]) -> dict | None:
    """Per-``g_max`` spectral guesses joined by a linear fit of ``lambda(g)``."""
    by_g: dict[float, list[int]] = {}
    for i, info in enumerate(infos):
        by_g.setdefault(info["g_max"], []).append(i)
    rows, lams, gams = [], [], []
    for g, idx in sorted(by_g.items()):
        est = _spectral_guess([infos[i] for i in idx], [data[i] for i in idx])
        if est is None or est["snr"] < 20:
            continue
        info = infos[idx[0]]
        rows.append([1.0, info["g1"], info["g2"]])
        lams.append(est["lambda"])
        gams.append(est["gamma"])
    if len(rows) < 3:
        return None
    c, *_ = np.linalg.lstsq(np.array(rows), np.array(lams), rcond=None)
    if c[1] <= 0:
        return None
    return {"lam_c0": c[0], "lam_c1": c[1], "lam_c2": max(c[2], 0.0),
            "gamma": float(np.min(gams))}


def _run_fit(kind: str, curves: Sequence[DecayCurve], model: FitModel,
             params: list[_Param], workers: int) -> FitResult:
    infos = [_curve_info(c) for c in curves]
    data = np.concatenate([c.values for c in curves])
    sig = np.concatenate([_sigma(c) for c in curves])
    n_pts = data.size
    if len(params) > n_pts:
        raise ValueError(f"{len(params)} parameters but only {n_pts} data points")
    evaluate = _EVALUATORS[kind]
    names = [q.name for q in params]

    def natural(u):
        return {q.name: float(q.to_natural(x)) for q, x in zip(params, u)}

    def resid(u):
        p = natural(u)
        pred = np.concatenate([evaluate(p, info, model) for info in infos])
        r = (pred - data) / sig
        return np.where(np.isfinite(r), r, 1e6)

    lo = np.array([q.ibounds[0] for q in params])
    hi = np.array([q.ibounds[1] for q in params])
    u0 = np.array([q.to_internal(np.clip(model.initial.get(q.name, q.default()), q.lo, q.hi))
                   for q in params])
    starts = [u0]
    guess = (_spectral_guess(infos, [c.values for c in curves]) if kind == "cpmg_family"
             else _scaling_guess(infos, [c.values for c in curves]))
    if guess is not None and model.n_starts > 1 and model.n_fluctuators > 0:
        u1 = u0.copy()
        for j, q in enumerate(params):
            key = q.name if q.name in guess else q.family if q.name.endswith("_1") else None
            if key in guess:
                u1[j] = q.to_internal(np.clip(guess[key], q.lo, q.hi))
        starts.append(u1)
    starts += _screened_starts(resid, lo, hi, model.n_starts - len(starts), model.seed)

    def solve(u_start, budget):
        try:
            return least_squares(resid, u_start, bounds=(lo, hi), method="trf",
                                 x_scale="jac", max_nfev=budget,
                                 ftol=1e-12, xtol=1e-12, gtol=1e-12)
        except (ValueError, FloatingPointError) as exc:  # pragma: no cover - defensive
            return exc

    def run_all(us, budget):
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as ex:
                return list(ex.map(lambda u: solve(u, budget), us))
        return [solve(u, budget) for u in us]

    # scout every start on a short budget, then polish the most promising
    scout = run_all(starts, min(SCOUT_NFEV, model.max_nfev))
    scores = [s.cost if not isinstance(s, Exception) and np.isfinite(s.cost) else np.inf
              for s in scout]
    order = [i for i in np.argsort(scores, kind="stable") if np.isfinite(scores[i])][:N_POLISH]
    polished = run_all([scout[i].x for i in order], model.max_nfev)

    diag = []
    for i, s in enumerate(scout):
        if isinstance(s, Exception):
            diag.append({"start": i, "stage": "scout", "status": "error", "message": str(s)})
        else:
            diag.append({"start": i, "stage": "scout", "status": int(s.status),
                         "cost": float(s.cost), "nfev": int(s.nfev), "message": s.message})
    best, best_i = None, -1
    for i, s in zip(order, polished):
        if isinstance(s, Exception):
            diag.append({"start": int(i), "stage": "polish", "status": "error", "message": str(s)})
            continue
        diag.append({"start": int(i), "stage": "polish", "status": int(s.status),
                     "cost": float(s.cost), "nfev": int(s.nfev), "message": s.message})
        ok = s.status > 0 and np.isfinite(s.cost)
        if ok and (best is None or s.cost < best.cost or (s.cost == best.cost and i < best_i)):
            best, best_i = s, int(i)
    if best is None:
        raise FitError(f"{kind} fit did not converge from any of {len(starts)} starts", diag)

    # With known shot counts, reweight by the binomial variance of the fitted
    # model rather than of the data: a saturated point (all shots alike)
    # otherwise gets a spuriously tiny error bar and dominates chi-square.
    shots = np.concatenate([np.full(len(c), float(c.meta.get("shots") or 0)) for c in curves])
    if np.all(shots > 0):
        pred = data + best.fun * sig
        sig = np.maximum(np.sqrt(np.clip(1 - pred**2, 0, None) / shots), 1.0 / shots)
        again = solve(best.x, model.max_nfev)
        if isinstance(again, Exception) or again.status <= 0:
            raise FitError(f"{kind} fit failed after reweighting", diag)
        diag.append({"start": best_i, "stage": "reweight", "status": int(again.status),
                     "cost": float(again.cost), "nfev": int(again.nfev), "message": again.message})
        best = again

    J = best.jac
    dof = max(n_pts - len(params), 0)
    chi2 = float(np.sum(best.fun**2))
    red = chi2 / dof if dof > 0 else 1.0
    warnings = []
    col = np.linalg.norm(J, axis=0)
    col = np.where(col > 0, col, 1.0)
    Jn = J / col
    _, sv, vt = np.linalg.svd(Jn, full_matrices=False)
    if sv.size and sv[-1] < FLAT_TOL * sv[0]:
        v = vt[-1]
        lead = [names[j] for j in np.argsort(-np.abs(v))[:2] if abs(v[j]) > 0.2]
        warnings.append("nearly flat direction in the objective along "
                        + " / ".join(lead) + f" (singular value ratio {sv[-1] / sv[0]:.2e})")
    # (J^T J)^-1 from the SVD of the column-normalised Jacobian; exactly flat
    # directions are clipped so that they show up as huge, not dropped, errors
    s_cl = np.maximum(sv, 1e-10 * sv[0]) if sv.size else sv
    cov_n = (vt.T / s_cl**2) @ vt
    cov_int = cov_n / np.outer(col, col) * red
    p_nat = natural(best.x)
    sd_int = np.sqrt(np.clip(np.diag(cov_int), 0, None))
    stderr = {}
    for j, q in enumerate(params):
        stderr[q.name] = float(p_nat[q.name] * sd_int[j] if q.log else sd_int[j])
        span = hi[j] - lo[j]
        zero_ok = q.family in _ZERO_OK and q.lo == 0
        if not zero_ok and best.x[j] - lo[j] < 1e-6 * span:
            warnings.append(f"{q.name} at its lower bound {q.lo:g}")
        if hi[j] - best.x[j] < 1e-6 * span:
            warnings.append(f"{q.name} at its upper bound {q.hi:g}")
    D = np.array([p_nat[q.name] if q.log else 1.0 for q in params])
    return FitResult(kind=kind, params=p_nat, units={q.name: _UNITS[q.family] for q in params},
                     stderr=stderr, chi2=chi2, dof=dof, n_points=n_pts, converged=True,
                     best_start=best_i, n_starts=len(starts), nfev=int(best.nfev),
                     message=str(best.message), warnings=warnings,
                     covariance=cov_int * np.outer(D, D), param_names=tuple(names),
                     derived={}, model=model, diagnostics=diag)


def _check_compatible(curves: Sequence[DecayCurve], keys: tuple[str, ...]):
    for key in keys:
        vals = {round(float(c.meta[key]), 12) for c in curves if key in c.meta}
        if len(vals) > 1:
            raise ValueError(f"curves disagree on {key}: {sorted(vals)}")


def fit_cpmg_family(curves: Sequence[DecayCurve], model: FitModel = FitModel(),
                    workers: int = 1) -> FitResult:
    """Joint fit of CPMG curves with different ``n`` to telegraph sources.

    The model is ``exp(-Gamma_phi t/4) exp(-2 sigma^2 t) prod_k chi_k(n, t/n)``
    with ``chi_k`` the exact single-fluctuator CPMG envelope.  Curves must
    share ``t_g`` and ``g_max``.

    Raises
    ------
    FitError
        When no start converges.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("fit_cpmg_family needs at least two curves")
    if any(c.meta.get("kind", "cpmg") != "cpmg" for c in curves):
        raise ValueError("fit_cpmg_family takes CPMG curves only")
    _check_compatible(curves, ("t_g", "g_max"))
    res = _run_fit("cpmg_family", curves, model, _param_list(model, False), workers)
    res.derived = {"regime": ["underdamped" if f.underdamped else "overdamped"
                              for f in res.fluctuators()]}
    if model.include_white:
        res.derived["white_sigma"] = float(np.sqrt(res.params["white_sigma_sq"]))
    return res


def fit_g_scaling(curves: Sequence[DecayCurve], model: FitModel = FitModel(share_chi_shape=True),
                  workers: int = 1) -> FitResult:
    """Joint fit of curves taken at several ``g_max`` with one flux-sensitivity shape.

    The first source has ``lambda_1 = |c0 + c1 <|g|> + c2 <g^2>|`` where the
    averages are over the pulse of each curve, further sources are
    ``scale_k * lambda_1``, white g-noise has ``sigma^2 = white_ratio_sq *
    lambda_1^2`` and ``Gamma_phi`` does not scale.  The flux-sensitivity
    ratio ``chi2/chi1 = c2/c1`` (in ``|g|``, us/rad) is reported in
    ``derived`` together with its delta-method standard error.
    """
    curves = list(curves)
    if not model.share_chi_shape:
        raise ValueError("fit_g_scaling needs a model with share_chi_shape=True")
    if any("g_max" not in c.meta for c in curves):
        raise ValueError("every curve needs g_max in its metadata")
    gs = sorted({round(float(c.meta["g_max"]), 9) for c in curves})
    if len(gs) < 4:
        raise ValueError(f"fit_g_scaling needs curves at >= 4 g_max values, got {len(gs)}")
    _check_compatible(curves, ("t_g",))
    res = _run_fit("g_scaling", curves, model, _param_list(model, True), workers)
    p = res.params
    lam, white = {}, {}
    for c in curves:
        info = _curve_info(c)
        shape = _chi_shape(p, info)
        lam[repr(info["g_max"])] = [p.get(f"scale_{k}", 1.0) * shape
                                    for k in range(1, model.n_fluctuators + 1)]
        if model.include_white:
            white[repr(info["g_max"])] = float(np.sqrt(p["white_ratio_sq"]) * shape)
    names = list(res.param_names)
    i0, i1, i2 = names.index("lam_c0"), names.index("lam_c1"), names.index("lam_c2")
    C = res.covariance
    ratio = p["lam_c2"] / p["lam_c1"]
    grad = np.zeros(len(names))
    grad[i1], grad[i2] = -ratio / p["lam_c1"], 1.0 / p["lam_c1"]
    res.derived = {
        "chi2_over_chi1": ratio,
        "chi2_over_chi1_stderr": float(np.sqrt(max(grad @ C @ grad, 0.0))),
        "chi0_over_chi1": p["lam_c0"] / p["lam_c1"],
        "lambda_at_g_max": lam,
    }
    if model.include_white:
        res.derived["white_sigma_at_g_max"] = white
    return res


# ---------------------------------------------------------------- Gaussian Ramsey

@dataclass(frozen=True)
class RamseyGaussianFit:
    """``exp(-(gamma_r t)^2) cos(swap_freq t)`` fitted to a Ramsey curve.

    ``gamma_r_interval`` is a 95% interval obtained from the fitted
    ``gamma_r**2`` (which is what the optimiser varies), so a curve with no
    decay gives an interval that starts at zero.
    """

    gamma_r: float
    gamma_r_stderr: float
    gamma_r_interval: tuple
    swap_freq: float
    swap_freq_stderr: float
    r_squared: float
    envelope_only: bool
    chi2: float
    dof: int

    def to_dict(self) -> dict:
        return _jsonable({k: getattr(self, k) for k in self.__dataclass_fields__})


def fit_ramsey_gaussian(curve: DecayCurve, envelope_only: bool | None = None,
                        swap_freq: float | None = None, n_starts: int = 8,
                        seed: int = 0) -> RamseyGaussianFit:
    """Fit a Gaussian decay with an optional coherent swap oscillation.

    Parameters
    ----------
    envelope_only : bool, optional
        Fit ``exp(-(gamma_r t)^2)`` alone.  Defaults to ``meta['envelope']``,
        which engines set when they return the frame-rotated envelope.
    swap_freq : float, optional
        Initial guess for the swap frequency (rad/us); defaults to
        ``2 * gate area / t_g`` from the metadata.
    """
    t, y = curve.times, curve.values
    sig = _sigma(curve)
    if envelope_only is None:
        envelope_only = bool(curve.meta.get("envelope", False))
    if swap_freq is None and not envelope_only:
        m = curve.meta
        if "g_max" in m and "t_g" in m:
            t_g = float(m["t_g"])
            swap_freq = 2.0 * float(m["g_max"]) * (t_g - float(m.get("rise_time", 0.0))) / t_g
        else:
            raise ValueError("need swap_freq (or g_max and t_g in metadata) to fit the oscillation")
    t_span = float(t[-1] - t[0]) if t.size > 1 else 1.0
    rate_hi = (50.0 / max(t_span, 1e-12)) ** 2

    def model(u):
        env = np.exp(-u[0] * t * t)
        return env if envelope_only else env * np.cos(u[1] * t)

    def resid(u):
        return (model(u) - y) / sig

    lo = [0.0] if envelope_only else [0.0, 0.0]
    hi = [rate_hi] if envelope_only else [rate_hi, np.inf]
    rng = np.random.default_rng(seed)
    starts = []
    for i in range(n_starts):
        r0 = (1.0 / t_span) ** 2 * (10.0 ** rng.uniform(-3, 1) if i else 1.0)
        starts.append([r0] if envelope_only else [r0, swap_freq])
    best = None
    for s in starts:
        sol = least_squares(resid, s, bounds=(lo, hi), method="trf", x_scale="jac",
                            ftol=1e-12, xtol=1e-12, gtol=1e-12, max_nfev=2000)
        if sol.status > 0 and (best is None or sol.cost < best.cost):
            best = sol
    if best is None:
        raise FitError("Gaussian Ramsey fit did not converge")
    dof = max(t.size - best.x.size, 1)
    chi2 = float(np.sum(best.fun**2))
    # errors are known from shot noise, so never shrink them below nominal
    cov = np.linalg.pinv(best.jac.T @ best.jac) * max(chi2 / dof, 1.0)
    sd = np.sqrt(np.clip(np.diag(cov), 0, None))
    rate = float(best.x[0])
    g_r = np.sqrt(rate)
    g_sd = sd[0] / (2 * g_r) if g_r > 0 else float("inf")
    interval = (float(np.sqrt(max(rate - 1.96 * sd[0], 0.0))), float(np.sqrt(rate + 1.96 * sd[0])))
    fitted = model(best.x)
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return RamseyGaussianFit(
        gamma_r=float(g_r), gamma_r_stderr=float(g_sd), gamma_r_interval=interval,
        swap_freq=float("nan") if envelope_only else float(best.x[1]),
        swap_freq_stderr=float("nan") if envelope_only else float(sd[1]),
        r_squared=float(r2), envelope_only=bool(envelope_only), chi2=chi2, dof=int(dof))


def quadratic_scaling_fit(g, y) -> tuple[np.ndarray, float]:
    """Least-squares quadratic ``y = c0 + c1 g + c2 g^2``; returns coefficients and R^2."""
    g = np.asarray(g, dtype=float)
    y = np.asarray(y, dtype=float)
    if g.size < 3:
        raise ValueError("need at least three points for a quadratic")
    c = np.polynomial.polynomial.polyfit(g, y, 2)
    fit = np.polynomial.polynomial.polyval(g, c)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return c, r2
