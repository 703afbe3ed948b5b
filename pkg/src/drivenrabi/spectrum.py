"""Eigenvalues of the driven Rabi model from the zeros of the G-function.

The x axis is cut into cells, one per cluster of G-function poles.  Inside a
cell the clustered poles are cancelled analytically (see
:func:`drivenrabi.model.evaluate_G_regularized`), which leaves a smooth function
whose zeros are the eigenvalue roots ``x_N = E_N + g**2/w``.  Each cell is
sampled, sign changes are bracketed, and dips of ``|G|`` without a sign change
are chased down so that nearly coincident root pairs (level crossings) are not
lost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    DEFAULT_CONFIG,
    BoundaryValue,
    BracketInvalid,
    InvalidParams,
    ModelParams,
    NonConvergence,
    SeriesConfig,
    default_x_min,
    evaluate_G_regularized,
    family_pole_index,
    pole_positions,
)
from .optimize import brent_root, golden_min

G_FUNCTION = "g_function"
CLOSED_FORM_G0 = "closed_form_g0"

CLUSTER_GAP = 0.25    # poles closer than this (units of omega) share one cell
DEFAULT_STEP = 1.0 / 16.0
DEFAULT_XTOL = 1e-12
TANGENT_TOL = 1e-10   # |G| dip (relative to neighbours) accepted as a double root
DIP_XTOL = 1e-13


@dataclass(frozen=True)
class EnergyLevel:
    index: int
    energy: float
    root_x: float
    source: str


@dataclass
class Spectrum:
    params: ModelParams
    levels: list
    scan_window: tuple
    solver_meta: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])

    @property
    def roots(self) -> np.ndarray:
        return np.array([lv.root_x for lv in self.levels])

    def __len__(self):
        return len(self.levels)


@dataclass(frozen=True)
class CrossingCountRule:
    delta_over_omega: float
    epsilon_over_omega: float
    k: int

    @staticmethod
    def band_edge(k: int, eps_over_omega: float) -> float:
        return math.sqrt(k * k + 2.0 * k * abs(eps_over_omega))

    @classmethod
    def classify(cls, delta: float, omega: float, epsilon: float) -> "CrossingCountRule":
        d = delta / omega
        e = abs(epsilon) / omega
        if d <= 0:
            raise BoundaryValue(f"delta/omega = {d} is not inside any band")
        k = 0
        while True:
            lo, hi = cls.band_edge(k, e), cls.band_edge(k + 1, e)
            if abs(d - lo) < 1e-12 or abs(d - hi) < 1e-12:
                raise BoundaryValue(f"delta/omega = {d!r} lies on a band edge (k={k})")
            if lo < d < hi:
                return cls(d, e, k)
            k += 1


def count_crossings(delta: float, omega: float, epsilon: float, N: int) -> int:
    """Number of level crossings on the N-th baseline: ``N - k`` (0 if ``k >= N``)."""
    if N < 1:
        raise InvalidParams(f"N must be a positive integer, got {N}")
    rule = CrossingCountRule.classify(delta, omega, epsilon)
    return max(N - rule.k, 0)


def closed_form_g0(params: ModelParams, count: int) -> Spectrum:
    """Lowest ``count`` levels at g = 0: ``N w +- sqrt(D**2 + e**2)``."""
    if params.g != 0:
        raise InvalidParams("closed_form_g0 requires g = 0")
    if count < 1:
        raise InvalidParams("count must be >= 1")
    w = params.omega
    root = math.hypot(params.delta, params.epsilon)
    values = []
    for n in range(count):
        values.append(n * w - root)
        values.append(n * w + root)
    values.sort()
    levels = [EnergyLevel(i, e, e, CLOSED_FORM_G0) for i, e in enumerate(values[:count])]
    return Spectrum(params, levels, (values[0], values[count - 1]), {"method": CLOSED_FORM_G0})


# -- cells ---------------------------------------------------------------

@dataclass(frozen=True)
class Cell:
    lo: float
    hi: float
    poles: tuple
    removed: tuple  # pole index per sign family (+, -), or None


def _removal(params: ModelParams, poles) -> tuple:
    out = [None, None]
    for p in poles:
        for i, s in enumerate((1, -1)):
            n = family_pole_index(params, s, p)
            if n is None:
                continue
            if out[i] is not None and out[i] != n:
                raise BracketInvalid("interval holds two poles of the same family")
            out[i] = n
    return tuple(out)


def make_cells(params: ModelParams, x_lo: float, x_hi: float) -> list:
    """Split ``[x_lo, x_hi]`` into cells holding one pole cluster each."""
    w = params.omega
    poles = pole_positions(params, x_hi + w, min(x_lo, default_x_min(params)) - w)
    clusters = []
    for p in poles:
        if clusters and p - clusters[-1][-1] < CLUSTER_GAP * w:
            clusters[-1].append(p)
        else:
            clusters.append([p])
    if not clusters:
        return [Cell(x_lo, x_hi, (), (None, None))]
    edges = [-math.inf]
    for left, right in zip(clusters, clusters[1:]):
        edges.append(0.5 * (left[-1] + right[0]))
    edges.append(math.inf)
    cells = []
    for j, cl in enumerate(clusters):
        a, b = max(edges[j], x_lo), min(edges[j + 1], x_hi)
        if a < b:
            cells.append(Cell(a, b, tuple(cl), _removal(params, cl)))
    return cells


def _cell_function(params, cell, cfg):
    removed = cell.removed

    def f(x):
        return evaluate_G_regularized(params, x, removed, cfg)
    return f


def _scan_cell(params, cell, cfg, step):
    """Brackets for every root inside ``cell`` (half-open at the top)."""
    f = _cell_function(params, cell, cfg)
    m = max(3, int(math.ceil((cell.hi - cell.lo) / step)) + 1)
    xs = list(np.linspace(cell.lo, cell.hi, m))
    xs.extend(p for p in cell.poles if cell.lo < p < cell.hi)
    xs = sorted(set(xs))
    vs = [f(x) for x in xs]
    last = len(xs) - 1
    brackets = []
    for i in range(last):
        x0, x1 = xs[i], xs[i + 1]
        v0, v1 = vs[i], vs[i + 1]
        if v0 == 0.0:
            brackets.append((x0, x0))
            left = vs[i - 1] if i > 0 else None
            if left is not None and left != 0.0 and v1 != 0.0 and (left > 0) == (v1 > 0):
                brackets.append((x0, x0))  # tangent zero hit exactly
            continue
        if v1 == 0.0:
            continue
        if (v0 > 0) != (v1 > 0):
            brackets.append((x0, x1))
    # dips of |G| with no sign change can hide a close pair of roots
    for i in range(last + 1):
        v = vs[i]
        if v == 0.0:
            continue
        nb = [j for j in (i - 1, i + 1) if 0 <= j <= last]
        if any(vs[j] == 0.0 or (vs[j] > 0) != (v > 0) for j in nb):
            continue
        if any(abs(vs[j]) <= abs(v) for j in nb):
            continue
        lo, hi = xs[nb[0]], xs[nb[-1]]
        s = 1.0 if v > 0 else -1.0
        xm, fm = golden_min(lambda x: s * f(x), lo, hi, tol=DIP_XTOL * params.omega,
                            stop_below=0.0)
        if fm < 0:
            brackets.append((lo, xm))
            brackets.append((xm, hi))
        elif fm <= TANGENT_TOL * max(abs(vs[j]) for j in nb):
            brackets.append((xm, xm))
            brackets.append((xm, xm))
    brackets.sort()
    return brackets, f


def scan_roots(params: ModelParams, x_lo: float, x_hi: float,
               cfg: SeriesConfig = DEFAULT_CONFIG, step: float | None = None) -> list:
    """Brackets ``(lo, hi)`` around every eigenvalue root in ``[x_lo, x_hi)``.

    A tangent (double) root is reported as two degenerate brackets ``(x, x)``.
    """
    if params.g == 0:
        raise InvalidParams("scan_roots needs g > 0")
    step = DEFAULT_STEP * params.omega if step is None else step
    if not 0 < step <= params.omega / 4:
        raise InvalidParams(f"step must be in (0, omega/4], got {step}")
    if not x_lo < x_hi:
        raise InvalidParams("x_lo must be < x_hi")
    out = []
    for cell in make_cells(params, x_lo, x_hi):
        br, _ = _scan_cell(params, cell, cfg, step)
        out.extend(br)
    return out


def _function_for_bracket(params, lo, hi, cfg):
    margin = 1e-3 * params.omega
    poles = [p for p in pole_positions(params, hi + margin, lo - margin)]
    removed = _removal(params, poles)

    def f(x):
        return evaluate_G_regularized(params, x, removed, cfg)
    return f


def refine_root(params: ModelParams, bracket, cfg: SeriesConfig = DEFAULT_CONFIG,
                xtol: float | None = None, history=None, func=None) -> float:
    """Refine a sign-changing bracket to width ``xtol`` (Brent with bisection fallback)."""
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo > hi:
        lo, hi = hi, lo
    if lo == hi:
        return lo
    xtol = DEFAULT_XTOL * params.omega if xtol is None else xtol
    f = func or _function_for_bracket(params, lo, hi, cfg)
    flo, fhi = f(lo), f(hi)
    if flo != 0.0 and fhi != 0.0 and (flo > 0) == (fhi > 0):
        raise BracketInvalid(f"G has the same sign at both ends of [{lo!r}, {hi!r}]")
    x, _, _ = brent_root(f, lo, hi, flo, fhi, xtol=xtol, history=history)
    return x


def x_cap(params: ModelParams, count: int) -> float:
    w = params.omega
    return (count + 10 + 2 * abs(params.epsilon) / w + params.delta / w) * w


def roots_between(params: ModelParams, x_lo: float, x_hi: float,
                  cfg: SeriesConfig = DEFAULT_CONFIG, step: float | None = None,
                  xtol: float | None = None) -> list:
    """All refined eigenvalue roots in ``[x_lo, x_hi)``, ascending, with multiplicity."""
    step = DEFAULT_STEP * params.omega if step is None else step
    roots = []
    for cell in make_cells(params, x_lo, x_hi):
        br, f = _scan_cell(params, cell, cfg, step)
        roots.extend(refine_root(params, b, cfg, xtol, func=f) for b in br)
    roots.sort()
    return roots


def compute_spectrum(params: ModelParams, count: int, cfg: SeriesConfig = DEFAULT_CONFIG,
                     step: float | None = None, xtol: float | None = None) -> Spectrum:
    """Lowest ``count`` eigenvalues, ascending, from the zeros of G."""
    if count < 1:
        raise InvalidParams("count must be >= 1")
    if params.g == 0:
        return closed_form_g0(params, count)
    w = params.omega
    step = DEFAULT_STEP * w if step is None else step
    xtol = DEFAULT_XTOL * w if xtol is None else xtol
    x_lo = default_x_min(params)
    cap = x_cap(params, count)
    cells = make_cells(params, x_lo, cap)
    roots = []
    x_hi = x_lo
    for cell in cells:
        br, f = _scan_cell(params, cell, cfg, step)
        roots.extend(refine_root(params, b, cfg, xtol, func=f) for b in br)
        x_hi = cell.hi
        if len(roots) >= count:
            break
    if len(roots) < count:
        raise NonConvergence(f"found {len(roots)} < {count} roots below the cap x={cap}")
    roots.sort()
    shift = params.g * params.g / w
    levels = [EnergyLevel(i, x - shift, x, G_FUNCTION) for i, x in enumerate(roots[:count])]
    meta = {"method": G_FUNCTION, "xtol": xtol, "step": step,
            "max_terms": cfg.max_terms, "rel_tol": cfg.rel_tol,
            "pole_guard": cfg.pole_guard}
    return Spectrum(params, levels, (x_lo, x_hi), meta)
