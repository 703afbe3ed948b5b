"""Energy landscape over the (g, epsilon) plane and its conical intersections.

Cones sit in the planes ``epsilon = n w / 2`` where two baseline paraboloids
``E = N1 w - g**2/w - e`` and ``E = N2 w - g**2/w + e`` (``N1 - N2 = n``)
intersect.  They are located numerically: adjacent-level gaps are scanned
along g, local minima are refined by golden-section search, and each
candidate is then checked against the baseline it should sit on.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .model import DEFAULT_CONFIG, ModelParams, RabiError, SeriesConfig
from .optimize import golden_min
from .spectrum import compute_spectrum, make_cells, roots_between

DEGENERACY_TOL = 1e-8
BASELINE_TOL = 1e-6
CONE_GTOL = 1e-10
DEFAULT_GSTEP = 0.01


@dataclass
class LandscapeGrid:
    omega: float
    delta: float
    g_axis: np.ndarray
    eps_axis: np.ndarray
    sheets: np.ndarray          # shape (len(g_axis), len(eps_axis), L)
    L: int
    shifted: bool = False
    error_mask: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.g_axis = np.asarray(self.g_axis, dtype=float)
        self.eps_axis = np.asarray(self.eps_axis, dtype=float)
        self.sheets = np.asarray(self.sheets, dtype=float)
        if self.error_mask is None:
            self.error_mask = np.zeros(self.sheets.shape[:2], dtype=bool)

    def shift(self) -> "LandscapeGrid":
        """Copy with ``E + g**2/w`` stored instead of E (flattens the baselines)."""
        if self.shifted:
            return self
        add = (self.g_axis ** 2 / self.omega)[:, None, None]
        return LandscapeGrid(self.omega, self.delta, self.g_axis.copy(), self.eps_axis.copy(),
                             self.sheets + add, self.L, True, self.error_mask.copy(),
                             dict(self.meta))

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "delta": self.delta,
            "g_axis": self.g_axis.tolist(),
            "eps_axis": self.eps_axis.tolist(),
            "sheets": [[[None if math.isnan(v) else v for v in node] for node in row]
                       for row in self.sheets.tolist()],
            "L": self.L,
            "shifted": self.shifted,
            "error_mask": self.error_mask.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LandscapeGrid":
        sheets = np.array([[[math.nan if v is None else v for v in node] for node in row]
                           for row in d["sheets"]], dtype=float)
        sheets = sheets.reshape(len(d["g_axis"]), len(d["eps_axis"]), d["L"])
        return cls(d["omega"], d["delta"], np.array(d["g_axis"], dtype=float),
                   np.array(d["eps_axis"], dtype=float), sheets, d["L"], d["shifted"],
                   np.array(d["error_mask"], dtype=bool).reshape(sheets.shape[:2]),
                   d.get("meta", {}))


@dataclass(frozen=True)
class ConicalPoint:
    plane_n: int
    g_star: float
    energy: float
    sheet_pair: tuple
    gap_residual: float
    baseline_residual: float
    aperture: float = math.nan  # |dE_upper/dg - dE_lower/dg| at the tip, diagnostic only

    @property
    def label(self) -> int:
        """Crossing-count label: the smaller of the two baseline quantum numbers."""
        return min(self.sheet_pair)

    def as_dict(self) -> dict:
        return {"plane_n": self.plane_n, "g_star": self.g_star, "energy": self.energy,
                "sheet_pair": list(self.sheet_pair), "label": self.label,
                "gap_residual": self.gap_residual,
                "baseline_residual": self.baseline_residual, "aperture": self.aperture}


@dataclass
class ConeSearch:
    cones: list
    anomalies: list
    meta: dict = field(default_factory=dict)

    def counts(self) -> dict:
        out = {}
        for c in self.cones:
            out[c.label] = out.get(c.label, 0) + 1
        return dict(sorted(out.items()))


def _node(args):
    params, L, cfg = args
    try:
        return compute_spectrum(params, L, cfg).energies, None
    except RabiError as exc:
        return np.full(L, math.nan), f"{type(exc).__name__}: {exc}"


def sweep(params_template: ModelParams, g_axis, eps_axis, L: int, shifted: bool = False,
          cfg: SeriesConfig = DEFAULT_CONFIG, workers: int = 1) -> LandscapeGrid:
    """Lowest ``L`` levels at every node of the (g, epsilon) grid.

    Failed nodes are NaN-filled and flagged in ``error_mask``; they never abort
    the sweep.  Output order is independent of ``workers``.
    """
    g_axis = np.asarray(g_axis, dtype=float)
    eps_axis = np.asarray(eps_axis, dtype=float)
    if g_axis.size == 0 or eps_axis.size == 0:
        raise ValueError("grid axes must be nonempty")
    if np.any(np.diff(g_axis) <= 0) or np.any(np.diff(eps_axis) <= 0):
        raise ValueError("grid axes must be strictly ascending")
    if L < 1:
        raise ValueError("L must be >= 1")
    jobs = [(params_template.with_(g=float(g), epsilon=float(e)), L, cfg)
            for g in g_axis for e in eps_axis]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_node, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_node(j) for j in jobs]
    ng, ne = g_axis.size, eps_axis.size
    sheets = np.array([r[0] for r in results]).reshape(ng, ne, L)
    mask = np.array([r[1] is not None for r in results]).reshape(ng, ne)
    errors = {f"{i // ne},{i % ne}": r[1] for i, r in enumerate(results) if r[1] is not None}
    meta = {"version": __version__, "max_terms": cfg.max_terms, "rel_tol": cfg.rel_tol,
            "consecutive_small": cfg.consecutive_small, "pole_guard": cfg.pole_guard}
    if errors:
        meta["errors"] = errors
    grid = LandscapeGrid(params_template.omega, params_template.delta, g_axis, eps_axis,
                         sheets, L, False, mask, meta)
    return grid.shift() if shifted else grid


# -- export ----------------------------------------------------------------

def _fmt(v: float) -> str:
    return "nan" if math.isnan(v) else format(v, ".17g")


def grid_to_csv(grid: LandscapeGrid) -> str:
    buf = io.StringIO()
    buf.write(f"# omega={_fmt(grid.omega)}\n# delta={_fmt(grid.delta)}\n")
    buf.write(f"# L={grid.L}\n# shifted={int(grid.shifted)}\n")
    for k, v in grid.meta.items():
        if k != "errors":
            buf.write(f"# {k}={v}\n")
    buf.write("g,epsilon,sheet,energy,shifted\n")
    s = int(grid.shifted)
    for i, g in enumerate(grid.g_axis):
        for j, e in enumerate(grid.eps_axis):
            for k in range(grid.L):
                buf.write(f"{_fmt(g)},{_fmt(e)},{k},{_fmt(grid.sheets[i, j, k])},{s}\n")
    return buf.getvalue()


def export_grid(grid: LandscapeGrid, fmt: str, path) -> None:
    """Write ``grid`` as CSV (one row per node and sheet) or JSON."""
    if fmt == "csv":
        text = grid_to_csv(grid)
    elif fmt == "json":
        text = json.dumps(grid.to_dict(), indent=1) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r} (expected 'csv' or 'json')")
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write landscape grid to {os.fspath(path)!r}: {exc}") from exc


def read_grid_json(path) -> LandscapeGrid:
    with open(path) as fh:
        return LandscapeGrid.from_dict(json.load(fh))


def read_grid_csv(path) -> LandscapeGrid:
    header = {}
    rows = []
    with open(path, newline="") as fh:
        data_lines = []
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k.strip()] = v.strip()
            elif line.strip():
                data_lines.append(line)
    for r in csv.DictReader(data_lines):
        rows.append((float(r["g"]), float(r["epsilon"]), int(r["sheet"]), float(r["energy"])))
    g_axis = sorted({r[0] for r in rows})
    eps_axis = sorted({r[1] for r in rows})
    L = int(header["L"])
    sheets = np.array([r[3] for r in rows]).reshape(len(g_axis), len(eps_axis), L)
    return LandscapeGrid(float(header["omega"]), float(header["delta"]), np.array(g_axis),
                         np.array(eps_axis), sheets, L, header.get("shifted") == "1",
                         np.isnan(sheets).any(axis=2))


# -- cones -----------------------------------------------------------------

def _levels_for(sheet_max: int, plane_n: int) -> int:
    return 2 * (sheet_max + abs(plane_n) + 2)


def _local_gap_fn(params, pole, cfg):
    """Smallest adjacent-level gap among the roots in the pole cell around ``pole``."""
    w = params.omega

    def gap(g):
        pg = params.with_(g=g)
        cell = next(c for c in make_cells(pg, pole - 0.5 * w, pole + 0.5 * w)
                    if c.lo <= pole < c.hi)
        roots = roots_between(pg, cell.lo, cell.hi, cfg)
        if len(roots) < 2:
            return w
        return float(min(b - a for a, b in zip(roots, roots[1:])))
    return gap


def _energies_along(params, g_grid, count, cfg):
    return np.array([compute_spectrum(params.with_(g=float(g)), count, cfg).energies
                     for g in g_grid])


def _aperture(params, g_star, level, count, cfg, h=1e-5):
    lo = compute_spectrum(params.with_(g=g_star - h), count, cfg).energies
    hi = compute_spectrum(params.with_(g=g_star + h), count, cfg).energies
    s1 = (hi[level] - lo[level]) / (2 * h)
    s2 = (hi[level + 1] - lo[level + 1]) / (2 * h)
    # at the tip the two sheets swap index order, so the slopes are read crosswise
    s1x = (hi[level + 1] - lo[level]) / (2 * h)
    s2x = (hi[level] - lo[level + 1]) / (2 * h)
    return float(max(abs(s1 - s2), abs(s1x - s2x)))


def reflect(search: ConeSearch, plane_n: int) -> ConeSearch:
    """Mirror a cone inventory to the plane ``-n`` (epsilon -> -epsilon swaps N1 and N2)."""
    def flip(c):
        return ConicalPoint(plane_n, c.g_star, c.energy, c.sheet_pair[::-1],
                            c.gap_residual, c.baseline_residual, c.aperture)
    meta = dict(search.meta, plane_n=plane_n, epsilon=plane_n * 0.5 * search.meta.get("omega", 1.0),
                reflected_from=search.meta.get("plane_n"))
    return ConeSearch([flip(c) for c in search.cones], [flip(c) for c in search.anomalies], meta)


def find_cones(params_template: ModelParams, plane_n: int, g_max: float, sheet_max: int,
               cfg: SeriesConfig = DEFAULT_CONFIG, g_step: float = DEFAULT_GSTEP,
               degeneracy_tol: float = DEGENERACY_TOL,
               baseline_tol: float = BASELINE_TOL) -> ConeSearch:
    """Conical intersection points in the plane ``epsilon = plane_n * w / 2``.

    Cones with label ``min(N1, N2)`` in ``1..sheet_max`` and ``0 < g* <= g_max``
    are returned; gap minima that close below ``degeneracy_tol`` but miss the
    baseline are listed as anomalies.
    """
    if g_max <= 0:
        raise ValueError("g_max must be > 0")
    if plane_n < 0:
        found = find_cones(params_template, -plane_n, g_max, sheet_max, cfg, g_step,
                           degeneracy_tol, baseline_tol)
        return reflect(found, plane_n)

    w = params_template.omega
    eps = plane_n * w / 2.0
    params = params_template.with_(epsilon=eps)
    count = _levels_for(sheet_max, plane_n)
    n_steps = max(2, int(math.ceil(g_max / g_step)))
    g_grid = np.linspace(0.0, g_max, n_steps + 1)[1:]
    E = _energies_along(params, g_grid, count, cfg)
    gaps = np.diff(E, axis=1)

    candidates = []
    for lev in range(count - 1):
        col = gaps[:, lev]
        for i in range(len(g_grid)):
            left = col[i - 1] if i > 0 else math.inf
            right = col[i + 1] if i + 1 < len(g_grid) else math.inf
            if not (col[i] <= left and col[i] < right):
                continue
            if col[i] > max(0.05, 10 * g_step) * w:
                continue
            # a true crossing sits on a pole x = N w -+ e; skip avoided crossings away from one
            xbar = 0.5 * (E[i, lev] + E[i, lev + 1]) + g_grid[i] ** 2 / w
            pole = (round(xbar / w - plane_n / 2.0) + plane_n / 2.0) * w
            if abs(xbar - pole) > col[i] + 0.05 * w:
                continue
            a = g_grid[i - 1] if i > 0 else 0.5 * g_grid[0]
            b = g_grid[i + 1] if i + 1 < len(g_grid) else g_max
            candidates.append((lev, pole, a, b))

    cones, anomalies = [], []
    for lev, pole, a, b in candidates:
        gap = _local_gap_fn(params, pole, cfg)
        g_star, gap_min = golden_min(gap, a, b, tol=CONE_GTOL * w)
        if gap_min > degeneracy_tol * w or g_star > g_max:
            continue
        ev = compute_spectrum(params.with_(g=g_star), count, cfg).energies
        lev = int(np.argmin(np.diff(ev)[max(lev - 1, 0):lev + 2])) + max(lev - 1, 0)
        e_star = 0.5 * (ev[lev] + ev[lev + 1])
        nbar = (e_star + g_star ** 2 / w) / w
        nbar_r = round(nbar - plane_n / 2.0) + plane_n / 2.0
        n1, n2 = int(round(nbar_r + plane_n / 2.0)), int(round(nbar_r - plane_n / 2.0))
        resid = abs(e_star - (nbar_r * w - g_star ** 2 / w))
        point = ConicalPoint(plane_n, float(g_star), float(e_star), (n1, n2), float(gap_min),
                             float(resid), _aperture(params, g_star, lev, count, cfg))
        if resid > baseline_tol * w or min(n1, n2) < 0:
            anomalies.append(point)
        elif 1 <= point.label <= sheet_max:
            cones.append(point)
    cones.sort(key=lambda c: (c.label, c.g_star))
    anomalies.sort(key=lambda c: c.g_star)
    meta = {"plane_n": plane_n, "epsilon": eps, "omega": w, "g_max": g_max, "g_step": g_step,
            "sheet_max": sheet_max, "levels": count, "degeneracy_tol": degeneracy_tol,
            "baseline_tol": baseline_tol}
    return ConeSearch(cones, anomalies, meta)


def off_plane_gap_floor(params_template: ModelParams, eps_offsets, g_max: float,
                        cfg: SeriesConfig = DEFAULT_CONFIG, levels: int = 4,
                        g_step: float = DEFAULT_GSTEP) -> list:
    """Minimum adjacent gap among the lowest ``levels`` levels over ``g in (0, g_max]``.

    One value per epsilon offset.  Grid minima are polished by golden-section
    search so a true crossing shows up as a gap at rounding level.
    """
    out = []
    n_steps = max(2, int(math.ceil(g_max / g_step)))
    g_grid = np.linspace(0.0, g_max, n_steps + 1)[1:]
    for eps in eps_offsets:
        params = params_template.with_(epsilon=float(eps))
        E = _energies_along(params, g_grid, levels, cfg)
        col = np.diff(E, axis=1).min(axis=1)

        def min_gap(g):
            return float(np.diff(compute_spectrum(params.with_(g=g), levels, cfg).energies).min())

        best = float(col.min())
        for i in range(len(g_grid)):
            left = col[i - 1] if i > 0 else math.inf
            right = col[i + 1] if i + 1 < len(g_grid) else math.inf
            # polishing moves a grid minimum by at most ~ slope * g_step
            if col[i] <= left and col[i] < right and col[i] <= best + 20 * g_step * params.omega:
                a = g_grid[i - 1] if i > 0 else 0.5 * g_grid[0]
                b = g_grid[i + 1] if i + 1 < len(g_grid) else g_max
                _, v = golden_min(min_gap, a, b, tol=CONE_GTOL * params.omega)
                best = min(best, v)
        out.append(best)
    return out
