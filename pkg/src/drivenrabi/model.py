"""Model parameters and the G-function of the driven Rabi model.

The Hamiltonian is ``H = w a^dag a + g sx (a^dag + a) + D sz + e sx``.  Its
spectrum is ``E = x - g**2/w`` where ``x`` runs over the zeros of

    G(x) = D**2 * Rb+(x) * Rb-(x) - R+(x) * R-(x)

with ``R(x) = sum_n K_n (g/w)**n`` and ``Rb(x) = sum_n K_n (g/w)**n / (x - n w +- e)``.
Both sign families ("+" and "-") share the recursion ``n K_n = f_{n-1} K_{n-1} - K_{n-2}``.

Besides the plain evaluation, this module provides a *regularized* evaluation in
which selected poles are removed analytically by multiplying the family sums by
``t = x - N w + s e``.  The regularized function is finite at the removed poles
and has the same zeros as G elsewhere; the spectrum solver relies on it to
resolve levels sitting on or next to a pole (Juddian points).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


class RabiError(Exception):
    """Base class for solver errors."""


class InvalidParams(RabiError, ValueError):
    pass


class PoleProximity(RabiError):
    """Requested point lies inside the guard radius of a pole of G."""


class DegenerateCoupling(RabiError):
    """The series representation does not exist at g = 0."""


class NonConvergence(RabiError):
    pass


class BracketInvalid(RabiError, ValueError):
    pass


class BoundaryValue(RabiError, ValueError):
    """Delta/omega sits on a band edge of the crossing-count rule."""


@dataclass(frozen=True)
class ModelParams:
    omega: float = 1.0
    g: float = 0.0
    delta: float = 0.0
    epsilon: float = 0.0

    def __post_init__(self):
        for name in ("omega", "g", "delta", "epsilon"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidParams(f"{name} must be a finite real, got {v!r}")
            object.__setattr__(self, name, float(v))
        if self.omega <= 0:
            raise InvalidParams(f"omega must be > 0, got {self.omega}")
        if self.g < 0:
            raise InvalidParams(f"g must be >= 0, got {self.g}")
        if self.delta < 0:
            raise InvalidParams(f"delta must be >= 0, got {self.delta}")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class SeriesConfig:
    max_terms: int = 200
    rel_tol: float = 1e-14
    consecutive_small: int = 3
    pole_guard: float = 1e-8  # in units of omega

    def __post_init__(self):
        if int(self.max_terms) != self.max_terms or self.max_terms < 8:
            raise InvalidParams(f"max_terms must be an integer >= 8, got {self.max_terms}")
        if not self.rel_tol > 0:
            raise InvalidParams(f"rel_tol must be > 0, got {self.rel_tol}")
        if int(self.consecutive_small) != self.consecutive_small or self.consecutive_small < 1:
            raise InvalidParams("consecutive_small must be an integer >= 1")
        if not self.pole_guard > 0:
            raise InvalidParams(f"pole_guard must be > 0, got {self.pole_guard}")


DEFAULT_CONFIG = SeriesConfig()


@dataclass(frozen=True)
class GEvaluation:
    x: float
    value: float
    terms_used_plus: int
    terms_used_minus: int
    nearest_pole_distance: float
    converged: bool


@dataclass
class FamilySums:
    """Truncated R and R-bar sums for one sign family (possibly pole-scaled)."""
    R: float
    Rbar: float
    terms: int
    converged: bool
    coefficients: list = field(default_factory=list)


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    return sign


def _pole_distance(params: ModelParams, sign: int, n: int, x: float) -> float:
    return abs(x - n * params.omega + sign * params.epsilon)


def f_coeff(params: ModelParams, sign: int, n: int, x: float,
            cfg: SeriesConfig = DEFAULT_CONFIG) -> float:
    """``f_n(x) = 2g/w + (n w - x + s e + D**2/(x - n w + s e)) / (2g)`` for sign ``s``."""
    _check_sign(sign)
    if params.g == 0:
        raise DegenerateCoupling("f_n is undefined at g = 0; use the closed form")
    w, g, e = params.omega, params.g, params.epsilon
    den = x - n * w + sign * e
    if abs(den) < cfg.pole_guard * w:
        raise PoleProximity(f"x={x!r} is within {cfg.pole_guard}*omega of the pole "
                            f"n={n}, sign={sign:+d}")
    d2 = params.delta * params.delta
    return 2.0 * g / w + (n * w - x + sign * e + d2 / den) / (2.0 * g)


def _family_sums(params: ModelParams, sign: int, x: float, cfg: SeriesConfig,
                 pole_n: int | None = None, keep: bool = False) -> FamilySums:
    """Sum the R and R-bar series of one sign family.

    With ``pole_n`` set, both sums are multiplied by ``t = x - pole_n*w + s*e``
    and the pole at that index is cancelled analytically, so ``t == 0`` is fine.
    Every other pole still has to respect the guard radius.
    """
    w, g = params.omega, params.g
    if g == 0:
        raise DegenerateCoupling("the G-function series needs g > 0")
    d2 = params.delta * params.delta
    r = g / w
    r2x2 = 2.0 * r * r
    r2 = r * r
    two_w = 2.0 * w
    se = sign * params.epsilon
    guard_abs = cfg.pole_guard * w
    n_min = max(8, int(x / w) + 3)
    if pole_n is not None:
        n_min = max(n_min, pole_n + 2)
        t = x - pole_n * w + se

    # The recursion runs on c_n = K_n r**n, which stays O(1) where K_n alone
    # would overflow for small g:  n c_n = r f_{n-1} c_{n-1} - r**2 c_{n-2}.
    coeffs = []
    c_prev2, c_prev = 0.0, 0.0  # c_{-2}, c_{-1}
    R = Rbar = 0.0
    max_R = max_Rb = 0.0
    small = 0
    converged = False
    held_Rb = 0.0
    n = 0
    for n in range(cfg.max_terms + 1):
        if n == 0:
            c = 1.0
        elif pole_n is not None and n == pole_n + 1:
            # t*f_N is finite at the pole; from here on c carries the factor t
            m = pole_n
            rtf = t * r2x2 + (t * (m * w - x + se) + d2) / two_w
            c = (rtf * c_prev - t * r2 * c_prev2) / n
            c_prev = t * c_prev
            R *= t
            Rbar = Rbar * t + held_Rb
            max_R = abs(R)
            max_Rb = abs(Rbar)
        else:
            den = x - (n - 1) * w + se
            if abs(den) < guard_abs:
                raise PoleProximity(f"x={x!r} is within {cfg.pole_guard}*omega of the pole "
                                    f"n={n - 1}, sign={sign:+d}")
            c = ((r2x2 + (-den + 2.0 * se + d2 / den) / two_w) * c_prev - r2 * c_prev2) / n
        if not math.isfinite(c):
            raise NonConvergence(f"series for sign {sign:+d} at x={x!r} overflowed at n={n}")
        if keep:
            coeffs.append(c)
        term_R = c
        if pole_n is not None and n == pole_n:
            held_Rb = term_R  # t * K_N r^N / t
            term_Rb = 0.0
        else:
            den_n = x - n * w + se
            if abs(den_n) < guard_abs:
                raise PoleProximity(f"x={x!r} is within {cfg.pole_guard}*omega of the pole "
                                    f"n={n}, sign={sign:+d}")
            term_Rb = term_R / den_n
        R += term_R
        Rbar += term_Rb
        max_R = max(max_R, abs(R))
        max_Rb = max(max_Rb, abs(Rbar))
        if (n >= n_min and abs(term_R) <= cfg.rel_tol * max_R
                and abs(term_Rb) <= cfg.rel_tol * max_Rb):
            small += 1
            if small >= cfg.consecutive_small:
                converged = True
                break
        else:
            small = 0
        c_prev2, c_prev = c_prev, c
    if pole_n is not None and n <= pole_n:
        R *= t
        Rbar = Rbar * t + held_Rb
    return FamilySums(R, Rbar, n + 1, converged, coeffs)


def k_coefficients(params: ModelParams, sign: int, x: float,
                   cfg: SeriesConfig = DEFAULT_CONFIG) -> list[float]:
    """Coefficients ``K_0, K_1, ...`` up to the truncation point of the series."""
    _check_sign(sign)
    fam = _family_sums(params, sign, x, cfg, keep=True)
    if not fam.converged:
        raise NonConvergence(f"series for sign {sign:+d} at x={x!r} did not converge "
                             f"within {cfg.max_terms} terms")
    r = params.g / params.omega
    return [c / r ** n for n, c in enumerate(fam.coefficients)]


def nearest_pole_distance(params: ModelParams, x: float, cfg: SeriesConfig = DEFAULT_CONFIG) -> float:
    w, e = params.omega, params.epsilon
    best = math.inf
    for s in (1, -1):
        # poles of family s sit at n*w - s*e, n = 0..max_terms
        n = min(max(round((x + s * e) / w), 0), cfg.max_terms)
        best = min(best, abs(x - n * w + s * e))
    return best


def evaluate_G(params: ModelParams, x: float, cfg: SeriesConfig = DEFAULT_CONFIG) -> GEvaluation:
    """Evaluate ``G(x) = D**2 Rb+ Rb- - R+ R-`` with truncation diagnostics."""
    plus = _family_sums(params, 1, x, cfg)
    minus = _family_sums(params, -1, x, cfg)
    d2 = params.delta * params.delta
    value = d2 * plus.Rbar * minus.Rbar - plus.R * minus.R
    return GEvaluation(x=x, value=value, terms_used_plus=plus.terms,
                       terms_used_minus=minus.terms,
                       nearest_pole_distance=nearest_pole_distance(params, x, cfg),
                       converged=plus.converged and minus.converged)


def family_pole_index(params: ModelParams, sign: int, p: float) -> int | None:
    """Index n with ``n w - s e == p`` (to rounding), or None if p is not a pole of family s."""
    w = params.omega
    n = round((p + sign * params.epsilon) / w)
    if n < 0 or abs(n * w - sign * params.epsilon - p) > 1e-9 * w:
        return None
    return n


def evaluate_G_regularized(params: ModelParams, x: float,
                           removed: tuple[int | None, int | None],
                           cfg: SeriesConfig = DEFAULT_CONFIG) -> float:
    """``G(x) * t_plus * t_minus`` with the listed poles cancelled analytically.

    ``removed`` gives, for the ``+`` and ``-`` family, the index n of the pole to
    cancel (``t = x - n w + s e``), or None.  The result is finite at the removed
    poles and shares its zeros with G elsewhere.  Raises NonConvergence when
    either series is cut off by ``max_terms``.
    """
    plus = _family_sums(params, 1, x, cfg, pole_n=removed[0])
    minus = _family_sums(params, -1, x, cfg, pole_n=removed[1])
    if not (plus.converged and minus.converged):
        raise NonConvergence(f"G series at x={x!r} did not converge within {cfg.max_terms} terms")
    d2 = params.delta * params.delta
    return d2 * plus.Rbar * minus.Rbar - plus.R * minus.R


def pole_positions(params: ModelParams, x_max: float, x_min: float | None = None) -> list[float]:
    """Sorted, deduplicated poles ``n w -+ e`` of G lying in ``[x_min, x_max]``.

    ``x_min`` defaults to the lower edge of the standard scan window.
    """
    if x_min is None:
        x_min = default_x_min(params)
    w, e = params.omega, params.epsilon
    out = []
    if x_max < x_min:
        return out
    n_top = int(math.floor((x_max + abs(e)) / w)) + 1
    for n in range(0, n_top + 1):
        for p in (n * w - e, n * w + e):
            if x_min <= p <= x_max:
                out.append(p)
    out.sort()
    dedup = []
    for p in out:
        if dedup and abs(p - dedup[-1]) <= 1e-12 * w * max(1.0, abs(p)):
            continue
        dedup.append(p)
    return dedup


def default_x_min(params: ModelParams) -> float:
    """Lower edge of the scan window, below every eigenvalue root x = E + g**2/w."""
    w = params.omega
    return -abs(params.epsilon) - params.delta - w
