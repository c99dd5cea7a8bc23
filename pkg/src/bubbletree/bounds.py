"""Explicit constants and covering-count formulas.

Everything here is closed-form arithmetic: the admissible energy scale lambda,
the per-tree membership and Lipschitz scales, the decoration budget, and the
covering counts for a single tree's map space and for the full moduli space.
Counts grow doubly exponentially, so they are carried as natural logarithms
with an exact big-integer mirror whenever the value is an integer of at most
a million digits.  The geometric constants of the target manifold are user
configuration with a neutral default profile; they are not computable here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .bubbles import association_params
from .curves import CompactnessParams
from .errors import InputError, VerificationError
from .trees import RootedTree

DIGIT_CAP = 10**6

# natural-log threshold beyond which log1p(e^t) and t agree to double precision
_LOG1P_EXACT = 50.0
_EXP_MAX = 709.0


@dataclass(frozen=True)
class GeometryConstants:
    """Bounds on the geometry of the target, plus the absolute constant.

    lambda0 is the injectivity-type scale, C and q the mean-value constants,
    l <= lambda0 and c_iso the decay-estimate scales, M the neck Lipschitz
    factor, sigma the target-net density factor (zero disables the target
    factor), dim_half half the real dimension, and c_abs >= 9 the absolute
    constant in the decoration budget.
    """

    lambda0: float = 1.0
    C: float = 1.0
    q: float = math.pi
    l: float = 1.0
    c_iso: float = 1.0
    M: float = 1.0
    sigma: float = 1.0
    dim_half: int = 2
    c_abs: float = 9.0

    def __post_init__(self):
        for name in ("lambda0", "C", "q", "l", "c_iso", "M"):
            if not getattr(self, name) > 0.0:
                raise InputError(f"{name} must be positive")
        if self.sigma < 0.0:
            raise InputError("sigma must be nonnegative")
        if self.C < 1.0 or self.M < 1.0:
            raise InputError("C and M must be at least 1")
        if self.l > self.lambda0:
            raise InputError("l must not exceed lambda0")
        if self.c_abs < 9.0:
            raise InputError("c_abs must be at least 9")
        if int(self.dim_half) != self.dim_half or self.dim_half < 1:
            raise InputError("dim_half must be a positive integer")


DEFAULT_CONSTANTS = GeometryConstants()


@dataclass(frozen=True)
class LogNumber:
    """Positive count stored by natural log, with an optional exact mirror.

    exact, when present, is the integer value itself (kept only up to
    DIGIT_CAP digits); the log and the mirror are checked for consistency and
    comparisons prefer the exact form.
    """

    ln: float
    exact: int | None = None

    def __post_init__(self):
        if not math.isfinite(self.ln):
            raise InputError(f"log value must be finite, got {self.ln}")
        if self.exact is not None:
            if self.exact < 1:
                raise InputError("exact mirror must be a positive integer")
            ref = math.log(self.exact)
            if abs(self.ln - ref) > 1e-9 * max(1.0, abs(ref)):
                raise VerificationError(
                    f"log value {self.ln} disagrees with exact mirror (log {ref})"
                )

    @classmethod
    def from_int(cls, n: int) -> "LogNumber":
        if n < 1:
            raise InputError("count must be a positive integer")
        keep = n if n.bit_length() * math.log10(2.0) <= DIGIT_CAP else None
        return cls(math.log(n), keep)

    @property
    def log10(self) -> float:
        return self.ln / math.log(10.0)

    def __lt__(self, other: "LogNumber") -> bool:
        if self.exact is not None and other.exact is not None:
            return self.exact < other.exact
        return self.ln < other.ln

    def __le__(self, other: "LogNumber") -> bool:
        return not other < self


def _log1p_exp(ln_x: float) -> float:
    """log(1 + x) for x given by its log; exact to double precision."""
    if ln_x > _LOG1P_EXACT:
        return ln_x
    return math.log1p(math.exp(ln_x))


def _mirror_power(base: float, exponent: float) -> int | None:
    """base ** exponent as an exact integer when that is representable."""
    if not (float(base).is_integer() and float(exponent).is_integer()):
        return None
    b, e = int(base), int(exponent)
    if b < 1 or e < 0:
        return None
    if e * math.log10(max(b, 2)) > DIGIT_CAP:
        return None
    return b**e


@dataclass(frozen=True)
class LambdaChoice:
    """Energy scale with the two admissibility ceilings and the binding one."""

    value: float
    decay_bound: float
    quantum_bound: float
    binding: str  # "decay", "quantum" or "both"


def choose_lambda(eps: float, g: GeometryConstants = DEFAULT_CONSTANTS) -> LambdaChoice:
    """Largest admissible energy scale for the given eps.

    lambda is capped by the decay ceiling l eps^2 (1 - eps) / (9 sqrt(C)) and
    by the energy-quantum ceiling eps sqrt(q / pi); the choice attains the
    smaller of the two.
    """
    eps = float(eps)
    if not 0.0 < eps <= 0.125:
        raise InputError(f"eps must lie in (0, 0.125], got {eps}")
    decay = g.l * eps * eps * (1.0 - eps) / (9.0 * math.sqrt(g.C))
    quantum = eps * math.sqrt(g.q / math.pi)
    if decay < quantum:
        binding = "decay"
    elif quantum < decay:
        binding = "quantum"
    else:
        binding = "both"
    return LambdaChoice(min(decay, quantum), decay, quantum, binding)


@dataclass(frozen=True)
class MapScales:
    """Scales pinning a tree's map space: membership thresholds, energy
    fraction eta, and the per-region Lipschitz budgets."""

    params: CompactnessParams
    eta: float
    lambda_v: Mapping[int, float]
    lambda_e: float

    @property
    def lambda_sup(self) -> float:
        return max(max(self.lambda_v.values()), self.lambda_e)


def membership_scales(
    tree: RootedTree, eps: float, lam: float, g: GeometryConstants = DEFAULT_CONSTANTS
) -> MapScales:
    """theta = eps, tau = 4 eps, alpha_v = (4 eps^3)^deg(v), eta = lambda /
    (3 sqrt(C) lambda0), Lambda_v = (9 pi sqrt(C) / eps^2) / alpha_v and
    Lambda_e = M / eps^2."""
    lam = float(lam)
    if lam <= 0.0:
        raise InputError("lambda must be positive")
    if not tree.is_stable():
        raise InputError("map scales are defined for stable trees only")
    params = association_params(tree, eps)
    eta = lam / (3.0 * math.sqrt(g.C) * g.lambda0)
    vertex_factor = 9.0 * math.pi * math.sqrt(g.C) / (eps * eps)
    lambda_v = {v: vertex_factor / params.alpha_of(v) for v in tree.vertices}
    lambda_e = g.M / (eps * eps)
    return MapScales(params, eta, lambda_v, lambda_e)


def decoration_budget(
    ell: int, area: float, lam: float, c_abs: float = DEFAULT_CONSTANTS.c_abs
) -> tuple[int, float]:
    """Decoration count m and the natural log of the Lipschitz multiplier.

    Both come from the quantity c (ell + area / lambda^2); m is its floor and
    the log is the quantity itself, so m <= log Lambda always.
    """
    ell = int(ell)
    area = float(area)
    lam = float(lam)
    if ell < 0 or area < 0.0:
        raise InputError("ell and area must be nonnegative")
    if lam <= 0.0:
        raise InputError("lambda must be positive")
    if c_abs < 9.0:
        raise InputError("c_abs must be at least 9")
    budget = c_abs * (ell + area / (lam * lam))
    return math.floor(budget), budget


def _target_factor_log(delta: float, g: GeometryConstants, nu_k: int) -> float:
    """log(1 + sigma delta^(-2k) nu_K) for a nontrivial factor."""
    ln_x = math.log(g.sigma) - 2.0 * g.dim_half * math.log(delta) + math.log(nu_k)
    return _log1p_exp(ln_x)


def total_cover_count(
    delta: float,
    g: GeometryConstants,
    nu_k: int,
    lip: LogNumber,
    m: int,
    ell: int,
) -> LogNumber:
    """Moduli-space covering count at resolution delta.

    (1 + sigma delta^(-2k) nu_K) raised to (8 pi Lambda^2 delta^-2) ^
    binom(m + ell, 3), with lip the Lipschitz multiplier Lambda, evaluated
    in log space.  Raises when the exponent tower leaves double range.
    """
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if nu_k < 0 or m < 0 or ell < 0:
        raise InputError("nu_K, m and ell must be nonnegative")
    if g.sigma == 0.0 or nu_k == 0:
        return LogNumber(0.0, 1)
    layers = math.comb(m + ell, 3)
    ln_expo = layers * (
        math.log(8.0 * math.pi) + 2.0 * lip.ln - 2.0 * math.log(delta)
    )
    factor_ln = _target_factor_log(delta, g, nu_k)
    if ln_expo > _EXP_MAX:
        raise InputError(
            f"count exceeds log space: the exponent alone is e^{ln_expo:.6g}"
        )
    expo = math.exp(ln_expo)
    ln_total = expo * factor_ln
    if not math.isfinite(ln_total):
        raise InputError(
            f"count exceeds log space: log of the count is {expo:.6g} * "
            f"{factor_ln:.6g}"
        )
    try:
        base = 1.0 + g.sigma * delta ** (-2.0 * g.dim_half) * nu_k
    except OverflowError:
        return LogNumber(ln_total)
    return LogNumber(ln_total, _mirror_power(base, expo))


def total_cover_loglog(
    delta: float,
    g: GeometryConstants,
    nu_k: int,
    lip: LogNumber,
    m: int,
    ell: int,
) -> float:
    """Base-10 log of log10 of the count from total_cover_count.

    Stays finite far past the point where the count itself leaves log
    space, which happens for any decoration budget above a handful of
    points.  Requires a count above 1 so the iterated log is defined.
    """
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if nu_k < 0 or m < 0 or ell < 0:
        raise InputError("nu_K, m and ell must be nonnegative")
    if g.sigma == 0.0 or nu_k == 0:
        raise InputError("the count is 1, so its iterated log is undefined")
    layers = math.comb(m + ell, 3)
    ln_expo = layers * (
        math.log(8.0 * math.pi) + 2.0 * lip.ln - 2.0 * math.log(delta)
    )
    factor_ln = _target_factor_log(delta, g, nu_k)
    if factor_ln <= 0.0:
        raise InputError("the target factor underflowed to 1")
    ln_ln = ln_expo + math.log(factor_ln)
    return (ln_ln - math.log(math.log(10.0))) / math.log(10.0)


@dataclass(frozen=True)
class CurveCoverCount:
    """Covering count for one tree's map space, with its factor sizes.

    log_cells bounds the moduli-cell count, log_patch_net the per-region
    domain net size, and regions = mu + 1 counts the vertices plus edges.
    """

    total: LogNumber
    log_cells: float
    log_patch_net: float
    regions: int


def curve_cover_count(
    delta: float,
    mu: int,
    lam_sup: float,
    g: GeometryConstants = DEFAULT_CONSTANTS,
    nu_k: int = 1,
) -> CurveCoverCount:
    """Covering count (4 / delta^2)^(mu - 1) * (1 + sigma delta^(-2k)
    nu_K) ^ ((8 pi)^mu (Lambda / delta)^(2 mu) (mu + 1)).

    mu is the total vertex degree of the tree and Lambda the largest region
    Lipschitz budget.
    """
    delta = float(delta)
    mu = int(mu)
    lam_sup = float(lam_sup)
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if mu < 3:
        raise InputError(f"mu must be at least 3, got {mu}")
    if lam_sup <= 0.0:
        raise InputError("the Lipschitz bound must be positive")
    if nu_k < 0:
        raise InputError("nu_K must be nonnegative")
    ln_cells = (mu - 1) * math.log(4.0 / (delta * delta))
    ln_patch = mu * math.log(8.0 * math.pi) + 2.0 * mu * (
        math.log(lam_sup) - math.log(delta)
    )
    if g.sigma == 0.0 or nu_k == 0:
        cells = 4.0 / (delta * delta)
        return CurveCoverCount(
            LogNumber(ln_cells, _mirror_power(cells, mu - 1)),
            ln_cells,
            ln_patch,
            mu + 1,
        )
    factor_ln = _target_factor_log(delta, g, nu_k)
    ln_expo = ln_patch + math.log(mu + 1)
    if ln_expo > _EXP_MAX:
        raise InputError(
            f"count exceeds log space: the exponent alone is e^{ln_expo:.6g}"
        )
    ln_total = ln_cells + math.exp(ln_expo) * factor_ln
    if not math.isfinite(ln_total):
        raise InputError("count exceeds log space")
    return CurveCoverCount(LogNumber(ln_total), ln_cells, ln_patch, mu + 1)


def curve_cover_loglog(
    delta: float,
    mu: int,
    lam_sup: float,
    g: GeometryConstants = DEFAULT_CONSTANTS,
    nu_k: int = 1,
) -> float:
    """Base-10 log of log10 of the count from curve_cover_count.

    Once the tower factor has left log space the cell factor is negligible
    next to it, so the iterated log reduces to the tower exponent plus the
    log of the per-layer factor.
    """
    delta = float(delta)
    mu = int(mu)
    lam_sup = float(lam_sup)
    if not 0.0 < delta <= 1.0:
        raise InputError(f"delta must lie in (0, 1], got {delta}")
    if mu < 3:
        raise InputError(f"mu must be at least 3, got {mu}")
    if lam_sup <= 0.0:
        raise InputError("the Lipschitz bound must be positive")
    if nu_k < 0:
        raise InputError("nu_K must be nonnegative")
    ln_cells = (mu - 1) * math.log(4.0 / (delta * delta))
    if g.sigma == 0.0 or nu_k == 0:
        ln_ln = math.log(ln_cells)
    else:
        factor_ln = _target_factor_log(delta, g, nu_k)
        if factor_ln <= 0.0:
            raise InputError("the target factor underflowed to 1")
        ln_patch = mu * math.log(8.0 * math.pi) + 2.0 * mu * (
            math.log(lam_sup) - math.log(delta)
        )
        ln_expo = ln_patch + math.log(mu + 1)
        if ln_expo <= _EXP_MAX:
            ln_ln = math.log(ln_cells + math.exp(ln_expo) * factor_ln)
        else:
            ln_ln = ln_expo + math.log(factor_ln)
    return (ln_ln - math.log(math.log(10.0))) / math.log(10.0)


def sphere_net_bound(gamma: float) -> tuple[float, float]:
    """Net-size bounds for the round sphere at mesh gamma.

    Returns 2 / (1 - cos(gamma/2)) and the weaker closed form 8 pi / gamma^2;
    the first never exceeds the second for gamma in (0, pi).
    """
    gamma = float(gamma)
    if not 0.0 < gamma < math.pi:
        raise InputError(f"gamma must lie in (0, pi), got {gamma}")
    exact_form = 2.0 / (1.0 - math.cos(gamma / 2.0))
    weak_form = 8.0 * math.pi / (gamma * gamma)
    if exact_form > weak_form * (1.0 + 1e-12):
        raise VerificationError("area bound exceeded its weak form")
    return exact_form, weak_form


def mapspace_count(nu_t: int, nu_w: int, nu_z: int) -> LogNumber:
    """Cell-count bound nu_T (1 + nu_W)^nu_Z for a space of Lipschitz maps
    indexed by a base net of size nu_T, with domain and codomain nets of
    sizes nu_Z and nu_W."""
    nu_t, nu_w, nu_z = int(nu_t), int(nu_w), int(nu_z)
    if nu_t < 1:
        raise InputError("the base net must have at least one point")
    if nu_w < 0 or nu_z < 0:
        raise InputError("net sizes must be nonnegative")
    ln = math.log(nu_t) + nu_z * math.log1p(nu_w)
    exact = None
    if nu_z * math.log10(max(nu_w + 1, 2)) <= DIGIT_CAP:
        exact = nu_t * (1 + nu_w) ** nu_z
    return LogNumber(ln, exact)
