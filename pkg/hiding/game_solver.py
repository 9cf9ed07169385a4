"""
Hider's side of the game.
Features:
- Per-regime stationary strengths: erase (mu), intermediate quartic root, Wiener closed form
- Exact per-region candidates: every D2/D3 boundary root and the Wiener-region maximiser
- Post-filter variant solved against the filtered channel
- Candidate comparison under the attacker's best response
- Equilibrium report at fixed multipliers
- Nested log-scan + bisection calibration of (lambda, chi) to distortion budgets,
  with the feasibility edge located before a target is declared unreachable
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from hiding.attack_channel import (
    AttackPlan,
    Regime,
    attack_objective,
    classify_domains,
    filtered_attack_params,
    mu_threshold,
    optimal_attack_params,
    site_attack_distortion,
    site_rho,
)
from hiding.embedder import EmbeddingPlan, postfilter_gain, site_embedding_distortion
from hiding.errors import InfeasibleBudgetError, InvalidParameterError
from hiding.signal_model import Message, SiteModel

logger = logging.getLogger(__name__)

Scalar = Union[float, np.ndarray]

ROOT_TOL = 1e-14
ROOT_MAX_ITER = 200
TIE_RTOL = 1e-12

SCAN_LOW = 1e-8
SCAN_HIGH = 1e4
SCAN_POINTS = 25
BUDGET_RTOL = 1e-3
CALIBRATION_MAX_ITER = 200
MONOTONE_SLACK = 1e-9
EDGE_RTOL = 1e-8
CEILING_HEADROOM = 2.0


@dataclass(frozen=True)
class EquilibriumReport:
    regime: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    sigma_delta_sq: np.ndarray
    rho: np.ndarray
    d_xy: float
    d_xy_prime: float
    eb_n0: float
    lam: float
    chi: float
    n: int
    postfilter: bool = False
    filter_gain: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return int(self.alpha.size)

    def attack_plan(self, noise_seed: int = 0) -> AttackPlan:
        return AttackPlan(gamma=self.gamma, sigma_delta=np.sqrt(self.sigma_delta_sq),
                          regime=self.regime, noise_seed=noise_seed)

    def embedding_plan(self, message: Message, code_seed: int) -> EmbeddingPlan:
        if message.n != self.n:
            raise InvalidParameterError(f"message has {message.n} bits, equilibrium solved for n={self.n}")
        return EmbeddingPlan(message=message, alpha=self.alpha, code_seed=code_seed, postfilter=self.postfilter)

    def regime_counts(self) -> dict:
        return {r.label: int(np.count_nonzero(self.regime == r)) for r in Regime if r is not Regime.CUSTOM}

    def summary(self) -> dict:
        return {"lambda": self.lam, "chi": self.chi, "n": self.n, "postfilter": self.postfilter,
                "d_xy": self.d_xy, "d_xy_prime": self.d_xy_prime, "eb_n0": self.eb_n0,
                **{f"sites_{k}": v for k, v in self.regime_counts().items()}}


def _check_positive(lam: float, chi: Optional[float] = None):
    if not lam > 0:
        raise InvalidParameterError(f"lambda must be > 0, got {lam}")
    if chi is not None and not chi > 0:
        raise InvalidParameterError(f"chi must be > 0, got {chi}")


def _bisect(func: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
            tol: float = ROOT_TOL, max_iter: int = ROOT_MAX_ITER) -> np.ndarray:
    """Vectorised bisection; func(lo) and func(hi) have opposite signs element-wise."""
    lo = np.array(lo, dtype=np.float64)
    hi = np.array(hi, dtype=np.float64)
    lo_positive = func(lo) > 0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all(hi - lo <= tol) or np.all((mid == lo) | (mid == hi)):
            break
        same = (func(mid) > 0) == lo_positive
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return 0.5 * (lo + hi)


def alpha_erase(lam: float, phi: Scalar, sigma_x: Scalar) -> Scalar:
    """Smallest alpha the erase attack prefers: mu = sqrt(lambda) phi sigma_x^2."""
    _check_positive(lam)
    return mu_threshold(lam, phi, sigma_x)


def quartic(alpha: Scalar, mu: Scalar, chi: float, phi: Scalar, n: int) -> Scalar:
    """p(alpha) = mu^2 - mu alpha - chi n phi^2 alpha^4."""
    return mu ** 2 - mu * alpha - chi * n * np.asarray(phi) ** 2 * np.asarray(alpha) ** 4


def postfilter_quartic(alpha: Scalar, mu: Scalar, chi: float, phi: Scalar, sigma_x: Scalar, n: int) -> Scalar:
    """Intermediate stationarity against the filtered distortion: the alpha^4 term carries g^2."""
    alpha = np.asarray(alpha, dtype=np.float64)
    gain = postfilter_gain(np.asarray(sigma_x, dtype=np.float64) ** 2, n * alpha ** 2)
    return mu ** 2 - mu * alpha - chi * n * np.asarray(phi) ** 2 * alpha ** 4 * gain ** 2


def alpha_intermediate(lam: float, chi: float, phi: Scalar, sigma_x: Scalar, n: int,
                       postfilter: bool = False) -> Scalar:
    """
    Root of the intermediate-regime quartic on (0, mu). When the root lies
    outside D2, the D2/D3 boundary strength between the root and mu is returned.
    Both stationarity conditions decrease strictly on (0, mu), so the root is unique.
    """
    _check_positive(lam, chi)
    phi, sigma_x = np.broadcast_arrays(np.asarray(phi, dtype=np.float64), np.asarray(sigma_x, dtype=np.float64))
    mu = mu_threshold(lam, phi, sigma_x)
    if postfilter:
        root = _bisect(lambda a: postfilter_quartic(a, mu, chi, phi, sigma_x, n), np.zeros_like(mu), mu)
    else:
        root = _bisect(lambda a: quartic(a, mu, chi, phi, n), np.zeros_like(mu), mu)

    regime = classify_domains(root, sigma_x, phi, lam, n)
    outside = (regime != Regime.INTERMEDIATE) & (mu > 0)
    if np.any(outside):
        s = sigma_x[outside] ** 2
        m_out = mu[outside]

        def boundary(a):
            return (a - m_out) * (s + n * a * a) + m_out * a * a

        root = np.array(root, dtype=np.float64)
        root[outside] = _bisect(boundary, root[outside], m_out)
    root = np.where(mu > 0, root, 0.0)
    return float(root) if root.ndim == 0 else root


def alpha_wiener(lam: float, chi: float, phi: Scalar, sigma_x: Scalar, n: int) -> Scalar:
    """Closed form with lambda' = n lambda, chi' = n chi; 0 where the site cannot be marked robustly."""
    _check_positive(lam, chi)
    phi = np.asarray(phi, dtype=np.float64)
    sigma_x = np.asarray(sigma_x, dtype=np.float64)
    lam_n, chi_n = n * lam, n * chi
    numerator = sigma_x * np.sqrt(1.0 + lam_n * phi ** 2 * sigma_x ** 2) - np.sqrt(chi_n) * phi * sigma_x ** 2
    alpha = np.sqrt(np.maximum(numerator, 0.0) / (np.sqrt(chi_n) * n * phi))
    return float(alpha) if alpha.ndim == 0 else alpha


def alpha_wiener_stationary(lam: float, chi: float, phi: Scalar, sigma_x: Scalar, n: int,
                            postfilter: bool = False) -> Scalar:
    """
    Maximiser of the Wiener-regime payoff over t = alpha^2 in [0, mu^2], with
    rho = t / (sigma_x^2 + (n - 1) t) kept exact. Without the post-filter the
    payoff is concave in t; with it the payoff is quasi-convex and the
    returned point is only one of the candidates.
    """
    _check_positive(lam, chi)
    phi, sigma_x = np.broadcast_arrays(np.asarray(phi, dtype=np.float64), np.asarray(sigma_x, dtype=np.float64))
    live = sigma_x > 0
    s = np.where(live, sigma_x ** 2, 1.0)
    t_max = np.where(live, mu_threshold(lam, phi, sigma_x) ** 2, 0.0)
    attack_weight = lam - chi if postfilter else lam
    penalty = 0.0 if postfilter else chi * n * phi ** 2

    def slope(t):
        return s / (s + (n - 1) * t) ** 2 + attack_weight * phi ** 2 * n * s ** 2 / (s + n * t) ** 2 - penalty

    start, end = slope(np.zeros_like(t_max)), slope(t_max)
    t = _bisect(slope, np.zeros_like(t_max), t_max)
    t = np.where(end >= 0, t_max, np.where(start <= 0, 0.0, t))
    alpha = np.where(live, np.sqrt(t), 0.0)
    return float(alpha) if alpha.ndim == 0 else alpha


def boundary_roots(mu: np.ndarray, sigma_x_sq: np.ndarray, n: int) -> List[np.ndarray]:
    """
    Roots of the D2/D3 boundary cubic n a^3 + (1 - n) mu a^2 + sigma_x^2 a - mu sigma_x^2
    on [0, mu], one list entry per monotone piece of the cubic, NaN where a piece
    has none. The cubic is negative at 0 and positive at mu, and
    mu a^2 / ((mu - a)(sigma_x^2 + n a^2)) rises strictly, so exactly one entry is
    finite: D3 lies below it and D2 above.
    """
    mu, sigma_x_sq = np.broadcast_arrays(np.asarray(mu, dtype=np.float64), np.asarray(sigma_x_sq, dtype=np.float64))

    def cubic(a):
        return (a - mu) * (sigma_x_sq + n * a * a) + mu * a * a

    disc = (n - 1) ** 2 * mu ** 2 - 3 * n * sigma_x_sq
    turning = disc > 0
    spread = np.sqrt(np.maximum(disc, 0.0))
    rise_end = np.clip(np.where(turning, ((n - 1) * mu - spread) / (3 * n), mu), 0.0, mu)
    fall_end = np.clip(np.where(turning, ((n - 1) * mu + spread) / (3 * n), mu), rise_end, mu)

    edges = [np.zeros_like(mu), rise_end, fall_end, mu]
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        crossing = (hi > lo) & (cubic(lo) * cubic(hi) <= 0)
        root = _bisect(cubic, lo, hi) if np.any(crossing) else lo
        roots.append(np.where(crossing, root, np.nan))
    return roots


def alpha_postfilter(lam: float, phi: Scalar, sigma_x: Scalar) -> Scalar:
    """
    Closed-form post-filter strength sqrt(lambda) phi sigma_x^2. It sits on the
    erase threshold itself; optimal_alpha refines it to the stationary point just below.
    """
    _check_positive(lam)
    return mu_threshold(lam, phi, sigma_x)


def site_payoff(alpha: Scalar, lam: float, chi: float, phi: Scalar, sigma_x: Scalar, n: int,
                postfilter: bool = False) -> Scalar:
    """
    J_chi = J_lambda(best attack) - chi * embedding distortion, per site.
    Under the post-filter the attacker's gain absorbs g, so J_lambda keeps its
    unfiltered form and only the embedding distortion changes.
    """
    _check_positive(lam, chi)
    gamma, sigma_delta_sq, _ = optimal_attack_params(alpha, sigma_x, phi, lam, n)
    attacker = attack_objective(gamma, sigma_delta_sq, alpha, sigma_x, phi, lam, n)
    payoff = attacker - chi * site_embedding_distortion(alpha, sigma_x, phi, n, postfilter)
    return float(payoff) if np.ndim(payoff) == 0 else payoff


def _strength_candidates(lam: float, chi: float, phi: np.ndarray, sigma_x: np.ndarray, n: int,
                         postfilter: bool, closed_form_only: bool) -> List[np.ndarray]:
    if closed_form_only:
        return [np.zeros_like(sigma_x),
                alpha_erase(lam, phi, sigma_x),
                alpha_intermediate(lam, chi, phi, sigma_x, n),
                alpha_wiener(lam, chi, phi, sigma_x, n)]
    mu = mu_threshold(lam, phi, sigma_x)
    # the payoff is unimodal on every D2 or D3 piece, so each piece's maximum
    # is its stationary point or one of its ends
    candidates = [np.zeros_like(sigma_x),
                  mu,
                  alpha_intermediate(lam, chi, phi, sigma_x, n, postfilter),
                  alpha_wiener_stationary(lam, chi, phi, sigma_x, n, postfilter)]
    if not postfilter:
        candidates.append(alpha_wiener(lam, chi, phi, sigma_x, n))
    candidates += [np.nan_to_num(root, nan=0.0) for root in boundary_roots(mu, sigma_x ** 2, n)]
    return candidates


def optimal_alpha(lam: float, chi: float, phi: Scalar, sigma_x: Scalar, n: int,
                  postfilter: bool = False, closed_form_only: bool = False) -> Tuple[Scalar, Scalar]:
    """
    (alpha*, regime) maximising the site payoff; ties go to the smaller alpha.
    closed_form_only restricts the choice to the closed-form strengths: erase,
    intermediate and the n-approximated Wiener closed form, or sqrt(lambda) phi
    sigma_x^2 outright under the post-filter.
    """
    _check_positive(lam, chi)
    phi, sigma_x = np.broadcast_arrays(np.asarray(phi, dtype=np.float64), np.asarray(sigma_x, dtype=np.float64))
    if postfilter and closed_form_only:
        best = np.asarray(alpha_postfilter(lam, phi, sigma_x), dtype=np.float64)
    else:
        candidates = np.stack(np.broadcast_arrays(
            *_strength_candidates(lam, chi, phi, sigma_x, n, postfilter, closed_form_only)))
        payoffs = np.stack([np.asarray(site_payoff(c, lam, chi, phi, sigma_x, n, postfilter)) for c in candidates])
        top = payoffs.max(axis=0)
        near = (payoffs >= top) | np.isclose(payoffs, top, rtol=TIE_RTOL, atol=0.0)
        best = np.where(near, candidates, np.inf).min(axis=0)
    regime = classify_domains(best, sigma_x, phi, lam, n)
    if best.ndim == 0:
        return float(best), Regime(int(regime))
    return best, regime


def solve_equilibrium(model: SiteModel, n: int, lam: float, chi: float, postfilter: bool = False) -> EquilibriumReport:
    """
    Equilibrium at fixed multipliers. With the post-filter the attacker acts on
    g (x + w); the reported gamma is the gain it applies to that filtered signal.
    """
    alpha, _ = optimal_alpha(lam, chi, model.phi, model.sigma_x, n, postfilter)
    gain = postfilter_gain(model.sigma_x_sq, n * alpha ** 2) if postfilter else np.ones(model.m)
    gamma, sigma_delta_sq, regime = filtered_attack_params(alpha, model.sigma_x, model.phi, lam, n, gain)
    rho = site_rho(gamma, sigma_delta_sq, alpha, model.sigma_x, n, gain)
    return EquilibriumReport(
        regime=regime,
        alpha=alpha,
        gamma=gamma,
        sigma_delta_sq=sigma_delta_sq,
        rho=rho,
        d_xy=math.fsum(site_embedding_distortion(alpha, model.sigma_x, model.phi, n, postfilter)),
        d_xy_prime=math.fsum(site_attack_distortion(gamma, sigma_delta_sq, alpha, model.sigma_x, model.phi, n,
                                                    gain)),
        eb_n0=math.fsum(rho),
        lam=float(lam),
        chi=float(chi),
        n=int(n),
        postfilter=bool(postfilter),
        filter_gain=gain,
    )


def _log_space_search(objective: Callable[[float], float], lo: float, hi: float, max_iter: int) -> float:
    """Minimise objective over [lo, hi] in log space (bounded golden-section / Brent)."""
    if not lo < hi:
        return lo
    result = optimize.minimize_scalar(lambda t: objective(math.exp(t)), bounds=(math.log(lo), math.log(hi)),
                                      method="bounded", options={"xatol": 1e-12, "maxiter": max_iter})
    return math.exp(result.x)


def _closest_range(failures: List[InfeasibleBudgetError]) -> Optional[Tuple[float, float]]:
    """Achievable range of the failure whose target came nearest to being met."""
    def miss(e: InfeasibleBudgetError) -> float:
        low, high = e.achievable
        if e.target is None or e.target == 0:
            return math.inf
        return max(low - e.target, e.target - high, 0.0) / abs(e.target)

    ranged = [e for e in failures if e.achievable is not None]
    return min(ranged, key=miss).achievable if ranged else None


def _locate_edge(is_feasible: Callable[[float], bool], infeasible: float, feasible: float) -> float:
    """Log-space bisection between an infeasible and a feasible x; returns the feasible end."""
    for _ in range(CALIBRATION_MAX_ITER):
        if abs(feasible / infeasible - 1.0) <= EDGE_RTOL:
            break
        mid = math.sqrt(infeasible * feasible)
        if is_feasible(mid):
            feasible = mid
        else:
            infeasible = mid
    return feasible


def _calibrate_decreasing(name: str, evaluate: Callable[[float], Tuple[float, object]], target: float):
    """
    Find x with evaluate(x)[0] ~= target for a non-increasing response.
    x where evaluate raises InfeasibleBudgetError is infeasible. Edges between
    infeasible and feasible scan points are located before the achievable range
    is taken, since the response is usually steepest next to them.
    Returns (x, value, payload); raises InfeasibleBudgetError when unbracketed.
    """
    cache = {}
    failures = []

    def value_at(x: float) -> float:
        if x not in cache:
            try:
                cache[x] = evaluate(x)
            except InfeasibleBudgetError as e:
                failures.append(e)
                cache[x] = (float("nan"), None)
        return cache[x][0]

    grid = [float(x) for x in np.geomspace(SCAN_LOW, SCAN_HIGH, SCAN_POINTS)]
    feasible = [math.isfinite(value_at(x)) for x in grid]
    if not any(feasible):
        closest = _closest_range(failures)
        detail = f"; closest inner range [{closest[0]:.6g}, {closest[1]:.6g}]" if closest else ""
        raise InfeasibleBudgetError(f"{name}: no feasible point on the scan interval{detail}", name, closest, target)

    samples = [x for x, ok in zip(grid, feasible) if ok]
    for k in range(len(grid) - 1):
        if feasible[k] != feasible[k + 1]:
            outside, inside = (grid[k], grid[k + 1]) if feasible[k + 1] else (grid[k + 1], grid[k])
            edge = _locate_edge(lambda x: math.isfinite(value_at(x)), outside, inside)
            logger.debug(f"{name}: feasibility edge at {edge:.9g} (value {cache[edge][0]:.9g})")
            samples.append(edge)

    xs = np.array(sorted(set(samples)))
    vs = np.array([cache[float(x)][0] for x in xs])
    low, high = float(vs.min()), float(vs.max())
    if not low * (1 - BUDGET_RTOL) <= target <= high * (1 + BUDGET_RTOL):
        raise InfeasibleBudgetError(
            f"{name}: target {target:.6g} outside achievable range [{low:.6g}, {high:.6g}]", name, (low, high), target)

    def error(x: float) -> float:
        v = value_at(x)
        return abs(v - target) if math.isfinite(v) else math.inf

    best = float(xs[np.argmin(np.abs(vs - target))])
    if error(best) <= BUDGET_RTOL * target:
        return best, cache[best][0], cache[best][1]

    monotone = np.all(np.diff(vs) <= MONOTONE_SLACK * np.abs(vs[:-1]))
    if monotone:
        above = np.flatnonzero(vs >= target)
        k = int(above[-1]) if above.size else 0
        lo, hi = float(xs[k]), float(xs[min(k + 1, xs.size - 1)])
        for iteration in range(CALIBRATION_MAX_ITER):
            mid = math.sqrt(lo * hi)
            v = value_at(mid)
            logger.debug(f"{name} bisection {iteration}: x={mid:.9g} value={v:.9g} target={target:.9g}")
            if not math.isfinite(v):
                raise InfeasibleBudgetError(f"{name}: infeasible point {mid:.6g} inside the bracket", name,
                                            (low, high), target)
            if error(mid) < error(best):
                best = mid
            if error(best) <= BUDGET_RTOL * target or hi / lo - 1.0 < 1e-15:
                break
            if v > target:
                lo = mid
            else:
                hi = mid
    else:
        logger.warning(f"{name}: sampled response is not monotone, falling back to golden-section search")
        k = int(np.argmin(np.abs(vs - target)))
        lo, hi = float(xs[max(k - 1, 0)]), float(xs[min(k + 1, xs.size - 1)])
        candidate = _log_space_search(error, lo, hi, CALIBRATION_MAX_ITER)
        if error(candidate) < error(best):
            best = candidate

    if error(best) > BUDGET_RTOL * target:
        logger.warning(f"{name}: stopped at relative budget error {error(best) / target:.3g} "
                       f"(response is discontinuous near the target)")
    return best, cache[best][0], cache[best][1]


def calibrate_chi(model: SiteModel, n: int, lam: float, d_xy_max: float,
                  postfilter: bool = False) -> Tuple[float, EquilibriumReport]:
    """Inner loop: chi such that D_xy(equilibrium) = d_xy_max at fixed lambda."""
    def inner(chi: float):
        report = solve_equilibrium(model, n, lam, chi, postfilter)
        return report.d_xy, report

    chi, _, report = _calibrate_decreasing("chi", inner, d_xy_max)
    return chi, report


def distortion_ceiling(model: SiteModel, n: int, lam: float, postfilter: bool = False) -> float:
    """Supremum of D_xy at fixed lambda: alpha* never exceeds mu, and reaches it as chi -> 0."""
    _check_positive(lam)
    mu = mu_threshold(lam, model.phi, model.sigma_x)
    return math.fsum(site_embedding_distortion(mu, model.sigma_x, model.phi, n, postfilter))


def calibrate_embedding(model: SiteModel, n: int, lam: float, d_xy_max: float,
                        postfilter: bool = False) -> Tuple[float, float, EquilibriumReport]:
    """
    (lambda, chi, report) spending d_xy_max with the attacker's multiplier held
    at lam when possible. lambda is doubled until d_xy_max sits below the
    distortion ceiling with headroom; used where no attack budget is given.
    """
    if not d_xy_max > 0:
        raise InvalidParameterError("distortion budget must be > 0")
    raised = float(lam)
    ceiling = distortion_ceiling(model, n, raised, postfilter)
    for _ in range(CALIBRATION_MAX_ITER):
        if ceiling >= CEILING_HEADROOM * d_xy_max:
            break
        raised *= 2.0
        ceiling = distortion_ceiling(model, n, raised, postfilter)
    else:
        raise InfeasibleBudgetError(f"lambda: D_xy={d_xy_max:.6g} above the distortion ceiling {ceiling:.6g}",
                                    "lambda", (0.0, ceiling), d_xy_max)
    if raised != lam:
        logger.info(f"Raised lambda from {lam:.6g} to {raised:.6g}: D_xy ceiling {ceiling:.6g} "
                    f"for a budget of {d_xy_max:.6g}")
    chi, report = calibrate_chi(model, n, raised, d_xy_max, postfilter)
    return raised, chi, report


def calibrate_multipliers(model: SiteModel, n: int, d_xy_max: float, d_xy_prime_max: float,
                          postfilter: bool = False) -> Tuple[float, float, EquilibriumReport]:
    if not d_xy_max > 0 or not d_xy_prime_max > 0:
        raise InvalidParameterError("distortion budgets must be > 0")

    def outer(lam: float):
        chi, report = calibrate_chi(model, n, lam, d_xy_max, postfilter)
        return report.d_xy_prime, (chi, report)

    lam, _, (chi, report) = _calibrate_decreasing("lambda", outer, d_xy_prime_max)
    logger.info(f"Calibrated lambda={lam:.6g} chi={chi:.6g}: D_xy={report.d_xy:.6g} "
                f"D_xy'={report.d_xy_prime:.6g} Eb/N0={report.eb_n0:.6g}")
    return lam, chi, report


def attack_response(alpha: np.ndarray, model: SiteModel, n: int, lam: float) -> EquilibriumReport:
    """Attacker's best response to a fixed (not necessarily optimal) strength vector."""
    _check_positive(lam)
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    gamma, sigma_delta_sq, regime = optimal_attack_params(alpha, model.sigma_x, model.phi, lam, n)
    rho = site_rho(gamma, sigma_delta_sq, alpha, model.sigma_x, n)
    return EquilibriumReport(
        regime=regime, alpha=alpha, gamma=gamma, sigma_delta_sq=sigma_delta_sq, rho=rho,
        d_xy=math.fsum(site_embedding_distortion(alpha, model.sigma_x, model.phi, n)),
        d_xy_prime=math.fsum(site_attack_distortion(gamma, sigma_delta_sq, alpha, model.sigma_x, model.phi, n)),
        eb_n0=math.fsum(rho), lam=float(lam), chi=float("nan"), n=int(n))


def calibrate_attack(alpha: np.ndarray, model: SiteModel, n: int,
                     d_xy_prime_max: float) -> Tuple[float, EquilibriumReport]:
    """lambda such that the best response to a fixed alpha spends d_xy_prime_max."""
    def respond(lam: float):
        report = attack_response(alpha, model, n, lam)
        return report.d_xy_prime, report

    lam, _, report = _calibrate_decreasing("lambda", respond, d_xy_prime_max)
    return lam, report
