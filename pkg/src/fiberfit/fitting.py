"""Box-constrained quasi-Newton maximum likelihood fitting.

The optimizer works on the unconstrained theta scale (logit for the fines
proportion, log for positive parameters) with user bounds supplied on the
original scale and transformed internally.  Fitting is two-stage: starting
values come from maximizing the uncensored mixture likelihood (cheap, no
integrals), then the censored likelihood is maximized by L-BFGS-B with the
analytic gradient, best of ``n_starts`` jittered restarts.

Fixed parameters are held at their original-scale values and excluded from
the optimization; a proportion fixed at exactly 0 or 1 is supported even
though it has no finite logit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .densities import (
    GGAMMA,
    LOGNORM,
    GgdParams,
    LognParams,
    MixtureParams,
    ParamVector,
)
from .geometry import CoreGeometry
from .likelihood import (
    Dataset,
    EvaluationError,
    LikelihoodEvaluation,
    init_loglik,
    micro_loglik,
    ofa_loglik,
)
from .quadrature import DEFAULT_CONFIG, QuadratureConfig

log = logging.getLogger(__name__)

__all__ = [
    "ModelSpec",
    "FitConfig",
    "FitResult",
    "FitError",
    "initialize",
    "fit",
    "covariance_original_scale",
]

OFA = "ofa"
MICROSCOPY = "microscopy"


class FitError(RuntimeError):
    """All optimization starts failed; carries per-start diagnostics."""

    def __init__(self, message: str, diagnostics):
        self.diagnostics = diagnostics
        super().__init__(message)


@dataclass(frozen=True)
class ModelSpec:
    """Distribution family, data type, and core geometry of one fit."""

    family: str
    data_type: str
    geom: CoreGeometry

    def __post_init__(self):
        if self.family not in (GGAMMA, LOGNORM):
            raise ValueError(f"family must be '{GGAMMA}' or '{LOGNORM}'")
        if self.data_type not in (OFA, MICROSCOPY):
            raise ValueError(f"data_type must be '{OFA}' or '{MICROSCOPY}'")

    @property
    def param_names(self) -> tuple:
        if self.data_type == MICROSCOPY:
            return ("b", "d", "k") if self.family == GGAMMA else ("mu", "sigma")
        if self.family == GGAMMA:
            return ("eps", "b1", "d1", "k1", "b2", "d2", "k2")
        return ("eps", "mu1", "sigma1", "mu2", "sigma2")

    @property
    def transforms(self) -> tuple:
        """Per-coordinate transform kind: 'logit', 'log' or 'id'."""
        if self.data_type == MICROSCOPY:
            return ("log",) * 3 if self.family == GGAMMA else ("id", "log")
        if self.family == GGAMMA:
            return ("logit",) + ("log",) * 6
        return ("logit", "id", "log", "id", "log")

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def default_bounds(self):
        lo, hi = [], []
        for kind, name in zip(self.transforms, self.param_names):
            if kind == "logit":
                lo.append(1e-4), hi.append(1.0 - 1e-4)
            elif kind == "id":
                lo.append(-10.0), hi.append(10.0)
            elif name.startswith("sigma"):
                lo.append(1e-3), hi.append(10.0)
            else:
                lo.append(1e-4), hi.append(50.0)
        return np.array(lo), np.array(hi)

    def to_theta(self, original) -> np.ndarray:
        original = np.asarray(original, dtype=float)
        out = np.empty_like(original)
        for i, kind in enumerate(self.transforms):
            if kind == "logit":
                # boundary proportions map to -inf/+inf; only valid when fixed
                with np.errstate(divide="ignore"):
                    out[i] = np.log(original[i]) - np.log1p(-original[i])
            elif kind == "log":
                out[i] = np.log(original[i])
            else:
                out[i] = original[i]
        return out

    def from_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        out = np.empty_like(theta)
        for i, kind in enumerate(self.transforms):
            if kind == "logit":
                out[i] = _expit(theta[i])
            elif kind == "log":
                out[i] = np.exp(theta[i])
            else:
                out[i] = theta[i]
        return out

    def chain_vector(self, theta) -> np.ndarray:
        """d(original)/d(theta) per coordinate, the delta-method diagonal."""
        theta = np.asarray(theta, dtype=float)
        out = np.empty_like(theta)
        for i, kind in enumerate(self.transforms):
            if kind == "logit":
                e = _expit(theta[i])
                out[i] = e - e * e
            elif kind == "log":
                out[i] = np.exp(theta[i])
            else:
                out[i] = 1.0
        return out

    def params_from_original(self, original):
        v = np.asarray(original, dtype=float)
        if self.data_type == MICROSCOPY:
            return GgdParams(*v) if self.family == GGAMMA else LognParams(*v)
        if self.family == GGAMMA:
            return MixtureParams(v[0], GgdParams(*v[1:4]), GgdParams(*v[4:7]))
        return MixtureParams(v[0], LognParams(*v[1:3]), LognParams(*v[3:5]))

    def param_vector(self, theta, fixed_mask=None) -> ParamVector:
        return ParamVector(self.family, tuple(np.asarray(theta, dtype=float)), fixed_mask)


def _expit(x):
    ax = np.abs(np.asarray(x, dtype=float))
    e = np.exp(-ax)
    out = np.where(np.asarray(x) >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out) if np.ndim(x) == 0 else out


@dataclass(frozen=True)
class FitConfig:
    """Options for :func:`fit`; bounds and starting values on the original scale."""

    lower: tuple | None = None
    upper: tuple | None = None
    par_start: tuple | None = None
    fixed_mask: tuple | None = None
    n_starts: int = 5
    grad_mode: str = "analytic"
    max_iter: int = 500
    grad_tol: float = 1e-7
    seed: int = 0
    quad: QuadratureConfig = DEFAULT_CONFIG

    def __post_init__(self):
        if self.grad_mode not in ("analytic", "finite_difference"):
            raise ValueError("grad_mode must be 'analytic' or 'finite_difference'")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if self.fixed_mask is not None and any(self.fixed_mask):
            if self.par_start is None:
                raise ValueError("fixed parameters require par_start entries")


@dataclass
class StartRecord:
    index: int
    theta0: np.ndarray
    loglik: float
    status: str
    n_iter: int
    message: str


@dataclass
class FitResult:
    """Estimates on both scales with covariances and optimizer diagnostics."""

    model: ModelSpec
    theta_hat: ParamVector
    theta_tilde: np.ndarray
    loglik: float
    cov_theta: np.ndarray | None
    cov_tilde: np.ndarray | None
    se_tilde: np.ndarray | None
    convergence: str
    n: int
    starts_tried: int
    trace: list = field(default_factory=list)
    se_flagged: bool = False

    @property
    def param_names(self) -> tuple:
        return self.model.param_names


def _prepare_masks(model: ModelSpec, cfg: FitConfig):
    n = model.n_params
    fixed = np.zeros(n, dtype=bool)
    if cfg.fixed_mask is not None:
        fixed = np.asarray(cfg.fixed_mask, dtype=bool)
        if fixed.size != n:
            raise ValueError(f"fixed_mask must have {n} entries")
    start = None
    if cfg.par_start is not None:
        start = np.asarray(cfg.par_start, dtype=float)
        if start.size != n:
            raise ValueError(f"par_start must have {n} entries")
    return fixed, start


def _bounds_theta(model: ModelSpec, cfg: FitConfig):
    lo, hi = model.default_bounds()
    if cfg.lower is not None:
        lo = np.asarray(cfg.lower, dtype=float)
    if cfg.upper is not None:
        hi = np.asarray(cfg.upper, dtype=float)
    if lo.size != model.n_params or hi.size != model.n_params:
        raise ValueError(f"bounds must have {model.n_params} entries")
    if np.any(lo >= hi):
        raise ValueError("lower bounds must be strictly below upper bounds")
    return model.to_theta(lo), model.to_theta(hi)


def _loglik_fn(model: ModelSpec, data: Dataset, cfg: FitConfig):
    if model.data_type == OFA:
        return lambda params, order: ofa_loglik(params, data, model.geom, cfg.quad, order)
    return lambda params, order: micro_loglik(params, data, model.geom, cfg.quad, order)


def initialize(data: Dataset, model: ModelSpec, cfg: FitConfig = FitConfig()) -> ParamVector:
    """Starting values for the censored fit.

    A user-supplied ``par_start`` is encoded and returned as-is.  Otherwise
    the uncensored mixture likelihood is maximized: the generalized-gamma
    mixture starts from the fixed default (eps, b1, d1, k1, b2, d2, k2) =
    (0.5, 0.01, 0.1, 10, 2, 2, 2) on the transformed scale; the lognormal
    mixture seeds itself by splitting the log-lengths at their 20th
    percentile; microscopy components start from moment matching.  If the
    initialization optimizer fails the seed itself is returned with a warning.
    """
    fixed, start = _prepare_masks(model, cfg)
    if start is not None:
        return model.param_vector(model.to_theta(start), tuple(fixed))

    x = data.values
    if model.data_type == MICROSCOPY:
        logs = np.log(x)
        if model.family == LOGNORM:
            # closed-form uncensored MLE
            theta0 = np.array([logs.mean(), np.log(max(logs.std(), 1e-3))])
        else:
            d0, k0 = 2.0, 2.0
            b0 = float(x.mean()) / GgdParams(1.0, d0, k0).mean()
            theta0 = model.to_theta([b0, d0, k0])
    elif model.family == GGAMMA:
        theta0 = np.array([0.0, np.log(0.01), np.log(0.1), np.log(10.0), np.log(2.0), np.log(2.0), np.log(2.0)])
    else:
        logs = np.sort(np.log(x))
        split = logs[max(1, int(0.2 * logs.size)) - 1]
        low, high = logs[logs <= split], logs[logs > split]
        if high.size == 0:  # degenerate tiny samples
            high = low + 1.0
        theta0 = np.array(
            [
                _logit_clipped(low.size / logs.size),
                low.mean(),
                np.log(max(low.std(), 1e-3)),
                high.mean(),
                np.log(max(high.std(), 1e-3)),
            ]
        )

    lo_t, hi_t = _bounds_theta(model, cfg)
    theta0 = np.clip(theta0, lo_t, hi_t)
    free = ~fixed

    def objective(tf):
        theta = theta0.copy()
        theta[free] = tf
        params = model.params_from_original(model.from_theta(theta))
        ev = init_loglik(params, data, cfg.quad, order=1)
        return -ev.loglik, -ev.gradient[free]

    try:
        res = minimize(
            objective,
            theta0[free],
            jac=True,
            method="L-BFGS-B",
            bounds=list(zip(lo_t[free], hi_t[free])),
            options={"maxiter": cfg.max_iter, "gtol": cfg.grad_tol},
        )
        theta = theta0.copy()
        theta[free] = res.x
    except (EvaluationError, FloatingPointError) as exc:
        log.warning("initialization optimizer failed (%s); falling back to the default seed", exc)
        theta = theta0
    return model.param_vector(theta, tuple(fixed))


def _logit_clipped(p: float) -> float:
    p = min(max(p, 1e-6), 1.0 - 1e-6)
    return float(np.log(p / (1.0 - p)))


_STATUS = {0: "success", 1: "max_iter", 2: "line_search_failure"}


def fit(data: Dataset, model: ModelSpec, cfg: FitConfig = FitConfig()) -> FitResult:
    """Maximize the model's observed log likelihood; best of ``n_starts``.

    The first start is the :func:`initialize` output; the remaining starts
    add seeded N(0, 0.5) jitter on the theta scale, clipped into the box.
    Ties in log likelihood resolve to the earliest start.  The covariance of
    theta-hat is the inverse negative analytic Hessian at the maximizer, and
    the original-scale covariance follows by the delta method.
    """
    expected_scale = "X" if model.data_type == OFA else "V"
    if data.scale != expected_scale:
        raise ValueError(
            f"{model.data_type} fits need a dataset on the {expected_scale} scale, got {data.scale}"
        )
    data.validate_support(model.geom)

    fixed, _ = _prepare_masks(model, cfg)
    lo_t, hi_t = _bounds_theta(model, cfg)
    theta_init = np.array(initialize(data, model, cfg).values)
    free = ~fixed
    loglik_of = _loglik_fn(model, data, cfg)

    def assemble(tf):
        theta = theta_init.copy()
        theta[free] = tf
        return theta

    def params_of(theta):
        return model.params_from_original(model.from_theta(theta))

    analytic = cfg.grad_mode == "analytic"

    def objective(tf):
        ev = loglik_of(params_of(assemble(tf)), 1 if analytic else 0)
        if analytic:
            return -ev.loglik, -np.asarray(ev.gradient)[free]
        return -ev.loglik

    if not np.any(free):
        ev = loglik_of(params_of(theta_init), 2)
        return _finalize(model, data, cfg, theta_init, fixed, ev, "success", [], 0)

    rng = np.random.default_rng(cfg.seed)
    starts = [np.clip(theta_init[free], lo_t[free], hi_t[free])]
    for _ in range(cfg.n_starts - 1):
        jitter = rng.normal(0.0, 0.5, size=int(free.sum()))
        starts.append(np.clip(theta_init[free] + jitter, lo_t[free], hi_t[free]))

    trace, results = [], []
    bounds = list(zip(lo_t[free], hi_t[free]))
    for idx, t0 in enumerate(starts):
        try:
            res = minimize(
                objective,
                t0,
                jac=True if analytic else None,
                method="L-BFGS-B",
                bounds=bounds,
                options={"maxiter": cfg.max_iter, "gtol": cfg.grad_tol},
            )
            status = _STATUS.get(res.status, "line_search_failure")
            trace.append(StartRecord(idx, assemble(t0), -res.fun, status, res.nit, str(res.message)))
            results.append((idx, res, status))
        except (EvaluationError, FloatingPointError, np.linalg.LinAlgError) as exc:
            trace.append(StartRecord(idx, assemble(t0), -np.inf, "error", 0, str(exc)))
    if not results:
        raise FitError("all optimization starts failed", trace)

    best_idx, best_res, best_status = min(results, key=lambda t: (t[1].fun, t[0]))
    theta_hat = assemble(best_res.x)
    ev = loglik_of(params_of(theta_hat), 2)
    return _finalize(model, data, cfg, theta_hat, fixed, ev, best_status, trace, len(starts))


def _finalize(model, data, cfg, theta_hat, fixed, ev: LikelihoodEvaluation, status, trace, starts_tried):
    free = ~fixed
    n_par = model.n_params
    cov_theta = cov_tilde = se_tilde = None
    flagged = False
    convergence = status
    hess_free = np.asarray(ev.hessian)[np.ix_(free, free)] if np.any(free) else np.zeros((0, 0))
    if np.any(free):
        try:
            cov_free = np.linalg.inv(-hess_free)
            cov_free = 0.5 * (cov_free + cov_free.T)
            if not np.all(np.isfinite(cov_free)) or np.any(np.diag(cov_free) <= 0.0):
                raise np.linalg.LinAlgError("non-positive variance")
            cov_theta = np.zeros((n_par, n_par))
            cov_theta[np.ix_(free, free)] = cov_free
        except np.linalg.LinAlgError:
            convergence = "singular_hessian"
    else:
        cov_theta = np.zeros((n_par, n_par))

    if cov_theta is not None and convergence != "singular_hessian":
        chain = model.chain_vector(theta_hat)
        chain[fixed & ~np.isfinite(chain)] = 0.0
        cov_tilde = chain[:, None] * cov_theta * chain[None, :]
        eig = np.linalg.eigvalsh(0.5 * (cov_tilde + cov_tilde.T))
        if eig.size and eig.min() < -1e-10 * max(eig.max(), 1.0):
            flagged = True
            se_tilde = None
        else:
            se_tilde = np.sqrt(np.clip(np.diag(cov_tilde), 0.0, None))

    return FitResult(
        model=model,
        theta_hat=model.param_vector(theta_hat, tuple(fixed)),
        theta_tilde=model.from_theta(theta_hat),
        loglik=ev.loglik,
        cov_theta=cov_theta,
        cov_tilde=cov_tilde,
        se_tilde=se_tilde,
        convergence=convergence,
        n=data.n,
        starts_tried=starts_tried,
        trace=trace,
        se_flagged=flagged,
    )


def covariance_original_scale(result: FitResult) -> np.ndarray:
    """Delta-method covariance diag(chain) Var(theta-hat) diag(chain).

    The chain vector is (eps - eps^2) for the proportion, the parameter value
    itself for log-transformed coordinates, and 1 for lognormal means.
    """
    if result.cov_theta is None or result.convergence == "singular_hessian":
        raise ValueError("no covariance available: fit did not produce a usable Hessian")
    theta = np.array(result.theta_hat.values)
    chain = result.model.chain_vector(theta)
    fixed = np.array(result.theta_hat.fixed_mask)
    chain[fixed & ~np.isfinite(chain)] = 0.0
    cov = chain[:, None] * result.cov_theta * chain[None, :]
    sym = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(sym)
    if eig.size and eig.min() < -1e-10 * max(eig.max(), 1.0):
        raise ValueError("original-scale covariance is not positive semidefinite")
    return sym
