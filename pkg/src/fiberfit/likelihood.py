"""Observed log likelihoods with analytic theta-scale gradients and Hessians.

Three likelihoods are provided:

* :func:`ofa_loglik`   - censored mixture for optical-fiber-analyzer data
  (sample from the X population),
* :func:`init_loglik`  - the uncensored mixture used to produce starting
  values (pretends every observed cell is uncut),
* :func:`micro_loglik` - single-component conditional likelihood for
  microscopy data (uncut fibers, X population V), including the
  -n log k_theta normalizer so reported values are absolute.

Every evaluation is pure.  Data sums use math.fsum (exactly rounded), which
makes the results independent of data ordering and makes duplicating a
dataset double the log likelihood, gradient and Hessian exactly.

Gradients and Hessians are assembled from the mixture structure

    f_X = eps f_fines + (1 - eps) f_fibers

and the per-component censored stacks, rather than transcribing each entry
of the expanded formulas; finite-difference agreement is enforced in the
test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .densities import (
    ComponentParams,
    GgdParams,
    LognParams,
    MixtureParams,
    ParamVector,
    _component_stack,
    _n_coords,
    decode,
)
from .geometry import CoreGeometry, _prob_uncut_unchecked
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, QuadratureError, segment_integrals
from .scales import _censored_component_stack, component_tail

__all__ = [
    "Dataset",
    "LikelihoodEvaluation",
    "DataValidationError",
    "EvaluationError",
    "ofa_loglik",
    "init_loglik",
    "micro_loglik",
]

_TINY = 1e-300


class DataValidationError(ValueError):
    """Input data violates the support of the chosen model."""

    def __init__(self, message: str, indices):
        self.indices = list(indices)
        shown = ", ".join(str(i) for i in self.indices[:10])
        more = "..." if len(self.indices) > 10 else ""
        super().__init__(f"{message} (offending indices: {shown}{more})")


class EvaluationError(RuntimeError):
    """A likelihood integral failed to converge."""


@dataclass
class Dataset:
    """Observed lengths (mm) tagged with their population scale.

    scale "X" marks OFA data (every cell in the core, cut or uncut);
    scale "V" marks microscopy data (uncut fibers only).
    """

    values: np.ndarray
    scale: str = "X"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).ravel()
        if arr.size < 1:
            raise ValueError("dataset must contain at least one value")
        if self.scale not in ("X", "V"):
            raise ValueError("scale must be 'X' (OFA) or 'V' (microscopy)")
        bad = np.nonzero(~np.isfinite(arr) | (arr <= 0.0))[0]
        if bad.size:
            raise DataValidationError("lengths must be finite and positive", bad)
        self.values = arr

    @property
    def n(self) -> int:
        return self.values.size

    def validate_support(self, geom: CoreGeometry):
        """Check the strict (0, 2r) support required for fitting."""
        bad = np.nonzero(self.values >= 2.0 * geom.r)[0]
        if bad.size:
            raise DataValidationError(
                f"observed lengths must lie strictly inside (0, 2r) = (0, {2.0 * geom.r:g})",
                bad,
            )


@dataclass
class LikelihoodEvaluation:
    loglik: float
    gradient: np.ndarray | None = None
    hessian: np.ndarray | None = None
    per_point_loglik: np.ndarray | None = None


def _fsum(arr) -> float:
    return math.fsum(np.asarray(arr, dtype=float).tolist())


def _fsum_rows(mat) -> np.ndarray:
    return np.array([_fsum(row) for row in np.atleast_2d(mat)])


def _as_params(theta):
    """Accept a ParamVector or already-decoded parameters."""
    if isinstance(theta, ParamVector):
        return decode(theta)
    if isinstance(theta, (MixtureParams, GgdParams, LognParams)):
        return theta
    raise TypeError(f"cannot interpret {type(theta).__name__} as parameters")


def _stack_height(cn: int, order: int) -> int:
    hp = {3: 6, 2: 3}[cn]
    return 1 + (cn if order >= 1 else 0) + (hp if order >= 2 else 0)


def _stack_fn(p: ComponentParams, order: int):
    """y -> (stack, n) rows: density, then grad rows, then packed Hessian rows."""

    def fn(y):
        f, grad, hess = _component_stack(y, p, order)
        rows = [np.atleast_2d(f)]
        if order >= 1:
            rows.append(np.atleast_2d(grad))
        if order >= 2:
            rows.append(np.atleast_2d(hess))
        return np.concatenate(rows, axis=0)

    return fn


def _pair_index(cn: int):
    pairs = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)) if cn == 3 else ((0, 0), (0, 1), (1, 1))
    return pairs


def _split_stack(stack, cn: int, order: int):
    f = stack[0]
    grad = stack[1 : 1 + cn] if order >= 1 else None
    hess = stack[1 + cn :] if order >= 2 else None
    return f, grad, hess


def _mixture_eval(eps, parts_fines, parts_fibers, cn: int, order: int):
    """Assemble loglik/grad/hess sums from per-point component stacks.

    parts_* are (f, grad, hess_packed) per-point arrays on the relevant
    scale (censored for the full likelihood, plain densities for the
    uncensored initialization problem).
    """
    f_n, d_n, h_n = parts_fines
    f_b, d_b, h_b = parts_fibers
    f = eps * f_n + (1.0 - eps) * f_b
    fc = np.maximum(f, _TINY)
    per_point = np.log(fc)
    loglik = _fsum(per_point)
    if order < 1:
        return loglik, None, None, per_point

    n_par = 1 + 2 * cn
    n_obs = f.shape[-1]
    df = np.zeros((n_par, n_obs))
    de = eps - eps * eps
    df[0] = de * (f_n - f_b)
    df[1 : 1 + cn] = eps * d_n
    df[1 + cn :] = (1.0 - eps) * d_b
    score = df / fc
    grad = _fsum_rows(score)
    if order < 2:
        return loglik, grad, None, per_point

    d2f = np.zeros((n_par, n_par, n_obs))
    d2f[0, 0] = de * (1.0 - 2.0 * eps) * (f_n - f_b)
    for j in range(cn):
        d2f[0, 1 + j] = d2f[1 + j, 0] = de * d_n[j]
        d2f[0, 1 + cn + j] = d2f[1 + cn + j, 0] = -de * d_b[j]
    for row, (i, j) in enumerate(_pair_index(cn)):
        d2f[1 + i, 1 + j] = d2f[1 + j, 1 + i] = eps * h_n[row]
        d2f[1 + cn + i, 1 + cn + j] = d2f[1 + cn + j, 1 + cn + i] = (1.0 - eps) * h_b[row]
    hess = np.empty((n_par, n_par))
    for i in range(n_par):
        for j in range(i, n_par):
            hess[i, j] = hess[j, i] = _fsum(d2f[i, j] / fc - score[i] * score[j])
    return loglik, grad, hess, per_point


def _censored_parts(x, p: ComponentParams, geom, cfg, order, label: str):
    cn = _n_coords(p)
    n_stack = _stack_height(cn, order)
    try:
        stack = _censored_component_stack(x, p, geom, cfg, _stack_fn(p, order), n_stack)
    except QuadratureError as exc:
        raise EvaluationError(
            f"censored-tail integral for the {label} component failed: {exc}"
        ) from exc
    return _split_stack(stack, cn, order)


def _plain_parts(x, p: ComponentParams, order):
    cn = _n_coords(p)
    stack = _stack_fn(p, order)(x)
    return _split_stack(stack, cn, order)


def _zero_parts(n_obs: int, cn: int, order: int):
    hp = {3: 6, 2: 3}[cn]
    return (
        np.zeros(n_obs),
        np.zeros((cn, n_obs)) if order >= 1 else None,
        np.zeros((hp, n_obs)) if order >= 2 else None,
    )


def ofa_loglik(
    theta,
    data: Dataset,
    geom: CoreGeometry,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    order: int = 0,
) -> LikelihoodEvaluation:
    """Censored-mixture log likelihood of OFA data on the X scale.

    ``theta`` is a mixture ParamVector or MixtureParams.  With order >= 1 the
    analytic theta-gradient is attached, with order >= 2 the Hessian as well
    (coordinate order: eps coordinate, fines block, fibers block).
    """
    mix = _as_params(theta)
    if not isinstance(mix, MixtureParams):
        raise TypeError("OFA likelihood requires mixture parameters")
    if data.scale != "X":
        raise ValueError("OFA likelihood requires a dataset on the X scale")
    data.validate_support(geom)
    x = data.values
    cn = _n_coords(mix.fines)
    parts_n = (
        _censored_parts(x, mix.fines, geom, cfg, order, "fines")
        if mix.eps > 0.0
        else _zero_parts(x.size, cn, order)
    )
    parts_b = (
        _censored_parts(x, mix.fibers, geom, cfg, order, "fibers")
        if mix.eps < 1.0
        else _zero_parts(x.size, cn, order)
    )
    loglik, grad, hess, per_point = _mixture_eval(mix.eps, parts_n, parts_b, cn, order)
    return LikelihoodEvaluation(loglik, grad, hess, per_point)


def init_loglik(
    theta,
    data: Dataset,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    order: int = 0,
) -> LikelihoodEvaluation:
    """Uncensored log likelihood used for initialization.

    Treats every observed cell as uncut, so the observed density is the plain
    Y-scale mixture (or single component for microscopy-style input).  No
    geometry is involved and no integrals are required.
    """
    params = _as_params(theta)
    if isinstance(params, MixtureParams):
        cn = _n_coords(params.fines)
        parts_n = (
            _plain_parts(data.values, params.fines, order)
            if params.eps > 0.0
            else _zero_parts(data.n, cn, order)
        )
        parts_b = (
            _plain_parts(data.values, params.fibers, order)
            if params.eps < 1.0
            else _zero_parts(data.n, cn, order)
        )
        loglik, grad, hess, per_point = _mixture_eval(params.eps, parts_n, parts_b, cn, order)
        return LikelihoodEvaluation(loglik, grad, hess, per_point)

    f, d, h = _plain_parts(data.values, params, order)
    return _single_component_eval(f, d, h, params, order)


def _single_component_eval(f, d, h, params, order):
    fc = np.maximum(f, _TINY)
    per_point = np.log(fc)
    loglik = _fsum(per_point)
    grad = hess = None
    if order >= 1:
        score = d / fc
        grad = _fsum_rows(score)
    if order >= 2:
        cn = _n_coords(params)
        hess = np.empty((cn, cn))
        for row, (i, j) in enumerate(_pair_index(cn)):
            hess[i, j] = hess[j, i] = _fsum(h[row] / fc - score[i] * score[j])
    return LikelihoodEvaluation(loglik, grad, hess, per_point)


def micro_loglik(
    theta,
    data: Dataset,
    geom: CoreGeometry,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    order: int = 0,
) -> LikelihoodEvaluation:
    """Conditional log likelihood of microscopy data (uncut fibers).

    Per observation the exact uncut-fiber density is used:

        log f_V(v_i) = log f_Y(v_i) + log p_uc(v_i) - log k_theta,

    with k_theta = int_0^2r f_Y p_uc.  The log p_uc(v_i) term is constant in
    theta (it is often dropped when only the maximizer matters) but is kept
    here so the reported value is the absolute log likelihood.  The
    normalizer and its derivatives share one quadrature pass.
    """
    p = _as_params(theta)
    if isinstance(p, MixtureParams):
        raise TypeError("microscopy likelihood takes a single fiber component")
    if data.scale != "V":
        raise ValueError("microscopy likelihood requires a dataset on the V scale")
    data.validate_support(geom)
    v = data.values
    n = v.size
    cn = _n_coords(p)

    f, d, h = _plain_parts(v, p, order)

    hi = min(2.0 * geom.r, component_tail(p, cfg.tail_cutoff))
    stack_fn = _stack_fn(p, order)

    def integrand(y):
        return stack_fn(y) * _prob_uncut_unchecked(y, geom.r)

    try:
        kint = segment_integrals(integrand, np.linspace(0.0, hi, 17), cfg).sum(axis=1)
    except QuadratureError as exc:
        raise EvaluationError(f"uncut-probability normalizer failed: {exc}") from exc
    k0 = max(float(kint[0]), _TINY)

    fc = np.maximum(f, _TINY)
    log_puc = np.log(np.maximum(_prob_uncut_unchecked(v, geom.r), _TINY))
    per_point = np.log(fc) + log_puc - np.log(k0)
    loglik = _fsum(np.log(fc) + log_puc) - n * np.log(k0)
    grad = hess = None
    if order >= 1:
        kj = kint[1 : 1 + cn]
        score = d / fc
        grad = _fsum_rows(score) - n * kj / k0
    if order >= 2:
        kjk = kint[1 + cn :]
        hess = np.empty((cn, cn))
        for row, (i, j) in enumerate(_pair_index(cn)):
            data_term = _fsum(h[row] / fc - score[i] * score[j])
            norm_term = kjk[row] / k0 - kj[i] * kj[j] / (k0 * k0)
            hess[i, j] = hess[j, i] = data_term - n * norm_term
    return LikelihoodEvaluation(loglik, grad, hess, per_point)
