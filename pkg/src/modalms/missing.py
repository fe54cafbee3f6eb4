"""Propensity models ``p(x) = P(delta = 1 | X = x)`` and estimator weight schemes."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset

CLAMP_FLOOR = 0.05

KNOWN = {
    "known-m1": lambda x: 0.6 + 0.3 * np.cos(np.pi * x),
    "known-m2": lambda x: 0.6 + 0.3 * np.cos(2 * np.pi * x),
    "known-m3": lambda x: 0.7 + 0.3 * np.cos(2 * np.pi * x ** 2),
    "known-m4": lambda x: np.full_like(x, 0.75),
}
KINDS = (*KNOWN, "logistic", "kernel")


class PropensityError(RuntimeError):
    pass


class MisuseError(ValueError):
    pass


class EstimatorKind(str, enum.Enum):
    C = "C"
    S = "S"
    W = "W"
    SI = "SI"
    MI = "MI"

    @classmethod
    def parse(cls, tag: "str | EstimatorKind") -> "EstimatorKind":
        return tag if isinstance(tag, cls) else cls(str(tag).upper())


def silverman_bandwidth(values) -> float:
    """Silverman's rule of thumb ``0.9 min(sd, IQR/1.34) n^(-1/5)``.

    For a multivariate sample the per-column rules are averaged and the
    exponent becomes ``-1/(d+4)``. Returns 0 for a degenerate sample.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    n, d = v.shape
    if n < 2:
        return 0.0
    sd = v.std(axis=0, ddof=1)
    q75, q25 = np.percentile(v, [75, 25], axis=0)
    iqr = (q75 - q25) / 1.34
    spread = np.where(iqr > 0, np.minimum(sd, iqr), sd)
    return float(0.9 * spread.mean() * n ** (-1.0 / (d + 4)))


@dataclass(frozen=True)
class PropensityModel:
    """A fitted or known observation probability.

    ``scale`` multiplies the raw output before clamping; it exists for
    sensitivity checks (inverse weights only matter up to a constant).
    """

    kind: str
    params: np.ndarray = field(default_factory=lambda: np.empty(0))
    clamp_floor: float = CLAMP_FLOOR
    bandwidth: float | None = None
    train_X: np.ndarray | None = field(default=None, repr=False)
    train_delta: np.ndarray | None = field(default=None, repr=False)
    cov: np.ndarray | None = field(default=None, repr=False)
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown propensity kind {self.kind!r}; expected one of {KINDS}")
        if not 0 < self.clamp_floor < 0.5:
            raise ValueError("clamp_floor must lie in (0, 0.5)")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def fitted(self) -> bool:
        if self.kind == "logistic":
            return self.params.size > 0
        if self.kind == "kernel":
            return self.train_X is not None and self.bandwidth is not None
        return True

    def __call__(self, X) -> np.ndarray:
        """Evaluate on an ``(m, d)`` array (or ``(m,)`` when ``d == 1``)."""
        if not self.fitted:
            raise PropensityError(f"{self.kind} propensity model has not been fitted")
        X = np.asarray(X, dtype=float)
        if X.ndim <= 1:
            X = X.reshape(-1, 1)
        if self.kind in KNOWN:
            if X.shape[1] != 1:
                raise ValueError("known missingness models are defined for a scalar covariate")
            raw = KNOWN[self.kind](X[:, 0])
        elif self.kind == "logistic":
            if X.shape[1] != self.params.size - 1:
                raise ValueError("covariate dimension does not match the fitted model")
            raw = 1.0 / (1.0 + np.exp(-(self.params[0] + X @ self.params[1:])))
        else:
            if X.shape[1] != self.train_X.shape[1]:
                raise ValueError("covariate dimension does not match the fitted model")
            diff = X[:, None, :] - self.train_X[None, :, :]
            k = np.exp(-0.5 * np.einsum("mnd,mnd->mn", diff, diff) / self.bandwidth ** 2)
            den = k.sum(axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                raw = np.where(den > 0, (k @ self.train_delta) / den, self.train_delta.mean())
        return np.clip(self.scale * raw, self.clamp_floor, 1.0)


def known_propensity(model: str, clamp_floor: float = CLAMP_FLOOR) -> PropensityModel:
    """``model`` is one of ``M1``..``M4`` (or the ``known-m*`` kind string)."""
    kind = model.lower()
    if not kind.startswith("known-"):
        kind = f"known-{kind}"
    return PropensityModel(kind, clamp_floor=clamp_floor)


def propensity_eval(model: PropensityModel, x) -> float:
    return float(model(np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1))[0])


def _require_both_classes(ds: Dataset):
    delta = ds.delta
    if delta.min() == delta.max():
        raise PropensityError("propensity fit needs both observed and missing responses")


def fit_propensity_logistic(ds: Dataset, clamp_floor: float = CLAMP_FLOOR) -> PropensityModel:
    """Maximum-likelihood logistic regression of ``delta`` on an intercept and ``X``."""
    import statsmodels.api as sm
    from statsmodels.tools.sm_exceptions import PerfectSeparationError, PerfectSeparationWarning

    _require_both_classes(ds)
    design = sm.add_constant(ds.X, has_constant="add")
    with warnings.catch_warnings():
        warnings.simplefilter("error", PerfectSeparationWarning)
        warnings.simplefilter("ignore", RuntimeWarning)
        try:
            res = sm.Logit(ds.delta.astype(float), design).fit(disp=0, method="newton", maxiter=100)
        except (PerfectSeparationError, PerfectSeparationWarning, np.linalg.LinAlgError) as exc:
            raise PropensityError(f"logistic fit failed (separation in delta ~ X): {exc}") from None
    params = np.asarray(res.params, dtype=float)
    if not np.all(np.isfinite(params)) or not res.mle_retvals.get("converged", True):
        raise PropensityError("logistic fit did not converge; delta may be separable in X")
    return PropensityModel("logistic", params=params, clamp_floor=clamp_floor,
                           cov=np.asarray(res.cov_params(), dtype=float))


def fit_propensity_kernel(ds: Dataset, h_p: float | None = None,
                          clamp_floor: float = CLAMP_FLOOR) -> PropensityModel:
    """Nadaraya-Watson regression of ``delta`` on ``X`` with a Gaussian kernel."""
    _require_both_classes(ds)
    if h_p is None:
        h_p = silverman_bandwidth(ds.X)
    if not h_p > 0:
        raise PropensityError("kernel propensity bandwidth must be positive")
    return PropensityModel("kernel", clamp_floor=clamp_floor, bandwidth=float(h_p),
                           train_X=ds.X, train_delta=ds.delta.astype(float))


def fit_propensity(ds: Dataset, kind: str, clamp_floor: float = CLAMP_FLOOR, **kw) -> PropensityModel:
    kind = kind.lower()
    if kind == "logistic":
        return fit_propensity_logistic(ds, clamp_floor)
    if kind == "kernel":
        return fit_propensity_kernel(ds, kw.get("h_p"), clamp_floor)
    return known_propensity(kind, clamp_floor)


def weights_for(kind, ds: Dataset, model: PropensityModel | None = None) -> np.ndarray:
    """Weight vector realising the complete, complete-case or IPW estimator."""
    kind = EstimatorKind.parse(kind)
    delta = ds.delta.astype(float)
    if kind is EstimatorKind.C:
        if not ds.is_complete:
            raise MisuseError("estimator C requires a dataset without missing responses")
        return np.ones(ds.n)
    if kind is EstimatorKind.S:
        return delta
    if kind is EstimatorKind.W:
        if model is None:
            raise MisuseError("estimator W needs a propensity model")
        return delta / model(ds.X)
    raise MisuseError(f"estimator {kind.value} is not a weighting scheme")
