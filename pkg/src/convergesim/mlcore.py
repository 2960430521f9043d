"""Streaming learning primitives: a running standardizer, three
incremental regressors, and the coefficient of determination.

Samples arrive one at a time as {feature_name: value} dicts. A model
fixes its feature set on the first learn call; later calls must use the
same keys. Weight updates:

  linear_sgd           e = yhat - y;  w -= lr * e * x;  b -= lr * e
  bayesian             A += beta * x x^T;  c += beta * y * x
                       (A starts at alpha * I; weights on demand solve
                       A w = c, so after any stream the weights equal the
                       batch ridge solution with lambda = alpha / beta)
  passive_aggressive   PA-I: l = max(0, |yhat - y| - eps);
                       tau = min(C, l / (x.x));  w += sign(y - yhat) tau x;
                       the intercept moves by sign(y - yhat) tau

Defaults (lr=0.01, alpha=beta=1, C=1, eps=0.1) follow the documented
defaults of the streaming-ML ecosystem these mirror. The plain
(unclipped) passive-aggressive update is available via C = inf.

Bayesian weights are obtained by solving A w = c per prediction rather
than maintaining an explicit inverse; feature counts here are tiny.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

MODEL_FORMAT = "convergesim-model-v1"


class DimensionMismatchError(Exception):
    pass


def _as_vector(x: dict, names: tuple[str, ...]) -> np.ndarray:
    if set(x) != set(names):
        raise DimensionMismatchError(
            f"features {sorted(x)} do not match model features {sorted(names)}"
        )
    return np.array([float(x[name]) for name in names], dtype=float)


def _check_finite(x: dict):
    for name, value in x.items():
        if not math.isfinite(float(value)):
            raise ValueError(f"non-finite value for feature {name!r}")


@dataclass
class _FeatureStat:
    n: int = 0
    mean: float = 0.0
    m2: float = 0.0  # sum of squared deviations

    @property
    def variance(self) -> float:
        # population variance, the single-pass streaming convention
        return self.m2 / self.n if self.n >= 1 else 0.0


class RunningScaler:
    """Single-pass standardizer: zero mean, unit (population) variance.

    Uses the numerically stable one-pass recurrence
    delta = x - mean; mean += delta / n; m2 += delta * (x - mean).
    Zero-variance features transform to 0.
    """

    def __init__(self):
        self._stats: dict[str, _FeatureStat] = {}

    @property
    def count(self) -> int:
        return max((s.n for s in self._stats.values()), default=0)

    def learn_transform(self, x: dict) -> dict:
        """Update the running statistics with x, then return the scaled x."""
        _check_finite(x)
        for name, value in x.items():
            stat = self._stats.setdefault(name, _FeatureStat())
            stat.n += 1
            delta = float(value) - stat.mean
            stat.mean += delta / stat.n
            stat.m2 += delta * (float(value) - stat.mean)
        return self.transform(x)

    def transform(self, x: dict) -> dict:
        """Scale x with the current statistics, without learning from it."""
        _check_finite(x)
        out = {}
        for name, value in x.items():
            stat = self._stats.get(name, _FeatureStat())
            std = math.sqrt(stat.variance)
            out[name] = (float(value) - stat.mean) / std if std > 0.0 else 0.0
        return out

    def mean(self, name: str) -> float:
        return self._stats[name].mean

    def variance(self, name: str) -> float:
        return self._stats[name].variance

    def to_state(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": "running_scaler",
            "stats": {
                name: {"n": s.n, "mean": s.mean, "m2": s.m2}
                for name, s in sorted(self._stats.items())
            },
        }

    @classmethod
    def from_state(cls, state: dict) -> "RunningScaler":
        _check_format(state, "running_scaler")
        scaler = cls()
        for name, s in state["stats"].items():
            scaler._stats[name] = _FeatureStat(n=int(s["n"]), mean=float(s["mean"]),
                                               m2=float(s["m2"]))
        return scaler


class _RegressorBase:
    variant = "base"

    def __init__(self):
        self.feature_names: tuple[str, ...] | None = None
        self.samples_seen = 0

    @property
    def cold(self) -> bool:
        return self.samples_seen == 0

    def _vector(self, x: dict) -> np.ndarray:
        if self.feature_names is None:
            raise DimensionMismatchError("model has no fixed dimension yet")
        return _as_vector(x, self.feature_names)

    def _fix_dimension(self, x: dict):
        if self.feature_names is None:
            self.feature_names = tuple(sorted(x))
            self._init_arrays(len(self.feature_names))

    def _init_arrays(self, dim: int):
        raise NotImplementedError

    def learn(self, x: dict, y: float) -> None:
        _check_finite(x)
        self._fix_dimension(x)
        self._update(self._vector(x), float(y))
        self.samples_seen += 1

    def predict(self, x: dict) -> float:
        """Point prediction; an untrained model answers 0 (see `cold`)."""
        if self.cold:
            return 0.0
        return float(self._predict_vec(self._vector(x)))


class LinearSGD(_RegressorBase):
    """Least-squares linear regression trained by per-sample gradient steps."""

    variant = "linear_sgd"

    def __init__(self, learning_rate: float = 0.01):
        super().__init__()
        self.learning_rate = learning_rate
        self.w: np.ndarray | None = None
        self.b = 0.0

    def _init_arrays(self, dim: int):
        self.w = np.zeros(dim)

    def _update(self, x: np.ndarray, y: float):
        error = float(self.w @ x + self.b) - y
        self.w -= self.learning_rate * error * x
        self.b -= self.learning_rate * error

    def _predict_vec(self, x: np.ndarray) -> float:
        return self.w @ x + self.b

    def to_state(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.variant,
            "learning_rate": self.learning_rate,
            "features": list(self.feature_names or ()),
            "samples_seen": self.samples_seen,
            "w": list(map(float, self.w)) if self.w is not None else None,
            "b": self.b,
        }

    @classmethod
    def from_state(cls, state: dict) -> "LinearSGD":
        _check_format(state, "linear_sgd")
        model = cls(learning_rate=float(state["learning_rate"]))
        _restore_base(model, state)
        if state["w"] is not None:
            model.w = np.array(state["w"], dtype=float)
        model.b = float(state["b"])
        return model


class BayesianLinear(_RegressorBase):
    """Bayesian linear regression via the precision matrix A and moment c.

    A and c are plain sums over samples, so the posterior mean is
    independent of arrival order (up to float addition rounding).
    """

    variant = "bayesian"

    def __init__(self, alpha: float = 1.0, beta: float = 1.0):
        super().__init__()
        if alpha <= 0 or beta <= 0:
            raise ValueError("alpha and beta must be positive")
        self.alpha = alpha
        self.beta = beta
        self.A: np.ndarray | None = None
        self.c: np.ndarray | None = None

    def _init_arrays(self, dim: int):
        self.A = self.alpha * np.eye(dim)
        self.c = np.zeros(dim)

    def _update(self, x: np.ndarray, y: float):
        self.A += self.beta * np.outer(x, x)
        self.c += self.beta * y * x

    def weights(self) -> np.ndarray:
        return np.linalg.solve(self.A, self.c)

    def _predict_vec(self, x: np.ndarray) -> float:
        return self.weights() @ x

    def to_state(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.variant,
            "alpha": self.alpha,
            "beta": self.beta,
            "features": list(self.feature_names or ()),
            "samples_seen": self.samples_seen,
            "A": [list(map(float, row)) for row in self.A] if self.A is not None else None,
            "c": list(map(float, self.c)) if self.c is not None else None,
        }

    @classmethod
    def from_state(cls, state: dict) -> "BayesianLinear":
        _check_format(state, "bayesian")
        model = cls(alpha=float(state["alpha"]), beta=float(state["beta"]))
        _restore_base(model, state)
        if state["A"] is not None:
            model.A = np.array(state["A"], dtype=float)
            model.c = np.array(state["c"], dtype=float)
        return model


class PassiveAggressive(_RegressorBase):
    """PA-I regression: updates only outside the epsilon-insensitive band,
    with step size clipped at the aggressiveness parameter C."""

    variant = "passive_aggressive"

    def __init__(self, C: float = 1.0, epsilon: float = 0.1):
        super().__init__()
        self.C = C
        self.epsilon = epsilon
        self.w: np.ndarray | None = None
        self.b = 0.0

    def _init_arrays(self, dim: int):
        self.w = np.zeros(dim)

    def _update(self, x: np.ndarray, y: float):
        y_hat = float(self.w @ x + self.b)
        loss = abs(y_hat - y) - self.epsilon
        if loss <= 0.0:
            return  # inside the insensitive band: state untouched
        norm_sq = float(x @ x)
        if norm_sq == 0.0:
            return
        tau = min(self.C, loss / norm_sq)
        step = math.copysign(tau, y - y_hat)
        self.w += step * x
        self.b += step

    def _predict_vec(self, x: np.ndarray) -> float:
        return self.w @ x + self.b

    def to_state(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "kind": self.variant,
            "C": self.C,
            "epsilon": self.epsilon,
            "features": list(self.feature_names or ()),
            "samples_seen": self.samples_seen,
            "w": list(map(float, self.w)) if self.w is not None else None,
            "b": self.b,
        }

    @classmethod
    def from_state(cls, state: dict) -> "PassiveAggressive":
        _check_format(state, "passive_aggressive")
        model = cls(C=float(state["C"]), epsilon=float(state["epsilon"]))
        _restore_base(model, state)
        if state["w"] is not None:
            model.w = np.array(state["w"], dtype=float)
        model.b = float(state["b"])
        return model


MODEL_VARIANTS = {
    LinearSGD.variant: LinearSGD,
    BayesianLinear.variant: BayesianLinear,
    PassiveAggressive.variant: PassiveAggressive,
}


def make_model(variant: str, **kwargs):
    if variant not in MODEL_VARIANTS:
        raise ValueError(f"unknown model variant {variant!r}")
    return MODEL_VARIANTS[variant](**kwargs)


def _check_format(state: dict, kind: str):
    if state.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported state format {state.get('format')!r}")
    if state.get("kind") != kind:
        raise ValueError(f"state kind {state.get('kind')!r} does not match {kind!r}")


def _restore_base(model: _RegressorBase, state: dict):
    features = state.get("features") or []
    model.feature_names = tuple(features) if features else None
    model.samples_seen = int(state["samples_seen"])


def model_to_json(model) -> str:
    """Serialize model state as decimal text (shortest round-trip floats)."""
    return json.dumps(model.to_state(), sort_keys=True)


def model_from_json(text: str):
    state = json.loads(text)
    kind = state.get("kind")
    if kind == "running_scaler":
        return RunningScaler.from_state(state)
    if kind not in MODEL_VARIANTS:
        raise ValueError(f"unknown model kind {kind!r}")
    return MODEL_VARIANTS[kind].from_state(state)


def r_squared(pairs: list[tuple[float, float]]) -> float | None:
    """1 - SS_res/SS_tot over (y_true, y_pred) pairs; None when SS_tot is 0."""
    if len(pairs) < 2:
        raise ValueError("r_squared needs at least 2 pairs")
    y_true = np.array([p[0] for p in pairs], dtype=float)
    y_pred = np.array([p[1] for p in pairs], dtype=float)
    ss_tot = float(np.sum((y_true - y_true.mean()) ** 2))
    if ss_tot == 0.0:
        return None
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    return 1.0 - ss_res / ss_tot
