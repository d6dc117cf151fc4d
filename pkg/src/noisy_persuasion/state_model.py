"""State spaces, instances, beliefs and classifier confusion models.

States are pairs ``theta = (m, v)`` of a misinformation feature ``m`` and a
popularity/validation feature ``v``.  They are flattened m-major, so that
``theta = m * v_count + v``; with two values each the order is
``[(0,0), (0,1), (1,0), (1,1)]``.

Confusion matrices are column-stochastic: entry ``[pred, true]`` is
``P(pred | true)``.  The joint matrix over flattened states is the Kronecker
product of the two per-feature matrices.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AssumptionWarning,
    DimensionError,
    IllConditioned,
    IllConditionedWarning,
    ParseError,
    SingularConfusion,
    ValidationError,
)

SHARE = 1
NOT_SHARE = 0
ACTIONS = (NOT_SHARE, SHARE)

PRIOR_RENORMALIZE_TOL = 1e-6
COLUMN_SUM_TOL = 1e-10
CONDITION_LIMIT = 1e8
# smallest/largest singular value below this is treated as exactly singular
SINGULAR_RTOL = 1e-13


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class StateSpace:
    m_count: int
    v_count: int

    def __post_init__(self) -> None:
        for name in ("m_count", "v_count"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValidationError(f"{name} must be a positive integer, got {value!r}")

    @property
    def theta_count(self) -> int:
        return self.m_count * self.v_count

    def flatten(self, m: int, v: int) -> int:
        if not (0 <= m < self.m_count and 0 <= v < self.v_count):
            raise DimensionError(f"state ({m}, {v}) outside {self.m_count}x{self.v_count} space")
        return m * self.v_count + v

    def unflatten(self, theta: int) -> tuple[int, int]:
        if not 0 <= theta < self.theta_count:
            raise DimensionError(f"flat index {theta} outside [0, {self.theta_count})")
        return divmod(theta, self.v_count)

    @property
    def v_of_theta(self) -> NDArray[np.int_]:
        """The ``v`` component of every flat state index."""
        return np.tile(np.arange(self.v_count), self.m_count)

    @property
    def m_of_theta(self) -> NDArray[np.int_]:
        return np.repeat(np.arange(self.m_count), self.v_count)


def _check_probability_vector(p: NDArray[np.float64], name: str, renormalize_tol: float) -> NDArray[np.float64]:
    if p.ndim != 1:
        raise DimensionError(f"{name} must be a vector")
    if not np.all(np.isfinite(p)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(p < 0):
        raise ValidationError(f"{name} has negative probabilities")
    total = p.sum()
    if abs(total - 1.0) > renormalize_tol:
        raise ValidationError(f"{name} sums to {total:.12g}, expected 1")
    return p / total


@dataclass(frozen=True, eq=False)
class Instance:
    """Prior, platform utility ``u[theta, a]`` and user utility ``w[v, a]``."""

    space: StateSpace
    prior: NDArray[np.float64]
    platform_utility: NDArray[np.float64]
    user_utility: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = self.space.theta_count
        prior = np.asarray(self.prior, dtype=float)
        if prior.shape != (n,):
            raise DimensionError(f"prior has shape {prior.shape}, expected ({n},)")
        prior = _check_probability_vector(prior, "prior", PRIOR_RENORMALIZE_TOL)
        u = np.asarray(self.platform_utility, dtype=float)
        w = np.asarray(self.user_utility, dtype=float)
        if u.shape != (n, 2):
            raise DimensionError(f"platform_utility has shape {u.shape}, expected ({n}, 2)")
        if w.shape != (self.space.v_count, 2):
            raise DimensionError(
                f"user_utility has shape {w.shape}, expected ({self.space.v_count}, 2)"
            )
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
            raise ValidationError("utilities must be finite")
        object.__setattr__(self, "prior", _frozen(prior))
        object.__setattr__(self, "platform_utility", _frozen(u))
        object.__setattr__(self, "user_utility", _frozen(w))

    @property
    def theta_count(self) -> int:
        return self.space.theta_count

    @property
    def user_utility_by_theta(self) -> NDArray[np.float64]:
        """``w`` lifted to the joint state space, shape ``(theta_count, 2)``."""
        return self.user_utility[self.space.v_of_theta]

    @property
    def platform_gain(self) -> NDArray[np.float64]:
        """``u(1, theta) - u(0, theta)``."""
        return self.platform_utility[:, SHARE] - self.platform_utility[:, NOT_SHARE]

    @property
    def user_gain(self) -> NDArray[np.float64]:
        """``w(1, v) - w(0, v)`` per flat state."""
        wt = self.user_utility_by_theta
        return wt[:, SHARE] - wt[:, NOT_SHARE]

    @property
    def utility_range(self) -> float:
        return float(self.platform_utility.max() - self.platform_utility.min())

    def with_prior(self, prior: ArrayLike) -> Instance:
        return Instance(self.space, np.asarray(prior, dtype=float), self.platform_utility, self.user_utility)

    def with_platform_utility(self, platform_utility: ArrayLike) -> Instance:
        return Instance(self.space, self.prior, np.asarray(platform_utility, dtype=float), self.user_utility)

    def alignment_violations(self) -> list[int]:
        """Actions for which no state has both parties (weakly) preferring it.

        The solver does not need the alignment assumption, so callers only
        warn about it.
        """
        u = self.platform_utility
        wt = self.user_utility_by_theta
        missing = []
        for a in ACTIONS:
            other = 1 - a
            both = (u[:, a] >= u[:, other]) & (wt[:, a] >= wt[:, other])
            if not both.any():
                missing.append(a)
        return missing


def kronecker_confusion(q_m: ArrayLike, q_v: ArrayLike) -> NDArray[np.float64]:
    """Joint confusion matrix over flat states, ``Q_M kron Q_V``."""
    q_m = np.asarray(q_m, dtype=float)
    q_v = np.asarray(q_v, dtype=float)
    for name, q in (("q_m", q_m), ("q_v", q_v)):
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise DimensionError(f"{name} must be square, got shape {q.shape}")
    return np.kron(q_m, q_v)


def invert_confusion(q_theta: ArrayLike, strict: bool = False) -> tuple[NDArray[np.float64], float]:
    """Invert a confusion matrix and return ``(inverse, inf-norm condition)``.

    Raises :class:`SingularConfusion` for numerically singular input.  A
    condition estimate above ``1e8`` warns, or raises :class:`IllConditioned`
    when ``strict`` is set.
    """
    q = np.asarray(q_theta, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionError(f"confusion matrix must be square, got shape {q.shape}")
    sv = np.linalg.svd(q, compute_uv=False)
    if sv[0] == 0 or sv[-1] / sv[0] < SINGULAR_RTOL:
        raise SingularConfusion("confusion matrix is singular")
    try:
        v = np.linalg.inv(q)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded by the SVD test
        raise SingularConfusion(str(exc)) from exc
    cond = float(np.linalg.norm(q, np.inf) * np.linalg.norm(v, np.inf))
    if cond > CONDITION_LIMIT:
        msg = f"confusion matrix condition estimate {cond:.3g} exceeds {CONDITION_LIMIT:.0e}"
        if strict:
            raise IllConditioned(msg)
        warnings.warn(msg, IllConditionedWarning, stacklevel=2)
    return v, cond


def _check_column_stochastic(q: NDArray[np.float64], name: str, tol: float) -> NDArray[np.float64]:
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(q < 0):
        raise ValidationError(f"{name} has negative entries")
    sums = q.sum(axis=0)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise ValidationError(f"{name} column {int(bad[0])} sums to {sums[bad[0]]:.12g}, expected 1")
    return q / sums


@dataclass(frozen=True, eq=False)
class ConfusionModel:
    """Joint confusion matrix, its inverse and (when known) its factors.

    ``q_m`` and ``q_v`` are ``None`` for models built from an arbitrary joint
    matrix with :meth:`from_joint`.
    """

    q_theta: NDArray[np.float64]
    v_theta: NDArray[np.float64]
    condition_estimate: float
    q_m: NDArray[np.float64] | None = None
    q_v: NDArray[np.float64] | None = None

    @classmethod
    def from_factors(
        cls, q_m: ArrayLike, q_v: ArrayLike, strict: bool = False, tol: float = COLUMN_SUM_TOL
    ) -> ConfusionModel:
        qm = _check_column_stochastic(np.asarray(q_m, dtype=float), "q_m", tol)
        qv = _check_column_stochastic(np.asarray(q_v, dtype=float), "q_v", tol)
        q = kronecker_confusion(qm, qv)
        v, cond = invert_confusion(q, strict=strict)
        return cls(_frozen(q), _frozen(v), cond, _frozen(qm), _frozen(qv))

    @classmethod
    def from_joint(cls, q_theta: ArrayLike, strict: bool = False, tol: float = COLUMN_SUM_TOL) -> ConfusionModel:
        q = _check_column_stochastic(np.asarray(q_theta, dtype=float), "q_theta", tol)
        v, cond = invert_confusion(q, strict=strict)
        return cls(_frozen(q), _frozen(v), cond)

    @classmethod
    def identity(cls, space: StateSpace) -> ConfusionModel:
        return cls.from_factors(np.eye(space.m_count), np.eye(space.v_count))

    @property
    def theta_count(self) -> int:
        return self.q_theta.shape[0]

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.q_theta, self.q_theta.T, atol=1e-12))


class Space(enum.Enum):
    TRUE = "true"
    PREDICTED = "predicted"


@dataclass(frozen=True, eq=False)
class Belief:
    """A distribution over true or predicted states.

    Beliefs obtained by inverting the confusion matrix can have negative
    coordinates; they are kept as-is and flagged through ``in_simplex``.
    """

    space_tag: Space
    probs: NDArray[np.float64]

    SUM_TOL = 1e-9
    NEG_TOL = 1e-12

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1:
            raise DimensionError("belief must be a vector")
        if not np.all(np.isfinite(p)):
            raise ValidationError("belief has non-finite entries")
        if abs(p.sum() - 1.0) > self.SUM_TOL:
            raise ValidationError(f"belief sums to {p.sum():.12g}, expected 1")
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def true(cls, probs: ArrayLike) -> Belief:
        return cls(Space.TRUE, np.asarray(probs, dtype=float))

    @classmethod
    def predicted(cls, probs: ArrayLike) -> Belief:
        return cls(Space.PREDICTED, np.asarray(probs, dtype=float))

    @property
    def in_simplex(self) -> bool:
        return bool(self.probs.min() >= -self.NEG_TOL)

    def __len__(self) -> int:
        return self.probs.shape[0]


@dataclass(frozen=True)
class PerformativeConfig:
    """Settings of the repeated performative process."""

    lam: float = 0.0
    max_rounds: int = 50
    tolerance: float = 1e-6
    normalize: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.lam <= 1.0):
            raise ValidationError(f"lambda must lie in [0, 1], got {self.lam}")
        if int(self.max_rounds) != self.max_rounds or self.max_rounds < 1:
            raise ValidationError(f"rounds must be a positive integer, got {self.max_rounds}")
        if not self.tolerance > 0:
            raise ValidationError(f"tolerance must be positive, got {self.tolerance}")


# ---------------------------------------------------------------------------
# scenario files


def _matrix(data: Any, name: str) -> NDArray[np.float64]:
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{name} is not a numeric matrix") from exc
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be a 2-D array")
    return arr


def _read_json(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: file not found")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level value must be an object")
    return data


def _require(data: dict[str, Any], key: str) -> Any:
    if key not in data:
        raise ParseError(f"missing required key {key!r}")
    return data[key]


def confusion_from_dict(data: dict[str, Any], space: StateSpace | None = None, strict: bool = False) -> ConfusionModel:
    """Confusion model from ``q_m``/``q_v`` keys, or a joint ``q_theta`` key."""
    if "q_m" in data or "q_v" in data:
        q_m = _matrix(_require(data, "q_m"), "q_m")
        q_v = _matrix(_require(data, "q_v"), "q_v")
        if space is not None:
            if q_m.shape != (space.m_count, space.m_count):
                raise DimensionError(f"q_m has shape {q_m.shape}, expected ({space.m_count}, {space.m_count})")
            if q_v.shape != (space.v_count, space.v_count):
                raise DimensionError(f"q_v has shape {q_v.shape}, expected ({space.v_count}, {space.v_count})")
        return ConfusionModel.from_factors(q_m, q_v, strict=strict, tol=PRIOR_RENORMALIZE_TOL)
    if "q_theta" in data:
        q = _matrix(data["q_theta"], "q_theta")
        if space is not None and q.shape != (space.theta_count, space.theta_count):
            raise DimensionError(f"q_theta has shape {q.shape}, expected {space.theta_count} square")
        return ConfusionModel.from_joint(q, strict=strict, tol=PRIOR_RENORMALIZE_TOL)
    raise ParseError("missing required key 'q_m'/'q_v' (or 'q_theta')")


def load_scenario(
    path: str | Path, strict: bool = False
) -> tuple[Instance, ConfusionModel, PerformativeConfig | None]:
    data = _read_json(path)
    try:
        space = StateSpace(int(_require(data, "m_count")), int(_require(data, "v_count")))
        prior = np.array(_require(data, "prior"), dtype=float)
        u = _matrix(_require(data, "platform_utility"), "platform_utility")
        w = _matrix(_require(data, "user_utility"), "user_utility")
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    instance = Instance(space, prior, u, w)
    confusion = confusion_from_dict(data, space, strict=strict)
    for a in instance.alignment_violations():
        warnings.warn(
            f"no state where both platform and user prefer action {a}", AssumptionWarning, stacklevel=2
        )
    config = None
    perf = data.get("performative")
    if perf is not None:
        if not isinstance(perf, dict):
            raise ParseError("performative must be an object")
        try:
            config = PerformativeConfig(
                lam=float(perf.get("lambda", 0.0)),
                max_rounds=int(perf.get("rounds", 50)),
                tolerance=float(perf.get("tolerance", 1e-6)),
                normalize=bool(perf.get("normalize", False)),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"performative: {exc}") from exc
    return instance, confusion, config


def load_confusion(path: str | Path, strict: bool = False) -> ConfusionModel:
    """Read only the confusion model of a scenario (or confusion-only) file."""
    data = _read_json(path)
    space = None
    if "m_count" in data and "v_count" in data:
        space = StateSpace(int(data["m_count"]), int(data["v_count"]))
    return confusion_from_dict(data, space, strict=strict)


def load_confusion_matrix(path: str | Path) -> NDArray[np.float64]:
    """Joint column-stochastic matrix of a file, without requiring invertibility."""
    data = _read_json(path)
    if "q_m" in data or "q_v" in data:
        q_m = _check_column_stochastic(_matrix(_require(data, "q_m"), "q_m"), "q_m", PRIOR_RENORMALIZE_TOL)
        q_v = _check_column_stochastic(_matrix(_require(data, "q_v"), "q_v"), "q_v", PRIOR_RENORMALIZE_TOL)
        return kronecker_confusion(q_m, q_v)
    if "q_theta" in data:
        return _check_column_stochastic(_matrix(data["q_theta"], "q_theta"), "q_theta", PRIOR_RENORMALIZE_TOL)
    raise ParseError("missing required key 'q_m'/'q_v' (or 'q_theta')")


def scenario_to_dict(
    instance: Instance, confusion: ConfusionModel, config: PerformativeConfig | None = None
) -> dict[str, Any]:
    out: dict[str, Any] = {
        "m_count": instance.space.m_count,
        "v_count": instance.space.v_count,
        "prior": instance.prior.tolist(),
        "platform_utility": instance.platform_utility.tolist(),
        "user_utility": instance.user_utility.tolist(),
    }
    if confusion.q_m is not None and confusion.q_v is not None:
        out["q_m"] = confusion.q_m.tolist()
        out["q_v"] = confusion.q_v.tolist()
    else:
        out["q_theta"] = confusion.q_theta.tolist()
    if config is not None:
        out["performative"] = {
            "lambda": config.lam,
            "rounds": config.max_rounds,
            "tolerance": config.tolerance,
            "normalize": config.normalize,
        }
    return out
