"""Signal likelihoods, posteriors, and translation between belief spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DimensionError, SpaceTagError, ValidationError, ZeroProbabilitySignal
from .state_model import SHARE, Belief, ConfusionModel, Instance, Space, StateSpace

ZERO_SIGNAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SignalingScheme:
    """Share-recommendation probabilities ``P(share | predicted state)``.

    The not-share probability is the complement, so each row of the
    two-signal scheme sums to one by construction.
    """

    share_prob: NDArray[np.float64]

    def __post_init__(self) -> None:
        p = np.asarray(self.share_prob, dtype=float)
        if p.ndim != 1:
            raise DimensionError("share_prob must be a vector")
        if not np.all(np.isfinite(p)) or p.min(initial=0) < -1e-12 or p.max(initial=0) > 1 + 1e-12:
            raise ValidationError("share probabilities must lie in [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "share_prob", p)

    @classmethod
    def constant(cls, theta_count: int, value: float) -> SignalingScheme:
        return cls(np.full(theta_count, float(value)))

    def signal_prob(self, signal: int) -> NDArray[np.float64]:
        """``P(signal | predicted state)`` for both signals."""
        return self.share_prob if signal == SHARE else 1.0 - self.share_prob

    def __len__(self) -> int:
        return self.share_prob.shape[0]


def signal_likelihood(scheme: SignalingScheme, confusion: ConfusionModel) -> NDArray[np.float64]:
    """``P(s=1 | true state)``: the scheme pushed through the classifier noise."""
    if len(scheme) != confusion.theta_count:
        raise DimensionError(f"scheme has {len(scheme)} entries, confusion has {confusion.theta_count} states")
    out = scheme.share_prob @ confusion.q_theta
    return np.clip(out, 0.0, 1.0)


def marginal_scheme(scheme: SignalingScheme, space: StateSpace) -> NDArray[np.float64]:
    """Sum of ``P(share | m_hat, v_hat)`` over ``m_hat``, one entry per ``v_hat``.

    This is a sum rather than an average, so entries lie in ``[0, m_count]``.
    """
    if len(scheme) != space.theta_count:
        raise DimensionError("scheme dimension does not match state space")
    return scheme.share_prob.reshape(space.m_count, space.v_count).sum(axis=0)


def predicted_from_true(belief: Belief, confusion: ConfusionModel) -> Belief:
    if belief.space_tag is not Space.TRUE:
        raise SpaceTagError("expected a belief over true states")
    return Belief.predicted(confusion.q_theta @ belief.probs)


def true_from_predicted(belief: Belief, confusion: ConfusionModel) -> Belief:
    """Invert the classifier noise; the result may leave the simplex."""
    if belief.space_tag is not Space.PREDICTED:
        raise SpaceTagError("expected a belief over predicted states")
    return Belief.true(confusion.v_theta @ belief.probs)


def signal_joint(scheme: SignalingScheme, instance: Instance, confusion: ConfusionModel, signal: int) -> NDArray[np.float64]:
    """Unnormalized posterior ``prior(theta) P(signal | theta)``."""
    likelihood = signal_likelihood(scheme, confusion)
    if signal != SHARE:
        likelihood = 1.0 - likelihood
    return instance.prior * likelihood


def posterior(
    scheme: SignalingScheme, instance: Instance, confusion: ConfusionModel, signal: int
) -> tuple[float, Belief, Belief]:
    """Signal probability and the induced true and predicted posteriors."""
    if signal not in (0, 1):
        raise ValidationError(f"signal must be 0 or 1, got {signal!r}")
    joint = signal_joint(scheme, instance, confusion, signal)
    prob = float(joint.sum())
    if prob < ZERO_SIGNAL_TOL:
        raise ZeroProbabilitySignal(f"signal {signal} is sent with probability {prob:.3g}")
    true_post = Belief.true(joint / prob)
    return prob, true_post, predicted_from_true(true_post, confusion)


def belief_mixture(weights: ArrayLike, beliefs: list[Belief]) -> NDArray[np.float64]:
    """Weighted sum of belief vectors, used for Bayes-plausibility checks."""
    weights = np.asarray(weights, dtype=float)
    return sum((wt * b.probs for wt, b in zip(weights, beliefs)), np.zeros(len(beliefs[0])))
