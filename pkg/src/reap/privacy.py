"""privacy.py — Laplace-mechanism calibration, sampling and the accuracy bridge.

A user with privacy level ε reporting a reading of range γ adds Laplace(0, b) noise with

    b = γ / ε

and the fusion center's average of n such reports satisfies (α, δ)-accuracy for

    α = √2·γ / (n·√(1−δ)) · sqrt(Σ 1/ε_i²)

which is exactly the point where the Chebyshev bound 2/(α²n²)·Σ b_i² equals 1 − δ.

Readings are never clipped to [0, γ]; γ is the declared range.
"""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np
import numpy.typing as npt
import structlog

from reap.exceptions import DomainError
from reap.models import FloatArray, LaplaceScale, PerturbedReading, PplLevel, SensingContext

logger: structlog.BoundLogger = structlog.get_logger(__name__)

# Smallest uniform draw fed to the inverse cdf; keeps the log finite at u = 0.
_U_FLOOR = np.finfo(np.float64).tiny


def calibrate_laplace(gamma: float, ppl: PplLevel) -> LaplaceScale:
    """Return the Laplace scale that gives ``ppl.epsilon``-differential privacy.

    Raises:
        DomainError: If gamma or epsilon is not positive.
    """
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}", field="gamma")
    if not ppl.epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {ppl.epsilon}", field="epsilon")
    return LaplaceScale(b=gamma / ppl.epsilon)


def laplace_from_uniform(u: npt.ArrayLike, b: npt.ArrayLike) -> FloatArray:
    """Inverse-cdf transform of uniform draws ``u`` in (0, 1) to Laplace(0, b) draws.

    Sign-split form: η = −b·sign(u − ½)·ln(1 − 2|u − ½|), so u = ½ maps to 0.
    """
    centred = np.asarray(u, dtype=np.float64) - 0.5
    tail = np.maximum(1.0 - 2.0 * np.abs(centred), _U_FLOOR)
    return np.asarray(-np.asarray(b, dtype=np.float64) * np.sign(centred) * np.log(tail))


def laplace_noise(b: npt.ArrayLike, rng: np.random.Generator) -> FloatArray:
    """Draw one Laplace(0, b_i) sample per entry of ``b`` from a single uniform block."""
    scales = np.asarray(b, dtype=np.float64)
    return laplace_from_uniform(rng.random(scales.shape), scales)


def sample_laplace(scale: LaplaceScale, rng: np.random.Generator) -> float:
    """Draw one Laplace(0, scale.b) sample; consumes exactly one uniform from ``rng``."""
    return float(laplace_from_uniform(rng.random(), scale.b))


def perturb(
    raw: float,
    scale: LaplaceScale,
    rng: np.random.Generator,
    *,
    noise: float | None = None,
) -> PerturbedReading:
    """Add Laplace noise to ``raw``.

    Args:
        raw: The reading d_i.
        scale: Calibrated Laplace scale.
        rng: Seeded random source.
        noise: Forced noise value; bypasses ``rng`` (test hook).
    """
    eta = sample_laplace(scale, rng) if noise is None else noise
    return PerturbedReading(raw=raw, noisy=raw + eta, scale=scale)


def predicted_accuracy(ctx: SensingContext, ppls: Sequence[PplLevel]) -> float:
    """Return α for the given per-user privacy levels; smaller is more accurate.

    Raises:
        DomainError: If ``ppls`` does not hold exactly ``ctx.n`` levels.
    """
    if len(ppls) != ctx.n:
        raise DomainError(
            f"ppls length ({len(ppls)}) must equal ctx.n ({ctx.n})", field="ppls"
        )
    eps = np.array([p.epsilon for p in ppls], dtype=np.float64)
    return accuracy_from_weights(ctx.gamma, ctx.delta, ctx.n, float(np.sum(1.0 / eps**2)))


def accuracy_from_weights(
    gamma: float, delta: float, population: float, inverse_square_sum: float
) -> float:
    """α given Σ 1/ε_i² directly; ``population`` may be fractional (menus weight by λ_i)."""
    if not delta < 1:
        raise DomainError(f"delta must be below 1, got {delta}", field="delta")
    if not population > 0:
        raise DomainError(f"population must be positive, got {population}", field="population")
    coeff = math.sqrt(2.0) * gamma / (population * math.sqrt(1.0 - delta))
    return coeff * math.sqrt(inverse_square_sum)


def chebyshev_error_bound(
    ctx: SensingContext, scales: Sequence[LaplaceScale], alpha: float
) -> float:
    """Return the Chebyshev bound on P[|ŝ − s| ≥ α], clamped to [0, 1].

    Raises:
        DomainError: If alpha is not positive or ``scales`` does not hold ``ctx.n`` entries.
    """
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}", field="alpha")
    if len(scales) != ctx.n:
        raise DomainError(
            f"scales length ({len(scales)}) must equal ctx.n ({ctx.n})", field="scales"
        )
    b = np.array([s.b for s in scales], dtype=np.float64)
    bound = 2.0 * float(np.sum(b**2)) / (alpha**2 * ctx.n**2)
    return min(1.0, max(0.0, bound))
