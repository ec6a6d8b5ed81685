"""Symmetric heavy-tailed (stable) driver: parameters, streams, sampling.

The driver law is the symmetric stable family parametrized by a tail index
beta in (0, 2) and a scale sigma > 0, with characteristic function

    E exp(i u L_1) = exp(-sigma^beta |u|^beta).

Sampling uses the classic trigonometric construction from one uniform angle
and one exponential variate per draw (Chambers-Mallows-Stuck, symmetric
case).  Streams are splittable: a (master_seed, stream_index) pair fully
determines the byte-exact variate sequence, and distinct stream indices are
statistically independent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyRequestError, ParameterError

__all__ = [
    "StableParams",
    "SeedStream",
    "sample_sbs",
    "sample_sbs_from",
    "char_fn_sbs",
    "increment_scale",
]


@dataclass(frozen=True)
class StableParams:
    """Tail index and scale of a symmetric stable law.

    beta must lie in the open interval (0, 2); beta = 2 (Gaussian) and the
    endpoints are rejected because the tail-exponent arithmetic downstream
    divides by beta and assumes infinite variance.
    """

    beta: float
    scale: float

    def __post_init__(self) -> None:
        beta = float(self.beta)
        scale = float(self.scale)
        if not np.isfinite(beta) or not 0.0 < beta < 2.0:
            raise ParameterError(f"beta must be in (0, 2), got {self.beta!r}")
        if not np.isfinite(scale) or scale <= 0.0:
            raise ParameterError(f"scale must be positive, got {self.scale!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "scale", scale)


@dataclass(frozen=True)
class SeedStream:
    """Counter-style RNG stream: master seed plus a stream index.

    Replication k of an experiment uses stream_index = k.  The generator is
    numpy PCG64 keyed by SeedSequence(master_seed, spawn_key=(stream_index,)),
    numpy's documented mechanism for independent splittable streams.  Only
    raw uniforms are ever drawn from it, in a fixed documented order, so the
    variate sequence is reproducible byte-for-byte.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        ms = int(self.master_seed)
        si = int(self.stream_index)
        if not 0 <= ms < 2**64:
            raise ParameterError(f"master_seed must be a u64, got {self.master_seed!r}")
        if si < 0:
            raise ParameterError(f"stream_index must be >= 0, got {self.stream_index!r}")
        object.__setattr__(self, "master_seed", ms)
        object.__setattr__(self, "stream_index", si)

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, stream_index: int) -> "SeedStream":
        return SeedStream(self.master_seed, stream_index)


def sample_sbs(params: StableParams, count: int, stream: SeedStream) -> np.ndarray:
    """Draw `count` i.i.d. symmetric stable variates.

    Consumption order (fixed, part of the determinism contract): first a
    block of `count` uniforms for the angles, then a block of `count`
    uniforms for the exponentials.

    With U uniform on (-pi/2, pi/2) and W standard exponential,

        X = sin(beta U) / cos(U)^{1/beta}
            * (cos((1 - beta) U) / W)^{(1 - beta)/beta}

    is standard symmetric stable; the formula degenerates to tan(U) (Cauchy)
    at beta = 1 because the second factor's exponent vanishes.
    """
    if count == 0:
        raise EmptyRequestError("count must be >= 1")
    if count < 0:
        raise ParameterError(f"count must be >= 1, got {count}")
    return sample_sbs_from(params, count, stream.generator())


def sample_sbs_from(params: StableParams, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from an already-open generator (continues its uniform stream).

    Lets callers take several dependent blocks from one stream without
    repeating variates; block boundaries are part of the caller's
    determinism contract.
    """
    beta = params.beta
    u1 = rng.random(count)
    u2 = rng.random(count)
    # random() is in [0, 1); shift the angle off +-pi/2 and keep W > 0.
    angle = np.pi * (u1 - 0.5)
    w = -np.log1p(-u2)
    np.maximum(w, np.finfo(float).tiny, out=w)

    sin_ba = np.sin(beta * angle)
    cos_a = np.cos(angle)
    x = sin_ba / cos_a ** (1.0 / beta)
    if beta != 1.0:
        x *= (np.cos((1.0 - beta) * angle) / w) ** ((1.0 - beta) / beta)
    return params.scale * x


def char_fn_sbs(params: StableParams, u) -> np.ndarray | float:
    """Characteristic function exp(-scale^beta |u|^beta) at real u."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("char_fn_sbs requires finite u")
    out = np.exp(-(params.scale**params.beta) * np.abs(u) ** params.beta)
    return float(out) if out.ndim == 0 else out


def increment_scale(params: StableParams, mesh: float) -> float:
    """Scale of one driver increment over a lattice cell of width `mesh`.

    Increments of the driver over disjoint cells are i.i.d. symmetric stable
    with scale sigma * mesh^{1/beta} (self-similarity of the driver).
    """
    mesh = float(mesh)
    if not np.isfinite(mesh) or mesh <= 0.0:
        raise ParameterError(f"mesh must be positive, got {mesh!r}")
    return params.scale * mesh ** (1.0 / params.beta)
