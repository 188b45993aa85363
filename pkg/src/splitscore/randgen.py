"""Seeded random streams and synthetic data for the simulation scenarios.

Every random draw in the engine flows through a stream keyed by
(master_seed, replication_id, purpose), so replications are reproducible
and independent, and paired strategies can share exactly the streams they
are supposed to share.
"""
from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, ndtr

from . import boxcox

RandomStream = np.random.Generator

# redraw passes before giving up on transform-scale rejection sampling
_MAX_REJECT_PASSES = 10_000


class Purpose(enum.IntEnum):
    """What a random stream is used for within one replication."""

    TRAIN_DATA = 0
    EVAL_DATA = 1
    SPLIT_PERMUTATION = 2
    FRESH_DATA = 3
    BIG_SAMPLE = 4


class Scenario(str, enum.Enum):
    BOXCOX = "boxcox"
    VARSEL = "varsel"
    OUTLIER = "outlier"
    BINARY = "binary"


class ResponseKind(str, enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


@dataclass(frozen=True)
class StreamKey:
    """Identifies one independent random stream."""

    master_seed: int
    replication_id: int
    purpose: Purpose

    def __post_init__(self) -> None:
        if self.master_seed < 0:
            raise ValueError("master_seed must be nonnegative")
        if self.replication_id < 0:
            raise ValueError("replication_id must be nonnegative")


def make_stream(key: StreamKey) -> RandomStream:
    """Return the generator for a stream key.

    Distinct keys give statistically independent streams; the same key always
    gives the same stream.
    """
    seq = np.random.SeedSequence(
        [int(key.master_seed), int(key.replication_id), int(key.purpose)]
    )
    return np.random.default_rng(seq)


def derive_seed(*parts: object) -> int:
    """Collapse a tuple of labels into a 64-bit seed via sha256.

    Used to key cell-level master seeds off factor levels so that cells
    agreeing on the labelled factors share streams exactly.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class Dataset:
    """A design matrix with its response vector.

    design has shape (n, p); response has shape (n,). n_rejected counts
    noise draws discarded by rejection sampling during generation (transform
    scenario only).
    """

    design: np.ndarray
    response: np.ndarray
    response_kind: ResponseKind = ResponseKind.CONTINUOUS
    n_rejected: int = 0

    def __post_init__(self) -> None:
        self.design = np.asarray(self.design, dtype=float)
        self.response = np.asarray(self.response, dtype=float)
        if self.design.ndim != 2:
            raise ValueError("design must be 2-d")
        if self.response.ndim != 1:
            raise ValueError("response must be 1-d")
        if self.design.shape[0] != self.response.shape[0]:
            raise ValueError("design and response row counts differ")
        if self.response_kind is ResponseKind.BINARY:
            vals = np.unique(self.response)
            if not np.isin(vals, (0.0, 1.0)).all():
                raise ValueError("binary response must be 0/1")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            design=self.design[idx],
            response=self.response[idx],
            response_kind=self.response_kind,
            n_rejected=0,
        )


@dataclass(frozen=True)
class ScenarioParams:
    """Data-generating parameters for one scenario.

    Intercept is fixed at zero in every scenario. beta is the common slope
    applied to every active predictor. lam is the transform exponent
    (boxcox scenario), rho the common predictor correlation on the uniform
    scale (varsel/binary), df the noise tail index (outlier scenario;
    math.inf means Gaussian noise).
    """

    scenario: Scenario
    n: int
    beta: float
    sigma: float
    lam: float | None = None
    p: int = 1
    rho: float = 0.0
    df: float | None = None

    ALPHA = 0.0  # intercept of every data-generating process

    def __post_init__(self) -> None:
        if self.n < 4:
            raise ValueError("n too small")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not -1.0 < self.rho < 1.0:
            raise ValueError("rho must be in (-1, 1)")
        if self.scenario is Scenario.BOXCOX and self.lam is None:
            raise ValueError("boxcox scenario needs lam")
        if self.scenario is Scenario.OUTLIER:
            if self.df is None:
                raise ValueError("outlier scenario needs df")
            if self.df <= 2 and not math.isinf(self.df):
                raise ValueError("df must exceed 2 (or be inf)")

    def with_n(self, n: int) -> "ScenarioParams":
        return replace(self, n=n)


def uniform_corr_to_normal(rho: float) -> float:
    """Normal-scale correlation reproducing a target uniform-scale correlation.

    Inverts rho_u = (6/pi) * asin(rho_n / 2) in closed form.
    """
    return 2.0 * math.sin(math.pi * rho / 6.0)


def correlated_uniform_design(
    n: int, p: int, rho: float, stream: RandomStream
) -> np.ndarray:
    """Equicorrelated Uniform(0,1) design via a Gaussian copula.

    Columns have pairwise correlation rho on the uniform scale. rho = 0
    short-circuits to independent uniforms.
    """
    if rho == 0.0:
        return stream.uniform(size=(n, p))
    rho_n = uniform_corr_to_normal(rho)
    if rho_n < 0:
        raise ValueError("negative equicorrelation not supported")
    shared = stream.standard_normal(size=(n, 1))
    own = stream.standard_normal(size=(n, p))
    z = math.sqrt(rho_n) * shared + math.sqrt(1.0 - rho_n) * own
    return ndtr(z)


def _generate_boxcox(
    params: ScenarioParams, n: int, stream: RandomStream
) -> Dataset:
    lam = float(params.lam)
    x = stream.uniform(size=(n, 1))
    t = params.beta * x[:, 0] + stream.normal(0.0, params.sigma, size=n)
    n_rejected = 0
    if lam != 0.0:
        # redraw noise (keeping x) until the transform inverts to a finite y
        for _ in range(_MAX_REJECT_PASSES):
            base = 1.0 + lam * t
            bad = base <= 0.0
            ok = ~bad
            if ok.any():
                y_ok = np.power(base[ok], 1.0 / lam)
                finite = np.isfinite(y_ok) & (y_ok > 0.0)
                bad[np.flatnonzero(ok)[~finite]] = True
            if not bad.any():
                break
            n_rejected += int(bad.sum())
            t[bad] = params.beta * x[bad, 0] + stream.normal(
                0.0, params.sigma, size=int(bad.sum())
            )
        else:
            raise RuntimeError("rejection sampling did not terminate")
    y = boxcox.inverse(t, lam)
    return Dataset(x, y, ResponseKind.CONTINUOUS, n_rejected)


def _generate_varsel(
    params: ScenarioParams, n: int, stream: RandomStream
) -> Dataset:
    x = correlated_uniform_design(n, params.p, params.rho, stream)
    y = params.beta * x.sum(axis=1) + stream.normal(0.0, params.sigma, size=n)
    return Dataset(x, y, ResponseKind.CONTINUOUS)


def _generate_outlier(
    params: ScenarioParams, n: int, stream: RandomStream
) -> Dataset:
    x = stream.uniform(size=(n, 1))
    if math.isinf(params.df):
        noise = stream.standard_normal(size=n)
    else:
        noise = stream.standard_t(params.df, size=n)
    y = params.beta * x[:, 0] + params.sigma * noise
    return Dataset(x, y, ResponseKind.CONTINUOUS)


def _generate_binary(
    params: ScenarioParams, n: int, stream: RandomStream
) -> Dataset:
    x = correlated_uniform_design(n, params.p, params.rho, stream)
    eta = params.beta * x.sum(axis=1) + stream.normal(
        0.0, params.sigma, size=n
    )
    prob = expit(eta)
    y = (stream.uniform(size=n) < prob).astype(float)
    return Dataset(x, y, ResponseKind.BINARY)


def generate(
    params: ScenarioParams,
    stream: RandomStream,
    n_override: int | None = None,
) -> Dataset:
    """Draw one dataset from the scenario's data-generating process.

    n_override replaces params.n for this draw (evaluation sets and
    large-sample surrogates use the same process at a different size).
    """
    n = params.n if n_override is None else int(n_override)
    if n < 1:
        raise ValueError("sample size must be positive")
    if params.scenario is Scenario.BOXCOX:
        return _generate_boxcox(params, n, stream)
    if params.scenario is Scenario.VARSEL:
        return _generate_varsel(params, n, stream)
    if params.scenario is Scenario.OUTLIER:
        return _generate_outlier(params, n, stream)
    if params.scenario is Scenario.BINARY:
        return _generate_binary(params, n, stream)
    raise ValueError(f"unknown scenario {params.scenario!r}")
