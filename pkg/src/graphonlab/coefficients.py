"""Built-in coefficient families for the drift and the two diffusion terms.

Each coefficient is evaluated in batch: particle ``i`` sits at ``X[i]`` and
interacts with the measure ``sum_j W[i, j] delta_{Y[j]}``. Diffusion
coefficients return the diagonal of a ``d x m`` matrix ``diag(k) E`` with
``E`` the rectangular identity, so the noise term is ``k[r] * dB[r]``.

Kinds:

``zero``
    identically 0.
``constant``
    ``value`` regardless of the state or measure.
``linear``
    ``phi(x, mu) = int hat_phi(x, y) dmu(y)`` with
    ``hat_phi(x, y) = offset + scale * tanh(y - x)`` (``kernel="tanh"``) or
    ``offset + scale * (y - x)`` (``kernel="difference"``, unbounded).
``mean_reverting``
    ``scale * tanh(rate * int (y - x) dmu(y))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .measures import DiscreteMeasure

KINDS = ("zero", "constant", "linear", "mean_reverting")
KERNELS = ("tanh", "difference")


def _pair_sum(kernel, X, W, Y, rowsum, cache):
    """``sum_j W[i, j] k(Y[j] - X[i])`` with ``k`` = tanh or the identity."""
    if cache is not None and kernel in cache:
        return cache[kernel]
    if kernel == "tanh":
        out = _kernels.weighted_tanh_sum(X, W, Y)
    else:
        out = W @ Y - rowsum[:, None] * X
    if cache is not None:
        cache[kernel] = out
    return out


@dataclass(frozen=True)
class Coefficient:
    kind: str = "zero"
    value: float = 0.0
    kernel: str = "tanh"
    offset: float = 0.0
    scale: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.kind == "linear" and self.kernel not in KERNELS:
            raise ValueError(f"unknown linear kernel {self.kernel!r}")

    @classmethod
    def from_dict(cls, doc: dict) -> "Coefficient":
        doc = dict(doc)
        kind = doc.pop("kind", "zero")
        allowed = {
            "zero": set(),
            "constant": {"value"},
            "linear": {"kernel", "offset", "scale"},
            "mean_reverting": {"scale", "rate"},
        }.get(kind)
        if allowed is None:
            raise ValueError(f"unknown coefficient kind {kind!r}")
        extra = set(doc) - allowed
        if extra:
            raise ValueError(f"unknown fields for {kind} coefficient: {sorted(extra)}")
        return cls(kind=kind, **{k: (v if k == "kernel" else float(v)) for k, v in doc.items()})

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "constant":
            out["value"] = self.value
        elif self.kind == "linear":
            out.update(kernel=self.kernel, offset=self.offset, scale=self.scale)
        elif self.kind == "mean_reverting":
            out.update(scale=self.scale, rate=self.rate)
        return out

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (
            self.kind == "constant" and self.value == 0.0
        ) or (
            self.kind in ("linear", "mean_reverting") and self.offset == 0.0 and self.scale == 0.0
        )

    @property
    def is_linear(self) -> bool:
        return self.kind in ("zero", "linear")

    @property
    def kernel_bound(self) -> float:
        """sup |hat_phi| for linear kernels, sup |phi| otherwise (inf if unbounded)."""
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.value)
        if self.kind == "mean_reverting":
            return abs(self.scale)
        if self.kernel == "difference" and self.scale != 0.0:
            return np.inf
        return abs(self.offset) + abs(self.scale)

    @property
    def kernel_lipschitz(self) -> float:
        """Lipschitz constant of ``hat_phi`` in each argument (linear kinds)."""
        if self.kind in ("zero", "constant"):
            return 0.0
        if self.kind == "mean_reverting":
            return abs(self.scale * self.rate)
        return abs(self.scale)

    def batch(self, X, W, Y, rowsum=None, cache=None) -> np.ndarray:
        """Values for every particle; shape ``(n, d)``.

        ``cache`` (a dict) shares the pairwise kernel sums between coefficients
        evaluated on the same snapshot.
        """
        n, d = X.shape
        if self.kind == "zero":
            return np.zeros((n, d))
        if self.kind == "constant":
            return np.full((n, d), self.value)
        if rowsum is None:
            rowsum = W.sum(axis=1)
        if self.kind == "linear":
            out = np.zeros((n, d))
            if self.scale != 0.0:
                out = self.scale * _pair_sum(self.kernel, X, W, Y, rowsum, cache)
            if self.offset != 0.0:
                out = out + self.offset * rowsum[:, None]
            return out
        drift = _pair_sum("difference", X, W, Y, rowsum, cache)
        return self.scale * np.tanh(self.rate * drift)

    def evaluate(self, x, mu: DiscreteMeasure) -> np.ndarray:
        """``phi(x, mu)`` for a single point (diagonal entries for diffusions)."""
        x = np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(1, -1))
        W = np.ascontiguousarray(mu.weights[None, :])
        Y = np.ascontiguousarray(mu.atoms)
        return self.batch(x, W, Y)[0]


@dataclass(frozen=True)
class CoefficientFamily:
    """Drift ``phi_p``, idiosyncratic diffusion ``phi_b`` and common diffusion ``phi_w``."""

    drift: Coefficient
    idio: Coefficient
    common: Coefficient

    def items(self):
        return (("drift", self.drift), ("idio", self.idio), ("common", self.common))

    @property
    def is_linear(self) -> bool:
        return all(c.is_linear for _, c in self.items())

    def to_dict(self) -> dict:
        return {name: c.to_dict() for name, c in self.items()}

    @classmethod
    def from_dict(cls, doc: dict) -> "CoefficientFamily":
        extra = set(doc) - {"drift", "idio", "common"}
        if extra:
            raise ValueError(f"unknown coefficient roles {sorted(extra)}")
        return cls(*(Coefficient.from_dict(doc.get(k, {"kind": "zero"})) for k in ("drift", "idio", "common")))


def builtin_linear_family(drift: dict, idio: dict, common: dict) -> CoefficientFamily:
    """Family whose three coefficients all integrate a kernel against the measure.

    Each argument holds ``kernel``, ``offset`` and ``scale``.
    """
    return CoefficientFamily(
        Coefficient(kind="linear", **drift),
        Coefficient(kind="linear", **idio),
        Coefficient(kind="linear", **common),
    )


def linear_bound_constant(L: float, K: float) -> float:
    """``max(4 L^2, 4 L^2 K + 2 L^2)``: squared-Lipschitz constant in the
    measure argument for kernels bounded by ``L`` and ``L``-Lipschitz, over
    measures with ``M_0(mu) <= K m_mu``."""
    return max(4 * L * L, 4 * L * L * K + 2 * L * L)
