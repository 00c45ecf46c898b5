"""System configuration: strict JSON schema, hashing and assumption checks."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientFamily, linear_bound_constant
from .graphon import (
    Graphon,
    cut_norm,
    discretize,
    step_difference,
    validate_graphon_lipschitz,
)
from .measures import DiscreteMeasure
from .transport import wop2_squared, wp_power

SCHEMA_VERSION = 1
LIPSCHITZ_SLACK = 0.05
PROBE_SEED = 20240901

_TOP_FIELDS = {
    "schema_version", "d", "m", "m_common", "T", "dt", "n", "coefficients",
    "initial_law", "constants", "graphon", "discretization", "quad_points",
}
_REQUIRED = {"schema_version", "d", "T", "dt", "coefficients", "initial_law", "constants"}


class ConfigError(ValueError):
    """Schema violation; fatal."""


@dataclass(frozen=True)
class InitialLaw:
    """Independent Gaussian coordinates with label-affine mean and std.

    ``mean(u) = mean[0] + mean[1] * u`` and ``std(u) = std[0] + std[1] * u``.
    """

    mean: tuple = (0.0, 0.0)
    std: tuple = (1.0, 0.0)
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ConfigError(f"unsupported initial law {self.kind!r}")
        if len(self.mean) != 2 or len(self.std) != 2:
            raise ConfigError("mean and std take two coefficients (a + b u)")
        if min(self.std[0], self.std[0] + self.std[1]) < 0:
            raise ConfigError("std(u) must be nonnegative on [0, 1]")

    def mean_at(self, u):
        return self.mean[0] + self.mean[1] * np.asarray(u, dtype=np.float64)

    def std_at(self, u):
        return self.std[0] + self.std[1] * np.asarray(u, dtype=np.float64)

    def sample(self, z: np.ndarray, u) -> np.ndarray:
        """Map standard normal draws ``z`` of shape ``(P, d)`` at labels ``u``."""
        u = np.asarray(u, dtype=np.float64).reshape(-1, 1)
        return self.mean_at(u) + self.std_at(u) * z

    def quantile_measure(self, u: float, d: int, k: int = 64) -> DiscreteMeasure:
        """Deterministic k-point (per axis, diagonal) stand-in for the law at ``u``."""
        from scipy.stats import norm

        q = norm.ppf((np.arange(k) + 0.5) / k)
        atoms = self.mean_at(u) + self.std_at(u) * np.repeat(q[:, None], d, axis=1)
        return DiscreteMeasure(atoms, np.full(k, 1.0 / k))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": list(self.mean), "std": list(self.std)}


@dataclass(frozen=True)
class Constants:
    L: float = 1.0
    K: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        if self.L <= 0 or self.K <= 0:
            raise ConfigError("L and K must be positive")
        if self.eps <= 0:
            raise ConfigError("eps must be positive")


@dataclass(frozen=True)
class SystemConfig:
    d: int
    T: float
    dt: float
    family: CoefficientFamily
    initial_law: InitialLaw
    constants: Constants
    m: int = 1
    m_common: int = 1
    n: int | None = None
    graphon: Graphon | None = None
    discretization: str = "average"
    quad_points: int = 4
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if min(self.d, self.m, self.m_common) < 1:
            raise ConfigError("d, m and m_common must be >= 1")
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("T and dt must be positive")
        ratio = self.T / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("T / dt must be an integer")
        if self.discretization not in ("average", "sample"):
            raise ConfigError("discretization must be 'average' or 'sample'")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def time_grid(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def to_dict(self) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "d": self.d,
            "m": self.m,
            "m_common": self.m_common,
            "T": self.T,
            "dt": self.dt,
            "coefficients": self.family.to_dict(),
            "initial_law": self.initial_law.to_dict(),
            "constants": {"L": self.constants.L, "K": self.constants.K, "eps": self.constants.eps},
            "discretization": self.discretization,
            "quad_points": self.quad_points,
        }
        if self.n is not None:
            out["n"] = self.n
        if self.graphon is not None:
            out["graphon"] = self.graphon.to_dict()
        return out

    def with_graphon(self, G: Graphon) -> "SystemConfig":
        from dataclasses import replace

        return replace(self, graphon=G)

    def config_hash(self, extra: dict | None = None) -> str:
        """sha256 over the canonical JSON of everything that affects numbers."""
        doc = {"config": self.to_dict(), "extra": extra or {}}
        blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _number(doc, key, kind=float, default=None):
    if key not in doc:
        if default is None:
            raise ConfigError(f"missing field {key!r}")
        return default
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"field {key!r} must be a number")
    if kind is int and int(val) != val:
        raise ConfigError(f"field {key!r} must be an integer")
    return kind(val)


def parse_config(doc: dict) -> SystemConfig:
    """Build a :class:`SystemConfig` from a JSON document; unknown fields are fatal."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    missing = _REQUIRED - set(doc)
    if missing:
        raise ConfigError(f"missing config fields {sorted(missing)}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {doc['schema_version']!r}")
    try:
        family = CoefficientFamily.from_dict(doc["coefficients"])
        law_doc = dict(doc["initial_law"])
        extra = set(law_doc) - {"kind", "mean", "std"}
        if extra:
            raise ConfigError(f"unknown initial_law fields {sorted(extra)}")
        law = InitialLaw(
            mean=tuple(float(x) for x in law_doc.get("mean", (0.0, 0.0))),
            std=tuple(float(x) for x in law_doc.get("std", (1.0, 0.0))),
            kind=law_doc.get("kind", "gaussian"),
        )
        cdoc = dict(doc["constants"])
        extra = set(cdoc) - {"L", "K", "eps"}
        if extra:
            raise ConfigError(f"unknown constants {sorted(extra)}")
        constants = Constants(**{k: float(v) for k, v in cdoc.items()})
        graphon = Graphon.from_dict(doc["graphon"]) if doc.get("graphon") is not None else None
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc
    n = doc.get("n")
    return SystemConfig(
        d=_number(doc, "d", int),
        T=_number(doc, "T"),
        dt=_number(doc, "dt"),
        family=family,
        initial_law=law,
        constants=constants,
        m=_number(doc, "m", int, 1),
        m_common=_number(doc, "m_common", int, 1),
        n=None if n is None else _number(doc, "n", int),
        graphon=graphon,
        discretization=doc.get("discretization", "average"),
        quad_points=_number(doc, "quad_points", int, 4),
        raw=doc,
    )


def load_config(path) -> SystemConfig:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return parse_config(doc)


# -- assumption checks -------------------------------------------------------


@dataclass
class Check:
    name: str
    status: str
    detail: str
    numbers: dict = field(default_factory=dict)

    def line(self) -> str:
        nums = " ".join(f"{k}={_fmt(v)}" for k, v in self.numbers.items())
        return f"{self.status:4s} {self.name}: {self.detail}" + (f" [{nums}]" if nums else "")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.status == "PASS" for c in self.checks)

    def lines(self):
        return [c.line() for c in self.checks]


def _random_measure(rng, d, K, max_atoms=6, max_mass=1.0) -> DiscreteMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    directions = rng.normal(size=(k, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = math.sqrt(K) * rng.random(k) ** (1.0 / d)
    atoms = directions * radii[:, None]
    w = rng.random(k)
    mass = max_mass * rng.random()
    return DiscreteMeasure(atoms, w / w.sum() * mass)


def _perturb(rng, mu: DiscreteMeasure, K, scale) -> DiscreteMeasure:
    atoms = mu.atoms + scale * rng.normal(size=mu.atoms.shape)
    norms = np.linalg.norm(atoms, axis=1, keepdims=True)
    atoms = np.where(norms > math.sqrt(K), atoms / norms * math.sqrt(K), atoms)
    w = np.clip(mu.weights * (1 + scale * rng.normal(size=len(mu))), 0.0, None)
    return DiscreteMeasure(atoms, w)


def assumption_constant(coef, L: float, K: float) -> float:
    """Constant to test in the Lipschitz condition for one coefficient.

    Kernel-integral coefficients satisfy it with
    ``sqrt(max(4 L^2, 4 L^2 K + 2 L^2))``; the others with ``L``.
    """
    if coef.kind == "linear":
        return max(L, math.sqrt(linear_bound_constant(L, K)))
    return L


def probe_coefficient(coef, d: int, L: float, K: float, probes: int = 400, seed: int = PROBE_SEED):
    """Bound and Lipschitz probes for one coefficient.

    Returns ``(sup |phi| / max(m_mu, 1), worst Lipschitz ratio, witness pair)`` where the
    ratio is ``|phi(x1, mu1) - phi(x2, mu2)| / (max(m1, m2, 1)|x1 - x2| + WOP2)``.
    """
    rng = np.random.default_rng(seed)
    sup_val, worst, witness = 0.0, 0.0, None
    radius = 2 * math.sqrt(K)
    for k in range(probes):
        mu1 = _random_measure(rng, d, K)
        x1 = rng.uniform(-radius, radius, size=d)
        scale = 10.0 ** rng.uniform(-4, 0)
        if k % 2 == 0:
            x2, mu2 = x1 + scale * rng.normal(size=d), mu1
        else:
            x2, mu2 = x1, _perturb(rng, mu1, K, scale)
        v1 = coef.evaluate(x1, mu1)
        v2 = coef.evaluate(x2, mu2)
        sup_val = max(sup_val, float(np.abs(v1).max()) / max(mu1.mass, 1.0),
                      float(np.abs(v2).max()) / max(mu2.mass, 1.0))
        denom = max(mu1.mass, mu2.mass, 1.0) * float(np.linalg.norm(x1 - x2))
        denom += math.sqrt(wop2_squared(mu1, mu2))
        if denom <= 0:
            continue
        ratio = float(np.linalg.norm(v1 - v2)) / denom
        if ratio > worst:
            worst, witness = ratio, {
                "x1": x1.tolist(), "x2": x2.tolist(),
                "mu1": mu1.to_dict(), "mu2": mu2.to_dict(),
            }
    return sup_val, worst, witness


def probe_linear_bound(coef, d: int, L: float, K: float, probes: int = 10_000, seed: int = PROBE_SEED):
    """Check ``|phi(x, mu) - phi(x, nu)|^2 <= max(4L^2, 4L^2K + 2L^2) WOP2^2(mu, nu)``.

    Measures are drawn from ``M_{2,K}`` with reference point 0 and masses in
    ``[0, 3]``. Returns ``(violations, worst ratio)``; ratios use a relative
    rounding allowance of 1e-12.
    """
    rng = np.random.default_rng(seed)
    const = linear_bound_constant(L, K)
    violations, worst = 0, 0.0
    radius = 2 * math.sqrt(K)
    for _ in range(probes):
        mu = _random_measure(rng, d, K, max_mass=3.0)
        nu = _random_measure(rng, d, K, max_mass=3.0)
        x = rng.uniform(-radius, radius, size=d)
        lhs = float(np.sum((coef.evaluate(x, mu) - coef.evaluate(x, nu)) ** 2))
        rhs = const * wop2_squared(mu, nu)
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        if lhs > rhs * (1 + 1e-12) + 1e-300:
            violations += 1
    return violations, worst


def initial_moment(law: InitialLaw, d: int, eps: float, u_grid=None, draws: int = 20_000,
                   seed: int = PROBE_SEED) -> float:
    """Monte Carlo ``sup_u E|X_u(0)|^{2+eps}`` over a label grid."""
    rng = np.random.default_rng(seed)
    u_grid = np.linspace(0, 1, 11) if u_grid is None else u_grid
    z = rng.standard_normal((draws, d))
    best = 0.0
    for u in u_grid:
        x = law.mean_at(u) + law.std_at(u) * z
        best = max(best, float(np.mean(np.linalg.norm(x, axis=1) ** (2 + eps))))
    return best


def initial_continuity(law: InitialLaw, d: int, eps: float, gaps=(0.5, 0.25, 0.125, 0.0625)):
    """Ratios ``W_{2+eps}^{2+eps}(mu_u1(0), mu_u2(0)) / |u1 - u2|^{1 + eps/2}`` per gap,
    computed on quantile discretizations with the exact solver."""
    p = 2 + eps
    ratios = []
    for g in gaps:
        a = law.quantile_measure(0.5 - g / 2, d)
        b = law.quantile_measure(0.5 + g / 2, d)
        ratios.append(wp_power(a, b, p) / g ** (1 + eps / 2))
    return list(gaps), ratios


def validate_config(cfg: SystemConfig, G: Graphon | None = None, n: int = 8,
                    probes: int = 400) -> ValidationReport:
    """Probe-based checks of the standing assumptions.

    Every check is PASS or WARN; a WARN never blocks a run.
    """
    G = G or cfg.graphon
    L, K, eps = cfg.constants.L, cfg.constants.K, cfg.constants.eps
    checks = []
    for name, coef in cfg.family.items():
        const = assumption_constant(coef, L, K)
        sup_val, worst, witness = probe_coefficient(coef, cfg.d, L, K, probes)
        bound = coef.kernel_bound
        bound_ok = np.isfinite(bound) and max(bound, sup_val) <= L * (1 + 1e-12)
        checks.append(Check(
            f"{name}.bounded",
            "PASS" if bound_ok else "WARN",
            "kernel/coefficient bound within L" if bound_ok else "bound exceeds L or is infinite",
            {"declared_bound": bound, "probe_sup": sup_val, "L": L},
        ))
        lip_ok = worst <= const * (1 + LIPSCHITZ_SLACK)
        nums = {"worst_ratio": worst, "constant": const}
        detail = "Lipschitz probes within constant" if lip_ok else "Lipschitz probe violation"
        chk = Check(f"{name}.lipschitz", "PASS" if lip_ok else "WARN", detail, nums)
        if not lip_ok:
            chk.numbers["witness"] = json.dumps(witness, sort_keys=True)
        checks.append(chk)
    moment = initial_moment(cfg.initial_law, cfg.d, eps)
    checks.append(Check(
        "initial.moment", "PASS" if np.isfinite(moment) else "WARN",
        "sup_u E|X_u(0)|^(2+eps) estimate", {"value": moment, "eps": eps},
    ))
    gaps, ratios = initial_continuity(cfg.initial_law, cfg.d, eps)
    cont_ok = all(np.isfinite(ratios)) and ratios[-1] <= 2 * max(ratios[0], 1e-12) + 1e-12
    checks.append(Check(
        "initial.continuity", "PASS" if cont_ok else "WARN",
        "W_(2+eps) continuity ratio bounded as gaps shrink",
        {"kappa_hat": float(max(ratios)), "ratio_small_gap": ratios[-1]},
    ))
    if G is not None:
        rep = validate_graphon_lipschitz(G)
        checks.append(Check(
            "graphon.lipschitz", "PASS" if rep.lipschitz else "WARN",
            rep.note or "finite-difference L_v estimates",
            {"int_L": rep.integral_L, "int_L2": rep.integral_L2, "max_L": float(rep.L_v.max())},
        ))
        values = []
        for k in (n, 2 * n, 4 * n):
            coarse = discretize(G, k, cfg.discretization, cfg.quad_points)
            fine = discretize(G, 2 * k, cfg.discretization, cfg.quad_points)
            values.append(cut_norm(step_difference(coarse, fine)).value)
        trend_ok = values[-1] <= values[0] + 1e-12
        checks.append(Check(
            "graphon.cut_norm", "PASS" if trend_ok else "WARN",
            f"||G^k - G^2k|| for k = {n}, {2 * n}, {4 * n} ({cfg.discretization})",
            {f"k{k}": v for k, v in zip((n, 2 * n, 4 * n), values)},
        ))
    return ValidationReport(checks)
