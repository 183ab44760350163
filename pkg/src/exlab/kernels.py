"""Markov transition kernels with a regeneration atom.

A kernel describes the one-step update of a nonnegative chain

    X_{n+1} = Z * X_n + phi(X_n, W)        for X_n above the atom,
    X_{n+1} ~ H_return                     for X_n inside the atom [0, a_max],

with Z drawn from a multiplier law and phi a perturbation that vanishes
relative to the state (``phi(t, w)/t -> 0``).  The interval [0, a_max] acts
as a regeneration atom by construction: every visit restarts the chain from
the return law, independently of the past.
"""
from __future__ import annotations

import bisect
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .distributions import SPEC_VERSION, TailDistribution, pareto, point, lognormal, mixture_at_zero

__all__ = [
    "PhiSpec",
    "BoundarySpec",
    "KernelSpec",
    "ChainPath",
    "CycleCapError",
    "DomainCheckReport",
    "step",
    "step_columns",
    "simulate_path",
    "check_domain_of_attraction",
    "extremal_boundary_value",
    "BUILTIN_KERNELS",
    "builtin_kernel",
    "builtin_kernel_table",
    "DEFAULT_CYCLE_CAP",
]

DEFAULT_CYCLE_CAP = 10_000_000

PHI_KINDS = ("zero", "additive", "table", "scaled")


@dataclass(frozen=True)
class PhiSpec:
    """Perturbation term of the update.

    Kinds: ``zero`` (pure multiplicative update), ``additive`` (add a draw
    from ``w_law``), ``table`` (bounded custom function of the state, linear
    interpolation through ``xs``/``values``, optionally modulated by
    ``w_law``), and ``scaled`` (phi(x, w) = x*w).  The first three satisfy
    the vanishing requirement phi(t, w)/t -> 0; ``scaled`` deliberately does
    not and exists as a designed violator for diagnostics.
    """

    kind: str = "zero"
    w_law: TailDistribution | None = None
    xs: tuple = ()
    values: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in PHI_KINDS:
            raise ValueError(f"unknown phi kind {self.kind!r}")
        if self.kind in ("additive", "scaled") and self.w_law is None:
            raise ValueError(f"phi kind {self.kind!r} requires w_law")
        if self.kind == "table":
            xs = np.asarray(self.xs, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if xs.size < 2 or xs.shape != vals.shape:
                raise ValueError("table phi requires matching xs/values, length >= 2")
            if (np.diff(xs) <= 0).any():
                raise ValueError("table phi xs must be strictly increasing")
            if not np.isfinite(vals).all() or (vals < 0).any():
                raise ValueError("table phi values must be finite and nonnegative")
            object.__setattr__(self, "xs", tuple(xs.tolist()))
            object.__setattr__(self, "values", tuple(vals.tolist()))

    @property
    def vanishing(self) -> bool:
        return self.kind != "scaled"

    def term(self, x: np.ndarray, w: np.ndarray | None) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "additive":
            return w
        if self.kind == "scaled":
            return x * w
        base = np.interp(x, self.xs, self.values)
        return base if w is None else base * w

    def draw_w(self, rng: np.random.Generator, n: int) -> np.ndarray | None:
        if self.kind == "zero":
            return None
        if self.kind == "table" and self.w_law is None:
            return None
        return self.w_law.sample(rng, n)

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {"kind": self.kind}
        if self.w_law is not None:
            doc["w_law"] = self.w_law.to_json()
        if self.kind == "table":
            doc["xs"] = list(self.xs)
            doc["values"] = list(self.values)
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "PhiSpec":
        w = doc.get("w_law")
        return cls(
            kind=doc.get("kind", "zero"),
            w_law=TailDistribution.from_json(w) if w else None,
            xs=tuple(doc.get("xs", ())),
            values=tuple(doc.get("values", ())),
        )


@dataclass(frozen=True)
class BoundarySpec:
    """Extremal boundary y(t) separating 'large' from 'small' states.

    The default ties the boundary to the atom: y(t) = a_max/t, so the
    downcrossing level t*y(t) equals a_max and the first downcrossing is
    exactly the first atom visit.  A custom power boundary c*t^(-p) is
    always joined with a_max/t via max() so that t*y(t) >= a_max holds.
    """

    kind: str = "atom_over_t"
    c: float = 1.0
    p: float = 0.5

    def __post_init__(self) -> None:
        if self.kind not in ("atom_over_t", "power"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "power" and (self.c <= 0 or not 0 < self.p <= 1):
            raise ValueError("power boundary requires c > 0 and 0 < p <= 1")

    def to_json(self) -> dict[str, Any]:
        if self.kind == "atom_over_t":
            return {"kind": "atom_over_t"}
        return {"kind": "power", "c": self.c, "p": self.p}

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "BoundarySpec":
        return cls(kind=doc.get("kind", "atom_over_t"), c=doc.get("c", 1.0), p=doc.get("p", 0.5))


@dataclass(frozen=True)
class KernelSpec:
    """Full description of a regenerating multiplicative chain."""

    z_law: TailDistribution
    phi: PhiSpec = field(default_factory=PhiSpec)
    atom_upper: float = 1.0
    h_return: TailDistribution = field(default_factory=lambda: pareto(1.0))
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    name: str = ""

    def __post_init__(self) -> None:
        if self.atom_upper < 0:
            raise ValueError("atom_upper must be nonnegative")

    # -- identity ---------------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        return {
            "spec_version": SPEC_VERSION,
            "z_law": self.z_law.to_json(),
            "phi": self.phi.to_json(),
            "atom_upper": self.atom_upper,
            "h_return": self.h_return.to_json(),
            "boundary": self.boundary.to_json(),
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "KernelSpec":
        version = doc.get("spec_version", SPEC_VERSION)
        if version != SPEC_VERSION:
            raise ValueError(f"unsupported spec_version {version}")
        for key in ("z_law", "h_return", "atom_upper"):
            if key not in doc:
                raise ValueError(f"kernel spec missing {key!r}")
        return cls(
            z_law=TailDistribution.from_json(doc["z_law"]),
            phi=PhiSpec.from_json(doc.get("phi", {"kind": "zero"})),
            atom_upper=float(doc["atom_upper"]),
            h_return=TailDistribution.from_json(doc["h_return"]),
            boundary=BoundarySpec.from_json(doc.get("boundary", {"kind": "atom_over_t"})),
            name=doc.get("name", ""),
        )

    def spec_id(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        digest = hashlib.sha256(blob).hexdigest()[:12]
        return self.name or digest

    # -- boundary ---------------------------------------------------------

    def boundary_value(self, t: float) -> float:
        if t <= 0:
            raise ValueError("boundary defined for t > 0")
        floor = self.atom_upper / t
        if self.boundary.kind == "atom_over_t":
            return floor
        return max(self.boundary.c * t ** (-self.boundary.p), floor)

    def downcross_level(self, t: float) -> float:
        """The absolute level t*y(t); never below the atom ceiling."""
        return t * self.boundary_value(t)


class CycleCapError(RuntimeError):
    """A single excursion away from the atom exceeded the step cap."""

    def __init__(self, cap: int, at_state: float):
        self.cap = cap
        self.at_state = at_state
        super().__init__(
            f"no atom visit within {cap} steps (state {at_state:.6g}); "
            "the kernel is likely not positive recurrent to [0, a_max]"
        )


@dataclass
class ChainPath:
    """A simulated trajectory with atom-visit flags."""

    states: np.ndarray
    atom_flags: np.ndarray
    kernel_id: str = ""
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.states)


def step(kernel: KernelSpec, x: float, rng: np.random.Generator) -> float:
    """One transition from state ``x``."""
    if x < 0:
        raise ValueError("state must be nonnegative")
    if x <= kernel.atom_upper:
        return kernel.h_return.sample(rng)
    z = kernel.z_law.sample(rng)
    w = kernel.phi.draw_w(rng, 1)
    return float(z * x + kernel.phi.term(np.asarray([x]), w)[0])


def step_columns(kernel: KernelSpec, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One transition applied to a whole vector of independent states."""
    n = x.size
    z = kernel.z_law.sample(rng, n)
    nxt = z * x
    if kernel.phi.kind != "zero":
        nxt = nxt + kernel.phi.term(x, kernel.phi.draw_w(rng, n))
    atom = x <= kernel.atom_upper
    count = int(atom.sum())
    if count:
        nxt[atom] = kernel.h_return.sample(rng, count)
    return nxt


def _resolve_init(kernel: KernelSpec, init, rng: np.random.Generator) -> float:
    if init == "from_H":
        return kernel.h_return.sample(rng)
    if isinstance(init, tuple) and len(init) == 2 and init[0] == "fixed":
        init = init[1]
    if isinstance(init, (int, float)):
        if init < 0:
            raise ValueError("fixed initial state must be nonnegative")
        return float(init)
    raise ValueError(f"bad init {init!r}; use 'from_H' or a nonnegative number")


def simulate_path(
    kernel: KernelSpec,
    init="from_H",
    n_steps: int = 1000,
    rng: np.random.Generator | None = None,
    cycle_cap: int = DEFAULT_CYCLE_CAP,
    seed: int | None = None,
) -> ChainPath:
    """Simulate ``n_steps`` transitions; the path has ``n_steps + 1`` states.

    Raises :class:`CycleCapError` if an excursion away from the atom lasts
    longer than ``cycle_cap`` steps (runtime guard against non-recurrent
    kernels such as the deliberate ``const-fail``).
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    if rng is None:
        if seed is None:
            raise ValueError("pass rng or seed")
        from ._rng import root_generator

        rng = root_generator(seed)
    a_max = kernel.atom_upper
    x = _resolve_init(kernel, init, rng)
    states = np.empty(n_steps + 1)
    states[0] = x

    block = 8192
    z_buf: list[float] = []
    w_buf: list[float] = []
    h_buf: list[float] = []
    phi_kind = kernel.phi.kind
    z_law, h_law, phi = kernel.z_law, kernel.h_return, kernel.phi
    w_mod = phi.kind == "table" and phi.w_law is not None
    xs, vals = (list(phi.xs), list(phi.values)) if phi_kind == "table" else ((), ())

    excursion = 0
    for j in range(1, n_steps + 1):
        if x <= a_max:
            if not h_buf:
                h_buf = h_law.sample(rng, block).tolist()
                h_buf.reverse()
            x = h_buf.pop()
            excursion = 0
        else:
            if not z_buf:
                z_buf = z_law.sample(rng, block).tolist()
                z_buf.reverse()
                if phi_kind != "zero" and (phi_kind != "table" or w_mod):
                    w_buf = phi.w_law.sample(rng, block).tolist()
                    w_buf.reverse()
            z = z_buf.pop()
            if phi_kind == "zero":
                x = z * x
            elif phi_kind == "additive":
                x = z * x + w_buf.pop()
            elif phi_kind == "scaled":
                x = x * (z + w_buf.pop())
            else:
                i = bisect.bisect_right(xs, x)
                if i == 0:
                    base = vals[0]
                elif i == len(xs):
                    base = vals[-1]
                else:
                    x0, x1 = xs[i - 1], xs[i]
                    base = vals[i - 1] + (vals[i] - vals[i - 1]) * (x - x0) / (x1 - x0)
                x = z * x + (base * w_buf.pop() if w_mod else base)
            excursion += 1
            if excursion > cycle_cap:
                raise CycleCapError(cycle_cap, x)
        states[j] = x

    return ChainPath(
        states=states,
        atom_flags=states <= a_max,
        kernel_id=kernel.spec_id(),
        seed=seed,
    )


def extremal_boundary_value(kernel: KernelSpec, t: float) -> float:
    """Effective boundary y(t); satisfies y(t) -> 0 and t*y(t) >= a_max."""
    return kernel.boundary_value(t)


def _ks_distance(sample: np.ndarray, dist: TailDistribution) -> float:
    """Kolmogorov-Smirnov distance of a sample against a CDF with atoms."""
    srt = np.sort(np.asarray(sample, dtype=float))
    n = srt.size
    pts = np.unique(np.concatenate([srt, dist.atoms()[0]]))
    ecdf = np.searchsorted(srt, pts, side="right") / n
    ecdf_left = np.searchsorted(srt, pts, side="left") / n
    cdf = np.asarray(dist.cdf(pts), dtype=float)
    cdf_left = cdf - np.asarray(dist.mass_at(pts), dtype=float)
    return float(
        max(np.abs(ecdf - cdf).max(), np.abs(ecdf_left - cdf_left).max())
    )


def _levy_distance(sample: np.ndarray, dist: TailDistribution) -> float:
    """Levy metric between the empirical law of a sample and ``dist``.

    Used instead of KS when the candidate limit has atoms: the KS distance
    between a point mass and the same point mass plus vanishing noise stays
    at 1, while the Levy metric correctly goes to 0 under weak convergence.
    """
    srt = np.sort(np.asarray(sample, dtype=float))
    n = srt.size
    jumps = np.unique(np.concatenate([srt, dist.atoms()[0]]))

    def fits(eps: float) -> bool:
        # F(x-eps) - eps <= Fhat(x) <= F(x+eps) + eps, checked on a grid
        # holding every jump of either CDF (grid error is O(1/n), far below
        # the verdict threshold).
        pts = np.unique(np.concatenate([jumps - eps, jumps, jumps + eps]))
        ecdf = np.searchsorted(srt, pts, side="right") / n
        hi = np.asarray(dist.cdf(pts + eps), dtype=float) + eps
        lo = (
            np.asarray(dist.cdf(pts - eps), dtype=float)
            - np.asarray(dist.mass_at(pts - eps), dtype=float)
            - eps
        )
        return bool((ecdf <= hi + 1e-9).all() and (lo <= ecdf + 1e-9).all())

    if fits(0.0):
        return 0.0
    lo_e, hi_e = 0.0, 1.0
    for _ in range(40):
        mid = 0.5 * (lo_e + hi_e)
        if fits(mid):
            hi_e = mid
        else:
            lo_e = mid
    return hi_e


@dataclass
class DomainCheckReport:
    """Result of the one-step scaling check against a candidate limit law."""

    t_grid: list[float]
    distances: list[float]
    dkw_99: float
    threshold: float
    consistent: bool

    def to_json(self) -> dict[str, Any]:
        return {
            "t_grid": self.t_grid,
            "distances": self.distances,
            "dkw_99": self.dkw_99,
            "threshold": self.threshold,
            "consistent": self.consistent,
        }


def check_domain_of_attraction(
    kernel: KernelSpec,
    G: TailDistribution | None = None,
    t_grid=(1e2, 1e3, 1e4),
    u: float = 1.0,
    n_samples: int = 100_000,
    rng: np.random.Generator | None = None,
    threshold: float | None = None,
) -> DomainCheckReport:
    """Test whether one-step ratios from large states settle on the law ``G``.

    For each t, draws ``step(kernel, t*u)/(t*u)`` samples and measures their
    distance to ``G`` (default: the kernel's own multiplier law): the KS
    distance when G is continuous, the Levy metric when G has atoms (KS
    cannot see weak convergence onto a point mass).  The kernel is flagged
    consistent when the distances are nonincreasing within sampling error
    and end below ``threshold``.
    """
    if rng is None:
        raise ValueError("pass rng")
    if u <= 0:
        raise ValueError("u must be positive")
    G = G or kernel.z_law
    metric = _ks_distance if G.atoms()[0].size == 0 else _levy_distance
    dkw = math.sqrt(math.log(2 / 0.01) / (2 * n_samples))
    if threshold is None:
        threshold = max(0.02, 3 * dkw)
    distances = []
    for t in t_grid:
        x0 = t * u
        if x0 <= kernel.atom_upper:
            raise ValueError(f"t*u = {x0} is inside the atom; grid too small")
        col = np.full(n_samples, x0)
        ratios = step_columns(kernel, col, rng) / x0
        distances.append(metric(ratios, G))
    drops = all(
        distances[i + 1] <= distances[i] + 2 * dkw for i in range(len(distances) - 1)
    )
    consistent = bool(drops and distances[-1] < threshold)
    return DomainCheckReport(
        t_grid=[float(t) for t in t_grid],
        distances=distances,
        dkw_99=dkw,
        threshold=threshold,
        consistent=consistent,
    )


# -- builtin kernel suite -------------------------------------------------


def _k_det_contract(rho: float = 0.5, alpha: float = 1.0, a_max: float = 1.0) -> KernelSpec:
    if not 0 < rho < 1:
        raise ValueError("det-contract requires 0 < rho < 1")
    return KernelSpec(
        z_law=point(rho), atom_upper=a_max, h_return=pareto(alpha), name="det-contract",
    )


def _k_ar1(rho: float = 0.5, alpha: float = 1.0, a_max: float = 4.0) -> KernelSpec:
    if not 0 < rho < 1:
        raise ValueError("ar1 requires 0 < rho < 1")
    return KernelSpec(
        z_law=point(rho),
        phi=PhiSpec(kind="additive", w_law=pareto(alpha + 1.0)),
        atom_upper=a_max,
        h_return=pareto(alpha),
        name="ar1",
    )


def _k_geo_kill(kill: float = 0.3, level: float = 1.0, alpha: float = 1.0, a_max: float = 0.5) -> KernelSpec:
    if not 0 < kill < 1:
        raise ValueError("geo-kill requires 0 < kill < 1")
    return KernelSpec(
        z_law=mixture_at_zero(kill, point(level)),
        atom_upper=a_max,
        h_return=pareto(alpha),
        name="geo-kill",
    )


def _k_logn_drift(mu: float = -0.5, sigma: float = 0.5, alpha: float = 2.0, a_max: float = 1.0) -> KernelSpec:
    if mu >= 0:
        raise ValueError("logn-drift requires mu < 0 (downward drift)")
    return KernelSpec(
        z_law=lognormal(mu, sigma), atom_upper=a_max, h_return=pareto(alpha), name="logn-drift",
    )


def _k_const_fail(alpha: float = 1.0, a_max: float = 1.0) -> KernelSpec:
    return KernelSpec(
        z_law=point(1.0), atom_upper=a_max, h_return=pareto(alpha), name="const-fail",
    )


BUILTIN_KERNELS: dict[str, dict[str, Any]] = {
    "det-contract": {
        "build": _k_det_contract,
        "defaults": {"rho": 0.5, "alpha": 1.0, "a_max": 1.0},
        "description": "deterministic contraction Z = rho, no perturbation; fully solvable",
        "violates": (),
    },
    "ar1": {
        "build": _k_ar1,
        "defaults": {"rho": 0.5, "alpha": 1.0, "a_max": 4.0},
        "description": "contraction Z = rho with additive Pareto(alpha+1) noise",
        "violates": (),
    },
    "geo-kill": {
        "build": _k_geo_kill,
        "defaults": {"kill": 0.3, "level": 1.0, "alpha": 1.0, "a_max": 0.5},
        "description": "multiplier with an atom at 0: clusters end by geometric killing",
        "violates": (),
    },
    "logn-drift": {
        "build": _k_logn_drift,
        "defaults": {"mu": -0.5, "sigma": 0.5, "alpha": 2.0, "a_max": 1.0},
        "description": "lognormal multiplier with E log Z < 0; random-walk drift back",
        "violates": (),
    },
    "const-fail": {
        "build": _k_const_fail,
        "defaults": {"alpha": 1.0, "a_max": 1.0},
        "description": "Z = 1: no drift back; designed to fail the drift-back check",
        "violates": ("drift_back",),
    },
}


def builtin_kernel(name: str, **overrides) -> KernelSpec:
    """Construct a builtin kernel by name, with optional parameter overrides."""
    try:
        entry = BUILTIN_KERNELS[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; available: {', '.join(sorted(BUILTIN_KERNELS))}"
        ) from None
    params = dict(entry["defaults"])
    unknown = set(overrides) - set(params)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    params.update(overrides)
    return entry["build"](**params)


def builtin_kernel_table() -> list[dict[str, Any]]:
    """Names, defaults, and descriptions of the builtin kernels."""
    return [
        {
            "name": name,
            "description": entry["description"],
            "defaults": dict(entry["defaults"]),
            "violates": list(entry["violates"]),
        }
        for name, entry in BUILTIN_KERNELS.items()
    ]
