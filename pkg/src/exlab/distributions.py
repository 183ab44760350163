"""Nonnegative probability laws used as chain ingredients.

A :class:`TailDistribution` plays three roles in this package: the heavy-tailed
return law of a regenerating chain, the multiplier law driving a tail chain,
and the noise law of a perturbation.  All sampling goes through the inverse
CDF applied to ``rng.random()`` draws, which makes exact tail/bulk restricted
sampling available for every family and keeps streams reproducible.

Families
--------
``pareto``
    Standard Pareto on [1, inf): P[X > x] = x**(-alpha).  The tail index
    lives in the ``alpha`` field; ``quantile(1 - 1/t) == t**(1/alpha)``
    holds exactly.
``deterministic_point``
    Point mass at ``params["value"]``.
``lognormal``
    exp(mu + sigma*N(0,1)) with ``params`` ``mu``, ``sigma``.
``mixture_with_point_mass_at_zero``
    With probability ``point_mass_at_zero`` the draw is 0, otherwise it comes
    from ``params["base"]`` (itself a TailDistribution without an atom at 0).
``user_table``
    Finite discrete law from ``params`` ``values``/``probs``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtri

__all__ = [
    "SPEC_VERSION",
    "FAMILIES",
    "TailDistribution",
    "ScalingFunction",
    "pareto",
    "point",
    "lognormal",
    "mixture_at_zero",
    "user_table",
    "sample",
]

SPEC_VERSION = 1

FAMILIES = (
    "pareto",
    "deterministic_point",
    "lognormal",
    "mixture_with_point_mass_at_zero",
    "user_table",
)


@dataclass(frozen=True)
class TailDistribution:
    """A nonnegative law identified by family name and parameters.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES`.
    alpha : float or None
        Tail index; required for ``pareto``, optional elsewhere.
    params : dict
        Family-specific parameters (see module docstring).
    point_mass_at_zero : float
        P[X = 0].  Only the mixture family may set this to a nonzero value
        directly; for ``user_table`` it is derived from the table.
    """

    family: str
    alpha: float | None = None
    params: dict = field(default_factory=dict)
    point_mass_at_zero: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "pareto":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("pareto requires alpha > 0")
            if self.point_mass_at_zero != 0.0:
                raise ValueError("pareto has no mass at zero")
        elif self.family == "deterministic_point":
            v = self.params.get("value")
            if v is None or v < 0:
                raise ValueError("deterministic_point requires value >= 0")
            object.__setattr__(self, "point_mass_at_zero", 1.0 if v == 0 else 0.0)
        elif self.family == "lognormal":
            if self.params.get("sigma", 0.0) <= 0:
                raise ValueError("lognormal requires sigma > 0")
            if "mu" not in self.params:
                raise ValueError("lognormal requires mu")
            if self.point_mass_at_zero != 0.0:
                raise ValueError("lognormal has no mass at zero")
        elif self.family == "mixture_with_point_mass_at_zero":
            p0 = self.point_mass_at_zero
            if not 0.0 < p0 <= 1.0:
                raise ValueError("mixture requires point_mass_at_zero in (0, 1]")
            base = self.params.get("base")
            if not isinstance(base, TailDistribution):
                raise ValueError("mixture requires params['base'] TailDistribution")
            if base.point_mass_at_zero > 0:
                raise ValueError("mixture base may not itself have mass at zero")
        elif self.family == "user_table":
            values = np.asarray(self.params.get("values", ()), dtype=float)
            probs = np.asarray(self.params.get("probs", ()), dtype=float)
            if values.size == 0 or values.shape != probs.shape:
                raise ValueError("user_table requires matching values/probs")
            if (values < 0).any() or (probs < 0).any():
                raise ValueError("user_table entries must be nonnegative")
            if abs(probs.sum() - 1.0) > 1e-9:
                raise ValueError("user_table probs must sum to 1")
            order = np.argsort(values, kind="stable")
            object.__setattr__(
                self,
                "params",
                {"values": values[order].tolist(), "probs": probs[order].tolist()},
            )
            p0 = float(probs[values == 0.0].sum())
            object.__setattr__(self, "point_mass_at_zero", p0)

    # -- sampling ---------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw from the law; scalar when ``size`` is None, else ndarray."""
        n = 1 if size is None else int(size)
        if self.family == "deterministic_point":
            out = np.full(n, self.params["value"], dtype=float)
        else:
            out = self.quantile(rng.random(n))
        return float(out[0]) if size is None else out

    def sample_tail(self, rng: np.random.Generator, lower: float, size: int | None = None):
        """Draw from the law conditioned on X > lower (exact inverse-CDF)."""
        p = self.cdf(lower)
        if p >= 1.0:
            raise ValueError(f"no mass above {lower}")
        n = 1 if size is None else int(size)
        out = self.quantile(p + rng.random(n) * (1.0 - p))
        return float(out[0]) if size is None else out

    def sample_bulk(self, rng: np.random.Generator, upper: float, size: int | None = None):
        """Draw from the law conditioned on X <= upper (exact inverse-CDF)."""
        p = self.cdf(upper)
        if p <= 0.0:
            raise ValueError(f"no mass at or below {upper}")
        n = 1 if size is None else int(size)
        out = self.quantile(rng.random(n) * p)
        return float(out[0]) if size is None else out

    # -- distribution functions ------------------------------------------

    def cdf(self, x):
        """P[X <= x], vectorized."""
        x = np.asarray(x, dtype=float)
        if self.family == "pareto":
            a = self.alpha
            out = np.where(x >= 1.0, 1.0 - np.power(np.maximum(x, 1.0), -a), 0.0)
        elif self.family == "deterministic_point":
            out = np.where(x >= self.params["value"], 1.0, 0.0)
        elif self.family == "lognormal":
            from scipy.special import ndtr

            mu, sigma = self.params["mu"], self.params["sigma"]
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(x, 1e-300)) - mu) / sigma
            out = np.where(x > 0.0, ndtr(z), 0.0)
        elif self.family == "mixture_with_point_mass_at_zero":
            p0 = self.point_mass_at_zero
            base = self.params["base"]
            out = np.where(x >= 0.0, p0 + (1.0 - p0) * base.cdf(x), 0.0)
        else:  # user_table
            values = np.asarray(self.params["values"])
            probs = np.asarray(self.params["probs"])
            cum = np.concatenate([[0.0], np.cumsum(probs)])
            idx = np.searchsorted(values, x, side="right")
            out = cum[idx]
        return out if out.shape else float(out)

    def quantile(self, u):
        """Generalized inverse CDF (right-continuous), vectorized."""
        u = np.asarray(u, dtype=float)
        if ((u < 0) | (u > 1)).any():
            raise ValueError("quantile argument must lie in [0, 1]")
        if self.family == "pareto":
            out = np.power(1.0 - u, -1.0 / self.alpha)
        elif self.family == "deterministic_point":
            out = np.full(u.shape, self.params["value"], dtype=float)
        elif self.family == "lognormal":
            mu, sigma = self.params["mu"], self.params["sigma"]
            uu = np.clip(u, 1e-300, 1.0 - 1e-16)
            out = np.exp(mu + sigma * ndtri(uu))
        elif self.family == "mixture_with_point_mass_at_zero":
            p0 = self.point_mass_at_zero
            base = self.params["base"]
            # mass [0, p0) -> 0; remainder maps through the base quantile
            scaled = np.clip((u - p0) / (1.0 - p0), 0.0, 1.0) if p0 < 1.0 else np.zeros_like(u)
            out = np.where(u < p0, 0.0, base.quantile(scaled))
        else:  # user_table
            values = np.asarray(self.params["values"])
            probs = np.asarray(self.params["probs"])
            cum = np.cumsum(probs)
            idx = np.minimum(np.searchsorted(cum, u, side="left"), values.size - 1)
            out = values[idx]
        return out if out.shape else float(out)

    # -- closed-form moments ---------------------------------------------

    def mean_log(self) -> float | None:
        """E[log X] when available in closed form, else None.

        Laws with an atom at zero return None (the atom is handled by the
        transience classification, not through the log-moment).
        """
        if self.point_mass_at_zero > 0:
            return None
        if self.family == "pareto":
            return 1.0 / self.alpha
        if self.family == "deterministic_point":
            return math.log(self.params["value"])
        if self.family == "lognormal":
            return float(self.params["mu"])
        if self.family == "user_table":
            values = np.asarray(self.params["values"])
            probs = np.asarray(self.params["probs"])
            return float((probs * np.log(values)).sum())
        return None

    def moment(self, power: float) -> float | None:
        """E[X^power] when available in closed form, else None."""
        if power <= 0:
            raise ValueError("power must be positive")
        if self.family == "pareto":
            a = self.alpha
            return a / (a - power) if power < a else math.inf
        if self.family == "deterministic_point":
            return float(self.params["value"] ** power)
        if self.family == "lognormal":
            mu, sigma = self.params["mu"], self.params["sigma"]
            return math.exp(mu * power + 0.5 * (sigma * power) ** 2)
        if self.family == "mixture_with_point_mass_at_zero":
            base = self.params["base"].moment(power)
            return None if base is None else (1.0 - self.point_mass_at_zero) * base
        if self.family == "user_table":
            values = np.asarray(self.params["values"])
            probs = np.asarray(self.params["probs"])
            return float((probs * values**power).sum())
        return None

    def mass_at(self, x):
        """P[X = x], vectorized (zero for continuous families)."""
        x = np.asarray(x, dtype=float)
        if self.family == "deterministic_point":
            out = np.where(x == self.params["value"], 1.0, 0.0)
        elif self.family == "mixture_with_point_mass_at_zero":
            p0 = self.point_mass_at_zero
            out = np.where(x == 0.0, p0, 0.0) + (1.0 - p0) * self.params["base"].mass_at(x)
        elif self.family == "user_table":
            values = np.asarray(self.params["values"])
            probs = np.asarray(self.params["probs"])
            out = np.zeros(x.shape)
            for v, p in zip(values, probs):
                out = out + np.where(x == v, p, 0.0)
        else:
            out = np.zeros(x.shape)
        return out if out.shape else float(out)

    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        """Locations and masses of the law's atoms (empty for continuous)."""
        if self.family == "deterministic_point":
            return np.array([self.params["value"]]), np.array([1.0])
        if self.family == "mixture_with_point_mass_at_zero":
            p0 = self.point_mass_at_zero
            pts, mass = self.params["base"].atoms()
            return np.concatenate([[0.0], pts]), np.concatenate([[p0], (1 - p0) * mass])
        if self.family == "user_table":
            return (
                np.asarray(self.params["values"], dtype=float),
                np.asarray(self.params["probs"], dtype=float),
            )
        return np.empty(0), np.empty(0)

    def upper_bound(self) -> float:
        """Essential supremum of the law (``inf`` for unbounded support)."""
        if self.family == "deterministic_point":
            return float(self.params["value"])
        if self.family == "mixture_with_point_mass_at_zero":
            return self.params["base"].upper_bound()
        if self.family == "user_table":
            return float(np.asarray(self.params["values"])[-1])
        return math.inf

    def deterministic_value(self) -> float | None:
        """The point of support for a degenerate law, else None."""
        if self.family == "deterministic_point":
            return float(self.params["value"])
        if self.family == "user_table":
            probs = np.asarray(self.params["probs"])
            if (probs == 1.0).any():
                return float(np.asarray(self.params["values"])[probs == 1.0][0])
        return None

    def survival_part(self) -> "TailDistribution":
        """The law conditioned on X > 0 (identity when there is no atom)."""
        if self.family == "mixture_with_point_mass_at_zero":
            return self.params["base"]
        if self.point_mass_at_zero > 0:
            raise ValueError("law is concentrated at zero")
        return self

    # -- serialization ----------------------------------------------------

    def to_json(self) -> dict[str, Any]:
        params: dict[str, Any] = dict(self.params)
        if self.family == "mixture_with_point_mass_at_zero":
            params["base"] = self.params["base"].to_json()
        doc: dict[str, Any] = {"spec_version": SPEC_VERSION, "family": self.family, "params": params}
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        if self.point_mass_at_zero:
            doc["point_mass_at_zero"] = self.point_mass_at_zero
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "TailDistribution":
        if not isinstance(doc, dict) or "family" not in doc:
            raise ValueError("distribution spec must be an object with a 'family' key")
        version = doc.get("spec_version", SPEC_VERSION)
        if version != SPEC_VERSION:
            raise ValueError(f"unsupported spec_version {version}")
        params = dict(doc.get("params", {}))
        if doc["family"] == "mixture_with_point_mass_at_zero" and "base" in params:
            params["base"] = cls.from_json(params["base"])
        return cls(
            family=doc["family"],
            alpha=doc.get("alpha"),
            params=params,
            point_mass_at_zero=doc.get("point_mass_at_zero", 0.0),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


# -- convenience constructors --------------------------------------------


def pareto(alpha: float) -> TailDistribution:
    return TailDistribution("pareto", alpha=alpha)


def point(value: float) -> TailDistribution:
    return TailDistribution("deterministic_point", params={"value": float(value)})


def lognormal(mu: float, sigma: float) -> TailDistribution:
    return TailDistribution("lognormal", params={"mu": float(mu), "sigma": float(sigma)})


def mixture_at_zero(p0: float, base: TailDistribution) -> TailDistribution:
    return TailDistribution(
        "mixture_with_point_mass_at_zero", alpha=base.alpha,
        params={"base": base}, point_mass_at_zero=float(p0),
    )


def user_table(values, probs) -> TailDistribution:
    return TailDistribution("user_table", params={"values": list(values), "probs": list(probs)})


def sample(dist: TailDistribution, rng: np.random.Generator, size: int | None = None):
    """Functional form of :meth:`TailDistribution.sample`."""
    return dist.sample(rng, size)


@dataclass(frozen=True)
class ScalingFunction:
    """The normalizing function b(t): the (1 - 1/t)-quantile of a return law.

    ``analytic_quantile`` is exact for the standard Pareto family
    (b(t) = t**(1/alpha)); ``empirical_quantile`` interpolates the quantile
    of a stored pilot sample.
    """

    kind: str
    alpha: float | None = None
    sample: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind == "analytic_quantile":
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("analytic_quantile requires alpha > 0")
        elif self.kind == "empirical_quantile":
            if self.sample is None or len(self.sample) < 2:
                raise ValueError("empirical_quantile requires a pilot sample")
            object.__setattr__(self, "sample", np.sort(np.asarray(self.sample, dtype=float)))
        else:
            raise ValueError(f"unknown scaling kind {self.kind!r}")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if (t <= 1.0).any():
            raise ValueError("scaling function defined for t > 1")
        if self.kind == "analytic_quantile":
            out = np.power(t, 1.0 / self.alpha)
        else:
            out = np.quantile(self.sample, 1.0 - 1.0 / t)
        return out if out.shape else float(out)

    @classmethod
    def analytic(cls, alpha: float) -> "ScalingFunction":
        return cls("analytic_quantile", alpha=alpha)

    @classmethod
    def from_pilot(
        cls, dist: TailDistribution, rng: np.random.Generator, n: int = 10**6
    ) -> "ScalingFunction":
        return cls("empirical_quantile", sample=dist.sample(rng, n))
