"""Link functions mapping probabilities onto the linear-predictor scale."""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy import special

from .errors import DomainError, ValidationError


class Collapsibility(str, Enum):
    COLLAPSIBLE = "collapsible"
    NON_COLLAPSIBLE = "non_collapsible"


def _check_probability(p, lower_open: bool, upper_open: bool, name: str):
    p = np.asarray(p, dtype=float)
    bad = ~np.isfinite(p)
    bad |= (p <= 0.0) if lower_open else (p < 0.0)
    bad |= (p >= 1.0) if upper_open else (p > 1.0)
    if np.any(bad):
        first = p[bad].flat[0] if p.ndim else float(p)
        lo = "(" if lower_open else "["
        hi = ")" if upper_open else "]"
        raise DomainError(f"{name} link is undefined at probability {first!r}; domain is {lo}0, 1{hi}")
    return p


def _unwrap(x):
    return float(x) if np.ndim(x) == 0 else x


class LinkFunction(str, Enum):
    """A monotone link g with ``forward`` = g and ``inverse`` = g^-1.

    Both directions are vectorised over numpy arrays and return a Python
    float for scalar input. Probabilities where g is unbounded (exactly 0 or
    1 for logit/probit/cloglog, 0 for log) raise :class:`DomainError`; they
    are never clamped.
    """

    LOGIT = "logit"
    PROBIT = "probit"
    LOG = "log"
    IDENTITY = "identity"
    CLOGLOG = "cloglog"

    def forward(self, p):
        if self is LinkFunction.LOGIT:
            return _unwrap(special.logit(_check_probability(p, True, True, "logit")))
        if self is LinkFunction.PROBIT:
            return _unwrap(special.ndtri(_check_probability(p, True, True, "probit")))
        if self is LinkFunction.CLOGLOG:
            p = _check_probability(p, True, True, "cloglog")
            return _unwrap(np.log(-np.log1p(-p)))
        if self is LinkFunction.LOG:
            return _unwrap(np.log(_check_probability(p, True, False, "log")))
        return _unwrap(_check_probability(p, False, False, "identity") + 0.0)

    def inverse(self, eta):
        eta = np.asarray(eta, dtype=float)
        if not np.all(np.isfinite(eta)):
            raise DomainError("linear predictor is not finite")
        if self is LinkFunction.LOGIT:
            return _unwrap(special.expit(eta))
        if self is LinkFunction.PROBIT:
            return _unwrap(special.ndtr(eta))
        if self is LinkFunction.CLOGLOG:
            return _unwrap(-np.expm1(-np.exp(eta)))
        if self is LinkFunction.LOG:
            if np.any(eta > 0.0):
                raise DomainError(
                    f"log link maps linear predictor {float(np.max(eta))!r} to a probability above 1"
                )
            return _unwrap(np.exp(eta))
        if np.any((eta < 0.0) | (eta > 1.0)):
            worst = eta[(eta < 0.0) | (eta > 1.0)].flat[0] if eta.ndim else float(eta)
            raise DomainError(f"identity link gives probability {worst!r} outside [0, 1]")
        return _unwrap(eta + 0.0)

    @property
    def collapsibility(self) -> Collapsibility:
        return classify_collapsibility(self)


def classify_collapsibility(link: LinkFunction | str) -> Collapsibility:
    """Whether effects on this link's scale are collapsible.

    Identity and log links give a characteristic collapsibility function that
    is linear in the probability; logit, probit and cloglog do not.
    """
    try:
        link = LinkFunction(link)
    except ValueError:
        raise ValidationError(f"unknown link function {link!r}", path="model.link") from None
    if link in (LinkFunction.IDENTITY, LinkFunction.LOG):
        return Collapsibility.COLLAPSIBLE
    return Collapsibility.NON_COLLAPSIBLE
