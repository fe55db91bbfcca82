"""Scheme lookup by identifier."""

from __future__ import annotations

from .base import Scheme
from .output_feedback import BcMatScheme, IC3OutputFeedbackScheme, XOutputFeedbackScheme
from .retro_csit_ic3 import IC3RetroCsitScheme
from .retro_csit_x import XRetroCsitScheme

__all__ = ["SCHEMES", "get_scheme"]

SCHEMES: dict[str, Scheme] = {
    scheme.scheme_id: scheme
    for scheme in (
        BcMatScheme(),
        XRetroCsitScheme(),
        IC3RetroCsitScheme(),
        XOutputFeedbackScheme(),
        IC3OutputFeedbackScheme(),
    )
}


def get_scheme(scheme_id: str) -> Scheme:
    try:
        return SCHEMES[scheme_id]
    except KeyError:
        known = ", ".join(sorted(SCHEMES))
        raise ValueError(f"unknown scheme {scheme_id!r}; known schemes: {known}") from None
