"""Run settings for the numeric stage, filled from a system file's ``numeric`` section."""
from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass(frozen=True)
class NumericConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    x0: tuple | None = None
    x0_radius: float = 0.01
    periods: float = 5.0  # conservation horizon in characteristic times
    conservation_tol: float = 1e-6
    conjugacy_radii: tuple = (1e-1, 3e-2, 1e-2, 3e-3)
    period_radii: tuple = (0.1, 0.05, 0.025, 0.0125)
    samples: int = 8
    p: float = 4.0
    locus_points: int = 21
    locus_halfwidth: float = 0.1
    locus_gap_tol: float = 1e-6
    locus_norm_tol: float = 1e-8
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, data: dict | None) -> "NumericConfig":
        data = dict(data or {})
        known = {f.name for f in fields(cls)} - {"extra"}
        kw = {}
        for k in list(data):
            if k in known:
                v = data.pop(k)
                kw[k] = tuple(v) if isinstance(v, list) else v
        return cls(**kw, extra=data)
