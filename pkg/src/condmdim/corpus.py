"""Bundled grid maps for the waist checks."""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .waist import GridMap


def projection(n: int, m: int, q: int) -> GridMap:
    return GridMap.from_function(n, m, q, lambda x: x[:m], name=f"projection_{n}_{m}")


def identity(n: int, q: int) -> GridMap:
    return GridMap.from_function(n, n, q, lambda x: x, name=f"identity_{n}")


def constant(n: int, q: int, value=Fraction(1, 3)) -> GridMap:
    return GridMap.from_function(n, 1, q, lambda x: (Fraction(value),), name=f"constant_{n}")


def saddle(q: int) -> GridMap:
    """``(x, y) -> x^2 - y^2`` on the unit square."""
    return GridMap.from_function(2, 1, q, lambda x: (x[0] ** 2 - x[1] ** 2,), name="saddle")


def corpus(q: int) -> list[GridMap]:
    return [
        projection(2, 1, q),
        projection(3, 1, q),
        projection(3, 2, q),
        identity(1, q),
        identity(2, q),
        constant(2, q),
        constant(3, q),
        saddle(q),
    ]


def write_corpus(directory, q: int = 4) -> list[Path]:
    out = []
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for g in corpus(q):
        path = d / f"{g.name}.json"
        path.write_text(json.dumps(g.to_json(), sort_keys=True) + "\n")
        out.append(path)
    return out
