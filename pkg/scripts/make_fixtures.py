"""Regenerate the JSON system files in tests/fixtures from exact constructions."""
from __future__ import annotations

import argparse
import json
import warnings
from pathlib import Path

from gmpy2 import mpq

from nfforge.cli import serialize_system
from nfforge.integrability import IntegrableSystem
from nfforge.series import PolyMap, TruncatedSeries, VectorFieldJet, compose_series, invert_map, pushforward

HERE = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def poly(n, order, terms):
    return TruncatedSeries(n, order, {tuple(e): mpq(c) for e, c in terms.items()})


def hyperbolic2d(order=6):
    X1 = VectorFieldJet.from_matrix([[1, 0], [0, -1]], order)
    return X1.times(poly(2, order, {(0, 0): 1, (1, 1): 1})), [poly(2, order, {(1, 1): 1})], {}


def elliptic2d(order=6):
    X1 = VectorFieldJet.from_matrix([[0, -1], [1, 0]], order)
    u = poly(2, order, {(2, 0): 1, (0, 2): 1})
    return X1.times(poly(2, order, {(0, 0): 1, (2, 0): 1, (0, 2): 1})), [u], {}


def hyperbolic3d(order=6):
    X1 = VectorFieldJet.from_matrix([[1, 0, 0], [0, 1, 0], [0, 0, -2]], order)
    F = poly(3, order, {(0, 0, 0): 1, (1, 1, 1): 1})
    Fs = [poly(3, order, {(2, 0, 1): 1}), poly(3, order, {(1, 1, 1): 1})]
    return X1.times(F), Fs, {}


def weak3d(order=6):
    z = TruncatedSeries.zero(3, order)
    X = VectorFieldJet([z, poly(3, order, {(0, 1, 0): 1, (2, 0, 0): -1}), poly(3, order, {(0, 0, 1): -1})])
    Fs = [poly(3, order, {(1, 0, 0): 1}), poly(3, order, {(0, 1, 1): 1, (2, 0, 1): -1})]
    return X, Fs, {}


def weak2d(order=12):
    """``(1 + y) x d/dx`` pushed forward by a fixed near-identity polynomial map."""
    base = VectorFieldJet([poly(2, order, {(1, 0): 1, (1, 1): 1}), TruncatedSeries.zero(2, order)])
    psi = PolyMap([poly(2, order, {(1, 0): 1, (0, 2): mpq(1, 2), (1, 1): mpq(-1, 3), (0, 3): 1}),
                   poly(2, order, {(0, 1): 1, (1, 1): mpq(1, 4), (2, 0): mpq(-1, 2)})])
    X = pushforward(base, psi)
    F = compose_series(poly(2, order, {(0, 1): 1}), invert_map(psi))
    return X, [F], {"x0": [0.001, 0.01]}


def obstruction(order=6):
    X = VectorFieldJet.from_matrix([[1, 0], [0, -1]], order,
                                   [poly(2, order, {(2, 1): 1}), poly(2, order, {(1, 2): 2})])
    return X, [poly(2, order, {(1, 1): 1})], {}


def violating(order=4):
    X1 = VectorFieldJet.from_matrix([[0, -1], [1, 0]], order)
    return X1, [poly(2, order, {(1, 0): 1})], {}


def nonsemisimple(order=4):
    X = VectorFieldJet.from_matrix([[1, 1, 0], [0, 1, 0], [0, 0, -2]], order)
    return X, [poly(3, order, {(2, 0, 1): 1}), poly(3, order, {(1, 1, 1): 1})], {}


BUILDERS = {
    "hyperbolic2d": hyperbolic2d,
    "elliptic2d": elliptic2d,
    "hyperbolic3d": hyperbolic3d,
    "weak3d": weak3d,
    "weak2d": weak2d,
    "obstruction": obstruction,
    "violating_integral": violating,
    "nonsemisimple": nonsemisimple,
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(HERE))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in BUILDERS.items():
        X, Fs, numeric = build()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            system = IntegrableSystem(X, tuple(Fs))
        data = serialize_system(system, numeric)
        (out / f"{name}.json").write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")
        print(f"{name}: order {X.order}, integrable={system.integrable}")
    bad = json.loads((out / "hyperbolic2d.json").read_text())
    bad["higher_order"][0][0]["coeff_re"] = "1/0"
    (out / "bad_rational.json").write_text(json.dumps(bad, indent=1) + "\n", encoding="utf-8")
    print("bad_rational: written")


if __name__ == "__main__":
    main()
