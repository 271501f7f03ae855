"""Bundled datasets, generated deterministically.

``tic_tac_toe`` is the complete set of 958 legal end-of-game boards. The
others are synthetic stand-ins shaped like benchmark tables: a car-evaluation
style full factorial, a dresses-sales style table with heavy missingness,
and planted mixed-type tables whose best preprocessing differs per feature.
"""
from __future__ import annotations

import itertools

import numpy as np

from .tabular import CategoricalColumn, Table, make_column

_LINES = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]


def _winner(board) -> str | None:
    for a, b, c in _LINES:
        if board[a] != "b" and board[a] == board[b] == board[c]:
            return board[a]
    return None


def tic_tac_toe() -> Table:
    """All terminal boards reachable with x moving first; positive iff x wins."""
    terminal = set()

    def play(board, player):
        if _winner(board) or "b" not in board:
            terminal.add(tuple(board))
            return
        for i in range(9):
            if board[i] == "b":
                board[i] = player
                play(board, "o" if player == "x" else "x")
                board[i] = "b"

    play(["b"] * 9, "x")
    boards = sorted(terminal)
    names = ["top-left", "top-middle", "top-right", "middle-left", "middle-middle",
             "middle-right", "bottom-left", "bottom-middle", "bottom-right"]
    cols = tuple(make_column(n, [b[i] for b in boards]) for i, n in enumerate(names))
    labels = ["positive" if _winner(b) == "x" else "negative" for b in boards]
    return Table(cols, CategoricalColumn.from_labels("Class", labels))


def car_style() -> Table:
    """Full factorial over six ordinal car attributes with a rule-based acceptability class."""
    levels = {
        "buying": ["vhigh", "high", "med", "low"],
        "maint": ["vhigh", "high", "med", "low"],
        "doors": ["2", "3", "4", "5more"],
        "persons": ["2", "4", "more"],
        "lug_boot": ["small", "med", "big"],
        "safety": ["low", "med", "high"],
    }
    rows = list(itertools.product(*levels.values()))
    labels = []
    for buying, maint, doors, persons, lug, safety in rows:
        price = levels["buying"].index(buying) + levels["maint"].index(maint)
        comfort = min(levels["doors"].index(doors), 2) + levels["persons"].index(persons) + levels["lug_boot"].index(lug)
        if persons == "2" or safety == "low" or (buying == "vhigh" and maint in ("vhigh", "high")):
            labels.append("unacc")
            continue
        score = price + 0.5 * comfort + 2 * levels["safety"].index(safety)
        if score < 5:
            labels.append("unacc")
        elif score < 7.5:
            labels.append("acc")
        elif score < 9:
            labels.append("good")
        else:
            labels.append("vgood")
    cols = tuple(make_column(n, [r[i] for r in rows]) for i, n in enumerate(levels))
    return Table(cols, CategoricalColumn.from_labels("class", labels))


def _with_missing(values: list, mask: np.ndarray) -> list:
    return [None if m else v for v, m in zip(values, mask)]


def planted_mixed(n_rows: int = 600, seed: int = 0, n_noise: int = 4) -> Table:
    """Mixed-type table where several features reward non-default preprocessing.

    * ``gap``: numeric, 35% missing, and missingness itself predicts the class
      (imputing hides it; encoding keeps missing as its own category).
    * ``tier``: text, 30% missing, missingness predictive.
    * ``dial``: numeric with 9 levels and a non-monotone effect (one-hot helps
      linear learners).
    * ``spike``: heavy-tailed numeric whose rank carries the signal.
    * ``colour``, ``size``: informative text columns.
    * ``noise*``: uninformative numeric/text columns.
    """
    rng = np.random.default_rng(seed)
    n = n_rows
    gap_missing = rng.random(n) < 0.35
    gap = rng.normal(0, 1, n)
    tier_missing = rng.random(n) < 0.30
    tier = rng.choice(["bronze", "silver", "gold"], size=n)
    dial = rng.integers(0, 9, n)
    spike = rng.standard_cauchy(n)
    colour = rng.choice(["red", "green", "blue", "black"], size=n)
    size = rng.choice(["S", "M", "L"], size=n)

    logit = (
        2.2 * np.where(gap_missing, 1.0, -0.6)
        + np.where(gap_missing, 0.0, 0.8 * gap)
        + 1.6 * np.where(tier_missing, 1.0, -0.5)
        + np.where(tier_missing, 0.0, np.select([tier == "gold", tier == "silver"], [0.6, 0.0], -0.6))
        + 1.5 * np.where(np.isin(dial, [3, 4, 5]), 1.0, -0.5)
        + 1.2 * np.tanh(spike)
        + np.select([colour == "red", colour == "blue"], [0.9, -0.9], 0.0)
        + np.where(size == "L", 0.5, -0.25)
    )
    y = (logit + rng.logistic(0, 0.7, n)) > 0.4

    cols = [
        make_column("gap", _with_missing(list(np.round(gap, 3)), gap_missing)),
        make_column("tier", _with_missing(list(tier), tier_missing)),
        make_column("dial", [float(v) for v in dial]),
        make_column("spike", list(np.round(spike, 4))),
        make_column("colour", list(colour)),
        make_column("size", list(size)),
    ]
    for i in range(n_noise):
        if i % 2 == 0:
            cols.append(make_column(f"noise{i}", list(np.round(rng.normal(0, 3, n), 3))))
        else:
            cols.append(make_column(f"noise{i}", list(rng.choice(["p", "q", "r", "s", "t"], size=n))))
    labels = ["yes" if v else "no" for v in y]
    return Table(tuple(cols), CategoricalColumn.from_labels("label", labels))


def planted_oracle(n_rows: int = 200, seed: int = 0) -> Table:
    """Three-feature table small enough to brute-force every per-feature pipeline."""
    rng = np.random.default_rng(seed)
    n = n_rows
    a_missing = rng.random(n) < 0.3
    a = rng.normal(0, 1, n)
    b_missing = rng.random(n) < 0.25
    b = rng.choice(["u", "v", "w"], size=n)
    c = rng.integers(0, 6, n)
    logit = (
        2.0 * np.where(a_missing, 1.0, -0.4)
        + np.where(a_missing, 0.0, a)
        + 1.5 * np.where(b_missing, -1.0, np.where(b == "u", 0.8, -0.2))
        + 1.2 * np.where(np.isin(c, [2, 3]), 1.0, -0.5)
    )
    y = (logit + rng.logistic(0, 0.5, n)) > 0
    cols = (
        make_column("a", _with_missing(list(np.round(a, 3)), a_missing)),
        make_column("b", _with_missing(list(b), b_missing)),
        make_column("c", [float(v) for v in c]),
    )
    return Table(cols, CategoricalColumn.from_labels("y", ["1" if v else "0" for v in y]))


def dresses_like(seed: int = 0) -> Table:
    """500 x 13 table (12 features, one numeric) with exactly 835 missing cells."""
    rng = np.random.default_rng(seed)
    n = 500
    specs = [
        ("Style", ["Casual", "Sexy", "party", "cute", "vintage", "bohemian", "Brief", "work"]),
        ("Price", ["Low", "Average", "Medium", "High", "very-high"]),
        ("Size", ["S", "M", "L", "XL", "free"]),
        ("Season", ["Summer", "Autumn", "Winter", "Spring"]),
        ("NeckLine", ["o-neck", "v-neck", "boat-neck", "slash-neck", "turndowncollor", "sweetheart"]),
        ("SleeveLength", ["sleevless", "short", "full", "halfsleeve", "threequarter", "cap-sleeves"]),
        ("waiseline", ["empire", "natural", "dropped", "princess"]),
        ("Material", ["cotton", "polyster", "silk", "chiffonfabric", "microfiber", "nylon", "rayon", "linen"]),
        ("FabricType", ["chiffon", "broadcloth", "jersey", "satin", "worsted", "knitted", "lace"]),
        ("Decoration", ["ruffles", "lace", "sashes", "beading", "bow", "applique", "embroidary", "button"]),
        ("Pattern Type", ["solid", "print", "patchwork", "animal", "dot", "striped", "floral"]),
    ]
    raw = {name: rng.choice(levels, size=n) for name, levels in specs}
    rating = np.round(rng.uniform(0, 5, n) * (rng.random(n) > 0.2), 1)
    # 835 missing cells spread over the columns that are missing-prone in the original
    weights = {"Price": 2, "Season": 2, "NeckLine": 3, "waiseline": 87, "Material": 128, "FabricType": 266,
               "Decoration": 236, "Pattern Type": 109, "Size": 2}
    missing = {name: np.zeros(n, dtype=bool) for name, _ in specs}
    for name, count in weights.items():
        missing[name][rng.choice(n, size=count, replace=False)] = True
    assert sum(weights.values()) == 835
    signal = (
        np.isin(raw["Style"], ["Casual", "cute"]).astype(float)
        + 0.8 * np.isin(raw["Price"], ["Low", "Average"])
        + 0.7 * missing["Decoration"]
        + 0.3 * rating
        - 0.8 * np.isin(raw["Season"], ["Winter"])
    )
    y = (signal + rng.normal(0, 0.9, n)) > 1.6
    cols = [make_column("Rating", list(rating))]
    for name, _ in specs:
        cols.append(make_column(name, _with_missing(list(raw[name]), missing[name])))
    return Table(tuple(cols), CategoricalColumn.from_labels("Class", ["1" if v else "0" for v in y]))


def wide_mixed(n_features: int = 38, n_rows: int = 300, seed: int = 0) -> Table:
    """Wide table cycling through continuous, text and missing-prone integer columns."""
    rng = np.random.default_rng(seed)
    cols = []
    for j in range(n_features):
        if j % 3 == 0:
            cols.append(make_column(f"f{j}", list(np.round(rng.normal(0, 1, n_rows), 2))))
        elif j % 3 == 1:
            cols.append(make_column(f"f{j}", list(rng.choice(list("abcdef")[: 2 + j % 5], n_rows))))
        else:
            vals = rng.integers(0, 4 + j % 7, n_rows).astype(float)
            cols.append(make_column(f"f{j}", [None if rng.random() < 0.1 else v for v in vals]))
    labels = list(rng.choice(["p", "q"], n_rows))
    return Table(tuple(cols), CategoricalColumn.from_labels("y", labels))


BUNDLED = {
    "tic-tac-toe": tic_tac_toe,
    "car-style": car_style,
    "planted-mixed": planted_mixed,
    "planted-oracle": planted_oracle,
    "dresses-like": dresses_like,
    "wide-mixed": wide_mixed,
}
