"""Strategy construction: initial pairs, deviation families and enumeration.

Everything here is deterministic given the seed, so a run file fully
determines which strategies a Nash iteration starts from and which
deviations a test tries.
"""

from itertools import product
from typing import List, Tuple

import numpy as np

from errors import ConfigError
from models import StrategyField

INIT_KINDS = ("uniform", "dirac", "random")
DEVIATION_CAP = 64
ENUMERATION_CAP = 4096


def initial_pair(
    kind: str, n_nodes: int, n_actions: Tuple[int, int], seed: int = 0
) -> Tuple[StrategyField, StrategyField]:
    """Stationary starting pair for fictitious play.

    ``uniform`` spreads mass evenly, ``dirac`` plays action 0 everywhere and
    ``random`` draws node-wise weights from a flat Dirichlet law.
    """
    if kind not in INIT_KINDS:
        raise ConfigError(
            f"unknown initial strategy {kind!r} "
            f"(expected one of {', '.join(INIT_KINDS)})",
            "solver.init",
        )
    rng = np.random.default_rng(seed)
    fields = []
    for player, m in zip((1, 2), n_actions):
        if kind == "uniform":
            fields.append(StrategyField.uniform(n_nodes, m, player))
        elif kind == "dirac":
            fields.append(StrategyField.dirac(np.zeros(n_nodes, dtype=int), m, player))
        else:
            fields.append(StrategyField(rng.dirichlet(np.ones(m), size=n_nodes), player))
    return fields[0], fields[1]


def constant_pure(n_nodes: int, n_actions: int, player: int) -> List[StrategyField]:
    """One strategy per pure action, played at every node."""
    return [
        StrategyField.dirac(np.full(n_nodes, u, dtype=int), n_actions, player)
        for u in range(n_actions)
    ]


def enumerate_pure_stationary(
    n_nodes: int, n_actions: int, cap: int = ENUMERATION_CAP
) -> np.ndarray:
    """All pure stationary selectors as an (n_actions ** n_nodes, n_nodes) array."""
    total = n_actions**n_nodes
    if total > cap:
        raise ConfigError(
            f"{n_actions}^{n_nodes} = {total} pure strategies exceed the cap of {cap}"
        )
    return np.array(list(product(range(n_actions), repeat=n_nodes)), dtype=int)


def sampled_pure(
    n_nodes: int, n_actions: int, player: int, count: int, seed: int = 0
) -> List[StrategyField]:
    """Up to ``count`` distinct non-constant pure stationary strategies."""
    if n_actions == 1:
        return []
    total = n_actions**n_nodes
    if total <= count + n_actions:
        selectors = [
            s
            for s in enumerate_pure_stationary(n_nodes, n_actions, total)
            if np.unique(s).size > 1
        ]
    else:
        rng = np.random.default_rng([seed, player])
        seen = set()
        selectors = []
        while len(selectors) < count:
            s = rng.integers(0, n_actions, size=n_nodes)
            key = s.tobytes()
            if key in seen or np.unique(s).size == 1:
                continue
            seen.add(key)
            selectors.append(s)
    return [StrategyField.dirac(s, n_actions, player) for s in selectors]


def pure_deviations(
    n_nodes: int,
    n_actions: Tuple[int, int],
    cap: int = DEVIATION_CAP,
    seed: int = 0,
) -> List[StrategyField]:
    """Constant pure strategies plus at most ``cap`` sampled ones per player."""
    deviations = []
    for player, m in zip((1, 2), n_actions):
        deviations.extend(constant_pure(n_nodes, m, player))
        deviations.extend(sampled_pure(n_nodes, m, player, cap, seed))
    return deviations
