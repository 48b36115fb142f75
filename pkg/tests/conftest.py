from __future__ import annotations

import functools
from dataclasses import dataclass

import pytest

from crnspace.cascade import IrreducibleResult, find_irreducible
from crnspace.decomposition import DecomposedStateSpace, find_decomposed_state_space
from crnspace.io import NetworkFile, load_corpus
from crnspace.reduction import ReducedNetwork, reduce_network


@dataclass(eq=False)
class Analysis:
    nf: NetworkFile
    dss: DecomposedStateSpace
    reduced: ReducedNetwork
    result: IrreducibleResult


@functools.lru_cache(maxsize=None)
def analyse(name: str, x0: tuple[int, ...] | None = None) -> Analysis:
    nf = load_corpus(name)
    if x0 is not None:
        nf = NetworkFile(nf.network, x0, nf.fast, nf.slow, nf.balanced_r, nf.path)
    dss = find_decomposed_state_space(nf.network, nf.x0)
    reduced = reduce_network(dss)
    res = find_irreducible(reduced, dss.bounded_space.states)
    return Analysis(nf, dss, reduced, res)


@pytest.fixture
def analysis():
    return analyse
