import numpy as np
import pytest

from lrcc import ObservationSet, ProblemSpec, WeightedGraph, gaussian_weights, knn_graph
from lrcc.rng import make_rng, normal


@pytest.fixture
def rng():
    return make_rng(20240817)


def random_observations(rng, n, d1, d2, scale=1.0):
    return ObservationSet(scale * normal(rng, (n, d1, d2)))


def random_problem(rng, n=8, d1=5, d2=3, k=3, gamma1=0.3, gamma2=0.2, kernel=0.5):
    obs = random_observations(rng, n, d1, d2)
    graph = knn_graph(obs, min(k, n - 1))
    if kernel is not None:
        graph = gaussian_weights(obs, graph, kernel)
    return ProblemSpec.from_observations(obs, graph, gamma1, gamma2)


def single_node_graph():
    return WeightedGraph(1, np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))


def edgeless_graph(n):
    return WeightedGraph(n, np.zeros(0, dtype=int), np.zeros(0, dtype=int), np.zeros(0))
