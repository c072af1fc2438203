"""Loop-based reference implementations, written independently of the
vectorized library code, used to freeze expected values in the tests."""
import itertools

import numpy as np


def edge_list(graph):
    return [(int(x), int(y), float(c)) for (x, y), c in zip(graph.edges, graph.conductance)]


def neighbours(graph):
    nb = {v: [] for v in range(graph.n_vertices)}
    for x, y, c in edge_list(graph):
        nb[x].append((y, c))
        nb[y].append((x, c))
    return nb


def energy(graph, f, g):
    return sum(c * (f[x] - f[y]) * (g[x] - g[y]) for x, y, c in edge_list(graph))


def gamma(graph, g, h):
    nb = neighbours(graph)
    return np.array(
        [0.5 * sum(c * (g[x] - g[y]) * (h[x] - h[y]) for y, c in nb[x]) for x in range(graph.n_vertices)]
    )


def generator(graph, m, f):
    nb = neighbours(graph)
    return np.array([sum(c * (f[y] - f[x]) for y, c in nb[x]) / m[x] for x in range(graph.n_vertices)])


def generator_dense(graph, m):
    n = graph.n_vertices
    A = np.zeros((n, n))
    for x, y, c in edge_list(graph):
        A[x, y] += c / m[x]
        A[y, x] += c / m[y]
        A[x, x] -= c / m[x]
        A[y, y] -= c / m[y]
    return A


def laplacian_dense(graph):
    n = graph.n_vertices
    L = np.zeros((n, n))
    for x, y, c in edge_list(graph):
        L[x, x] += c
        L[y, y] += c
        L[x, y] -= c
        L[y, x] -= c
    return L


def pairing_dense(graph, m, w):
    """Matrix P with (P v)(x) = (2 m(x))^-1 sum_y c_xy w(x,y) v(x,y), v given on canonical edges."""
    P = np.zeros((graph.n_vertices, graph.n_edges))
    for e, (x, y, c) in enumerate(edge_list(graph)):
        P[x, e] += c * w[e] / (2 * m[x])
        P[y, e] += c * w[e] / (2 * m[y])
    return P


def incidence_dense(graph):
    D = np.zeros((graph.n_edges, graph.n_vertices))
    for e, (x, y, _) in enumerate(edge_list(graph)):
        D[e, x] = -1.0
        D[e, y] = 1.0
    return D


def min_energy_extension(L, boundary, values):
    """Minimize u^T L u over interior values by solving the normal equations."""
    n = L.shape[0]
    interior = [v for v in range(n) if v not in boundary]
    u = np.zeros(n)
    u[list(boundary)] = values
    if interior:
        u[interior] = np.linalg.solve(L[np.ix_(interior, interior)], -L[np.ix_(interior, boundary)] @ values)
    return u


def gasket_level1_unit_laplacian():
    """Level-1 gasket drawn by hand: corners 0,1,2 and midpoints a=01, b=12, c=02 as 3,4,5."""
    tri = [(0, 3, 5), (3, 1, 4), (5, 4, 2)]
    L = np.zeros((6, 6))
    for cell in tri:
        for x, y in itertools.combinations(cell, 2):
            L[x, x] += 1
            L[y, y] += 1
            L[x, y] -= 1
            L[y, x] -= 1
    return L
