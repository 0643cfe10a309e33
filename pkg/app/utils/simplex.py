import numpy as np


def project_simplex(v) -> np.ndarray:
    """
    Euclidean projection of v onto the probability simplex {x >= 0, sum x = 1}.

    Non-iterative sort-and-threshold method: with u sorted descending, the threshold
    index is the largest j with u_j + (1 - sum_{i<=j} u_i) / j > 0.
    """
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    u_cumsum = np.cumsum(u)
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(u + (1.0 - u_cumsum) / ranks > 0)[0][-1]
    shift = (1.0 - u_cumsum[rho]) / (rho + 1.0)
    return np.maximum(v + shift, 0.0)
