"""Reference computations that share no code with the package under test."""
from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import hermite as Hphys
from numpy.polynomial import hermite_e as He


def net_output(weights, v, x, phi):
    """Plain loop forward pass f = v . alpha^(L) / sqrt(m)."""
    a = np.asarray(x, dtype=float)
    for W in weights:
        a = phi(W @ a / math.sqrt(a.size))
    return float(v @ a / math.sqrt(v.size))


def unflatten(theta, shapes, m):
    out, k = [], 0
    for r, c in shapes:
        out.append(theta[k : k + r * c].reshape((r, c), order="F"))
        k += r * c
    return out, theta[k : k + m]


def fd_gradient(f, theta, h=1e-6):
    g = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        g[i] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


def fd_hessian_values(f, theta, h=1e-4):
    """Second differences of function values only."""
    p = theta.size
    H = np.empty((p, p))
    f0 = f(theta)
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h
        H[i, i] = (f(theta + ei) - 2 * f0 + f(theta - ei)) / h**2
        for j in range(i + 1, p):
            ej = np.zeros(p)
            ej[j] = h
            H[i, j] = H[j, i] = (f(theta + ei + ej) - f(theta + ei - ej) - f(theta - ei + ej) + f(theta - ei - ej)) / (4 * h * h)
    return H


def normalized_probabilist(r, x):
    c = np.zeros(r + 1)
    c[r] = 1.0
    return He.hermeval(x, c) / math.sqrt(math.factorial(r))


def normalized_physicist(r, x):
    """Physicists' H_r / sqrt(r!) evaluated from numpy's Hermite series."""
    c = np.zeros(r + 1)
    c[r] = 1.0
    return Hphys.hermval(x, c) / math.sqrt(math.factorial(r))


def hermegauss_probability(n):
    x, w = He.hermegauss(n)
    return x, w / w.sum()
