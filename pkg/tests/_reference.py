"""Naive per-node / per-edge loop implementations used as oracles.

Nothing here touches the batched gather-sum machinery of the package; every
sum is an explicit Python loop over adjacency lists.
"""
from __future__ import annotations

import numpy as np


def _relu(x):
    return np.where(x > 0.0, x, 0.0)


def _x(g, p):
    X = np.zeros((g.num_nodes, p))
    for i, t in enumerate(g.node_tag):
        X[i, t] = 1.0
    return X


def _directed(g):
    return [(a, b) for a, b in g.edges] + [(b, a) for a, b in g.edges]


def ref_mean_field(g, W, T, p):
    X = _x(g, p)
    d = W["W1"].shape[0]
    mu = np.zeros((g.num_nodes, d))
    for _ in range(T):
        new = np.zeros_like(mu)
        for i in range(g.num_nodes):
            l = np.zeros(d)
            for j in g.adjacency[i]:
                l = l + mu[j]
            new[i] = _relu(W["W1"] @ X[i] + W["W2"] @ l)
        mu = new
    return mu


def ref_loopy_bp(g, W, T, p, return_messages=False):
    X = _x(g, p)
    d = W["W1"].shape[0]
    msgs = {e: np.zeros(d) for e in _directed(g)}
    history = [dict(msgs)]
    for _ in range(T):
        new = {}
        for (i, j) in msgs:
            s = np.zeros(d)
            for k in g.adjacency[i]:
                if k != j:
                    s = s + msgs[(k, i)]
            new[(i, j)] = _relu(W["W1"] @ X[i] + W["W2"] @ s)
        msgs = new
        history.append(dict(msgs))
    mu = np.zeros((g.num_nodes, d))
    for i in range(g.num_nodes):
        s = np.zeros(d)
        for k in g.adjacency[i]:
            s = s + msgs[(k, i)]
        mu[i] = _relu(W["W3"] @ X[i] + W["W4"] @ s)
    return (mu, history) if return_messages else mu


def ref_damped_bp(g, W, T, p):
    X = _x(g, p)
    d = W["W1"].shape[0]
    msgs = {e: np.zeros(d) for e in _directed(g)}
    mu = np.zeros((g.num_nodes, d))
    for _ in range(T):
        new_msgs, new_mu = {}, np.zeros_like(mu)
        for (i, j) in msgs:
            s = np.zeros(d)
            for k in g.adjacency[i]:
                s = s + msgs[(k, i)]
            new_msgs[(i, j)] = _relu(W["W1"] @ X[i] + W["W2"] @ s + W["W3"] @ msgs[(j, i)] + W["W4"] @ mu[i])
        for i in range(g.num_nodes):
            s = np.zeros(d)
            for k in g.adjacency[i]:
                s = s + msgs[(k, i)]
            new_mu[i] = _relu(W["W5"] @ X[i] + W["W6"] @ mu[i] + W["W7"] @ s)
        msgs, mu = new_msgs, new_mu
    return mu


def ref_trbp(g, W, T, p, v=None):
    """``v`` maps an undirected edge (a, b) with a < b to its weight (default 1)."""
    X = _x(g, p)
    d = W["W1"].shape[0]

    def w(a, b):
        if v is None:
            return 1.0
        return v[(min(a, b), max(a, b))]

    msgs = {e: np.zeros(d) for e in _directed(g)}
    for _ in range(T):
        new = {}
        for (i, j) in msgs:
            s = np.zeros(d)
            for k in g.adjacency[i]:
                if k != j:
                    s = s + w(k, i) * msgs[(k, i)]
            new[(i, j)] = _relu(W["W1"] @ X[i] + W["W2"] @ s + W["W3"] @ (w(i, j) * msgs[(j, i)]))
        msgs = new
    mu = np.zeros((g.num_nodes, d))
    for i in range(g.num_nodes):
        s = np.zeros(d)
        for k in g.adjacency[i]:
            s = s + w(k, i) * msgs[(k, i)]
        mu[i] = _relu(W["W4"] @ X[i] + W["W5"] @ s)
    return mu


REFERENCE = {
    "mean_field": ref_mean_field,
    "loopy_bp": ref_loopy_bp,
    "damped_bp": ref_damped_bp,
    "trbp": ref_trbp,
}


def ref_head(pooled, head):
    h = _relu(pooled)
    if "H" in head:
        h = _relu(head["H"] @ h + head.get("bH", 0.0))
    return head["U"] @ h + head.get("bU", 0.0)


def ref_loss(out, y, classification):
    if classification:
        z = out - out.max()
        return float(-(z[y] - np.log(np.exp(z).sum())))
    return float((y - out[0]) ** 2)
