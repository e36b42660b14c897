"""Pure-numpy jet kernels.

Same signatures as the compiled ``_jetcore`` module. Hessians are stored
packed: one column per unordered coordinate pair ``(I[p], J[p])`` with
``I[p] <= J[p]``.
"""
import numpy as np


def jet_mul(av, ag, ah, bv, bg, bh, I, J):
    v = av * bv
    g = ag * bv[:, None] + bg * av[:, None]
    h = (ah * bv[:, None] + bh * av[:, None]
         + ag[:, I] * bg[:, J] + ag[:, J] * bg[:, I])
    return v, g, h


def jet_chain(ug, uh, f1, f2, I, J):
    """Compose an outer scalar function with derivatives f1, f2 onto u."""
    g = ug * f1[:, None]
    h = uh * f1[:, None] + f2[:, None] * (ug[:, I] * ug[:, J])
    return g, h
