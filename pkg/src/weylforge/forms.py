"""Exterior algebra on jets: d, wedge, Hodge stars, musical maps, SD/ASD splitting.

A k-form is stored as a fully antisymmetric tensor with k lower indices, so
``dx∧dy`` has components ``+1`` at (0,1) and ``-1`` at (1,0).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .jets import Jet, contract, determinant, einsum1, inverse, levi_civita

CONVENTIONS = ("tilde", "paper")


@dataclass(frozen=True)
class TensorValue:
    """Tensor components at a batch of points.

    ``components`` has shape ``(N, n, ..., n)``; ``variance`` lists 'up'/'down'
    per slot and ``weight`` is the conformal weight in the chart gauge.
    """

    components: np.ndarray
    variance: tuple
    weight: int = 0

    @property
    def rank(self):
        return len(self.variance)


def as_jet(x, nvar=None):
    if isinstance(x, Jet):
        return x
    x = np.asarray(x, dtype=float)
    return Jet([x], nvar if nvar is not None else (x.shape[-1] if x.ndim > 1 else 1))


def _signed_perms(k):
    for p in itertools.permutations(range(k)):
        inv = sum(1 for a in range(k) for b in range(a + 1, k) if p[a] > p[b])
        yield p, (-1) ** inv


def antisymmetrize(t: Jet, k=None) -> Jet:
    """Alternation over the last ``k`` tensor axes (all axes by default)."""
    nd = len(t.shape)
    k = nd if k is None else k
    lead = tuple(range(nd - k))
    acc = None
    for p, s in _signed_perms(k):
        term = t.transpose(lead + tuple(nd - k + q for q in p)) * float(s)
        acc = term if acc is None else acc + term
    return acc * (1.0 / math.factorial(k))


def exterior_d(alpha: Jet) -> Jet:
    """Exterior derivative of a k-form jet; the result has one order fewer."""
    k = len(alpha.shape)
    if k == 0:
        return alpha.grad()
    da = alpha.grad()  # (i1..ik, j): d_j alpha_{i1..ik}
    da = da.transpose((k,) + tuple(range(k)))
    return antisymmetrize(da) * float(k + 1)


def wedge(a: Jet, b: Jet) -> Jet:
    """Wedge product of a p-form and a q-form."""
    p, q = len(a.shape), len(b.shape)
    if p == 0 or q == 0:
        return a * b
    letters = "abcdefgh"
    spec = "%s,%s->%s" % (letters[:p], letters[p:p + q], letters[:p + q])
    t = contract(spec, a, b)
    return antisymmetrize(t) * float(math.factorial(p + q) / (math.factorial(p) * math.factorial(q)))


def volume_tensor(g: Jet, orientation: int) -> Jet:
    n = g.shape[-1]
    return determinant(g).sqrt() * float(orientation) * levi_civita(n)


def raise_all(alpha: Jet, ginv: Jet) -> Jet:
    out = alpha
    k = len(alpha.shape)
    letters = "abcdefgh"
    for slot in range(k):
        src = letters[:k]
        dst = src[:slot] + "z" + src[slot + 1:]
        out = contract("%s%s,%s->%s" % ("z", src[slot], src, dst), ginv, out)
    return out


def hodge_star(alpha, g, orientation=1, convention="paper", ginv=None) -> Jet:
    """Hodge star of a k-form.

    ``tilde``: alpha ∧ ~*beta = <alpha, beta> vol.  ``paper``: the tilde star
    times (-1)^(k(k-1)/2), normalised so that *1 is the volume form.
    """
    if convention not in CONVENTIONS:
        raise ValueError("convention must be 'tilde' or 'paper'")
    alpha, g = as_jet(alpha), as_jet(g)
    n = g.shape[-1]
    k = len(alpha.shape)
    ginv = inverse(g) if ginv is None else ginv
    vol = volume_tensor(g, orientation)
    if k == 0:
        out = alpha * vol
    else:
        up = raise_all(alpha, ginv)
        letters = "abcdefgh"
        spec = "%s,%s->%s" % (letters[:k], letters[:n], letters[k:n])
        out = contract(spec, up, vol) * (1.0 / math.factorial(k))
    if convention == "paper":
        out = out * float((-1) ** (k * (k - 1) // 2))
    return out


def musical(t: Jet, g: Jet, slot: int, direction: str, ginv=None) -> Jet:
    """Raise or lower one tensor slot."""
    g = as_jet(g)
    k = len(t.shape)
    letters = "abcdefgh"
    src = letters[:k]
    dst = src[:slot] + "z" + src[slot + 1:]
    if direction == "raise":
        m = inverse(g) if ginv is None else ginv
    elif direction == "lower":
        m = g
    else:
        raise ValueError("direction must be 'raise' or 'lower'")
    return contract("z%s,%s->%s" % (src[slot], src, dst), m, t)


def musical_value(tv: TensorValue, g, slot: int, direction: str) -> TensorValue:
    """Musical isomorphism on a :class:`TensorValue`, with weight bookkeeping."""
    want = "down" if direction == "raise" else "up"
    if tv.variance[slot] != want:
        raise ValueError("slot %d is not %s" % (slot, want))
    g = np.asarray(g, dtype=float)
    if np.any(np.abs(np.linalg.det(g)) < 1e-300):
        raise np.linalg.LinAlgError("singular metric")
    comp = musical(as_jet(tv.components), as_jet(g), slot, direction).value
    var = list(tv.variance)
    var[slot] = "up" if direction == "raise" else "down"
    return TensorValue(comp, tuple(var), tv.weight + (-2 if direction == "raise" else 2))


def two_form_inner(a: Jet, b: Jet, ginv: Jet) -> Jet:
    """Inner product with |e1∧e2| = 1 for orthonormal e1, e2."""
    return contract("ij,ij->", raise_all(a, ginv), b) * 0.5


def sd_asd_split(alpha, g, orientation=1, convention="tilde", ginv=None):
    """(selfdual, antiselfdual) parts of a 2-form in dimension 4."""
    alpha, g = as_jet(alpha), as_jet(g)
    if g.shape[-1] != 4:
        raise ValueError("selfduality needs dimension 4")
    s = hodge_star(alpha, g, orientation, convention, ginv)
    return (alpha + s) * 0.5, (alpha - s) * 0.5


def asd_projector(g: Jet, orientation: int, convention: str, ginv=None, sign=-1) -> Jet:
    """Matrix P with (P alpha)_ij = P_ij^kl alpha_kl projecting 2-forms onto the ``sign`` eigenspace."""
    g = as_jet(g)
    n = 4
    basis = np.zeros((n, n, n, n))
    for k in range(n):
        for l in range(n):
            basis[k, l, k, l] += 0.5
            basis[k, l, l, k] -= 0.5
    npts = g.npts
    cols = Jet.constant(basis, npts, g.nvar, g.order)
    # cols[k,l] is the 2-form 1/2 (e^k∧e^l) in components; star acts on the last two axes
    ginv = inverse(g) if ginv is None else ginv
    star = _star_2forms_batch(cols, g, orientation, convention, ginv)
    p = (cols + star * float(sign)) * 0.5  # (k,l,i,j)
    return einsum1("klij->ijkl", p)


def _star_2forms_batch(cols, g, orientation, convention, ginv):
    vol = volume_tensor(g, orientation)
    up = contract("ia,klab->klib", ginv, cols)
    up = contract("jb,klib->klij", ginv, up)
    out = contract("klij,ijmn->klmn", up, vol) * 0.5
    if convention == "paper":
        out = -out
    return out


def project_pairs(t: Jet, proj: Jet) -> Jet:
    """Apply a 2-form projector to both index pairs of a 4-tensor with lowered indices."""
    t = contract("abkl,klij->abij", proj, t)
    return contract("abkl,ijkl->ijab", proj, t)


def orthonormal_frame(g0: np.ndarray) -> np.ndarray:
    """Frame matrices E (N, n, n), columns g-orthonormal: E^T g E = I."""
    w, v = np.linalg.eigh(g0)
    if np.any(w <= 0):
        raise np.linalg.LinAlgError("metric is not positive definite")
    return np.einsum("...ij,...j,...kj->...ik", v, 1.0 / np.sqrt(w), v)


def frame_components(t: np.ndarray, variance, g0: np.ndarray) -> np.ndarray:
    """Components of a tensor in the symmetric g-orthonormal frame."""
    e = orthonormal_frame(g0)
    einv = np.linalg.inv(e)
    out = np.asarray(t, dtype=float)
    for slot, var in enumerate(variance):
        x = np.moveaxis(out, slot + 1, -1)
        if var == "down":
            x = np.einsum("n...b,nba->n...a", x, e)
        else:
            x = np.einsum("n...b,nab->n...a", x, einv)
        out = np.moveaxis(x, -1, slot + 1)
    return out


def frame_norm(t, variance, g0) -> np.ndarray:
    """Max-norm of components in a g-orthonormal frame, per point."""
    t = t.value if isinstance(t, Jet) else np.asarray(t)
    if len(variance) == 0:
        return np.abs(t)
    comp = frame_components(t, variance, g0)
    return np.max(np.abs(comp.reshape(comp.shape[0], -1)), axis=1)
