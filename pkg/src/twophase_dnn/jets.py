"""Second-order space-time jets and a reverse-mode tape over them.

A :class:`Jet` carries a value together with its gradient and Hessian with
respect to the three inputs ``(x, y, t)``.  Storage is component-first: an
array of shape ``(10, *shape)`` holding

    0        value
    1..3     d/dx, d/dy, d/dt
    4..9     d2/dxx, d2/dxy, d2/dxt, d2/dyy, d2/dyt, d2/dtt

so the Hessian is kept as its six unique entries and is symmetric by
construction.  A scalar jet is simply a jet of shape ``()``.

:class:`Var` is a plain (value-only) quantity.  Residuals read individual
jet components and are assembled as ``Var`` arithmetic, which is what the
loss is built from.

When a :class:`Tape` is active, every operation that touches a watched
input is recorded with a vector-Jacobian closure.  :meth:`Tape.gradient`
runs one reverse sweep carrying 10-component cotangents through jet nodes
and plain cotangents through ``Var`` nodes.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from . import kernels

NCOMP = 10
AXES = {"x": 0, "y": 1, "t": 2, 0: 0, 1: 1, 2: 2}
# (i, j) index pairs of the six stored Hessian entries
HESS_I = np.array([0, 0, 0, 1, 1, 2])
HESS_J = np.array([0, 1, 2, 1, 2, 2])
_HESS_SLOT = np.array([[4, 5, 6], [5, 7, 8], [6, 8, 9]])


class JetDomainError(ArithmeticError):
    """Operation outside the domain of the elementary function."""


class JetOverflowError(OverflowError):
    """An operation produced a non-finite jet component."""


class TapeError(RuntimeError):
    """Misuse of the tape (unknown node, nothing to differentiate)."""


def hess_slot(i: int, j: int) -> int:
    """Storage index of the Hessian entry (i, j)."""
    return int(_HESS_SLOT[AXES[i], AXES[j]])


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise JetOverflowError(f"non-finite result in {what}")


# --------------------------------------------------------------------------
# tape
# --------------------------------------------------------------------------

class _Node:
    __slots__ = ("kind", "inputs", "payload", "vjp")

    def __init__(self, kind, inputs, payload, vjp):
        self.kind = kind
        self.inputs = inputs
        self.payload = payload
        self.vjp = vjp


_ACTIVE: list["Tape"] = []


class Tape:
    """Append-only record of operations for one reverse sweep.

    Node ids are positions in :attr:`nodes`, so inputs always precede
    outputs.  Leaves are created with :meth:`watch`.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.leaves: list[int] = []

    def __enter__(self):
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.remove(self)
        return False

    def _record(self, kind, inputs, payload, vjp) -> int:
        self.nodes.append(_Node(kind, tuple(inputs), payload, vjp))
        return len(self.nodes) - 1

    def watch(self, x):
        """Register ``x`` (a Jet, Var or raw array) as a parameter leaf."""
        if isinstance(x, Jet):
            out = Jet(x.c, order=x.order)
        elif isinstance(x, Var):
            out = Var(x.a)
        else:
            out = Var(np.asarray(x, dtype=float))
        payload = out.c if isinstance(out, Jet) else out.a
        out.tape = self
        out.node = self._record("leaf", (), payload, None)
        self.leaves.append(out.node)
        return out

    def gradient(self, loss, wrt: Sequence) -> list[np.ndarray]:
        """Reverse sweep from a scalar ``loss``; returns d loss / d leaf.

        For jet leaves the derivative with respect to the value component
        is returned (parameters are constant jets).
        """
        if getattr(loss, "tape", None) is not self or loss.node is None:
            raise TapeError("loss is not recorded on this tape")
        payload = self.nodes[loss.node].payload
        seed = np.zeros_like(payload)
        if isinstance(loss, Jet):
            if loss.c.shape != (NCOMP,):
                raise TapeError("loss jet must be scalar")
            seed[0] = 1.0
        else:
            if np.ndim(payload) != 0:
                raise TapeError("loss must be a scalar")
            seed = np.ones_like(payload)
        adj: dict[int, np.ndarray] = {loss.node: seed}
        leaves = set(self.leaves)
        for nid in range(loss.node, -1, -1):
            g = adj.get(nid)
            if g is None:
                continue
            node = self.nodes[nid]
            if node.vjp is None:
                continue
            for pos, index, contrib in node.vjp(g):
                src = node.inputs[pos]
                if src is None:
                    continue
                buf = adj.get(src)
                if buf is None:
                    buf = np.zeros_like(self.nodes[src].payload)
                    adj[src] = buf
                if index is None:
                    buf += contrib
                else:
                    np.add.at(buf, index, contrib) if _needs_add_at(index) else _iadd(buf, index, contrib)
            if nid not in leaves:
                del adj[nid]
        out = []
        for w in wrt:
            if getattr(w, "tape", None) is not self or w.node is None:
                raise TapeError("gradient requested for a value that is not a leaf of this tape")
            g = adj.get(w.node)
            if g is None:
                g = np.zeros_like(self.nodes[w.node].payload)
            out.append(g[0] if isinstance(w, Jet) else g)
        return out


def _needs_add_at(index) -> bool:
    # fancy integer indices may repeat; slices never do
    if isinstance(index, tuple):
        return any(isinstance(i, np.ndarray) for i in index)
    return isinstance(index, np.ndarray)


def _iadd(buf, index, contrib):
    buf[index] += contrib


def _tape_of(*xs):
    tape = None
    for x in xs:
        t = getattr(x, "tape", None)
        if t is not None:
            if tape is not None and t is not tape:
                raise TapeError("operands recorded on different tapes")
            tape = t
    if tape is not None and tape not in _ACTIVE:
        # recorded values used after their tape closed are constants
        return None
    return tape


def _ids(*xs):
    return [getattr(x, "node", None) for x in xs]


# --------------------------------------------------------------------------
# Jet
# --------------------------------------------------------------------------

class Jet:
    """Value, gradient and Hessian w.r.t. ``(x, y, t)``; see module docs.

    ``order`` is 2 for a full jet and 1 for a jet obtained by
    differentiation, whose Hessian is unavailable.
    """

    __slots__ = ("c", "order", "tape", "node")
    __array_priority__ = 100

    def __init__(self, c, order: int = 2):
        self.c = c
        self.order = order
        self.tape = None
        self.node = None

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((NCOMP,) + value.shape)
        c[0] = value
        return cls(c)

    @property
    def shape(self):
        return self.c.shape[1:]

    # -- components -------------------------------------------------------
    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    @property
    def grad(self) -> np.ndarray:
        return self.c[1:4]

    @property
    def hess(self) -> np.ndarray:
        """3x3 Hessian (mirrored from the six stored entries)."""
        self._need_hess()
        return self.c[_HESS_SLOT]

    def _need_hess(self):
        if self.order < 2:
            raise JetDomainError("Hessian not available on a differentiated jet")

    def comp(self, k: int) -> "Var":
        """Component ``k`` (0..9) as a recorded :class:`Var`."""
        if k >= 4:
            self._need_hess()
        return _pick(self, k)

    @property
    def val(self) -> "Var":
        return self.comp(0)

    def d(self, a) -> "Var":
        return self.comp(1 + AXES[a])

    def dd(self, a, b) -> "Var":
        return self.comp(hess_slot(a, b))

    def partial(self, a) -> "Jet":
        """The jet of ``d self / d a`` (first order only)."""
        return _partial(self, AXES[a])

    def __getitem__(self, index) -> "Jet":
        return _take(self, index)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, o):
        return jet_binary("add", self, o)

    def __radd__(self, o):
        return jet_binary("add", o, self)

    def __sub__(self, o):
        return jet_binary("sub", self, o)

    def __rsub__(self, o):
        return jet_binary("sub", o, self)

    def __mul__(self, o):
        return jet_binary("mul", self, o)

    def __rmul__(self, o):
        return jet_binary("mul", o, self)

    def __truediv__(self, o):
        return jet_binary("div", self, o)

    def __rtruediv__(self, o):
        return jet_binary("div", o, self)

    def __neg__(self):
        return jet_unary("neg", self)

    def __repr__(self):
        return f"Jet(shape={self.shape}, order={self.order})"


def jet_var(value, axis) -> Jet:
    """Seed the input coordinate ``axis`` (0=x, 1=y, 2=t) at ``value``."""
    if axis not in AXES:
        raise ValueError(f"axis must be 0, 1 or 2, got {axis!r}")
    value = np.asarray(value, dtype=float)
    c = np.zeros((NCOMP,) + value.shape)
    c[0] = value
    c[1 + AXES[axis]] = 1.0
    return Jet(c)


def input_jets(points: np.ndarray) -> Jet:
    """Jets of shape ``(B, 3)`` seeding each column of ``points`` on its axis."""
    points = np.asarray(points, dtype=float)
    c = np.zeros((NCOMP,) + points.shape)
    c[0] = points
    for a in range(3):
        c[1 + a, ..., a] = 1.0
    return Jet(c)


def _as_jet(x) -> Jet:
    if isinstance(x, Jet):
        return x
    if isinstance(x, Var):
        raise TypeError("cannot mix Var and Jet; take a jet component first")
    return Jet.constant(x)


def _finish(out: Jet, kind, inputs, vjp) -> Jet:
    _check_finite(out.c, f"jet {kind}")
    tape = _tape_of(*inputs)
    if tape is not None:
        out.tape = tape
        out.node = tape._record(kind, _ids(*inputs), out.c, vjp)
    return out


def _outer6(ga, gb):
    """Symmetrised outer product ga_i gb_j + gb_i ga_j in 6-slot layout."""
    return ga[HESS_I] * gb[HESS_J] + gb[HESS_I] * ga[HESS_J]


def _sym_contract(hbar, g):
    """d/dg_m of sum_k hbar_k * (g_i g_j)  ->  shape (3, ...)."""
    out = np.empty((3,) + np.broadcast_shapes(hbar.shape[1:], g.shape[1:]))
    out[0] = 2 * hbar[0] * g[0] + hbar[1] * g[1] + hbar[2] * g[2]
    out[1] = hbar[1] * g[0] + 2 * hbar[3] * g[1] + hbar[4] * g[2]
    out[2] = hbar[2] * g[0] + hbar[4] * g[1] + 2 * hbar[5] * g[2]
    return out


def _mul_forward(ac, bc):
    c = np.empty(np.broadcast_shapes(ac.shape, bc.shape))
    ga, gb = ac[1:4], bc[1:4]
    c[0] = ac[0] * bc[0]
    c[1:4] = ac[0] * gb + bc[0] * ga
    c[4:] = ac[0] * bc[4:] + bc[0] * ac[4:] + _outer6(ga, gb)
    return c


def _mul_backward(g, ac, bc):
    av, bv = ac[0], bc[0]
    ga, gb = ac[1:4], bc[1:4]
    gv, gg, gh = g[0], g[1:4], g[4:]
    da = np.empty(g.shape)
    db = np.empty(g.shape)
    da[0] = gv * bv + (gg * gb).sum(0) + (gh * bc[4:]).sum(0)
    db[0] = gv * av + (gg * ga).sum(0) + (gh * ac[4:]).sum(0)
    da[1:4] = gg * bv + _sym_contract(gh, gb)
    db[1:4] = gg * av + _sym_contract(gh, ga)
    da[4:] = gh * bv
    db[4:] = gh * av
    return da, db


def _unbroadcast(g, shape):
    """Sum a cotangent down to ``shape`` (component axis kept)."""
    if g.shape == shape:
        return g
    ndiff = g.ndim - len(shape)
    if ndiff:
        g = g.sum(axis=tuple(range(1, 1 + ndiff)))
    axes = tuple(i for i, (a, b) in enumerate(zip(g.shape, shape)) if b == 1 and a != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _lift(c, ndim):
    """Insert broadcast axes after the component axis."""
    extra = ndim - c.ndim
    if extra <= 0:
        return c
    return c.reshape((c.shape[0],) + (1,) * extra + c.shape[1:])


def _is_scalar(x) -> bool:
    return isinstance(x, (int, float, np.floating, np.integer))


def _scalar_op(kind: str, a: Jet, s: float, swap: bool) -> Jet:
    """Jet combined with a plain number (no constant jet is materialised)."""
    if kind == "mul":
        out = Jet(a.c * s, a.order)

        def vjp(g):
            return [(0, None, g * s)]
    else:
        sign = -1.0 if (kind == "sub" and swap) else 1.0
        shift = s if kind == "add" else (-s if not swap else s)
        c = a.c * sign if sign < 0 else a.c.copy()
        c[0] += shift
        out = Jet(c, a.order)

        def vjp(g):
            return [(0, None, g * sign if sign < 0 else g)]

    return _finish(out, kind, (a,), vjp)


def jet_binary(kind: str, a, b) -> Jet:
    """Elementwise ``add``, ``sub``, ``mul`` or ``div`` of two jets."""
    if kind in ("add", "sub", "mul") and _is_scalar(b) and isinstance(a, Jet):
        return _scalar_op(kind, a, float(b), swap=False)
    if kind in ("add", "sub", "mul") and _is_scalar(a) and isinstance(b, Jet):
        return _scalar_op(kind, b, float(a), swap=True)
    a = _as_jet(a)
    b = _as_jet(b)
    order = min(a.order, b.order)
    nd = max(a.c.ndim, b.c.ndim)
    ac, bc = _lift(a.c, nd), _lift(b.c, nd)
    sa, sb = a.c.shape, b.c.shape

    if kind == "add":
        out = Jet(ac + bc, order)

        def vjp(g):
            return [(0, None, _unbroadcast(g, sa).reshape(sa)), (1, None, _unbroadcast(g, sb).reshape(sb))]

    elif kind == "sub":
        out = Jet(ac - bc, order)

        def vjp(g):
            return [(0, None, _unbroadcast(g, sa).reshape(sa)), (1, None, -_unbroadcast(g, sb).reshape(sb))]

    elif kind == "mul":
        out = Jet(_mul_forward(ac, bc), order)

        def vjp(g):
            da, db = _mul_backward(g, ac, bc)
            return [(0, None, _unbroadcast(da, sa).reshape(sa)), (1, None, _unbroadcast(db, sb).reshape(sb))]

    elif kind == "div":
        bv = bc[0]
        if np.any(bv == 0):
            raise JetDomainError("division by a jet with zero value")
        inv = 1.0 / bv
        f1, f2, f3 = -inv * inv, 2 * inv ** 3, -6 * inv ** 4
        rc = unary_forward(bc, inv, f1, f2)
        out = Jet(_mul_forward(ac, rc), order)

        def vjp(g):
            da, dr = _mul_backward(g, ac, rc)
            db = unary_backward(bc, dr, f1, f2, f3)
            return [(0, None, _unbroadcast(da, sa).reshape(sa)), (1, None, _unbroadcast(db, sb).reshape(sb))]

    else:
        raise ValueError(f"unknown binary jet op {kind!r}")
    return _finish(out, kind, (a, b), vjp)


def _unary_derivs(kind, v):
    """f, f', f'', f''' of the elementary function at ``v``."""
    if kind == "exp":
        e = np.exp(v)
        return e, e, e, e
    if kind == "sin":
        s, co = np.sin(v), np.cos(v)
        return s, co, -s, -co
    if kind == "cos":
        s, co = np.sin(v), np.cos(v)
        return co, -s, -co, s
    if kind == "square":
        return v * v, 2 * v, np.full_like(v, 2.0), np.zeros_like(v)
    if kind == "neg":
        return -v, -np.ones_like(v), np.zeros_like(v), np.zeros_like(v)
    if kind == "tanh":
        t = np.tanh(v)
        d1 = 1 - t * t
        d2 = -2 * t * d1
        d3 = -2 * d1 * d1 + 4 * t * t * d1
        return t, d1, d2, d3
    raise ValueError(f"unknown unary jet op {kind!r}")


def unary_forward(c, f0, f1, f2):
    out = np.empty_like(c)
    g = c[1:4]
    out[0] = f0
    out[1:4] = f1 * g
    out[4:] = f1 * c[4:] + f2 * (g[HESS_I] * g[HESS_J])
    return out


def unary_backward(c, gbar, f1, f2, f3):
    g = c[1:4]
    gv, gg, gh = gbar[0], gbar[1:4], gbar[4:]
    gout = np.empty_like(c)
    gout[0] = gv * f1 + f2 * (gg * g).sum(0) + (gh * (f2 * c[4:] + f3 * (g[HESS_I] * g[HESS_J]))).sum(0)
    gout[1:4] = gg * f1 + f2 * _sym_contract(gh, g)
    gout[4:] = gh * f1
    return gout


def jet_unary(kind: str, a) -> Jet:
    """Elementwise ``tanh``, ``exp``, ``sin``, ``cos``, ``neg`` or ``square``."""
    a = _as_jet(a)
    c_in = a.c
    if kind == "tanh":
        out_c = kernels.tanh_forward(c_in)

        def vjp(g):
            return [(0, None, kernels.tanh_backward(c_in, out_c, g))]

    elif kind == "neg":
        out_c = -c_in

        def vjp(g):
            return [(0, None, -g)]

    else:
        with np.errstate(over="ignore", invalid="ignore"):  # reported by _finish
            f0, f1, f2, f3 = _unary_derivs(kind, c_in[0])
            out_c = unary_forward(c_in, f0, f1, f2)

        def vjp(g):
            return [(0, None, unary_backward(c_in, g, f1, f2, f3))]

    return _finish(Jet(out_c, a.order), kind, (a,), vjp)


def tanh(a):
    return jet_unary("tanh", a)


def exp(a):
    return jet_unary("exp", a)


def sin(a):
    return jet_unary("sin", a)


def cos(a):
    return jet_unary("cos", a)


def square(a):
    return jet_unary("square", a)


def _pick(a: Jet, k: int) -> "Var":
    out = Var(a.c[k])

    def vjp(g):
        return [(0, (k,), g)]

    return _finish_var(out, "pick", (a,), vjp)


def _partial(a: Jet, axis: int) -> Jet:
    if a.order < 1:
        raise JetDomainError("jet has no derivative information left")
    c = np.zeros_like(a.c)
    c[0] = a.c[1 + axis]
    slots = _HESS_SLOT[axis]
    if a.order >= 2:
        c[1:4] = a.c[slots]
    order = a.order - 1

    def vjp(g):
        contribs = [(0, (1 + axis,), g[0])]
        if a.order >= 2:
            for j in range(3):
                contribs.append((0, (int(slots[j]),), g[1 + j]))
        return contribs

    return _finish(Jet(c, order), "partial", (a,), vjp)


def _take(a: Jet, index) -> Jet:
    idx = index if isinstance(index, tuple) else (index,)
    full = (slice(None),) + idx
    out = Jet(a.c[full], a.order)
    shape = a.c.shape

    def vjp(g):
        return [(0, full, g)]

    return _finish(out, "take", (a,), vjp)


def affine(x: Jet, W, b) -> Jet:
    """``x @ W.T + b`` with ``x`` of shape (..., n_in); W, b may be leaves.

    Only the value component receives the bias; all components are mapped
    linearly by ``W`` (parameters do not depend on the inputs).
    """
    Wa = W.a if isinstance(W, Var) else np.asarray(W)
    ba = b.a if isinstance(b, Var) else np.asarray(b)
    xc = x.c
    n_in = xc.shape[-1]
    flat = xc.reshape(-1, n_in)
    with np.errstate(over="ignore", invalid="ignore"):  # reported by _finish
        z = flat @ Wa.T
    zc = z.reshape(xc.shape[:-1] + (Wa.shape[0],))
    zc[0] += ba
    out = Jet(zc, x.order)
    x_on = getattr(x, "node", None) is not None

    def vjp(g):
        gflat = g.reshape(-1, Wa.shape[0])
        res = []
        if x_on:
            res.append((0, None, (gflat @ Wa).reshape(xc.shape)))
        res.append((1, None, gflat.T @ flat))
        res.append((2, None, g[0].reshape(-1, Wa.shape[0]).sum(0)))
        return res

    return _finish(out, "affine", (x, W, b), vjp)


# --------------------------------------------------------------------------
# Var
# --------------------------------------------------------------------------

def _as_var(x) -> "Var":
    if isinstance(x, Var):
        return x
    if isinstance(x, Jet):
        raise TypeError("cannot mix Jet and Var; take a jet component first")
    return Var(np.asarray(x, dtype=float))


def _finish_var(out: "Var", kind, inputs, vjp) -> "Var":
    _check_finite(out.a, f"{kind}")
    tape = _tape_of(*inputs)
    if tape is not None:
        out.tape = tape
        out.node = tape._record(kind, _ids(*inputs), out.a, vjp)
    return out


def _unb(g, shape):
    if g.shape == shape:
        return g
    ndiff = g.ndim - len(shape)
    if ndiff:
        g = g.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, (a, b) in enumerate(zip(g.shape, shape)) if b == 1 and a != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


class Var:
    """A value-only quantity recorded on the active tape."""

    __slots__ = ("a", "tape", "node")
    __array_priority__ = 100

    def __init__(self, a):
        self.a = a
        self.tape = None
        self.node = None

    @property
    def shape(self):
        return np.shape(self.a)

    @property
    def value(self):
        return self.a

    def _bin(self, o, kind, swap=False):
        a, b = (_as_var(o), self) if swap else (self, _as_var(o))
        av, bv = a.a, b.a
        sa, sb = np.shape(av), np.shape(bv)
        if kind == "add":
            r = av + bv

            def vjp(g):
                return [(0, None, _unb(g, sa)), (1, None, _unb(g, sb))]
        elif kind == "sub":
            r = av - bv

            def vjp(g):
                return [(0, None, _unb(g, sa)), (1, None, -_unb(g, sb))]
        elif kind == "mul":
            r = av * bv

            def vjp(g):
                return [(0, None, _unb(g * bv, sa)), (1, None, _unb(g * av, sb))]
        elif kind == "div":
            if np.any(np.asarray(bv) == 0):
                raise JetDomainError("division by zero")
            r = av / bv

            def vjp(g):
                return [(0, None, _unb(g / bv, sa)), (1, None, _unb(-g * r / bv, sb))]
        else:
            raise ValueError(kind)
        return _finish_var(Var(np.asarray(r, dtype=float)), kind, (a, b), vjp)

    def __add__(self, o):
        return self._bin(o, "add")

    def __radd__(self, o):
        return self._bin(o, "add", swap=True)

    def __sub__(self, o):
        return self._bin(o, "sub")

    def __rsub__(self, o):
        return self._bin(o, "sub", swap=True)

    def __mul__(self, o):
        return self._bin(o, "mul")

    def __rmul__(self, o):
        return self._bin(o, "mul", swap=True)

    def __truediv__(self, o):
        return self._bin(o, "div")

    def __rtruediv__(self, o):
        return self._bin(o, "div", swap=True)

    def __neg__(self):
        r = -np.asarray(self.a)

        def vjp(g):
            return [(0, None, -g)]

        return _finish_var(Var(r), "neg", (self,), vjp)

    def square(self) -> "Var":
        av = self.a
        r = av * av

        def vjp(g):
            return [(0, None, 2 * g * av)]

        return _finish_var(Var(r), "square", (self,), vjp)

    def sum(self) -> "Var":
        shape = np.shape(self.a)
        r = np.asarray(np.sum(self.a), dtype=float)

        def vjp(g):
            return [(0, None, np.broadcast_to(g, shape).copy())]

        return _finish_var(Var(r), "sum", (self,), vjp)

    def mean(self) -> "Var":
        n = np.size(self.a)
        if n == 0:
            raise ValueError("mean of an empty quantity")
        return self.sum() * (1.0 / n)

    def __getitem__(self, index) -> "Var":
        r = np.asarray(self.a)[index]

        def vjp(g):
            return [(0, index, g)]

        return _finish_var(Var(np.array(r, dtype=float)), "take", (self,), vjp)

    def __repr__(self):
        return f"Var(shape={self.shape})"


def var_sum(terms) -> Var:
    """Sum of several Vars with a fixed left-to-right order."""
    terms = list(terms)
    if not terms:
        raise ValueError("empty sum")
    acc = terms[0]
    for t in terms[1:]:
        acc = acc + t
    return acc


@contextlib.contextmanager
def no_tape():
    """Temporarily hide active tapes (values computed inside are constants)."""
    saved = list(_ACTIVE)
    _ACTIVE.clear()
    try:
        yield
    finally:
        _ACTIVE.extend(saved)


# Public aliases matching the scalar-jet vocabulary.
Jet2 = Jet
UnaryFn = Callable[[Jet], Jet]


def tape_backward(tape: Tape, loss, params: Sequence) -> np.ndarray:
    """dF/dparams for every leaf in ``params``, concatenated flat."""
    grads = tape.gradient(loss, params)
    return np.concatenate([np.ravel(g) for g in grads]) if grads else np.zeros(0)
