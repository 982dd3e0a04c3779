"""Nested jet engine: the tangent functor on coordinate charts.

T^n(R^k) is modelled as 2^n blocks of R^k indexed by subsets of the
nilpotent directions {1..n}; the block at the empty set is the base
point.  Direction n (owned by the outermost application of T) is the
highest bit of the block index, so flattening a jet point is plain
concatenation of the blocks in bitmask order.

Two independent computation paths are provided and cross-checked by
the tests: numeric pushforward through the truncated polynomial
algebra R[e1..en]/(e_i^2), and symbolic tangent maps built from
symbolic differentiation.

The structure maps of the tangent category (projection, zero, fibre
addition, negation, vertical lift, canonical flip) are generated from
their level-0 coordinate formulas; higher components are produced
mechanically by iterating the tangent map, never hand-written.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .expr import (
    Box, CheckConfig, DEFAULT_CONFIG, DimensionMismatch, ExprError,
    SmoothMap, Sum, Var, bump_coeffs, compose, con, concat_maps, cube,
    eval_batch, eval_map, equal_maps, identity_map, jac_eval_batch,
    jacobian_exprs, product_of, projection, simplify_map, smooth_map,
    substitute_vars, sum_of, _bump_order, _eval_array,
)
from .expr import Call, Const, Neg, Pow, Product, Quot
from .report import CheckReport, LawResult, Verdict, law_from_verdict

__all__ = [
    "JetPoint", "TruncElem", "pushforward", "tangent_map", "struct_map",
    "StructSet", "STANDARD_STRUCTS", "STRUCT_KINDS",
    "ImplicitMap", "JetView", "Composite", "StackMap", "NewtonDiverged",
    "push", "apply_map", "tangent_of", "prolong_implicit", "jac_point",
    "jac_batch", "solve_least_norm",
    "AXIOM_CATALOG", "axiom_ids", "check_axiom", "check_all_axioms",
    "naturality_square", "NATURAL_TRANSFORMS",
]

STRUCT_KINDS = ("proj", "zero", "add", "neg", "lift", "flip")


class NewtonDiverged(ExprError):
    pass


# --------------------------------------------------------------------------
# Jet points and the truncated algebra


@dataclass(frozen=True)
class JetPoint:
    """A point of T^order(R^dim): 2^order blocks of length dim."""

    order: int
    dim: int
    blocks: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.blocks, dtype=float)
        if b.shape != (1 << self.order, self.dim):
            raise DimensionMismatch(
                f"expected {(1 << self.order, self.dim)} blocks, got {b.shape}"
            )
        object.__setattr__(self, "blocks", b)

    @classmethod
    def from_flat(cls, vec, order: int, dim: int) -> "JetPoint":
        vec = np.asarray(vec, dtype=float)
        return cls(order, dim, vec.reshape(1 << order, dim))

    def to_flat(self) -> np.ndarray:
        return self.blocks.reshape(-1).copy()

    @property
    def base(self) -> np.ndarray:
        return self.blocks[0]


class TruncElem:
    """An element of R[e1..en]/(e_i^2): one coefficient per subset."""

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs):
        self.order = order
        self.coeffs = np.asarray(coeffs, dtype=float)

    @classmethod
    def const(cls, order: int, value: float) -> "TruncElem":
        c = np.zeros(1 << order)
        c[0] = value
        return cls(order, c)

    def __add__(self, other):
        return TruncElem(self.order, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return TruncElem(self.order, self.coeffs - other.coeffs)

    def __neg__(self):
        return TruncElem(self.order, -self.coeffs)

    def scaled(self, a: float) -> "TruncElem":
        return TruncElem(self.order, self.coeffs * a)

    def __mul__(self, other):
        a, b = self.coeffs, other.coeffs
        out = np.zeros_like(a)
        for s in range(len(a)):
            sub = s
            while True:
                out[s] += a[sub] * b[s ^ sub]
                if sub == 0:
                    break
                sub = (sub - 1) & s
        return TruncElem(self.order, out)

    def recip(self) -> "TruncElem":
        from .expr import DENOM_GUARD, DenominatorNearZero

        a = self.coeffs
        if abs(a[0]) < DENOM_GUARD:
            raise DenominatorNearZero("jet division by near-zero base value")
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for s in range(1, len(a)):
            acc = 0.0
            sub = (s - 1) & s
            while True:
                # sum over proper subsets of s (strictly smaller masks)
                acc += a[s ^ sub] * out[sub]
                if sub == 0:
                    break
                sub = (sub - 1) & s
            out[s] = -out[0] * acc
        return TruncElem(self.order, out)

    def intpow(self, k: int) -> "TruncElem":
        acc = TruncElem.const(self.order, 1.0)
        for _ in range(k):
            acc = acc * self
        return acc

    def nilpotent_part(self) -> "TruncElem":
        c = self.coeffs.copy()
        c[0] = 0.0
        return TruncElem(self.order, c)

    def apply_builtin(self, name: str) -> "TruncElem":
        n = self.order
        a0 = float(self.coeffs[0])
        if name == "exp":
            derivs = [math.exp(a0)] * (n + 1)
        elif name == "sin":
            cyc = [math.sin(a0), math.cos(a0), -math.sin(a0), -math.cos(a0)]
            derivs = [cyc[m % 4] for m in range(n + 1)]
        elif name == "cos":
            cyc = [math.cos(a0), -math.sin(a0), -math.cos(a0), math.sin(a0)]
            derivs = [cyc[m % 4] for m in range(n + 1)]
        else:
            k = _bump_order(name)
            coeffs = bump_coeffs(a0, k + n)
            derivs = [coeffs[k + m] * math.factorial(k + m) for m in range(n + 1)]
        nil = self.nilpotent_part()
        out = TruncElem.const(n, derivs[0])
        power = TruncElem.const(n, 1.0)
        for m in range(1, n + 1):
            power = power * nil
            out = out + power.scaled(derivs[m] / math.factorial(m))
        return out


def _eval_trunc(e, env: list, order: int) -> TruncElem:
    if isinstance(e, Const):
        return TruncElem.const(order, float(e.value))
    if isinstance(e, Var):
        return env[e.index]
    if isinstance(e, Sum):
        acc = _eval_trunc(e.terms[0], env, order)
        for t in e.terms[1:]:
            acc = acc + _eval_trunc(t, env, order)
        return acc
    if isinstance(e, Product):
        acc = _eval_trunc(e.factors[0], env, order)
        for t in e.factors[1:]:
            acc = acc * _eval_trunc(t, env, order)
        return acc
    if isinstance(e, Pow):
        return _eval_trunc(e.base, env, order).intpow(e.exponent)
    if isinstance(e, Quot):
        return _eval_trunc(e.num, env, order) * _eval_trunc(e.den, env, order).recip()
    if isinstance(e, Neg):
        return -_eval_trunc(e.arg, env, order)
    if isinstance(e, Call):
        return _eval_trunc(e.arg, env, order).apply_builtin(e.name)
    raise TypeError(f"not an Expr: {e!r}")


def pushforward(f: SmoothMap, n: int, jp: JetPoint) -> JetPoint:
    """Apply T^n(f) to a jet point via truncated algebra evaluation."""
    if jp.dim != f.arity:
        raise DimensionMismatch(
            f"jet of dimension {jp.dim} fed to map of arity {f.arity}"
        )
    if jp.order != n:
        raise DimensionMismatch(f"jet order {jp.order} does not match n={n}")
    env = [TruncElem(n, jp.blocks[:, i]) for i in range(f.arity)]
    out = np.empty((1 << n, f.coarity))
    for j, comp in enumerate(f.components):
        out[:, j] = _eval_trunc(comp, env, n).coeffs
    return JetPoint(n, f.coarity, out)


# --------------------------------------------------------------------------
# Symbolic tangent maps


def _tangent_once(f: SmoothMap) -> SmoothMap:
    m = f.arity
    rows = jacobian_exprs(f)
    comps = list(f.components)
    for i in range(f.coarity):
        comps.append(
            sum_of([product_of([rows[i][j], Var(m + j)]) for j in range(m)])
        )
    # reading the base components in the doubled chart leaves them unchanged
    return simplify_map(SmoothMap(2 * m, tuple(comps)))


def tangent_map(f: SmoothMap, n: int) -> SmoothMap:
    """Symbolic T^n(f); the outermost T owns the highest block index."""
    g = f
    for _ in range(n):
        g = _tangent_once(g)
    return g


# --------------------------------------------------------------------------
# Structure maps


def _proj_formula(k: int) -> SmoothMap:
    return projection(2 * k, range(k))


def _zero_formula(k: int) -> SmoothMap:
    return smooth_map(k, [Var(i) for i in range(k)] + [con(0)] * k)


def _add_formula(k: int) -> SmoothMap:
    # chart for the constrained pair: (x, u, w) with both summands over x
    comps = [Var(i) for i in range(k)]
    comps += [sum_of([Var(k + i), Var(2 * k + i)]) for i in range(k)]
    return smooth_map(3 * k, comps)


def _neg_formula(k: int) -> SmoothMap:
    comps = [Var(i) for i in range(k)]
    comps += [Neg(Var(k + i)) for i in range(k)]
    return smooth_map(2 * k, comps)


def _lift_formula(k: int) -> SmoothMap:
    comps = [Var(i) for i in range(k)]
    comps += [con(0)] * (2 * k)
    comps += [Var(k + i) for i in range(k)]
    return smooth_map(2 * k, comps)


def _flip_formula(k: int) -> SmoothMap:
    idx = list(range(k)) + list(range(2 * k, 3 * k)) \
        + list(range(k, 2 * k)) + list(range(3 * k, 4 * k))
    return projection(4 * k, idx)


@dataclass(frozen=True)
class StructSet:
    """Level-0 coordinate formulas for the six structure maps; swap a
    builder to study a deliberately broken variant."""

    builders: tuple = (
        ("proj", _proj_formula), ("zero", _zero_formula),
        ("add", _add_formula), ("neg", _neg_formula),
        ("lift", _lift_formula), ("flip", _flip_formula),
    )

    def build(self, kind: str, k: int) -> SmoothMap:
        for name, fn in self.builders:
            if name == kind:
                return fn(k)
        raise KeyError(f"unknown structure map kind {kind!r}")

    def with_override(self, kind: str, fn: Callable[[int], SmoothMap]) -> "StructSet":
        builders = tuple(
            (name, fn if name == kind else old) for name, old in self.builders
        )
        return StructSet(builders)


STANDARD_STRUCTS = StructSet()


def struct_map(kind: str, level: int, k: int,
               structs: StructSet = STANDARD_STRUCTS) -> SmoothMap:
    """T^level of the structure map of the given kind at base dim k.

    The component of a transformation at an inner object T^i(R^k) is
    struct_map(kind, 0, k * 2**i): the level-0 formula at inflated dim.
    """
    return tangent_map(structs.build(kind, k), level)


# --------------------------------------------------------------------------
# Procedural maps: Newton-defined maps and jet views


class ImplicitMap:
    """A map defined implicitly by residual(params, output) = 0.

    eval solves by Gauss-Newton from a caller-supplied initializer;
    jets are lifted through the residual block by block (the implicit
    function theorem in truncated form), so T^n of the map is available
    without a closed form.
    """

    def __init__(self, residual: SmoothMap, arity: int, coarity: int,
                 init: Callable, name: str = "implicit",
                 tol: float = 1e-12, max_iter: int = 50):
        if residual.arity != arity + coarity:
            raise DimensionMismatch("residual arity must be arity + coarity")
        self.residual = residual
        self.arity = arity
        self.coarity = coarity
        self.init = init
        self.name = name
        self.tol = tol
        self.max_iter = max_iter
        self._seen: dict = {}

    def _residual_jac_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        pt = np.concatenate([x, y])[None, :]
        J = jac_eval_batch(self.residual, pt)[0]
        return J[:, self.arity:]

    def _remember(self, key: bytes, y: np.ndarray) -> np.ndarray:
        if len(self._seen) > 64:
            self._seen.clear()
        self._seen[key] = y.copy()
        return y

    def eval_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        hit = self._seen.get(key)
        if hit is not None:
            return hit.copy()
        y = np.asarray(self.init(x), dtype=float).copy()
        for _ in range(self.max_iter):
            r = eval_map(self.residual, np.concatenate([x, y]))
            if np.max(np.abs(r)) < self.tol:
                return self._remember(key, y)
            J = self._residual_jac_y(x, y)
            step, *_ = np.linalg.lstsq(J, -r, rcond=None)
            if not np.all(np.isfinite(step)):
                raise NewtonDiverged(f"{self.name}: non-finite Newton step")
            y = y + step
        r = eval_map(self.residual, np.concatenate([x, y]))
        if np.max(np.abs(r)) < 1e-9:
            return self._remember(key, y)  # loosely converged; accept
        raise NewtonDiverged(f"{self.name}: no convergence at {x.tolist()}")

    def jacobian(self, x) -> np.ndarray:
        """Derivative from the linearized residual: the output columns
        solve J_out dy = -J_param."""
        x = np.asarray(x, dtype=float)
        y = self.eval_point(x)
        J = jac_eval_batch(self.residual, np.concatenate([x, y])[None, :])[0]
        sol, *_ = np.linalg.lstsq(J[:, self.arity:], -J[:, :self.arity],
                                  rcond=None)
        return sol

    def __call__(self, x):
        return self.eval_point(x)

    def push(self, n: int, jp: JetPoint) -> JetPoint:
        if jp.dim != self.arity or jp.order != n:
            raise DimensionMismatch("jet does not match implicit map arity")
        y0 = self.eval_point(jp.base)
        J = self._residual_jac_y(jp.base, y0)
        out = np.zeros((1 << n, self.coarity))
        out[0] = y0
        env_x = [TruncElem(n, jp.blocks[:, i]) for i in range(self.arity)]
        masks = sorted(range(1, 1 << n), key=lambda m: (bin(m).count("1"), m))
        for mask in masks:
            env_y = [TruncElem(n, out[:, j]) for j in range(self.coarity)]
            resid = [
                _eval_trunc(c, env_x + env_y, n).coeffs[mask]
                for c in self.residual.components
            ]
            delta, *_ = np.linalg.lstsq(J, -np.asarray(resid), rcond=None)
            out[mask] += delta
        return JetPoint(n, self.coarity, out)


def prolong_implicit(imp: ImplicitMap, n: int) -> ImplicitMap:
    """T^n of an implicitly defined map, again in implicit form.

    The residual of the prolonged map is the symbolic T^n of the original
    residual with its variables regrouped so that every parameter block
    precedes every output block; the point Jacobian then stays a single
    linear solve instead of one jet per column."""
    a, c = imp.arity, imp.coarity
    blocks = 1 << n
    prol = tangent_map(imp.residual, n)
    remap = {}
    for S in range(blocks):
        for i in range(a + c):
            if i < a:
                remap[S * (a + c) + i] = Var(S * a + i)
            else:
                remap[S * (a + c) + i] = Var(blocks * a + S * c + i - a)
    comps = tuple(substitute_vars(e, remap) for e in prol.components)
    residual = SmoothMap(blocks * (a + c), comps)

    def init(xf, _imp=imp, _c=c, _blocks=blocks):
        y = np.zeros(_blocks * _c)
        y[:_c] = _imp.eval_point(np.asarray(xf, dtype=float)[:_imp.arity])
        return y

    return ImplicitMap(residual, blocks * a, blocks * c, init,
                       name=f"tangent^{n} of {imp.name}",
                       tol=imp.tol, max_iter=imp.max_iter)


class JetView:
    """T^order of an underlying map, exposed as a flat map on charts."""

    def __init__(self, base, order: int):
        if isinstance(base, JetView):
            order += base.order
            base = base.base
        self.base = base
        self.order = order
        self.arity = base.arity << order
        self.coarity = base.coarity << order

    def eval_point(self, x) -> np.ndarray:
        jp = JetPoint.from_flat(x, self.order, self.base.arity)
        return push(self.base, self.order, jp).to_flat()

    def __call__(self, x):
        return self.eval_point(x)

    def push(self, n: int, jp: JetPoint) -> JetPoint:
        inner = JetPoint.from_flat(
            jp.to_flat(), n + self.order, self.base.arity
        )
        res = push(self.base, n + self.order, inner)
        return JetPoint.from_flat(res.to_flat(), n, self.coarity)


class Composite:
    """Sequential composite of map-like objects, applied right to left."""

    def __init__(self, *stages):
        flat = []
        for s in stages:
            flat.extend(s.stages if isinstance(s, Composite) else [s])
        for outer, inner in zip(flat, flat[1:]):
            if outer.arity != inner.coarity:
                raise DimensionMismatch("composite stages do not line up")
        self.stages = tuple(flat)
        self.arity = flat[-1].arity
        self.coarity = flat[0].coarity

    def eval_point(self, x) -> np.ndarray:
        y = np.asarray(x, dtype=float)
        for s in reversed(self.stages):
            y = s.eval_point(x=y) if not isinstance(s, SmoothMap) else eval_map(s, y)
        return y

    def __call__(self, x):
        return self.eval_point(x)

    def push(self, n: int, jp: JetPoint) -> JetPoint:
        for s in reversed(self.stages):
            jp = push(s, n, jp)
        return jp

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        J = None
        for s in reversed(self.stages):
            Js = jac_point(s, x)
            J = Js if J is None else Js @ J
            x = s.eval_point(x) if not isinstance(s, SmoothMap) else eval_map(s, x)
        return J


class StackMap:
    """Concatenated outputs of several map-like objects on one input."""

    def __init__(self, *parts):
        if len({p.arity for p in parts}) != 1:
            raise DimensionMismatch("stacked parts must share an arity")
        self.parts = tuple(parts)
        self.arity = parts[0].arity
        self.coarity = sum(p.coarity for p in parts)

    def eval_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.concatenate([
            eval_map(p, x) if isinstance(p, SmoothMap) else p.eval_point(x)
            for p in self.parts
        ])

    def __call__(self, x):
        return self.eval_point(x)

    def push(self, n: int, jp: JetPoint) -> JetPoint:
        blocks = [push(p, n, jp).blocks for p in self.parts]
        return JetPoint(n, self.coarity, np.concatenate(blocks, axis=1))

    def jacobian(self, x) -> np.ndarray:
        return np.vstack([jac_point(p, x) for p in self.parts])


def push(f, n: int, jp: JetPoint) -> JetPoint:
    """Pushforward through any map-like object."""
    if isinstance(f, SmoothMap):
        return pushforward(f, n, jp)
    return f.push(n, jp)


def apply_map(f, x) -> np.ndarray:
    """Evaluate any map-like object at a point."""
    if isinstance(f, SmoothMap):
        return eval_map(f, x)
    return np.asarray(f.eval_point(np.asarray(x, dtype=float)), dtype=float)


def solve_least_norm(f, target, z0, tol: float = 1e-11,
                     max_iter: int = 40) -> np.ndarray | None:
    """Drive f(z) to target by Gauss-Newton with least-norm steps.

    Returns the solution nearest-ish to z0, or None when the iteration
    fails to converge (callers discard and count such samples).
    """
    z = np.asarray(z0, dtype=float).copy()
    target = np.asarray(target, dtype=float)
    for _ in range(max_iter):
        try:
            r = apply_map(f, z) - target
        except ExprError:
            return None
        if np.max(np.abs(r)) < tol:
            return z
        J = jac_point(f, z)
        step, *_ = np.linalg.lstsq(J, -r, rcond=None)
        if not np.all(np.isfinite(step)):
            return None
        z = z + step
    return None


def tangent_of(f, n: int):
    """T^n of a map-like object; symbolic or implicit when possible."""
    if n == 0:
        return f
    if isinstance(f, SmoothMap):
        return tangent_map(f, n)
    if isinstance(f, ImplicitMap):
        return prolong_implicit(f, n)
    if isinstance(f, Composite):
        return Composite(*[tangent_of(s, n) for s in f.stages])
    return JetView(f, n)


def jac_point(f, x) -> np.ndarray:
    """Jacobian of a map-like object at a point (jets for procedural maps)."""
    x = np.asarray(x, dtype=float)
    if isinstance(f, SmoothMap):
        return jac_eval_batch(f, x[None, :])[0]
    if hasattr(f, "jacobian"):
        return f.jacobian(x)
    J = np.empty((f.coarity, f.arity))
    for j in range(f.arity):
        blocks = np.vstack([x, np.eye(f.arity)[j]])
        J[:, j] = push(f, 1, JetPoint(1, f.arity, blocks)).blocks[1]
    return J


def jac_batch(f, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if isinstance(f, SmoothMap):
        return jac_eval_batch(f, X)
    return np.stack([jac_point(f, x) for x in X])


# --------------------------------------------------------------------------
# Axiom catalog.  Each entry builds both sides as explicit composites
# of structure maps; every identity is polynomial, so exact equality
# of canonical forms is deciding.


def _restrict(f: SmoothMap, big_arity: int, indices) -> SmoothMap:
    """f applied to selected coordinates of a larger chart."""
    return compose(f, projection(big_arity, indices))


def _ax_add_assoc(s: StructSet, k: int):
    A = s.build("add", k)
    a4 = 4 * k
    x = list(range(k))
    u = list(range(k, 2 * k))
    v = list(range(2 * k, 3 * k))
    w = list(range(3 * k, 4 * k))
    uv = _restrict(A, a4, x + u + v)          # (x, u+v)
    left_pre = concat_maps(uv, projection(a4, w))
    vw = _restrict(A, a4, x + v + w)
    fib = compose(projection(2 * k, range(k, 2 * k)), vw)
    right_pre = concat_maps(projection(a4, x + u), fib)
    return compose(A, left_pre), compose(A, right_pre), a4


def _ax_add_comm(s: StructSet, k: int):
    A = s.build("add", k)
    sw = projection(3 * k, list(range(k)) + list(range(2 * k, 3 * k))
                    + list(range(k, 2 * k)))
    return A, compose(A, sw), 3 * k


def _ax_add_unit(s: StructSet, k: int):
    A = s.build("add", k)
    pad = smooth_map(2 * k, [Var(i) for i in range(2 * k)] + [con(0)] * k)
    return compose(A, pad), identity_map(2 * k), 2 * k


def _ax_proj_zero(s: StructSet, k: int):
    return compose(s.build("proj", k), s.build("zero", k)), identity_map(k), k


def _ax_proj_add(s: StructSet, k: int):
    P = s.build("proj", k)
    A = s.build("add", k)
    pi0 = projection(3 * k, range(2 * k))
    return compose(P, A), compose(P, pi0), 3 * k


def _ax_lift_add(s: StructSet, k: int):
    L = s.build("lift", k)
    A = s.build("add", k)
    TA = tangent_map(A, 1)
    x = [Var(i) for i in range(k)]
    u = [Var(k + i) for i in range(k)]
    w = [Var(2 * k + i) for i in range(k)]
    zero = [con(0)] * k
    pair = smooth_map(3 * k, x + zero + zero + zero + u + w)
    return compose(L, A), compose(TA, pair), 3 * k


def _ax_lift_zero(s: StructSet, k: int):
    L = s.build("lift", k)
    Z = s.build("zero", k)
    return compose(L, Z), compose(tangent_map(Z, 1), Z), k


def _ax_flip_add(s: StructSet, k: int):
    C = s.build("flip", k)
    A = s.build("add", k)
    TA = tangent_map(A, 1)
    A_tx = s.build("add", 2 * k)
    x = list(range(k))
    ss = list(range(k, 2 * k))
    t = list(range(2 * k, 3 * k))
    xp = list(range(3 * k, 4 * k))
    sp = list(range(4 * k, 5 * k))
    tp = list(range(5 * k, 6 * k))
    shuffle = projection(6 * k, x + xp + ss + sp + t + tp)
    return compose(C, TA), compose(A_tx, shuffle), 6 * k


def _ax_flip_zero(s: StructSet, k: int):
    C = s.build("flip", k)
    Z = s.build("zero", k)
    return compose(C, tangent_map(Z, 1)), s.build("zero", 2 * k), 2 * k


def _ax_flip_invol(s: StructSet, k: int):
    C = s.build("flip", k)
    return compose(C, C), identity_map(4 * k), 4 * k


def _ax_flip_lift(s: StructSet, k: int):
    C = s.build("flip", k)
    L = s.build("lift", k)
    return compose(C, L), L, 2 * k


def _ax_lift_coassoc(s: StructSet, k: int):
    L = s.build("lift", k)
    TL = tangent_map(L, 1)
    L_tx = s.build("lift", 2 * k)
    return compose(TL, L), compose(L_tx, L), 2 * k


def _ax_flip_braid(s: StructSet, k: int):
    TC = tangent_map(s.build("flip", k), 1)
    C2 = s.build("flip", 2 * k)
    lhs = compose(C2, compose(TC, C2))
    rhs = compose(TC, compose(C2, TC))
    return lhs, rhs, 8 * k


def _ax_lift_flip_exch(s: StructSet, k: int):
    C = s.build("flip", k)
    TC = tangent_map(C, 1)
    TL = tangent_map(s.build("lift", k), 1)
    L2 = s.build("lift", 2 * k)
    C2 = s.build("flip", 2 * k)
    return compose(TL, C), compose(C2, compose(TC, L2)), 4 * k


AXIOM_CATALOG = (
    ("add-assoc", "(a + b) + c = a + (b + c)", _ax_add_assoc),
    ("add-comm", "a + b = b + a", _ax_add_comm),
    ("add-unit", "a + 0(p(a)) = a", _ax_add_unit),
    ("proj-zero", "p . 0 = id", _ax_proj_zero),
    ("proj-add", "p . (+) = p . pi0", _ax_proj_add),
    ("lift-add", "l . (+) = T(+) . (l, l)", _ax_lift_add),
    ("lift-zero", "l . 0 = T(0) . 0", _ax_lift_zero),
    ("flip-add", "c . T(+) = (+)_T . (c, c)", _ax_flip_add),
    ("flip-zero", "c . T(0) = 0_T", _ax_flip_zero),
    ("flip-invol", "c . c = id", _ax_flip_invol),
    ("flip-lift", "c . l = l", _ax_flip_lift),
    ("lift-coassoc", "T(l) . l = l . l", _ax_lift_coassoc),
    ("flip-braid", "c . T(c) . c = T(c) . c . T(c)", _ax_flip_braid),
    ("lift-flip-exch", "T(l) . c = c . T(c) . l", _ax_lift_flip_exch),
)


def axiom_ids() -> list:
    return [name for name, _, _ in AXIOM_CATALOG]


def check_axiom(name: str, k: int, mode: str = "exact",
                structs: StructSet = STANDARD_STRUCTS,
                cfg: CheckConfig = DEFAULT_CONFIG) -> LawResult:
    """Check one catalog identity at base dimension k."""
    for ax_name, anchor, builder in AXIOM_CATALOG:
        if ax_name == name:
            lhs, rhs, arity = builder(structs, k)
            verdict = equal_maps(lhs, rhs, cube(arity), cfg)
            res = law_from_verdict(f"{name}@k={k}", anchor, verdict,
                                   provenance={"seed": cfg.seed,
                                               "count": cfg.count,
                                               "tol": cfg.tol})
            if mode == "exact" and res.verdict is Verdict.PASS_NUMERIC:
                return replace(res, verdict=Verdict.UNKNOWN,
                               note="exact mode requires canonical equality")
            return res
    raise KeyError(f"unknown axiom id {name!r}")


def check_all_axioms(dims: Sequence[int] = (1, 2, 3),
                     structs: StructSet = STANDARD_STRUCTS,
                     cfg: CheckConfig = DEFAULT_CONFIG) -> CheckReport:
    report = CheckReport("tangent category axioms")
    for name, _, _ in AXIOM_CATALOG:
        for k in dims:
            report.add(check_axiom(name, k, "exact", structs, cfg))
    return report


# --------------------------------------------------------------------------
# Naturality: each transformation commutes with T applied to any map.


def _t2_chart_map(f: SmoothMap) -> SmoothMap:
    """Action of the constrained-pair functor on the free chart."""
    m, n = f.arity, f.coarity
    Tf = tangent_map(f, 1)
    tan = projection(2 * n, range(n, 2 * n))
    first = compose(tan, _restrict(Tf, 3 * m, list(range(2 * m))))
    x_w = list(range(m)) + list(range(2 * m, 3 * m))
    second = compose(tan, _restrict(Tf, 3 * m, x_w))
    base = _restrict(f, 3 * m, range(m))
    return concat_maps(base, first, second)


def naturality_square(kind: str, f: SmoothMap,
                      structs: StructSet = STANDARD_STRUCTS):
    """Both composites of the naturality square of one structure map
    against f, as maps on the appropriate free chart."""
    m, n = f.arity, f.coarity
    Tf = tangent_map(f, 1)
    if kind == "proj":
        return compose(f, struct_map("proj", 0, m, structs)), \
            compose(struct_map("proj", 0, n, structs), Tf)
    if kind == "zero":
        return compose(struct_map("zero", 0, n, structs), f), \
            compose(Tf, struct_map("zero", 0, m, structs))
    if kind == "add":
        return compose(struct_map("add", 0, n, structs), _t2_chart_map(f)), \
            compose(Tf, struct_map("add", 0, m, structs))
    if kind == "neg":
        return compose(struct_map("neg", 0, n, structs), Tf), \
            compose(Tf, struct_map("neg", 0, m, structs))
    if kind == "lift":
        return compose(struct_map("lift", 0, n, structs), Tf), \
            compose(tangent_map(f, 2), struct_map("lift", 0, m, structs))
    if kind == "flip":
        T2f = tangent_map(f, 2)
        return compose(struct_map("flip", 0, n, structs), T2f), \
            compose(T2f, struct_map("flip", 0, m, structs))
    raise KeyError(f"unknown structure map kind {kind!r}")


NATURAL_TRANSFORMS = ("proj", "zero", "add", "neg", "lift", "flip")
