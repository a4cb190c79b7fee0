"""Profiles and homogeneous functions.

A homogeneous function of order ``alpha`` on R^n minus the origin is fixed by
its restriction to a hypersurface transversal to the rays.  Three such
restrictions are supported:

* the projective charts ``h(p) = u(p, +1)`` and ``h(p) = u(p, -1)``,
* the spherical profile ``g(theta1, theta2) = u(x(theta))`` (n = 3) with
  ``x = (cos t2 cos t1, cos t2 sin t1, sin t2)``,
* an ambient expression ``u(x)`` that is already homogeneous.

Every form is a plain Python expression over :mod:`rigidity.jets`, so the
same code yields values on arrays and exact derivatives on jets.  Missing
forms are derived from the ones supplied.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import jets
from .errors import ChartPoleError
from .jets import Jet

Expr = Callable[[Sequence], object]

_CHUNK = 16384


@dataclass(frozen=True)
class Profile:
    name: str
    dim: int
    formula: str
    citation: str = ""
    ambient: Optional[Expr] = None
    chart_plus: Optional[Expr] = None
    chart_minus: Optional[Expr] = None
    spherical: Optional[Expr] = None

    def __post_init__(self):
        if self.dim not in (3, 4):
            raise ValueError("profiles live in dimension 3 or 4")
        if self.ambient is None and self.chart_plus is None and self.chart_minus is None:
            if self.spherical is None:
                raise ValueError(f"profile {self.name!r} supplies no form")
            if self.dim != 3:
                raise ValueError("spherical profiles are defined for n = 3 only")

    def chart(self, sign: int = 1) -> Expr:
        """Restriction to the plane x_n = sign as an expression in n - 1 variables."""
        explicit = self.chart_plus if sign > 0 else self.chart_minus
        if explicit is not None:
            return explicit
        if self.ambient is not None:
            amb = self.ambient

            def h(p):
                last = np.full(np.shape(_value(p[0])), float(sign))
                return amb(list(p) + [last])

            return h
        if self.spherical is not None:
            sph = self.spherical

            def h(p):
                last = np.full(np.shape(_value(p[0])), float(sign))
                x = list(p) + [last]
                r = jets.norm(x)
                # order-one extension off the sphere
                t1 = jets.arctan2(x[1], x[0])
                t2 = jets.arcsin(x[2] / r)
                return r * sph([t1, t2])

            return h
        raise ChartPoleError(f"profile {self.name!r} has no chart with x_n = {sign:+d}")

    def spherical_form(self) -> Expr:
        if self.spherical is not None:
            return self.spherical
        if self.dim != 3:
            raise ValueError("spherical profile requires n = 3")
        if self.ambient is not None:
            amb = self.ambient
            return lambda t: amb(_sphere_point(t))
        hp, hm = self.chart_plus, self.chart_minus

        def g(t):
            x = _sphere_point(t)
            z = _value(x[2])
            if hp is not None and (hm is None or np.all(z > 0)):
                return x[2] * hp([x[0] / x[2], x[1] / x[2]])
            if hm is not None and np.all(z < 0):
                return -x[2] * hm([x[0] / -x[2], x[1] / -x[2]])
            raise ChartPoleError("spherical form from charts needs points in one chart")

        return g

    @property
    def forms(self) -> list[str]:
        out = []
        if self.ambient is not None:
            out.append("ambient")
        if self.chart_plus is not None:
            out.append("chart+")
        if self.chart_minus is not None:
            out.append("chart-")
        if self.spherical is not None:
            out.append("spherical")
        return out


def _value(c):
    return c.v if isinstance(c, Jet) else np.asarray(c)


def _sphere_point(t):
    t1, t2 = t
    c2 = jets.cos(t2)
    return [c2 * jets.cos(t1), c2 * jets.sin(t1), jets.sin(t2)]


def as_jet(expr_value, like: Jet) -> Jet:
    """Promote a constant produced by an expression to a jet shaped like ``like``."""
    if isinstance(expr_value, Jet):
        return expr_value
    return like._const(expr_value)


def eval_jet(expr: Expr, X: np.ndarray, order: int = 2) -> Jet:
    """Jet of ``expr`` at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    xs = jets.variables(X, order)
    return as_jet(expr(xs), xs[0])


def concat_jets(parts: Sequence[Jet]) -> Jet:
    d3 = None if parts[0].d3 is None else np.concatenate([p.d3 for p in parts])
    return Jet(
        np.concatenate([p.v for p in parts]),
        np.concatenate([p.d1 for p in parts]),
        np.concatenate([p.d2 for p in parts]),
        d3,
    )


def eval_values(expr: Expr, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = expr([X[:, i] for i in range(X.shape[1])])
    return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],)).copy()


@dataclass(frozen=True)
class HomogeneousFunction:
    """u(tx) = t**alpha u(x) for t > 0, determined by ``profile``."""

    profile: Profile
    alpha: float = 1.0

    @property
    def dim(self) -> int:
        return self.profile.dim

    @property
    def name(self) -> str:
        return self.profile.name

    def _ambient_expr(self, X: np.ndarray) -> Expr:
        p, a, n = self.profile, self.alpha, self.dim
        if p.ambient is not None:
            return p.ambient
        last = X[:, n - 1]
        if p.chart_plus is not None or p.chart_minus is not None:
            on_pole = last == 0
            need_minus = last < 0
            need_plus = last > 0
            missing = (
                (need_plus & (p.chart_plus is None)) | (need_minus & (p.chart_minus is None)) | on_pole
            )
            if np.any(missing):
                if p.spherical is None:
                    raise ChartPoleError(
                        f"profile {p.name!r}: point outside the supplied projective charts"
                    )
            else:
                mask = need_plus

                def u(x):
                    s = x[n - 1]
                    s_abs = jets.where(mask, s, -s) if isinstance(s, Jet) else np.abs(s)
                    q = [c / s_abs for c in x[: n - 1]]
                    parts = []
                    for sign, form in ((1, p.chart_plus), (-1, p.chart_minus)):
                        if form is None:
                            parts.append(None)
                            continue
                        parts.append(as_jet(form(q), q[0]) if isinstance(q[0], Jet) else form(q))
                    if parts[1] is None:
                        h = parts[0]
                    elif parts[0] is None:
                        h = parts[1]
                    elif isinstance(q[0], Jet):
                        h = jets.where(mask, parts[0], parts[1])
                    else:
                        h = np.where(mask, parts[0], parts[1])
                    return s_abs**a * h if a != 1 else s_abs * h

                return u
        sph = p.spherical

        def u(x):
            r = jets.norm(x)
            t1 = jets.arctan2(x[1], x[0])
            t2 = jets.arcsin(x[2] / r)
            g = sph([t1, t2])
            return (r**a if a != 1 else r) * g

        return u

    def eval(self, x) -> np.ndarray | float:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        if np.any(np.linalg.norm(X, axis=1) == 0):
            raise ValueError("homogeneous functions are not evaluated at the origin")
        vals = eval_values(self._ambient_expr(X), X)
        return float(vals[0]) if np.ndim(x) == 1 else vals

    def jet(self, x, order: int = 2) -> Jet:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        parts = []
        for i in range(0, X.shape[0], _CHUNK):
            Xc = X[i : i + _CHUNK]
            parts.append(eval_jet(self._ambient_expr(Xc), Xc, order))
        return parts[0] if len(parts) == 1 else concat_jets(parts)

    def gradient(self, x) -> np.ndarray:
        J = self.jet(x, 2)
        return J.d1[0] if np.ndim(x) == 1 else J.d1

    def hessian(self, x) -> np.ndarray:
        J = self.jet(x, 2)
        return J.d2[0] if np.ndim(x) == 1 else J.d2

    def third(self, x) -> np.ndarray:
        J = self.jet(x, 3)
        return J.d3[0] if np.ndim(x) == 1 else J.d3

    def minus_linear(self, c) -> "HomogeneousFunction":
        """u - c.x  (same singular set, same equation)."""
        c = np.asarray(c, dtype=float)
        base = self

        def amb(x):
            lin = sum(float(ci) * xi for ci, xi in zip(c, x))
            X = np.stack([_value(xi) for xi in x], axis=-1)
            return base._ambient_expr(np.atleast_2d(X))(x) - lin

        prof = Profile(
            name=f"{self.name}-minus-linear",
            dim=self.dim,
            formula=f"({self.profile.formula}) - c.x",
            citation=self.profile.citation,
            ambient=amb,
        )
        return HomogeneousFunction(prof, self.alpha)


# ---------------------------------------------------------------------------
# Registry


def _r(x):
    return jets.norm(x)


def _registry() -> dict[str, Profile]:
    c5 = np.sqrt(5.0) / 2.0
    items = [
        Profile("linear:x1", 3, "x1", "linear function", ambient=lambda x: x[0]),
        Profile("linear:x2", 3, "x2", "linear function", ambient=lambda x: x[1]),
        Profile("linear:x3", 3, "x3", "linear function", ambient=lambda x: x[2]),
        Profile(
            "linear:mix",
            3,
            "2 x1 - x2 + x3/2",
            "linear function",
            ambient=lambda x: 2.0 * x[0] - x[1] + 0.5 * x[2],
        ),
        Profile(
            "sh1-spherical",
            3,
            "g = cos(t2) sin(t1)  (u = x2, spherical form only)",
            "degree-one spherical harmonic",
            spherical=lambda t: jets.cos(t[1]) * jets.sin(t[0]),
        ),
        Profile("radial", 3, "|x|", "u = r, convex, not linear", ambient=_r),
        Profile(
            "ellipsoidal",
            3,
            "sqrt(x1^2 + 2 x2^2 + 3 x3^2)",
            "convex gauge function",
            ambient=lambda x: jets.sqrt(x[0] * x[0] + 2.0 * x[1] * x[1] + 3.0 * x[2] * x[2]),
        ),
        Profile(
            "q2-over-r",
            3,
            "(x1^2 - x2^2)/|x|",
            "R^3 analogue of the saddle scalar; definite Hessian at +-e1",
            ambient=lambda x: (x[0] * x[0] - x[1] * x[1]) / _r(x),
        ),
        Profile(
            "x1x2-over-r",
            3,
            "x1 x2/|x|",
            "quadratic over radius",
            ambient=lambda x: x[0] * x[1] / _r(x),
        ),
        Profile(
            "cubic-over-r2",
            3,
            "(x2^3 - 3 x2 x3^2)/|x|^2",
            "Hessian vanishes at eight isolated directions: +-e1 and six on the circle x1 = 0",
            ambient=lambda x: (x[1] ** 3 - 3.0 * x[1] * x[2] * x[2]) / (_r(x) ** 2),
        ),
        Profile(
            "trig",
            3,
            "|x| sin(x1/|x|) cos(x3/|x|) + x2",
            "smooth non-polynomial profile",
            ambient=lambda x: _r(x) * jets.sin(x[0] / _r(x)) * jets.cos(x[2] / _r(x)) + x[1],
        ),
        Profile(
            "exp-mix",
            3,
            "|x| exp(x2/|x|) - x1 x3/|x|",
            "smooth non-polynomial profile",
            ambient=lambda x: _r(x) * jets.exp(x[1] / _r(x)) - x[0] * x[2] / _r(x),
        ),
        Profile(
            "cubic-mix",
            3,
            "(x1^3 + x1 x2 x3 - 2 x3^3)/|x|^2",
            "cubic over squared radius",
            ambient=lambda x: (x[0] ** 3 + x[0] * x[1] * x[2] - 2.0 * x[2] ** 3) / (_r(x) ** 2),
        ),
        Profile("linear4:x1", 4, "x1", "linear function in R^4", ambient=lambda x: x[0]),
        Profile(
            "lo-scalar",
            4,
            "(x1^2 + x2^2 - x3^2 - x4^2)/|x|",
            "Lawson-Osserman cone: saddle scalar admitting elliptic coefficients",
            ambient=lambda x: (x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3]) / _r(x),
        ),
        Profile(
            "lo-f1",
            4,
            "sqrt(5)/2 (x1^2 + x2^2 - x3^2 - x4^2)/|x|",
            "Lawson-Osserman cone map, first component",
            ambient=lambda x: c5 * (x[0] * x[0] + x[1] * x[1] - x[2] * x[2] - x[3] * x[3]) / _r(x),
        ),
        Profile(
            "lo-f2",
            4,
            "sqrt(5)/2 (2 x1 x3 + 2 x2 x4)/|x|",
            "Lawson-Osserman cone map, second component",
            ambient=lambda x: c5 * (2.0 * x[0] * x[2] + 2.0 * x[1] * x[3]) / _r(x),
        ),
        Profile(
            "lo-f3",
            4,
            "sqrt(5)/2 (2 x2 x3 - 2 x1 x4)/|x|",
            "Lawson-Osserman cone map, third component",
            ambient=lambda x: c5 * (2.0 * x[1] * x[2] - 2.0 * x[0] * x[3]) / _r(x),
        ),
    ]
    return {p.name: p for p in sorted(items, key=lambda p: p.name)}


PROFILES: dict[str, Profile] = _registry()


def get_profile(name: str) -> Profile:
    if name.startswith("random:"):
        return random_profile(int(name.split(":", 1)[1]))
    try:
        return PROFILES[name]
    except KeyError:
        raise KeyError(f"unknown profile {name!r}") from None


def homogeneous(name: str, alpha: float = 1.0) -> HomogeneousFunction:
    return HomogeneousFunction(get_profile(name), alpha)


def list_profiles() -> list[dict]:
    return [
        {
            "name": p.name,
            "dim": p.dim,
            "formula": p.formula,
            "citation": p.citation,
            "forms": p.forms,
        }
        for p in PROFILES.values()
    ]


_MONOMIALS = [(i, j, k) for i in range(4) for j in range(4) for k in range(4) if 0 < i + j + k <= 3]


def random_profile(seed: int) -> Profile:
    """Smooth random order-one profile: r * (cubic polynomial + sine) of x/r."""
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=len(_MONOMIALS))
    b = rng.normal(size=3)
    s = rng.normal()

    def amb(x):
        r = _r(x)
        y = [c / r for c in x]
        total = s * jets.sin(b[0] * y[0] + b[1] * y[1] + b[2] * y[2])
        for c, (i, j, k) in zip(coef, _MONOMIALS):
            total = total + float(c) * (y[0] ** i) * (y[1] ** j) * (y[2] ** k)
        return r * total

    return Profile(
        f"random:{seed}",
        3,
        "|x| * (random cubic in x/|x| + s sin(b.x/|x|))",
        "random smooth profile",
        ambient=amb,
    )
