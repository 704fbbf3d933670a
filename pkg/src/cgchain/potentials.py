"""Energy functions and reaction coordinates.

Pair potentials for the 1D chains, plus the catalog of small molecular
systems (2D toy double well, three-atom molecule, united-atom butane)
with analytic gradients, and their reaction coordinates.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels


# ---------------------------------------------------------------------------
# pair potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PairPotential:
    """A 1D pair potential with analytic derivative.

    kind is one of "quadratic", "quartic-w1", "quartic-w2", "polynomial",
    "hard-wall" (wrapping an inner potential, +inf for negative bonds).
    """

    kind: str
    params: tuple = ()
    inner: Optional["PairPotential"] = None

    @classmethod
    def quadratic(cls, a: float = 1.0) -> "PairPotential":
        return cls("quadratic", (float(a),))

    @classmethod
    def quartic_w1(cls) -> "PairPotential":
        """W1(y) = (y-1)^4/2 + y^2/2."""
        return cls("quartic-w1")

    @classmethod
    def quartic_w2(cls) -> "PairPotential":
        """W2(y) = (y-2.1)^4/4."""
        return cls("quartic-w2")

    @classmethod
    def polynomial(cls, coefficients) -> "PairPotential":
        return cls("polynomial", tuple(float(c) for c in coefficients))

    @classmethod
    def hard_wall(cls, inner: "PairPotential") -> "PairPotential":
        return cls("hard-wall", (), inner)

    @classmethod
    def from_name(cls, name: str, **kw) -> "PairPotential":
        name = name.lower()
        if name == "quadratic":
            return cls.quadratic(kw.get("a", 1.0))
        if name in ("paper-quartic-w1", "quartic-w1", "w1"):
            return cls.quartic_w1()
        if name in ("paper-quartic-w2", "quartic-w2", "w2"):
            return cls.quartic_w2()
        if name == "zero":
            return cls.polynomial([0.0])
        raise ValueError(f"unknown pair potential {name!r}")

    def __call__(self, y):
        """Return (value, derivative), vectorized over y."""
        y = np.asarray(y, dtype=float)
        if self.kind == "quadratic":
            a = self.params[0]
            return 0.5 * (y - a) ** 2, y - a
        if self.kind == "quartic-w1":
            t = y - 1.0
            return 0.5 * t**4 + 0.5 * y * y, 2.0 * t**3 + y
        if self.kind == "quartic-w2":
            t = y - 2.1
            return 0.25 * t**4, t**3
        if self.kind == "polynomial":
            c = np.asarray(self.params)
            v = np.polyval(c[::-1], y)
            d = np.polyval(np.polyder(c[::-1]), y) if len(c) > 1 else np.zeros_like(y)
            return v, d
        if self.kind == "hard-wall":
            v, d = self.inner(y)
            neg = y < 0
            v = np.where(neg, np.inf, v)
            d = np.where(neg, np.inf, d)
            return v, d
        raise ValueError(self.kind)

    def value(self, y):
        return self(y)[0]

    def derivative(self, y):
        return self(y)[1]

    def kernel_spec(self):
        """(code, params array, hard_wall flag) for the compiled kernels."""
        p = self
        hard = False
        if p.kind == "hard-wall":
            hard = True
            p = p.inner
        code = {
            "quadratic": kernels.PAIR_QUADRATIC,
            "quartic-w1": kernels.PAIR_QUARTIC_W1,
            "quartic-w2": kernels.PAIR_QUARTIC_W2,
            "polynomial": kernels.PAIR_POLYNOMIAL,
        }[p.kind]
        params = np.asarray(p.params if p.params else (0.0,), dtype=float)
        return code, params, hard

    def argmin(self, lo=-10.0, hi=10.0):
        """Rough location of the minimum (golden search on the value)."""
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(lambda y: float(self.value(y)), bounds=(lo, hi), method="bounded")
        return float(res.x)


# ---------------------------------------------------------------------------
# molecular systems
# ---------------------------------------------------------------------------


@dataclass
class MolecularSystem:
    """A small system with potential V and analytic gradient.

    energy_grad is a compiled kernel with signature (q, g_out, params) -> V.
    """

    name: str
    dof_count: int
    params: np.ndarray
    energy_grad: Callable
    parameters: dict = field(default_factory=dict)
    mixed_partial_bound: Optional[float] = None

    def eval(self, q):
        """Return (V, gradV) for a configuration."""
        q = np.asarray(q, dtype=float)
        if q.shape != (self.dof_count,):
            raise ValueError(f"{self.name} expects {self.dof_count} dofs, got shape {q.shape}")
        g = np.empty_like(q)
        v = self.energy_grad(q, g, self.params)
        return float(v), g

    def equilibrium(self):
        """A reference configuration near the global minimum."""
        return _EQUILIBRIA[self.name](self.parameters)


@dataclass
class ReactionCoordinate:
    """Scalar function of configuration with analytic gradient.

    xi_eval is a compiled kernel (q, gxi_out, params) -> (xi, laplacian);
    the laplacian is nan when no closed form is provided.
    """

    name: str
    xi_eval: Callable
    params: np.ndarray
    has_laplacian: bool
    period: Optional[float] = None

    def eval(self, q, want_laplacian=False):
        q = np.asarray(q, dtype=float)
        gxi = np.empty_like(q)
        xi, lap = self.xi_eval(q, gxi, self.params)
        if want_laplacian:
            if not self.has_laplacian:
                raise ValueError(
                    f"reaction coordinate {self.name!r} has no analytic laplacian; "
                    "use the detailed-balance (identity) coefficient path"
                )
            return float(xi), gxi, float(lap)
        return float(xi), gxi


def _toy2d_equilibrium(p):
    return np.array([1.0, 1.0])


def _three_atom_equilibrium(p):
    return three_atom_config(p["theta_saddle"] + p["delta_theta"], p["l_eq"], p["l_eq"])


def _butane_equilibrium(p):
    return butane_config(0.0, p["l_eq"], p["theta_eq"])


_EQUILIBRIA = {
    "toy2d": _toy2d_equilibrium,
    "three-atom": _three_atom_equilibrium,
    "butane": _butane_equilibrium,
}

DEFAULTS = {
    "toy2d": {"k": 5.0},
    "three-atom": {
        "epsilon": 1e-3,
        "k_theta": 208.0,
        "l_eq": 1.0,
        "theta_saddle": np.pi / 2,
        "delta_theta": np.pi / 2 - 1.187,
    },
    "butane": {
        "k2": 1000.0,
        "k3": 208.0,
        "l_eq": 1.0,
        "theta_eq": 1.187,
        "c1": 1.18,
        "c2": -0.23,
        "c3": 2.64,
    },
}


def make_system(name: str, **overrides) -> MolecularSystem:
    """Build a catalog system ("toy2d", "three-atom", "butane")."""
    if name not in DEFAULTS:
        raise ValueError(f"unknown system {name!r}; choose from {sorted(DEFAULTS)}")
    p = dict(DEFAULTS[name])
    unknown = set(overrides) - set(p)
    if unknown:
        raise ValueError(f"unknown parameters for {name}: {sorted(unknown)}")
    p.update(overrides)
    if name == "toy2d":
        params = np.array([p["k"]])
        return MolecularSystem(name, 2, params, kernels.toy2d_energy_grad, p, mixed_partial_bound=p["k"])
    if name == "three-atom":
        params = np.array([p["epsilon"], p["k_theta"], p["l_eq"], p["theta_saddle"], p["delta_theta"]])
        return MolecularSystem(name, 3, params, kernels.three_atom_energy_grad, p)
    params = np.array([p["k2"], p["k3"], p["l_eq"], p["theta_eq"], p["c1"], p["c2"], p["c3"]])
    return MolecularSystem(name, 6, params, kernels.butane_energy_grad, p)


_EMPTY = np.zeros(1)


def make_reaction_coordinate(system_name: str, rc_name: str) -> ReactionCoordinate:
    """Reaction coordinates of the catalog: toy2d "x"; three-atom "angle"
    (xi1) and "dist2" (xi2); butane "dihedral"."""
    key = (system_name, rc_name)
    if key == ("toy2d", "x"):
        return ReactionCoordinate("x", kernels.toy2d_xi_x, _EMPTY, True)
    if key == ("three-atom", "angle"):
        return ReactionCoordinate("angle", kernels.three_atom_xi_angle, _EMPTY, False)
    if key == ("three-atom", "dist2"):
        return ReactionCoordinate("dist2", kernels.three_atom_xi_dist2, _EMPTY, True)
    if key == ("butane", "dihedral"):
        return ReactionCoordinate("dihedral", kernels.butane_xi_dihedral, _EMPTY, False, period=2 * np.pi)
    raise ValueError(f"no reaction coordinate {rc_name!r} for system {system_name!r}")


def three_atom_config(theta, r_ab=1.0, r_bc=1.0):
    """Reduced three-atom configuration at given angle and bond lengths."""
    return np.array([-r_ab, r_bc * np.cos(np.pi - theta), r_bc * np.sin(np.pi - theta)])


def butane_config(phi, l=1.0, theta=1.187):
    """Reduced butane configuration with all bonds l, both angles theta,
    dihedral phi."""
    p1 = np.array([l * np.sin(theta), l * np.cos(theta), 0.0])
    p2 = np.zeros(3)
    p3 = np.array([0.0, l, 0.0])
    # place p4 from p3: bond direction making angle theta with p2-p3 axis,
    # rotated by phi about the p2->p3 axis (the y axis)
    axis = np.array([0.0, 1.0, 0.0])
    in_plane = np.array([l * np.sin(theta) * np.cos(phi), 0.0, l * np.sin(theta) * np.sin(phi)])
    p4 = p3 - l * np.cos(theta) * axis + in_plane
    return np.array([p1[0], p1[1], p3[1], p4[0], p4[1], p4[2]])
