"""Self-similar source-type (Barenblatt) solutions with rho = 1, f(r) = r.

For u_t = div(u^{m-1} |grad u|^{p-2} grad u) in R^N with k = p + m - 3 > 0:

    u(r, t) = t^{-a} (C - c xi^{p/(p-1)})_+^{(p-1)/k},   xi = r t^{-a/N},
    a = N / (N k + p),   c = (k / p) (a / N)^{1/(p-1)}.

For p = 2 this reduces to t^{-a}(C - a(m-1)/(2N) r^2 t^{-2a/N})_+^{1/(m-1)}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import beta as beta_fn

from .errors import InvalidSpecError
from .geometry import sphere_area


@dataclass(frozen=True)
class Barenblatt:
    N: int
    p: float
    m: float
    C: float

    @classmethod
    def with_mass(cls, N: int, p: float, m: float, mass: float) -> "Barenblatt":
        if p + m - 3 <= 0 or mass <= 0:
            raise InvalidSpecError("need p + m - 3 > 0 and positive mass")
        b = cls(N, p, m, 1.0)
        return cls(N, p, m, (mass / b.mass()) ** (1.0 / b._mass_power))

    @property
    def k(self) -> float:
        return self.p + self.m - 3.0

    @property
    def a(self) -> float:
        """Decay exponent of the sup norm."""
        return self.N / (self.N * self.k + self.p)

    @property
    def c(self) -> float:
        return (self.k / self.p) * (self.a / self.N) ** (1.0 / (self.p - 1.0))

    @property
    def _gamma(self) -> float:
        return (self.p - 1.0) / self.k

    @property
    def _mass_power(self) -> float:
        return self._gamma + self.N * (self.p - 1.0) / self.p

    def mass(self) -> float:
        """omega_N int_0^inf (C - c xi^s)_+^g xi^{N-1} dxi in closed form."""
        s = self.p / (self.p - 1.0)
        g = self._gamma
        x0 = (self.C / self.c) ** (1.0 / s)
        # substitute y = (xi/x0)^s
        integral = (self.C ** g) * x0 ** self.N / s * beta_fn(self.N / s, g + 1.0)
        return sphere_area(self.N) * integral

    def support_radius(self, t: float) -> float:
        s = self.p / (self.p - 1.0)
        return (self.C / self.c) ** (1.0 / s) * t ** (self.a / self.N)

    def sup(self, t: float) -> float:
        return self.C ** self._gamma * t ** (-self.a)

    def __call__(self, r, t):
        r = np.asarray(r, dtype=float)
        xi = r * t ** (-self.a / self.N)
        base = np.clip(self.C - self.c * xi ** (self.p / (self.p - 1.0)), 0.0, None)
        return t ** (-self.a) * base ** self._gamma
