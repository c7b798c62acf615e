"""Walk through the exponents and constants for the Darcy-Forchheimer law g(s) = 1 + s.

Run with ``python3 demos/constants_tour.py``.
"""

import math

import numpy as np

from forchlab.constitutive import ForchheimerLaw
from forchlab.estimates import boundary_functionals, lemma31_constants, moser_constants
from forchlab.grid import Grid
from forchlab.inequalities import elliptic_ps_params, genn_bound, parabolic_ps_params, random_admissible_genn
from forchlab.model import DataSpec, DomainSpec, ProblemSpec, ScaledParams

law = ForchheimerLaw((0, 1), (1, 1))
c = law.constants()
print(f"a = {c.a:.6g}, chi0 = {c.chi0:.6g}, c4 = {c.c4:.6g}")

# weighted Poincare-Sobolev exponents
E = elliptic_ps_params(3, 1.5, 0.9, 2, 2, 20)
P = parabolic_ps_params(3, 1.5, 0.9, 2, 20)
print(f"elliptic: theta = {E.theta:.6f}, mu = {E.mu:.6f}, identity residual = {E.identity_residual():.1e}")
print(f"parabolic: kappa = {P.kappa:.6f}, theta~ = {P.theta_tilde:.6f}")

# L^alpha stage
dom = DomainSpec()
L = lemma31_constants(c, 20, 0.9, dom)
print(f"L^alpha stage at alpha=20: bar_c = {L.bar_c:.4f}, gamma = {L.gamma:.6f}, "
      f"C0 = {L.C0:.4g}, C* = {L.C_star:.4g}")

# L^infty stage
M = moser_constants(c, 0.9, 1.1, 40, (1.05,) * 4, dom)
print(f"Moser stage: lambda0 = {M.lambda0:.6f}, kappa^ = {M.kappa_hat:.6f}, ell1 = {M.ell1:.6g}, "
      f"ell4 = {M.ell4:.6f} (second route {M.ell4_G:.6f})")
print(f"  mu~ = {M.mu_tilde:.5f} < 1 < nu~ = {M.nu_tilde:.5f}, omega = {M.omega:.4f}, "
      f"log10 Cbar1 = {M.log_Cbar1 / math.log(10):.2f}")

# admissible time for the smooth demo data
spec = ProblemSpec(law, ScaledParams(0.05, 1.0, 0.5, 0.5), dom,
                   DataSpec(u0="0.1*(1+x) + 0.5*sin(pi*x)*sin(pi*y)*sin(pi*z)", psi="0.1*(1+x)*exp(-t)"))
F = boundary_functionals(spec, L, [0.0, 1.0], Grid(16), horizon=1.0)
print(f"chi* = {spec.chi_star:g}, E(0) = {F.E(0.0):.4g}, V0 = {F.V0:.6g}, t0 = {F.t0:.4g} (B = {F.B})")

# one draw of the sequence lemma
out = genn_bound(random_admissible_genn(np.random.default_rng(0)))
print(f"Genn lemma: direct max {out['direct_max']:.4g} <= bound {out['bound']:.4g}: {out['pass']}")
