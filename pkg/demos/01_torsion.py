"""Torsion problem on an interval, compared with the exact ball solution."""
import numpy as np
from scipy.integrate import trapezoid
from scipy.special import gamma

from fraccyl.constants import FractionalParams, c_nsp, theta_np
from fraccyl.grids import ForcingSpec, make_cross_section_grid, sample_forcing
from fraccyl.solvers import solve_cross_section

# The kernel constant and the fiber factor tie the N=2 and N=1 operators together
for s in (0.5, 0.9):
    print(f"s={s}: C_2={c_nsp(2, s, 2.5):.6f}  C_2*theta={c_nsp(2, s, 2.5) * theta_np(2, s, 2.5):.6f}"
          f"  C_1={c_nsp(1, s, 2.5):.6f}")

# At p=2 the solution of (-Delta)^s u = 1 on (-1,1) is (1-x^2)^s / lambda
s = 0.5
lam = 4 ** s * gamma(0.5 + s) * gamma(1 + s) / gamma(0.5)
params = FractionalParams(1, s, 2.0)
x = np.linspace(-1, 1, 4001)
exact = (1 - x ** 2) ** s / lam

for h in (1 / 8, 1 / 16, 1 / 32):
    grid = make_cross_section_grid(-1, 1, h)
    u = solve_cross_section(grid, sample_forcing(ForcingSpec(), grid), params)
    err = np.sqrt(trapezoid((u(x) - exact) ** 2, x) / trapezoid(exact ** 2, x))
    print(f"h=1/{round(1 / h):<3d} u(0)={u(0.0):.5f}  exact={1 / lam:.5f}  L2 rel err={err:.3%}")

# The error halves with h, the rate expected for a solution that is only C^{1/2} at the ends
