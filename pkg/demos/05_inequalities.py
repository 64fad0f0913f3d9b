"""Random testing of the elementary inequalities behind the energy estimates."""
from fraccyl.analysis import check_elementary_inequalities

for p in (2.5, 3.0, 4.0):
    rep = check_elementary_inequalities(p, 200_000, seed=1)
    print(p, rep.summary())

# With constant 1 the monotonicity bound fails for exponents above 2 when signs differ
rep = check_elementary_inequalities(3.0, 10_000, seed=0)
print("unit constant violations:", rep.parameters["unit_constant_violations"])
