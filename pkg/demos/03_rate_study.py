"""How fast does the cylinder solution forget its ends?"""
from dataclasses import replace

from fraccyl.experiments import (
    RateStudyConfig,
    elliptic_rate_study,
    theoretical_elliptic_rate,
)

cfg = RateStudyConfig()
print("s, p =", cfg.s, cfg.p, " predicted exponent:", theoretical_elliptic_rate(cfg.s, cfg.p))

res = elliptic_rate_study(cfg)
for ell, err in res.table:
    print(f"ell={ell:<4g} windowed L^p error={err:.3e}")
print(f"fitted slope {res.fit.slope:.2f}, r^2={res.fit.r_squared:.3f}, pass={res.passed}")

# A smaller s lowers the predicted rate, and the observed decay slows down too
slow = replace(cfg, s=0.7, ell_list=(2.0, 4.0, 8.0))
res = elliptic_rate_study(slow)
print("s=0.7 errors:", ", ".join(f"{e:.2e}" for _, e in res.table), f"slope {res.fit.slope:.2f}")
