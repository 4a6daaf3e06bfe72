"""Tour of the built-in bulk energy densities.

Walks through the family constructors, evaluates values/derivatives and
convex conjugates, and runs the growth diagnostics (doubling condition,
derivative two-sided bound, convexity).  Saves a comparison plot to
demos/out/.
"""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from orlicz_elastica import (
    check_convexity,
    check_delta2,
    check_good_phi_prime,
    conjugate,
    make_family,
)

out_dir = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(out_dir, exist_ok=True)

# The four families. "quadratic" is the generalized Hooke bulk; the two
# power families differ in how the shift kappa enters; "log_corrected"
# multiplies the integrand by a logarithmic factor.
densities = {
    "quadratic (lam=1)": make_family("quadratic", lambda_tilde=1.0),
    "power_kappa (k=1, p=3)": make_family("power_kappa", kappa=1.0, p=3.0),
    "power_shifted (k=1, p=4)": make_family("power_shifted", kappa=1.0, p=4.0),
    "log_corrected (k=1, p=2, b=1)": make_family("log_corrected", kappa=1.0, p=2.0, beta=1.0),
}

print(f"{'density':34s} {'phi(1)':>10s} {'phi(2)':>10s} {'phi*(1)':>10s} "
      f"{'delta2 C':>9s} {'good C':>8s} {'convex':>6s}")
for name, phi in densities.items():
    d2 = check_delta2(phi)
    gp = check_good_phi_prime(phi)
    print(
        f"{name:34s} {phi.value(1.0):10.4f} {phi.value(2.0):10.4f} "
        f"{conjugate(phi, 1.0):10.4f} {d2.C_observed:9.3f} {gp.C_observed:8.3f} "
        f"{str(check_convexity(phi)):>6s}"
    )

# Fenchel-Young equality along the derivative graph: for any s, pairing
# s with t = phi'(s) turns the inequality s t <= phi(s) + phi*(t) into
# an equality; off the graph the inequality is strict.
phi = densities["power_shifted (k=1, p=4)"]
s = np.linspace(0.0, 3.0, 7)
t = phi.deriv(s)
gap = s * t - (phi.value(s) + conjugate(phi, t))
print("\nFenchel-Young equality gap along t = phi'(s):", np.abs(gap).max())

# A density that is convex but NOT doubling: phi(t) = e^t - t - 1.
import orlicz_elastica.nfunction as nf

expphi = nf.NFunction(lambda u: np.expm1(u) - u, np.expm1, np.exp)
print("exponential density doubling check:", check_delta2(expphi))

ts = np.linspace(0.0, 3.0, 300)
fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for name, phi in densities.items():
    ax1.plot(ts, phi.value(ts), label=name)
    ax2.plot(ts, phi.deriv(ts), label=name)
ax1.set_title("density")
ax2.set_title("derivative")
ax1.set_xlabel("t")
ax2.set_xlabel("t")
ax1.legend(fontsize=7)
fig.tight_layout()
path = os.path.join(out_dir, "bulk_densities.png")
fig.savefig(path, dpi=120)
print("wrote", path)
