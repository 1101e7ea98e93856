# %% [markdown]
# # Multivariate Golden-Thompson
#
# For Hermitian `H_1..H_n`, `log ||exp(sum H_j)|| <= integral of
# log ||prod exp((1+it) H_j / 2)||^2 against the density beta(t)`.
# We check the inequality on random families and look at the quadrature.

# %%
import numpy as np

from lyapbound.gt_bounds import GTQuadrature, gt_check, gt_density, gt_tail_mass, random_hermitian_family
from lyapbound.rng import make_rng

# %%
ts = np.linspace(-3, 3, 7)
print("density :", np.round(gt_density(ts), 6))
print("tail T=8:", gt_tail_mass(8.0))

# %%
slack = []
for f in range(200):
    H = random_hermitian_family(make_rng(42, f))
    c = gt_check(H, GTQuadrature())
    slack.append(c.rhs - c.lhs)
slack = np.array(slack)
print(f"min slack {slack.min():.3e}  median {np.median(slack):.3e}  violations {(slack < -1e-9).sum()}")
