# %% [markdown]
# # Two-symbol example
#
# Two hyperbolic matrices, `diag(a, 1/a)` and the same shape rotated by
# `pi/4`, drawn iid. We compare three lower bounds on the top exponent
# with a Monte Carlo estimate and the trivial upper bound.

# %%
import json
import math
from pathlib import Path

import numpy as np

from lyapbound.cli import run
from lyapbound.gt_bounds import example_triple

HERE = Path(__file__).resolve().parent if "__file__" in globals() else Path("notebooks")
CONFIG = HERE / "configs" / "example.json"

# %% [markdown]
# ## Closed forms along a sweep in `a`

# %%
print(f"{'a':>10} {'worst':>10} {'gt':>10} {'upper':>10} {'gt/upper':>9}")
for a in np.geomspace(math.sqrt(1000), 1e6, 6):
    w, g, u = example_triple(a, a, 0.5)
    print(f"{a:10.3g} {w:10.4f} {g:10.4f} {u:10.4f} {g / u:9.4f}")

# %% [markdown]
# The Golden-Thompson bound beats the worst-case AP bound everywhere, but the
# ratio to the upper bound saturates near `1/sqrt(2)` for `a = b`, `pfrak = 1/2`.

# %% [markdown]
# ## The full CLI run at the reference configuration

# %%
code, text, _ = run(["example", "--config", str(CONFIG), "--format", "json", "--n", "20000", "--trials", "5"])
doc = json.loads(text)
print("exit", code)
for row in doc["rows"]:
    print(f"{row['case']:>12} {row['quantity']:>20} {row['value']!s:>22}")
