# %% [markdown]
# # Stability under perturbation
#
# Aligned diagonal sequences keep a positive exponent after small
# perturbations. We sample families, perturb them and compare the
# certified lower bound with the realized finite exponent.

# %%
from pathlib import Path

from lyapbound.cli import run

HERE = Path(__file__).resolve().parent if "__file__" in globals() else Path("notebooks")

# %%
for name in ("stability_d2_eps02", "stability_d2_eps04", "stability_d3_eps02", "stability_d3_eps04"):
    code, text, _ = run(["stability", "--config", str(HERE / "configs" / f"{name}.json"), "--families", "5"])
    print(f"== {name} (exit {code})")
    print("\n".join(text.splitlines()[:8]))

# %% [markdown]
# ## Off-spectrum and Jacobi operators

# %%
for name in ("offspectrum", "jacobi", "jacobi_mixed"):
    sub = "offspectrum" if name == "offspectrum" else "jacobi"
    code, text, _ = run([sub, "--config", str(HERE / "configs" / f"{name}.json")])
    print(f"== {name} (exit {code})")
    print("\n".join(text.splitlines()[:8]))

# %% [markdown]
# The mixed-regime Jacobi configuration exits with code 2: its angles cross
# between the regimes where the sandwich applies, so no bound is certified.
