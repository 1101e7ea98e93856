# %% [markdown]
# # Polymer model
#
# Blocks `B^{2p}` and `A^p B^p` of Schrodinger transfer matrices with a
# bounded potential `0` and a large potential `v`. The certificate bounds the
# block norms through the `F_q` polynomials; the ergodic bound then follows
# from the Golden-Thompson inequality.

# %%
import json
from pathlib import Path

from lyapbound.cli import run
from lyapbound.dynamics import polymer_block_matrices
from lyapbound.schrodinger import (
    adjoint_identity_check,
    admissible_point,
    block_alignment_deficit,
    polymer_certificate,
    power_via_F,
)

HERE = Path(__file__).resolve().parent if "__file__" in globals() else Path("notebooks")

# %% [markdown]
# ## An admissible energy and potential for `p = 11`

# %%
p = 11
E, v, d1, d2 = admissible_point(p)
cert = polymer_certificate(E, v, p, d1, d2)
print(f"E={E:.6f} v={v:.3f} delta1={d1} delta2={d2}")
print(cert)

# %% [markdown]
# ## Alignment of the two blocks
#
# A single transfer matrix satisfies `U A U = A^T` for the anti-diagonal
# unitary `U`. Powers of one matrix inherit this, but the mixed block
# `A^p B^p` is sent to `(B^p A^p)^T`, so a pair of distinct blocks is only
# approximately adjoint-aligned. The bound uses the measured deficit.

# %%
blocks = polymer_block_matrices(E, v, p)
print("power pair  :", adjoint_identity_check([blocks["-"], power_via_F(E, p)]))
print("mixed pair  :", adjoint_identity_check([blocks["-"], blocks["+"]]))
print("alpha at p  :", block_alignment_deficit(E, v, p))
for q in (3, 4, 5, 8, 11, 20):
    Eq, vq, *_ = admissible_point(q)
    print(f"p={q:2d} alpha={block_alignment_deficit(Eq, vq, q):.4f}")

# %% [markdown]
# ## Certified bound against Monte Carlo (iid and Markov symbols)

# %%
for name in ("polymer_iid", "polymer_markov"):
    code, text, _ = run(["polymer", "--config", str(HERE / "configs" / f"{name}.json"), "--format", "json"])
    rows = {r["quantity"]: r for r in json.loads(text)["rows"]}
    mc = rows["block_exponent"]
    print(name, "exit", code, "bound", rows["exact_ergodic_bound"]["value"], "mc", mc["value"], mc["stderr"])
