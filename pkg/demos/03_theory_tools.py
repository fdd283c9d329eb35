# %% [markdown]
# # Computable pieces of the convergence analysis
#
# Constants, the deepening embedding, an empirical check of the
# parameter-perturbation bound, and the rate calculator.

# %%
import numpy as np

from t2rec.nn import forward
from t2rec.theory import BoundInputs, NetFamily, embed_network, lipschitz_constant, rate_report, verify_lipschitz
from t2rec.theory.checks import random_sparse_relu_net

for L in (1, 2, 4, 8):
    print(f"C(W=4, L={L}, B=0.5) = {lipschitz_constant(4, L, 0.5):.4g}")

# %% [markdown]
# A shallow sparse ReLU net embedded into a deeper, wider fixed shape computes
# the same function.

# %%
rng = np.random.default_rng(0)
net = random_sparse_relu_net(rng, [3, 5, 2], max_nonzero=16)
deep = embed_network(net, target_depth=6, width_cap=16)
x = rng.uniform(-1, 1, (500, 3))
print("widths", net.widths, "->", deep.widths)
print("max deviation", np.abs(forward(deep, x) - forward(net, x)).max())

# %% [markdown]
# Random perturbations of size `eps` never move outputs further than the bound.

# %%
rep = verify_lipschitz(NetFamily(W=4, L=3, B=0.5), eps=1e-3, trials=200)
print(f"violations {rep.violations}, largest ratio to bound {rep.max_ratio:.3f}")

# %% [markdown]
# The rate calculator combines the constants for one configuration.

# %%
report = rate_report(BoundInputs(W=50, L=5, B=1.0, W_item=50, L_item=5, B_item=1.0, p=30, M=1.0,
                                 beta=2.0, d_u=20, d_i=20, omega_size=100_000))
for key in ("rate_exponent", "rate_at_omega", "C1", "C2", "C3", "lambda_condition_holds"):
    print(f"{key:24s} {report.to_dict()[key]}")
