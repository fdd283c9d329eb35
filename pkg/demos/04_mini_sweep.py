# %% [markdown]
# # A miniature replicated comparison
#
# The same pipeline the sweep command runs: fresh data per replication, a
# 70:30 split, validation tuning for the two-tower model and cross-validation
# for the baselines. Sizes are tiny so this finishes in about a minute.

# %%
from t2rec.harness import ExperimentConfig, Scenario, run_scenario
from t2rec.synthgen import SyntheticSpec
from t2rec.twotower import TrainConfig

cfg = ExperimentConfig(
    spec=SyntheticSpec(n_users=80, n_items=80, D_u=8, D_i=8, p=4, d=2, n_ratings=2000),
    replications=3,
    lambda_grid=[1e-5, 1e-3, 1e-1],
    k_grid=[5, 20],
    hidden=24,
    n_layers=3,
    train=TrainConfig(max_epochs=40, patience=5),
    scenarios=[Scenario(80, 80, 2), Scenario(80, 80, 6)],
)
table = run_scenario(cfg)
print(table.to_text())
print(table.to_csv())
