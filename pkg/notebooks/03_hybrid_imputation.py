# %% [markdown]
# # Rule firing with a kNN fallback
#
# Mine once on the corrupted table, then impute under partial and full
# matching. Partial matching lets a rule fire when most of its antecedent is
# present in the row.

# %%
from collections import Counter

from hmit import inject_missing, load_benchmark
from hmit.bench import score
from hmit.imputer import HmitConfig, HybridImputer, knn_impute_all

crx = load_benchmark("crx")
corrupted, mask = inject_missing(crx, 0.2, seed=1)
imp = HybridImputer(HmitConfig()).fit(corrupted)
print(len(imp.rules), "rules mined in", round(imp.mine_seconds * 1e3), "ms")

# %%
for label, cfg in [("partial p=0.8", HmitConfig(p=0.8)), ("full", HmitConfig(p=1.0, matching="full"))]:
    imputed, outcomes = imp.impute(cfg)
    methods = Counter(o.method for o in outcomes)
    s = score(imputed, mask, imp.bin_edges)
    print(f"{label:14s} {dict(methods)}  accuracy={s.accuracy:.3f}")

# %% [markdown]
# The kNN-only baseline for comparison.

# %%
imputed, _ = knn_impute_all(corrupted, k=10)
print("knn only       accuracy=%.3f" % score(imputed, mask, imp.bin_edges).accuracy)

# %% [markdown]
# A single cell's fired set, through the reference path.

# %%
cell = next(o.cell for o in imp.impute()[1] if o.method == "rule")
fired = imp.fired_set(cell)
print(cell, len(fired), "rules fired; first:", [imp.codebook.label(i, crx.schema) for i in fired.rules[0].antecedent.items])
