# %% [markdown]
# # Frequent itemsets and rules
#
# Rows are turned into item-id transactions, mined with the vertical bitset
# miner, and split into single-consequent rules.

# %%
from hmit import build_codebook, discretize, load_benchmark, to_transactions
from hmit.mining import MiningParams, generate_rules, mine_frequent

tictac = load_benchmark("tictac")
binned, _ = discretize(tictac)
cb = build_codebook(binned)
tx = to_transactions(binned, cb)

params = MiningParams(min_sup=0.05, min_conf=0.8)
frequent = mine_frequent(tx, params, cb)
rules = generate_rules(frequent, params, cb)
print(len(cb), "items,", len(frequent), "frequent itemsets,", len(rules), "rules")

# %% [markdown]
# The strongest rules, printed with readable item labels.

# %%
for r in sorted(rules, key=lambda r: -r.confidence)[:8]:
    ante = " & ".join(cb.label(i, tictac.schema) for i in r.antecedent.items)
    print(f"{ante} => {cb.label(r.consequent, tictac.schema)}  conf={r.confidence:.2f}")

# %% [markdown]
# Raising the support threshold can only shrink the result.

# %%
for s in (0.02, 0.05, 0.1, 0.2):
    print(s, len(mine_frequent(tx, MiningParams(s), cb)))
