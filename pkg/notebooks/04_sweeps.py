# %% [markdown]
# # Sweeps and reports
#
# A small missing-rate sweep on two tables. The same corruption is shared by
# every method at a given (table, rate, replicate), so differences between
# methods are not seed noise.

# %%
from hmit.bench import ExperimentSpec, aggregate, compare_timing, export_report, run_sweep
from hmit import load_benchmark

spec = ExperimentSpec(datasets=("heart", "tictac"), missing_rate=(0.1, 0.4), seeds=(0, 1, 2))
metrics = run_sweep(spec)
for row in aggregate(metrics, timings=False):
    print(f"{row['dataset']:7s} {row['method']:12s} rate={row['missing_rate']}"
          f"  acc={row['accuracy_mean']:.3f}  coverage={row['ar_coverage_mean']:.3f}")

# %% [markdown]
# Reports without wall times are byte-stable across runs.

# %%
export_report(metrics, "csv", "sweep.csv", timings=False)
print(open("sweep.csv").read().splitlines()[0])

# %% [markdown]
# Phase timings on car, with mining reported apart from imputation.

# %%
print({k: round(v, 1) for k, v in compare_timing(load_benchmark("car"), repeats=3).items()})
