"""A small replicated comparison of methods on one function."""
import numpy as np

from heibo import get_function, make_config, run_suite

tf = get_function("camel6")
methods = ("EI_OK", "HEI_WEAK", "HEI_DSD")
cfgs = {m: make_config(m, tf.domain, tf, n_ini=20, n_tot=40) for m in methods}
table = run_suite(cfgs, replications=3, f_min=tf.f_min, base_seed=1, workers=1)

for m in methods:
    print(f"{m:9s} final mean gap {table.final_mean(m):.3e}")
    print("          median log10 gap", np.round(table.median_log10(m)[::10], 2))

print(table.status)
