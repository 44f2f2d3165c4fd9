"""One optimization run and its stability diagnostic."""
import numpy as np

from heibo import get_function, make_config, run_bo, stability_trace

tf = get_function("camel3")
print(tf.name, tf.d, tf.f_min)

cfg = make_config("HEI_DSD", tf.domain, tf, n_ini=20, n_tot=50, seed=5)
trace = run_bo(cfg)
print("best", trace.x_best, trace.y_best)
print("gap", trace.y_best - tf.f_min)

# Best value so far, every 5 evaluations.
print(trace.best_y[::5])

# log(s_n(x_next) / max s_n): very negative values mean pure exploitation.
it, r, greedy = stability_trace(trace)
print(it[:10])
print(np.round(r[:10], 2))
print("min", r.min())

# The stabilized variant keeps the ratio above log(gamma).
stab = run_bo(make_config("STAB_HEI_DSD", tf.domain, tf, n_ini=20, n_tot=50, seed=5))
print("stabilized min", stability_trace(stab)[1].min(), np.log(0.2))
