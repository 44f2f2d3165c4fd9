"""Expected improvement under Gaussian and Student-t predictives."""
import numpy as np

from heibo import ei_value, hei_value, sei_value, ucb_score

# At zero predicted improvement EI is s * phi(0), HEI adds a tail bonus.
print(ei_value(0.0, 1.0), 1 / np.sqrt(2 * np.pi))
print(hei_value(0.0, 1.0, 5.0))

# Few degrees of freedom favour uncertain points more strongly.
I = np.linspace(-3, 3, 7)
for df in (3.0, 10.0, 100.0):
    print(f"df={df:5.0f}", np.round(hei_value(I, 1.0, df), 4))
print("gauss   ", np.round(ei_value(I, 1.0), 4))

# SEI uses the same closed form with fixed (a, b).
print(np.allclose(hei_value(I, 0.7, 8.0), sei_value(I, 0.7, 8.0)))

# UCB for minimization: a lower confidence bound, negated so larger is better.
print(ucb_score(np.array([0.0, 1.0]), np.array([1.0, 0.1]), 2.96))
