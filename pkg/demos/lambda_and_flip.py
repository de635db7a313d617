"""Average received power and the resulting vote-flip probability.

Run: python3 demos/lambda_and_flip.py
"""

from fskmv.analysis import flip_prob
from fskmv.geometry import CellConfig, lambda_param

cell = CellConfig(num_eds=50, noise_var=0.01)
print("alpha_eff  lambda     flip prob (q=0.1)")
for a in (0, 1, 2, 3, 4):
    c = cell.with_alpha_eff(a)
    lam = lambda_param(c)
    xi = 2 * lam / c.noise_var
    print(f"{a:9d}  {lam:.6f}  {flip_prob(0.1, c.num_eds, xi):.5f}")
# weaker power control lowers lambda, so the noise floor matters more
