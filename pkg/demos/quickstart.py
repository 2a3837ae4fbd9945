"""One fidelity-susceptibility estimate on a 4-qubit Ising chain.

Run with ``python3 demos/quickstart.py``.
"""
from fidsus import ModelSpec, prepare_chi_f

spec = ModelSpec("tfim", 4, 1.0)
prep = prepare_chi_f(spec, eps=0.05)
print(f"alpha_Q = {prep.alpha:.4f}, K = {prep.K}, inverse degree = {prep.degree}")

for seed in range(5):
    rep = prep.run(seed, n_runs=15)
    err = abs(rep.chi_f_hat - rep.oracle_values["eq3"])
    print(f"seed {seed}: chi_F ~ {rep.chi_f_hat:.5f}  exact {rep.oracle_values['eq3']:.5f}  |err| {err:.2e}")

print("queries per estimate:", rep.queries)
