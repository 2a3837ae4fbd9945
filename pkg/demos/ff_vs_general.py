"""Inverse-polynomial degrees for the frustration-free chain, FF route vs general route."""
from fidsus import build_ff_model, prepare_chi_f_ff
from fidsus.experiments import run_scaling_study
from fidsus.models import ModelSpec, dense_model

res = run_scaling_study("ff_vs_general")
for series, r, deg in res.rows:
    print(f"{series:15s} r={int(r):3d} degree={deg}")
for name, s in res.slopes.items():
    print(f"{name}: log-log slope {s:.3f}")

# the same comparison inside the full pipeline, n = 6
_, drive = dense_model(ModelSpec("ff_projector_chain", 6, 0.0))
prep = prepare_chi_f_ff(build_ff_model(6, "chain"), drive, eps=0.1)
print(f"n=6 chain: FF degree {prep.extra['ff_degree']}, general degree {prep.extra['general_degree']}")
