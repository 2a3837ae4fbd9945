"""Command-line driver.

    fidsus sweep --config sweep.json [--out DIR] [--seed S] [--mode M] [--eps E] [--deterministic]
    fidsus scaling {heisenberg,gap_general,gap_ff,ff_vs_general} [--config F] [--eps E]
    fidsus estimate (--config F | --family tfim --n-qubits 4 --lam 0.8) [--eps E] [--seed S]
    fidsus poly-check --kind scaled_inverse --delta 0.25 --eps 1e-3
    fidsus verify-encodings (--config F | --family ...) [--eps E]

Exit codes: 0 success, 1 a verification failed, 2 configuration error,
3 assumption violation (degenerate ground state, not frustration-free),
4 resource cap (degree or register size).  The default output directory is
``$FIDSUS_OUT_DIR`` or ``./fidsus_out``.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .block_encoding import encode_matrix, ff_select_prepare, ff_shifted_encoding, h_sa_matrix, verify
from .errors import AssumptionViolation, ConfigError, ParameterError, ResourceCapError
from .experiments import (
    MODES,
    SCALING_KINDS,
    SweepConfig,
    default_out_dir,
    detect_peak,
    run_scaling_study,
    run_sweep,
)
from .models import ModelSpec, build_ff_model, build_model, dense_model, ground_data
from .operator_core import pseudoinverse
from .polynomials import (
    ApproxTarget,
    ff_inverse_poly,
    fit_inverse,
    sqrt_inverse_poly,
    sup_error,
)
from .qsvt import ff_pseudoinverse_encoding, hamiltonian_encoding, pseudoinverse_encoding
from .susceptibility import build_g_encoding, estimate_chi_f, estimate_chi_f_ff


def _out_dir(args) -> Path:
    return Path(args.out) if args.out else default_out_dir()


def _load_cfg(args) -> SweepConfig | None:
    return SweepConfig.load(args.config) if getattr(args, "config", None) else None


def _model_from_args(args) -> tuple[ModelSpec, float, int]:
    """Model, eps and seed from ``--config`` or the model flags."""
    cfg = _load_cfg(args)
    if cfg is not None:
        spec = cfg.model.at(cfg.lambda_grid[0])
        eps, seed = cfg.eps, cfg.seeds[0]
    else:
        if args.family is None or args.n_qubits is None:
            raise ConfigError("give --config or both --family and --n-qubits")
        spec = ModelSpec(args.family, args.n_qubits, args.lam)
        eps, seed = 0.05, 0
    if args.eps is not None:
        eps = args.eps
    if getattr(args, "seed", None) is not None:
        seed = args.seed
    return spec, eps, seed


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep needs --config")
    d = json.loads(Path(args.config).read_text()) if Path(args.config).exists() else None
    if d is None:
        raise ConfigError(f"config {args.config} not found")
    if args.mode is not None:
        d["mode"] = args.mode
    if args.eps is not None:
        d["eps"] = args.eps
    if args.seed is not None:
        d["seeds"] = [args.seed]
    cfg = SweepConfig.from_dict(d)
    res = run_sweep(cfg, _out_dir(args), deterministic=args.deterministic)
    print(f"wrote {len(res.rows)} rows to {res.csv_path}")
    if res.svg_path:
        print(f"wrote plot to {res.svg_path}")
    if len({r.lam for r in res.rows}) >= 5:
        pk = detect_peak(res.rows)
        note = f" ({pk.message})" if pk.message else ""
        print(f"peak estimate lambda_c = {pk.lam_c:.6g}{note}")
    return 0


def cmd_scaling(args) -> int:
    cfg = _load_cfg(args)
    if args.kind == "heisenberg" and cfg is None:
        cfg = SweepConfig.from_dict({"model": {"family": "tfim", "n_qubits": 2}, "grid": [1.0],
                                     "eps": 0.1, "mode": "quantum"})
    out = _out_dir(args) / f"scaling_{args.kind}.csv"
    res = run_scaling_study(args.kind, cfg, eps=args.eps, out_path=out)
    for name, s in res.slopes.items():
        print(f"{name}: log-log slope {s:.4f}")
    print(f"wrote {out}")
    return 0


def cmd_estimate(args) -> int:
    spec, eps, seed = _model_from_args(args)
    mode = args.mode or "quantum"
    if mode == "ff":
        if spec.family != "ff_projector_chain" or spec.lam != 0.0:
            raise ConfigError("ff estimation needs the ff_projector_chain family at lambda 0")
        _, drive = build_model(spec)
        rep = estimate_chi_f_ff(build_ff_model(spec.n_qubits, "chain"), drive, eps, seed,
                                args.n_runs, args.backend)
    elif mode in ("quantum", "both"):
        rep = estimate_chi_f(spec, eps, seed, args.n_runs, args.backend)
    else:
        raise ConfigError("estimate supports --mode quantum, both or ff")
    text = rep.to_json()
    print(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(text + "\n")
    return 0


def cmd_poly_check(args) -> int:
    eps = args.eps if args.eps is not None else 1e-3
    if args.kind == "scaled_inverse":
        if args.delta is None:
            raise ConfigError("scaled_inverse needs --delta")
        p = fit_inverse(args.delta, eps)
        target, tol = ApproxTarget("scaled_inverse", delta=args.delta), eps
    elif args.kind == "sqrt_inverse":
        if args.delta is None:
            raise ConfigError("sqrt_inverse needs --delta")
        p = sqrt_inverse_poly(args.delta, eps)
        target, tol = ApproxTarget("sqrt_inverse", delta=args.delta), eps
    else:
        if args.r is None or args.gap is None:
            raise ConfigError("ff_inverse needs --r and --gap")
        p = ff_inverse_poly(args.r, args.gap, eps)
        target, tol = ApproxTarget("ff_inverse", r=args.r, gap=args.gap), eps / p.domain_note["K"]
    err = sup_error(p, target)
    mx = p.max_abs()
    ok = err <= tol and mx <= 1 + 1e-9
    print(f"kind={args.kind} degree={p.degree} parity={p.parity} sup_error={err:.3e} "
          f"tolerance={tol:.3e} max|p|={mx:.6f} {'PASS' if ok else 'FAIL'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"poly_{args.kind}.json").write_text(p.to_json() + "\n")
    return 0 if ok else 1


def cmd_verify(args) -> int:
    spec, eps, _ = _model_from_args(args)
    H, HI = dense_model(spec)
    sd, psi0 = ground_data(H)
    N = H.shape[0]
    shifted = H - sd.e0 * np.eye(N)
    R = pseudoinverse(shifted)
    u_h = hamiltonian_encoding(H, sd.e0)
    u_i = encode_matrix(HI, tag="U_I")
    checks = [
        ("U_H", verify(u_h, shifted), u_h.eps),
        ("U_I", verify(u_i, HI), u_i.eps),
    ]
    pinv = pseudoinverse_encoding(u_h, sd.gap, eps)
    checks.append(("(H-E0)^+", verify(pinv, R), pinv.eps))
    checks.append(("ground annihilation", float(np.linalg.norm(pinv.encoded() @ psi0)), pinv.eps))
    g = build_g_encoding(u_h, u_i, sd.gap, eps)
    checks.append(("G", verify(g, R @ HI), g.eps))
    if spec.family == "ff_projector_chain" and spec.lam == 0.0:
        model = build_ff_model(spec.n_qubits, "chain")
        u_sa = ff_select_prepare(model)
        r_pad = u_sa.meta["r_padded"]
        top = u_sa.encoded()[:, :N]
        checks.append(("H_SA", float(np.linalg.norm(top - h_sa_matrix(model), 2)), 0.0))
        u_f = ff_shifted_encoding(u_sa)
        checks.append(("U_F", verify(u_f, np.eye(N) - 2 * model.h_f / r_pad), 0.0))
        ffp = ff_pseudoinverse_encoding(u_f, r_pad, sd.gap, eps)
        checks.append(("H_F^+ (FF)", verify(ffp, R), ffp.eps))
    ok = True
    for name, disc, declared in checks:
        passed = disc <= declared + 1e-9
        ok &= passed
        print(f"{name:22s} discrepancy={disc:.3e} declared={declared:.3e} {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fidsus", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model_flags=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output directory (default $FIDSUS_OUT_DIR or ./fidsus_out)")
        p.add_argument("--seed", type=int, help="seed override (unsigned 64-bit)")
        p.add_argument("--deterministic", action="store_true",
                       help="omit the timestamp comment so reruns are byte-identical")
        p.add_argument("--mode", choices=MODES, help="computation mode override")
        p.add_argument("--eps", type=float, help="target accuracy override")
        if model_flags:
            p.add_argument("--family", help="model family (tfim, xxz, ff_projector_chain)")
            p.add_argument("--n-qubits", type=int)
            p.add_argument("--lam", type=float, default=0.0)
            p.add_argument("--n-runs", type=int, default=1, help="odd number of median readouts")
            p.add_argument("--backend", default="spectral", choices=("spectral", "cheb_lcu"))

    p = sub.add_parser("sweep", help="chi_F over a lambda grid")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scaling", help="query or degree scaling study")
    p.add_argument("kind", choices=SCALING_KINDS)
    common(p)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("estimate", help="one end-to-end estimate, printed as JSON")
    common(p, model_flags=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("poly-check", help="fit and check one approximating polynomial")
    p.add_argument("--kind", required=True, choices=("scaled_inverse", "ff_inverse", "sqrt_inverse"))
    p.add_argument("--delta", type=float)
    p.add_argument("--r", type=int)
    p.add_argument("--gap", type=float)
    common(p)
    p.set_defaults(func=cmd_poly_check)

    p = sub.add_parser("verify-encodings", help="check every encoding against its dense target")
    common(p, model_flags=True)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except AssumptionViolation as exc:
        print(f"assumption violated: {exc}", file=sys.stderr)
        return 3
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
