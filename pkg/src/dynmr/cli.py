"""Command-line front end for the reconstruction pipeline.

Subcommands cover the whole workflow: synthesize phantoms and masks, run the
classical solver or a trained network on retrospectively undersampled data,
train from a config file, score reconstructions, and smoke-test the analytic
gradients.  Exit codes: 0 success, 2 usage error, 3 data/format error,
4 numerical failure.
"""

import argparse
import math
import sys

import numpy as np

from .admm import AdmmConfig, reconstruct
from .encoding import Encoder, make_pseudo_radial_mask, make_vds_mask
from .errors import FormatError, NumericalError
from .fileio import load_checkpoint, load_dmrt, save_dmrt
from .gradcheck import run_gradcheck
from .metrics import psnr, ssim
from .network import NetworkConfig, network_forward
from .phantom import PhantomSpec, generate_phantom, make_phantom_dataset
from .training import TrainConfig, train_loop

PSNR_DISPLAY_CAP = 999.99


def _shape(text):
    parts = text.lower().split("x")
    try:
        dims = tuple(int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected HxWxT")
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected HxWxT")
    return dims


def _load_volume(path):
    v = load_dmrt(path)
    if v.ndim != 3:
        raise FormatError(f"{path}: expected a 3-d volume, got shape {v.shape}")
    return v.astype(np.complex128)


def _load_mask(path):
    m = load_dmrt(path)
    if m.ndim != 3:
        raise FormatError(f"{path}: expected a 3-d mask, got shape {m.shape}")
    if not np.all((m == 0) | (m == 1)):
        raise FormatError(f"{path}: mask entries must be 0 or 1")
    return m.astype(np.uint8)


def _cmd_phantom(args):
    spec = PhantomSpec(
        shape=args.shape, n_ellipses=args.ellipses, motion=args.motion, seed=args.seed
    )
    save_dmrt(args.out, generate_phantom(spec))
    return 0


def _cmd_mask(args, parser):
    if args.pattern == "radial":
        if args.spokes is None:
            parser.error("--pattern radial requires --spokes")
        mask = make_pseudo_radial_mask(args.shape, args.spokes, seed=args.seed)
    else:
        if args.accel is None:
            parser.error("--pattern vds requires --accel")
        mask = make_vds_mask(
            args.shape, args.accel, center_lines=args.center_lines, seed=args.seed
        )
    save_dmrt(args.out, mask)
    return 0


def _cmd_recon_admm(args):
    gt = _load_volume(args.data)
    mask = _load_mask(args.mask)
    encoder = Encoder(mask)
    b = encoder.forward(gt)
    cfg = AdmmConfig(
        lam=args.lam,
        mu=args.mu,
        eta=args.eta,
        n_iters=args.iters,
        x_update={"closed": "closed_form", "cg": "cg"}[args.x_update],
    )
    x, records = reconstruct(b, encoder, cfg)
    save_dmrt(args.out, x)
    if args.diag is not None:
        with open(args.diag, "w") as fh:
            fh.write("iteration objective fidelity l1 constraint\n")
            for r in records:
                fh.write(
                    f"{r.iteration} {r.objective:.12e} {r.fidelity:.12e} "
                    f"{r.l1_term:.12e} {r.constraint:.12e}\n"
                )
    return 0


_INT_KEYS = {
    "epochs",
    "decay_steps",
    "batch",
    "seed",
    "n_phases",
    "nc",
    "f_depth",
    "fhat_depth",
    "n_samples",
    "ellipses",
    "spokes",
    "center_lines",
}
_FLOAT_KEYS = {"lr0", "decay", "zeta", "sigma", "motion", "accel"}
_STR_KEYS = {"dc_mode", "pattern"}

_TRAIN_DEFAULTS = {
    "n_samples": 8,
    "shape": (32, 32, 8),
    "ellipses": 6,
    "motion": 0.08,
    "pattern": "radial",
    "spokes": 8,
    "accel": 4.0,
    "center_lines": 4,
}


def _parse_train_config(path):
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, _, raw = line.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key in _INT_KEYS:
                values[key] = int(raw)
            elif key in _FLOAT_KEYS:
                values[key] = float(raw)
            elif key in _STR_KEYS:
                values[key] = raw
            elif key == "shape":
                try:
                    values[key] = _shape(raw)
                except argparse.ArgumentTypeError as exc:
                    raise FormatError(f"{path}:{lineno}: {exc}") from exc
            else:
                raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def _cmd_train(args):
    try:
        values = _parse_train_config(args.config)
    except ValueError as exc:
        raise FormatError(f"{args.config}: {exc}") from exc
    data_opts = dict(_TRAIN_DEFAULTS)
    for key in list(values):
        if key in data_opts:
            data_opts[key] = values.pop(key)
    net_keys = {"n_phases", "nc", "dc_mode", "f_depth", "fhat_depth"}
    net_cfg = NetworkConfig(**{k: v for k, v in values.items() if k in net_keys})
    train_cfg = TrainConfig(**{k: v for k, v in values.items() if k not in net_keys})

    dataset = make_phantom_dataset(
        data_opts["n_samples"],
        data_opts["shape"],
        n_ellipses=data_opts["ellipses"],
        motion=data_opts["motion"],
        seed=train_cfg.seed,
    )
    if data_opts["pattern"] == "radial":
        spokes = data_opts["spokes"]
        sampler = lambda shape, seed: make_pseudo_radial_mask(shape, spokes, seed=seed)
    elif data_opts["pattern"] == "vds":
        accel = data_opts["accel"]
        center = data_opts["center_lines"]
        sampler = lambda shape, seed: make_vds_mask(
            shape, accel, center_lines=center, seed=seed
        )
    else:
        raise FormatError(f"unknown sampling pattern {data_opts['pattern']!r}")

    params, history = train_loop(
        dataset, sampler, net_cfg, train_cfg, ckpt_path=args.out_ckpt
    )
    print("step lr mse penalty total")
    for rec in history:
        print(
            f"{rec.step} {rec.lr:.10e} {rec.mse:.10e} "
            f"{rec.penalty:.10e} {rec.total:.10e}"
        )
    return 0


def _cmd_recon_net(args):
    params, cfg, _, _ = load_checkpoint(args.ckpt)
    gt = _load_volume(args.data)
    mask = _load_mask(args.mask)
    encoder = Encoder(mask)
    b = encoder.forward(gt)
    x, _ = network_forward(b, encoder, params, cfg, want_cache=False)
    save_dmrt(args.out, x)
    return 0


def _cmd_eval(args):
    recon = _load_volume(args.recon)
    gt = _load_volume(args.gt)
    p = psnr(recon, gt)
    shown = PSNR_DISPLAY_CAP if math.isinf(p) else p
    print(f"psnr_db {shown:.6f}")
    print(f"ssim {ssim(recon, gt):.6f}")
    return 0


def _cmd_gradcheck(args):
    results = run_gradcheck(seed=args.seed)
    failed = False
    for r in results:
        status = "pass" if r.ok else "FAIL"
        print(f"{r.name} scaled_err={r.max_err:.3e} {status}")
        failed = failed or not r.ok
    if failed:
        print("gradcheck: FAILED", file=sys.stderr)
        return 4
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynmr", description="Dynamic MR reconstruction toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="synthesize a dynamic phantom volume")
    p.add_argument("--shape", type=_shape, required=True)
    p.add_argument("--ellipses", type=int, default=6)
    p.add_argument("--motion", type=float, default=0.08)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_phantom)

    p = sub.add_parser("mask", help="generate an undersampling mask")
    p.add_argument("--pattern", choices=("radial", "vds"), required=True)
    p.add_argument("--spokes", type=int)
    p.add_argument("--accel", type=float)
    p.add_argument("--center-lines", type=int, default=4)
    p.add_argument("--shape", type=_shape, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=lambda args, _p=p: _cmd_mask(args, _p))

    p = sub.add_parser("recon-admm", help="classical solver on undersampled data")
    p.add_argument("--data", required=True, help="ground-truth volume (DMRT)")
    p.add_argument("--mask", required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.01)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--x-update", choices=("closed", "cg"), default="closed")
    p.add_argument("--out", required=True)
    p.add_argument("--diag", help="per-iteration diagnostics file")
    p.set_defaults(func=_cmd_recon_admm)

    p = sub.add_parser("train", help="train the unrolled network")
    p.add_argument("--config", required=True, help="flat key=value file")
    p.add_argument("--out-ckpt", required=True)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("recon-net", help="reconstruct with a trained checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="ground-truth volume (DMRT)")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_recon_net)

    p = sub.add_parser("eval", help="PSNR/SSIM of a reconstruction")
    p.add_argument("--recon", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient smoke test")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
