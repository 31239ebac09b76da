"""Command-line pipeline: simulate -> beamform/train/eval -> images and tables.

Subcommands:
    simulate  config -> RF container (.rfc)
    beamform  RF container (+config) -> B-mode PGM + metrics CSV
    train     config -> weight-network blob (.wnb) + loss history CSV
    eval      model + RF container -> B-mode PGM + metrics CSV
    flops     per-pixel operation-count ledger CSV

Exit codes: 0 success, 2 usage, 3 bad configuration, 4 missing file,
1 other runtime failure.
"""

import argparse
import sys

import numpy as np

from . import beamform as bf
from . import neural
from .config import ConfigError, load_config, parse_config
from .containers import (
    read_rf,
    write_flops_csv,
    write_loss_csv,
    write_metrics_csv,
    write_pgm,
    write_rf,
)
from .flopcount import flop_ledger
from .image import (
    MetricsReport,
    annulus_mask,
    envelope,
    log_compress,
    measure_fwhm,
    peak_sidelobe_level,
    measure_contrast,
    region_mask,
)
from .migrate import compute_tof, migrate
from .sim import simulate_rf

_BF_CHOICES = ("das", "das_cf", "mvdr", "eigenspace_mv", "wiener", "imap")


def _metrics(env, db_img, grid, phantom, method, num_channels, params):
    """Fill in the metrics the phantom defines; leave the rest absent."""
    fwhm_lat = fwhm_ax = psl = cr = cnr = None
    if phantom.num_scatterers == 1:
        peak = np.unravel_index(np.argmax(env), env.shape)
        try:
            fwhm_lat = measure_fwhm(db_img, grid, peak, "lateral")
            fwhm_ax = measure_fwhm(db_img, grid, peak, "axial")
            psl = peak_sidelobe_level(db_img, grid, peak, (4 * fwhm_ax, 4 * fwhm_lat))
        except ValueError:
            pass
    disks = [r for r in phantom.regions]
    if disks:
        disk = disks[0]
        inside = region_mask(grid, disk)
        outside = annulus_mask(grid, disk.center, 1.25 * disk.radius, 2.0 * disk.radius)
        if inside.any() and outside.any():
            cr, cnr = measure_contrast(env, inside, outside)
    if method in ("mvdr", "eigenspace_mv", "wiener"):
        L = params.get("subarray_length") or num_channels // 2
        flops = flop_ledger("mvdr", num_channels, L,
                            params.get("temporal_halfwidth", 2))
    else:
        flops = flop_ledger("das", num_channels)
    flops = {k: v for k, v in flops.items() if k != "beamformer"}
    return MetricsReport(fwhm_lat, fwhm_ax, cr, cnr, psl, flops)


def _beamform_pipeline(cfg, cube, method=None, dynamic_range=None):
    bfc = cfg.beamformer
    method = method or bfc.get("kind", "das")
    if method not in _BF_CHOICES:
        raise ConfigError(f"unknown beamformer {method!r}")
    dr = dynamic_range or bfc.get("dynamic_range", 60.0)
    tof = compute_tof(cfg.setup, cfg.grid)
    z = migrate(cube, tof, interp=bfc.get("interp", "linear"),
                sinc_halfwidth=int(bfc.get("sinc_halfwidth", 8)))
    apod = bf.window_weights(bfc.get("window", "boxcar"), cfg.setup.geometry,
                             cfg.grid, f_number=float(bfc.get("f_number", 0.0)))
    params = {}
    if method in ("mvdr", "eigenspace_mv", "wiener"):
        for key in ("subarray_length", "temporal_halfwidth", "loading"):
            if key in bfc:
                params[key] = bfc[key]
        if method == "eigenspace_mv":
            params["subspace_fraction"] = bfc.get("subspace_fraction", 0.5)
    if method == "imap" and "iterations" in bfc:
        params["iterations"] = int(bfc["iterations"])
    img = bf.beamform_image(z, method, apod=apod,
                            compound_mode=bfc.get("compound", "mean"), **params)
    env = envelope(img)
    db_img = log_compress(env, dr)
    report = _metrics(env, db_img, cfg.grid, cfg.phantom, method,
                      cfg.setup.num_channels, bfc)
    return z, img, env, db_img, report


def _cmd_simulate(args):
    cfg = load_config(args.config)
    cube = simulate_rf(
        cfg.phantom,
        cfg.setup,
        num_samples=cfg.simulate.get("num_samples"),
        t0=float(cfg.simulate.get("t0", 0.0)),
        noise_snr_db=cfg.simulate.get("noise_snr_db"),
        seed=int(cfg.simulate.get("seed", 0)),
        spreading_loss=bool(cfg.simulate.get("spreading_loss", False)),
    )
    write_rf(cube, args.out, config=cfg.raw)
    print(f"wrote {args.out}: shape {cube.shape} at {cube.sampling_rate:g} Hz")
    return 0


def _cmd_beamform(args):
    cube, echoed = read_rf(args.infile)
    if args.config:
        cfg = load_config(args.config)
    elif echoed is not None:
        cfg = parse_config(echoed)
    else:
        raise ConfigError("RF container carries no setup echo; pass --config")
    _, _, _, db_img, report = _beamform_pipeline(cfg, cube, args.bf, args.dynamic_range)
    write_pgm(db_img, args.out)
    metrics_path = args.metrics or (args.out.rsplit(".", 1)[0] + "_metrics.csv")
    write_metrics_csv(report, metrics_path)
    print(f"wrote {args.out} and {metrics_path}")
    return 0


def _cmd_train(args):
    cfg = load_config(args.config)
    tr = cfg.training
    cube = simulate_rf(
        cfg.phantom, cfg.setup,
        noise_snr_db=cfg.simulate.get("noise_snr_db"),
        seed=int(cfg.simulate.get("seed", 0)),
    )
    tof = compute_tof(cfg.setup, cfg.grid)
    z = migrate(cube, tof, interp=cfg.beamformer.get("interp", "linear"))
    mv_params = {k: tr[k] for k in ("subarray_length", "temporal_halfwidth", "loading")
                 if k in tr}
    targets = bf.mvdr_images(z, **mv_params)[0].y
    C = cfg.setup.num_channels
    nx, ny = cfg.grid.shape
    inputs = z.z[0].reshape(C, nx * ny).T
    dataset = neural.PixelDataset(inputs, targets.reshape(-1), image_shape=(nx, ny))
    layer_dims = tr.get("layer_dims") or (C, 2 * C, C, 2 * C, C)
    net = neural.WeightNetwork(layer_dims, seed=int(tr.get("seed", 0)))
    spec = neural.LossSpec(
        tr.get("loss", "smsle"),
        float(tr.get("distortionless_weight", 0.1)),
        tr.get("eps_log"),
    )
    run = neural.train(
        net, dataset, spec,
        epochs=int(tr.get("epochs", 10)),
        batch_size=int(tr.get("batch_size", 128)),
        step_size=float(tr.get("step_size", 1e-3)),
        seed=int(tr.get("seed", 0)),
    )
    neural.save_network(net, args.out)
    if args.loss_csv:
        write_loss_csv(run, args.loss_csv)
    final = run.loss_history[-1] if run.loss_history else run.initial_loss
    print(f"wrote {args.out}: loss {run.initial_loss:.6g} -> {final:.6g} "
          f"({len(run.loss_history)} epochs)")
    return 0


def _cmd_eval(args):
    net = neural.load_network(args.model)
    cube, echoed = read_rf(args.infile)
    if args.config:
        cfg = load_config(args.config)
    elif echoed is not None:
        cfg = parse_config(echoed)
    else:
        raise ConfigError("RF container carries no setup echo; pass --config")
    tof = compute_tof(cfg.setup, cfg.grid)
    z = migrate(cube, tof, interp=cfg.beamformer.get("interp", "linear"))
    C = cfg.setup.num_channels
    if net.num_channels != C:
        raise ConfigError(
            f"model expects {net.num_channels} channels, data has {C}"
        )
    nx, ny = cfg.grid.shape
    inputs = z.z[0].reshape(C, nx * ny).T
    _, y = neural.forward(net, inputs)
    img = bf.BeamformedImage(y.reshape(nx, ny), {"beamformer": "network"})
    env = envelope(img)
    db_img = log_compress(env, float(cfg.beamformer.get("dynamic_range", 60.0)))
    write_pgm(db_img, args.out)
    report = _metrics(env, db_img, cfg.grid, cfg.phantom, "network", C, {})
    metrics_path = args.metrics or (args.out.rsplit(".", 1)[0] + "_metrics.csv")
    write_metrics_csv(report, metrics_path)
    print(f"wrote {args.out} and {metrics_path}")
    return 0


def _cmd_flops(args):
    C = args.channels
    L = args.subarray_length or C
    ledgers = [
        flop_ledger("das", C),
        flop_ledger("mvdr", C, L),
        flop_ledger("network", C),
    ]
    if args.out:
        write_flops_csv(ledgers, args.out)
        print(f"wrote {args.out}")
    else:
        for ledger in ledgers:
            print(ledger)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="beamforge",
                                description="ultrasound beamforming pipeline")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="synthesize an RF container from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("beamform", help="reconstruct a B-mode image from RF data")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--config", help="override the setup echoed in the container")
    s.add_argument("--bf", choices=_BF_CHOICES, default=None,
                   help="beamformer (default: from config)")
    s.add_argument("--out", required=True)
    s.add_argument("--metrics", help="metrics CSV path (default: <out>_metrics.csv)")
    s.add_argument("--dynamic-range", type=float, default=None)
    s.set_defaults(func=_cmd_beamform)

    s = sub.add_parser("train", help="train the per-pixel weight network")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True, help="model blob path (.wnb)")
    s.add_argument("--loss-csv", help="write the loss history table here")
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("eval", help="apply a trained network to RF data")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--metrics")
    s.set_defaults(func=_cmd_eval)

    s = sub.add_parser("flops", help="operation-count ledger")
    s.add_argument("--channels", type=int, default=128)
    s.add_argument("--subarray-length", type=int, default=None)
    s.add_argument("--out", help="CSV path (default: print)")
    s.set_defaults(func=_cmd_flops)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # single-line diagnostic, nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
