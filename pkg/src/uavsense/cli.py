"""Command-line surface: run / sweep / selftest, CSV and JSON result emission."""

from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    RunOptions,
    ScenarioConfig,
    SweepSpec,
    config_as_dict,
    parse_config_file,
    render_config_text,
)
from .beamforming import aoa_mesh, capon_beamformer, ls_beamformer, steering_vector
from .engine import DELTAS, SweepRow, run_monte_carlo_all_fusions, sweep
from .geometry import AoA
from .ofdm import (
    OfdmParams,
    ReflectionComponent,
    estimate_rcs,
    matched_point_value,
    periodogram_grid,
    reflection_amplitude,
    remove_data,
    synth_rx_frame,
    synth_tx_frame,
)

__all__ = ["main", "build_preset", "write_results_csv", "write_results_json", "PRESETS"]

_CSV_HEADER = (
    "sweep_param,sweep_value,beamformer,fusion,sigma_G_dBsm,delta,trials,hits,"
    "p_detect,ci95_halfwidth,seed"
)

PRESETS = ("fig3", "fig4", "fig5", "fig6", "fig7")


def build_preset(name: str) -> SweepSpec:
    """Named desk-scale sweep presets, one per standard parameter study."""
    if name == "fig3":
        # Cell size with constant per-UAV coverage: area and altitude grow with d.
        return SweepSpec(
            parameter="cell_size_constant_coverage",
            values=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
            beamformers=("ls", "capon"),
            fusions=("avg", "prenorm"),
            sigma_g_dbsm=(-30.0, -10.0, 0.0),
            deltas=(0,),
        )
    if name == "fig4":
        # Cell size at constant area and altitude; 4.0 and 10.0 produce grid
        # sides the uniform deployment cannot tile and are reported as invalid.
        return SweepSpec(
            parameter="cell_size_constant_area",
            values=(2.5, 4.0, 5.0, 10.0, 12.5, 25.0),
            beamformers=("ls", "capon"),
            fusions=("avg", "prenorm"),
            sigma_g_dbsm=(-30.0,),
            deltas=(0,),
        )
    if name == "fig5":
        return SweepSpec(
            parameter="cell_size_constant_coverage",
            values=(2.0, 5.0),
            beamformers=("capon",),
            fusions=("avg",),
            sigma_g_dbsm=(-30.0, -10.0, 0.0),
            deltas=(0, 1, 2),
        )
    if name == "fig6":
        return SweepSpec(
            parameter="antennas",
            values=(4.0, 6.0, 8.0, 12.0, 16.0),
            beamformers=("ls", "capon"),
            fusions=("avg", "prenorm"),
            sigma_g_dbsm=(-30.0, -10.0),
            deltas=(0,),
        )
    if name == "fig7":
        # Altitudes spanning the 1x1, 3x3, and 5x5 per-UAV coverage regimes.
        return SweepSpec(
            parameter="altitude",
            values=(40.0, 70.0, 100.0, 130.0, 165.0, 200.0),
            beamformers=("capon",),
            fusions=("avg",),
            sigma_g_dbsm=(-30.0, -10.0),
            deltas=(0, 1, 2),
        )
    raise ConfigError(f"preset: unknown preset {name!r}")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def render_results_csv(rows: list[SweepRow]) -> str:
    """Plot-ready CSV; floats carry 17 significant digits so values round-trip."""
    lines = [_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.sweep_param,
                    _fmt(r.sweep_value),
                    r.beamformer,
                    r.fusion,
                    _fmt(r.sigma_g_dbsm),
                    str(r.delta),
                    str(r.trials),
                    str(r.hits),
                    _fmt(r.p_detect),
                    _fmt(r.ci95_halfwidth),
                    str(r.seed),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def build_manifest(config, options, rows, errors, sweep_spec=None) -> dict:
    return {
        "tool": "uavsense",
        "version": __version__,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "master_seed": config.master_seed,
        "config": config_as_dict(config),
        "config_text": render_config_text(config, options, sweep_spec),
        "options": {
            "beamformer": options.beamformer,
            "fusion": options.fusion,
            "fast_path": options.fast_path,
            "noise": options.noise,
            "capon_loading": options.capon_loading,
            "ls_iterations": options.ls_iterations,
        },
        "errors": errors,
        "results": [
            {
                "sweep_param": r.sweep_param,
                "sweep_value": r.sweep_value,
                "beamformer": r.beamformer,
                "fusion": r.fusion,
                "sigma_G_dBsm": r.sigma_g_dbsm,
                "delta": r.delta,
                "trials": r.trials,
                "hits": r.hits,
                "p_detect": r.p_detect,
                "ci95_halfwidth": r.ci95_halfwidth,
                "seed": r.seed,
            }
            for r in rows
        ],
    }


def write_results_csv(rows: list[SweepRow], path) -> None:
    if not rows:
        raise ValueError("no result rows to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_results_csv(rows))


def write_results_json(manifest: dict, path) -> None:
    if not manifest.get("results"):
        raise ValueError("no result rows to write")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_config(args) -> tuple[ScenarioConfig, RunOptions, SweepSpec | None]:
    if args.config:
        config, options, sweep_spec = parse_config_file(args.config)
    else:
        config, options, sweep_spec = ScenarioConfig(), RunOptions(), None
    updates = {}
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if updates:
        config = replace(config, **updates)
    opt_updates = {}
    if args.beamformer is not None:
        opt_updates["beamformer"] = args.beamformer
    if args.fusion is not None:
        opt_updates["fusion"] = args.fusion
    if args.fast_path is not None:
        opt_updates["fast_path"] = args.fast_path == "on"
    if opt_updates:
        options = replace(options, **opt_updates)
    return config, options, sweep_spec


def _emit(args, config, options, rows, errors, sweep_spec=None) -> None:
    for err in errors:
        print(f"invalid sweep point: {err}", file=sys.stderr)
    if args.format == "json":
        manifest = build_manifest(config, options, rows, errors, sweep_spec)
        if args.out:
            write_results_json(manifest, args.out)
        else:
            json.dump(manifest, sys.stdout, indent=2, sort_keys=True)
            print()
    else:
        text = render_results_csv(rows)
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _cmd_run(args) -> int:
    config, options, _ = _load_config(args)
    stats = run_monte_carlo_all_fusions(config, options)[options.fusion]
    rows = [
        SweepRow(
            sweep_param="none",
            sweep_value=0.0,
            beamformer=options.beamformer,
            fusion=options.fusion,
            sigma_g_dbsm=10.0 * math.log10(config.ground_rcs_m2),
            delta=delta,
            trials=stats.trials,
            hits=stats.hits[delta],
            p_detect=stats.p_detect(delta),
            ci95_halfwidth=stats.ci95_halfwidth(delta),
            seed=config.master_seed,
        )
        for delta in DELTAS
    ]
    _emit(args, config, options, rows, [])
    return 0


def _cmd_sweep(args) -> int:
    config, options, sweep_spec = _load_config(args)
    if args.preset:
        sweep_spec = build_preset(args.preset)
    if sweep_spec is None:
        print("sweep needs --preset or a config file with a sweep section", file=sys.stderr)
        return 2
    rows, errors = sweep(sweep_spec, config, options)
    if not rows:
        print("no valid sweep points", file=sys.stderr)
        return 1
    _emit(args, config, options, rows, errors, sweep_spec)
    return 0


def _selftest_periodogram() -> str | None:
    rng = np.random.default_rng(7)
    for _ in range(5):
        frame = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        fast = periodogram_grid(frame, 16, 16)
        k = np.arange(8)
        n_idx = np.arange(16)
        f_sym = np.exp(-2j * np.pi * np.outer(n_idx, k) / 16.0)
        f_sub = np.exp(2j * np.pi * np.outer(k, n_idx) / 16.0)
        direct = np.abs(f_sym @ frame @ f_sub) ** 2 / frame.size
        if not np.allclose(fast, direct, rtol=1e-9, atol=1e-12):
            return "fast periodogram deviates from the direct double sum"
    return None


def _selftest_beamformers() -> str | None:
    rng = np.random.default_rng(11)
    for _ in range(20):
        direction = AoA(theta=rng.uniform(0, np.pi / 2 * 0.99), phi=rng.uniform(0, 2 * np.pi))
        g = steering_vector(direction, 8)
        w = capon_beamformer(direction, 8).weights
        if abs(w.conj() @ g - 1.0) > 1e-12:
            return "capon weights break the unit-gain constraint"
        wls = ls_beamformer(aoa_mesh(direction, 8), 8).weights
        if abs(np.linalg.norm(wls) - 1.0) > 1e-9:
            return "ls weights are not unit-norm"
    return None


def _selftest_roundtrip() -> str | None:
    config = ScenarioConfig()
    params = OfdmParams.from_config(config)
    rng = np.random.default_rng(3)
    tx = synth_tx_frame(params, rng)
    d1 = d2 = 150.0
    b = reflection_amplitude(config, config.target_rcs_m2, d1, d2)
    tau = (d1 + d2) / 299792458.0
    refl = [ReflectionComponent(amplitude=b, gain=1.0 + 0j, delay_s=tau, doppler_hz=0.0, phase=0.0)]
    rx = synth_rx_frame(tx, refl, params)
    peak = matched_point_value(remove_data(rx, tx), tau, 0.0, params)
    sigma = estimate_rcs(peak, config, d1, d2)
    if abs(sigma - config.target_rcs_m2) > 1e-6 * config.target_rcs_m2:
        return f"RCS roundtrip returned {sigma} for {config.target_rcs_m2}"
    return None


def _cmd_selftest(args) -> int:
    checks = [
        ("periodogram transform equivalence", _selftest_periodogram),
        ("beamformer constraints", _selftest_beamformers),
        ("rcs estimate roundtrip", _selftest_roundtrip),
    ]
    failed = False
    for name, check in checks:
        error = check()
        status = "ok" if error is None else f"FAIL ({error})"
        print(f"selftest {name}: {status}")
        failed = failed or error is not None
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uavsense",
        description="Half-duplex UAV distributed sensing simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value configuration file")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--beamformer", choices=("ls", "capon"))
        p.add_argument("--fusion", choices=("avg", "prenorm"))
        p.add_argument("--fast-path", dest="fast_path", choices=("on", "off"))

    p_run = sub.add_parser("run", help="one Monte Carlo batch at a fixed configuration")
    add_common(p_run)
    p_sweep = sub.add_parser("sweep", help="parameter sweep, by preset or config sweep section")
    add_common(p_sweep)
    p_sweep.add_argument("--preset", choices=PRESETS)
    p_self = sub.add_parser("selftest", help="run the built-in oracle checks")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_selftest(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
