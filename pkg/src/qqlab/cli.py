"""Command-line pipeline: gate-level algorithm runs, pulse synthesis, the
full simulated experiment, and figure export.

Subcommands
-----------
run-algorithm        decide one permutation at the gate level
optimize-gates       synthesize the pulse library for every protocol gate
simulate-experiment  pseudo-pure prep -> pulse gates -> tomography -> report
export-figures       re-emit SVG/CSV figures from a stored report

Configuration is a JSON file merged over built-in defaults, with
``--set key.path=value`` overrides; the QQLAB_SEED environment variable
overrides every seed. Exit codes are a stable contract:

0 ok, 1 internal error, 2 inadmissible permutation, 3 unconverged gates,
4 missing gate files, 5 tomography rank failure, 6 malformed report.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, parity, smp, spins, tomography
from .qudit import (
    DensityMatrix,
    QuditState,
    apply,
    density_fidelity,
    measure_distribution,
    pure_density,
)

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INADMISSIBLE = 2
EXIT_UNCONVERGED = 3
EXIT_MISSING_GATES = 4
EXIT_RANK = 5
EXIT_BAD_REPORT = 6

SEED_ENV_VAR = "QQLAB_SEED"

DEFAULT_CONFIG: dict = {
    "system": {"spin": "3/2", "larmor_mhz": 105.8, "quad_khz": 10.0, "offset_hz": 0.0},
    "thermal": {"temperature_k": 298.15},
    "optimizer": {
        "n_blocks": 8,
        "bounds": {
            "max_amplitude_khz": 25.0,
            "min_duration_us": 0.5,
            "max_duration_us": 200.0,
        },
        "fidelity_goal": 0.99,
        "max_evals": 120000,
        "n_restarts": 6,
        "rng_seed": 20240901,
    },
    "tomography": {"mode": "nmr", "noise_sigma": 0.0, "rng_seed": 11, "grid": None},
    "permutations": "all",
    "gates_dir": "gates",
}


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------


def _deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_set(config: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ValueError(f"--set expects key.path=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = config
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def load_config(path: str | None, sets: list[str] | None = None) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path:
        config = _deep_merge(config, json.loads(Path(path).read_text()))
    for assignment in sets or []:
        _apply_set(config, assignment)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        config["optimizer"]["rng_seed"] = int(env_seed)
        config["tomography"]["rng_seed"] = int(env_seed)
    return config


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def _system_from(config: dict) -> spins.SpinSystem:
    return spins.SpinSystem.from_config(config["system"])


def _optimizer_from(config: dict) -> smp.OptimizerConfig:
    oc = config["optimizer"]
    return smp.OptimizerConfig(
        n_blocks=int(oc["n_blocks"]),
        bounds=spins.HardwareBounds.from_json(oc["bounds"]),
        fidelity_goal=float(oc["fidelity_goal"]),
        max_evals=int(oc["max_evals"]),
        n_restarts=int(oc["n_restarts"]),
        rng_seed=int(oc["rng_seed"]),
    )


def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# run-algorithm
# ---------------------------------------------------------------------------


def _resolve_permutation(text: str, dim: int) -> parity.Permutation:
    text = text.strip()
    oset = parity.OracleSet.for_dimension(dim)
    try:
        if text.upper().startswith("U") and text[1:].isdigit():
            labels = oset.labels()
            if text.upper() not in labels:
                raise parity.InadmissiblePermutationError(
                    f"{text} is not one of U1..U{2 * dim} for dimension {dim}"
                )
            return labels[text.upper()]
        if text.startswith("shift:"):
            return parity.Permutation.shift(dim, int(text.split(":", 1)[1]))
        if text.startswith("reflection:"):
            return parity.Permutation.reflection(dim, int(text.split(":", 1)[1]))
        values = text.strip("[]() ").replace(",", " ").split()
        return parity.Permutation(tuple(int(v) for v in values))
    except parity.InadmissiblePermutationError:
        raise
    except ValueError as exc:
        raise parity.InadmissiblePermutationError(f"cannot parse {text!r}: {exc}")


def cmd_run_algorithm(args) -> int:
    perm = _resolve_permutation(args.perm, args.dim)
    outcome = parity.run_parity_algorithm(perm)
    phase = parity.oracle_phase(perm)
    dist = [o.probability for o in measure_distribution(outcome.final_state)]
    winning = int(np.argmax(dist)) + 1
    payload = {
        "dim": perm.dim,
        "permutation": perm.to_json(),
        "verdict": outcome.cyclic_class.value,
        "outcome_index": winning,
        "outcome_probability": dist[winning - 1],
        "final_amplitudes": outcome.final_state.to_json(),
        "oracle_phase": {"re": phase.real, "im": phase.imag},
    }
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print(f"permutation : {tuple(perm.mapping)}")
        print(f"verdict     : {outcome.cyclic_class.value} cyclic")
        print(f"outcome     : |{winning}> with probability {dist[winning - 1]:.12f}")
        print(f"oracle phase: {phase.real:+.6f}{phase.imag:+.6f}i")
        amps = outcome.final_state.amplitudes
        amp_text = ", ".join(f"{a.real:+.4f}{a.imag:+.4f}i" for a in amps)
        print(f"final state : ({amp_text})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# optimize-gates
# ---------------------------------------------------------------------------


def cmd_optimize_gates(args) -> int:
    config = load_config(args.config, args.set)
    system = _system_from(config)
    cfg = _optimizer_from(config)
    out_dir = Path(args.out)

    results = smp.synthesize_algorithm_gates(system, cfg)
    targets = smp.protocol_targets(system.dim)
    smp.save_gate_library(results, targets, cfg, out_dir)

    rows = [
        (label, r.achieved_fidelity, r.evals_used, r.converged)
        for label, r in results.items()
    ]
    if args.json:
        print(
            json.dumps(
                {
                    "out_dir": str(out_dir),
                    "config_hash": config_hash(config),
                    "gates": [
                        {
                            "label": label,
                            "achieved_fidelity": fid,
                            "evals_used": evals,
                            "converged": conv,
                        }
                        for label, fid, evals, conv in rows
                    ],
                },
                indent=2,
                sort_keys=True,
            )
        )
    else:
        print(f"{'gate':<20} {'fidelity':>12} {'evals':>8} converged")
        for label, fid, evals, conv in rows:
            print(f"{label:<20} {fid:>12.8f} {evals:>8d} {'yes' if conv else 'NO'}")
        print(f"wrote {len(rows)} gate files to {out_dir}")
    return EXIT_OK if all(conv for *_, conv in rows) else EXIT_UNCONVERGED


# ---------------------------------------------------------------------------
# simulate-experiment
# ---------------------------------------------------------------------------


def _selected_labels(config: dict, dim: int) -> list[str]:
    selection = config.get("permutations", "all")
    if selection == "all":
        return [f"U{i}" for i in range(1, 2 * dim + 1)]
    return list(selection)


def _step_plan(perm_label: str) -> list[tuple[str, str | None]]:
    index = perm_label[1:]
    return [
        ("initial", None),
        ("fourier", "UFT"),
        ("oracle", f"U{index}_UFT"),
        ("final", f"UFT_inv_U{index}_UFT"),
    ]


def _step_target(step: str, perm: parity.Permutation, dim: int) -> DensityMatrix:
    uft = parity.fourier_unitary(dim)
    start = QuditState.basis(dim, 2)
    if step == "initial":
        return pure_density(start)
    if step == "fourier":
        return pure_density(apply(uft, start))
    if step == "oracle":
        return pure_density(
            apply(parity.permutation_unitary(perm), apply(uft, start))
        )
    if step == "final":
        cls_ = parity.OracleSet.for_dimension(dim).classify(perm)
        index = 2 if cls_ is parity.CyclicClass.POSITIVE else dim
        return pure_density(QuditState.basis(dim, index))
    raise ValueError(f"unknown step {step!r}")


def cmd_simulate_experiment(args) -> int:
    config = load_config(args.config, args.set)
    system = _system_from(config)
    d = system.dim
    out_dir = Path(args.out)
    gates_dir = Path(args.gates or config.get("gates_dir", "gates"))

    labels = _selected_labels(config, d)
    needed = {"UFT"}
    for label in labels:
        needed.update(gate for _, gate in _step_plan(label) if gate)
    try:
        library = smp.load_gate_library(gates_dir, labels=sorted(needed))
    except FileNotFoundError as exc:
        print(f"missing gate library: {exc}", file=sys.stderr)
        return EXIT_MISSING_GATES

    thermal = spins.ThermalModel.at(
        float(config["thermal"]["temperature_k"]), system.larmor_freq
    )
    eps = thermal.epsilon

    tomo_cfg = config["tomography"]
    settings = tomography.default_readout_set(
        d, mode=tomo_cfg.get("mode", "nmr"), grid=tomo_cfg.get("grid")
    )
    noise_sigma = float(tomo_cfg.get("noise_sigma", 0.0))
    tomo_seed = int(tomo_cfg.get("rng_seed", 0))

    oset = parity.OracleSet.for_dimension(d)
    oracle_labels = oset.labels()

    report: dict = {
        "artifact_version": __version__,
        "config": config,
        "config_hash": config_hash(config),
        "seeds": {
            "optimizer": config["optimizer"]["rng_seed"],
            "tomography": tomo_seed,
        },
        "epsilon": eps,
        "dim": d,
        "gate_fidelities": {
            label: result.achieved_fidelity for label, (result, _) in library.items()
        },
        "permutations": [],
    }

    all_agree = True
    for perm_index, label in enumerate(labels):
        perm = oracle_labels[label]
        expected = oset.classify(perm).value
        steps_out = []
        final_populations: list[float] = []
        for step_index, (step, gate_label) in enumerate(_step_plan(label)):
            rho = spins.pseudo_pure(2, eps, dim=d)
            if gate_label is not None:
                result, _target = library[gate_label]
                gate_u = spins.sequence_propagator(result.sequence)
                rho = spins.evolve_density(rho, gate_u)
            # Values are recorded in units of eps, as NMR detection reports
            # the deviation matrix; noise_sigma applies on that scale.
            rho_unit = tomography.pure_part(rho.entries, eps)
            records = tomography.simulate_measurements(
                rho_unit,
                settings,
                noise_sigma=noise_sigma,
                rng_seed=tomo_seed + 1000 * perm_index + step_index,
            )
            rec = tomography.reconstruct(records)
            rho_valid = DensityMatrix(tomography.project_positive(rec.rho_hat))
            fidelity = density_fidelity(rho_valid, _step_target(step, perm, d))
            figure = tomography.bar_representation(rec.rho_hat)
            steps_out.append(
                {
                    "name": step,
                    "gate": gate_label,
                    "fidelity": fidelity,
                    "residual_norm": rec.residual_norm,
                    "condition_number": rec.condition_number,
                    "figure": figure.to_json(),
                }
            )
            if step == "final":
                final_populations = [
                    float(x) for x in np.diag(rho_valid.entries).real
                ]

        winning = int(np.argmax(final_populations)) + 1
        if winning == 2:
            verdict = parity.CyclicClass.POSITIVE.value
        elif winning == d:
            verdict = parity.CyclicClass.NEGATIVE.value
        else:
            verdict = "undecided"
        agrees = verdict == expected
        all_agree = all_agree and agrees
        report["permutations"].append(
            {
                "label": label,
                "mapping": perm.to_json(),
                "expected": expected,
                "verdict": verdict,
                "agrees": agrees,
                "winning_index": winning,
                "outcome_populations": final_populations,
                "steps": steps_out,
            }
        )

    report_path = out_dir / "report.json"
    _dump_json(report, report_path)
    _write_report_figures(report, out_dir / "figures", "svg", "grid")
    _write_report_figures(report, out_dir / "figures", "csv", "grid")

    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(f"{'perm':<6} {'expected':<10} {'verdict':<10} {'final fidelity':>15} {'P(win)':>9}")
        for entry in report["permutations"]:
            final_step = entry["steps"][-1]
            pwin = entry["outcome_populations"][entry["winning_index"] - 1]
            print(
                f"{entry['label']:<6} {entry['expected']:<10} {entry['verdict']:<10} "
                f"{final_step['fidelity']:>15.6f} {pwin:>9.4f}"
            )
        print(f"report: {report_path}")
        if not all_agree:
            print("warning: pulse-level verdicts disagree with the gate level")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-figures
# ---------------------------------------------------------------------------


def _write_report_figures(
    report: dict, out_dir: Path, fmt: str, style: str
) -> list[Path]:
    from . import figures as figmod

    written = []
    for entry in report["permutations"]:
        for k, step in enumerate(entry["steps"], start=1):
            fig_data = tomography.BarFigure.from_json(step["figure"])
            stem = f"{entry['label']}_{k}_{step['name']}"
            if fmt == "svg":
                title = f"{entry['label']} {step['name']} (F = {step['fidelity']:.4f})"
                written.append(
                    figmod.render_figure_svg(
                        fig_data, out_dir / f"{stem}.svg", title=title, style=style
                    )
                )
            else:
                written.append(
                    figmod.write_figure_csv(fig_data, out_dir / f"{stem}.csv")
                )
    return written


def cmd_export_figures(args) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
        if "permutations" not in report:
            raise KeyError("permutations")
        written = _write_report_figures(
            report, Path(args.out), args.format, args.style
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"malformed report: {exc}", file=sys.stderr)
        return EXIT_BAD_REPORT
    print(f"wrote {len(written)} {args.format} files to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qqlab",
        description="Single-ququart permutation-parity experiment simulator.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-algorithm", help="gate-level single-query parity decision")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument(
        "--perm",
        required=True,
        help="U1..U8 label, shift:k, reflection:k, or a 1-based image list like 2,3,4,1",
    )
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_run_algorithm)

    p = sub.add_parser("optimize-gates", help="synthesize the protocol pulse library")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="gate library directory")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_optimize_gates)

    p = sub.add_parser(
        "simulate-experiment",
        help="pseudo-pure prep, pulse gates, tomography, report and figures",
    )
    p.add_argument("--config", default=None)
    p.add_argument("--gates", default=None, help="gate library directory")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_simulate_experiment)

    p = sub.add_parser("export-figures", help="emit SVG or CSV figures from a report")
    p.add_argument("--report", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("svg", "csv"), default="svg")
    p.add_argument("--style", choices=("grid", "bars3d"), default="grid")
    p.set_defaults(func=cmd_export_figures)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except parity.InadmissiblePermutationError as exc:
        print(f"inadmissible permutation: {exc}", file=sys.stderr)
        return EXIT_INADMISSIBLE
    except tomography.TomographyRankError as exc:
        print(f"tomography rank failure: {exc}", file=sys.stderr)
        return EXIT_RANK
    except Exception as exc:  # stable exit-code contract for scripts
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
