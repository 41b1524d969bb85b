"""Command-line front end.

Each subcommand builds the same request model the HTTP service accepts and
either invokes the shared handlers in-process (default) or POSTs to a running
service instance (--server URL). Artifacts are written only inside --out.

Exit codes: 0 success, 2 configuration/validation error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .harness.config import ScenarioConfig, load_scenario_config
from .service import handlers, schemas

ENV_SEED = "QTOKSIM_SEED"


def _fallback_seed(value: int | None) -> int:
    if value is not None:
        return value
    return int(os.environ.get(ENV_SEED, "0"))


def parse_grid(text: str) -> list[float]:
    """start:stop:step, endpoints inclusive within step rounding."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:stop:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0:
        if start == stop:
            return [start]
        raise ValueError("grid step must be positive")
    values = []
    k = 0
    while True:
        v = start + k * step
        if v > stop + step * 1e-9:
            break
        values.append(round(v, 12))
        k += 1
    if not values:
        raise ValueError(f"empty grid {text!r}")
    return values


# ---------------------------------------------------------------------------
# Output writers (byte-deterministic: sorted keys, repr floats, \n endings)
# ---------------------------------------------------------------------------

def _write_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")


def _ensure_out(out: str | None) -> Path | None:
    if out is None:
        return None
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_scenario_outputs(out: Path, response: schemas.ScenarioResponse,
                            config_echo: dict | None) -> None:
    doc = response.summary.model_dump()
    if config_echo is not None:
        doc["config"] = config_echo
    _write_json(out / "metrics.json", doc)
    with open(out / "trials.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "protocol", "adversary", "accepted",
                         "error_metric", "dwell_us", "seed"])
        for row in response.per_trial:
            writer.writerow([row.trial, response.summary.protocol,
                             response.summary.adversary, int(row.accepted),
                             repr(float(row.error_metric)),
                             repr(float(row.dwell_us)), row.seed])


def _print_summary(response: schemas.ScenarioResponse) -> None:
    s = response.summary
    print(f"{s.protocol} adversary={s.adversary} trials={s.trials} "
          f"accept_rate={s.accept_rate:.4f} lost={s.lost_trials}")


def _post(server: str, path: str, request_model, response_cls):
    import httpx

    resp = httpx.post(server.rstrip("/") + path,
                      json=request_model.model_dump(by_alias=True, mode="json"),
                      timeout=600.0)
    resp.raise_for_status()
    return response_cls.model_validate(resp.json())


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------

def _cmd_scenario(args) -> int:
    cfg = load_scenario_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        cfg = cfg.model_copy(update=overrides)
        cfg = ScenarioConfig.model_validate(cfg.model_dump(by_alias=True))
    if args.server:
        if args.parallel:
            raise ValueError("--parallel applies to local runs only")
        response = _post(args.server, "/scenario", cfg, schemas.ScenarioResponse)
    else:
        response = handlers.handle_scenario(cfg, parallel=args.parallel)
    _print_summary(response)
    out = _ensure_out(args.out)
    if out:
        _write_scenario_outputs(out, response, cfg.model_dump(by_alias=True))
    return 0


def _cmd_dephasing_curve(args) -> int:
    req = schemas.DephasingCurveRequest(
        t2_us=args.t2_us, t_max_us=args.t_max_us, points=args.points,
        shots=args.shots, seed=_fallback_seed(args.seed))
    if args.server:
        response = _post(args.server, "/dephasing-curve", req,
                         schemas.DephasingCurveResponse)
    else:
        response = handlers.handle_dephasing_curve(req)
    print(f"dephasing-curve t2_us={response.t2_us} points={len(response.points)} "
          f"shots={req.shots}")
    out = _ensure_out(args.out)
    if out:
        with open(out / "dephasing_curve.csv", "w", encoding="utf-8",
                  newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_us", "flip_rate", "analytic_p"])
            for p in response.points:
                writer.writerow([repr(p.t_us), repr(p.flip_rate),
                                 repr(p.analytic_p)])
    return 0


def _cmd_uupuf_estimate(args) -> int:
    req = schemas.UupufEstimateRequest(
        lam=args.lam, estimator=args.estimator, delta=args.delta,
        epsilon_grid=parse_grid(args.epsilon_grid), trials=args.trials,
        seed=_fallback_seed(args.seed))
    if args.server:
        response = _post(args.server, "/uupuf/estimate", req,
                         schemas.UupufEstimateResponse)
    else:
        response = handlers.handle_uupuf_estimate(req)
    print(f"uupuf-estimate estimator={response.estimator} "
          f"rows={len(response.rows)} trials={req.trials}")
    out = _ensure_out(args.out)
    if out:
        with open(out / "uupuf_estimates.csv", "w", encoding="utf-8",
                  newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lambda", "epsilon", "delta", "trials", "rate",
                             "seed"])
            for r in response.rows:
                writer.writerow([r.lam, repr(r.epsilon), repr(r.delta),
                                 r.trials, repr(r.rate), r.seed])
    return 0


def _cmd_qrpuf_enroll(args) -> int:
    req = schemas.QrpufEnrollRequest(
        lam=args.lam, crt_size=args.crt_size, quant_bits=args.quant_bits,
        mode=args.mode, tomography_shots=args.shots,
        seed=_fallback_seed(args.seed))
    if args.server:
        response = _post(args.server, "/qrpuf/enroll", req,
                         schemas.QrpufEnrollResponse)
    else:
        response = handlers.handle_qrpuf_enroll(req)
    print(f"qrpuf-enroll lambda={req.lam} entries={len(response.crt.entries)} "
          f"mode={req.mode}")
    out = _ensure_out(args.out)
    if out:
        _write_json(out / "crt.json", response.crt.model_dump(by_alias=True))
        _write_json(out / "puf.json", response.puf.model_dump(by_alias=True))
    return 0


def _cmd_qrpuf_verify(args) -> int:
    with open(args.crt, "r", encoding="utf-8") as fh:
        crt = schemas.CrtModel.model_validate(json.load(fh))
    puf = None
    if args.puf:
        with open(args.puf, "r", encoding="utf-8") as fh:
            puf = schemas.PufModel.model_validate(json.load(fh))
    req = schemas.QrpufVerifyRequest(
        crt=crt, puf=puf, responder=args.responder,
        entry_index=args.entry_index, hamming_threshold=args.threshold,
        shots_per_qubit=args.shots_per_qubit, seed=_fallback_seed(args.seed))
    if args.server:
        response = _post(args.server, "/qrpuf/verify", req,
                         schemas.QrpufVerifyResponse)
    else:
        response = handlers.handle_qrpuf_verify(req)
    print(f"qrpuf-verify responder={req.responder} accept={response.accept} "
          f"hamming={response.hamming_weight}")
    out = _ensure_out(args.out)
    if out:
        _write_json(out / "verify.json", response.model_dump())
    return 0


def _cmd_hmp4_run(args) -> int:
    # --t2-us is a pure dephasing knob; readout/idle noise stays off unless a
    # full scenario config is used instead
    noise = None
    if args.t2_us is not None:
        noise = {"t2_us": args.t2_us, "readout_flip_prob": 0.0,
                 "idle_depolarize_prob": 0.0}
    req = schemas.Hmp4RunRequest(
        trials=args.trials, t=args.t, error_tolerance=args.tolerance,
        registers=args.registers, control_registers=args.control_registers,
        adversary=args.adversary, memory_dwell_us=args.dwell_us,
        noise=noise, seed=_fallback_seed(args.seed))
    if args.server:
        response = _post(args.server, "/hmp4/run", req, schemas.ScenarioResponse)
    else:
        response = handlers.handle_hmp4_run(req)
    _print_summary(response)
    out = _ensure_out(args.out)
    if out:
        _write_scenario_outputs(out, response,
                                req.model_dump(by_alias=True, mode="json"))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qtoksim",
        description="Quantum-token authentication simulator")
    parser.add_argument("--version", action="version",
                        version=f"qtoksim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"rng seed (fallback: ${ENV_SEED}, then 0)")
        p.add_argument("--out", type=str, default=None,
                       help="output directory for artifacts")
        p.add_argument("--server", type=str, default=None,
                       help="run against a service instance instead of in-process")

    p = sub.add_parser("scenario", help="run a scenario config file")
    common(p)
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--parallel", type=int, default=None,
                   help="worker processes for trial execution")
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("dephasing-curve",
                       help="memory dephasing curve: flip rate vs idle time")
    common(p)
    p.add_argument("--t2-us", dest="t2_us", type=float, default=108.6)
    p.add_argument("--t-max-us", dest="t_max_us", type=float, default=50.0)
    p.add_argument("--points", type=int, default=11)
    p.add_argument("--shots", type=int, default=100_000)
    p.set_defaults(func=_cmd_dephasing_curve)

    p = sub.add_parser("uupuf-estimate",
                       help="robustness/collision/uniqueness estimator sweep")
    common(p)
    p.add_argument("--lambda", dest="lam", type=int, default=2)
    p.add_argument("--estimator", choices=["robustness", "collision",
                                           "uniqueness"], default="collision")
    p.add_argument("--delta", type=float, default=0.9)
    p.add_argument("--epsilon-grid", dest="epsilon_grid", type=str,
                   default="0:0:1", help="start:stop:step, endpoints inclusive")
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=_cmd_uupuf_estimate)

    p = sub.add_parser("qrpuf-enroll", help="generate a PUF and its CRT")
    common(p)
    p.add_argument("--lambda", dest="lam", type=int, default=4)
    p.add_argument("--crt-size", dest="crt_size", type=int, default=8)
    p.add_argument("--quant-bits", dest="quant_bits", type=int, default=8)
    p.add_argument("--mode", choices=["analytic", "tomography"],
                   default="analytic")
    p.add_argument("--shots", type=int, default=90_000,
                   help="tomography shots per output qubit")
    p.set_defaults(func=_cmd_qrpuf_enroll)

    p = sub.add_parser("qrpuf-verify", help="verify a responder against a CRT")
    common(p)
    p.add_argument("--crt", type=str, required=True)
    p.add_argument("--puf", type=str, default=None)
    p.add_argument("--responder", choices=["honest", "identity", "emulation",
                                           "random_guess"], default="honest")
    p.add_argument("--entry-index", dest="entry_index", type=int, default=0)
    p.add_argument("--threshold", type=int, default=0)
    p.add_argument("--shots-per-qubit", dest="shots_per_qubit", type=int,
                   default=5)
    p.set_defaults(func=_cmd_qrpuf_verify)

    p = sub.add_parser("hmp4-run", help="hidden-matching token sessions")
    common(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--t", type=int, default=12)
    p.add_argument("--tolerance", type=int, default=0)
    p.add_argument("--registers", type=int, default=None)
    p.add_argument("--control-registers", dest="control_registers", type=int,
                   default=0)
    p.add_argument("--adversary", choices=["none", "random_guess",
                                           "token_clone"], default="none")
    p.add_argument("--dwell-us", dest="dwell_us", type=float, default=0.0)
    p.add_argument("--t2-us", dest="t2_us", type=float, default=None,
                   help="enable memory dephasing with this T2")
    p.set_defaults(func=_cmd_hmp4_run)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
