"""Service-layer implementations shared by the HTTP routes and the CLI."""

from __future__ import annotations

import numpy as np

from .. import qrpuf, uupuf
from ..harness.config import ScenarioConfig
from ..harness.metrics import Metrics
from ..harness.scenarios import run_scenario
from ..quantum_core import (
    HADAMARD,
    StateVector,
    UnitaryOp,
    dephase,
    dephasing_prob,
    haar_state,
    make_single_qubit_state,
)
from ..rng import RngStream
from . import schemas


def metrics_to_response(metrics: Metrics) -> schemas.ScenarioResponse:
    summary = schemas.MetricsSummary(
        protocol=metrics.protocol, adversary=metrics.adversary,
        trials=metrics.trials, accepts=metrics.accepts,
        lost_trials=metrics.lost_trials, accept_rate=metrics.accept_rate,
        honest_accept_rate=metrics.honest_accept_rate,
        adversary_accept_rate=metrics.adversary_accept_rate)
    rows = [schemas.TrialRow(trial=r.trial, accepted=r.accepted,
                             error_metric=r.error_metric, dwell_us=r.dwell_us,
                             lost=r.lost, seed=r.seed)
            for r in metrics.records]
    return schemas.ScenarioResponse(summary=summary, per_trial=rows)


def handle_scenario(cfg: ScenarioConfig,
                    parallel: int | None = None) -> schemas.ScenarioResponse:
    return metrics_to_response(run_scenario(cfg, parallel=parallel))


def handle_dephasing_curve(
        req: schemas.DephasingCurveRequest) -> schemas.DephasingCurveResponse:
    """Idle a |+> state for each grid time, then measure in the X basis
    ``shots`` times; reports the empirical |-> rate next to the analytic law."""
    rng = RngStream(req.seed)
    plus = make_single_qubit_state(np.pi / 4, 0.0)  # (|0>+|1>)/sqrt(2)
    minus = StateVector(HADAMARD @ np.array([0.0, 1.0], dtype=complex))
    points = []
    for i in range(req.points):
        t = req.t_max_us * i / (req.points - 1)
        rho = dephase(plus.to_density(), t, req.t2_us)
        p_flip = float(np.real(np.vdot(minus.amplitudes,
                                       rho.matrix @ minus.amplitudes)))
        p_flip = min(max(p_flip, 0.0), 1.0)
        flips = int(rng.substream(i).generator.binomial(req.shots, p_flip))
        points.append(schemas.DephasingCurvePoint(
            t_us=t, flip_rate=flips / req.shots,
            analytic_p=dephasing_prob(t, req.t2_us)))
    return schemas.DephasingCurveResponse(t2_us=req.t2_us, points=points)


def handle_uupuf_estimate(
        req: schemas.UupufEstimateRequest) -> schemas.UupufEstimateResponse:
    """Estimator sweep; rows follow the (lambda, epsilon, delta, trials, rate,
    seed) report schema. For "uniqueness" the rate column holds the average
    output trace distance between two independently generated devices and
    epsilon/delta are ignored."""
    setup = RngStream(req.seed)
    base = uupuf.qgen_uu(req.lam, setup.substream(0))
    other = uupuf.qgen_uu(req.lam, setup.substream(1))
    rows = []
    for eps in req.epsilon_grid:
        # Fresh stream with a fixed id per point: every grid point sees the
        # same input pairs, so threshold crossings are directly comparable.
        trial_rng = RngStream(req.seed, 2)
        if req.estimator == "uniqueness":
            rate = uupuf.estimate_uniqueness(base, other, req.trials, trial_rng)
        else:
            device = base if eps == 0.0 else uupuf.PerturbedPuf(base, epsilon=eps)
            if req.estimator == "robustness":
                rate = uupuf.estimate_robustness(device, req.delta, req.trials,
                                                 trial_rng)
            else:
                rate = uupuf.estimate_collision_resistance(
                    device, req.delta, req.trials, trial_rng)
        rows.append(schemas.EstimateRow(lam=req.lam, epsilon=eps,
                                        delta=req.delta, trials=req.trials,
                                        rate=rate, seed=req.seed))
    return schemas.UupufEstimateResponse(estimator=req.estimator, rows=rows)


def _puf_to_model(puf: qrpuf.QrPuf) -> schemas.PufModel:
    gates = [[[[float(z.real), float(z.imag)] for z in row]
              for row in g.matrix] for g in puf.gates]
    return schemas.PufModel(lam=puf.lam, gates=gates)


def _puf_from_model(model: schemas.PufModel) -> qrpuf.QrPuf:
    gates = tuple(UnitaryOp([[complex(re, im) for re, im in row]
                             for row in g]) for g in model.gates)
    return qrpuf.QrPuf(lam=model.lam, gates=gates)


def _crt_to_model(crt: qrpuf.ChallengeResponseTable) -> schemas.CrtModel:
    return schemas.CrtModel.model_validate(crt.to_json_dict())


def _crt_from_model(model: schemas.CrtModel) -> qrpuf.ChallengeResponseTable:
    return qrpuf.ChallengeResponseTable.from_json_dict(
        model.model_dump(by_alias=True))


def handle_qrpuf_enroll(
        req: schemas.QrpufEnrollRequest) -> schemas.QrpufEnrollResponse:
    rng = RngStream(req.seed)
    puf = qrpuf.qgen_qr(req.lam, rng.substream(0))
    challenges = qrpuf.select_challenges(req.crt_size, req.lam, rng.substream(1))
    crt = qrpuf.enroll(puf, challenges, req.mode, req.tomography_shots,
                       req.quant_bits, rng.substream(2))
    return schemas.QrpufEnrollResponse(crt=_crt_to_model(crt),
                                       puf=_puf_to_model(puf))


def handle_qrpuf_verify(
        req: schemas.QrpufVerifyRequest) -> schemas.QrpufVerifyResponse:
    crt = _crt_from_model(req.crt)
    rng = RngStream(req.seed)
    if req.responder in ("honest", "emulation"):
        if req.puf is None:
            raise ValueError(f"responder {req.responder!r} requires the puf record")
        puf = _puf_from_model(req.puf)
        responder = qrpuf.honest_responder(puf)
    elif req.responder == "identity":
        responder = lambda state: state
    else:
        source = rng.substream(99)
        calls = [0]

        def responder(_state, _src=source):
            calls[0] += 1
            return haar_state(2 ** crt.lam, _src.substream(calls[0]))

    result = qrpuf.verify(crt, req.entry_index, responder,
                          req.hamming_threshold, req.shots_per_qubit,
                          rng.substream(1))
    return schemas.QrpufVerifyResponse(accept=result.accept,
                                       observed_o=result.observed_o,
                                       hamming_weight=result.hamming_weight,
                                       error=result.error)


def handle_hmp4_run(req: schemas.Hmp4RunRequest) -> schemas.ScenarioResponse:
    cfg = ScenarioConfig(
        protocol="hmp4", trials=req.trials, seed=req.seed,
        adversary=req.adversary,
        channel={"noise": req.noise.model_dump() if req.noise else None},
        hmp4={"t": req.t, "error_tolerance": req.error_tolerance,
              "registers": req.registers,
              "control_registers": req.control_registers,
              "memory_dwell_us": req.memory_dwell_us},
    )
    return handle_scenario(cfg)
