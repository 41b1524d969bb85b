"""Scenario execution: one event-driven protocol session per trial.

Each trial gets its own RngStream substream of the scenario seed, so trials
are independent, reproducible, and safe to run across worker processes. A
lost quantum message aborts the trial as a reject (recorded separately via
the ``lost`` flag).

QR-PUF sessions consume ``challenges_per_session`` CRT entries drawn without
replacement and accept only if every entry verifies; single-entry acceptance
of a blind responder is ~2^-lambda, so multi-entry sessions are what push a
guessing adversary below any useful false-accept budget.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

from .. import hmp4, qrpuf, uupuf
from ..quantum_core import DensityMatrix, dephase_all_qubits, flip_readout, haar_state
from ..rng import RngStream
from .adversaries import (
    RandomGuessHolder,
    TokenCloneHolder,
    intercept_resend_state,
)
from .channels import Lost, QuantumChannel, transmit_quantum
from .config import ScenarioConfig
from .events import Event, EventContext, run_event_loop, sink
from .metrics import Metrics, TrialRecord, aggregate

AUDIT = "__audit__"


def _channel_from_config(cfg: ScenarioConfig) -> QuantumChannel:
    noise = cfg.channel.noise.to_params() if cfg.channel.noise else None
    return QuantumChannel(latency_us=cfg.channel.latency_us,
                          loss_prob=cfg.channel.loss_prob, noise=noise)


def _flip_bits(bits: str, prob: float, rng: RngStream) -> str:
    if prob <= 0.0:
        return bits
    return "".join(str(flip_readout(int(b), prob, rng.substream(i)))
                   for i, b in enumerate(bits))


# ---------------------------------------------------------------------------
# QR-PUF sessions
# ---------------------------------------------------------------------------

class _QrPufSession:
    def __init__(self, cfg: ScenarioConfig, trial: int):
        rng = RngStream(cfg.seed, trial)
        qp = cfg.qrpuf
        self.cfg = cfg
        self.puf = qrpuf.qgen_qr(qp.lam, rng.substream(0))
        challenges = qrpuf.select_challenges(qp.crt_size, qp.lam, rng.substream(1))
        self.crt = qrpuf.enroll(self.puf, challenges, qp.enroll_mode,
                                qp.tomography_shots, qp.quant_bits,
                                rng.substream(2))
        self.threshold = cfg.resolved_hamming_threshold()
        self.channel = _channel_from_config(cfg)
        self.readout_prob = (self.channel.noise.readout_flip_prob
                             if self.channel.noise else 0.0)
        picker = rng.substream(3)
        count = min(qp.challenges_per_session, qp.crt_size)
        self.entry_ids = sorted(picker.generator.choice(
            qp.crt_size, size=count, replace=False).tolist())
        self.shifters = {i: qrpuf.shifters_from_w(self.crt.entry(i).w_string,
                                                  qp.lam, qp.quant_bits)
                         for i in self.entry_ids}
        self.chan_rng = rng.substream(4)
        self.meas_rng = rng.substream(5)
        self.adv_rng = rng.substream(6)
        self.on_path = cfg.adversary == "intercept_resend"
        if cfg.adversary == "emulation":
            # Scenario grants the adversary full knowledge of the unitary.
            self.respond = lambda st: qrpuf.apply_puf(self.puf, st)
        elif cfg.adversary == "random_guess":
            self.respond = _fresh_state_source(2 ** qp.lam, rng.substream(7))
        else:
            self.respond = lambda st: qrpuf.apply_puf(self.puf, st)

        self.entry_pos = 0
        self.rep = 0
        self.samples: list[str] = []
        self.hamming_total = 0
        self.all_accept = True
        self.lost = False
        self.done = False
        self.dwell_us = 0.0
        self.msg = 0

    # -- helpers ------------------------------------------------------------

    def _send(self, ctx: EventContext, state, kind: str, final: str):
        msg_id = self.msg
        self.msg += 1
        ctx.emit(AUDIT, {"kind": "quantum_sent", "msg": msg_id})
        result = transmit_quantum(self.channel, state,
                                  self.chan_rng.substream(msg_id))
        if isinstance(result, Lost):
            ctx.emit("verifier", {"kind": "lost", "msg": msg_id},
                     delay_us=result.latency_us)
            return
        dst = "adversary" if self.on_path else final
        ctx.emit(dst, {"kind": kind, "state": result.state, "msg": msg_id,
                       "final": final}, delay_us=result.latency_us)
        self.dwell_us += result.latency_us

    def _send_current_challenge(self, ctx: EventContext):
        entry = self.crt.entry(self.entry_ids[self.entry_pos])
        self._send(ctx, entry.challenge.state(), "challenge", "user")

    def _finish_entry(self, ctx: EventContext):
        entry_id = self.entry_ids[self.entry_pos]
        observed = qrpuf.majority_bits(self.samples)
        hw = qrpuf.hamming_distance(observed,
                                    self.crt.entry(entry_id).o_string)
        self.hamming_total += hw
        if hw > self.threshold:
            self.all_accept = False
        self.samples = []
        self.rep = 0
        self.entry_pos += 1
        if self.entry_pos < len(self.entry_ids):
            self._send_current_challenge(ctx)
        else:
            self.done = True

    # -- node handlers ------------------------------------------------------

    def verifier(self, event: Event, ctx: EventContext):
        kind = event.payload.get("kind")
        if kind == "start":
            self._send_current_challenge(ctx)
        elif kind == "lost":
            self.lost = True
            self.all_accept = False
            self.done = True
        elif kind == "response":
            entry_id = self.entry_ids[self.entry_pos]
            state = event.payload["state"]
            bits = qrpuf.readout_bits(state, self.shifters[entry_id],
                                      self.meas_rng.substream(self.msg))
            bits = _flip_bits(bits, self.readout_prob,
                              self.meas_rng.substream(self.msg + 500_000))
            self.samples.append(bits)
            self.rep += 1
            if self.rep < self.cfg.qrpuf.shots_per_qubit:
                self._send_current_challenge(ctx)
            else:
                self._finish_entry(ctx)

    def user(self, event: Event, ctx: EventContext):
        if event.payload.get("kind") != "challenge":
            return
        response = self.respond(event.payload["state"])
        self._send(ctx, response, "response", "verifier")

    def adversary(self, event: Event, ctx: EventContext):
        payload = dict(event.payload)
        payload["state"] = intercept_resend_state(
            payload["state"], self.adv_rng.substream(payload["msg"]))
        ctx.emit(payload["final"], payload)

    def handlers(self):
        return {"verifier": self.verifier, "user": self.user,
                "adversary": self.adversary, AUDIT: sink}

    def record(self, trial: int) -> TrialRecord:
        accepted = self.all_accept and not self.lost
        metric = float(self.cfg.qrpuf.lam) if self.lost else float(self.hamming_total)
        return TrialRecord(trial=trial, accepted=accepted, error_metric=metric,
                           dwell_us=self.dwell_us, lost=self.lost,
                           seed=self.cfg.seed)


def _fresh_state_source(dim: int, rng: RngStream):
    calls = [0]

    def respond(_state):
        calls[0] += 1
        return haar_state(dim, rng.substream(calls[0]))

    return respond


# ---------------------------------------------------------------------------
# Unknown-unitary PUF sessions
# ---------------------------------------------------------------------------

class _UuPufSession:
    def __init__(self, cfg: ScenarioConfig, trial: int):
        rng = RngStream(cfg.seed, trial)
        up = cfg.uupuf
        self.cfg = cfg
        self.puf = uupuf.qgen_uu(up.lam, rng.substream(0))
        self.crt = uupuf.issue_quantum_crt(self.puf, up.crt_entries, up.k2,
                                           rng.substream(1))
        self.entry = int(rng.substream(3).generator.integers(0, up.crt_entries))
        self.channel = _channel_from_config(cfg)
        reference = self.crt.entry(self.entry).response_copies[0]
        if self.channel.noise is not None and up.memory_dwell_us > 0:
            reference = dephase_all_qubits(reference, up.memory_dwell_us,
                                           self.channel.noise.t2_us)
        self.reference = reference
        self.r = min(up.k1, up.k2)
        self.chan_rng = rng.substream(4)
        self.test_rng = rng.substream(5)
        self.adv_rng = rng.substream(6)
        self.on_path = cfg.adversary == "intercept_resend"
        if cfg.adversary == "random_guess":
            self.respond = _fresh_state_source(2 ** up.lam, rng.substream(7))
        else:
            self.respond = self._honest_respond

        self.accept_count = 0
        self.responses_seen = 0
        self.failed = False
        self.lost = False
        self.done = False
        self.f_hat = 0.0
        self.accepted = False
        self.dwell_us = 0.0
        self.msg = 0

    def _honest_respond(self, state):
        if isinstance(state, DensityMatrix):
            return uupuf.qeval(self.puf, state)
        return uupuf.eval_state(self.puf, state)

    def _send(self, ctx, state, kind, final):
        msg_id = self.msg
        self.msg += 1
        ctx.emit(AUDIT, {"kind": "quantum_sent", "msg": msg_id})
        result = transmit_quantum(self.channel, state,
                                  self.chan_rng.substream(msg_id))
        if isinstance(result, Lost):
            ctx.emit("verifier", {"kind": "lost", "msg": msg_id},
                     delay_us=result.latency_us)
            return
        dst = "adversary" if self.on_path else final
        ctx.emit(dst, {"kind": kind, "state": result.state, "msg": msg_id,
                       "final": final}, delay_us=result.latency_us)
        self.dwell_us += result.latency_us

    def _send_challenge(self, ctx):
        self._send(ctx, self.crt.entry(self.entry).challenge, "challenge",
                   "holder")

    def _finalize(self):
        self.f_hat = max(0.0, 2.0 * self.accept_count / self.r - 1.0)
        self.accepted = (not self.failed and not self.lost
                         and self.f_hat >= self.cfg.uupuf.tau)
        self.done = True

    def verifier(self, event: Event, ctx: EventContext):
        kind = event.payload.get("kind")
        if kind == "start":
            self._send_challenge(ctx)
        elif kind == "lost":
            self.lost = True
            self._finalize()
        elif kind == "response":
            state = event.payload["state"]
            if state.dim != self.reference.dim:
                self.failed = True
                self._finalize()
                return
            prob = uupuf.swap_accept_probability(state, self.reference)
            if self.test_rng.substream(self.responses_seen).generator.random() < prob:
                self.accept_count += 1
            self.responses_seen += 1
            if self.responses_seen < self.r:
                self._send_challenge(ctx)
            else:
                self._finalize()

    def holder(self, event: Event, ctx: EventContext):
        if event.payload.get("kind") != "challenge":
            return
        response = self.respond(event.payload["state"])
        self._send(ctx, response, "response", "verifier")

    def adversary(self, event: Event, ctx: EventContext):
        payload = dict(event.payload)
        payload["state"] = intercept_resend_state(
            payload["state"], self.adv_rng.substream(payload["msg"]))
        ctx.emit(payload["final"], payload)

    def handlers(self):
        return {"verifier": self.verifier, "holder": self.holder,
                "adversary": self.adversary, AUDIT: sink}

    def record(self, trial: int) -> TrialRecord:
        return TrialRecord(trial=trial, accepted=self.accepted,
                           error_metric=1.0 - self.f_hat,
                           dwell_us=self.dwell_us, lost=self.lost,
                           seed=self.cfg.seed)


# ---------------------------------------------------------------------------
# Hidden-matching token sessions
# ---------------------------------------------------------------------------

class _Hmp4Session:
    def __init__(self, cfg: ScenarioConfig, trial: int):
        rng = RngStream(cfg.seed, trial)
        hc = cfg.hmp4
        self.cfg = cfg
        self.server, token = hmp4.issue(hc.total_registers(),
                                        rng.substream(1),
                                        control_count=hc.control_registers)
        noise = cfg.channel.noise.to_params() if cfg.channel.noise else None
        if cfg.adversary == "random_guess":
            self.holder = RandomGuessHolder(rng.substream(7))
        elif cfg.adversary == "token_clone":
            self.holder = TokenCloneHolder(token, rng.substream(7))
        else:
            self.holder = hmp4.HonestHolder(token, rng.substream(7),
                                            noise=noise,
                                            now_us=hc.memory_dwell_us)
        self.server_rng = rng.substream(3)
        self.transcript = None
        self.challenge = None

    def server_node(self, event: Event, ctx: EventContext):
        kind = event.payload.get("kind")
        if kind == "start":
            self.challenge = hmp4.draw_validation_challenge(
                self.server, self.cfg.hmp4.t, self.server_rng)
            ctx.emit("holder", {"kind": "validation_challenge",
                                "message": self.challenge.to_json_dict(),
                                "challenge": self.challenge})
        elif kind == "validation_reply":
            self.transcript = hmp4.judge_validation_reply(
                self.server, self.challenge, event.payload["reply"],
                self.cfg.hmp4.error_tolerance)

    def holder_node(self, event: Event, ctx: EventContext):
        if event.payload.get("kind") != "validation_challenge":
            return
        reply = self.holder(event.payload["challenge"])
        ctx.emit("server", {"kind": "validation_reply",
                            "message": reply.to_json_dict(), "reply": reply})

    def handlers(self):
        return {"server": self.server_node, "holder": self.holder_node,
                AUDIT: sink}

    def record(self, trial: int) -> TrialRecord:
        tr = self.transcript
        return TrialRecord(trial=trial, accepted=bool(tr and tr.accept),
                           error_metric=float(tr.error_count if tr else -1),
                           dwell_us=self.cfg.hmp4.memory_dwell_us, lost=False,
                           seed=self.cfg.seed)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------

_SESSIONS = {"qrpuf": _QrPufSession, "uupuf": _UuPufSession,
             "hmp4": _Hmp4Session}


def run_trial_trace(cfg: ScenarioConfig, trial: int) -> tuple[TrialRecord, list[Event]]:
    """Run one trial and return its record plus the full event trace."""
    session = _SESSIONS[cfg.protocol](cfg, trial)
    start_node = "server" if cfg.protocol == "hmp4" else "verifier"
    start_time = cfg.hmp4.memory_dwell_us if cfg.protocol == "hmp4" else 0.0
    initial = [Event(time_us=start_time, seq=0, dst=start_node,
                     payload={"kind": "start"})]
    trace = run_event_loop(initial, session.handlers())
    return session.record(trial), trace


def _run_trial(cfg: ScenarioConfig, trial: int) -> TrialRecord:
    record, _ = run_trial_trace(cfg, trial)
    return record


def _trial_worker(args) -> TrialRecord:
    cfg, trial = args
    return _run_trial(cfg, trial)


def run_scenario(cfg: ScenarioConfig, parallel: int | None = None) -> Metrics:
    """Execute cfg.trials independent sessions and aggregate the results.

    ``parallel`` distributes trials over worker processes; outputs merge by
    trial index, so results are identical to a serial run.
    """
    if parallel is not None and parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            records = list(pool.map(_trial_worker,
                                    [(cfg, i) for i in range(cfg.trials)],
                                    chunksize=max(1, cfg.trials // (parallel * 4))))
        records.sort(key=lambda r: r.trial)
    else:
        records = [_run_trial(cfg, i) for i in range(cfg.trials)]
    return aggregate(cfg, records)


def audit_quantum_conservation(trace: list[Event]) -> tuple[int, int, int]:
    """(sent, delivered, lost) counts from a trial trace; every quantum send
    must be delivered or lost exactly once."""
    sent = sum(1 for ev in trace
               if ev.dst == AUDIT and ev.payload.get("kind") == "quantum_sent")
    delivered_ids = set()
    lost_ids = set()
    for ev in trace:
        kind = ev.payload.get("kind")
        if kind in ("challenge", "response"):
            delivered_ids.add(ev.payload["msg"])
        elif kind == "lost":
            lost_ids.add(ev.payload["msg"])
    return sent, len(delivered_ids), len(lost_ids)
