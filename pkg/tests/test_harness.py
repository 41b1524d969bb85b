"""Harness tests: event loop, channels, scenarios, adversaries, metrics."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from qtoksim.harness import (
    Event,
    QuantumChannel,
    ScenarioConfig,
    audit_quantum_conservation,
    metrics_json,
    run_event_loop,
    run_scenario,
    run_trial_trace,
    transmit_quantum,
    trials_csv,
)
from qtoksim.harness.channels import Delivered, Lost
from qtoksim.harness.events import ScenarioAbort, sink
from qtoksim.quantum_core import NoiseParams, StateVector, fidelity
from qtoksim.rng import RngStream

PLUS = StateVector([1 / math.sqrt(2), 1 / math.sqrt(2)])


class TestEventLoop:
    def test_empty_initial_set(self):
        assert run_event_loop([], {}) == []

    def test_tie_break_by_seq(self):
        seen = []
        handlers = {"n": lambda ev, ctx: seen.append(ev.seq)}
        events = [Event(time_us=1.0, seq=5, dst="n"),
                  Event(time_us=1.0, seq=2, dst="n")]
        run_event_loop(events, handlers)
        assert seen == [2, 5]

    def test_clock_monotone_and_deterministic(self):
        def make_handlers(log):
            def ping(ev, ctx):
                if ev.payload.get("hops", 0) < 5:
                    ctx.emit("pong", {"hops": ev.payload.get("hops", 0) + 1},
                             delay_us=2.0)
                log.append((ev.time_us, ev.seq, ev.dst))

            def pong(ev, ctx):
                ctx.emit("ping", {"hops": ev.payload["hops"]}, delay_us=1.0)
                log.append((ev.time_us, ev.seq, ev.dst))

            return {"ping": ping, "pong": pong}

        runs = []
        for _ in range(2):
            log = []
            run_event_loop([Event(0.0, 0, "ping", {"hops": 0})],
                           make_handlers(log))
            runs.append(log)
        assert runs[0] == runs[1]
        times = [t for t, _, _ in runs[0]]
        assert times == sorted(times)

    def test_handler_failure_aborts_with_diagnostic(self):
        def boom(ev, ctx):
            raise RuntimeError("broken node")

        with pytest.raises(ScenarioAbort, match="broken node"):
            run_event_loop([Event(0.0, 0, "n")], {"n": boom})

    def test_unknown_destination_aborts(self):
        with pytest.raises(ScenarioAbort, match="no handler"):
            run_event_loop([Event(0.0, 0, "ghost")], {"n": sink})


class TestQuantumChannel:
    def test_ideal_channel_is_identity(self):
        ch = QuantumChannel()
        out = transmit_quantum(ch, PLUS, RngStream(0))
        assert isinstance(out, Delivered)
        assert fidelity(out.state, PLUS) == pytest.approx(1.0, abs=1e-12)

    def test_total_loss(self):
        ch = QuantumChannel(loss_prob=1.0)
        for i in range(20):
            assert isinstance(transmit_quantum(ch, PLUS, RngStream(i)), Lost)

    def test_transit_dephasing_scales_coherence(self):
        """10 us at T2 = 108.6 us shrinks the off-diagonal by e^{-10/108.6}."""
        noise = NoiseParams(t2_us=108.6, readout_flip_prob=0.0,
                            idle_depolarize_prob=0.0)
        ch = QuantumChannel(latency_us=10.0, noise=noise)
        out = transmit_quantum(ch, PLUS, RngStream(1))
        expected = 0.5 * math.exp(-10.0 / 108.6)
        assert expected == pytest.approx(0.456, abs=1e-3)
        assert abs(out.state.matrix[0, 1]) == pytest.approx(expected, abs=1e-12)

    def test_loss_rate_statistics(self):
        ch = QuantumChannel(loss_prob=0.3)
        rng = RngStream(2)
        losses = sum(isinstance(transmit_quantum(ch, PLUS, rng.substream(i)),
                                Lost) for i in range(5000))
        assert abs(losses / 5000 - 0.3) < 4 * math.sqrt(0.21 / 5000)


class TestScenarioConfig:
    def test_rejects_incompatible_adversary(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(protocol="hmp4", adversary="emulation")
        with pytest.raises(ValidationError):
            ScenarioConfig(protocol="uupuf", adversary="token_clone")
        with pytest.raises(ValidationError):
            ScenarioConfig(protocol="qrpuf", adversary="token_clone")

    def test_rejects_bad_t(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(protocol="hmp4", hmp4={"t": 10})

    def test_rejects_too_few_registers(self):
        with pytest.raises(ValidationError):
            ScenarioConfig(protocol="hmp4", hmp4={"t": 12, "registers": 6})

    def test_threshold_resolution(self):
        cfg = ScenarioConfig(protocol="qrpuf")
        assert cfg.resolved_hamming_threshold() == 0
        noisy = ScenarioConfig(protocol="qrpuf", channel={"noise": {}})
        assert noisy.resolved_hamming_threshold() == math.ceil(0.1 * 4)
        pinned = ScenarioConfig(protocol="qrpuf",
                                qrpuf={"hamming_threshold": 2})
        assert pinned.resolved_hamming_threshold() == 2

    def test_lambda_alias(self):
        cfg = ScenarioConfig(protocol="qrpuf", qrpuf={"lambda": 6})
        assert cfg.qrpuf.lam == 6
        assert cfg.model_dump(by_alias=True)["qrpuf"]["lambda"] == 6


class TestQrPufScenarios:
    def test_honest_noiseless_accepts_all(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=100, seed=1)
        m = run_scenario(cfg)
        assert m.accept_rate == 1.0
        assert m.honest_accept_rate == 1.0
        assert m.adversary_accept_rate is None

    def test_emulation_accepts_all(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=100, seed=2,
                             adversary="emulation")
        m = run_scenario(cfg)
        assert m.adversary_accept_rate == 1.0

    def test_random_guess_rate_matches_session_oracle(self):
        """Each verified entry passes with probability 2^-lambda, and a
        session verifies two entries: oracle rate 2^-8 at lambda=4."""
        cfg = ScenarioConfig(protocol="qrpuf", trials=1000, seed=3,
                             adversary="random_guess")
        m = run_scenario(cfg)
        oracle = (1 / 16) ** 2
        sigma = math.sqrt(oracle * (1 - oracle) / cfg.trials)
        assert abs(m.adversary_accept_rate - oracle) <= 3 * sigma
        assert m.adversary_accept_rate < 0.05

    def test_intercept_resend_degrades_acceptance(self):
        """Paired comparison at fixed seeds: measuring each transiting qubit
        strictly lowers the honest acceptance rate."""
        base = ScenarioConfig(protocol="qrpuf", trials=1000, seed=4)
        attacked = ScenarioConfig(protocol="qrpuf", trials=1000, seed=4,
                                  adversary="intercept_resend")
        rate_base = run_scenario(base).accept_rate
        rate_attacked = run_scenario(attacked).accept_rate
        assert rate_base == 1.0
        assert rate_attacked < rate_base

    def test_loss_recorded_separately(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=60, seed=5,
                             channel={"loss_prob": 0.5})
        m = run_scenario(cfg)
        assert m.lost_trials > 0
        lost = [r for r in m.records if r.lost]
        assert all(not r.accepted for r in lost)

    def test_dephasing_monotonicity_over_dwell_grid(self):
        """Honest acceptance is non-increasing in channel latency when the
        channel dephases in transit (fixed seed set per point)."""
        rates = []
        for latency in (0.0, 30.0, 100.0, 250.0):
            cfg = ScenarioConfig(
                protocol="qrpuf", trials=1000, seed=6,
                qrpuf={"crt_size": 2, "challenges_per_session": 2},
                channel={"latency_us": latency,
                         "noise": {"t2_us": 108.6, "readout_flip_prob": 0.0,
                                   "idle_depolarize_prob": 0.0}})
            rates.append(run_scenario(cfg).accept_rate)
        assert rates[0] == 1.0
        assert all(rates[i + 1] <= rates[i] for i in range(len(rates) - 1))

    def test_conservation_audit(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=1, seed=7,
                             channel={"loss_prob": 0.3})
        for trial in range(30):
            _, trace = run_trial_trace(cfg, trial)
            sent, delivered, lost = audit_quantum_conservation(trace)
            assert sent == delivered + lost

    def test_trace_times_non_decreasing(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=1, seed=8,
                             channel={"latency_us": 3.0})
        _, trace = run_trial_trace(cfg, 0)
        times = [ev.time_us for ev in trace]
        assert times == sorted(times)
        assert times[-1] > 0.0


class TestUuPufScenarios:
    def test_honest_accepts(self):
        cfg = ScenarioConfig(protocol="uupuf", trials=50, seed=10)
        assert run_scenario(cfg).accept_rate == 1.0

    def test_random_guess_rejected(self):
        cfg = ScenarioConfig(protocol="uupuf", trials=300, seed=11,
                             adversary="random_guess")
        assert run_scenario(cfg).adversary_accept_rate < 0.01

    def test_intercept_resend_degrades(self):
        base = ScenarioConfig(protocol="uupuf", trials=200, seed=12)
        attacked = ScenarioConfig(protocol="uupuf", trials=200, seed=12,
                                  adversary="intercept_resend")
        assert run_scenario(attacked).accept_rate < run_scenario(base).accept_rate

    def test_memory_dwell_lowers_fhat(self):
        quiet = ScenarioConfig(protocol="uupuf", trials=100, seed=13,
                               channel={"noise": {"readout_flip_prob": 0.0,
                                                  "idle_depolarize_prob": 0.0}})
        stale = ScenarioConfig(protocol="uupuf", trials=100, seed=13,
                               uupuf={"memory_dwell_us": 200.0},
                               channel={"noise": {"readout_flip_prob": 0.0,
                                                  "idle_depolarize_prob": 0.0}})
        f_quiet = np.mean([1 - r.error_metric for r in run_scenario(quiet).records])
        f_stale = np.mean([1 - r.error_metric for r in run_scenario(stale).records])
        assert f_stale < f_quiet


class TestHmp4Scenarios:
    def test_honest_accepts(self):
        cfg = ScenarioConfig(protocol="hmp4", trials=200, seed=20)
        assert run_scenario(cfg).accept_rate == 1.0

    def test_random_guess_matches_oracle(self):
        """Brute-force per-register oracle: pass probability 1/2, eight
        registers opened -> (1/2)^8."""
        cfg = ScenarioConfig(protocol="hmp4", trials=1000, seed=21,
                             adversary="random_guess")
        m = run_scenario(cfg)
        oracle = 0.5 ** 8
        sigma = math.sqrt(oracle * (1 - oracle) / cfg.trials)
        assert abs(m.adversary_accept_rate - oracle) <= 3 * sigma

    def test_token_clone_matches_oracle(self):
        """Clone bound: matching guessed right half the time (pass 1), wrong
        half passes at 1/2 -> 3/4 per register, (3/4)^8 per session."""
        cfg = ScenarioConfig(protocol="hmp4", trials=1000, seed=22,
                             adversary="token_clone")
        m = run_scenario(cfg)
        oracle = 0.75 ** 8
        sigma = math.sqrt(oracle * (1 - oracle) / cfg.trials)
        assert abs(m.adversary_accept_rate - oracle) <= 3 * sigma

    def test_memory_dwell_monotonicity(self):
        rates = []
        for dwell in (0.0, 10.0, 40.0):
            cfg = ScenarioConfig(
                protocol="hmp4", trials=500, seed=23,
                hmp4={"memory_dwell_us": dwell},
                channel={"noise": {"t2_us": 108.6, "readout_flip_prob": 0.0,
                                   "idle_depolarize_prob": 0.0}})
            rates.append(run_scenario(cfg).accept_rate)
        assert rates[0] == 1.0
        assert all(rates[i + 1] <= rates[i] for i in range(len(rates) - 1))


class TestDeterminismAndMetrics:
    def test_same_seed_identical_metrics(self):
        for cfg in (
            ScenarioConfig(protocol="qrpuf", trials=20, seed=30,
                           adversary="random_guess"),
            ScenarioConfig(protocol="uupuf", trials=20, seed=31),
            ScenarioConfig(protocol="hmp4", trials=20, seed=32,
                           adversary="token_clone"),
        ):
            m1, m2 = run_scenario(cfg), run_scenario(cfg)
            assert metrics_json(m1, cfg) == metrics_json(m2, cfg)
            assert trials_csv(m1) == trials_csv(m2)

    def test_parallel_equals_serial(self):
        cfg = ScenarioConfig(protocol="qrpuf", trials=16, seed=33,
                             adversary="random_guess",
                             channel={"loss_prob": 0.1})
        serial = run_scenario(cfg)
        parallel = run_scenario(cfg, parallel=3)
        assert trials_csv(serial) == trials_csv(parallel)

    def test_noise_baseline_ordering(self):
        """honest acceptance with noise never beats the noiseless baseline
        at a fixed seed set, for every protocol."""
        for protocol in ("qrpuf", "uupuf", "hmp4"):
            clean = ScenarioConfig(protocol=protocol, trials=150, seed=34)
            noisy_channel = {"latency_us": 40.0,
                             "noise": {"t2_us": 108.6,
                                       "readout_flip_prob": 0.0,
                                       "idle_depolarize_prob": 0.0}}
            extra = {}
            if protocol == "hmp4":
                extra = {"hmp4": {"memory_dwell_us": 40.0}}
            noisy = ScenarioConfig(protocol=protocol, trials=150, seed=34,
                                   channel=noisy_channel, **extra)
            assert run_scenario(noisy).accept_rate <= run_scenario(clean).accept_rate

    def test_csv_columns(self):
        cfg = ScenarioConfig(protocol="hmp4", trials=3, seed=35)
        csv_text = trials_csv(run_scenario(cfg))
        header = csv_text.splitlines()[0]
        assert header == "trial,protocol,adversary,accepted,error_metric,dwell_us,seed"
        assert len(csv_text.splitlines()) == 4
