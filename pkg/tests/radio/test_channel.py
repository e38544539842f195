"""
Tests for the channel model.

Covers:
- Airtime arithmetic at 6 Mbps with an 8 us PLCP header
- Path loss and transmit-power calibration to the 300 m range
- Nakagami-m fading gain statistics (scipy.stats)
- Reception outcomes: capture, collision, half-duplex, blockage, range cutoff
"""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from crnt_sim.protocol.models import Position
from crnt_sim.radio.channel import (
    ChannelParams,
    Outcome,
    ReceiverSet,
    Transmission,
    airtime_us,
    calibrate_tx_power,
    mean_rx_power_dbm,
    path_loss_db,
    resolve_receptions,
    sample_fading_gain,
)

PARAMS = ChannelParams()


def frame(sender: int, x: float, y: float = 0.0, start_us: int = 0, fading=None, size: int = 31) -> Transmission:
    return Transmission.create(sender, bytes(size), start_us, Position(x=x, y=y), PARAMS, fading=fading)


def receivers(**positions) -> ReceiverSet:
    return ReceiverSet.from_positions({int(k[1:]): Position(x=x, y=y) for k, (x, y) in positions.items()})


def flat(n: int = 16) -> np.ndarray:
    """Unit fading gains for vehicle ids 0..n-1"""
    return np.ones(n)


def outcome_of(reception, receiver: int) -> Outcome:
    return next(o.outcome for o in reception.outcomes() if o.receiver == receiver)


class TestAirtime:
    """PLCP header plus whole OFDM symbols"""

    def test_full_message(self):
        assert airtime_us(512, PARAMS) == 696

    def test_plain_beacon(self):
        assert airtime_us(31, PARAMS) == 56

    def test_one_byte(self):
        assert airtime_us(1, PARAMS) == 16

    def test_doubling_payload(self):
        for size in range(1, 257):
            single = airtime_us(size, PARAMS) - PARAMS.plcp_header_us
            double = airtime_us(2 * size, PARAMS) - PARAMS.plcp_header_us
            assert double >= single
            assert double <= 2 * single

    def test_empty_payload_rejected(self):
        with pytest.raises(ValueError):
            airtime_us(0, PARAMS)

    def test_transmission_end_matches_airtime(self):
        tx = frame(1, 0.0, start_us=1000, size=512)
        assert tx.end_us - tx.start_us == 696


class TestPathLoss:
    """Log-distance model and range calibration"""

    def test_reference_distance(self):
        params = ChannelParams(tx_power_dbm=20.0)
        assert mean_rx_power_dbm(Position(x=0, y=0), Position(x=1, y=0), params) == pytest.approx(20.0 - 47.0)

    def test_zero_distance_treated_as_one_meter(self):
        assert path_loss_db(0.0, PARAMS) == path_loss_db(1.0, PARAMS)

    def test_power_decreases_with_distance(self):
        powers = [mean_rx_power_dbm(Position(x=0, y=0), Position(x=d, y=0), PARAMS) for d in range(1, 600, 7)]
        assert all(a > b for a, b in zip(powers, powers[1:]))

    def test_calibrated_sinr_at_range(self):
        """Mean SINR at 300 m equals the 10 dB threshold"""
        power = mean_rx_power_dbm(Position(x=0, y=0), Position(x=300, y=0), PARAMS)
        assert power - PARAMS.noise_floor_dbm == pytest.approx(PARAMS.sinr_threshold_db, abs=1e-6)

    def test_half_range_needs_less_power(self):
        difference = calibrate_tx_power(300.0, PARAMS) - calibrate_tx_power(150.0, PARAMS)
        assert difference == pytest.approx(10 * PARAMS.pathloss_exponent * math.log10(2))

    def test_calibration_is_inverse(self):
        for range_m in (50.0, 300.0, 1000.0):
            params = ChannelParams(tx_power_dbm=calibrate_tx_power(range_m, PARAMS))
            power = mean_rx_power_dbm(Position(x=0, y=0), Position(x=range_m, y=0), params)
            assert power == pytest.approx(params.noise_floor_dbm + params.sinr_threshold_db, abs=1e-9)

    def test_rx_power_never_exceeds_tx_power(self):
        for d in (0.0, 0.5, 1.0, 10.0):
            assert mean_rx_power_dbm(Position(x=0, y=0), Position(x=d, y=0), PARAMS) < PARAMS.effective_tx_power_dbm


class TestFadingGain:
    """Unit-mean Gamma(m, 1/m) power gains"""

    def test_million_draws_moments(self):
        gains = sample_fading_gain(np.random.default_rng(3), 3.0, 1_000_000)
        assert gains.mean() == pytest.approx(1.0, abs=0.01)
        assert gains.var() == pytest.approx(1 / 3, abs=0.01)

    def test_rayleigh_case_is_exponential(self):
        """m = 1 matches Exponential(1) under KS at alpha = 0.01 for most seeds"""
        passed = sum(
            stats.kstest(sample_fading_gain(np.random.default_rng(seed), 1.0, 20_000), "expon").pvalue > 0.01
            for seed in range(5)
        )
        assert passed >= 4

    def test_shape_below_half_rejected(self):
        with pytest.raises(ValueError):
            sample_fading_gain(np.random.default_rng(0), 0.4)

    def test_params_reject_small_shape(self):
        with pytest.raises(ValidationError):
            ChannelParams(m=0.3)


class TestResolveReceptions:
    """Per-receiver outcomes of overlapping frames"""

    def test_close_receiver_delivers(self):
        """At 10 m the fading margin makes a loss vanishingly rare"""
        margin_db = mean_rx_power_dbm(Position(x=0, y=0), Position(x=10, y=0), PARAMS) \
            - PARAMS.noise_floor_dbm - PARAMS.sinr_threshold_db
        assert stats.gamma.cdf(10 ** (-margin_db / 10), a=3.0, scale=1 / 3) < 1e-6

        generator = np.random.default_rng(17)
        angles = np.linspace(0, 2 * np.pi, 10_000, endpoint=False)
        ring = {i + 1: Position(x=10 * math.cos(a), y=10 * math.sin(a)) for i, a in enumerate(angles)}
        result = resolve_receptions([frame(0, 0.0)], ReceiverSet.from_positions(ring), None, PARAMS, generator)[0]
        assert result.count(Outcome.DELIVERED) / len(ring) > 0.999

    def test_equal_overlapping_frames_collide(self):
        fading = flat(3)
        a, b = frame(0, -50.0, fading=fading), frame(1, 50.0, fading=fading)
        results = resolve_receptions([a, b], receivers(v0=(-50, 0), v1=(50, 0), v2=(0, 0)), None, PARAMS,
                                     np.random.default_rng(0))
        for reception in results:
            assert list(reception.receiver_ids) == [2]
            assert outcome_of(reception, 2) is Outcome.LOST_COLLISION

    def test_strong_signal_captured(self):
        fading = flat(3)
        near, far = frame(0, -20.0, fading=fading), frame(1, 250.0, fading=fading)
        results = resolve_receptions([near, far], receivers(v0=(-20, 0), v1=(250, 0), v2=(0, 0)), None, PARAMS,
                                     np.random.default_rng(0))
        assert outcome_of(results[0], 2) is Outcome.DELIVERED
        assert outcome_of(results[1], 2) is Outcome.LOST_COLLISION

    def test_non_overlapping_frames_do_not_interfere(self):
        fading = flat(3)
        first = frame(0, -50.0, start_us=0, fading=fading)
        second = frame(1, 50.0, start_us=first.end_us, fading=fading)
        results = resolve_receptions([first, second], receivers(v0=(-50, 0), v1=(50, 0), v2=(0, 0)), None, PARAMS,
                                     np.random.default_rng(0))
        assert [outcome_of(r, 2) for r in results] == [Outcome.DELIVERED, Outcome.DELIVERED]
        # neither sender is transmitting during the other's frame
        assert 1 in results[0].receiver_ids
        assert 0 in results[1].receiver_ids

    def test_sender_gets_no_outcome(self):
        result = resolve_receptions([frame(0, 0.0, fading=flat())], receivers(v0=(0, 0), v1=(20, 0)), None,
                                    PARAMS, np.random.default_rng(0))[0]
        assert list(result.receiver_ids) == [1]

    def test_blocked_path(self):
        def wall(origin, points):
            return points[:, 0] < 30

        result = resolve_receptions([frame(0, 0.0, fading=flat())], receivers(v1=(20, 0), v2=(40, 0)), wall,
                                    PARAMS, np.random.default_rng(0))[0]
        outcomes = {o.receiver: o for o in result.outcomes()}
        assert outcomes[1].outcome is Outcome.DELIVERED
        assert outcomes[2].outcome is Outcome.LOST_BLOCKED
        assert outcomes[2].rx_power_dbm is None and outcomes[2].sinr_db is None

    def test_blocked_independent_of_fading(self):
        def wall(origin, points):
            return np.zeros(len(points), dtype=bool)

        for seed in range(20):
            result = resolve_receptions([frame(0, 0.0)], receivers(v1=(5, 0), v2=(100, 0)), wall, PARAMS,
                                        np.random.default_rng(seed))[0]
            assert result.count(Outcome.LOST_BLOCKED) == 2

    def test_blocked_interferer_adds_nothing(self):
        fading = flat(3)

        def shield(origin, points):
            # frames from x > 0 cannot reach anyone
            return np.full(len(points), origin[0] <= 0)

        results = resolve_receptions([frame(0, -50.0, fading=fading), frame(1, 50.0, fading=fading)],
                                     receivers(v0=(-50, 0), v1=(50, 0), v2=(0, 0)), shield, PARAMS,
                                     np.random.default_rng(0))
        assert outcome_of(results[0], 2) is Outcome.DELIVERED

    def test_beyond_range_never_decodes(self):
        result = resolve_receptions([frame(0, 0.0, fading=flat(10) * 100)], receivers(v1=(301, 0)), None,
                                    PARAMS, np.random.default_rng(0))[0]
        assert outcome_of(result, 1) is Outcome.LOST_FADING

    def test_delivered_implies_threshold(self, rng):
        positions = {i: Position(x=float(x), y=float(y)) for i, (x, y) in enumerate(rng.uniform(-350, 350, (80, 2)))}
        frames = [frame(i, positions[i].x, positions[i].y, start_us=int(rng.integers(0, 50))) for i in range(4)]
        for reception in resolve_receptions(frames, ReceiverSet.from_positions(positions), None, PARAMS, rng):
            for outcome in reception.outcomes():
                if outcome.delivered:
                    assert outcome.sinr_db >= PARAMS.sinr_threshold_db

    def test_interferer_never_helps(self, rng):
        """Adding a frame can turn Delivered into a loss but never the reverse"""
        for _ in range(50):
            points = rng.uniform(-300, 300, (30, 2))
            positions = {i: Position(x=float(x), y=float(y)) for i, (x, y) in enumerate(points)}
            fading = rng.gamma(3.0, 1 / 3, 30)
            target = frame(0, positions[0].x, positions[0].y, fading=fading)
            other = frame(1, positions[1].x, positions[1].y, fading=fading)
            alone = resolve_receptions([target], ReceiverSet.from_positions(positions), None, PARAMS, rng)[0]
            crowded = resolve_receptions([target, other], ReceiverSet.from_positions(positions), None, PARAMS,
                                         rng, targets=[target])[0]
            before = {o.receiver: o for o in alone.outcomes()}
            for outcome in crowded.outcomes():
                if outcome.delivered:
                    assert before[outcome.receiver].delivered
                assert outcome.sinr_db <= before[outcome.receiver].sinr_db + 1e-9

    def test_delivery_ratio_falls_with_distance(self):
        """Over 50 m bins the delivery ratio never rises with distance"""
        generator = np.random.default_rng(23)
        per_bin = 4_000
        centers = np.arange(25.0, 300.0, 50.0)
        positions = {}
        for b, distance in enumerate(centers):
            for k in range(per_bin):
                angle = 2 * np.pi * k / per_bin
                positions[1 + b * per_bin + k] = Position(x=distance * math.cos(angle), y=distance * math.sin(angle))
        result = resolve_receptions([frame(0, 0.0)], ReceiverSet.from_positions(positions), None, PARAMS,
                                    generator)[0]
        delivered = result.codes == 0
        ratios = [delivered[(result.receiver_ids - 1) // per_bin == b].mean() for b in range(len(centers))]
        assert all(later <= earlier + 0.01 for earlier, later in zip(ratios, ratios[1:]))
        assert ratios[0] > 0.99
        assert ratios[-1] < ratios[0]

    def test_same_seed_same_outcomes(self):
        positions = {i: Position(x=10.0 * i, y=0.0) for i in range(40)}
        runs = [
            resolve_receptions([frame(0, 0.0), frame(39, 390.0)], ReceiverSet.from_positions(positions), None,
                               PARAMS, np.random.default_rng(4))
            for _ in range(2)
        ]
        for first, second in zip(*runs):
            assert np.array_equal(first.codes, second.codes)
