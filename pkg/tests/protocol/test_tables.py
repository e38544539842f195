"""
Tests for neighbor table construction, PNT packing and the CRNT union.

Covers:
- NT ordering, freshest-beacon selection and owner exclusion
- PNT timestamps, lifetime and truncation to the wire budget
- Merge conflict rules and stale purging
"""

import pytest

from crnt_sim.core.errors import EmptyTable
from crnt_sim.protocol.codec import BASE_BEACON_BYTES, ENTRY, MAX_MESSAGE_BYTES, PNT_HEADER, encoded_size
from crnt_sim.protocol.models import Crnt, Position
from crnt_sim.protocol.tables import build_nt, make_pnt, merge_entry, purge_stale

from ..utils.test_helpers import make_beacon, make_entry, make_table

ORIGIN = Position(x=0.0, y=0.0)


class TestBuildNt:
    """Clearing and rebuilding the direct neighbor table"""

    def test_nearest_first(self):
        """Four neighbors around the owner come out ordered by distance"""
        beacons = [
            make_beacon(4, x=-30.0, y=0.0),
            make_beacon(6, x=12.0, y=5.0),
            make_beacon(7, x=80.0, y=-3.5),
            make_beacon(3, x=0.0, y=150.0),
        ]
        nt = build_nt(5, ORIGIN, beacons, now=1000)
        assert nt.ids == [6, 4, 7, 3]
        assert nt.built_at == 1000

    def test_freshest_beacon_wins(self):
        beacons = [make_beacon(2, ts=900, x=10.0), make_beacon(2, ts=950, x=12.0)]
        nt = build_nt(1, ORIGIN, beacons, now=1000)
        assert len(nt) == 1
        assert nt.entries[0].last_update == 950
        assert nt.entries[0].position.x == 12.0

    def test_freshest_wins_regardless_of_arrival_order(self):
        beacons = [make_beacon(2, ts=950, x=12.0), make_beacon(2, ts=900, x=10.0)]
        assert build_nt(1, ORIGIN, beacons, now=1000).entries[0].last_update == 950

    def test_empty_input(self):
        assert len(build_nt(1, ORIGIN, [], now=1000)) == 0

    def test_owner_excluded(self):
        nt = build_nt(1, ORIGIN, [make_beacon(1, x=5.0), make_beacon(2, x=6.0)], now=1000)
        assert nt.ids == [2]

    def test_equal_distance_breaks_on_id(self):
        beacons = [make_beacon(9, x=10.0), make_beacon(3, x=-10.0), make_beacon(5, y=10.0)]
        assert build_nt(1, ORIGIN, beacons, now=1000).ids == [3, 5, 9]

    def test_distances_non_decreasing(self, rng):
        beacons = [make_beacon(i, x=float(x), y=float(y))
                   for i, (x, y) in enumerate(rng.uniform(-300, 300, size=(60, 2)), start=10)]
        owner_pos = Position(x=3.0, y=-7.0)
        nt = build_nt(1, owner_pos, beacons, now=1000)
        distances = [owner_pos.distance_to(entry.position) for entry in nt.entries]
        assert distances == sorted(distances)


class TestMakePnt:
    """Packing a neighbor table into a piggybacked table"""

    def table(self, n: int):
        return make_table(0, [make_entry(i, x=10.0 * i, last_update=900) for i in range(1, n + 1)])

    def test_lifetime_and_stamps(self):
        pnt = make_pnt(self.table(5), now=2000, next_sn=7)
        assert len(pnt.entries) == 5
        assert pnt.ts == 2000
        assert pnt.lt - pnt.ts == 1000
        assert pnt.sn == 7
        assert all(entry.last_update == 2000 for entry in pnt.entries)

    def test_single_entry(self):
        pnt = make_pnt(self.table(1), now=2000, next_sn=0)
        assert [entry.id for entry in pnt.entries] == [1]

    def test_empty_table_raises(self):
        with pytest.raises(EmptyTable):
            make_pnt(make_table(0, []), now=2000, next_sn=0)

    def test_non_positive_lifetime_rejected(self):
        with pytest.raises(ValueError):
            make_pnt(self.table(2), now=2000, next_sn=0, lifetime_ms=0)

    def test_budget_for_thirty_keeps_thirty_nearest(self):
        """A 40-row table under a budget sized for exactly 30 rows keeps rows 1..30"""
        budget = PNT_HEADER.size + 30 * ENTRY.size
        pnt = make_pnt(self.table(40), now=2000, next_sn=0, byte_budget=budget)
        assert [entry.id for entry in pnt.entries] == list(range(1, 31))

        beacon = make_beacon(0, ts=2000, pnt=pnt)
        assert encoded_size(beacon) - BASE_BEACON_BYTES == budget
        # one byte less loses the farthest row
        shorter = make_pnt(self.table(40), now=2000, next_sn=0, byte_budget=budget - 1)
        assert len(shorter.entries) == 29

    def test_default_budget_fills_the_message(self):
        pnt = make_pnt(self.table(40), now=2000, next_sn=0)
        size = encoded_size(make_beacon(0, ts=2000, pnt=pnt))
        assert len(pnt.entries) == 28
        assert size <= MAX_MESSAGE_BYTES
        assert size + ENTRY.size > MAX_MESSAGE_BYTES

    def test_truncation_only_drops_a_suffix(self):
        """Shrinking the budget never reorders what is kept"""
        table = self.table(40)
        full = [entry.id for entry in make_pnt(table, now=2000, next_sn=0, byte_budget=10_000).entries[:40]]
        for budget in range(PNT_HEADER.size, PNT_HEADER.size + 41 * ENTRY.size, 7):
            kept = [entry.id for entry in make_pnt(table, now=2000, next_sn=0, byte_budget=budget).entries]
            assert kept == full[:len(kept)]


class TestMergeEntry:
    """Conflict rules when folding rows into the CRNT"""

    def test_new_row_stored(self):
        crnt = Crnt(owner=1)
        assert merge_entry(crnt, make_entry(2, last_update=100), reporter=3)
        assert crnt.reporters[2] == 3

    def test_owner_row_discarded(self):
        crnt = Crnt(owner=1)
        assert not merge_entry(crnt, make_entry(1, last_update=100), reporter=3)
        assert 1 not in crnt

    def test_older_row_ignored(self):
        crnt = Crnt(owner=1)
        merge_entry(crnt, make_entry(2, x=5.0, last_update=200), reporter=3)
        assert not merge_entry(crnt, make_entry(2, x=9.0, last_update=100), reporter=4)
        assert crnt.entries[2].position.x == 5.0

    def test_tie_goes_to_higher_reporter(self):
        crnt = Crnt(owner=1)
        merge_entry(crnt, make_entry(2, x=5.0, last_update=200), reporter=8)
        assert not merge_entry(crnt, make_entry(2, x=6.0, last_update=200), reporter=4)
        assert merge_entry(crnt, make_entry(2, x=7.0, last_update=200), reporter=9)
        assert crnt.entries[2].position.x == 7.0
        assert crnt.reporters[2] == 9

    def test_last_update_never_decreases(self, rng):
        crnt = Crnt(owner=0)
        seen = {}
        for _ in range(2000):
            vehicle = int(rng.integers(1, 20))
            stamp = int(rng.integers(0, 5000))
            merge_entry(crnt, make_entry(vehicle, last_update=stamp), reporter=int(rng.integers(1, 50)))
            assert crnt.entries[vehicle].last_update >= seen.get(vehicle, -1)
            seen[vehicle] = crnt.entries[vehicle].last_update


class TestPurgeStale:
    """Dropping rows older than the staleness horizon"""

    def test_old_row_removed(self):
        crnt = Crnt(owner=1, entries={2: make_entry(2, last_update=400)}, reporters={2: 2})
        purge_stale(crnt, now=1500, horizon_ms=1000)
        assert 2 not in crnt
        assert crnt.reporters == {}
        assert crnt.last_refresh == 1500

    def test_recent_row_kept(self):
        crnt = Crnt(owner=1, entries={2: make_entry(2, last_update=900)})
        purge_stale(crnt, now=1500, horizon_ms=1000)
        assert 2 in crnt

    def test_boundary_age_kept(self):
        crnt = Crnt(owner=1, entries={2: make_entry(2, last_update=500)})
        purge_stale(crnt, now=1500, horizon_ms=1000)
        assert 2 in crnt

    def test_empty_crnt(self):
        assert len(purge_stale(Crnt(owner=1), now=1500)) == 0

    def test_horizon_must_be_positive(self):
        with pytest.raises(ValueError):
            purge_stale(Crnt(owner=1), now=1500, horizon_ms=0)
