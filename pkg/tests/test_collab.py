from types import SimpleNamespace

import numpy as np
import pytest

from cdmaharq import collab
from cdmaharq.collab import (CollabAction, LinkState, Neighborhood, OverhearBuffer, engage, on_impairment,
                             overhear_store, select_collaborators)
from cdmaharq.harq import crc32
from cdmaharq.optimizer import OptimizationScenario
from cdmaharq.rs import CodeSpec

UNIT = {1: 1}  # bound equals B


def test_rank_zero_bound_first():
    states = [LinkState(1, 0.5, UNIT), LinkState(2, 0.0, UNIT), LinkState(3, 0.5, UNIT)]
    assert select_collaborators(states)[0] == 2


def test_rank_ties_by_id():
    states = [LinkState(n, 0.4, UNIT) for n in (3, 1, 2)]
    assert select_collaborators(states) == [1, 2, 3]


def test_rank_by_bound():
    states = [LinkState(1, 0.3, UNIT), LinkState(2, 0.1, UNIT), LinkState(3, 0.2, UNIT)]
    assert select_collaborators(states) == [2, 3, 1]


def _stub(rates):
    return lambda sc: SimpleNamespace(rates=np.array(rates, dtype=float))


SC = OptimizationScenario([1e-3, 1e-3, 1e-3], 1e-9, 15e3, codes=(CodeSpec(7, 3),))


def test_take_over_by_best_rate():
    nb = Neighborhood(0, ("A", "B", "C"), 0.3, "S", q=1.0)
    d = on_impairment(nb, "A", SC, ["A", "B", "C"], 0.1, solver=_stub([0.0, 0.5, 0.8]))
    assert (d.action, d.collaborator) == (CollabAction.TAKE_OVER, "C")


def test_update_collaborator_set():
    nb = Neighborhood(0, ("A", "B", "C", "D"), 0.3, "S")
    sc = OptimizationScenario([1e-3] * 4, 1e-9, 15e3)
    d = on_impairment(nb, "A", sc, ["A", "B", "C", "D"], 0.5, solver=_stub([0.0, 0.4, 0.3, 0.3]))
    assert (d.action, d.collaborator) == (CollabAction.UPDATE_COLLABORATOR_SET, "C")


def test_drop_when_nobody_helps():
    nb = Neighborhood(0, ("A", "B", "C"), 0.3, "S")
    d = on_impairment(nb, "A", SC, ["A", "B", "C"], 1.0, solver=_stub([0.0, 0.3, 0.2]))
    assert d.action is CollabAction.DROP and d.collaborator is None


def test_eligibility_restricts_pool():
    nb = Neighborhood(0, ("A", "B", "C"), 0.3, "S")
    d = on_impairment(nb, "A", SC, ["A", "B", "C"], 0.1, eligible=["B"], solver=_stub([0.0, 0.5, 0.8]))
    assert d.collaborator == "B"
    d = on_impairment(nb, "A", SC, ["A", "B", "C"], 0.1, eligible=[], solver=_stub([0.0, 0.5, 0.8]))
    assert d.action is CollabAction.DROP


def test_real_solver_switches_impaired_off():
    sc = OptimizationScenario([1e-9, 1e-3], 1e-9, 15e3, gamma_min_db=10)
    d = on_impairment(Neighborhood(0, ("A", "B"), 0.3, "S", q=1.0), "A", sc, ["A", "B"], 0.0)
    assert d.action is CollabAction.TAKE_OVER
    assert d.solution.alphas.tolist() == [0, 1]


def test_overhear_buffer_fifo():
    buf = OverhearBuffer(capacity=2)
    for sid in ("a", "b", "c"):
        buf.put(sid, [1, 2, 3])
    assert buf.keys() == ["b", "c"]
    assert "a" not in buf and len(buf) == 2


def test_overhear_store_checks_crc():
    buf = OverhearBuffer()
    data = np.array([1, 2, 3])
    assert overhear_store(buf, "s", data, crc32(data))
    np.testing.assert_array_equal(buf.get("s"), data)
    assert not overhear_store(buf, "t", data, crc32(data) ^ 1)
    assert not overhear_store(buf, "u", None, 0)


def test_engage():
    assert engage(1.0, 0.999)
    assert not engage(0.0, 0.0)
    assert engage(0.5, 0.4) and not engage(0.5, 0.6)


def test_neighborhood_validation():
    with pytest.raises(ValueError):
        Neighborhood(0, ("A", "A"), 0.3, "S")
    with pytest.raises(ValueError):
        Neighborhood(0, ("A",), 0.3, "S", q=1.5)
    with pytest.raises(ValueError):
        Neighborhood(0, ("A",), 0.3, "S", candidates=("Z",))


def test_link_state_from_snr():
    st = collab.link_state_from_snr("A", 0.0, UNIT)
    assert st.B == pytest.approx(1.0)
    assert collab.link_state_from_snr("A", 100.0, UNIT).bound < 1e-5
