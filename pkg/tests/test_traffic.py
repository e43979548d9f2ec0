import math

import numpy as np
import pytest

from ierdrive.config import EnvConfig
from ierdrive.geometry import PolylinePath, conflict_regions
from ierdrive.scenarios import EgoRoute, FlowSpec, LeaderSpec, ScenarioSpec
from ierdrive.traffic import (
    COLLISION,
    NEAR_COLLISION,
    NONE,
    SUCCESS,
    VehicleState,
    WorldState,
    advance_traffic,
    detect_outcome,
    ego_kinematics,
    footprint,
    rectangles_overlap,
    spawn_step,
    step_probability,
)


def crossing_scene(leader=False):
    paths = {
        "ego": PolylinePath([(0, 0), (300, 0)]),
        "n": PolylinePath([(150, 150), (150, -150)]),
    }
    flows = [FlowSpec("n")]
    lead = LeaderSpec("ego", 40.0, (8.33,)) if leader else None
    return ScenarioSpec("t", paths, EgoRoute("ego", 20.0, 200.0), flows, lead)


# -- spawning ------------------------------------------------------------------


def test_step_probability_closed_form():
    assert step_probability(0.10, 0.4) == pytest.approx(1 - 0.9**0.4)
    assert step_probability(0.10, 0.4) == pytest.approx(0.04127, abs=1e-5)
    assert step_probability(0.05, 0.4) == pytest.approx(0.02030, abs=1e-5)


def test_zero_probability_never_spawns():
    rng = np.random.default_rng(0)
    flow = FlowSpec("n", p_initial=0.0, p_reduced=0.0)
    assert all(spawn_step(flow, 0.0, 0.4, rng) is None for _ in range(2000))


def test_spawn_rate_within_three_sigma():
    rng = np.random.default_rng(1)
    flow = FlowSpec("n")
    n = 100_000
    hits = sum(spawn_step(flow, 0.0, 0.4, rng) is not None for _ in range(n))
    p = step_probability(0.10, 0.4)
    assert abs(hits - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_reduced_rate_after_reduction_time():
    rng = np.random.default_rng(2)
    flow = FlowSpec("n")
    n = 50_000
    hits = sum(spawn_step(flow, 35.0, 0.4, rng) is not None for _ in range(n))
    p = step_probability(0.05, 0.4)
    assert abs(hits - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_spawned_vehicle_state():
    rng = np.random.default_rng(3)
    flow = FlowSpec("n", p_initial=1.0, speed=12.0)
    veh = spawn_step(flow, 0.0, 0.4, rng)
    assert veh.s_front == 5.0 and veh.v == 12.0 and veh.s_rear == 0.0


def test_spawn_blocked_by_nearby_vehicle():
    rng = np.random.default_rng(4)
    flow = FlowSpec("n", p_initial=1.0)
    close = VehicleState("n", 15.0, 13.89)  # rear at 10 < 5 + 8
    far = VehicleState("n", 20.0, 13.89)
    assert spawn_step(flow, 0.0, 0.4, rng, [close]) is None
    assert spawn_step(flow, 0.0, 0.4, rng, [far]) is not None


def test_spawn_rejects_bad_dt():
    with pytest.raises(ValueError):
        spawn_step(FlowSpec("n"), 0.0, 0.0, np.random.default_rng())


# -- motion --------------------------------------------------------------------


def test_constant_velocity_advance_and_gap():
    sc = crossing_scene()
    a = VehicleState("n", 50.0, 13.89)
    b = VehicleState("n", 30.0, 13.89)
    w = WorldState(sc, VehicleState("ego", 20.0, 10.0), [a, b])
    advance_traffic(w, 0.4)
    assert a.s_front == pytest.approx(50.0 + 5.556)
    assert a.s_front - b.s_front == pytest.approx(20.0)
    assert a.v == 13.89


def test_despawn_past_end():
    sc = crossing_scene()
    end = sc.paths["n"].length + 5.0
    w = WorldState(sc, VehicleState("ego", 20.0, 10.0), [VehicleState("n", end - 1e-3, 13.89)])
    advance_traffic(w, 0.4)
    assert w.traffic == []


def test_traffic_ignores_ego():
    sc = crossing_scene()
    w1 = WorldState(sc, VehicleState("ego", 20.0, 10.0), [VehicleState("n", 140.0, 13.89)])
    w2 = WorldState(sc, VehicleState("ego", 150.0, 0.0), [VehicleState("n", 140.0, 13.89)])
    for _ in range(10):
        advance_traffic(w1, 0.4)
        advance_traffic(w2, 0.4)
    assert w1.traffic[0].s_front == w2.traffic[0].s_front


@pytest.mark.parametrize(
    "v, a, v_want, ds_want",
    [(10.0, 3.0, 11.2, 4.24), (0.8, -3.0, 0.0, 0.8**2 / 6), (0.0, -3.0, 0.0, 0.0), (19.0, 3.0, 19.44, None)],
)
def test_ego_kinematics(v, a, v_want, ds_want):
    s, v_new = ego_kinematics(0.0, v, a, 0.4, 19.44)
    assert v_new == pytest.approx(v_want)
    if ds_want is not None:
        assert s == pytest.approx(ds_want, abs=1e-4)
    else:
        t_hit = (19.44 - 19.0) / 3.0
        assert s == pytest.approx(19.0 * t_hit + 1.5 * t_hit**2 + 19.44 * (0.4 - t_hit))


def test_ego_speed_stays_bounded():
    rng = np.random.default_rng(5)
    s, v = 0.0, 13.89
    for _ in range(2000):
        s_new, v = ego_kinematics(s, v, float(rng.choice([-3.0, 0.0, 3.0])), 0.4, 19.44)
        assert 0.0 <= v <= 19.44
        assert s_new >= s
        s = s_new


# -- outcome detection ---------------------------------------------------------


def test_rectangles_overlap():
    a = footprint(PolylinePath([(0, 0), (100, 0)]), VehicleState("x", 10.0, 1.0))
    b = footprint(PolylinePath([(0, 0.5), (100, 0.5)]), VehicleState("y", 12.0, 1.0))
    c = footprint(PolylinePath([(0, 5), (100, 5)]), VehicleState("y", 10.0, 1.0))
    assert rectangles_overlap(a, b)
    assert not rectangles_overlap(a, c)


def world_with(sc, ego_front, vehicles):
    return WorldState(sc, VehicleState("ego", ego_front, 10.0), vehicles)


def test_collision_detected():
    sc = crossing_scene()
    # ego front at 152 covers x in [147, 152]; crossing vehicle centered on y=0
    w = world_with(sc, 152.0, [VehicleState("n", 152.5, 13.89)])
    assert detect_outcome(w, sc.conflicts()) == COLLISION


def test_near_collision_inside_region():
    sc = crossing_scene()
    (r,) = sc.conflicts()["n"]
    veh = VehicleState("n", r.u_a - 5.0, 13.89)  # 5 m short of its region
    w = world_with(sc, r.s_a + 1.0, [veh])
    assert detect_outcome(w, sc.conflicts()) == NEAR_COLLISION


def test_clearance_over_ten_meters_is_fine():
    sc = crossing_scene()
    (r,) = sc.conflicts()["n"]
    veh = VehicleState("n", r.u_a - 12.0, 13.89)
    w = world_with(sc, r.s_a + 1.0, [veh])
    assert detect_outcome(w, sc.conflicts()) == NONE


def test_leader_gap_under_one_meter():
    sc = crossing_scene(leader=True)
    w = world_with(sc, 60.0, [VehicleState("ego", 65.5, 8.33, leader=True)])
    assert detect_outcome(w, sc.conflicts()) == NEAR_COLLISION
    w = world_with(sc, 60.0, [VehicleState("ego", 67.0, 8.33, leader=True)])
    assert detect_outcome(w, sc.conflicts()) == NONE


def test_success_and_precedence():
    sc = crossing_scene()
    assert detect_outcome(world_with(sc, 200.0, []), sc.conflicts()) == SUCCESS
    sc2 = crossing_scene(leader=True)
    w = world_with(sc2, 200.0, [VehicleState("ego", 203.0, 8.33, leader=True)])
    assert detect_outcome(w, sc2.conflicts()) == COLLISION
