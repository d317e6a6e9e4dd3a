import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beliefnav.belief import DEFAULT_R, GaussianBelief, predict, trace_of
from beliefnav.engine import (
    EXHAUSTED,
    HORIZON,
    BeliefConfig,
    EventLoop,
    HybridState,
    PlanStep,
    PlanTrace,
    PreconditionViolated,
    SearchParams,
    active_processes,
    applicable_actions,
    apply_action,
    initial_state,
    plan,
    read_plan_text,
    replay,
    step_cost,
    tick,
    validate,
)
from beliefnav.pddlplus import AttachmentRegistry, ground, parse_domain, parse_problem
from beliefnav.world import Control, Landmark, Pose

from engine_helpers import (
    brute_force_optimum,
    build,
    make_graph,
    params,
    random_problem,
    successors,
)


def two_wp(length=3.0, **kw):
    g = make_graph([(1.0, 5.0), (1.0 + length, 5.0)], [(1, 2)])
    return (g,) + build(g, **kw)


def at(model, s, wp):
    return bool(s.lits >> model.atom_bit("robot_at", wp) & 1)


# -- SearchParams ----------------------------------------------------------------
@pytest.mark.parametrize("bad", [dict(delta=0), dict(d_factor=0), dict(d_factor=1.5),
                                 dict(horizon=0), dict(weight=0.5)])
def test_search_params_invariants(bad):
    with pytest.raises(ValueError):
        SearchParams(**bad)


def test_delta_trans():
    p = SearchParams(delta=0.5, d_factor=2, horizon=20)
    assert p.delta_trans == 1.0 and p.max_ticks == 40


# -- tick -----------------------------------------------------------------------------
def test_tick_without_processes_only_advances_clock():
    g, model, b = two_wp(charge=0.0)
    p = params()
    s = initial_state(model, b, p)
    assert at(model, s, "wp1")
    assert not active_processes(model, s)
    s2 = tick(s, model, p)
    assert s2.clock == s.clock + 1 and s2.ticks == s.ticks + 1
    assert s2.lits == s.lits and s2.fluents == s.fluents and s2.belief is s.belief


def test_tick_odometry_hand_predict():
    g, model, b = two_wp(length=5.0, d_factor=2)
    p = params(d_factor=2)
    s = initial_state(model, b, p)
    s = apply_action(s, model.find_action("goto_waypoint", "wp1", "wp2"), model, p)
    slot = model.fluent_slot("d", "wp1", "wp2")
    assert s.fluents[slot] == 5.0
    s2 = tick(s, model, p)
    assert s2.fluents[slot] == pytest.approx(5.0 - 1.0 * 2)
    # one predict step of 2 m straight ahead with R scaled by the tick length
    expected = predict(b, Control(0.0, 2.0, 0.0), DEFAULT_R * 1.0)
    assert np.allclose(s2.belief.cov, expected.cov, atol=1e-15)
    assert trace_of(s2.belief) > trace_of(s.belief)
    assert s2.fluents[model.fluent_slot("trace_sigma")] == pytest.approx(trace_of(s2.belief))
    assert "belief_update wp1 wp2" in [e.label for e in s2.fired]
    assert s2.fluents[model.fluent_slot("counter")] == 0


def test_tick_discharge_euler_step():
    g, model, b = two_wp(charge=80.0)
    p = params()
    s = initial_state(model, b, p)
    s2 = tick(s, model, p)
    assert s2.fluents[model.fluent_slot("charge")] == pytest.approx(80 - 0.11 * 21, abs=1e-12)
    assert s2.fluents[model.fluent_slot("charge")] == pytest.approx(77.69)


def test_event_loop_detected():
    d = parse_domain("""(define (domain flip) (:predicates (p) (q))
        (:event e1 :parameters () :precondition (and (p)) :effect (and (not (p)) (q)))
        (:event e2 :parameters () :precondition (and (q)) :effect (and (not (q)) (p))))""")
    pr = parse_problem("(define (problem f) (:domain flip) (:init (p)) (:goal (and)))", d)
    model = ground(d, pr, None, AttachmentRegistry())
    with pytest.raises(EventLoop, match="event loop"):
        initial_state(model, GaussianBelief.certain(Pose(0, 0, 0)), params())


def test_events_fire_in_declaration_order():
    d = parse_domain("""(define (domain ord) (:predicates (p) (a) (b)) (:functions (n))
        (:event first :parameters () :precondition (and (p) (not (a))) :effect (and (a) (assign (n) 1)))
        (:event second :parameters () :precondition (and (p) (not (b))) :effect (and (b) (assign (n) 2))))""")
    pr = parse_problem("(define (problem o) (:domain ord) (:init (p) (= (n) 0)) (:goal (and)))", d)
    model = ground(d, pr, None, AttachmentRegistry())
    s = initial_state(model, GaussianBelief.certain(Pose(0, 0, 0)), params())
    assert [e.name for e in s.fired] == ["first", "second"]
    assert s.fluents[model.fluent_slot("n")] == 2


# -- apply_action ---------------------------------------------------------------------------
def test_goto_sets_distance_and_starts_odometry():
    g, model, b = two_wp(length=3.0)
    p = params()
    s = initial_state(model, b, p)
    s2 = apply_action(s, model.find_action("goto_waypoint", "wp1", "wp2"), model, p)
    assert s2.fluents[model.fluent_slot("d", "wp1", "wp2")] == 3.0
    assert "odometry wp1 wp2" in [o.label for o in active_processes(model, s2)]


def test_unmet_precondition_raises():
    g, model, b = two_wp()
    p = params()
    s = initial_state(model, b, p)
    with pytest.raises(PreconditionViolated):
        apply_action(s, model.find_action("goto_waypoint", "wp2", "wp1"), model, p)


def test_reached_flips_robot_at():
    g, model, b = two_wp(length=3.0, d_factor=2)
    p = params(d_factor=2)
    s = initial_state(model, b, p)
    s = apply_action(s, model.find_action("goto_waypoint", "wp1", "wp2"), model, p)
    s = tick(tick(s, model, p), model, p)
    assert s.fluents[model.fluent_slot("d", "wp1", "wp2")] <= 0
    names = [a.label for a in applicable_actions(model, s)]
    assert names == ["reached wp1 wp2"]
    s2 = apply_action(s, model.find_action("reached", "wp1", "wp2"), model, p)
    assert at(model, s2, "wp2") and not at(model, s2, "wp1")


# -- step_cost ---------------------------------------------------------------------------------
def _state(ticks, odometer, cov):
    return HybridState(0, (), GaussianBelief(Pose(0, 0, 0), cov), ticks, float(ticks), 0.0,
                       odometer, ())


def test_step_cost_stationary_certain():
    assert step_cost(_state(0, 0, np.zeros((3, 3))), _state(1, 0, np.zeros((3, 3))),
                     params()) == 0


def test_step_cost_formula():
    cov = np.diag([0.1, 0.2, 0.1])
    assert step_cost(_state(0, 0, cov), _state(1, 1.0, cov), params(alpha=1, beta=1)) == \
        pytest.approx(1.4)


def test_step_cost_action_has_no_uncertainty_term():
    cov = np.diag([0.1, 0.2, 0.1])
    assert step_cost(_state(3, 0, cov), _state(3, 0, cov), params()) == 0


# -- plan ----------------------------------------------------------------------------------------
def test_start_is_goal():
    g = make_graph([(2.0, 2.0), (5.0, 2.0)], [(1, 2)], start=1, goal=1)
    model, b = build(g)
    res = plan(model, g, params(), b)
    assert res.found and res.steps == () and res.cost == 0


def test_single_edge_plan_matches_brute_force():
    g, model, b = two_wp(length=3.0)
    p = params(d_factor=1)
    res = plan(model, g, p, b)
    assert [s.label for s in res.steps] == ["goto_waypoint wp1 wp2", "reached wp1 wp2"]
    assert res.steps[0].tick == 0 and res.steps[1].tick == 3
    assert res.cost == pytest.approx(brute_force_optimum(model, b, p), abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_weighted_one_is_optimal(seed):
    g, lms = random_problem(np.random.default_rng(100 + seed))
    model, b = build(g, lms, d_factor=1)
    p = params()
    res = plan(model, g, p, b)
    opt = brute_force_optimum(model, b, p)
    if math.isinf(opt):
        assert not res.found
    else:
        assert res.cost == pytest.approx(opt, abs=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_beta_zero_is_shortest_path(seed):
    g, lms = random_problem(np.random.default_rng(200 + seed))
    model, b = build(g, lms, d_factor=1)
    res = plan(model, g, params(beta=0.0, horizon=100.0), b)
    G = nx.Graph()
    G.add_weighted_edges_from((i, j, w) for (i, j), w in g.edges.items())
    assert res.cost == pytest.approx(nx.dijkstra_path_length(G, g.start_id, g.goal_id),
                                     abs=1e-9)


def test_horizon_reason():
    g, model, b = two_wp(length=8.0)
    res = plan(model, g, params(d_factor=1, horizon=3.0), b)
    assert not res.found and res.reason == HORIZON


def test_expansion_bound_reason():
    g, model, b = two_wp(length=8.0)
    res = plan(model, g, params(d_factor=1, max_expansions=2), b)
    assert not res.found and res.reason == EXHAUSTED
    assert res.stats.expansions == 2


def test_unreachable_goal_exhausted():
    g = make_graph([(1, 1), (3, 1), (6, 6)], [(1, 2)])
    model, b = build(g)
    res = plan(model, g, params(), b)
    assert not res.found and res.reason == EXHAUSTED


def test_trace_bound_can_make_infeasible():
    g, model, b = two_wp(length=3.0)
    assert plan(model, g, params(eta=1.0), b).found
    assert not plan(model, g, params(eta=0.2), b).found


def test_dfactor_mismatch_rejected():
    g, model, b = two_wp(d_factor=2)
    with pytest.raises(ValueError, match="dfactor"):
        plan(model, g, params(d_factor=1), b)


def test_plan_deterministic():
    g, lms = random_problem(np.random.default_rng(7))
    model, b = build(g, lms)
    a = plan(model, g, params(weight=1.5), b)
    c = plan(model, g, params(weight=1.5), b)
    assert a.steps == c.steps and a.cost == c.cost
    assert a.stats.expansions == c.stats.expansions


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_monotone_g_along_expansions(seed):
    g, lms = random_problem(np.random.default_rng(seed))
    model, b = build(g, lms, d_factor=1)
    p = params()
    frontier = [(initial_state(model, b, p), 0.0)]
    for _ in range(40):
        if not frontier:
            break
        s, gval = frontier.pop(0)
        for s2 in successors(model, s, p):
            c = step_cost(s, s2, p)
            assert c >= 0
            frontier.append((s2, gval + c))


def test_sampled_observation_mode_deterministic():
    g = make_graph([(1.0, 5.0), (4.0, 5.0)], [(1, 2)])
    lm = [Landmark(1, (2.5, 6.0))]
    cfg = BeliefConfig(observation_mode="sampled", seed=3)
    runs = []
    for _ in range(2):
        model, b = build(g, lm, cfg=cfg)
        runs.append(plan(model, g, params(d_factor=1), b))
    assert runs[0].final.belief.mean == runs[1].final.belief.mean


def test_landmark_reduces_trace():
    g = make_graph([(1.0, 5.0), (4.0, 5.0)], [(1, 2)])
    p = params(d_factor=1)
    blind = plan(*build(g)[:1], g, p, build(g)[1])
    model, b = build(g, [Landmark(1, (2.5, 6.0))])
    seen = plan(model, g, p, b)
    assert trace_of(seen.final.belief) < trace_of(blind.final.belief)


# -- validation ----------------------------------------------------------------------------------
def test_empty_plan_at_goal_valid():
    g = make_graph([(2.0, 2.0), (5.0, 2.0)], [(1, 2)], start=1, goal=1)
    model, b = build(g)
    rep = validate(model, (), params(), b, 10)
    assert rep.valid and rep.violations == []


def test_fine_plan_validates():
    g, lms = random_problem(np.random.default_rng(3))
    model, b = build(g, lms, d_factor=1)
    p = params(delta=0.5, horizon=20.0)
    res = plan(model, g, p, b)
    assert res.found
    rep = validate(model, res.steps, p, b, 10)
    assert rep.valid, rep.violations
    assert rep.max_trace_divergence >= 0


def test_refinement_must_exceed_one():
    g, model, b = two_wp()
    with pytest.raises(ValueError):
        validate(model, (), params(), b, 1)


def battery_fixture():
    # 4.5 m at 1 m/s from 50 % charge: the exact battery_down time is ln(91/51)/0.11 = 5.26 s
    g = make_graph([(1.0, 5.0), (5.5, 5.0)], [(1, 2)])
    model, b = build(g, d_factor=1, charge=50.0)
    return g, model, b


def test_coarse_plan_skips_battery_event():
    g, model, b = battery_fixture()
    coarse = params(delta=3.0, horizon=20.0)
    res = plan(model, g, coarse, b)
    assert res.found
    assert [(s.tick, s.label) for s in res.steps] == [(0, "goto_waypoint wp1 wp2"),
                                                      (2, "reached wp1 wp2")]
    rep = validate(model, res.steps, coarse, b, 10)
    assert not rep.valid
    assert rep.violated_events == ["battery_status"]
    assert any("battery_status" in v for v in rep.violations)
    assert "goal not satisfied at the fine resolution" in rep.violations

    fine = params(delta=0.5, horizon=20.0)
    res = plan(model, g, fine, b)
    assert res.found
    assert validate(model, res.steps, fine, b, 10).valid


def test_fluent_bound_violation_reported():
    g, model, b = battery_fixture()
    p = params(delta=3.0, horizon=20.0)
    steps = plan(model, g, p, b).steps
    rep = validate(model, steps, p, b, 10, bounds={"charge": 40.0})
    assert any("(charge)" in v for v in rep.violations)


def test_replay_rejects_bad_step():
    g, model, b = two_wp()
    rp = replay(model, (PlanStep(0, "reached", ("wp1", "wp2")),), params(), b)
    assert rp.failures and "precondition" in rp.failures[0]


def test_replay_cost_matches_search():
    g, lms = random_problem(np.random.default_rng(11))
    model, b = build(g, lms, d_factor=1)
    p = params(horizon=30.0)
    res = plan(model, g, p, b)
    rp = replay(model, res.steps, p, b)
    assert rp.cost == pytest.approx(res.cost, abs=1e-9)
    costs = [r.cost for r in rp.records]
    assert costs == sorted(costs)


# -- plan trace text ---------------------------------------------------------------------------------
def test_plan_text_round_trip():
    g, model, b = two_wp()
    p = params()
    res = plan(model, g, p, b)
    tr = PlanTrace.from_search(res, model, p, b)
    text = tr.to_text("abc")
    pf = read_plan_text(text)
    assert pf.steps == res.steps and pf.delta == p.delta and pf.config_hash == "abc"
    assert "planning_time" not in text
    assert "planning_time_s" in tr.to_text("abc", timing=True)
    csv = tr.ticks_csv("abc").splitlines()
    assert csv[0] == "# config_hash abc"
    assert csv[1] == "clock,x,y,theta,trace,charge,events,action"
    clocks = [float(r.split(",")[0]) for r in csv[2:]]
    assert clocks == sorted(clocks)


def test_read_plan_rejects_garbage():
    with pytest.raises(ValueError):
        read_plan_text("hello\n")
