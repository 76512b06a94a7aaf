import math

import numpy as np
import pytest

from conftest import naive_forces, random_system
from springfit import (
    ConfigError,
    ControlSchedule,
    GlobalPhysicalParams,
    MassSystem,
    MassSystemState,
    SimulationDiverged,
    SpringParams,
    SpringTopology,
    accumulate_forces,
    collision_impulse,
    dashpot_force,
    euler_step,
    rollout,
    skin_points,
    spring_force,
)
from springfit import sim
from springfit.sim import load_trajectory, save_trajectory
from springfit.types import Trajectory


NO_GRAVITY = dict(gravity=[0.0, 0.0, 0.0], ground_height=-1e3)


def state_at_rest(system):
    return MassSystemState(system.canonical_positions.copy(),
                           np.zeros_like(system.canonical_positions))


class TestSpringForce:
    def test_at_rest_length_force_vanishes(self):
        f = spring_force([0, 0, 0], [1, 0, 0], k=5.0, rest_length=1.0)
        assert np.array_equal(f, np.zeros(3))

    def test_stretched(self):
        f = spring_force([0, 0, 0], [2, 0, 0], k=2.0, rest_length=1.0)
        np.testing.assert_allclose(f, [2.0, 0.0, 0.0], rtol=0, atol=0)

    def test_compressed_pushes_away(self):
        f = spring_force([0, 0, 0], [0, 0.5, 0], k=4.0, rest_length=1.0)
        np.testing.assert_allclose(f, [0.0, -2.0, 0.0], rtol=1e-15)

    def test_coincident_endpoints_zero_force_and_counted(self):
        sim.reset_degenerate_spring_count()
        f = spring_force([1, 2, 3], [1, 2, 3], k=10.0, rest_length=1.0)
        assert np.array_equal(f, np.zeros(3))
        assert sim.degenerate_spring_count() == 1


class TestDashpotForce:
    def test_equal_velocities(self):
        f = dashpot_force([3, 1, -2], [3, 1, -2], gamma=10.0)
        assert np.array_equal(f, np.zeros(3))

    def test_relative_motion(self):
        np.testing.assert_allclose(dashpot_force([1, 0, 0], [0, 0, 0], 2.0), [-2, 0, 0])
        np.testing.assert_allclose(dashpot_force([0, 0, 0], [0, 1, 0], 0.5), [0, 0.5, 0])

    def test_negative_gamma_rejected(self):
        with pytest.raises(ConfigError):
            dashpot_force([0, 0, 0], [1, 0, 0], -1.0)


class TestAccumulateForces:
    def test_rest_configuration_zero(self):
        system = MassSystem.uniform([[0, 0, 0], [1, 0, 0]], total_mass=2.0)
        topo = SpringTopology.from_positions([[0, 1]], system.canonical_positions)
        params = SpringParams.homogeneous(1, 10.0, 1.0)
        g = GlobalPhysicalParams(**NO_GRAVITY)
        f = accumulate_forces(state_at_rest(system), system, topo, params, g)
        assert np.array_equal(f, np.zeros((2, 3)))

    def test_internal_forces_cancel(self, rng):
        system, topo, params = random_system(rng, n_points=12, n_edges=25)
        g = GlobalPhysicalParams(gravity=[0.3, -9.8, 0.1], ground_height=-1e3)
        state = MassSystemState(system.canonical_positions.copy(),
                                rng.normal(size=(12, 3)))
        f = accumulate_forces(state, system, topo, params, g)
        expected = (system.masses[:, None] * g.gravity).sum(axis=0)
        np.testing.assert_allclose(f.sum(axis=0), expected, rtol=0, atol=1e-12)

    def test_three_point_chain_matches_oracle(self, rng):
        for _ in range(5):
            pos = rng.uniform(-1, 1, size=(3, 3))
            vel = rng.normal(size=(3, 3))
            system = MassSystem.uniform(pos, total_mass=1.5)
            edges = np.array([[0, 1], [1, 2]])
            topo = SpringTopology.from_positions(edges, pos)
            params = SpringParams(rng.uniform(1, 20, 2), rng.uniform(0, 2, 2))
            g = GlobalPhysicalParams(gravity=[0, -9.8, 0], ground_height=-1e3)
            got = accumulate_forces(MassSystemState(pos, vel), system, topo, params, g)
            want = naive_forces(pos, vel, edges, topo.rest_lengths,
                                params.stiffness, params.dashpot, system.masses, g.gravity)
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)

    def test_randomized_oracle_up_to_50_points(self, rng):
        for trial in range(4):
            n = int(rng.integers(5, 51))
            system, topo, params = random_system(rng, n_points=n, n_edges=min(2 * n, 60))
            g = GlobalPhysicalParams(gravity=[0, -9.8, 0], ground_height=-1e3)
            state = MassSystemState(system.canonical_positions + rng.normal(scale=0.05, size=(n, 3)),
                                    rng.normal(size=(n, 3)))
            got = accumulate_forces(state, system, topo, params, g)
            want = naive_forces(state.positions, state.velocities, topo.edges,
                                topo.rest_lengths, params.stiffness, params.dashpot,
                                system.masses, g.gravity)
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-15)


class TestCollisionImpulse:
    def test_no_contact_above_ground(self):
        g = GlobalPhysicalParams(restitution=0.5, friction=0.2)
        state = MassSystemState([[0, 0.1, 0]], [[3, -5, 1]])
        assert np.array_equal(collision_impulse(state, g), np.zeros((1, 3)))

    def test_normal_reflection(self):
        g = GlobalPhysicalParams(restitution=0.5, friction=0.0)
        state = MassSystemState([[0, -0.01, 0]], [[0, -1, 0]])
        corrected = state.velocities + collision_impulse(state, g)
        np.testing.assert_allclose(corrected, [[0, 0.5, 0]], rtol=1e-12)

    def test_full_tangential_dissipation(self):
        g = GlobalPhysicalParams(restitution=0.0, friction=100.0)
        state = MassSystemState([[0, -0.01, 0]], [[1, -1, 0]])
        corrected = state.velocities + collision_impulse(state, g)
        np.testing.assert_allclose(corrected, [[0, 0, 0]], atol=1e-15)

    def test_moving_up_in_contact_untouched(self):
        g = GlobalPhysicalParams(restitution=0.5, friction=0.2)
        state = MassSystemState([[0, -0.01, 0]], [[1, 2, 0]])
        assert np.array_equal(collision_impulse(state, g), np.zeros((1, 3)))


class TestEulerStep:
    def test_fixed_point(self):
        system = MassSystem.uniform([[0, 0.5, 0]], total_mass=1.0)
        g = GlobalPhysicalParams(drag=1.0, **NO_GRAVITY, dt=0.1)
        state = MassSystemState([[0, 0.5, 0]], [[0, 0, 0]])
        new = euler_step(state, np.zeros((1, 3)), system, g)
        assert np.array_equal(new.positions, state.positions)
        assert np.array_equal(new.velocities, state.velocities)
        assert new.frame_index == 1

    def test_gravity_hand_value(self):
        system = MassSystem.uniform([[0, 10, 0]], total_mass=1.0)
        g = GlobalPhysicalParams(drag=1.0, gravity=[0, -9.8, 0], ground_height=-100, dt=0.1)
        state = MassSystemState([[0, 10, 0]], [[0, 0, 0]])
        new = euler_step(state, np.array([[0.0, -9.8, 0.0]]), system, g)
        np.testing.assert_allclose(new.velocities, [[0, -0.98, 0]], rtol=1e-15)
        np.testing.assert_allclose(new.positions, [[0, 10 - 0.098, 0]], rtol=1e-15)

    def test_drag_hand_value(self):
        system = MassSystem.uniform([[0, 0, 0]], total_mass=1.0)
        g = GlobalPhysicalParams(drag=0.9, **NO_GRAVITY, dt=0.1)
        state = MassSystemState([[0, 0, 0]], [[2, 0, 0]])
        new = euler_step(state, np.zeros((1, 3)), system, g)
        np.testing.assert_allclose(new.velocities, [[1.8, 0, 0]], rtol=1e-15)
        np.testing.assert_allclose(new.positions, [[0.18, 0, 0]], rtol=1e-15)

    def test_prescribed_control(self):
        system = MassSystem.uniform([[0, 0, 0], [1, 0, 0]], control_indices=[0])
        g = GlobalPhysicalParams(drag=1.0, **NO_GRAVITY, dt=0.1)
        state = state_at_rest(system)
        new = euler_step(state, np.zeros((2, 3)), system, g,
                         prescribed={0: np.array([0.05, 0, 0])})
        np.testing.assert_allclose(new.positions[0], [0.05, 0, 0])
        np.testing.assert_allclose(new.velocities[0], [0.5, 0, 0])

    def test_non_positive_dt_rejected(self):
        with pytest.raises(ConfigError):
            GlobalPhysicalParams(dt=0.0)


class TestRollout:
    def test_single_frame_is_initial(self):
        system = MassSystem.uniform([[0, 0, 0], [1, 0, 0]])
        topo = SpringTopology.from_positions([[0, 1]], system.canonical_positions)
        params = SpringParams.homogeneous(1, 10.0, 0.0)
        g = GlobalPhysicalParams(**NO_GRAVITY)
        traj = rollout(state_at_rest(system), system, topo, params, g, None, 1)
        assert len(traj) == 1
        assert np.array_equal(traj[0].positions, system.canonical_positions)

    def test_harmonic_oscillator_period(self):
        # mass on a spring anchored at a fixed control point
        system = MassSystem(np.array([[0.0, 0, 0], [1.1, 0, 0]]),
                            np.array([1.0, 1.0]), np.array([0]))
        topo = SpringTopology(np.array([[0, 1]]), np.array([1.0]))
        params = SpringParams.homogeneous(1, 100.0, 0.0)
        n_frames = 1200
        g = GlobalPhysicalParams(drag=1.0, **NO_GRAVITY, dt=1e-4, substeps_per_frame=10)
        controls = ControlSchedule(np.array([0]), np.zeros((n_frames, 1, 3)))
        traj = rollout(state_at_rest(system), system, topo, params, g, controls, n_frames)
        disp = traj.positions_array()[:, 1, 0] - 1.0
        t = np.arange(n_frames) * g.frame_dt
        crossings = []
        for i in range(len(disp) - 1):
            if disp[i] < 0 <= disp[i + 1]:
                frac = -disp[i] / (disp[i + 1] - disp[i])
                crossings.append(t[i] + frac * g.frame_dt)
        assert len(crossings) >= 2
        period = crossings[1] - crossings[0]
        expected = 2 * math.pi / math.sqrt(100.0)
        assert abs(period - expected) / expected < 0.02

    def test_semigroup_composition(self, rng):
        system, topo, params = random_system(rng, n_points=6, n_edges=9,
                                             control_indices=[0])
        n_frames = 10
        ctrl_pos = system.canonical_positions[0] + np.cumsum(
            rng.normal(scale=0.01, size=(n_frames, 1, 3)), axis=0)
        ctrl_pos[0] = system.canonical_positions[0]
        controls = ControlSchedule(np.array([0]), ctrl_pos)
        g = GlobalPhysicalParams(gravity=[0, -9.8, 0], ground_height=-1e3,
                                 dt=1e-3, substeps_per_frame=8)
        full = rollout(state_at_rest(system), system, topo, params, g, controls, n_frames)
        state = state_at_rest(system)
        for f in range(n_frames - 1):
            step_controls = ControlSchedule(np.array([0]), ctrl_pos[f:f + 2])
            state.frame_index = 0
            two = rollout(state, system, topo, params, g, step_controls, 2)
            state = two[1]
        assert np.array_equal(state.positions, full[-1].positions)
        assert np.array_equal(state.velocities, full[-1].velocities)

    def test_divergence_reports_frame(self):
        # huge stiffness with large dt blows up quickly
        system = MassSystem.uniform([[0, 0, 0], [1.5, 0, 0]])
        topo = SpringTopology(np.array([[0, 1]]), np.array([1.0]))
        params = SpringParams.homogeneous(1, 1e9, 0.0)
        g = GlobalPhysicalParams(**NO_GRAVITY, dt=0.1, substeps_per_frame=32)
        with pytest.raises(SimulationDiverged) as err:
            rollout(state_at_rest(system), system, topo, params, g, None, 30)
        assert err.value.frame_index is not None


class TestSkinPoints:
    def test_query_on_mass_point_tracks_it(self):
        system = MassSystem.uniform([[0, 0, 0], [1, 0, 0], [0, 1, 0]])
        moved = system.canonical_positions + np.array([[0.1, 0, 0], [0, 0.2, 0], [0, 0, 0.3]])
        traj = make_trajectory([system.canonical_positions, moved])
        out = skin_points([[1, 0, 0]], system, traj, k_neighbors=1)
        np.testing.assert_allclose(out[1][0], moved[1], rtol=1e-12)

    def test_rigid_translation(self, rng):
        pos = rng.uniform(-1, 1, size=(8, 3))
        system = MassSystem.uniform(pos)
        shift = np.array([1.0, 2.0, 3.0])
        traj = make_trajectory([pos, pos + shift])
        queries = rng.uniform(-1, 1, size=(5, 3))
        out = skin_points(queries, system, traj, k_neighbors=4)
        np.testing.assert_allclose(out[1], queries + shift, rtol=1e-9)

    def test_midway_average(self):
        pos = np.array([[0.0, 0, 0], [1.0, 0, 0], [10.0, 10, 10]])
        system = MassSystem.uniform(pos)
        d1 = np.array([0.0, 0.2, 0.0])
        d2 = np.array([0.0, 0.0, 0.4])
        traj = make_trajectory([pos, pos + np.stack([d1, d2, np.zeros(3)])])
        out = skin_points([[0.5, 0, 0]], system, traj, k_neighbors=2)
        np.testing.assert_allclose(out[1][0], [0.5, 0.1, 0.2], rtol=1e-7)

    def test_empty_trajectory_rejected(self):
        with pytest.raises(ConfigError):
            Trajectory([])


def make_trajectory(position_list):
    states = [MassSystemState(np.asarray(p, dtype=float), np.zeros((len(p), 3)), i)
              for i, p in enumerate(position_list)]
    return Trajectory(states)


class TestInvariants:
    def test_momentum_conservation(self, rng):
        n = 50
        system, topo, params = random_system(rng, n_points=n, n_edges=90, total_mass=1.0)
        g = GlobalPhysicalParams(drag=1.0, gravity=[0, 0, 0], ground_height=-1e9,
                                 dt=1e-4, substeps_per_frame=100)
        vel = rng.normal(size=(n, 3)) + np.array([1.0, 0.5, -0.25])
        state = MassSystemState(system.canonical_positions.copy(), vel)
        p0 = (system.masses[:, None] * vel).sum(axis=0)
        traj = rollout(state, system, topo, params, g, None, 11)  # 1000 substeps
        pT = (system.masses[:, None] * traj[-1].velocities).sum(axis=0)
        assert np.linalg.norm(pT - p0) / np.linalg.norm(p0) < 1e-10

    def test_rest_fixed_point_bit_exact(self, rng):
        system, topo, params = random_system(rng, n_points=8, n_edges=14)
        g = GlobalPhysicalParams(drag=1.0, **NO_GRAVITY, dt=1e-3, substeps_per_frame=16)
        traj = rollout(state_at_rest(system), system, topo, params, g, None, 20)
        for s in traj.states:
            assert np.array_equal(s.positions, system.canonical_positions)
            assert np.array_equal(s.velocities, np.zeros((8, 3)))

    @pytest.mark.parametrize("drag,dashpot", [(1.0, 0.5), (0.999, 0.0)])
    def test_energy_dissipation(self, rng, drag, dashpot):
        n = 6
        pos = rng.uniform(-0.5, 0.5, size=(n, 3))
        system = MassSystem.uniform(pos, total_mass=float(n))  # unit masses
        edges = np.array([[i, j] for i in range(n) for j in range(i + 1, n)])
        topo = SpringTopology.from_positions(edges, pos)
        k = rng.uniform(5, 10, size=len(edges))
        params = SpringParams(k, np.full(len(edges), dashpot))
        dt = 1e-4 * math.sqrt(1.0 / k.max())  # stated step bound
        g = GlobalPhysicalParams(drag=drag, gravity=[0, 0, 0], ground_height=-1e3,
                                 dt=dt, substeps_per_frame=200)
        state = MassSystemState(pos + rng.normal(scale=0.05, size=(n, 3)),
                                rng.normal(scale=0.5, size=(n, 3)))
        traj = rollout(state, system, topo, params, g, None, 30)

        def energy(s):
            kin = 0.5 * (system.masses[:, None] * s.velocities**2).sum()
            d = s.positions[edges[:, 1]] - s.positions[edges[:, 0]]
            length = np.linalg.norm(d, axis=1)
            pot = 0.5 * (params.stiffness * (length - topo.rest_lengths) ** 2).sum()
            return kin + pot

        energies = [energy(s) for s in traj.states]
        for a, b in zip(energies, energies[1:]):
            assert b <= a + 1e-6

    def test_determinism(self, rng):
        system, topo, params = random_system(rng, n_points=12, n_edges=20)
        g = GlobalPhysicalParams(gravity=[0, -9.8, 0], ground_height=-0.6,
                                 restitution=0.4, friction=0.3,
                                 dt=1e-3, substeps_per_frame=16)
        state = MassSystemState(system.canonical_positions.copy(),
                                rng.normal(scale=0.2, size=(12, 3)))
        t1 = rollout(state.copy(), system, topo, params, g, None, 25)
        t2 = rollout(state.copy(), system, topo, params, g, None, 25)
        assert np.array_equal(t1.positions_array(), t2.positions_array())
        assert all(np.array_equal(a.velocities, b.velocities)
                   for a, b in zip(t1.states, t2.states))


class TestTrajectoryIO:
    def test_round_trip_bit_exact(self, rng, tmp_path):
        system, topo, params = random_system(rng, n_points=5, n_edges=8)
        g = GlobalPhysicalParams(gravity=[0, -9.8, 0], ground_height=-1e3,
                                 dt=1e-3, substeps_per_frame=8)
        traj = rollout(state_at_rest(system), system, topo, params, g, None, 6)
        path = tmp_path / "traj.json"
        save_trajectory(path, traj, g.frame_dt)
        loaded, dt_frame = load_trajectory(path)
        assert dt_frame == g.frame_dt
        assert np.array_equal(loaded.positions_array(), traj.positions_array())

    def test_rewrite_is_byte_identical(self, rng, tmp_path):
        system, topo, params = random_system(rng, n_points=4, n_edges=5)
        g = GlobalPhysicalParams(**NO_GRAVITY, dt=1e-3, substeps_per_frame=4)
        traj = rollout(state_at_rest(system), system, topo, params, g, None, 3)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_trajectory(p1, traj, g.frame_dt)
        save_trajectory(p2, traj, g.frame_dt)
        assert p1.read_bytes() == p2.read_bytes()
