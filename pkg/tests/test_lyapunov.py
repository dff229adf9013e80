import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elax.errors import UsageError
from elax.lyapunov import VorticityFlowField, lyapunov_qr, lyapunov_report, stagnation_analysis

from conftest import flow2d, physical_field


@pytest.fixture(scope="module")
def cellular():
    return flow2d("cellular", 16).omega


def _near(points, target):
    d = np.abs(np.mod(np.asarray(points) - target + np.pi, 2 * np.pi) - np.pi)
    return np.all(d < 1e-9, axis=-1)


class TestFlowField:
    def test_cellular_velocity(self, cellular):
        # omega = cos x + cos y -> (omega_y, -omega_x) = (-sin y, sin x)
        pts = np.array([[0.3, 1.1], [2.0, -0.4], [5.5, 3.3]])
        v = VorticityFlowField(cellular).velocity(pts)
        assert np.allclose(v, np.stack([-np.sin(pts[:, 1]), np.sin(pts[:, 0])], axis=1), atol=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
    def test_jacobian_matches_finite_differences(self, x, y):
        flow = VorticityFlowField(flow2d("random_smooth", 16, seed=3).omega)
        h = 1e-6
        jac = flow.jacobian(np.array([[x, y]]))[0]
        for axis in range(2):
            e = np.zeros(2)
            e[axis] = h
            fd = (flow.velocity(np.array([[x, y]]) + e) - flow.velocity(np.array([[x, y]]) - e))[0] / (2 * h)
            assert np.allclose(jac[:, axis], fd, atol=1e-7)

    def test_flow_is_divergence_free(self):
        flow = VorticityFlowField(flow2d("random_smooth", 16, seed=1).omega)
        jac = flow.jacobian(np.random.default_rng(0).uniform(0, 2 * np.pi, (50, 2)))
        assert np.abs(np.trace(jac, axis1=1, axis2=2)).max() < 1e-13


class TestStagnation:
    def test_cellular_saddles_and_centres(self, cellular):
        rep = stagnation_analysis(cellular)
        assert not rep.unresolved
        saddles = rep.saddles()
        assert len(saddles) == 2
        for target in ([np.pi, 0.0], [0.0, np.pi]):
            (hit,) = [p for p in saddles if _near(p.position, target)]
            assert np.allclose(np.sort(hit.eigenvalues.real), [-1.0, 1.0], atol=1e-12)
            assert hit.exponent == pytest.approx(1.0, abs=1e-12)
        centres = [p for p in rep.stagnation_points if p.kind == "center"]
        assert len(centres) == 2
        for p in centres:
            assert np.allclose(np.sort(p.eigenvalues.imag), [-1.0, 1.0], atol=1e-12)

    def test_constant_vorticity_means_no_flow(self, grid16):
        rep = stagnation_analysis(physical_field(grid16, np.full(grid16.shape, 3.0), real=True))
        assert rep.every_point_stagnant and not rep.stagnation_points

    def test_shear_stagnation_lines_are_degenerate(self):
        rep = stagnation_analysis(flow2d("shear", 16).omega, resolution=16)
        assert rep.stagnation_points
        assert {p.kind for p in rep.stagnation_points} == {"degenerate"}
        ys = np.array([p.position[1] for p in rep.stagnation_points])
        assert np.all(np.minimum(np.abs(ys), np.abs(ys - np.pi)) < 1e-9)


class TestTangentQR:
    def test_pinned_saddle(self, cellular):
        (traj,) = lyapunov_qr(cellular, [np.pi, 0.0], 50.0, dt=0.05)
        assert traj.pinned
        assert np.allclose(traj.exponents, [1.0, -1.0], atol=1e-6)

    def test_transient_removes_alignment_bias(self, cellular):
        # without discarding, the first column starts off the unstable direction
        biased = lyapunov_qr(cellular, [np.pi, 0.0], 10.0, dt=0.05, transient=0.0)[0].exponents[0]
        clean = lyapunov_qr(cellular, [np.pi, 0.0], 10.0, dt=0.05, transient=0.5)[0].exponents[0]
        assert abs(clean - 1.0) < abs(biased - 1.0) / 100

    def test_centre_exponents_decay(self, cellular):
        (traj,) = lyapunov_qr(cellular, [0.0, 0.0], 40.0, dt=1e-2, transient=0.0)
        assert np.abs(traj.exponents).max() < 0.1

    @settings(max_examples=8, deadline=None)
    @given(st.floats(0, 2 * np.pi), st.floats(0, 2 * np.pi))
    def test_exponents_sum_to_zero(self, x, y):
        # area preservation: log det of the tangent map is zero
        (traj,) = lyapunov_qr(flow2d("cellular", 16).omega, [x, y], 5.0, dt=1e-2)
        assert abs(traj.exponents.sum()) < 1e-8

    def test_batched_equals_single(self, cellular):
        starts = np.array([[1.0, 2.0], [0.5, 0.1]])
        batch = lyapunov_qr(cellular, starts, 3.0, dt=1e-2)
        single = lyapunov_qr(cellular, starts[1], 3.0, dt=1e-2)[0]
        assert np.array_equal(batch[1].exponents, single.exponents)

    def test_history_and_slope(self, cellular):
        (traj,) = lyapunov_qr(cellular, [np.pi, 0.0], 50.0, dt=0.05)
        assert traj.history.shape == (90, 3)
        assert traj.history[0, 0] == pytest.approx(5.5)
        assert np.abs(traj.last_decade_slope).max() < 1e-6

    def test_coarse_step_warns(self, cellular):
        (traj,) = lyapunov_qr(cellular, [1.0, 1.0], 1.0, dt=0.5)
        assert any("exceeds" in w for w in traj.warnings)

    @pytest.mark.parametrize("kwargs", [{"horizon": 0.0}, {"horizon": 1.0, "dt": -1.0}, {"horizon": 1.0, "transient": 1.0}])
    def test_bad_arguments(self, cellular, kwargs):
        with pytest.raises(UsageError):
            lyapunov_qr(cellular, [0.0, 0.0], **kwargs)

    def test_report_collects_trajectories(self, cellular):
        rep = lyapunov_report(cellular, [[np.pi, 0.0], [0.0, np.pi]], 50.0, dt=0.05)
        assert len(rep.trajectories) == 2
        assert len(rep.saddles()) == 2
        for traj in rep.trajectories:
            assert traj.exponents[0] == pytest.approx(1.0, abs=1e-6)
