"""Task frames, task-parameterized mixtures, and frame merging."""

import numpy as np
import pytest

from hbm.gmm import GaussianComponent, Gmm, fit_em, gmr_condition
from hbm.lti import DemonstrationSet, Trajectory
from hbm.quadrotor import quadrotor_system
from hbm.tp import (
    TaskFrame,
    TpGmm,
    VariabilityModel,
    extract_variability,
    fit_tp_gmm,
    merge_frames,
    transform_to_frame,
    variability_distribution,
)


class TestTaskFrame:
    def test_block_diagonal_enforced(self):
        T = np.eye(3)
        T[0, 2] = 1.0  # state/input coupling is not allowed
        with pytest.raises(ValueError, match="off-diagonal"):
            TaskFrame(T=T, b=np.zeros(3), split=2)

    def test_near_singular_rejected(self):
        T = np.diag([1.0, 1e-12, 1.0])
        with pytest.raises(ValueError, match="near-singular"):
            TaskFrame(T=T, b=np.zeros(3), split=2)

    def test_from_blocks_and_identity(self):
        fr = TaskFrame.from_blocks(np.eye(2) * 2, np.eye(1), [1.0, 2.0], [0.0])
        assert fr.split == 2
        np.testing.assert_allclose(fr.T, np.diag([2.0, 2.0, 1.0]))
        ident = TaskFrame.identity(2, 1)
        np.testing.assert_allclose(ident.T, np.eye(3))

    def test_json_round_trip(self):
        fr = TaskFrame.from_blocks(np.eye(2) * 0.5, np.eye(1), [1.0, -1.0], [0.5])
        back = TaskFrame.from_json_dict(fr.to_json_dict())
        np.testing.assert_allclose(back.T, fr.T)
        np.testing.assert_allclose(back.b, fr.b)
        assert back.split == fr.split


def test_transform_round_trip():
    fr = TaskFrame.from_blocks(
        np.array([[0.0, -1.0], [1.0, 0.0]]), np.eye(1) * 2, [1.0, 2.0], [0.0]
    )
    xi = np.array([[0.3, -0.7, 0.1], [1.0, 2.0, 3.0]])
    z = transform_to_frame(xi, fr)
    back = z @ fr.T.T + fr.b
    np.testing.assert_allclose(back, xi, atol=1e-12)


def test_extract_variability_residuals():
    sys = quadrotor_system()
    K = np.zeros((2, 6))
    K[0, 0] = 1.0
    states = np.arange(18.0).reshape(3, 6)
    inputs = np.array([[1.0, 0.5], [2.0, -0.5]])
    t = Trajectory(states=states, inputs=inputs, dt=0.05)
    demos = DemonstrationSet(trajectories=(t,), system=sys)
    (w,) = extract_variability(demos, K)
    # w_k = u_k - K x_k uses the state at the same step, not the successor
    np.testing.assert_allclose(w, inputs - states[:-1] @ K.T)


def _synthetic_tp_dataset(seed=0, n_demos=8, N=60):
    """1-D state ramps with a state-dependent variability, one frame per demo
    anchored at the demo's start."""
    rng = np.random.default_rng(seed)
    xi_data, frames = [], []
    for _ in range(n_demos):
        x0 = rng.uniform(-1, 1)
        x = np.linspace(x0, x0 + 1.0, N)
        w = 0.5 * (x - x0) + rng.normal(scale=0.01, size=N)
        xi_data.append(np.column_stack([x, w]))
        frames.append([TaskFrame.from_blocks(np.eye(1), np.eye(1), [x0], [0.0])])
    return xi_data, frames


class TestFitTpGmm:
    def test_single_frame_reduces_to_plain_gmm(self):
        # identity frames: the TP fit must coincide with an ordinary EM fit
        rng = np.random.default_rng(1)
        data = np.vstack(
            [
                rng.normal(size=(100, 2)) * 0.2,
                rng.normal(size=(100, 2)) * 0.2 + 3.0,
            ]
        )
        xi_data = [data]
        frames = [[TaskFrame.identity(1, 1)]]
        tpgmm, _ = fit_tp_gmm(xi_data, frames, 2, seed=0)
        plain, _ = fit_em(data, 2, seed=0)
        merged = merge_frames(tpgmm, frames[0])
        order_tp = np.argsort([c.mean[0] for c in merged.components])
        order_pl = np.argsort([c.mean[0] for c in plain.components])
        for a, b in zip(order_tp, order_pl):
            np.testing.assert_allclose(
                merged.components[a].mean, plain.components[b].mean, atol=1e-8
            )
            np.testing.assert_allclose(
                merged.components[a].cov, plain.components[b].cov, atol=1e-8
            )

    def test_frame_count_mismatch(self):
        xi_data, frames = _synthetic_tp_dataset()
        with pytest.raises(ValueError, match="frame list per demonstration"):
            fit_tp_gmm(xi_data, frames[:-1], 2)

    def test_modes(self):
        xi_data, frames = _synthetic_tp_dataset()
        joint, _ = fit_tp_gmm(xi_data, frames, 3, seed=0, mode="joint")
        per, _ = fit_tp_gmm(xi_data, frames, 3, seed=0, mode="per_frame")
        assert joint.n_components == per.n_components == 3
        with pytest.raises(ValueError, match="unknown mode"):
            fit_tp_gmm(xi_data, frames, 3, mode="bogus")


class TestMergeFrames:
    def test_two_frame_precision_weighted_hand_case(self):
        # 1-D joint (dim 2), one component, two identity frames with offsets.
        # Product of N(b1 + mu1, S1) and N(b2 + mu2, S2):
        #   cov = (S1^-1 + S2^-1)^-1, mean = cov (S1^-1 m1 + S2^-1 m2)
        means = np.array([[[1.0, 0.0]], [[2.0, 0.0]]])
        covs = np.array([[np.diag([1.0, 1.0])], [np.diag([4.0, 1.0])]])
        tpgmm = TpGmm(weights=np.array([1.0]), means=means, covs=covs)
        f1 = TaskFrame.from_blocks(np.eye(1), np.eye(1), [0.5], [0.0])
        f2 = TaskFrame.from_blocks(np.eye(1), np.eye(1), [-0.5], [0.0])
        merged = merge_frames(tpgmm, [f1, f2])
        m1, m2 = 1.0 + 0.5, 2.0 - 0.5
        var = 1.0 / (1.0 / 1.0 + 1.0 / 4.0)
        mean = var * (m1 / 1.0 + m2 / 4.0)
        assert merged.components[0].cov[0, 0] == pytest.approx(var, abs=1e-10)
        assert merged.components[0].mean[0] == pytest.approx(mean, abs=1e-10)

    def test_single_frame_direct_transform(self):
        means = np.array([[[1.0, 2.0]]])
        covs = np.array([[np.diag([1.0, 4.0])]])
        tpgmm = TpGmm(weights=np.array([1.0]), means=means, covs=covs)
        fr = TaskFrame.from_blocks(np.eye(1) * 3, np.eye(1) * 2, [1.0], [0.0])
        merged = merge_frames(tpgmm, [fr])
        np.testing.assert_allclose(merged.components[0].mean, [3 * 1 + 1, 2 * 2])
        np.testing.assert_allclose(merged.components[0].cov, np.diag([9.0, 16.0]))

    def test_frame_count_checked(self):
        tpgmm = TpGmm(
            weights=np.array([1.0]),
            means=np.zeros((1, 1, 2)),
            covs=np.tile(np.eye(2), (1, 1, 1, 1)),
        )
        with pytest.raises(ValueError, match="expected 1 frames"):
            merge_frames(tpgmm, [TaskFrame.identity(1, 1)] * 2)


class TestVariabilityModel:
    def _model(self):
        mean = np.array([0.0, 1.0])
        cov = np.array([[1.0, 0.5], [0.5, 2.0]])
        gmm = Gmm(weights=np.array([1.0]), components=(GaussianComponent(mean, cov),))
        return VariabilityModel(gmm=gmm, input_dims=[0], output_dims=[1])

    def test_condition_matches_gmr(self):
        vm = self._model()
        for xq in (-1.0, 0.0, 2.5):
            w1, c1, f1 = vm.condition([xq])
            w2, c2, f2 = gmr_condition(vm.gmm, [0], [1], [xq])
            np.testing.assert_allclose(w1, w2, atol=1e-12)
            np.testing.assert_allclose(c1[0].mean, c2[0].mean, atol=1e-12)
            np.testing.assert_allclose(c1[0].cov, c2[0].cov, atol=1e-12)
            assert f1 == f2

    def test_distribution_helper(self):
        vm = self._model()
        dist = variability_distribution(vm, [1.0])
        # analytic conditional of the single Gaussian
        assert dist.mean[0] == pytest.approx(1.0 + 0.5 / 1.0 * (1.0 - 0.0))
        assert dist.cov[0, 0] == pytest.approx(2.0 - 0.5**2 / 1.0)

    def test_json_round_trip(self):
        vm = self._model()
        back = VariabilityModel.from_json_dict(vm.to_json_dict())
        w1, c1, _ = back.condition([0.7])
        w2, c2, _ = vm.condition([0.7])
        np.testing.assert_allclose(w1, w2)
        np.testing.assert_allclose(c1[0].mean, c2[0].mean)


def test_tp_pipeline_learns_state_dependence():
    """The fitted TP model must track the frame-relative variability ramp."""
    xi_data, frames = _synthetic_tp_dataset(seed=3, n_demos=10, N=80)
    tpgmm, _ = fit_tp_gmm(xi_data, frames, 4, seed=0)
    # evaluate in a new situation starting at x0 = 0.2
    new_frame = TaskFrame.from_blocks(np.eye(1), np.eye(1), [0.2], [0.0])
    merged = merge_frames(tpgmm, [new_frame])
    vm = VariabilityModel(gmm=merged, input_dims=[0], output_dims=[1])
    for rel in (0.2, 0.5, 0.8):
        dist = variability_distribution(vm, [0.2 + rel])
        assert dist.mean[0] == pytest.approx(0.5 * rel, abs=0.05)
