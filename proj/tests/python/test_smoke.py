# Copyright 2026 The tpmove Authors
# SPDX-License-Identifier: Apache-2.0

import os
from pathlib import Path

import numpy as np
import pytest

import tpmove

CONFIGS = Path(os.environ.get("TPMOVE_SOURCE_DIR", Path(__file__).resolve().parents[2])) / "configs"


def test_gaussian_product_matches_precision_sum():
    rng = np.random.default_rng(0)
    means, covs = [], []
    for _ in range(3):
        a = rng.normal(size=(3, 3))
        covs.append(a @ a.T + 0.5 * np.eye(3))
        means.append(rng.normal(size=3))
    mean, cov = tpmove.gaussian_product(means, covs)
    precisions = [np.linalg.inv(c) for c in covs]
    expected_cov = np.linalg.inv(sum(precisions))
    expected_mean = expected_cov @ sum(p @ m for p, m in zip(precisions, means))
    np.testing.assert_allclose(cov, expected_cov, atol=1e-12)
    np.testing.assert_allclose(mean, expected_mean, atol=1e-12)

    same, _ = tpmove.gaussian_product(means, covs, [1.0, 1.0, 1.0])
    np.testing.assert_allclose(same, mean, atol=1e-12)


def test_em_fit_is_monotone():
    rng = np.random.default_rng(1)
    data = np.vstack([rng.normal(-3, 0.5, size=(100, 2)), rng.normal(3, 0.5, size=(100, 2))])
    fit = tpmove.em_fit(data, 2, seed=3)
    assert np.all(np.diff(fit["log_likelihood"]) >= -1e-9)
    assert fit["weights"].sum() == pytest.approx(1.0)
    centers = sorted(m[0] for m in fit["means"])
    assert centers[0] == pytest.approx(-3, abs=0.3) and centers[1] == pytest.approx(3, abs=0.3)


def test_errors_carry_their_code():
    with pytest.raises(tpmove.Error) as err:
        tpmove.em_fit(np.zeros((2, 2)), 5)
    assert err.value.args[1] == "KTooLarge"


def test_pi2_weights():
    w = tpmove.pi2_weights([0.0, 1.0], 1.0)
    assert w[0] == pytest.approx(1 / (1 + np.exp(-1)))


def test_kinematics():
    q = tpmove.home_posture()
    p = tpmove.forward_kinematics(q)
    J = tpmove.jacobian(q)
    assert p.shape == (3,) and J.shape == (3, 4)
    h = 1e-6
    for k in range(4):
        dq = np.zeros(4)
        dq[k] = h
        fd = (tpmove.forward_kinematics(q + dq) - tpmove.forward_kinematics(q - dq)) / (2 * h)
        np.testing.assert_allclose(J[:, k], fd, atol=1e-6)
    joints = tpmove.track(q, np.tile(p, (5, 1)))
    np.testing.assert_allclose(joints, np.tile(q, (5, 1)), atol=1e-12)


def test_experiment_roundtrip():
    exp = tpmove.Experiment(str(CONFIGS / "reach_point.json"), variant="target_b", seed=2)
    assert exp.frame_ids == ["frame1", "frame2"]
    assert exp.seed == 2
    demos = exp.demos()
    assert len(demos) == 10 and demos[0].shape == (100, 4)
    assert exp.reproduce().shape == (100, 3)
    res = exp.optimize()
    assert res["parameter_count"] == 6
    assert res["best_cost"] <= res["initial_cost"]
    assert len(res["cost_curve"]["rollouts"]) == 51
    assert res["joints"].shape[1] == 4


def test_bad_config_raises():
    with pytest.raises(tpmove.Error) as err:
        tpmove.Experiment("/nonexistent.json")
    assert err.value.args[1] == "IoError"
