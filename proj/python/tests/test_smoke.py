import json
import math

import numpy as np
import pytest

import nmd

FIG45 = nmd.Potential(nmd.TwoDCone(a=[0.0, 0.0], eta=0.0))


def shell_momentum(potential, E, X, angle):
    p = math.sqrt(2.0 * (E - potential.lambda_minus(X)))
    return [p * math.cos(angle), p * math.sin(angle)]


def test_potential_matrix_eigenvalues():
    pot = nmd.Potential(nmd.TwoDLine(delta=0.3))
    X = [0.4, -0.7]
    w = np.linalg.eigvalsh(pot.matrix(X))
    assert w[0] == pytest.approx(pot.lambda_minus(X), rel=1e-13)
    assert w[1] == pytest.approx(pot.lambda_plus(X), rel=1e-13)


def test_conical_point_raises():
    cone = nmd.Potential(nmd.TwoDCone(a=[1.0, 0.5]))
    with pytest.raises(ValueError):
        cone.grad_lambda_minus([1.0, 0.5])


def test_harmonic_like_spectrum_residuals():
    pot = nmd.Potential(nmd.TwoDCone(a=[1.5, 0.0]))
    grid = nmd.build_grid(pot, 30.0)
    pairs = nmd.eigs_near(pot, grid, 30.0, 1.5, 6)
    assert len(pairs) == 6
    for p in pairs:
        assert p.residual_norm <= 1e-8
        assert 0.0 <= nmd.excited_probability(p, pot, grid) <= 1.0
        assert np.sum(p.Phi**2) * grid.h**2 == pytest.approx(1.0, abs=1e-10)


def test_bo_trajectory_conserves_energy():
    X0 = [0.0, 0.0]
    traj = nmd.bo_trajectory(FIG45, X0, shell_momentum(FIG45, 1.5, X0, 1.2), 0.01, 10.0)
    assert traj["X"].shape == (1001, 2)
    assert np.max(np.abs(traj["H"] - 1.5)) < 1e-3


def test_landau_zener_matches_closed_form():
    ode = nmd.landau_zener_ode(1.0, 1.0, 1.0, 200.0)
    assert ode == pytest.approx(nmd.landau_zener_closed_form(1.0, 1.0, 1.0), rel=0.02)


def test_monte_carlo_constant_observable():
    value, err = nmd.gmd_monte_carlo(FIG45, "one", 1.5, 100_000, seed=3)
    assert value == 1.0 and err == 0.0


def test_config_validation_and_run(tmp_path):
    text = """
kind = "landau-zener"
M = 4.0
[potential]
delta = 0.3
"""
    canonical = nmd.validate_config(text)
    assert "kind = 'landau-zener'" in canonical
    with pytest.raises(ValueError):
        nmd.validate_config('kind = "landau-zener"\nmystery = 1\n')

    cfg = tmp_path / "lz.toml"
    cfg.write_text(text)
    summary = nmd.run_config(cfg, tmp_path / "out")
    assert summary["adiabatic_excited"] == pytest.approx(summary["closed_form"], rel=0.02)
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert {f["name"] for f in manifest["files"]} >= {"landau_zener.csv", "config.toml"}
