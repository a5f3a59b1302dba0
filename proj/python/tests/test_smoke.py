import json
import math

import numpy as np
import pytest

import spinqsd

MINIMAL = {
    "two_j": 1,
    "beta": None,
    "model": {
        "H_S": [[0, 0.5], [0.5, 0]],
        "L": {"x": [[1, 0], [0, -1]]},
        "psi0": [1, 0],
    },
    "observables": {"sz": [[1, 0], [0, -1]]},
    "bath": {"explicit": {"g": [0.3, 0.2], "omega": [1.0, 2.0]}},
    "run": {"engine": "hierarchy", "M": 50, "K": 2, "dt": 0.01, "t_max": 2.0, "n_outputs": 21, "seed": 3},
    "output": {"prefix": "py"},
}


def test_spin_operators_algebra():
    jx, jy, jz = spinqsd.spin_operators(3)
    assert np.allclose(jx @ jy - jy @ jx, 1j * jz)
    assert np.allclose(jx @ jx + jy @ jy + jz @ jz, 1.5 * 2.5 * np.eye(4))


def test_coherent_state_overlap_law():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=3), rng.normal(size=3)
    a /= np.linalg.norm(a)
    b /= np.linalg.norm(b)
    va = spinqsd.coherent_state(2, a)
    vb = spinqsd.coherent_state(2, b)
    assert abs(np.vdot(va, vb)) ** 2 == pytest.approx(((1 + a @ b) / 2) ** 2, abs=1e-12)


def test_stereographic_round_trip():
    assert spinqsd.stereographic([1, 0, 0]) == pytest.approx(1.0)
    n = spinqsd.inverse_stereographic(0.3 - 0.4j)
    assert spinqsd.stereographic(n) == pytest.approx(0.3 - 0.4j)


def test_ohmic_and_thermal_helpers():
    g, w = spinqsd.discretize_ohmic(8.0, 10.0, 1, 100, 60.0)
    assert len(g) == 100
    assert g[0] ** 2 == pytest.approx(4 * w[0] * math.exp(-w[0] / 10) * 0.6)
    assert spinqsd.thermal_jz_expectation(1.0, 1.0, 1) == pytest.approx(0.5 * math.tanh(0.5))
    n, m = spinqsd.draw_labels(1, [0.1, 0.2], [1.0, 2.0], None, 7, 0)
    assert n.shape == (2, 3) and np.allclose(m[:, 2], 1.0)


def test_simulate_matches_exact_oracle():
    r = spinqsd.simulate(MINIMAL)
    e = spinqsd.oracle_exact(MINIMAL)
    assert r["completed"] == 50
    rho = np.asarray(r["rho"])
    assert rho.shape == (21, 2, 2)
    assert np.allclose(np.trace(rho, axis1=1, axis2=2), 1.0)
    mean, err = r["observables"]["sz"]
    exact_sz = [np.trace(x @ np.diag([1, -1])).real for x in e["rho"]]
    assert np.all(np.abs(np.asarray(mean) - exact_sz) <= 5 * np.nan_to_num(err) + 0.05)


def test_simulate_is_deterministic():
    a = spinqsd.simulate(MINIMAL, threads=1)
    b = spinqsd.simulate(MINIMAL, threads=3)
    assert np.array_equal(np.asarray(a["rho"]), np.asarray(b["rho"]))


def test_config_errors_are_value_errors():
    bad = json.loads(json.dumps(MINIMAL))
    bad["model"]["H_S"][0][1] = 0.6
    with pytest.raises(spinqsd.ConfigError, match=r"H_S\[0\]\[1\]"):
        spinqsd.canonical_config(bad)
    with pytest.raises(ValueError):
        spinqsd.simulate("{not json")


def test_canonical_round_trip():
    c = spinqsd.canonical_config(MINIMAL)
    assert spinqsd.canonical_config(c) == c


def test_dispatch_writes_csv(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(MINIMAL))
    code, out, err = spinqsd.dispatch("simulate", cfg, out_dir=tmp_path / "out")
    assert code == 0, err
    header = (tmp_path / "out" / "py.csv").read_text().splitlines()[0]
    assert header.startswith("t,re_rho_0_0,im_rho_0_0,re_rho_0_1")
    assert spinqsd.dispatch("nope", cfg)[0] == 1
