"""Smoke test for the synrisk extension module.

Build and install with `maturin develop -m crates/python/Cargo.toml` (or
`pip install ./crates/python`), then run `python python/smoke_test.py`.
"""

import math

import synrisk


def close(a, b, tol=1e-9):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def test_clearing():
    s = synrisk.FinancialSystem([[0.0, 2.0], [1.0, 0.0]], [0.5, 0.5])
    r = s.clear()
    assert r["unique"] is True
    # Bank 0 owes 2 and holds 0.5 + 1 from bank 1.
    assert close(r["p"], [1.5, 1.0])
    assert r["defaults"] == [0]
    rv = s.clear("rogers_veraart", alpha=1.0, beta=1.0)
    assert close(rv["p"], r["p"], 1e-12)
    try:
        s.clear("gauss")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")


def test_cascade():
    edges = [(0, 1), (1, 2), (2, 0)]
    system = synrisk.InterbankSystem(3, edges, r_bar=0.2)
    out = system.cascade([1])
    assert sorted(out["finally_defaulted"]) == [0, 1, 2]
    assert math.isclose(out["default_fraction"], 1.0)
    edges = synrisk.erdos_renyi(2000, 4.0, seed=3, directed=False)
    big = synrisk.InterbankSystem(2000, edges, r_bar=0.18)
    a = big.random_cascade(0.001, seed=5)
    b = big.random_cascade(0.001, seed=5)
    assert a == b


def test_theory():
    t = synrisk.cascade_theory(3.0, 0.18)
    assert t["first_order"]["holds"] and t["rho"] > 0.9
    quiet = synrisk.cascade_theory(10.0, 0.18)
    assert not quiet["first_order"]["holds"] and quiet["rho"] < 0.01


def test_debtrank():
    s = synrisk.ExposureSystem.from_leverage([[0.0, 0.5], [0.5, 0.0]])
    assert close(s.debtrank([0.4, 0.0])["h"][-1], [0.5, 0.2], 1e-12)
    assert math.isclose(s.spectral_radius(), 0.5, rel_tol=1e-9)


def test_firesale():
    p = synrisk.PortfolioSystem.random(50, 50, 5.0, 20.0, seed=1)
    assert (p.n_banks, p.m_assets) == (50, 50)
    out = p.fire_sale("asset:0:0.3")
    assert all(0 < x <= 1 for x in out["prices"])
    pi, radius = p.transfer_matrix()
    assert len(pi) == 50 and radius >= 0


def test_structure_and_reconstruction():
    core = [(i, j) for i in range(4) for j in range(i + 1, 4)]
    spokes = [(4 + k, k % 4) for k in range(8)]
    found = synrisk.core_periphery(12, core + spokes, seed=2)
    assert found["core"] == [0, 1, 2, 3] and found["error"] == 0
    x = synrisk.reconstruct([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    assert all(abs(x[i][j] - 0.5) < 1e-10 for i in range(3) for j in range(3) if i != j)


def test_experiment():
    rec = synrisk.run_experiment(
        {"model": "theory", "params": {"R": 0.18}, "sweep": [{"param": "z", "values": [1, 3, 10]}], "trials": 1}
    )
    assert len(rec["rows"]) == 3
    try:
        synrisk.run_experiment({"model": "theory", "params": {}})
    except ValueError as e:
        assert "params.z" in str(e)
    else:
        raise AssertionError("invalid config accepted")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")
