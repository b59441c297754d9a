import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

from pott.pde_data import (CGNotConverged, DomainSpec, GridFunction, SolverBlowUp, SpecMismatch,
                           generate_domain, generate_split, kl_basis, kl_field, region_mask,
                           sample_darcy_coeff, sample_grf_1d, sample_grf_1d_batch,
                           solve_advection, solve_advection_batch, solve_burgers,
                           solve_burgers_batch, solve_darcy, solve_darcy_array)
from pott.pde_data import darcy as darcy_mod
from pott.pde_data.domains import PRESETS, advection_initial, sample_rng


def spectral_variance(scale, tau, alpha, nx):
    # constant basis function 1, plus sqrt(2) cos / sqrt(2) sin pairs below Nyquist
    total = scale**2 * tau ** (-2 * alpha)
    for j in range(1, nx // 2):
        lam = scale**2 * (4 * np.pi**2 * j**2 + tau**2) ** (-alpha)
        total += lam * 2.0  # 2 (cos^2 + sin^2)
    return total


# ---------------------------------------------------------------- GRF

def test_grf_zero_scale_is_constant():
    g = sample_grf_1d(0.3, 0.0, 7.0, 2.0, 64, rng=1)
    assert np.all(g.values == 0.3)
    assert g.periodic == (True,)


def test_grf_mean_within_three_standard_errors():
    p = PRESETS[("burgers", "D1")]
    n = 1000
    draws = sample_grf_1d_batch(p["mean"], p["scale"], p["tau"], p["alpha"], 1024,
                                np.random.default_rng(11), n)
    se = np.sqrt(spectral_variance(p["scale"], p["tau"], p["alpha"], 1024) / n)
    assert np.all(np.abs(draws.mean(axis=0) - p["mean"]) < 3 * se)


@pytest.mark.parametrize("sub", ["D1", "D2", "D3"])
def test_grf_pointwise_variance_matches_spectral_sum(sub):
    p = PRESETS[("burgers", sub)]
    nx = 256
    draws = sample_grf_1d_batch(p["mean"], p["scale"], p["tau"], p["alpha"], nx,
                                np.random.default_rng(5), 10_000)
    expected = spectral_variance(p["scale"], p["tau"], p["alpha"], nx)
    var = draws.var(axis=0)
    assert np.max(np.abs(var / expected - 1)) < 0.05


def test_grf_smoothness_ordering():
    def hf_fraction(sub):
        p = PRESETS[("burgers", sub)]
        u = sample_grf_1d_batch(p["mean"], p["scale"], p["tau"], p["alpha"], 1024,
                                np.random.default_rng(3), 100)
        e = np.abs(np.fft.rfft(u - u.mean(axis=1, keepdims=True), axis=1)) ** 2
        return np.mean(e[:, 8:].sum(1) / e.sum(1))
    assert hf_fraction("D1") > hf_fraction("D2")


@pytest.mark.parametrize("kw", [dict(nx=100), dict(alpha=0.5), dict(tau=0.0), dict(scale=-1.0)])
def test_grf_rejects_bad_parameters(kw):
    args = dict(mean=0.0, scale=1.0, tau=1.0, alpha=2.0, nx=64)
    args.update(kw)
    with pytest.raises(ValueError):
        sample_grf_1d(**args)


# ---------------------------------------------------------------- Burgers

def test_burgers_zero_solution():
    u = solve_burgers(GridFunction(np.zeros(64), periodic=True), 0.01)
    assert np.all(u.values == 0)


def test_burgers_constant_solution():
    u = solve_burgers(GridFunction(np.full(64, 0.7), periodic=True), 0.01)
    np.testing.assert_allclose(u.values, 0.7, rtol=0, atol=1e-12)


def test_burgers_grid_refinement():
    x = np.arange(64) / 64
    xf = np.arange(256) / 256
    coarse = solve_burgers_batch(np.sin(2 * np.pi * x)[None], 0.1)[0]
    # the diffusive bound already shrinks dt by 16 on the fine grid
    fine = solve_burgers_batch(np.sin(2 * np.pi * xf)[None], 0.1)[0, ::4]
    assert np.linalg.norm(coarse - fine) / np.linalg.norm(fine) < 1e-4


def test_burgers_batch_rows_independent():
    rng = np.random.default_rng(0)
    u0 = sample_grf_1d_batch(0.0, 7.0, 7.0, 2.0, 64, rng, 3)
    u0[1] *= 3
    batch = solve_burgers_batch(u0, 0.01)
    single = solve_burgers_batch(u0[2:3], 0.01)
    np.testing.assert_allclose(batch[2], single[0], rtol=0, atol=1e-13)


def test_burgers_blow_up_reports_step():
    x = np.arange(64) / 64
    u0 = np.stack([np.zeros(64), 5 * np.sin(2 * np.pi * x)])
    # forty times the stable step is far outside the RK4 stability region
    with pytest.raises(SolverBlowUp) as e:
        solve_burgers_batch(u0, 0.01, safety=20.0)
    assert e.value.step >= 1 and e.value.rows == [1]
    assert f"step {e.value.step}" in str(e.value)


def test_burgers_rejects_nonfinite_input():
    u0 = np.zeros((1, 32))
    u0[0, 3] = np.nan
    with pytest.raises(ValueError):
        solve_burgers_batch(u0, 0.01)


def test_burgers_viscous_dissipation():
    p = PRESETS[("burgers", "D1")]
    u0 = sample_grf_1d_batch(p["mean"], p["scale"], p["tau"], p["alpha"], 128,
                             np.random.default_rng(2), 100)
    u0 += np.random.default_rng(3).uniform(-0.5, 0.5, (100, 1))
    u1 = solve_burgers_batch(u0, p["nu"])
    norm = lambda v: np.sqrt(np.mean(v**2, axis=-1))
    mean = u0.mean(axis=1)
    assert np.all(norm(u1) <= norm(u0 - mean[:, None]) + np.abs(mean) + 1e-12)


# ---------------------------------------------------------------- Advection

def test_advection_stationary():
    u0 = np.random.default_rng(0).normal(size=100)
    out = solve_advection(GridFunction(u0, periodic=True), 0.0, 50).values
    assert np.all(out == u0[:, None])


@pytest.mark.parametrize("nu", [1.0, 2.0, 3.0])
def test_advection_full_period_shift(nu):
    u0 = np.random.default_rng(1).normal(size=100)
    out = solve_advection_batch(u0[None], nu, 50)[0]
    assert np.all(out[:, -1] == u0)


def test_advection_closed_form():
    x = np.arange(100) / 100
    out = solve_advection(GridFunction(np.sin(6 * x + 0.3), periodic=True), 1.0, nt=3).values
    exact = np.sin(6 * np.mod(x - 0.5, 1.0) + 0.3)
    np.testing.assert_allclose(out[:, 1], exact, atol=1e-3)


def test_advection_smooth_periodic_all_times():
    x = np.arange(100) / 100
    out = solve_advection_batch(np.sin(2 * np.pi * x)[None], 1.7, 50)[0]
    t = np.linspace(0, 1, 50)
    exact = np.sin(2 * np.pi * (x[:, None] - 1.7 * t[None, :]))
    # linear interpolation error bound h^2/8 max|u''|
    assert np.max(np.abs(out - exact)) <= (0.01**2) / 8 * (2 * np.pi) ** 2 + 1e-12


@pytest.mark.parametrize("sub", ["D1", "D2", "D3"])
def test_advection_conservation(sub):
    d = generate_split(DomainSpec.preset("advection", sub, n_train=30), "train")
    mass = d.u.mean(axis=1)  # periodic trapezoid over x, per time
    scale = np.abs(d.u[:, :, 0]).mean(axis=1, keepdims=True)
    assert np.all(np.abs(mass - mass[:, :1]) <= 1e-3 * scale)


# ---------------------------------------------------------------- Darcy

@pytest.mark.parametrize("mask", ["square", "triangle"])
def test_darcy_residual_and_dirichlet(mask):
    k = sample_darcy_coeff("sq_exp_l2", rng=4).values
    u = solve_darcy_array(k, mask)
    assert darcy_mod.discrete_residual(k, u, mask) < 1e-10
    region = region_mask(mask, 64)
    inner = darcy_mod.interior_mask(region)
    assert np.all(u[~inner] == 0.0)
    assert np.all(u[0, :] == 0) and np.all(u[-1, :] == 0)
    assert np.all(u[:, 0] == 0) and np.all(u[:, -1] == 0)


def test_darcy_triangle_geometry():
    region = region_mask("triangle", 64)
    x = np.linspace(0, 1, 64)
    i = lambda v: int(np.argmin(np.abs(x - v)))
    assert region[0, 0] and region[0, -1]
    assert not region[i(0.5), i(0.5)]
    assert region[i(0.1), i(0.9)]
    # the vertex (0.5, 1) lies between nodes; the node just right of it is outside
    assert not region[32, -1]


def test_darcy_unit_coefficient_grid_refinement():
    coarse = solve_darcy_array(np.ones((64, 64)))
    fine = solve_darcy_array(np.ones((256, 256)))
    xf = np.linspace(0, 1, 256)
    interp = RegularGridInterpolator((xf, xf), fine, method="linear")
    xc = np.linspace(0, 1, 64)
    X, Y = np.meshgrid(xc, xc, indexing="ij")
    ref = interp(np.stack([X.ravel(), Y.ravel()], 1)).reshape(64, 64)
    assert np.linalg.norm(coarse - ref) / np.linalg.norm(ref) < 1e-2


@pytest.mark.parametrize("kernel,mask", [("sq_exp_l2", "square"), ("sq_exp_l2", "triangle"),
                                         ("sq_exp_l1", "square")])
def test_darcy_maximum_principle(kernel, mask):
    rng = np.random.default_rng(8)
    xc = np.linspace(0, 1, 64)
    xf = np.linspace(0, 1, 127)
    for _ in range(20):
        k = sample_darcy_coeff(kernel, rng=rng).values
        assert solve_darcy_array(k, mask).min() >= 0.0
        kf = RegularGridInterpolator((xc, xc), k)(
            np.stack(np.meshgrid(xf, xf, indexing="ij"), -1).reshape(-1, 2)).reshape(127, 127)
        assert solve_darcy_array(kf, mask).min() >= 0.0


def test_darcy_rejects_nonpositive_coefficient():
    k = np.ones((16, 16))
    k[3, 4] = 0.0
    with pytest.raises(ValueError):
        solve_darcy_array(k)


def test_darcy_cg_budget_exhaustion(monkeypatch):
    real_cg = darcy_mod.spla.cg
    monkeypatch.setattr(darcy_mod.spla, "cg",
                        lambda A, b, **kw: real_cg(A, b, **{**kw, "maxiter": 2}))
    with pytest.raises(CGNotConverged):
        solve_darcy_array(np.ones((32, 32)))


def test_kl_zero_coefficients_give_unit_field():
    k = np.exp(kl_field(np.zeros(100), "sq_exp_l2"))
    assert np.all(k == 1.0)


@pytest.mark.parametrize("kernel", ["sq_exp_l2", "sq_exp_l1"])
def test_kl_eigenvalues_sorted_nonnegative(kernel):
    lam, phi = kl_basis(kernel)
    assert lam.shape == (100,) and phi.shape == (4096, 100)
    assert np.all(np.diff(lam) <= 0) and np.all(lam >= 0)
    np.testing.assert_allclose(phi.T @ phi / 4096, np.eye(100), atol=1e-8)


@pytest.mark.parametrize("kernel", ["sq_exp_l2", "sq_exp_l1"])
def test_kl_monte_carlo_covariance(kernel):
    rng = np.random.default_rng(21)
    g = kl_field(rng.standard_normal((5000, 100)), kernel).reshape(5000, -1)
    lam, phi = kl_basis(kernel)
    pts = darcy_mod.grid_points(64)
    d = pts - pts[0]
    full = np.exp(-0.5 * (np.sum(d**2, 1) if kernel == "sq_exp_l2" else np.sum(np.abs(d), 1) ** 2))
    for a, b in rng.integers(0, 4096, size=(10, 2)):
        truncated = np.sum(lam * phi[a] * phi[b])
        emp = np.mean(g[:, a] * g[:, b])
        assert abs(emp - truncated) < 0.1 * abs(truncated)
    if kernel == "sq_exp_l1":
        return  # indefinite kernel: the positive part alone does not reproduce it
    # rank-100 truncation reproduces the kernel against the first node
    trunc_row = (lam * phi[0]) @ phi.T
    assert np.max(np.abs(trunc_row - full)) < 0.05


# ---------------------------------------------------------------- domains

def test_burgers_preset_fields():
    s = DomainSpec.preset("burgers", "D1")
    assert s.grid == (1024,) and s.n_train == 1000 and s.params["nu"] == 0.01
    assert (s.n_val, s.n_test) == (10, 100)
    assert DomainSpec.preset("advection", "D1").n_train == 2000
    assert DomainSpec.preset("darcy", "D2").params["mask"] == "triangle"


def test_advection_d3_preset_samples():
    s = DomainSpec.preset("advection", "D3", n_train=20, seed=4)
    assert s.params["nu"] == 1.0
    d = generate_split(s, "train")
    x = np.arange(100) / 100
    for i in range(len(d)):
        a, b, c = sample_rng(4, "train", i).uniform([0, 5, -1], [1, 10, 1])
        np.testing.assert_allclose(d.u[i, :, 0], a * np.sin(b * x + c), atol=1e-14)
        np.testing.assert_allclose(d.k[i], d.u[i, :, 0])
    assert d.u.shape == (20, 100, 50)


def test_advection_families():
    x = np.linspace(0, 1, 5)
    p2 = PRESETS[("advection", "D2")]
    np.testing.assert_allclose(advection_initial(p2, (1.0, 0.0, 0.0), x), x**3 + 0.5)


@pytest.mark.parametrize("eq,kw", [("burgers", dict(grid=(64,))), ("advection", {}),
                                   ("darcy", {})])
def test_generation_deterministic(eq, kw):
    s = DomainSpec.preset(eq, "D2", n_train=4, n_val=2, n_test=2, seed=9, **kw)
    a = generate_domain(s)
    b = generate_domain(s)
    for split in ("train", "val", "test"):
        assert a[split].k.tobytes() == b[split].k.tobytes()
        assert a[split].u.tobytes() == b[split].u.tobytes()
    assert not np.allclose(a["train"].k[:2], a["val"].k)


def test_burgers_solver_grid_subsampling():
    s = DomainSpec.preset("burgers", "D2", grid=(64,), n_train=3, solver_nx=256)
    d = generate_split(s, "train")
    assert d.k.shape == (3, 64) and d.u.shape == (3, 64)
    pair = d[0]
    assert pair.k.periodic == (True,)


def test_preset_parameters_locked():
    s = DomainSpec.preset("burgers", "D1")
    s.params["nu"] = 0.02
    with pytest.raises(SpecMismatch):
        s.validate()
    s.custom = True
    s.validate()
    with pytest.raises(SpecMismatch):
        DomainSpec.preset("burgers", "D1", params={})
    with pytest.raises(SpecMismatch):
        DomainSpec.preset("heat", "D1")


def test_darcy_pair_layout():
    d = generate_split(DomainSpec.preset("darcy", "D3", n_train=2), "train")
    assert d.k.shape == (2, 64, 64) and np.all(d.k > 0)
    assert d[1].u.resolution == (64, 64)


def test_spec_roundtrip_dict():
    s = DomainSpec.preset("advection", "D2", n_train=5, seed=3)
    assert DomainSpec.from_dict(s.to_dict()) == s
