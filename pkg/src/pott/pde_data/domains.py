"""Sub-domain presets for the three equations and dataset generation."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .advection import solve_advection_batch, space_grid
from .burgers import solve_burgers_batch
from .darcy import sample_darcy_coeff_batch, solve_darcy_array
from .grf import sample_grf_1d_batch
from .types import GridFunction

EQUATIONS = ("burgers", "advection", "darcy")
SUBDOMAINS = ("D1", "D2", "D3")
SPLITS = ("train", "val", "test")

PRESETS = {
    ("burgers", "D1"): {"mean": 0.0, "scale": 7.0, "tau": 7.0, "alpha": 2.0, "nu": 0.01},
    ("burgers", "D2"): {"mean": 0.2, "scale": 49.0, "tau": 7.0, "alpha": 2.5, "nu": 0.002},
    ("burgers", "D3"): {"mean": 0.5, "scale": 625.0, "tau": 25.0, "alpha": 2.5, "nu": 0.004},
    # u0 = a x^2 + b x + c
    ("advection", "D1"): {"family": "quadratic", "ranges": [[-1, 1], [-1, 1], [-1, 1]],
                          "offset": 0.0, "nu": 3.0},
    # u0 = a x^3 + b x^2 + c x + offset
    ("advection", "D2"): {"family": "cubic", "ranges": [[0, 1], [-0.5, 0.5], [-0.5, 0.5]],
                          "offset": 0.5, "nu": 2.0},
    # u0 = a sin(b x + c)
    ("advection", "D3"): {"family": "sine", "ranges": [[0, 1], [5, 10], [-1, 1]],
                          "offset": 0.0, "nu": 1.0},
    ("darcy", "D1"): {"kernel": "sq_exp_l2", "mask": "square", "n_kl": 100},
    ("darcy", "D2"): {"kernel": "sq_exp_l2", "mask": "triangle", "n_kl": 100},
    ("darcy", "D3"): {"kernel": "sq_exp_l1", "mask": "square", "n_kl": 100},
}

GRIDS = {"burgers": (1024,), "advection": (100, 50), "darcy": (64, 64)}
TRAIN_SIZES = {"burgers": 1000, "advection": 2000, "darcy": 2000}
BURGERS_CHUNK = 64


class SpecMismatch(ValueError):
    pass


@dataclass
class DomainSpec:
    """What to generate for one (equation, sub-domain) pair.

    Generation parameters are locked to the preset unless ``custom`` is set.
    Grid, sample counts, seed and ``solver_nx`` (Burgers only: solve on a
    finer grid, then subsample) may always be chosen freely.
    """

    equation: str
    subdomain: str
    params: dict
    grid: tuple
    n_train: int
    n_val: int = 10
    n_test: int = 100
    seed: int = 0
    custom: bool = False
    solver_nx: int | None = None

    @classmethod
    def preset(cls, equation: str, subdomain: str, **overrides) -> "DomainSpec":
        key = (equation, subdomain)
        if key not in PRESETS:
            raise SpecMismatch(f"no preset for {key}")
        if "params" in overrides:
            raise SpecMismatch("preset parameters are fixed; build a custom DomainSpec instead")
        kw = {"grid": GRIDS[equation], "n_train": TRAIN_SIZES[equation]}
        kw.update(overrides)
        kw["grid"] = tuple(kw["grid"])
        return cls(equation, subdomain, copy.deepcopy(PRESETS[key]), **kw)

    def validate(self):
        if self.equation not in EQUATIONS:
            raise SpecMismatch(f"unknown equation {self.equation!r}")
        expected_rank = len(GRIDS[self.equation])
        if len(self.grid) != expected_rank:
            raise SpecMismatch(f"{self.equation} grid needs {expected_rank} axes, got {self.grid}")
        if not self.custom:
            preset = PRESETS.get((self.equation, self.subdomain))
            if preset is None or _normalise(self.params) != _normalise(preset):
                raise SpecMismatch(
                    f"parameters of {self.equation}/{self.subdomain} differ from the preset; "
                    "set custom=True to use free parameters")
        if self.solver_nx is not None:
            if self.equation != "burgers":
                raise SpecMismatch("solver_nx only applies to burgers")
            if self.solver_nx % self.grid[0]:
                raise SpecMismatch("solver_nx must be a multiple of the output grid")
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise SpecMismatch("sample counts must be non-negative")

    def split_size(self, split: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["grid"] = list(self.grid)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DomainSpec":
        d = dict(d)
        d["grid"] = tuple(d["grid"])
        return cls(**d)


def _normalise(p):
    if isinstance(p, dict):
        return {k: _normalise(v) for k, v in sorted(p.items())}
    if isinstance(p, (list, tuple)):
        return [_normalise(v) for v in p]
    if isinstance(p, (int, float)) and not isinstance(p, bool):
        return float(p)
    return p


@dataclass
class SamplePair:
    k: GridFunction
    u: GridFunction


@dataclass
class Dataset:
    """Stacked input/output arrays for one split of one domain."""

    spec: DomainSpec
    split: str
    k: np.ndarray
    u: np.ndarray
    indices: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if len(self.k) != len(self.u):
            raise ValueError("k and u hold different sample counts")
        if self.indices is None:
            self.indices = np.arange(len(self.k))

    def __len__(self):
        return len(self.k)

    def __getitem__(self, i) -> SamplePair:
        kext, uext, kper, uper = _layout(self.spec.equation)
        return SamplePair(GridFunction(self.k[i], kext, kper), GridFunction(self.u[i], uext, uper))

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.spec, self.split, self.k[:n], self.u[:n], self.indices[:n])


def _layout(equation):
    unit, sq = ((0.0, 1.0),), ((0.0, 1.0), (0.0, 1.0))
    if equation == "burgers":
        return unit, unit, True, True
    if equation == "advection":
        return unit, sq, True, (True, False)
    return sq, sq, False, False


def sample_rng(seed: int, split: str, i: int) -> np.random.Generator:
    """Independent stream per (dataset seed, split, sample index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, SPLITS.index(split), i]))


def advection_initial(params: dict, coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    a, b, c = coeffs
    fam = params["family"]
    if fam == "quadratic":
        u = a * x**2 + b * x + c
    elif fam == "cubic":
        u = a * x**3 + b * x**2 + c * x
    elif fam == "sine":
        u = a * np.sin(b * x + c)
    else:
        raise SpecMismatch(f"unknown initial-condition family {fam!r}")
    return u + params.get("offset", 0.0)


def _gen_burgers(spec, rngs):
    p = spec.params
    nx = spec.grid[0]
    fine = spec.solver_nx or nx
    u0 = np.stack([sample_grf_1d_batch(p["mean"], p["scale"], p["tau"], p["alpha"], fine, r, 1)[0]
                   for r in rngs]) if rngs else np.zeros((0, fine))
    u1 = np.empty_like(u0)
    for s in range(0, len(u0), BURGERS_CHUNK):
        u1[s:s + BURGERS_CHUNK] = solve_burgers_batch(u0[s:s + BURGERS_CHUNK], p["nu"])
    stride = fine // nx
    return u0[:, ::stride].copy(), u1[:, ::stride].copy()


def _gen_advection(spec, rngs):
    p = spec.params
    nx, nt = spec.grid
    x = space_grid(nx)
    lo = np.array([r[0] for r in p["ranges"]], dtype=float)
    hi = np.array([r[1] for r in p["ranges"]], dtype=float)
    u0 = np.stack([advection_initial(p, r.uniform(lo, hi), x) for r in rngs]) if rngs \
        else np.zeros((0, nx))
    return u0, solve_advection_batch(u0, p["nu"], nt)


def _gen_darcy(spec, rngs):
    p = spec.params
    nx = spec.grid[0]
    if spec.grid[1] != nx:
        raise SpecMismatch("darcy grid must be square")
    k = np.stack([sample_darcy_coeff_batch(p["kernel"], r, 1, p["n_kl"], nx)[0] for r in rngs]) \
        if rngs else np.zeros((0, nx, nx))
    u = np.stack([solve_darcy_array(ki, p["mask"]) for ki in k]) if rngs else np.zeros_like(k)
    return k, u


_GENERATORS = {"burgers": _gen_burgers, "advection": _gen_advection, "darcy": _gen_darcy}


def generate_split(spec: DomainSpec, split: str) -> Dataset:
    spec.validate()
    n = spec.split_size(split)
    rngs = [sample_rng(spec.seed, split, i) for i in range(n)]
    k, u = _GENERATORS[spec.equation](spec, rngs)
    return Dataset(spec, split, k, u, np.arange(n))


def generate_domain(spec: DomainSpec, splits=SPLITS) -> dict[str, Dataset]:
    """All requested splits of a domain, deterministic in ``spec.seed``."""
    return {s: generate_split(spec, s) for s in splits}
