"""Parameter sets for the seven model families and the lattice box.

Everything here is a frozen dataclass validated on construction. The flat
key-value names (`lambda`, `k_max`, `r_star`, ...) used by config files and CLI
flags live next to each field so a spec can be rebuilt from a mapping.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from typing import Any, ClassVar, Mapping, Union

import numpy as np


class ParameterError(ValueError):
    """Invalid parameter value. `key` is the config key / CLI flag stem."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class Boundary(str, enum.Enum):
    FREE = 'free'
    TORUS = 'torus'


def _check(cond: bool, key: str, message: str):
    if not cond:
        raise ParameterError(key, message)


def _parse_bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ('1', 'true', 'yes', 'on'):
        return True
    if low in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class LatticeBox:
    d: int
    side: int
    boundary: Boundary = Boundary.FREE

    def __post_init__(self):
        _check(self.d >= 1, 'd', f"dimension must be >= 1, got {self.d}")
        _check(self.side >= 2, 'side', f"box side must be >= 2, got {self.side}")
        object.__setattr__(self, 'boundary', Boundary(self.boundary))

    @property
    def num_sites(self) -> int:
        return self.side ** self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    def coords(self) -> np.ndarray:
        """Row-major coordinates of every site, shape (side**d, d)."""
        grids = np.indices(self.shape).reshape(self.d, -1)
        return grids.T.astype(np.int64)

    def nn_pair_count(self) -> int:
        if self.boundary is Boundary.FREE:
            return self.d * self.side ** (self.d - 1) * (self.side - 1)
        # a side of 2 on the torus wraps onto the same neighbour
        per_axis = self.side if self.side > 2 else 1
        return self.d * self.side ** (self.d - 1) * per_axis


# --- model parameter sets ---------------------------------------------------

@dataclass(frozen=True)
class ErParams:
    model: ClassVar[str] = 'er'
    lattice: ClassVar[bool] = False
    KEYS: ClassVar[dict[str, str]] = {'n': 'n', 'p': 'p', 'vartheta': 'vartheta'}

    n: int
    p: float | None = None
    vartheta: float | None = None

    def __post_init__(self):
        _check(self.n >= 1, 'n', f"node count must be >= 1, got {self.n}")
        _check((self.p is None) != (self.vartheta is None), 'p',
               "give exactly one of p and vartheta")
        if self.p is not None:
            _check(0.0 < self.p < 1.0, 'p', f"edge probability must lie in (0,1), got {self.p}")
        else:
            _check(self.vartheta > 0, 'vartheta', f"must be positive, got {self.vartheta}")
            _check(self.vartheta / self.n < 1.0, 'vartheta',
                   f"vartheta/n must be < 1, got {self.vartheta}/{self.n}")

    @property
    def edge_prob(self) -> float:
        return self.p if self.p is not None else self.vartheta / self.n


@dataclass(frozen=True)
class NswParams:
    model: ClassVar[str] = 'nsw'
    lattice: ClassVar[bool] = False
    KEYS: ClassVar[dict[str, str]] = {'n': 'n', 'tau': 'tau', 'k_max': 'k_max'}

    n: int
    tau: float
    k_max: int = 10 ** 6

    def __post_init__(self):
        _check(self.n >= 2, 'n', f"node count must be >= 2, got {self.n}")
        _check(self.tau > 0, 'tau', f"tail parameter must be positive, got {self.tau}")
        _check(self.k_max >= 1, 'k_max', f"degree cutoff must be >= 1, got {self.k_max}")

    @property
    def norm(self) -> float:
        k = np.arange(1, self.k_max + 1, dtype=np.float64)
        return float(np.sum(k ** -(self.tau + 1.0)))


@dataclass(frozen=True)
class NnBondParams:
    model: ClassVar[str] = 'nn'
    lattice: ClassVar[bool] = True
    KEYS: ClassVar[dict[str, str]] = {'p': 'p'}

    p: float

    def __post_init__(self):
        _check(0.0 <= self.p <= 1.0, 'p', f"bond probability must lie in [0,1], got {self.p}")


@dataclass(frozen=True)
class HomLrpParams:
    """Homogeneous long-range percolation.

    `p` is the nearest-neighbour probability. Leaving it unset selects the
    modified model where nearest neighbours follow the long-range law too,
    p = 1 - exp(-lambda).
    """
    model: ClassVar[str] = 'hom'
    lattice: ClassVar[bool] = True
    KEYS: ClassVar[dict[str, str]] = {'lam': 'lambda', 'alpha': 'alpha', 'p': 'p'}

    lam: float
    alpha: float
    p: float | None = None

    def __post_init__(self):
        _check(self.lam >= 0, 'lambda', f"must be >= 0, got {self.lam}")
        _check(self.alpha > 0, 'alpha', f"must be positive, got {self.alpha}")
        if self.p is not None:
            _check(0.0 <= self.p <= 1.0, 'p', f"nearest-neighbour probability must lie in [0,1], got {self.p}")

    @property
    def nn_prob(self) -> float:
        return self.p if self.p is not None else -math.expm1(-self.lam)


@dataclass(frozen=True)
class HetLrpParams:
    model: ClassVar[str] = 'het'
    lattice: ClassVar[bool] = True
    KEYS: ClassVar[dict[str, str]] = {'lam': 'lambda', 'alpha': 'alpha', 'beta': 'beta'}

    lam: float
    alpha: float
    beta: float

    def __post_init__(self):
        _check(self.lam >= 0, 'lambda', f"must be >= 0, got {self.lam}")
        _check(self.alpha > 0, 'alpha', f"must be positive, got {self.alpha}")
        _check(self.beta > 0, 'beta', f"Pareto tail must be positive, got {self.beta}")


@dataclass(frozen=True)
class ContinuumParams:
    model: ClassVar[str] = 'continuum'
    lattice: ClassVar[bool] = False
    KEYS: ClassVar[dict[str, str]] = {
        'd': 'd', 'nu': 'nu', 'L': 'L', 'lam': 'lambda', 'alpha': 'alpha', 'beta': 'beta',
        'homogeneous_marks': 'homogeneous_marks', 'plant_origin': 'plant_origin',
    }

    d: int
    nu: float
    L: float
    lam: float
    alpha: float
    beta: float = math.inf
    homogeneous_marks: bool = False
    plant_origin: bool = False

    def __post_init__(self):
        _check(self.d >= 1, 'd', f"dimension must be >= 1, got {self.d}")
        _check(self.nu > 0, 'nu', f"intensity must be positive, got {self.nu}")
        _check(self.L > 0, 'L', f"box side length must be positive, got {self.L}")
        _check(self.lam >= 0, 'lambda', f"must be >= 0, got {self.lam}")
        _check(self.alpha > 0, 'alpha', f"must be positive, got {self.alpha}")
        _check(self.beta > 0, 'beta', f"Pareto tail must be positive, got {self.beta}")
        if math.isinf(self.beta):
            object.__setattr__(self, 'homogeneous_marks', True)

    @property
    def volume(self) -> float:
        return self.L ** self.d


@dataclass(frozen=True)
class SiteBondParams:
    model: ClassVar[str] = 'sitebond'
    lattice: ClassVar[bool] = True
    KEYS: ClassVar[dict[str, str]] = {'r_star': 'r_star', 'lam_star': 'lambda', 'alpha': 'alpha'}

    r_star: float
    lam_star: float
    alpha: float

    def __post_init__(self):
        _check(0.0 <= self.r_star <= 1.0, 'r_star', f"occupation probability must lie in [0,1], got {self.r_star}")
        _check(self.lam_star > 0, 'lambda', f"must be positive, got {self.lam_star}")
        _check(self.alpha > 0, 'alpha', f"must be positive, got {self.alpha}")


ModelSpec = Union[ErParams, NswParams, NnBondParams, HomLrpParams, HetLrpParams,
                  ContinuumParams, SiteBondParams]

MODELS: dict[str, type] = {cls.model: cls for cls in
                           (ErParams, NswParams, NnBondParams, HomLrpParams, HetLrpParams,
                            ContinuumParams, SiteBondParams)}

# keys that describe the box rather than the model
BOX_KEYS = ('d', 'side', 'boundary')


# --- flat key-value mapping ---------------------------------------------------

def _coerce(type_name: str, key: str, raw: Any):
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ('', 'none', 'na')):
        return None
    try:
        if type_name.startswith('int'):
            return int(raw)
        if type_name.startswith('float'):
            return float(raw)
        if type_name.startswith('bool'):
            return raw if isinstance(raw, bool) else _parse_bool(raw)
    except (TypeError, ValueError) as exc:
        raise ParameterError(key, f"cannot parse {raw!r} as {type_name.split()[0]}") from exc
    return raw


def spec_from_mapping(values: Mapping[str, Any]) -> tuple[ModelSpec, LatticeBox | None]:
    """Build (spec, box) from flat keys. The box is None for non-lattice models."""
    name = str(values.get('model', '')).strip().lower()
    if name not in MODELS:
        raise ParameterError('model', f"unknown model {name!r}; choose one of {', '.join(MODELS)}")
    cls = MODELS[name]
    kwargs = {}
    for f in fields(cls):
        key = cls.KEYS[f.name]
        if key in values:
            val = _coerce(str(f.type), key, values[key])
            if val is not None:
                kwargs[f.name] = val
    try:
        spec = cls(**kwargs)
    except TypeError as exc:
        missing = [cls.KEYS[f.name] for f in fields(cls) if f.name not in kwargs]
        raise ParameterError(missing[0] if missing else 'model', f"required for model {name}") from exc
    box = None
    if cls.lattice:
        for key in ('d', 'side'):
            if values.get(key) in (None, ''):
                raise ParameterError(key, f"required for lattice model {name}")
        try:
            boundary = Boundary(str(values.get('boundary', 'free')).strip().lower())
        except ValueError:
            raise ParameterError('boundary', f"must be free or torus, got {values.get('boundary')!r}") from None
        box = LatticeBox(int(_coerce('int', 'd', values['d'])),
                         int(_coerce('int', 'side', values['side'])), boundary)
    return spec, box


def spec_to_mapping(spec: ModelSpec, box: LatticeBox | None = None) -> dict[str, Any]:
    out: dict[str, Any] = {'model': spec.model}
    for f in fields(spec):
        val = getattr(spec, f.name)
        if val is not None:
            out[spec.KEYS[f.name]] = val
    if box is not None:
        out.update({'d': box.d, 'side': box.side, 'boundary': box.boundary.value})
    return out
