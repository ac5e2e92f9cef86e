"""Run configuration: YAML parsing, validation and model construction.

A configuration looks like::

    name: diag-m2
    algebra:
      blocks: [1, 1]          # block sizes n_r
      multiplicities: [1, 1]  # optional
      weights: [0.5, 0.5]     # optional trace weights per block
    covariance:
      kind: kraus             # identity | zero | kraus | random_kraus | scalar_table | blocks
      index_count: 1
      kraus:                  # list of (n*I x n) matrices, rows of numbers or [re, im]
        - [[1, 0], [0, 1]]
      symmetrize: false
    depth: 3
    degree: 5
    tolerance: 1.0e-9
    seed: 0
    suites: [semicircular-oracle, integration-by-parts]
    families: [[0], [1]]      # index groups for the freeness suite

Complex numbers are ``[re, im]`` pairs; matrices are row-major nested lists.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .covmap import CovarianceMatrix, block_diagonal, symmetrize, validate_covariance
from .errors import ConfigError, ValidationError
from .matalg import AlgebraContext, validate_subalgebra

COVARIANCE_KINDS = ("identity", "zero", "kraus", "random_kraus", "scalar_table", "blocks")
TOP_LEVEL_KEYS = {"name", "algebra", "covariance", "depth", "degree", "tolerance", "seed",
                  "suites", "families", "slack", "output"}


@dataclass
class RunConfig:
    name: str
    algebra: dict
    covariance: dict
    depth: int = 3
    degree: int = 5
    tolerance: float = 1e-9
    seed: int = 0
    suites: list = field(default_factory=list)
    families: list | None = None
    slack: float = 1.05
    output: str | None = None
    source: str = "<memory>"


def _field(path: str, msg: str) -> ConfigError:
    return ConfigError(f"{path}: {msg}")


def _scalar(x, path: str) -> complex:
    if isinstance(x, bool):
        raise _field(path, "expected a number, got a boolean")
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in x):
        return complex(x[0], x[1])
    raise _field(path, f"expected a number or [re, im], got {x!r}")


def parse_matrix(rows, path: str) -> np.ndarray:
    """Nested list (row-major, entries number or ``[re, im]``) to a complex matrix."""
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise _field(path, "expected a non-empty list of rows")
    width = len(rows[0])
    out = np.zeros((len(rows), width), dtype=complex)
    for a, row in enumerate(rows):
        if len(row) != width:
            raise _field(f"{path}[{a}]", f"row has {len(row)} entries, expected {width}")
        for b, x in enumerate(row):
            out[a, b] = _scalar(x, f"{path}[{a}][{b}]")
    return out


def _int(x, path: str, minimum: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < minimum:
        raise _field(path, f"expected an integer >= {minimum}, got {x!r}")
    return x


def _float(x, path: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise _field(path, f"expected a number, got {x!r}")
    return float(x)


def from_mapping(data, source: str = "<memory>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = set(data) - TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}")
    for key in ("algebra", "covariance"):
        if key not in data:
            raise _field(key, "missing section")
        if not isinstance(data[key], dict):
            raise _field(key, "expected a mapping")
    suites = data.get("suites", [])
    if not isinstance(suites, list) or not all(isinstance(s, str) for s in suites):
        raise _field("suites", "expected a list of suite names")
    families = data.get("families")
    if families is not None:
        if not isinstance(families, list) or not all(isinstance(f, list) for f in families):
            raise _field("families", "expected a list of index lists")
        families = [[_int(i, f"families[{a}][{b}]") for b, i in enumerate(f)]
                    for a, f in enumerate(families)]
    return RunConfig(
        name=str(data.get("name", Path(source).stem)),
        algebra=data["algebra"],
        covariance=data["covariance"],
        depth=_int(data.get("depth", 3), "depth", 1),
        degree=_int(data.get("degree", 5), "degree", 0),
        tolerance=_float(data.get("tolerance", 1e-9), "tolerance"),
        seed=_int(data.get("seed", 0), "seed"),
        suites=list(suites),
        families=families,
        slack=_float(data.get("slack", 1.05), "slack"),
        output=data.get("output"),
        source=source,
    )


def load_config(path) -> RunConfig:
    """Read a YAML configuration; syntax errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ConfigError(f"{path}: parse error at {where}: {getattr(exc, 'problem', exc)}") from exc
    return from_mapping(data, str(path))


def build_algebra(spec: dict) -> AlgebraContext:
    if "blocks" not in spec:
        raise _field("algebra.blocks", "missing")
    blocks = spec["blocks"]
    if not isinstance(blocks, list) or not blocks:
        raise _field("algebra.blocks", "expected a non-empty list of block sizes")
    sizes = [_int(b, f"algebra.blocks[{k}]", 1) for k, b in enumerate(blocks)]
    mult = spec.get("multiplicities")
    if mult is not None:
        if not isinstance(mult, list) or len(mult) != len(sizes):
            raise _field("algebra.multiplicities", f"expected {len(sizes)} entries")
        mult = [_int(m, f"algebra.multiplicities[{k}]", 1) for k, m in enumerate(mult)]
    weights = spec.get("weights")
    if weights is not None:
        if not isinstance(weights, list) or len(weights) != len(sizes):
            raise _field("algebra.weights", f"expected {len(sizes)} entries")
        weights = [_float(w, f"algebra.weights[{k}]") for k, w in enumerate(weights)]
    try:
        return AlgebraContext.from_blocks(sizes, mult, weights)
    except ValidationError as exc:
        raise _field("algebra", str(exc)) from exc


def build_covariance(ctx: AlgebraContext, spec: dict, seed: int, path: str = "covariance") -> CovarianceMatrix:
    kind = spec.get("kind")
    if kind not in COVARIANCE_KINDS:
        raise _field(f"{path}.kind", f"expected one of {', '.join(COVARIANCE_KINDS)}, got {kind!r}")
    index_count = _int(spec.get("index_count", 1), f"{path}.index_count", 1)
    if kind == "identity":
        eta = CovarianceMatrix.diagonal(ctx, index_count)
    elif kind == "zero":
        eta = CovarianceMatrix.zero(ctx, index_count)
    elif kind == "kraus":
        if "kraus" not in spec:
            raise _field(f"{path}.kraus", "required for kind 'kraus'")
        ops = spec["kraus"]
        if not isinstance(ops, list) or not ops:
            raise _field(f"{path}.kraus", "expected a non-empty list of matrices")
        mats = [parse_matrix(k, f"{path}.kraus[{m}]") for m, k in enumerate(ops)]
        want = (ctx.ambient_dim * index_count, ctx.ambient_dim)
        for m, k in enumerate(mats):
            if k.shape != want:
                raise _field(f"{path}.kraus[{m}]", f"shape {k.shape}, expected {want}")
        try:
            eta = CovarianceMatrix.from_kraus(ctx, mats, index_count)
        except ValidationError as exc:
            raise _field(f"{path}.kraus", str(exc)) from exc
    elif kind == "random_kraus":
        n_ops = _int(spec.get("n_ops", 2), f"{path}.n_ops", 1)
        scale = _float(spec.get("scale", 1.0), f"{path}.scale")
        eta = CovarianceMatrix.random_kraus(ctx, index_count, n_ops, np.random.default_rng(seed), scale)
    elif kind == "scalar_table":
        if "table" not in spec:
            raise _field(f"{path}.table", "required for kind 'scalar_table'")
        t = parse_matrix(spec["table"], f"{path}.table")
        if t.shape != (index_count, index_count):
            raise _field(f"{path}.table", f"shape {t.shape}, expected {(index_count, index_count)}")
        coef = np.einsum("ij,ab->ijab", t, np.eye(ctx.dim))
        eta = CovarianceMatrix.from_table(ctx, coef)
    else:
        parts = spec.get("parts")
        if not isinstance(parts, list) or not parts:
            raise _field(f"{path}.parts", "expected a non-empty list of covariance sections")
        eta = block_diagonal(*[build_covariance(ctx, p, seed + k, f"{path}.parts[{k}]")
                               for k, p in enumerate(parts)])
    if spec.get("symmetrize", False):
        eta, _ = symmetrize(eta)
    return eta


@dataclass
class BuiltModel:
    ctx: AlgebraContext
    eta: CovarianceMatrix
    algebra_report: object
    covariance_report: object


def build(config: RunConfig) -> BuiltModel:
    """Algebra and covariance from a configuration, validated.

    Raises
    ------
    ConfigError
        On malformed sections.
    ValidationError
        If B is not a valid subalgebra or the covariance is not completely
        positive and tau-symmetric.
    """
    ctx = build_algebra(config.algebra)
    arep = validate_subalgebra(ctx)
    if not arep.ok:
        raise ValidationError(f"algebra: {arep}")
    eta = build_covariance(ctx, config.covariance, config.seed)
    crep = validate_covariance(eta)
    if not crep.ok:
        raise ValidationError(f"covariance: {crep}")
    return BuiltModel(ctx, eta, arep, crep)
