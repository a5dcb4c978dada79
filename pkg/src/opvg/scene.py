"""Scene files: JSON (schema version 1) describing a chart, a metric and named objects."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import exprdsl as ex
from .algebra import AElem, AlgebraSpec
from .domain import BoxDomain
from .errors import (
    DomainError,
    ExprError,
    ExprSyntaxError,
    MetricInvalid,
    ParseError,
    PointDegenerate,
    SchemaError,
    SignatureInconsistent,
    UnknownName,
)
from .fields import AFormField, AVectorField
from .geometry import CoefficientConnection, MetricField

NAME = {"type": "string", "pattern": "^[A-Za-z][A-Za-z0-9_]*$"}
EXPR = {"type": "string", "minLength": 1}
PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "algebra", "dimension", "coordinates", "metric", "domain"],
    "properties": {
        "schema": {"const": 1},
        "algebra": {
            "type": "object",
            "additionalProperties": False,
            "required": ["fibers"],
            "properties": {
                "fibers": {"type": "integer", "minimum": 1},
                "labels": {"type": "array", "items": {"type": "string"}},
            },
        },
        "constants": {
            "type": "object",
            "propertyNames": NAME,
            "additionalProperties": {"type": "array", "items": PAIR, "minItems": 1},
        },
        "dimension": {"type": "integer", "minimum": 1, "maximum": 6},
        "coordinates": {"type": "array", "items": NAME, "minItems": 1},
        "metric": {"type": "array", "items": {"type": "array", "items": EXPR}},
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "required": ["box"],
            "properties": {"box": {"type": "array", "items": PAIR, "minItems": 1}},
        },
        "vector_fields": {
            "type": "object",
            "propertyNames": NAME,
            "additionalProperties": {"type": "array", "items": EXPR},
        },
        "forms": {
            "type": "object",
            "propertyNames": NAME,
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "required": ["k", "components"],
                "properties": {
                    "k": {"type": "integer", "minimum": 0},
                    "components": {"type": "object", "additionalProperties": EXPR},
                },
            },
        },
        "functions": {"type": "object", "propertyNames": NAME, "additionalProperties": EXPR},
        "orientation": {"const": "coordinate"},
        # explicit connection coefficients gamma[k][i][j]; Levi-Civita when absent
        "connection": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "array", "items": EXPR}},
        },
    },
}


def _path(parts) -> str:
    return "/" + "/".join(str(p) for p in parts)


@dataclass
class Scene:
    algebra: AlgebraSpec
    constants: dict[str, AElem]
    dimension: int
    coordinates: tuple[str, ...]
    metric: MetricField
    domain: BoxDomain
    vector_fields: dict[str, AVectorField] = field(default_factory=dict)
    forms: dict[str, AFormField] = field(default_factory=dict)
    functions: dict[str, ex.Expr] = field(default_factory=dict)
    connection: CoefficientConnection | None = None
    orientation: str = "coordinate"
    digest: str = ""

    @property
    def fibers(self) -> int:
        return self.algebra.fibers

    def parse(self, src: str) -> ex.Expr:
        return ex.parse(src, self.coordinates, self.constants)


def digest_of(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def load_scene(path) -> Scene:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError("/", f"invalid JSON: {e}") from e
    return scene_from_dict(doc)


def scene_from_dict(doc: dict) -> Scene:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        raise SchemaError(_path(e.absolute_path), e.message) from e

    N = doc["algebra"]["fibers"]
    labels = doc["algebra"].get("labels")
    try:
        algebra = AlgebraSpec(N, tuple(labels) if labels is not None else None)
    except ValueError as e:
        raise SchemaError("/algebra", str(e)) from e

    constants = {}
    for name, vals in doc.get("constants", {}).items():
        if len(vals) != N:
            raise SchemaError(f"/constants/{name}", f"expected {N} fiber values, got {len(vals)}")
        constants[name] = AElem([complex(re, im) for re, im in vals])

    n = doc["dimension"]
    coords = tuple(doc["coordinates"])
    if len(coords) != n:
        raise SchemaError("/coordinates", f"expected {n} names, got {len(coords)}")
    try:
        ex.check_namespaces(coords, constants)
    except ExprSyntaxError as e:
        raise SchemaError("/coordinates", str(e)) from e

    def parse(src: str, where: str) -> ex.Expr:
        try:
            return ex.parse(src, coords, constants)
        except ExprSyntaxError as e:
            raise ParseError(where, e.offset, str(e)) from e
        except UnknownName as e:
            raise ParseError(where, e.offset, str(e)) from e
        except ExprError as e:
            raise ParseError(where, None, str(e)) from e

    rows = doc["metric"]
    if len(rows) != n or any(len(r) != n for r in rows):
        raise SchemaError("/metric", f"metric must be {n}x{n}")
    entries = [[parse(s, f"/metric/{i}/{j}") for j, s in enumerate(r)] for i, r in enumerate(rows)]

    box = doc["domain"]["box"]
    if len(box) != n:
        raise SchemaError("/domain/box", f"expected {n} intervals, got {len(box)}")
    try:
        domain = BoxDomain(tuple(tuple(iv) for iv in box))
    except ValueError as e:
        raise SchemaError("/domain/box", str(e)) from e

    try:
        metric = MetricField(entries, coords, constants, N, domain)
    except PointDegenerate as e:
        raise MetricInvalid(e.point, e.fiber, "determinant not invertible") from e
    except SignatureInconsistent as e:
        raise MetricInvalid(None, None, str(e)) from e
    except DomainError as e:
        raise MetricInvalid(None, e.fiber, str(e)) from e

    vfs = {}
    for name, comps in doc.get("vector_fields", {}).items():
        if len(comps) != n:
            raise SchemaError(f"/vector_fields/{name}", f"expected {n} components")
        vfs[name] = AVectorField([parse(s, f"/vector_fields/{name}/{i}") for i, s in enumerate(comps)])

    forms = {}
    for name, entry in doc.get("forms", {}).items():
        k = entry["k"]
        if k > n:
            raise SchemaError(f"/forms/{name}/k", f"degree {k} exceeds dimension {n}")
        comps = {}
        for key, src in entry["components"].items():
            where = f"/forms/{name}/components/{key}"
            try:
                idx = tuple(json.loads(key))
            except (json.JSONDecodeError, TypeError) as e:
                raise SchemaError(where, "component key must look like [i,j,...]") from e
            if len(idx) != k or any(not isinstance(i, int) or not 0 <= i < n for i in idx):
                raise SchemaError(where, f"need {k} indices in [0, {n})")
            if len(set(idx)) != len(idx):
                raise SchemaError(where, "repeated index")
            comps[idx] = parse(src, where)
        forms[name] = AFormField(n, k, comps)

    functions = {name: parse(src, f"/functions/{name}") for name, src in doc.get("functions", {}).items()}

    connection = None
    if "connection" in doc:
        gam = doc["connection"]
        if len(gam) != n or any(len(r) != n or any(len(c) != n for c in r) for r in gam):
            raise SchemaError("/connection", f"connection must be {n}x{n}x{n}")
        parsed = [[[parse(s, f"/connection/{k}/{i}/{j}") for j, s in enumerate(r)]
                   for i, r in enumerate(plane)] for k, plane in enumerate(gam)]
        connection = CoefficientConnection(parsed, coords, constants, N)

    return Scene(algebra, constants, n, coords, metric, domain, vfs, forms, functions,
                 connection, doc.get("orientation", "coordinate"), digest_of(doc))


def coefficient_vector(scene: Scene, token: str, point: np.ndarray) -> np.ndarray:
    """Resolve a plane spanner: a vector field name, coordinate name, or index."""
    n = scene.dimension
    if token in scene.vector_fields:
        ctx = scene.metric.context(np.asarray(point, dtype=float)[None, :])
        return scene.vector_fields[token].evaluate(ctx)[:, 0, :]
    if token in scene.coordinates:
        i = scene.coordinates.index(token)
    else:
        try:
            i = int(token)
        except ValueError:
            raise SchemaError("--plane", f"unknown field or coordinate {token!r}") from None
        if not 0 <= i < n:
            raise SchemaError("--plane", f"coordinate index {i} outside [0, {n})")
    v = np.zeros((n, scene.fibers), dtype=complex)
    v[i] = 1.0
    return v
