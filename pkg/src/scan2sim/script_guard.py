"""Static checks and a closed interpreter for model-written insertion scripts.

Scripts use a one-call-per-line language::

    from pxr import Usd
    define_prim("/scene/pillow_new", "Xform")
    set_translate("/scene/pillow_new", (1.0, 2.0, 0.5))

Arguments are literals only (strings, numbers, numeric triples). There are
no variables, expressions or control flow, so an allowlisted callee is the
only way a script can have an effect. :func:`apply_script` accepts only a
:class:`ValidatedProgram`, which only :func:`validate` can create.
"""

from __future__ import annotations

import ast
import copy
import math
import re
from dataclasses import dataclass, field
from typing import Literal, Union

from .errors import PrimExists, TypeMismatch, UnknownPath
from .usd.usda import NAME_RE, PATH_RE, Prim, UsdDocument

DEFAULT_ALLOWLIST = frozenset({"define_prim", "add_reference", "set_translate", "set_scale", "set_attribute"})
SANCTIONED_MODULE = "pxr.Usd"
XFORM_ORDER = ("xformOp:translate", "xformOp:scale")

Reason = Literal["not_allowlisted", "bad_import", "non_literal_arg", "parse_error", "bad_argument"]
Literal_ = Union[str, int, float, tuple]


@dataclass(frozen=True)
class Call:
    line: int
    callee: str
    args: tuple[Literal_, ...]


@dataclass(frozen=True)
class Import:
    line: int
    module: str
    alias: str | None
    # prefix through which calls reach the module: "Usd" for
    # "from pxr import Usd", "pxr.Usd" for "import pxr.Usd"
    qualifier: str


@dataclass(frozen=True)
class Violation:
    line: int
    callee: str | None
    reason: Reason
    detail: str = ""

    def to_dict(self) -> dict:
        return {"line": self.line, "callee": self.callee, "reason": self.reason, "detail": self.detail}


@dataclass(frozen=True)
class ScriptProgram:
    statements: tuple[Call, ...] = ()
    imports: tuple[Import, ...] = ()
    # problems found while parsing; validate() reports them
    parse_violations: tuple[Violation, ...] = ()


# -- parsing -------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[().,])
  | (?P<other>.)
    """,
    re.VERBOSE,
)
_UNTERMINATED = re.compile(r"""["']""")


class _LineError(Exception):
    def __init__(self, reason: Reason, detail: str):
        super().__init__(detail)
        self.reason = reason
        self.detail = detail


def _tokens(text: str) -> list[tuple[str, str]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        kind = m.lastgroup
        value = m.group(kind)
        pos = m.end()
        if kind == "ws":
            continue
        if kind == "other" and _UNTERMINATED.fullmatch(value):
            raise _LineError("parse_error", "unterminated string literal")
        out.append((kind, value))
    return out


def _string_value(raw: str) -> str:
    # the token regex only admits a bare quoted literal, so this cannot evaluate code
    try:
        return ast.literal_eval(raw)
    except (SyntaxError, ValueError) as exc:
        raise _LineError("parse_error", f"bad string literal: {exc}") from exc


def _number_value(raw: str) -> int | float:
    if re.fullmatch(r"[+-]?\d+", raw):
        return int(raw)
    return float(raw)


def _split_args(toks: list[tuple[str, str]]) -> list[list[tuple[str, str]]]:
    """Split on top-level commas; parentheses must balance."""
    groups: list[list[tuple[str, str]]] = [[]]
    depth = 0
    for tok in toks:
        if tok == ("punct", "("):
            depth += 1
        elif tok == ("punct", ")"):
            depth -= 1
            if depth < 0:
                raise _LineError("parse_error", "unbalanced parentheses")
        if tok == ("punct", ",") and depth == 0:
            groups.append([])
        else:
            groups[-1].append(tok)
    if depth != 0:
        raise _LineError("parse_error", "unbalanced parentheses")
    if groups == [[]]:
        return []
    if any(not g for g in groups):
        raise _LineError("parse_error", "empty argument")
    return groups


def _literal(toks: list[tuple[str, str]]) -> Literal_:
    if len(toks) == 1:
        kind, value = toks[0]
        if kind == "string":
            return _string_value(value)
        if kind == "number":
            return _number_value(value)
        raise _LineError("non_literal_arg", f"{value!r} is not a literal")
    if toks[0] == ("punct", "(") and toks[-1] == ("punct", ")"):
        inner = _split_args(toks[1:-1])
        items = []
        for group in inner:
            if len(group) != 1 or group[0][0] != "number":
                raise _LineError("non_literal_arg", "tuples may only hold number literals")
            items.append(_number_value(group[0][1]))
        return tuple(items)
    raise _LineError("non_literal_arg", "argument is an expression, not a literal")


def _parse_import(toks: list[tuple[str, str]], line: int) -> Import:
    words = [v for _, v in toks]
    alias = None
    if "as" in words:
        i = words.index("as")
        if i != len(words) - 2 or toks[-1][0] != "name":
            raise _LineError("parse_error", "malformed import alias")
        alias = words[-1]
        words = words[:i]
    if words[0] == "import" and len(words) >= 2:
        module = "".join(words[1:])
        qualifier = alias or module
    elif words[0] == "from" and len(words) >= 4 and words[-2] == "import":
        module = "".join(words[1:-2]) + "." + words[-1]
        qualifier = alias or words[-1]
    else:
        raise _LineError("parse_error", "malformed import")
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*", module):
        raise _LineError("parse_error", "malformed module name")
    return Import(line, module, alias, qualifier)


def _parse_call(toks: list[tuple[str, str]], line: int) -> Call:
    i = 0
    parts = []
    while True:
        if i >= len(toks) or toks[i][0] != "name":
            raise _LineError("parse_error", "statement is not a call")
        parts.append(toks[i][1])
        i += 1
        if i < len(toks) and toks[i] == ("punct", "."):
            i += 1
            continue
        break
    callee = ".".join(parts)
    if i >= len(toks) or toks[i] != ("punct", "(") or toks[-1] != ("punct", ")"):
        raise _LineError("parse_error", "statement is not a single call")
    args_toks = toks[i + 1 : -1]
    try:
        groups = _split_args(args_toks)
    except _LineError as exc:
        exc.detail = f"{callee}: {exc.detail}"
        raise
    args = []
    for group in groups:
        try:
            args.append(_literal(group))
        except _LineError as exc:
            raise _LineError(exc.reason, f"{callee}: {exc.detail}") from None
    return Call(line, callee, tuple(args))


def parse_script(text: str) -> ScriptProgram:
    """Parse a script. Never raises: problems are recorded per line."""
    statements: list[Call] = []
    imports: list[Import] = []
    problems: list[Violation] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            toks = _tokens(line)
            if toks and toks[0][1] in ("import", "from") and toks[0][0] == "name":
                imports.append(_parse_import(toks, lineno))
            else:
                statements.append(_parse_call(toks, lineno))
        except _LineError as exc:
            callee = None
            m = re.match(r"\s*([A-Za-z_][A-Za-z0-9_.]*)\s*\(", line)
            if m:
                callee = m.group(1)
            problems.append(Violation(lineno, callee, exc.reason, exc.detail))
    return ScriptProgram(tuple(statements), tuple(imports), tuple(problems))


# -- validation ----------------------------------------------------------------

_WITNESS = object()


class ValidatedProgram:
    """A program that passed :func:`validate`. Not constructible elsewhere."""

    __slots__ = ("program", "allowlist")

    def __init__(self, program: ScriptProgram, allowlist: frozenset[str], _token: object = None):
        if _token is not _WITNESS:
            raise TypeError("ValidatedProgram can only be produced by validate()")
        self.program = program
        self.allowlist = allowlist

    @property
    def statements(self) -> tuple[Call, ...]:
        return self.program.statements


@dataclass(frozen=True)
class GuardReport:
    verdict: Literal["allowed", "rejected"]
    violations: tuple[Violation, ...] = ()
    program: ValidatedProgram | None = field(default=None, compare=False, repr=False)

    @property
    def allowed(self) -> bool:
        return self.verdict == "allowed"

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "violations": [v.to_dict() for v in self.violations]}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_triple(v) -> bool:
    return isinstance(v, tuple) and len(v) == 3 and all(_is_number(c) for c in v)


_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.-]*:")
_ATTR_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(:[A-Za-z_][A-Za-z0-9_]*)*$")
_RESERVED_ATTRS = re.compile(r"^xformOp")


def _check_path(path, scope: str | None) -> str | None:
    if not isinstance(path, str) or not PATH_RE.match(path):
        return f"{path!r} is not an absolute prim path"
    if scope is not None and path != scope and not path.startswith(scope + "/"):
        return f"{path!r} escapes the permitted scope {scope!r}"
    return None


def _check_args(call: Call, callee: str, scope: str | None, assets: frozenset[str] | None) -> str | None:
    """Signature checks for the built-in operations; None when fine."""
    args = call.args
    arity = {"define_prim": 2, "add_reference": 2, "set_translate": 2, "set_scale": 2, "set_attribute": 3}
    if callee not in arity:
        return None
    if len(args) != arity[callee]:
        return f"{callee} takes {arity[callee]} arguments, got {len(args)}"
    problem = _check_path(args[0], scope)
    if problem:
        return problem
    if callee == "define_prim":
        if not isinstance(args[1], str) or not NAME_RE.match(args[1]):
            return "prim type must be an identifier string"
    elif callee == "add_reference":
        asset = args[1]
        if not isinstance(asset, str) or not asset or "@" in asset or any(ord(c) < 32 for c in asset):
            return "asset path must be a plain nonempty string"
        if _SCHEME.match(asset) and not re.match(r"^[A-Za-z]:[\\/]", asset):
            return f"asset path {asset!r} uses a URL scheme"
        if ".." in re.split(r"[\\/]", asset):
            return f"asset path {asset!r} climbs out of its directory"
        if assets is not None and asset not in assets:
            return f"asset path {asset!r} is not the asset being inserted"
    elif callee == "set_translate":
        if not _is_triple(args[1]):
            return "translate must be a triple of finite numbers"
    elif callee == "set_scale":
        if not _is_triple(args[1]) or not all(c > 0 for c in args[1]):
            return "scale must be a triple of positive finite numbers"
    elif callee == "set_attribute":
        name, value = args[1], args[2]
        if not isinstance(name, str) or not _ATTR_NAME.match(name):
            return "attribute name must be an identifier, optionally namespaced with ':'"
        if _RESERVED_ATTRS.match(name):
            return f"attribute {name!r} is reserved for transform operations"
        if not (isinstance(value, str) or _is_number(value) or _is_triple(value)):
            return "attribute value must be a string, a finite number or a numeric triple"
    return None


def validate(
    program: ScriptProgram,
    allowlist=DEFAULT_ALLOWLIST,
    sanctioned_module: str = SANCTIONED_MODULE,
    scope: str | None = None,
    assets=None,
) -> GuardReport:
    """Check callees, imports and arguments.

    Allowed iff every callee is allowlisted, there is at most one import and
    it names ``sanctioned_module`` exactly without an alias, and every
    argument is a well-typed literal. With ``scope`` every prim path must lie
    at or below that path; with ``assets`` every referenced asset must be one
    of those paths.
    """
    allow = frozenset(allowlist)
    pinned = frozenset(assets) if assets is not None else None
    violations = list(program.parse_violations)
    qualifier = None
    for k, imp in enumerate(program.imports):
        if k > 0:
            violations.append(Violation(imp.line, None, "bad_import", "only one import is permitted"))
        elif imp.module != sanctioned_module:
            violations.append(Violation(imp.line, None, "bad_import", f"module {imp.module!r} is not {sanctioned_module!r}"))
        elif imp.alias is not None:
            violations.append(Violation(imp.line, None, "bad_import", "aliased imports are not permitted"))
        else:
            qualifier = imp.qualifier

    def unqualified(callee: str) -> str:
        if qualifier is not None and callee.startswith(qualifier + "."):
            return callee[len(qualifier) + 1 :]
        return callee

    for call in program.statements:
        callee = unqualified(call.callee)
        if callee not in allow:
            violations.append(Violation(call.line, call.callee, "not_allowlisted", f"{call.callee!r} is not allowlisted"))
            continue
        problem = _check_args(call, callee, scope, pinned)
        if problem:
            violations.append(Violation(call.line, call.callee, "bad_argument", problem))

    violations.sort(key=lambda v: (v.line, v.reason))
    if violations:
        return GuardReport("rejected", tuple(violations))
    normalized = ScriptProgram(tuple(Call(c.line, unqualified(c.callee), c.args) for c in program.statements), program.imports)
    return GuardReport("allowed", (), ValidatedProgram(normalized, allow, _WITNESS))


def check_script(text: str, **kwargs) -> GuardReport:
    return validate(parse_script(text), **kwargs)


# -- interpretation ------------------------------------------------------------


def _split_path(path: str) -> tuple[str, str]:
    parent, _, name = path.rpartition("/")
    return parent or "/", name


def _define_prim(doc: UsdDocument, path: str, type_name: str) -> None:
    parent_path, name = _split_path(path)
    parent = doc.prim_at(parent_path)
    if parent.child(name) is not None:
        raise PrimExists(f"prim {path!r} already exists")
    parent.add_child(Prim(name=name, type_name=type_name))


def _add_reference(doc: UsdDocument, path: str, asset: str) -> None:
    doc.prim_at(path).references = asset


def _set_typed(prim: Prim, name: str, type_name: str, value, *, uniform: bool = False) -> None:
    existing = prim.attributes.get(name)
    if existing is not None and existing.type_name != type_name:
        raise TypeMismatch(f"attribute {name!r} has type {existing.type_name}, not {type_name}")
    prim.set(name, type_name, value, uniform=uniform)


def _set_xform(doc: UsdDocument, path: str, op: str, type_name: str, value) -> None:
    prim = doc.prim_at(path)
    _set_typed(prim, op, type_name, [float(c) for c in value])
    present = [o for o in XFORM_ORDER if o in prim.attributes]
    _set_typed(prim, "xformOpOrder", "token[]", present, uniform=True)


def _set_attribute(doc: UsdDocument, path: str, name: str, value) -> None:
    prim = doc.prim_at(path)
    existing = prim.attributes.get(name)
    if isinstance(value, str):
        type_name = "token" if existing is not None and existing.type_name == "token" else "string"
    elif isinstance(value, tuple):
        type_name = existing.type_name if existing is not None and existing.type_name in ("float3", "double3") else "double3"
    elif isinstance(value, int):
        type_name = existing.type_name if existing is not None and existing.type_name in ("float", "double") else "int"
    else:
        type_name = existing.type_name if existing is not None and existing.type_name == "float" else "double"
    _set_typed(prim, name, type_name, value)


_OPERATIONS = {
    "define_prim": _define_prim,
    "add_reference": _add_reference,
    "set_translate": lambda doc, path, v: _set_xform(doc, path, "xformOp:translate", "double3", v),
    "set_scale": lambda doc, path, v: _set_xform(doc, path, "xformOp:scale", "float3", v),
    "set_attribute": _set_attribute,
}


def apply_script(doc: UsdDocument, program: ValidatedProgram) -> UsdDocument:
    """Run a validated program on a copy of ``doc``.

    All-or-nothing: any failure raises and the input document is untouched.
    Allowlisted names without a built-in implementation fail here.
    """
    if not isinstance(program, ValidatedProgram):
        raise TypeError("apply_script needs a ValidatedProgram; call validate() first")
    out = copy.deepcopy(doc)
    for call in program.statements:
        op = _OPERATIONS.get(call.callee)
        if op is None:
            raise UnknownPath(f"line {call.line}: operation {call.callee!r} has no implementation")
        op(out, *call.args)
    return out
