"""Reader and writer for the subset of text USD (``.usda``) used by the pipelines.

Supported: ``def``/``over`` prims with optional type name, a single
``references = @asset@`` prim metadata entry, typed attributes (optionally
``uniform``), relationships with at most one target, and the layer metadata
keys ``upAxis``, ``metersPerUnit`` and ``defaultPrim``.

Anything else (variants, payloads, inherits, time samples, attribute
metadata, connections) raises :class:`UnsupportedConstruct` rather than being
dropped.

Output is canonical: 4-space indentation, properties sorted by name, children
in stored order, floats printed with the shortest round-tripping repr.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterator

from ..errors import LexError, PrimExists, UnknownPath, UnsupportedConstruct, UsdaSyntaxError

HEADER = "#usda 1.0"

SCALAR_TYPES = ("bool", "int", "float", "double", "string", "token")
TUPLE_TYPES = {"double2": 2, "float3": 3, "double3": 3}
ARRAY_TYPES = ("int[]", "token[]", "float3[]", "point3f[]")
VALUE_TYPES = frozenset(SCALAR_TYPES) | frozenset(TUPLE_TYPES) | frozenset(ARRAY_TYPES) | {"matrix4d"}

NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
PROPERTY_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(:[A-Za-z_][A-Za-z0-9_]*)*$")
PATH_RE = re.compile(r"^(/[A-Za-z_][A-Za-z0-9_]*)+$")

_REJECTED_KEYWORDS = {
    "variantSet": "variantSet",
    "variantSets": "variantSets",
    "variants": "variants",
    "payload": "payload",
    "inherits": "inherits",
    "specializes": "specializes",
    "subLayers": "subLayers",
    "class": "class",
    "custom": "custom",
    "varying": "varying",
    "prepend": "prepend",
    "append": "append",
    "add": "add",
    "delete": "delete",
    "reorder": "reorder",
}


# -- data model ----------------------------------------------------------------


def _as_float(v: Any) -> float:
    if isinstance(v, (bool, str, bytes)) or not hasattr(v, "__float__"):
        raise TypeError(f"expected a number, got {v!r}")
    return float(v)


def _as_tuple(v: Any, n: int) -> tuple[float, ...]:
    items = tuple(_as_float(x) for x in v)
    if len(items) != n:
        raise TypeError(f"expected {n} components, got {len(items)}")
    return items


def coerce_value(type_name: str, value: Any) -> Any:
    """Normalise a Python value into the canonical immutable form for ``type_name``."""
    if value is None:
        return None
    if type_name == "bool":
        if not isinstance(value, bool):
            raise TypeError(f"bool attribute needs True/False, got {value!r}")
        return value
    if type_name == "int":
        if isinstance(value, bool) or int(value) != value:
            raise TypeError(f"int attribute needs an integer, got {value!r}")
        return int(value)
    if type_name in ("float", "double"):
        return _as_float(value)
    if type_name in ("string", "token"):
        if not isinstance(value, str):
            raise TypeError(f"{type_name} attribute needs a str, got {value!r}")
        return value
    if type_name in TUPLE_TYPES:
        return _as_tuple(value, TUPLE_TYPES[type_name])
    if type_name == "matrix4d":
        rows = tuple(_as_tuple(r, 4) for r in value)
        if len(rows) != 4:
            raise TypeError("matrix4d needs 4 rows")
        return rows
    if type_name == "int[]":
        out = []
        for v in value:
            if isinstance(v, bool) or int(v) != v:
                raise TypeError(f"int[] element {v!r} is not an integer")
            out.append(int(v))
        return tuple(out)
    if type_name == "token[]":
        if not all(isinstance(v, str) for v in value):
            raise TypeError("token[] elements must be str")
        return tuple(value)
    if type_name in ("float3[]", "point3f[]"):
        return tuple(_as_tuple(p, 3) for p in value)
    raise TypeError(f"unsupported attribute type {type_name!r}")


@dataclass(frozen=True)
class TypedValue:
    type_name: str
    value: Any = None
    uniform: bool = False

    def __post_init__(self) -> None:
        if self.type_name not in VALUE_TYPES:
            raise TypeError(f"unsupported attribute type {self.type_name!r}")
        object.__setattr__(self, "value", coerce_value(self.type_name, self.value))


@dataclass
class Prim:
    name: str
    type_name: str = ""
    attributes: dict[str, TypedValue] = field(default_factory=dict)
    children: list["Prim"] = field(default_factory=list)
    references: str | None = None
    relationships: dict[str, str | None] = field(default_factory=dict)
    specifier: str = "def"

    def child(self, name: str) -> "Prim | None":
        for c in self.children:
            if c.name == name:
                return c
        return None

    def add_child(self, prim: "Prim") -> "Prim":
        if not NAME_RE.match(prim.name):
            raise ValueError(f"invalid prim name {prim.name!r}")
        if self.child(prim.name) is not None:
            raise PrimExists(f"prim {prim.name!r} already exists under {self.name or '/'}")
        self.children.append(prim)
        return prim

    def set(self, name: str, type_name: str, value: Any = None, *, uniform: bool = False) -> None:
        self.attributes[name] = TypedValue(type_name, value, uniform)

    def get(self, name: str, default: Any = None) -> Any:
        attr = self.attributes.get(name)
        return default if attr is None else attr.value

    def walk(self, prefix: str = "") -> Iterator[tuple[str, "Prim"]]:
        """Yield ``(path, prim)`` for every descendant, depth first."""
        for c in self.children:
            path = f"{prefix}/{c.name}"
            yield path, c
            yield from c.walk(path)


@dataclass
class UsdDocument:
    root: Prim = field(default_factory=lambda: Prim(name=""))
    layer_metadata: dict[str, Any] = field(default_factory=lambda: {"upAxis": "Z", "metersPerUnit": 1.0})

    def __post_init__(self) -> None:
        meta = {"upAxis": "Z", "metersPerUnit": 1.0}
        meta.update(self.layer_metadata)
        if meta["upAxis"] != "Z" or float(meta["metersPerUnit"]) != 1.0:
            raise ValueError("documents are always z-up with metersPerUnit = 1")
        meta["metersPerUnit"] = float(meta["metersPerUnit"])
        self.layer_metadata = meta

    @property
    def default_prim(self) -> str | None:
        return self.layer_metadata.get("defaultPrim")

    def prim_at(self, path: str) -> Prim:
        if path == "/":
            return self.root
        if not PATH_RE.match(path):
            raise UnknownPath(f"malformed prim path {path!r}")
        prim = self.root
        for part in path.strip("/").split("/"):
            nxt = prim.child(part)
            if nxt is None:
                raise UnknownPath(f"no prim at {path!r}")
            prim = nxt
        return prim

    def has_prim(self, path: str) -> bool:
        try:
            self.prim_at(path)
        except UnknownPath:
            return False
        return True

    def walk(self) -> Iterator[tuple[str, Prim]]:
        return self.root.walk()


# -- lexer ---------------------------------------------------------------------


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, asset, path, punct, eof
    text: str
    line: int
    col: int


_PUNCT = set("(){}[]=,")
_NUMBER_RE = re.compile(r"[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_:]*")


def _tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, line_start = 0, 1, 0
    n = len(text)
    while i < n:
        ch = text[i]
        col = i - line_start + 1
        if ch == "\n":
            line += 1
            line_start = i + 1
            i += 1
        elif ch in " \t\r":
            i += 1
        elif ch == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            tokens.append(Token("punct", ch, line, col))
            i += 1
        elif ch == '"':
            if text.startswith('"""', i):
                raise UnsupportedConstruct("triple-quoted string", line)
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    j += 1
                if j < n and text[j] == "\n":
                    raise LexError("newline inside string literal", line, col)
                j += 1
            if j >= n:
                raise LexError("unterminated string literal", line, col)
            try:
                value = json.loads(text[i : j + 1])
            except json.JSONDecodeError:
                raise LexError("invalid escape in string literal", line, col) from None
            tokens.append(Token("string", value, line, col))
            i = j + 1
        elif ch == "." and text.startswith((".timeSamples", ".connect"), i):
            raise UnsupportedConstruct(text[i + 1 : i + 12].rstrip(" ="), line)
        elif ch == "'":
            raise UnsupportedConstruct("single-quoted string", line)
        elif ch == "@":
            j = text.find("@", i + 1)
            if j < 0 or "\n" in text[i:j]:
                raise LexError("unterminated asset path", line, col)
            tokens.append(Token("asset", text[i + 1 : j], line, col))
            i = j + 1
        elif ch == "<":
            j = text.find(">", i + 1)
            if j < 0 or "\n" in text[i:j]:
                raise LexError("unterminated path literal", line, col)
            tokens.append(Token("path", text[i + 1 : j], line, col))
            i = j + 1
        elif ch.isdigit() or ch in "-+." and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == "."):
            m = _NUMBER_RE.match(text, i)
            if not m:
                raise LexError("malformed number", line, col)
            tokens.append(Token("number", m.group(0), line, col))
            i = m.end()
        elif ch.isalpha() or ch == "_":
            m = _IDENT_RE.match(text, i)
            tokens.append(Token("ident", m.group(0), line, col))
            i = m.end()
        else:
            raise LexError(f"unexpected character {ch!r}", line, col)
    tokens.append(Token("eof", "", line, i - line_start + 1))
    return tokens


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> UsdaSyntaxError:
        tok = tok or self.tok
        return UsdaSyntaxError(message, tok.line, tok.col)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text if tok.kind != "eof" else "end of file"
            raise self.error(f"expected {want!r}, got {got!r}")
        return self.advance()

    def at(self, kind: str, text: str | None = None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def reject_keyword(self) -> None:
        if self.tok.kind == "ident" and self.tok.text in _REJECTED_KEYWORDS:
            raise UnsupportedConstruct(_REJECTED_KEYWORDS[self.tok.text], self.tok.line)

    # document ---------------------------------------------------------------

    def document(self) -> UsdDocument:
        meta: dict[str, Any] = {}
        if self.at("punct", "("):
            meta = self.layer_metadata()
        root = Prim(name="")
        while not self.at("eof"):
            tok = self.tok
            self._add(root, self.prim(), tok)
        try:
            return UsdDocument(root=root, layer_metadata=meta)
        except ValueError as exc:
            raise UnsupportedConstruct(str(exc)) from None

    def _add(self, parent: Prim, prim: Prim, tok: Token | None = None) -> None:
        if parent.child(prim.name) is not None:
            raise self.error(f"duplicate prim name {prim.name!r}", tok or self.tokens[self.pos - 1])
        parent.children.append(prim)

    def layer_metadata(self) -> dict[str, Any]:
        self.expect("punct", "(")
        meta: dict[str, Any] = {}
        while not self.at("punct", ")"):
            self.reject_keyword()
            key = self.expect("ident")
            self.expect("punct", "=")
            if key.text == "upAxis":
                meta["upAxis"] = self.expect("string").text
                if meta["upAxis"] != "Z":
                    raise UnsupportedConstruct(f'upAxis = "{meta["upAxis"]}"', key.line)
            elif key.text == "metersPerUnit":
                meta["metersPerUnit"] = float(self.expect("number").text)
                if meta["metersPerUnit"] != 1.0:
                    raise UnsupportedConstruct(f"metersPerUnit = {meta['metersPerUnit']:g}", key.line)
            elif key.text == "defaultPrim":
                meta["defaultPrim"] = self.expect("string").text
            else:
                raise UnsupportedConstruct(f"layer metadata {key.text!r}", key.line)
        self.expect("punct", ")")
        return meta

    def prim(self) -> Prim:
        self.reject_keyword()
        start = self.tok
        if not (self.at("ident", "def") or self.at("ident", "over")):
            raise self.error(f"expected 'def' or 'over', got {start.text or 'end of file'!r}")
        specifier = self.advance().text
        type_name = ""
        if self.at("ident"):
            self.reject_keyword()
            type_name = self.advance().text
        name_tok = self.expect("string")
        if not NAME_RE.match(name_tok.text):
            raise self.error(f"invalid prim name {name_tok.text!r}", name_tok)
        prim = Prim(name=name_tok.text, type_name=type_name, specifier=specifier)
        if self.at("punct", "("):
            self.prim_metadata(prim)
        self.expect("punct", "{")
        props: set[str] = set()
        while not self.at("punct", "}"):
            if self.at("eof"):
                raise self.error(f"unterminated prim {prim.name!r}")
            self.reject_keyword()
            if self.at("ident", "def") or self.at("ident", "over"):
                tok = self.tok
                self._add(prim, self.prim(), tok)
                continue
            tok = self.tok
            name = self.property(prim)
            if name in props:
                raise self.error(f"duplicate property {name!r}", tok)
            props.add(name)
        self.expect("punct", "}")
        return prim

    def prim_metadata(self, prim: Prim) -> None:
        self.expect("punct", "(")
        while not self.at("punct", ")"):
            self.reject_keyword()
            key = self.expect("ident")
            if key.text != "references":
                raise UnsupportedConstruct(f"prim metadata {key.text!r}", key.line)
            if prim.references is not None:
                raise self.error("references given twice", key)
            self.expect("punct", "=")
            if self.at("punct", "["):
                raise UnsupportedConstruct("reference list", key.line)
            prim.references = self.expect("asset").text
            if self.at("path"):
                raise UnsupportedConstruct("reference with target prim path", key.line)
        self.expect("punct", ")")

    def property(self, prim: Prim) -> str:
        uniform = False
        if self.at("ident", "uniform"):
            self.advance()
            uniform = True
        type_tok = self.expect("ident")
        if type_tok.text == "rel":
            if uniform:
                raise self.error("relationships cannot be uniform", type_tok)
            name = self.expect("ident")
            if not PROPERTY_RE.match(name.text):
                raise self.error(f"invalid property name {name.text!r}", name)
            target = None
            if self.at("punct", "="):
                self.advance()
                if self.at("punct", "["):
                    raise UnsupportedConstruct("relationship with multiple targets", name.line)
                target = self.expect("path").text
            if self.at("punct", "("):
                raise UnsupportedConstruct("property metadata", name.line)
            prim.relationships[name.text] = target
            return name.text
        type_name = type_tok.text
        if self.at("punct", "["):
            self.advance()
            self.expect("punct", "]")
            type_name += "[]"
        if type_name not in VALUE_TYPES:
            raise UnsupportedConstruct(f"attribute type {type_name}", type_tok.line)
        name = self.expect("ident")
        if not PROPERTY_RE.match(name.text):
            raise self.error(f"invalid property name {name.text!r}", name)
        value = None
        if self.at("punct", "="):
            self.advance()
            value = self.value(type_name)
        if self.at("punct", "("):
            raise UnsupportedConstruct("property metadata", name.line)
        try:
            prim.attributes[name.text] = TypedValue(type_name, value, uniform)
        except (TypeError, ValueError) as exc:
            raise self.error(str(exc), name) from None
        return name.text

    # values -----------------------------------------------------------------

    def number(self) -> float:
        tok = self.expect("number")
        return float(tok.text)

    def integer(self) -> int:
        tok = self.expect("number")
        try:
            return int(tok.text)
        except ValueError:
            raise self.error(f"expected integer, got {tok.text!r}", tok) from None

    def tuple_of(self, n: int) -> tuple[float, ...]:
        self.expect("punct", "(")
        items = [self.number()]
        for _ in range(n - 1):
            self.expect("punct", ",")
            items.append(self.number())
        self.expect("punct", ")")
        return tuple(items)

    def list_of(self, item) -> list:
        self.expect("punct", "[")
        items = []
        while not self.at("punct", "]"):
            items.append(item())
            if not self.at("punct", "]"):
                self.expect("punct", ",")
        self.expect("punct", "]")
        return items

    def value(self, type_name: str) -> Any:
        if type_name == "bool":
            tok = self.advance()
            if tok.text in ("true", "1"):
                return True
            if tok.text in ("false", "0"):
                return False
            raise self.error(f"expected bool, got {tok.text!r}", tok)
        if type_name == "int":
            return self.integer()
        if type_name in ("float", "double"):
            return self.number()
        if type_name in ("string", "token"):
            return self.expect("string").text
        if type_name in TUPLE_TYPES:
            return self.tuple_of(TUPLE_TYPES[type_name])
        if type_name == "matrix4d":
            self.expect("punct", "(")
            rows = [self.tuple_of(4)]
            for _ in range(3):
                self.expect("punct", ",")
                rows.append(self.tuple_of(4))
            self.expect("punct", ")")
            return tuple(rows)
        if type_name == "int[]":
            return self.list_of(self.integer)
        if type_name == "token[]":
            return self.list_of(lambda: self.expect("string").text)
        return self.list_of(lambda: self.tuple_of(3))


def parse_usda(text: str) -> UsdDocument:
    """Parse USDA text; raises on anything outside the supported subset."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    first, _, rest = text.partition("\n")
    if first.rstrip("\r") != HEADER:
        raise UsdaSyntaxError(f"first line must be exactly {HEADER!r}", 1, 1)
    tokens = _tokenize("\n" + rest)
    return _Parser(tokens).document()


# -- emitter -------------------------------------------------------------------


def format_float(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {v!r} cannot be written")
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _fmt_tuple(t) -> str:
    return "(" + ", ".join(format_float(x) for x in t) + ")"


def format_value(type_name: str, value: Any) -> str:
    if type_name == "bool":
        return "true" if value else "false"
    if type_name == "int":
        return str(value)
    if type_name in ("float", "double"):
        return format_float(value)
    if type_name in ("string", "token"):
        return json.dumps(value, ensure_ascii=False)
    if type_name in TUPLE_TYPES:
        return _fmt_tuple(value)
    if type_name == "matrix4d":
        return "(" + ", ".join(_fmt_tuple(r) for r in value) + ")"
    if type_name == "int[]":
        return "[" + ", ".join(str(v) for v in value) + "]"
    if type_name == "token[]":
        return "[" + ", ".join(json.dumps(v, ensure_ascii=False) for v in value) + "]"
    return "[" + ", ".join(_fmt_tuple(p) for p in value) + "]"


def _emit_prim(prim: Prim, depth: int, out: list[str]) -> None:
    pad = "    " * depth
    head = f"{pad}{prim.specifier}"
    if prim.type_name:
        head += f" {prim.type_name}"
    head += f' "{prim.name}"'
    if prim.references is not None:
        out.append(head + " (")
        out.append(f"{pad}    references = @{prim.references}@")
        out.append(f"{pad})")
    else:
        out.append(head)
    out.append(pad + "{")
    props: list[tuple[str, str]] = []
    for name, attr in prim.attributes.items():
        line = ("uniform " if attr.uniform else "") + f"{attr.type_name} {name}"
        if attr.value is not None:
            line += " = " + format_value(attr.type_name, attr.value)
        props.append((name, line))
    for name, target in prim.relationships.items():
        line = f"rel {name}" + (f" = <{target}>" if target is not None else "")
        props.append((name, line))
    for _, line in sorted(props):
        out.append(f"{pad}    {line}")
    for i, child in enumerate(prim.children):
        if i or props:
            out.append("")
        _emit_prim(child, depth + 1, out)
    out.append(pad + "}")


def emit_usda(doc: UsdDocument) -> str:
    """Serialise deterministically; ``parse_usda(emit_usda(d)) == d``."""
    meta = doc.layer_metadata
    out = [HEADER, "(", '    upAxis = "Z"', f"    metersPerUnit = {format_float(meta['metersPerUnit'])}"]
    if meta.get("defaultPrim") is not None:
        out.append(f"    defaultPrim = {json.dumps(meta['defaultPrim'], ensure_ascii=False)}")
    out.append(")")
    for child in doc.root.children:
        out.append("")
        _emit_prim(child, 0, out)
    return "\n".join(out) + "\n"


def canonical_usda(text: str) -> str:
    return emit_usda(parse_usda(text))
