"""The three structured queries the insertion pipeline asks the model."""

from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Literal

from ..errors import InvalidAnswer, UsdaError
from ..usd.usda import parse_usda
from .backend import Backend, LlmRequest

log = logging.getLogger(__name__)

MAX_REPROMPTS = 2
SCALE_MIN, SCALE_MAX = 0.01, 100.0
SurfaceConstraint = Literal["horizontal", "vertical"]

_JSON_OBJECT = re.compile(r"\{.*\}", re.DOTALL)


@dataclass(frozen=True)
class PlacementAnswer:
    target_id: str
    surface_constraint: SurfaceConstraint

    def __post_init__(self) -> None:
        if not self.target_id:
            raise ValueError("target_id must be nonempty")
        if self.surface_constraint not in ("horizontal", "vertical"):
            raise ValueError(f"bad surface constraint {self.surface_constraint!r}")


@dataclass(frozen=True)
class ScaleAnswer:
    scale: float
    raw: float
    warnings: tuple[str, ...] = ()


@lru_cache(maxsize=None)
def load_template(name: str) -> dict:
    text = resources.files("scan2sim.llm").joinpath(f"templates/{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def build_request(template_name: str, context: dict, **fields) -> LlmRequest:
    tpl = load_template(template_name)
    return LlmRequest(
        system_instruction=tpl["system_instruction"],
        few_shot=tuple(tuple(p) for p in tpl["few_shot"]),
        user_message=tpl["user_template"].format(**fields),
        response_schema=tpl["response_schema"],
        context=context,
    )


def reprompt(request: LlmRequest, answer: str, problem: str) -> LlmRequest:
    """Follow-up that shows the model its rejected answer and why."""
    context = dict(request.context, attempt=request.context.get("attempt", 0) + 1)
    return LlmRequest(
        system_instruction=request.system_instruction,
        few_shot=request.few_shot + ((request.user_message, answer),),
        user_message=f"Your previous answer was rejected: {problem}. Answer the original question again, following the required format.",
        response_schema=request.response_schema,
        context=context,
    )


def parse_json_answer(text: str) -> dict:
    """First JSON object in ``text``; tolerates code fences and chatter around it."""
    match = _JSON_OBJECT.search(text)
    if match is None:
        raise InvalidAnswer("answer contains no JSON object")
    try:
        value = json.loads(match.group(0))
    except json.JSONDecodeError as exc:
        raise InvalidAnswer(f"answer is not valid JSON: {exc.msg}") from exc
    if not isinstance(value, dict):
        raise InvalidAnswer("answer is not a JSON object")
    return value


def _ask(backend: Backend, request: LlmRequest, check, max_reprompts: int = MAX_REPROMPTS):
    problems = []
    for _ in range(max_reprompts + 1):
        answer = backend.complete(request)
        try:
            return check(answer)
        except InvalidAnswer as exc:
            problems.append(str(exc))
            log.info("rejected model answer (%s)", exc)
            request = reprompt(request, answer, str(exc))
    raise InvalidAnswer(f"no valid answer after {max_reprompts} reprompts: " + "; ".join(problems))


def query_placement(backend: Backend, descriptive_usd_text: str, object_label: str, max_reprompts: int = MAX_REPROMPTS) -> PlacementAnswer:
    """Ask which prim the object should go on, and what surface it needs.

    The answer is only accepted if it names a prim that exists in the
    document, so the model cannot invent targets.
    """
    try:
        doc = parse_usda(descriptive_usd_text)
    except UsdaError as exc:
        raise ValueError(f"descriptive document does not parse: {exc}") from exc
    if not object_label:
        raise ValueError("object label must be nonempty")
    names = {prim.name for _, prim in doc.walk()}

    def check(answer: str) -> PlacementAnswer:
        data = parse_json_answer(answer)
        target = data.get("target_id")
        surface = data.get("surface", data.get("surface_constraint"))
        if not isinstance(target, str) or not target:
            raise InvalidAnswer("target_id missing or not a string")
        if surface not in ("horizontal", "vertical"):
            raise InvalidAnswer(f"surface must be 'horizontal' or 'vertical', got {surface!r}")
        if target not in names:
            raise InvalidAnswer(f"target_id {target!r} is not a prim in the scene")
        return PlacementAnswer(target, surface)

    request = build_request(
        "placement",
        {"object_label": object_label},
        scene=descriptive_usd_text.rstrip("\n"),
        label=object_label,
    )
    return _ask(backend, request, check, max_reprompts)


def clamp_scale(value: float) -> tuple[float, tuple[str, ...]]:
    if value < SCALE_MIN or value > SCALE_MAX:
        clamped = min(max(value, SCALE_MIN), SCALE_MAX)
        return clamped, (f"scale {value!r} clamped to {clamped!r}",)
    return value, ()


def query_scale(backend: Backend, object_label: str, object_extent, max_reprompts: int = MAX_REPROMPTS) -> ScaleAnswer:
    """Ask for a uniform factor that gives the object a realistic size."""
    extent = tuple(float(e) for e in object_extent)
    if len(extent) != 3 or not all(e > 0 and math.isfinite(e) for e in extent):
        raise ValueError(f"object extent must be three positive numbers, got {object_extent!r}")

    def check(answer: str) -> ScaleAnswer:
        value = parse_json_answer(answer).get("scale")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidAnswer("scale missing or not a number")
        value = float(value)
        if not math.isfinite(value) or value <= 0:
            raise InvalidAnswer(f"scale must be a positive finite number, got {value!r}")
        scale, warnings = clamp_scale(value)
        for w in warnings:
            log.warning(w)
        return ScaleAnswer(scale, value, warnings)

    request = build_request(
        "scale",
        {"object_label": object_label, "extent": list(extent)},
        label=object_label,
        ex=f"{extent[0]:g}",
        ey=f"{extent[1]:g}",
        ez=f"{extent[2]:g}",
    )
    return _ask(backend, request, check, max_reprompts)


def query_script(backend: Backend, context: dict) -> str:
    """Ask for the insertion script. The text is returned untouched; the
    guard decides whether it may run."""
    required = ("scene_usd_path", "object_label", "object_path", "prim_path", "position", "scale")
    missing = [k for k in required if k not in context]
    if missing:
        raise ValueError(f"script context is missing {missing}")
    if not context["scene_usd_path"]:
        raise ValueError("scene_usd_path must be nonempty")
    position = [float(c) for c in context["position"]]
    scale = float(context["scale"])
    if len(position) != 3 or not all(math.isfinite(c) for c in position):
        raise ValueError("position must be three finite numbers")
    if not SCALE_MIN <= scale <= SCALE_MAX:
        raise ValueError(f"scale {scale!r} outside [{SCALE_MIN}, {SCALE_MAX}]")
    tx, ty, tz = position
    fields = dict(context, tx=tx, ty=ty, tz=tz, scale=scale)
    ctx = {k: v for k, v in fields.items() if k != "position"}
    request = build_request("script", ctx, **fields)
    return backend.complete(request)
