"""Prototype-trajectory explanations and report rendering.

An explanation lists, for each sentence of a document, the nearest
prototype, its similarity, and that prototype's sentiment score, together
with the model's prediction. The prototype sequence is read from the very
forward pass that produced the prediction, so explanation and prediction
can never diverge.

Reports render to JSON (schema below), a markdown table, or a
self-contained SVG trajectory plot of prototype sentiment (y in [0, 1])
against sentence position (x in [1, T]) with a 0.5 reference line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embedding import embed_document
from .errors import ConfigError, DataError
from .ingest import Document
from .model import ModelState, forward_document

REPORT_VERSION = 1
REPORT_FORMATS = ("json", "markdown", "svg")

SVG_WIDTH = 640
SVG_HEIGHT = 320
SVG_MARGIN = 40


@dataclass(frozen=True)
class TrajectoryStep:
    t: int
    sentence: str
    prototype_index: int
    prototype_text: str
    similarity: float
    prototype_sentiment: float


@dataclass(frozen=True)
class Explanation:
    doc_id: str
    prediction: tuple[float, ...]
    predicted_class: int
    steps: tuple[TrajectoryStep, ...]


def explain_document(model: ModelState, doc: Document, provider) -> Explanation:
    """Trace a document through the model and record its prototype path."""
    if model.prototypes.texts is None or model.prototypes.sentiment_scores is None:
        raise DataError("model lacks projected prototypes with sentiment scores")
    E = embed_document(doc, provider)
    layer_cache, net_cache = forward_document(model, E)
    scores = model.prototypes.sentiment_scores
    steps = []
    for t in range(E.shape[0]):
        k = int(layer_cache.argmax[t])
        steps.append(
            TrajectoryStep(
                t=t + 1,
                sentence=doc.sentences[t],
                prototype_index=k,
                prototype_text=model.prototypes.texts[k],
                similarity=float(layer_cache.dense[t, k]),
                prototype_sentiment=float(scores[k]),
            )
        )
    y_hat = net_cache.y_hat
    return Explanation(
        doc_id=doc.source_id,
        prediction=tuple(float(v) for v in y_hat),
        predicted_class=int(np.argmax(y_hat)),
        steps=tuple(steps),
    )


def _to_json(exp: Explanation) -> bytes:
    payload = {
        "version": REPORT_VERSION,
        "doc_id": exp.doc_id,
        "prediction": list(exp.prediction),
        "predicted_class": exp.predicted_class,
        "steps": [
            {
                "t": step.t,
                "sentence": step.sentence,
                "prototype_index": step.prototype_index,
                "prototype_text": step.prototype_text,
                "similarity": step.similarity,
                "prototype_sentiment": step.prototype_sentiment,
            }
            for step in exp.steps
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True).encode("utf-8")


def _md_escape(text: str) -> str:
    return text.replace("|", "\\|")


def _to_markdown(exp: Explanation) -> bytes:
    lines = [
        f"# Trajectory for document {exp.doc_id or '(unnamed)'}",
        "",
        f"Predicted class: **{exp.predicted_class}**",
        f"Prediction: {', '.join(f'{v:.6f}' for v in exp.prediction)}",
        "",
        "| t | sentence | prototype | similarity | sentiment |",
        "| --- | --- | --- | --- | --- |",
    ]
    for step in exp.steps:
        lines.append(
            f"| {step.t} | {_md_escape(step.sentence)} "
            f"| [{step.prototype_index}] {_md_escape(step.prototype_text)} "
            f"| {step.similarity:.6f} | {step.prototype_sentiment:.6f} |"
        )
    lines.append("")
    return "\n".join(lines).encode("utf-8")


def svg_x(t: int, num_steps: int) -> float:
    """Map sentence position t in [1, T] onto the plot's x range."""
    plot_w = SVG_WIDTH - 2 * SVG_MARGIN
    if num_steps == 1:
        return SVG_MARGIN + plot_w / 2
    return SVG_MARGIN + (t - 1) * plot_w / (num_steps - 1)


def svg_y(score: float) -> float:
    """Map a sentiment score in [0, 1] onto the plot's y range (top = 1)."""
    plot_h = SVG_HEIGHT - 2 * SVG_MARGIN
    return SVG_HEIGHT - SVG_MARGIN - score * plot_h


def _to_svg(exp: Explanation) -> bytes:
    num = len(exp.steps)
    half = svg_y(0.5)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" '
        f'viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}">',
        f'<rect x="0" y="0" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" fill="white"/>',
        f'<line x1="{SVG_MARGIN}" y1="{svg_y(0.0):.3f}" x2="{SVG_WIDTH - SVG_MARGIN}" '
        f'y2="{svg_y(0.0):.3f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{SVG_MARGIN}" y1="{svg_y(1.0):.3f}" x2="{SVG_MARGIN}" '
        f'y2="{svg_y(0.0):.3f}" stroke="black" stroke-width="1"/>',
        f'<line x1="{SVG_MARGIN}" y1="{half:.3f}" x2="{SVG_WIDTH - SVG_MARGIN}" y2="{half:.3f}" '
        f'stroke="gray" stroke-width="1" stroke-dasharray="4 3"/>',
        f'<text x="{SVG_MARGIN - 6}" y="{half:.3f}" text-anchor="end" '
        f'dominant-baseline="middle" font-size="10" fill="gray">0.5</text>',
    ]
    points = [(svg_x(s.t, num), svg_y(s.prototype_sentiment)) for s in exp.steps]
    if num > 1:
        path = " ".join(f"{x:.3f},{y:.3f}" for x, y in points)
        parts.append(f'<polyline points="{path}" fill="none" stroke="#1f6f8b" stroke-width="2"/>')
    for step, (x, y) in zip(exp.steps, points):
        parts.append(
            f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="#1f6f8b" '
            f'data-t="{step.t}" data-score="{step.prototype_sentiment!r}"/>'
        )
    parts.append(
        f'<text x="{SVG_WIDTH / 2:.1f}" y="{SVG_HEIGHT - 10}" text-anchor="middle" '
        f'font-size="11" fill="black">sentence position</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts).encode("utf-8")


def render_report(exp: Explanation, format: str = "json") -> bytes:
    """Serialize an explanation; format is one of json, markdown, svg."""
    if format == "json":
        return _to_json(exp)
    if format == "markdown":
        return _to_markdown(exp)
    if format == "svg":
        return _to_svg(exp)
    raise ConfigError(f"unknown report format {format!r}; expected one of {REPORT_FORMATS}")
