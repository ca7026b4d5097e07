"""Deterministic offline responder for scripted-backend runs.

Answers every prompt family with a plausible canned response derived only
from the request text, so the full pipeline (bootstrap, agent runs,
distillation, data-code generation) works end to end without a live model.
Identical requests always get identical responses.
"""

from __future__ import annotations

import hashlib
import json
import re

from .gateway import ChatRequest, ScriptedBackend

_PER_LEVEL = re.compile(r"Write exactly (\d+) queries for each level")
_QUERY = re.compile(r"^QUERY: (.+)$", re.MULTILINE)
_TASK = re.compile(r"^Task description: (.+)$", re.MULTILINE)
_DETAIL = re.compile(r"^Step description: (.+)$", re.MULTILINE)
_GROUP = re.compile(r'function catalog for the action group "([^"]+)"')
_STEP_LINE = re.compile(r"^- \[([^\]#]+)#(\d+)\] action=(\S+) \| task: (.*?) \| detail:", re.MULTILINE)
_EXISTING_LINE = re.compile(r"^- (\w+): ", re.MULTILINE)
_WORD = re.compile(r"[a-z]+")

_DATA_WORDS = {
    "retrieve", "load", "fetch", "select", "filter", "prepare", "import",
    "query", "extract", "gather", "collect",
}
_OUTPUT_WORDS = {
    "summarize", "report", "visualize", "plot", "chart", "export", "compile",
    "list", "output", "present", "display",
}

_QUERY_SHAPES = {
    "SIMPLE": "Show the yield for lot LOT{n:03d}.",
    "MODERATE": "List wafers with yield below {pct}% over the last {weeks} weeks.",
    "COMPLEX_SINGLE_GOAL": (
        "Identify wafers showing a consistent yield decline across {weeks}"
        " consecutive lots and summarize the failing test bins they share."
    ),
    "MULTI_GOAL": (
        "Classify lots into high-yield and low-yield groups, then correlate"
        " the groups with E-test parameter E{n:02d}."
    ),
}


def _stable_int(text: str, modulo: int) -> int:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") % modulo


def _first_word(text: str) -> str:
    words = _WORD.findall(text.lower())
    return words[0] if words else "process"


def _slug(text: str, max_words: int = 3) -> str:
    return "_".join(_WORD.findall(text.lower())[:max_words]) or "step"


def demo_responder(request: ChatRequest) -> str | None:
    text = request.user_text()
    if "Respond with one query per line" in text:
        return _answer_query_gen(text)
    if "Respond with a single JSON list of exactly four elements" in text:
        return _answer_term_extract(text)
    if "Respond with exactly one word: Analysis, Output, or Data." in text:
        return _answer_classify(text)
    if '"functions" must contain only newly defined functions' in text:
        return _answer_api_gen(text)
    if "Respond with exactly one fenced code block" in text:
        return _answer_data_agent(text)
    if "QUERY: " in text:
        return _answer_workflow(text)
    return None


def demo_backend() -> ScriptedBackend:
    return ScriptedBackend(responder=demo_responder)


def _answer_query_gen(text: str) -> str:
    match = _PER_LEVEL.search(text)
    per_level = int(match.group(1)) if match else 20
    lines = []
    for level, shape in _QUERY_SHAPES.items():
        for n in range(1, per_level + 1):
            lines.append(
                f"{level}: "
                + shape.format(n=n, pct=90 + (n % 9), weeks=2 + (n % 5))
            )
    return "\n".join(lines)


def _answer_workflow(text: str) -> str:
    # The target query is the last QUERY line; earlier ones belong to examples.
    query = _QUERY.findall(text)[-1].strip()
    with_thought = "THOUGHT:" in text
    middle_count = 1 + _stable_int(query, 3)
    focus = _WORD.findall(query.lower())
    focus_terms = [w for w in focus if len(w) > 4][:middle_count] or ["results"]

    steps = ["STEP 1: Retrieve Relevant Data\nLoad the lot, wafer, and test records needed for: " + query]
    index = 2
    for term in focus_terms:
        steps.append(
            f"STEP {index}: Analyze {term.capitalize()} Metrics\n"
            f"Compute the {term} metrics over the retrieved records and flag notable deviations."
        )
        index += 1
    steps.append(
        f"STEP {index}: Summarize and Visualize Results\n"
        "Compile the findings into a short report with one chart per metric."
    )
    body = "\n\n".join(steps)
    if not with_thought:
        return body
    thought = (
        "THOUGHT:\n"
        f"The query asks to {query.rstrip('.').lower()}. Ambiguous terms need explicit"
        " definitions up front, and numeric limits should stay adjustable variables."
    )
    return f"{thought}\n\n{body}"


def _answer_term_extract(text: str) -> str:
    task = _TASK.search(text).group(1).strip()
    detail_match = _DETAIL.search(text)
    detail = detail_match.group(1).strip() if detail_match else task
    overall = _first_word(task)
    action = _first_word(detail)
    object_words = _WORD.findall(task.lower())[1:4]
    obj = " ".join(object_words) or "records"
    return json.dumps([overall, action, obj, []])


def _answer_classify(text: str) -> str:
    detail_match = _DETAIL.search(text)
    detail = detail_match.group(1).strip() if detail_match else ""
    task = _TASK.search(text).group(1).strip()
    action = _first_word(detail or task)
    overall = _first_word(task)
    if action in _DATA_WORDS or overall in _DATA_WORDS:
        return "Data"
    if action in _OUTPUT_WORDS or overall in _OUTPUT_WORDS:
        return "Output"
    return "Analysis"


def _answer_api_gen(text: str) -> str:
    group = _GROUP.search(text).group(1)
    existing = set(_EXISTING_LINE.findall(text))
    functions = []
    defined: set[str] = set()
    mapping = []
    for query_id, step_index, action, task in _STEP_LINE.findall(text):
        name = f"{_WORD.findall(group.lower())[0]}_{_slug(task)}"
        mapping.append({"step": f"{query_id}#{step_index}", "function": name})
        if name not in existing and name not in defined:
            defined.add(name)
            functions.append(
                {
                    "name": name,
                    "purpose": f"Support steps that {task.strip().lower()}.",
                    "parameters": [
                        {
                            "name": "data_scope",
                            "type": "selection",
                            "description": "Rows in scope for this step",
                        }
                    ],
                }
            )
    return json.dumps({"functions": functions, "mapping": mapping}, indent=2)


def _answer_data_agent(text: str) -> str:
    task = _TASK.search(text).group(1).strip()
    bindings = re.findall(r"^- (\w+) = (.+)$", text, re.MULTILINE)
    where = " AND ".join(f"w.{k} >= {v}" for k, v in bindings) or "w.yield IS NOT NULL"
    return (
        f"Here is the query for: {task}\n\n"
        "```cypher\n"
        "MATCH (l:Lot)-[:HAS_WAFER]->(w:Wafer)\n"
        f"WHERE {where}\n"
        "RETURN l.lot_id AS lot, collect(w.wafer_id) AS wafers, avg(w.yield) AS avg_yield\n"
        "ORDER BY avg_yield DESC\n"
        "```"
    )
