"""Per-turn API-call scoring and report aggregation.

score_api_turn turns (gold call, prediction text) into score facts; nothing
here raises on bad predictions — every failure mode is a fact in the score.
aggregate groups API facts and response pairs into report rows per
(dataset x task x split), where the ALL split row is computed over the
union of the three tags, never as a mean of sub-rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .calls import (
    MalformedCall,
    NotACall,
    fuzzy_match,
    normalize_name,
    parse_api_call,
)
from .textmetrics import ScoredPair, bleu4, gleu

API_METRICS = (
    "invoke_accuracy",
    "method_accuracy",
    "param_name_accuracy",
    "param_value_accuracy",
    "full_api_accuracy",
)
_SPLIT_ORDER = {"all": 0, "seen": 1, "unseen": 2, "mixed": 3}


@dataclass(frozen=True)
class ApiTurnScore:
    invoke_ok: bool
    method_ok: bool
    param_name_frac: float
    param_value_frac: float
    full_ok: bool
    param_value_sim: float  # raw mean fuzzy score, unthresholded reading
    param_names_exact: bool  # strict all-or-nothing variants
    param_values_exact: bool
    is_multi_domain: bool = False
    split_tag: str = ""
    dataset: str = ""

    def __post_init__(self) -> None:
        if self.method_ok and not self.invoke_ok:
            raise ValueError("method_ok implies invoke_ok")
        if self.full_ok and not (
            self.method_ok
            and self.param_name_frac == 1.0
            and self.param_value_frac == 1.0
        ):
            raise ValueError("full_ok implies a perfect turn")
        for name in ("param_name_frac", "param_value_frac", "param_value_sim"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range: {value}")


@dataclass(frozen=True)
class ReportRow:
    dataset: str
    task: str
    split_tag: str
    metric: str
    value: float
    support: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"{self.metric} out of range: {self.value}")
        if self.support < 1:
            raise ValueError("rows need support >= 1")


@dataclass(frozen=True)
class MetricReport:
    rows: tuple[ReportRow, ...]

    def value(self, dataset: str, task: str, split_tag: str, metric: str) -> float:
        for row in self.rows:
            if (row.dataset, row.task, row.split_tag, row.metric) == (
                dataset, task, split_tag, metric,
            ):
                return row.value
        raise KeyError((dataset, task, split_tag, metric))


def score_api_turn(
    gold,
    prediction_text: str,
    *,
    fuzzy_threshold: float = 0.9,
    is_multi_domain: bool = False,
    split_tag: str = "",
    dataset: str = "",
) -> ApiTurnScore:
    """Score one predicted turn against a gold call; total on any input."""
    zero = dict(
        invoke_ok=False, method_ok=False, param_name_frac=0.0,
        param_value_frac=0.0, full_ok=False, param_value_sim=0.0,
        param_names_exact=False, param_values_exact=False,
        is_multi_domain=is_multi_domain, split_tag=split_tag, dataset=dataset,
    )
    try:
        prediction = parse_api_call(prediction_text)
    except MalformedCall:
        return ApiTurnScore(**zero)  # an attempt, but not a usable call
    if isinstance(prediction, NotACall):
        return ApiTurnScore(**zero)

    invoke_ok = prediction.invoke is gold.invoke
    method_ok = invoke_ok and (
        normalize_name(prediction.method) == normalize_name(gold.method)
    )

    pred_params = {normalize_name(k): v for k, v in prediction.params.items()}
    gold_params = {normalize_name(k): v for k, v in gold.params.items()}
    names_hit = 0
    values_hit = 0
    sim_sum = 0.0
    for name, gold_value in gold_params.items():
        if name not in pred_params:
            continue  # name miss scores 0 even if some value coincides
        names_hit += 1
        matched, score = fuzzy_match(pred_params[name], gold_value,
                                     threshold=fuzzy_threshold)
        sim_sum += score
        if matched:
            values_hit += 1
    n_gold = len(gold_params)
    name_frac = names_hit / n_gold if n_gold else 1.0
    value_frac = values_hit / n_gold if n_gold else 1.0
    sim = sim_sum / n_gold if n_gold else 1.0
    names_exact = set(pred_params) == set(gold_params)
    values_exact = names_exact and values_hit == n_gold
    # extra predicted parameters never reduce the fractions, but they do
    # veto a "whole query correct" verdict
    full_ok = (method_ok and name_frac == 1.0 and value_frac == 1.0
               and not set(pred_params) - set(gold_params))
    return ApiTurnScore(
        invoke_ok=invoke_ok,
        method_ok=method_ok,
        param_name_frac=name_frac,
        param_value_frac=value_frac,
        full_ok=full_ok,
        param_value_sim=sim,
        param_names_exact=names_exact,
        param_values_exact=values_exact,
        is_multi_domain=is_multi_domain,
        split_tag=split_tag,
        dataset=dataset,
    )


def _mean(values) -> float:
    values = list(values)
    return sum(values) / len(values)


def _split_groups(items):
    """Group by split tag plus the ALL union, keyed by split name."""
    groups: dict[str, list] = {"all": list(items)}
    for item in groups["all"]:
        groups.setdefault(item.split_tag, []).append(item)
    return groups


def _api_rows(dataset: str, task: str, scores: list[ApiTurnScore],
              include_strict: bool) -> list[ReportRow]:
    rows = []
    for split, group in _split_groups(scores).items():
        if not group or split not in _SPLIT_ORDER:
            continue
        n = len(group)
        fields = {
            "invoke_accuracy": _mean(s.invoke_ok for s in group),
            "method_accuracy": _mean(s.method_ok for s in group),
            "param_name_accuracy": _mean(s.param_name_frac for s in group),
            "param_value_accuracy": _mean(s.param_value_frac for s in group),
            "full_api_accuracy": _mean(s.full_ok for s in group),
            "param_value_similarity": _mean(s.param_value_sim for s in group),
        }
        if include_strict:
            fields["param_name_exact_accuracy"] = _mean(
                s.param_names_exact for s in group)
            fields["param_value_exact_accuracy"] = _mean(
                s.param_values_exact for s in group)
        rows.extend(
            ReportRow(dataset, task, split, metric, value, n)
            for metric, value in fields.items()
        )
    return rows


def _response_rows(dataset: str, pairs: list[ScoredPair],
                   false_invokes: list[ScoredPair]) -> list[ReportRow]:
    rows = []
    pair_groups = _split_groups(pairs)
    false_groups = _split_groups(false_invokes)
    for split in set(pair_groups) | set(false_groups):
        if split not in _SPLIT_ORDER:
            continue
        group = pair_groups.get(split, [])
        denominator = len(group) + len(false_groups.get(split, []))
        if group:
            by_category: dict[str, list[ScoredPair]] = {"all": group}
            for pair in group:
                if pair.category:
                    by_category.setdefault(pair.category, []).append(pair)
            for category, members in by_category.items():
                task = f"response/{category}"
                rows.append(ReportRow(dataset, task, split, "bleu4",
                                      bleu4(members), len(members)))
                rows.append(ReportRow(dataset, task, split, "gleu",
                                      gleu(members), len(members)))
        if denominator:
            # auxiliary stat, deliberately not one of the accuracy columns
            false_rate = (denominator - len(group)) / denominator
            rows.append(ReportRow(dataset, "response/all", split,
                                  "false_invoke_rate", false_rate, denominator))
    return rows


def aggregate(
    scores: list[ApiTurnScore],
    response_scores: list[ScoredPair],
    false_invokes: list[ScoredPair] | None = None,
    *,
    include_strict: bool = False,
) -> MetricReport:
    """Build the grouped report; empty groups are omitted, never zero-filled."""
    false_invokes = false_invokes or []
    rows: list[ReportRow] = []
    datasets = sorted(
        {s.dataset for s in scores}
        | {p.dataset for p in response_scores}
        | {p.dataset for p in false_invokes}
    )
    for dataset in datasets:
        ds_scores = [s for s in scores if s.dataset == dataset]
        if ds_scores:
            rows.extend(_api_rows(dataset, "api_call", ds_scores, include_strict))
            multi = [s for s in ds_scores if s.is_multi_domain]
            if multi:
                rows.extend(_api_rows(dataset, "api_call_multi_domain", multi,
                                      include_strict))
        ds_pairs = [p for p in response_scores if p.dataset == dataset]
        ds_false = [p for p in false_invokes if p.dataset == dataset]
        rows.extend(_response_rows(dataset, ds_pairs, ds_false))
    rows.sort(key=lambda r: (r.dataset, r.task, _SPLIT_ORDER[r.split_tag], r.metric))
    return MetricReport(rows=tuple(rows))


def render_tables(report: MetricReport) -> str:
    """Human-readable tables: API metrics and response metrics per dataset."""
    lines: list[str] = []
    datasets = sorted({r.dataset for r in report.rows})
    for dataset in datasets:
        for task in ("api_call", "api_call_multi_domain"):
            rows = [r for r in report.rows
                    if r.dataset == dataset and r.task == task]
            if not rows:
                if task == "api_call":
                    lines.append(f"[{dataset}] no API-call turns scored")
                continue
            title = "API call task" + (
                " (multi-domain dialogs)" if task.endswith("multi_domain") else "")
            lines.append(f"== {dataset} — {title} ==")
            lines.append(f"{'split':<8}" + "".join(f"{m:>22}" for m in API_METRICS)
                         + f"{'n':>8}")
            splits = sorted({r.split_tag for r in rows},
                            key=_SPLIT_ORDER.__getitem__)
            for split in splits:
                cells = []
                support = 0
                for metric in API_METRICS:
                    row = next(r for r in rows
                               if r.split_tag == split and r.metric == metric)
                    cells.append(f"{row.value:>22.4f}")
                    support = row.support
                lines.append(f"{split:<8}" + "".join(cells) + f"{support:>8}")
            lines.append("")
        response_rows = [r for r in report.rows
                         if r.dataset == dataset and r.task.startswith("response/")
                         and r.metric in ("bleu4", "gleu")]
        if not response_rows:
            lines.append(f"[{dataset}] no response turns scored")
            lines.append("")
            continue
        lines.append(f"== {dataset} — response generation ==")
        lines.append(f"{'split':<8}{'category':<12}{'bleu4':>10}{'gleu':>10}{'n':>8}")
        seen = sorted(
            {(r.split_tag, r.task.split('/', 1)[1]) for r in response_rows},
            key=lambda key: (_SPLIT_ORDER[key[0]], key[1]),
        )
        for split, category in seen:
            def cell(metric: str):
                return next(r for r in response_rows
                            if r.split_tag == split and r.metric == metric
                            and r.task == f"response/{category}")
            b, g = cell("bleu4"), cell("gleu")
            lines.append(f"{split:<8}{category:<12}{b.value:>10.4f}"
                         f"{g.value:>10.4f}{b.support:>8}")
        lines.append("")
    return "\n".join(lines)
