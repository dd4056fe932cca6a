import pytest

from fgtyper import EvalPair, Mention, TypePrediction
from fgtyper.reporting import (
    DISJOINT,
    FINER_THAN_GOLD,
    TOO_COARSE,
    categorize,
    error_report,
    has_nested_capitalized_span,
    render_error_report,
)


def prediction(path):
    return TypePrediction(path=path, level_scores=((path, 0.9),), mode="coarse_to_fine")


class TestCategorize:
    def test_too_coarse(self):
        # predicted /location against gold /location/city
        gold = frozenset({"/location", "/location/city"})
        assert categorize(gold, "/location") == TOO_COARSE

    def test_finer_than_gold(self):
        # predicted a descendant of the annotated type
        gold = frozenset({"/other", "/other/food"})
        assert categorize(gold, "/other/food/grain") == FINER_THAN_GOLD

    def test_disjoint(self):
        gold = frozenset({"/person"})
        assert categorize(gold, "/organization/company") == DISJOINT


class TestErrorReport:
    def test_buckets_and_counts(self):
        pairs = [
            EvalPair.from_paths({"/location", "/location/city"}, {"/location"}),
            EvalPair.from_paths({"/person"}, {"/organization", "/organization/company"}),
            EvalPair.from_paths({"/person"}, {"/person"}),
        ]
        preds = [prediction("/location"), prediction("/organization/company"), prediction("/person")]
        report = error_report(pairs, preds, ids=["a", "b", "c"])
        assert report.total == 3
        assert report.errors == 2
        assert report.counts[TOO_COARSE] == 1
        assert report.counts[DISJOINT] == 1
        assert report.exemplars[TOO_COARSE][0]["id"] == "a"

    def test_misaligned_inputs_rejected(self):
        with pytest.raises(ValueError, match="aligned"):
            error_report([], [prediction("/a")])

    def test_nesting_flag(self):
        mention = Mention(
            context="The UAW Leaders are trying to silence dissidents",
            surface="UAW",
            span=(4, 7),
        )
        assert has_nested_capitalized_span(mention)
        plain = Mention(context="the UAW is big", surface="UAW", span=(4, 7))
        assert not has_nested_capitalized_span(plain)

    def test_render_mentions_counts(self):
        pairs = [EvalPair.from_paths({"/a", "/a/b"}, {"/a"})]
        report = error_report(pairs, [prediction("/a")], ids=["m1"])
        text = render_error_report(report)
        assert "too coarse       : 1" in text
        assert "m1" in text
