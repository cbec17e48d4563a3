import pytest

from dpsearch.bench import (BenchConfig, run_benchmark, run_cell, summarize, trend_report,
                            verify_rows)
from dpsearch.errors import InputError

FAST = BenchConfig(iters=20, runs=3, search_time_limit=10.0)


class TestBench:
    def test_tiny_cell_all_optimal(self):
        rows = run_cell(4, 0, FAST)
        methods = {r["method"] for r in rows}
        assert {"exact", "trivial", "admissible", "inadmissible", "gibbs", "splitmerge"} <= methods
        assert all(r["status"] == "ok" for r in rows)
        for r in rows:
            if r["method"] in ("exact", "trivial", "admissible"):
                assert r["nll_ratio"] == pytest.approx(1.0, abs=1e-12)
            assert r["reference"] == "exact"

    def test_rows_verify_against_their_assignments(self):
        rows = run_benchmark([4, 6], 2, FAST)
        assert len(rows) == 2 * 2 * 9
        assert verify_rows(rows, FAST) == []

    def test_best_known_reference_above_exact_limit(self):
        config = BenchConfig(iters=5, runs=3, exact_max_n=3, samplers=("gibbs",))
        rows = run_cell(5, 1, config)
        ok = [r for r in rows if r["status"] == "ok"]
        assert all(r["reference"] == "best-known" for r in ok)
        assert min(r["nll_ratio"] for r in ok) == pytest.approx(1.0)

    def test_budget_rows_recorded(self):
        config = BenchConfig(iters=5, runs=3, search_time_limit=0.0, samplers=())
        rows = run_cell(9, 2, config)
        statuses = {r["method"]: r["status"] for r in rows}
        assert statuses["trivial"] == "budget_exceeded"
        assert statuses["exact"] == "ok"

    def test_summary_and_trends(self):
        rows = run_benchmark([4], 2, FAST)
        summary = summarize(rows)
        assert {s["method"] for s in summary} >= {"inadmissible", "gibbs"}
        trends = trend_report(rows)
        assert trends["optimal_small"] >= 1.0
        assert 0.0 <= trends["beats_gibbs"] <= 1.0

    @pytest.mark.parametrize("sizes,repeats", [([], 1), ([4], 0)])
    def test_bad_arguments(self, sizes, repeats):
        with pytest.raises(InputError):
            run_benchmark(sizes, repeats, FAST)
