import json
import math
import shutil

import numpy as np
import pytest

from sizechain.analytics import (
    average_entropy,
    chapman_kolmogorov_check,
    column_entropy,
    entropy_table,
    group_entropy,
)
from sizechain.errors import InputError
from sizechain.fixtures import APPENDIX_DIR, load_fixtures
from sizechain.reports import read_matrix_csv, write_matrix_csv
from sizechain.verify import Tolerances, run_verify


def copy_appendix(tmp_path):
    target = tmp_path / "appendix"
    shutil.copytree(APPENDIX_DIR, target)
    return target


def perturb(path, row, col, delta):
    lines = path.read_text(encoding="utf-8").splitlines()
    cells = lines[row + 1].split(",")
    cells[col + 1] = f"{float(cells[col + 1]) + delta:.4f}"
    lines[row + 1] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestFixtureSet:

    def test_shape(self, appendix):
        assert len(appendix.first_order) == 15
        assert [m.origin_year for m in appendix.first_order] == list(range(1998, 2013))
        assert all(m.n_states == 13 and m.counts is None for m in appendix.matrices)
        assert len(appendix.trend) == 15 and len(appendix.entropy) == 15
        assert appendix.entropy_excluded_years == (2012,)

    def test_stochastic_within_rounding(self, appendix):
        for m in appendix.matrices:
            dev = np.max(np.abs(m.column_sums() - 1.0))
            assert dev <= 2e-3, f"{m.source}: column sums off by {dev}"

    def test_spot_entropy_values(self, appendix):
        f99 = appendix.first_order_for(1998)
        assert column_entropy(f99, 0) == pytest.approx(1.7736, abs=5e-4)
        assert column_entropy(f99, 12) == pytest.approx(0.8113, abs=5e-4)
        assert column_entropy(appendix.first_order_for(2005), 4) == pytest.approx(0.8853, abs=5e-4)

    def test_entropy_reproduction(self, appendix):
        for m in appendix.first_order:
            if m.dest_year in appendix.entropy_excluded_years:
                continue
            ours = entropy_table(m).values
            published = appendix.entropy_for(m.dest_year).values
            dev = max(abs(a - b) for a, b in zip(ours, published))
            assert dev <= 5e-4, f"end year {m.dest_year}: {dev}"

    def test_average_column(self, appendix):
        ours = average_entropy([entropy_table(m) for m in appendix.first_order])
        dev = max(abs(a - b) for a, b in zip(ours, appendix.entropy_average))
        assert dev <= 5e-4

    def test_entropy_bounds(self, appendix):
        top = math.log(13)
        for m in appendix.matrices:
            for v in entropy_table(m).values:
                assert -1e-12 <= v <= top + 1e-12, f"{m.source}: entropy {v}"

    def test_small_group_1999(self, appendix):
        published = group_entropy(appendix.entropy_for(1999))
        assert published.small == pytest.approx(1.3432, abs=5e-5)
        ours = group_entropy(entropy_table(appendix.first_order_for(1998)))
        assert ours.small == pytest.approx(1.3432, abs=5e-4)

    def test_two_step_product(self, appendix):
        r = chapman_kolmogorov_check(
            appendix.first_order_for(1998),
            appendix.first_order_for(1999),
            appendix.second_order_product,
            tolerance=2e-3,
        )
        assert r.passed, f"max deviation {r.max_deviation} at {r.worst_entry}"

    def test_product_against_data(self, appendix):
        dev = np.max(np.abs(appendix.second_order_product.probs - appendix.second_order_direct.probs))
        assert dev <= 1.5e-3

    def test_trend_ratios(self, appendix):
        first = appendix.trend[0]
        assert (first.end_year, first.L, first.R, first.Q) == (1999, 0.2825, 0.25, 1.13)
        p2004 = next(p for p in appendix.trend if p.end_year == 2004)
        assert p2004.L / p2004.R == pytest.approx(2.1482, abs=5e-4)

    def test_csv_round_trip(self, appendix, tmp_path):
        m = appendix.first_order_for(2003)
        back = read_matrix_csv(write_matrix_csv(m, tmp_path / "m.csv"), 2003, 2004)
        np.testing.assert_array_equal(back.probs, m.probs)


class TestLoading:

    def test_checksum_drift(self, tmp_path):
        d = copy_appendix(tmp_path)
        perturb(d / "first_order_2001_2002.csv", 3, 4, 0.05)
        with pytest.raises(InputError, match="first_order_2001_2002.csv.*checksum"):
            load_fixtures(d)

    def test_missing_file(self, tmp_path):
        d = copy_appendix(tmp_path)
        (d / "trend.csv").unlink()
        with pytest.raises(InputError, match="missing"):
            load_fixtures(d)

    def test_missing_manifest(self, tmp_path):
        d = copy_appendix(tmp_path)
        (d / "manifest.json").unlink()
        with pytest.raises(InputError, match="not found"):
            load_fixtures(d)

    def test_unknown_kind(self, tmp_path):
        d = copy_appendix(tmp_path)
        doc = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        doc["files"]["trend.csv"]["kind"] = "mystery"
        (d / "manifest.json").write_text(json.dumps(doc), encoding="utf-8")
        with pytest.raises(InputError, match="unknown kind"):
            load_fixtures(d)


class TestVerify:

    def test_shipped_fixtures_pass(self, appendix):
        report = run_verify(appendix)
        assert report.passed, "\n".join(str(c) for c in report.failures)
        assert report.check("trend Q = L/R").passed

    def test_perturbed_entry_names_column(self, tmp_path):
        d = copy_appendix(tmp_path)
        perturb(d / "first_order_2001_2002.csv", 3, 4, 0.05)
        report = run_verify(load_fixtures(d, check_manifest=False))
        assert not report.passed
        failed = [c for c in report.failures if c.name.startswith("stochasticity")]
        assert len(failed) == 1
        assert "2001->2002" in failed[0].location and failed[0].location.endswith("column 4")
        assert failed[0].deviation == pytest.approx(0.05, abs=2e-3)

    def test_perturbed_trend_row(self, tmp_path):
        d = copy_appendix(tmp_path)
        text = (d / "trend.csv").read_text(encoding="utf-8").replace("1.1300", "1.1800")
        (d / "trend.csv").write_text(text, encoding="utf-8")
        report = run_verify(load_fixtures(d, check_manifest=False))
        c = report.check("trend Q = L/R")
        assert not c.passed and c.location == "end year 1999"

    def test_tight_ck_tolerance_fails(self, appendix):
        report = run_verify(appendix, Tolerances().with_ck(1e-6))
        names = {c.name for c in report.failures}
        assert any(n.startswith("two-step product") for n in names)
