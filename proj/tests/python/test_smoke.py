import json
import math

import numpy as np
import pytest

import srsurv

SCENARIO = """
name = smoke
s_end = 0.5
phi1 = 0.61
phi0 = 0.995
n_subjects = 600
n_replicates = 3
unadjusted = reports
"""


def simulated():
    return srsurv.Scenario.from_text(SCENARIO).generate(0)


def test_error_model_validation():
    em = srsurv.ErrorModel(0.61, 0.995)
    assert em.eta == 1.0
    with pytest.raises(ValueError):
        srsurv.ErrorModel(0.3, 0.6)


def test_fit_simulated_panel():
    ds = simulated()
    assert ds.n_subjects > 0
    assert ds.taus == [1, 2, 3, 4, 5, 6, 7, 8]
    f = srsurv.fit(ds, srsurv.ErrorModel(0.61, 0.995))
    assert f.converged
    assert f.model == "cov_fixed"
    assert f.survival[0] == 1.0
    assert np.all(np.diff(f.survival) <= 0)
    c = f.coefficients[0]
    assert c.hr_lower < c.hazard_ratio < c.hr_upper
    assert abs(c.estimate - 1.0) < 4 * c.se
    stat, p = srsurv.wald_test(f, 0)
    assert stat == pytest.approx(c.z)
    assert 0 <= p <= 1
    curve = f.survival_curve()
    assert len(curve) == len(f.taus)
    assert all(lo <= s <= hi for _, s, lo, hi in curve)


def test_json_round_trip():
    f = srsurv.fit(simulated(), srsurv.ErrorModel(0.61, 0.995))
    doc = json.loads(f.to_json())
    assert doc["schema_version"] == 1
    g = srsurv.FitResult.from_json(f.to_json())
    assert g.loglik == f.loglik
    assert np.array_equal(g.beta, f.beta)


def test_columns_match_csv(tmp_path):
    ds = simulated()
    path = tmp_path / "panel.csv"
    path.write_text(ds.to_csv())
    again = srsurv.read_panel_csv(str(path))
    assert again.n_subjects == ds.n_subjects
    a = srsurv.fit(ds, srsurv.ErrorModel(0.61, 0.995))
    b = srsurv.fit(again, srsurv.ErrorModel(0.61, 0.995))
    assert a.loglik == b.loglik


def test_perfect_reports_one_sample():
    ds = srsurv.dataset_from_columns(
        ["a", "a", "b", "c", "c", "d"], [1, 2, 1, 1, 2, 2], [0, 1, 1, 0, 0, 0]
    )
    f = srsurv.fit(ds, srsurv.ErrorModel(1, 1))
    assert f.model == "onesample"
    assert f.converged
    # Four subjects, one event each in (0,1] and (1,2], two censored at 2.
    assert f.survival[1] == pytest.approx(0.75, abs=1e-4)
    assert f.survival[2] == pytest.approx(0.75 * 2 / 3, abs=1e-4)


def test_bad_input_raises(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("subject_id,time,result\n1,1,0\n1,2,maybe\n")
    with pytest.raises(ValueError, match="bad.csv:3"):
        srsurv.read_panel_csv(str(path))


def test_sensitivity_and_scenario():
    ds = simulated()
    rows = srsurv.sensitivity(ds, "phi1=0.61;phi0=0.993,0.997")
    assert len(rows) == 2
    hr = [r["fit"].coefficients[0].hazard_ratio for r in rows]
    assert hr[0] > hr[1]
    summaries, csv = srsurv.Scenario.from_text(SCENARIO).run()
    assert [s["arm"] for s in summaries] == ["adjusted", "unadjusted"]
    assert summaries[0]["n_replicates"] == 3
    assert csv.count("\n") == 3
    assert math.isfinite(summaries[0]["bias_pct"])
