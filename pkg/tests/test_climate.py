import numpy as np
import pytest

from regime_pcmci.climate import load_climate_pair, load_monthly_index, month_of, summarize_climate
from regime_pcmci.core import (DataError, FitResult, LinkCoefficients, ParseError, TimeSeries,
                               hard_assignment_from_labels)
from regime_pcmci.driver import AnnealingResult


def write_long(path, start_year, values):
    lines = ["time,value"] + [f"{start_year + t // 12}-{t % 12 + 1:02d},{v}" for t, v in enumerate(values)]
    path.write_text("\n".join(lines) + "\n")


def write_wide(path, start_year, values):
    rows = ["year," + ",".join(f"m{m}" for m in range(1, 13))]
    for y in range(len(values) // 12):
        rows.append(f"{start_year + y}," + ",".join(str(v) for v in values[12 * y: 12 * y + 12]))
    path.write_text("\n".join(rows) + "\n")


def test_long_and_wide_layouts_agree(tmp_path, rng):
    values = rng.standard_normal(36)
    write_long(tmp_path / "a.csv", 1900, values)
    write_wide(tmp_path / "b.csv", 1900, values)
    a, b = load_monthly_index(tmp_path / "a.csv"), load_monthly_index(tmp_path / "b.csv")
    np.testing.assert_allclose(a.values, b.values)
    assert a.keys == b.keys and a.keys[0] == "1900-01" and a.keys[-1] == "1902-12"


def test_decimal_year(tmp_path):
    (tmp_path / "d.csv").write_text("1900.0417,1.0\n1900.125,2.0\n1900.2083,3.0\n")
    idx = load_monthly_index(tmp_path / "d.csv")
    assert list(idx.month) == [1, 2, 3]


def test_missing_values_and_gaps(tmp_path):
    (tmp_path / "m.csv").write_text("time,value\n1900-01,1.0\n1900-02,-99.9\n")
    with pytest.raises(DataError):
        load_monthly_index(tmp_path / "m.csv")
    (tmp_path / "g.csv").write_text("time,value\n1900-01,1.0\n1900-03,2.0\n")
    with pytest.raises(DataError):
        load_monthly_index(tmp_path / "g.csv")
    (tmp_path / "w.csv").write_text("time,a,b\n1900-01,1.0,2.0\n")
    with pytest.raises(ParseError):
        load_monthly_index(tmp_path / "w.csv")


def test_pair_alignment(tmp_path, rng):
    write_long(tmp_path / "enso.csv", 1900, rng.standard_normal(48))
    write_long(tmp_path / "air.csv", 1901, rng.standard_normal(48))
    ts = load_climate_pair(tmp_path / "enso.csv", tmp_path / "air.csv")
    assert ts.T == 36 and ts.time_index[0] == "1901-01"
    assert ts.variable_names == ("ENSO", "AIR")
    np.testing.assert_allclose(ts.values.std(axis=0), 1.0)
    np.testing.assert_array_equal(month_of(ts)[:13], list(range(1, 13)) + [1])


def _run(labels, phi, error, seed):
    coeffs = LinkCoefficients(phi)
    a = hard_assignment_from_labels(labels, 2)
    return FitResult(a, coeffs.to_parents(), coeffs, error ** 2 * 2 * (len(labels) - 2), error, 3, True, seed)


def test_summary_relabels_and_averages(rng):
    T = 48
    months = np.arange(T) % 12 + 1
    ts = TimeSeries(rng.standard_normal((T, 2)), ("ENSO", "AIR"),
                    tuple(f"{1900 + t // 12}-{m:02d}" for t, m in zip(range(T), months)))
    summer_labels = np.isin(months, (5, 6, 7, 8, 9)).astype(int)
    phi = np.zeros((2, 2, 2, 3))
    phi[:, 0, 0, 1] = 0.7
    phi[1, 1, 0, 1] = -0.4
    swapped = phi[::-1].copy()
    other = np.zeros_like(phi)
    other[0, 1, 0, 2] = 0.9
    runs = AnnealingResult((_run(summer_labels, phi, 0.70, 0), _run(1 - summer_labels, swapped, 0.71, 1),
                            _run(summer_labels, other, 0.95, 2)), 0)
    summary = summarize_climate(ts, runs, 2, top=2)
    assert summary.cluster_seeds == (0, 1)
    assert summary.departure_pct == (0.0, 0.0)
    assert summary.link_regimes == (1,)
    assert summary.link_effects[1] == pytest.approx(-0.4)
    np.testing.assert_allclose(summary.mean_phi, phi)
    assert summary.summer_fraction == (0.0, 1.0)
    assert summary.winter_fraction == (1.0, 0.0)
    # the third run's lag-2 effect of 0.9 enters regime 0 at a third of its size
    wider = summarize_climate(ts, runs, 2, top=3)
    assert wider.link_regimes == (0, 1)
    assert wider.link_effects[0] == pytest.approx(0.3)
