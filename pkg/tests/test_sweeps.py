import numpy as np
import pytest

from coincidence import config
from coincidence.errors import ConfigError
from coincidence.plotting import render
from coincidence.sweeps import FIGURES, capacity_curves, figure_rows, grid, regime_curves


def test_grid_specs():
    assert grid([1, 2]).tolist() == [1.0, 2.0]
    np.testing.assert_allclose(grid({"min": 1, "max": 100, "points": 3, "scale": "log"}), [1, 10, 100])
    np.testing.assert_allclose(grid({"min": 0, "max": 1, "points": 5}), np.linspace(0, 1, 5))
    for bad in ({"min": 0, "max": 1, "points": 1}, {"min": 0, "max": 1, "points": 3, "scale": "log"},
                {"min": 0, "max": 1, "points": 3, "scale": "cubic"}, {"max": 1}):
        with pytest.raises(ConfigError):
            grid(bad)


def test_capacity_curves_monotone_in_efficiency():
    rows = capacity_curves([3], np.linspace(0, 1, 21), [0.0, 0.1])
    for p_d in (0.0, 0.1):
        caps = [r["capacity"] for r in rows if r["p_dark_count"] == p_d]
        assert all(b >= a - 1e-12 for a, b in zip(caps, caps[1:]))
    assert rows[20]["capacity"] == pytest.approx(1.0)


def test_regime_rows(reference):
    rows = regime_curves(reference.channels, reference.source, np.logspace(-16, -1, 16))
    assert {"snr", "car", "cdr", "ir", "min_p_s_cdr"} <= set(rows[0])


@pytest.mark.parametrize("kind", FIGURES)
def test_every_figure_renders(reference, kind, tmp_path):
    rows = figure_rows(kind, reference)
    assert rows
    out = render(kind, rows, tmp_path / f"{kind}.png")
    assert out.stat().st_size > 1000


def test_axis_sweep_varies_path(reference):
    rows = figure_rows("axis", reference)
    powers = [r["pump.average_power"] for r in rows]
    assert powers == pytest.approx(list(np.linspace(1, 12, 12)))
    rates = [r["rate_hz"] for r in rows]
    assert rates[-1] == pytest.approx(12 * rates[0])


def test_axis_sweep_rejects_unknown_path():
    a = config.load("reference", ['sweep.axis.path="pump.colour"'])
    with pytest.raises(ConfigError):
        figure_rows("axis", a)
    with pytest.raises(ConfigError):
        figure_rows("nonsense", a)
