import numpy as np
import pytest

from estimand_lab.config import load_config
from estimand_lab.errors import ScenarioMismatchError
from estimand_lab.figures import FIGURES, emit_figure_data, parse_figure_csv


@pytest.fixture(scope="module")
def sec4_1():
    return load_config("examples/sec4_1.json")


def test_fig1_lines_and_crossing(sec4_1):
    fig = emit_figure_data(sec4_1, "fig1")
    x = fig.column("x")
    assert x[0] == -1.0 and x[-1] == 1.0
    assert np.allclose(fig.column("gamma_AB"), -4 - 3 * x, atol=1e-14, rtol=0)
    assert np.allclose(fig.column("gamma_AC"), -3 - x, atol=1e-14, rtol=0)
    assert "crossing: gamma_AB = gamma_AC at x = -0.5" in fig.comments


def test_fig2_conditional_constant(sec4_1):
    cfg = load_config("examples/sec4_2_sweep.json")
    fig = emit_figure_data(cfg, "fig2")
    assert fig.columns == ("mu", "Delta_AB", "Delta_AC", "d_AB", "d_AC")
    assert np.all(fig.column("d_AB") == -4.0) and np.all(fig.column("d_AC") == -3.0)
    assert np.ptp(fig.column("Delta_AB")) > 1


def test_fig3_and_fig4(sec4_1):
    fig3 = emit_figure_data(load_config("examples/sec4_3_no_em.json"), "fig3")
    assert len(fig3.columns) == 1 + 5 * 3
    fig4 = emit_figure_data(load_config("examples/sec4_3_shared_em.json"), "fig4")
    assert np.all(fig4.column("pi_B") < fig4.column("pi_C"))
    assert "constant: gamma_BC = 1" in fig4.comments


def test_survival_figures():
    cfg = load_config("examples/sec5_em.json")
    fig5 = emit_figure_data(cfg, "fig5")
    assert np.all(np.diff(fig5.column("S_A")) <= 0)
    fig6 = emit_figure_data(cfg, "fig6")
    assert np.ptp(fig6.column("conditional_HR_AB")) == 0
    assert sum(c.startswith("crossing: marginal_HR_AB = marginal_HR_AC") for c in fig6.comments) == 1
    fig7 = emit_figure_data(cfg, "fig7")
    cond = [c for c in fig7.columns if c.startswith("conditional_HR_AB")]
    vals = np.concatenate([fig7.column(c) for c in cond])
    assert np.ptp(vals) < 1e-12


def test_csv_round_trip(sec4_1):
    fig = emit_figure_data(sec4_1, "fig1")
    comments, cols, values = parse_figure_csv(fig.to_csv())
    assert cols == fig.columns
    assert list(comments) == list(fig.comments)
    assert np.allclose(values, fig.values, rtol=1e-11, atol=0)


def test_mismatch(sec4_1):
    with pytest.raises(ScenarioMismatchError):
        emit_figure_data(sec4_1, "fig6")
    with pytest.raises(ScenarioMismatchError):
        emit_figure_data(sec4_1, "fig8")
    assert len(FIGURES) == 7
