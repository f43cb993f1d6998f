import pytest

from toricding import from_vertices
from toricding.functional import PolytopeGrid, Tolerances, guillemin_potential, load_experiment_config
from toricding.plotting import gnuplot_trace, plot_potential, plot_trace


def test_config_parsing(tmp_path):
    cfg = tmp_path / "a.cfg"
    cfg.write_text("polytope = x.poly  # path\nfamily = random 7 9\neps = 1, 0.5\nR = 12\nraw = yes\n")
    c = load_experiment_config(cfg)
    assert (c.family, c.seed, c.count, c.eps, c.R, c.raw) == ("random", 7, 9, [1.0, 0.5], 12.0, True)
    cfg.write_text("polytope = x.poly\nfamily = spike 2\n")
    assert load_experiment_config(cfg).vertex == 2


@pytest.mark.parametrize("body", ["h = 0.1\n", "polytope = x\nbogus = 1\n", "polytope = x\neps = 0\n", "polytope = x\nh = 0.3\n", "polytope = x\nfamily = wave\n"])
def test_config_errors(tmp_path, body):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(body)
    with pytest.raises(ValueError):
        load_experiment_config(cfg)


def test_tolerance_overrides():
    t = Tolerances().with_overrides(tail_decay="20")
    assert t.tail_decay == 20.0
    with pytest.raises(ValueError):
        Tolerances().with_overrides(nope=1)


def test_trace_outputs(tmp_path):
    assert gnuplot_trace([1.0, 0.5]) == "# step D\n0 1\n1 0.5\n"
    assert plot_trace([1.0, 0.5], tmp_path / "t.png").stat().st_size > 0


def test_potential_plot_dimensions(tmp_path, bundled):
    p = bundled["Bl1P2"]
    assert plot_potential(guillemin_potential(p, PolytopeGrid(p, 4)), tmp_path / "u.png").exists()
    cube = from_vertices([(a, b, c) for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)])
    with pytest.raises(ValueError):
        plot_potential(guillemin_potential(cube, PolytopeGrid(cube, 1)), tmp_path / "c.png")
