import json
import math

import numpy as np
import pytest

from geotort.grid import PhaseVolume, VoxelGrid, load_volume, save_volume
from geotort.harness import (
    CONVERGENCE_CSV_HEADER,
    ConvergenceRow,
    RunConfig,
    centered_window,
    convergence_csv_line,
    height_slices,
    margin_voxels,
    run_convergence,
    stabilization_metric,
    stabilization_onset,
)
from geotort.rngmodel import Box


def make_rows(values_by_alpha, name="tau_hat"):
    rows = []
    for alpha, values in values_by_alpha.items():
        for i, v in enumerate(values):
            fields = dict(tau_hat=1.0, r_min=1.0, r_max=1.0, beta=1.0, p_hat=0.5)
            fields[name] = v
            rows.append(ConvergenceRow(n=10 * (i + 1), alpha=alpha, margin=1, **fields))
    return rows


# ---------------------------------------------------------------------------
# window construction
# ---------------------------------------------------------------------------


def test_height_slices_rejects_non_integral():
    assert height_slices(80.0, 1.0) == 80
    assert height_slices(3.0, 0.5) == 6
    with pytest.raises(ValueError):
        height_slices(80.5, 1.0)
    with pytest.raises(ValueError):
        height_slices(1.0, 0.3)


def test_margin_voxels():
    assert margin_voxels(240, 0.75) == 61
    assert margin_voxels(240, 0.25) == 4
    assert margin_voxels(40, 0.5) == 7


def test_centered_window_clamps_margins():
    w = centered_window((301, 301, 161), 80, 240, margin_voxels(240, 0.75))
    assert w.lateral == (241, 241)
    assert w.origin == (30, 30, 40)
    assert w.margin_lateral == 30  # clamped from 61
    assert w.margin_below == 40    # clamped from 61
    small = centered_window((301, 301, 161), 80, 40, margin_voxels(40, 0.5))
    assert small.margin_lateral == 7
    assert small.origin == (130, 130, 40)


def test_centered_window_rejects_oversize():
    with pytest.raises(ValueError):
        centered_window((32, 32, 32), 10, 40, 2)
    with pytest.raises(ValueError):
        centered_window((32, 32, 8), 10, 8, 2)


# ---------------------------------------------------------------------------
# stabilization metrics
# ---------------------------------------------------------------------------


def test_stabilization_constant_sequence_is_zero():
    rows = make_rows({0.5: [2.0, 2.0, 2.0, 2.0]})
    report = stabilization_metric(rows, k=3)
    assert report.rel_change["tau_hat"][0.5] == 0.0
    assert report.spread["tau_hat"] == 0.0


def test_stabilization_example_sequence():
    rows = make_rows({0.5: [2.0, 2.0, 2.1]})
    assert stabilization_metric(rows, k=2).rel_change["tau_hat"][0.5] == pytest.approx(0.05)
    assert stabilization_metric(rows, k=3).rel_change["tau_hat"][0.5] == pytest.approx(0.05)


def test_stabilization_cross_alpha_spread():
    rows = make_rows({0.25: [2.0, 2.0], 0.5: [2.0, 2.02], 0.75: [2.0, 2.1]})
    report = stabilization_metric(rows, k=2)
    assert report.spread["tau_hat"] == pytest.approx(0.1 / 2.0)


def test_stabilization_requires_enough_rows():
    rows = make_rows({0.5: [2.0, 2.0]})
    with pytest.raises(ValueError):
        stabilization_metric(rows, k=3)
    with pytest.raises(ValueError):
        stabilization_metric(rows, k=1)


def test_stabilization_onset():
    rows = make_rows({0.5: [3.0, 2.0, 2.0, 2.0], 0.25: [2.0, 2.0, 2.0, 2.0]})
    assert stabilization_onset(rows, "tau_hat", 0.02) == 20
    assert stabilization_onset(rows, "r_max", 0.02) == 10


# ---------------------------------------------------------------------------
# run_convergence
# ---------------------------------------------------------------------------


def all_foreground_volume(dims=(41, 41, 31)):
    return VoxelGrid(np.ones(dims, dtype=bool))


def test_convergence_all_foreground(tmp_path):
    config = RunConfig(
        lambda1=1e-3, lambda2=1e-3,
        box=Box(lo=(0, 0, 0), hi=(40, 40, 30)),
        l=20.0, n_values=(16,), alphas=(0.5,), seed=1,
        out_csv=str(tmp_path / "rows.csv"),
    )
    rows = run_convergence(config, volume=all_foreground_volume())
    assert len(rows) == 1
    assert rows[0].tau_hat == 1.0
    assert rows[0].p_hat == 1.0
    text = (tmp_path / "rows.csv").read_text().splitlines()
    assert text[0] == CONVERGENCE_CSV_HEADER
    assert text[1].startswith("16,0.5,4,1.0,")


def test_convergence_p_hat_matches_direct_count(tmp_path):
    rng = np.random.default_rng(9)
    vol = VoxelGrid(rng.random((41, 41, 31)) < 0.6)
    config = RunConfig(
        lambda1=1e-3, lambda2=1e-3,
        box=Box(lo=(0, 0, 0), hi=(40, 40, 30)),
        l=20.0, n_values=(12, 20), alphas=(0.25,), seed=1,
    )
    rows = run_convergence(config, volume=vol)
    for row in rows:
        w = centered_window(vol.dims, 20, row.n, margin_voxels(row.n, row.alpha))
        core = vol.data[w.core_slices()]
        assert row.p_hat == core.sum() / core.size
    assert [r.n for r in rows] == [12, 20]


def test_convergence_rows_ordered_by_alpha_then_n(tmp_path):
    config = RunConfig(
        lambda1=1e-3, lambda2=1e-3,
        box=Box(lo=(0, 0, 0), hi=(40, 40, 30)),
        l=10.0, n_values=(8, 12), alphas=(0.75, 0.25), seed=1,
    )
    rows = run_convergence(config, volume=all_foreground_volume((31, 31, 21)))
    assert [(r.alpha, r.n) for r in rows] == [(0.25, 8), (0.25, 12), (0.75, 8), (0.75, 12)]


def test_convergence_same_seed_reproduces_csv_bytes(tmp_path):
    config_text = json.dumps(
        {
            "lambda1": 3e-4, "lambda2": 3e-4,
            "box": [0, 0, 0, 30, 30, 24],
            "l": 12.0, "n_values": [10, 16], "alphas": [0.25, 0.5],
            "seed": 77, "point_margin": 10.0,
        }
    )
    outputs = []
    for name in ("a", "b"):
        config = RunConfig.from_json(config_text)
        import dataclasses

        config = dataclasses.replace(
            config,
            out_csv=str(tmp_path / f"{name}.csv"),
            out_volume=str(tmp_path / f"{name}.mv1"),
        )
        run_convergence(config)
        outputs.append(
            ((tmp_path / f"{name}.csv").read_bytes(), (tmp_path / f"{name}.mv1").read_bytes())
        )
    assert outputs[0] == outputs[1]


def test_convergence_reads_volume_file(tmp_path):
    labels = np.ones((31, 31, 21), dtype=np.uint8)
    labels[:, :, 10:] = 2
    vol = PhaseVolume(labels, phase_count=2)
    path = tmp_path / "vol.mv1"
    save_volume(vol, path)
    config = RunConfig(
        lambda1=1e-3, lambda2=1e-3,
        box=Box(lo=(0, 0, 0), hi=(30, 30, 20)),
        l=10.0, n_values=(8,), alphas=(0.5,), seed=3,
        in_volume=str(path), phase=2,
    )
    rows = run_convergence(config)
    # phase 2 occupies the upper half of the core window => p close to 0.5
    assert rows[0].p_hat == pytest.approx(6.0 / 11.0, abs=1e-12)
    assert math.isinf(rows[0].tau_hat)  # no path from inlet (phase 2 absent there)


def test_runconfig_json_validation():
    with pytest.raises(ValueError, match="unknown config keys"):
        RunConfig.from_json('{"lambda1": 1, "lambda2": 1, "box": [0,0,0,1,1,1], "l": 1, "n_values": [2], "alphas": [0.5], "seed": 1, "bogus": 2}')
    with pytest.raises(ValueError, match="missing config key"):
        RunConfig.from_json('{"lambda1": 1}')
    with pytest.raises(ValueError, match="ascending"):
        RunConfig.from_json('{"lambda1": 1, "lambda2": 1, "box": [0,0,0,1,1,1], "l": 1, "n_values": [4, 2], "alphas": [0.5], "seed": 1}')


def test_csv_line_formats_infinities():
    row = ConvergenceRow(
        n=10, alpha=0.5, margin=4, tau_hat=math.inf, r_min=-math.inf,
        r_max=2.0, beta=0.0, p_hat=0.25,
    )
    assert convergence_csv_line(row) == "10,0.5,4,inf,-inf,2.0,0.0,0.25"
