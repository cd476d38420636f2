import numpy as np
import pytest

from ivboot import ErrorSpec, SimConfig
from ivboot.harness import (
    PowerTable,
    TABLE_SPECS,
    compare_to_reference,
    load_reference_table,
    oracle_lr_critical,
    power_curve,
    table_config,
)


def small_config(**kw):
    base = dict(n=80, q=3, concentration=80 * 60.0, beta_star=1.0,
                error=ErrorSpec("gauss"), beta_grid=(0.7, 1.0, 1.3),
                reps=40, boot_reps=120, alpha=0.05, master_seed=314)
    base.update(kw)
    return SimConfig(**base)


def test_power_curve_shapes_and_ranges():
    t = power_curve(small_config(), n_threads=1)
    assert t.grid.shape == (3,)
    for name in ("LR", "BLR", "CLR", "AR", "LM"):
        col = t.column(name)
        assert col.shape == (3,)
        assert np.all((0.0 <= col) & (col <= 1.0))
    assert t.reps_used == 40


def test_power_curve_thread_count_invariant():
    t1 = power_curve(small_config(), n_threads=1)
    t2 = power_curve(small_config(), n_threads=3)
    for name in ("LR", "BLR", "CLR", "AR", "LM"):
        assert np.array_equal(t1.column(name), t2.column(name))
    assert t1.to_csv_text() == t2.to_csv_text()


def test_power_curve_deterministic_rerun():
    t1 = power_curve(small_config(), n_threads=2)
    t2 = power_curve(small_config(), n_threads=2)
    assert t1.to_csv_text() == t2.to_csv_text()


def test_power_curve_u_shape_and_signal():
    # strong signal config: full power at the grid edges, near-level at the null
    cfg = small_config(beta_grid=(0.3, 1.0, 1.7), reps=80)
    t = power_curve(cfg, n_threads=2)
    for name in ("LR", "BLR", "CLR", "AR", "LM"):
        col = t.column(name)
        assert col[0] >= col[1]
        assert col[2] >= col[1]


def test_power_increases_with_concentration():
    grid = (0.8,)
    weak = power_curve(small_config(beta_grid=grid, reps=60), n_threads=2)
    strong = power_curve(small_config(beta_grid=grid, reps=60,
                                      concentration=80 * 240.0), n_threads=2)
    assert strong.column("LR")[0] >= weak.column("LR")[0]


def test_csv_text_layout():
    t = power_curve(small_config(reps=10, boot_reps=100), n_threads=1)
    lines = t.to_csv_text().splitlines()
    assert lines[0] == "offset,LR,BLR,CLR,AR,LM"
    assert len(lines) == 4


def test_load_reference_tables():
    for k, spec in TABLE_SPECS.items():
        grid, cols = load_reference_table(k)
        assert np.allclose(grid, spec["grid"])
        for name in ("LR", "BLR", "CLR", "AR", "LM"):
            assert np.all((0 <= cols[name]) & (cols[name] <= 1))


def test_compare_self_is_exact():
    grid, cols = load_reference_table(1)
    table = PowerTable(grid=grid, rows=cols, config=table_config(1), reps_used=100)
    rep = compare_to_reference(table, 1)
    assert rep.passed
    assert rep.frac_within_008 == 1.0
    assert all(np.allclose(rep.diffs[t], 0.0) for t in rep.diffs)


def test_compare_flags_corruption():
    grid, cols = load_reference_table(1)
    rows = {k: v.copy() for k, v in cols.items()}
    rows["BLR"][5] += 0.5
    table = PowerTable(grid=grid, rows=rows, config=table_config(1), reps_used=100)
    rep = compare_to_reference(table, 1)
    assert not rep.passed
    assert rep.frac_within_015 < 1.0


def test_compare_grid_mismatch():
    grid, cols = load_reference_table(1)
    table = PowerTable(grid=grid + 0.01, rows=cols, config=table_config(1), reps_used=100)
    with pytest.raises(ValueError, match="mismatch"):
        compare_to_reference(table, 1)


def test_table_config_round_trip():
    for k in (1, 2, 3, 4):
        cfg = table_config(k, reps=7, boot_reps=150)
        assert cfg.reps == 7
        assert len(cfg.beta_grid) == len(TABLE_SPECS[k]["grid"])
        assert cfg.error.kind == TABLE_SPECS[k]["kind"]
    with pytest.raises(ValueError):
        table_config(9)


def test_oracle_lr_critical_is_null_quantile():
    cfg = small_config(reps=400)
    crit = oracle_lr_critical(cfg, 1.0, n_sims=4000)
    # rejection rate of fresh null data against this critical value ~ alpha
    t = power_curve(small_config(beta_grid=(1.0,), reps=400, boot_reps=120), n_threads=2)
    assert 0.01 <= t.column("LR")[0] <= 0.12
    assert crit > 0
