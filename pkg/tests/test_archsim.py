"""Grid mapping, datapath simulation, and the calibrated cost model."""

import numpy as np
import pytest

from conftest import random_bnn
from sbnn.archsim import (
    REFERENCE_SHAPE,
    CellGridConfig,
    CostModel,
    GridMode,
    compare_nonbinarized,
    crossover_presentations,
    default_cost_model,
    energy_breakdown,
    estimate_area,
    estimate_energy,
    layer_cells,
    layer_word_ops,
    map_model,
    simulate_inference,
)
from sbnn.bitcore import BitMatrix, BitVector
from sbnn.encoder import RngKind, StochasticConfig, presentation_word_stack
from sbnn.errors import (
    DimensionMismatch,
    GridCapacityExceeded,
    InvalidConfig,
    LayerTooWide,
)
from sbnn.model import BnnModel, FirstLayerReal, infer_stochastic


class TestGridConfig:
    def test_appendix_defaults(self):
        grid = CellGridConfig()
        assert grid.n_cells == 1024
        assert grid.capacity_bits == 32 * 32 * 2048
        assert grid.cell_words == 64
        assert grid.mode is GridMode.SEQ_TO_PAR

    def test_operating_bits_validated(self):
        with pytest.raises(InvalidConfig):
            CellGridConfig(operating_bits=3)


class TestMapModel:
    def test_reference_network_fits(self):
        sizes = REFERENCE_SHAPE
        raw_bits = sum(sizes[k] * sizes[k + 1] for k in range(len(sizes) - 1))
        assert raw_bits == 1_861_632  # ~1.86 Mbit
        assert raw_bits <= CellGridConfig().capacity_bits
        assert sum(layer_cells(sizes)) <= 1024

    def test_layer_too_wide(self):
        with pytest.raises(LayerTooWide):
            estimate_area((784, 1025, 10))

    def test_capacity_exceeded(self):
        with pytest.raises(GridCapacityExceeded):
            estimate_area((1024, 1024, 1024, 1024))

    def test_placement_covers_all_words(self):
        rng = np.random.default_rng(60)
        model = random_bnn(rng, [100, 64, 10])
        placement = map_model(model)
        assert [p.rows for p in placement.layers] == [64, 10]
        assert [p.n_words32 for p in placement.layers] == [4, 2]
        ops = layer_word_ops(model.layer_sizes)
        for placed, n_ops in zip(placement.layers, ops):
            assert placed.rows * placed.n_words32 == n_ops
        assert placement.total_cells == sum(layer_cells(model.layer_sizes))

    def test_empty_model(self):
        model = BnnModel(
            FirstLayerReal(BitMatrix(0, 0, np.zeros((0, 0), dtype=np.uint64)), np.zeros(0))
        )
        placement = map_model(model)
        report = simulate_inference(placement, [])
        assert report.cycles_total == 0
        assert report.energy_total_nj == 0.0
        assert report.predicted_class is None


class TestSimulator:
    def _presentations(self, x, t, seed):
        cfg = StochasticConfig(t=t, seed=seed)
        words = presentation_word_stack(x, cfg)
        return [BitVector(x.size, w) for w in words], cfg

    def test_functional_equivalence_random_triples(self):
        rng = np.random.default_rng(61)
        for trial in range(10):
            sizes = [int(rng.integers(8, 60)) for _ in range(int(rng.integers(2, 5)))]
            model = random_bnn(rng, sizes, mu_scale=3.0)
            placement = map_model(model)
            x = rng.random(sizes[0])
            t = int(rng.integers(1, 7))
            pres, cfg = self._presentations(x, t, seed=trial)
            report = simulate_inference(placement, pres)
            assert report.predicted_class == infer_stochastic(model, x, cfg)

    def test_cycles_linear_in_t(self):
        rng = np.random.default_rng(62)
        model = random_bnn(rng, [96, 48, 12])
        placement = map_model(model)
        x = rng.random(96)
        pres4, _ = self._presentations(x, 4, seed=1)
        pres8, _ = self._presentations(x, 8, seed=1)
        r4 = simulate_inference(placement, pres4)
        r8 = simulate_inference(placement, pres8)
        assert r8.cycles_by_layer[0] == 2 * r4.cycles_by_layer[0]
        assert r8.cycles_by_layer[1:] == r4.cycles_by_layer[1:]

    def test_doubling_t_changes_only_first_layer_and_rng_energy(self):
        rng = np.random.default_rng(63)
        model = random_bnn(rng, [96, 48, 12])
        placement = map_model(model)
        x = rng.random(96)
        pres4, _ = self._presentations(x, 4, seed=2)
        pres8, _ = self._presentations(x, 8, seed=2)
        e4 = simulate_inference(placement, pres4).energy_nj
        e8 = simulate_inference(placement, pres8).energy_nj
        assert e8["rng"] == pytest.approx(2 * e4["rng"])
        assert e8["control_io"] == e4["control_io"]

    def test_zero_width_input(self):
        model = BnnModel(
            FirstLayerReal(BitMatrix(4, 0, np.zeros((4, 0), dtype=np.uint64)), np.zeros(4))
        )
        report = simulate_inference(map_model(model), [BitVector.zeros(0)])
        assert report.cycles_total == 0 and report.energy_total_nj == 0.0

    def test_width_mismatch(self):
        rng = np.random.default_rng(64)
        model = random_bnn(rng, [20, 8, 3])
        with pytest.raises(DimensionMismatch):
            simulate_inference(map_model(model), [BitVector.zeros(19)])

    def test_grid_modes_agree(self):
        # Both dataflows reduce the same partial popcounts; at functional
        # cycle granularity the class, cycles, and energy are identical.
        rng = np.random.default_rng(66)
        model = random_bnn(rng, [50, 20, 5])
        x = rng.random(50)
        pres, _ = self._presentations(x, 3, seed=4)
        reports = [
            simulate_inference(map_model(model, CellGridConfig(mode=mode)), pres)
            for mode in (GridMode.SEQ_TO_PAR, GridMode.PAR_TO_SEQ)
        ]
        assert reports[0].predicted_class == reports[1].predicted_class
        assert reports[0].cycles_by_layer == reports[1].cycles_by_layer
        assert reports[0].energy_nj == reports[1].energy_nj

    def test_report_totals_and_text(self):
        rng = np.random.default_rng(65)
        model = random_bnn(rng, [40, 16, 4])
        pres, _ = self._presentations(rng.random(40), 3, seed=3)
        report = simulate_inference(map_model(model), pres)
        assert report.energy_total_nj == pytest.approx(sum(report.energy_nj.values()))
        text = report.to_text()
        assert "predicted class" in text and "total" in text
        keys = dict(report.csv_rows())
        assert "energy_total_nj" in keys and "cycles_total" in keys


class TestCostModel:
    def test_published_area_points(self):
        a_bin = estimate_area(REFERENCE_SHAPE, 1, RngKind.LFSR8)
        a_conv = estimate_area(REFERENCE_SHAPE, 8)
        assert a_bin == pytest.approx(0.73, rel=0.02)
        assert a_conv == pytest.approx(1.95, rel=0.02)
        assert 100 * (1 - a_bin / a_conv) == pytest.approx(62, abs=1)

    def test_published_energy_points(self):
        e3 = estimate_energy(REFERENCE_SHAPE, 3, 1)
        e_conv = estimate_energy(REFERENCE_SHAPE, 1, 8)
        assert e3 == pytest.approx(90, rel=0.05)
        assert e_conv / e3 == pytest.approx(2.1, abs=0.1)
        assert crossover_presentations(REFERENCE_SHAPE) == 8

    def test_per_cell_ratios(self):
        cm = default_cost_model()
        assert cm.cell_area_mm2[8] / cm.cell_area_mm2[1] == pytest.approx(6.0, rel=0.05)
        assert cm.cell_energy_pj[8] / cm.cell_energy_pj[1] == pytest.approx(4.5, rel=0.05)
        for table in (cm.cell_area_mm2, cm.cell_energy_pj, cm.op_energy_nj):
            assert all(v > 0 for v in table.values())
            assert [table[b] for b in (1, 2, 4, 8)] == sorted(table[b] for b in (1, 2, 4, 8))
        assert cm.io_energy_nj > 0 and cm.periphery_area_mm2 > 0

    def test_nonbinarized_reference(self):
        assert compare_nonbinarized() == pytest.approx(220, rel=0.10)
        assert compare_nonbinarized((10, 0)) == 0.0
        assert compare_nonbinarized((1, 1)) == pytest.approx(0.34e-3)

    def test_breakdown_additivity(self):
        for t in (1, 3, 8, 16):
            parts = energy_breakdown(REFERENCE_SHAPE, t, 1)
            assert estimate_energy(REFERENCE_SHAPE, t, 1) == pytest.approx(sum(parts.values()))
        p1 = energy_breakdown(REFERENCE_SHAPE, 4, 1)
        p2 = energy_breakdown(REFERENCE_SHAPE, 8, 1)
        assert p2["downstream"] == p1["downstream"]
        assert p2["control_io"] == p1["control_io"]
        assert p2["first_layer"] == pytest.approx(2 * p1["first_layer"])
        assert p2["rng"] == pytest.approx(2 * p1["rng"])

    def test_rng_share_negligible_up_to_crossover(self):
        for t in range(1, 9):
            parts = energy_breakdown(REFERENCE_SHAPE, t, 1, RngKind.LFSR8)
            assert parts["rng"] / sum(parts.values()) < 0.05

    def test_mram_rng_cheaper(self):
        lfsr = energy_breakdown(REFERENCE_SHAPE, 8, 1, RngKind.LFSR8)["rng"]
        mram = energy_breakdown(REFERENCE_SHAPE, 8, 1, "mram_trng")["rng"]
        assert mram == pytest.approx(lfsr * 0.125 / 0.52)

    def test_binary_mode_requires_presentations(self):
        with pytest.raises(InvalidConfig):
            estimate_energy(REFERENCE_SHAPE, 0, 1)

    def test_file_roundtrip(self, tmp_path):
        cm = default_cost_model()
        cm.to_file(tmp_path / "cost.cfg")
        back = CostModel.from_file(tmp_path / "cost.cfg")
        assert back.op_energy_nj == pytest.approx(cm.op_energy_nj)
        assert back.cell_area_mm2 == pytest.approx(cm.cell_area_mm2)
        assert back.io_energy_nj == pytest.approx(cm.io_energy_nj)

    def test_file_override_and_bad_key(self, tmp_path):
        (tmp_path / "cost.cfg").write_text("io_energy_nj = 9.5\n")
        assert CostModel.from_file(tmp_path / "cost.cfg").io_energy_nj == 9.5
        (tmp_path / "bad.cfg").write_text("not_a_key = 1\n")
        with pytest.raises(InvalidConfig):
            CostModel.from_file(tmp_path / "bad.cfg")
