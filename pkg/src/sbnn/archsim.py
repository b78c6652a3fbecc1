"""Functional cycle-level model of the in-memory BNN accelerator.

The fabric is a 32x32 grid of identical cells; each cell stores 2 kbit of
weights, XNORs 32 stored bits against 32 input bits per cycle, and reduces
them to a 5-bit partial popcount that is accumulated in a register (or
fed to the per-column popcount tree). A layer pass therefore costs one
cell operation per 32-bit weight word, and the first layer repeats once
per stochastic presentation.

Cost calibration. The published figures give ratios and system totals but
not per-component constants, so `default_cost_model()` solves for them:

* energy: with E(T) = E_base + T * e_first and the conventional system at
  E_conv = E_base + e_first8, the anchors are E(3) = 90 nJ (random-bit
  generation excluded, as in the published energy curves), E_conv = 2.1 *
  E(3), and break-even with the conventional system exactly at T = 8.
  That fixes e_first = 19.8 nJ, E_base = 30.6 nJ, e_first8 = 158.4 nJ,
  which are then spread over the reference network's word operations
  (784-1024-1024-10: 25,600 first-layer ops, 33,088 downstream ops), the
  remainder becoming a fixed per-inference control/IO term.
* area: per-cell area solves the pair 0.73 mm^2 (binary system including
  the 0.048 mm^2 LFSR bank) and 1.95 mm^2 (8-bit first layer, no RNG),
  with an 8-bit cell exactly 6x the binary cell and a shared periphery
  term; 2- and 4-bit cells interpolate geometrically.

Random bits are modeled as a bank of one 8-bit generator per input pixel
producing a full presentation per cycle, so RNG energy is T cycles at the
published per-cycle cost (0.52 nJ LFSR, 0.125 nJ MRAM), scaled by pixel
count relative to the 784-pixel bank that was costed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .bitcore import BitVector
from .encoder import RngKind
from .errors import (
    DimensionMismatch,
    GridCapacityExceeded,
    InvalidConfig,
    LayerTooWide,
)
from .model import BnnModel, ge_scaled_threshold

CELL_WORD_BITS = 32
CELL_WORDS = 2048 // CELL_WORD_BITS  # 64 words of weight storage per cell

REFERENCE_SHAPE = (784, 1024, 1024, 10)
NONBIN_REFERENCE_SHAPE = (784, 500, 500, 10)
RNG_BANK_PIXELS = 784


class GridMode(str, Enum):
    SEQ_TO_PAR = "seq_to_par"
    PAR_TO_SEQ = "par_to_seq"


@dataclass(frozen=True)
class CellGridConfig:
    grid_rows: int = 32
    grid_cols: int = 32
    cell_weight_bits: int = 2048
    cell_xnor_width: int = CELL_WORD_BITS
    operating_bits: int = 1
    mode: GridMode = GridMode.SEQ_TO_PAR

    def __post_init__(self):
        if self.operating_bits not in (1, 2, 4, 8):
            raise InvalidConfig(f"operating bits must be 1/2/4/8, got {self.operating_bits}")
        object.__setattr__(self, "mode", GridMode(self.mode))

    @property
    def n_cells(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def capacity_bits(self) -> int:
        return self.n_cells * self.cell_weight_bits

    @property
    def cell_words(self) -> int:
        return self.cell_weight_bits // self.cell_xnor_width


@dataclass
class CostModel:
    """Per-component cost constants; see the module docstring for provenance."""

    cell_area_mm2: dict[int, float]
    cell_energy_pj: dict[int, float]  # per cell per cycle
    op_energy_nj: dict[int, float]  # system energy per 32-bit word op
    io_energy_nj: float  # fixed per-inference control/IO energy
    periphery_area_mm2: float
    rng_energy_nj_per_cycle: dict[str, float]
    rng_area_mm2: dict[str, float]
    multiply8_pj: float = 0.3
    add8_pj: float = 0.04
    rng_bank_pixels: int = RNG_BANK_PIXELS
    tree_share_of_remainder: float = 0.7  # popcount trees vs registers

    def op_energy(self, bits: int) -> float:
        return self.op_energy_nj[bits]

    def to_file(self, path):
        lines = ["# sbnn cost model (editable); units in key names"]
        flat = {}
        for b, v in self.cell_area_mm2.items():
            flat[f"cell_area_mm2.{b}"] = v
        for b, v in self.cell_energy_pj.items():
            flat[f"cell_energy_pj.{b}"] = v
        for b, v in self.op_energy_nj.items():
            flat[f"op_energy_nj.{b}"] = v
        flat["io_energy_nj"] = self.io_energy_nj
        flat["periphery_area_mm2"] = self.periphery_area_mm2
        for k, v in self.rng_energy_nj_per_cycle.items():
            flat[f"rng_energy_nj_per_cycle.{k}"] = v
        for k, v in self.rng_area_mm2.items():
            flat[f"rng_area_mm2.{k}"] = v
        flat["multiply8_pj"] = self.multiply8_pj
        flat["add8_pj"] = self.add8_pj
        flat["rng_bank_pixels"] = self.rng_bank_pixels
        flat["tree_share_of_remainder"] = self.tree_share_of_remainder
        lines += [f"{k} = {v!r}" for k, v in flat.items()]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "CostModel":
        base = default_cost_model()
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"cost model line without '=': {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            value = float(value)
            if "." in key:
                name, sub = key.split(".", 1)
                target = getattr(base, name, None)
                if not isinstance(target, dict):
                    raise InvalidConfig(f"unknown cost model table {name!r}")
                target[int(sub) if sub.isdigit() else sub] = value
            else:
                if not hasattr(base, key):
                    raise InvalidConfig(f"unknown cost model key {key!r}")
                setattr(base, key, int(value) if key == "rng_bank_pixels" else value)
        return base


def _interp_ratio(base: float, ratio8: float) -> dict[int, float]:
    """Geometric interpolation between the 1-bit value and ratio8 * it at 8 bits."""
    return {b: base * ratio8 ** (math.log2(b) / 3.0) for b in (1, 2, 4, 8)}


def layer_word_ops(layer_sizes) -> list[int]:
    """32-bit word operations per layer pass: rows * ceil(cols / 32)."""
    sizes = tuple(int(s) for s in layer_sizes)
    return [
        sizes[k + 1] * ((sizes[k] + CELL_WORD_BITS - 1) // CELL_WORD_BITS)
        for k in range(len(sizes) - 1)
    ]


def layer_cells(layer_sizes, grid: CellGridConfig | None = None) -> list[int]:
    """Cells needed per layer, packing words densely at 64 words per cell."""
    grid = grid or CellGridConfig()
    return [
        (ops + grid.cell_words - 1) // grid.cell_words if ops else 0
        for ops in layer_word_ops(layer_sizes)
    ]


def default_cost_model() -> CostModel:
    """Solve the calibration described in the module docstring."""
    ops = layer_word_ops(REFERENCE_SHAPE)
    ops_first, ops_rest = ops[0], sum(ops[1:])

    e_stoch3 = 90.0  # nJ, published stochastic system point at T = 3
    e_conv = 2.1 * e_stoch3  # published conventional/stochastic factor
    crossover_t = 8  # first T at which the stochastic system stops winning
    # E_base + 3 e_first = 90 and E_base + 8 e_first = E_conv (equality at
    # the break-even presentation count).
    e_first = (e_conv - e_stoch3) / (crossover_t - 3)
    e_base = e_stoch3 - 3 * e_first
    e_first8 = e_conv - e_base

    op1 = e_first / ops_first
    op8 = e_first8 / ops_first
    op_energy = _interp_ratio(op1, op8 / op1)
    io_energy = e_base - ops_rest * op1

    cell_energy = _interp_ratio(0.6 * op1 * 1e3, 4.5)  # pJ; 4.5x at 8 bits

    cells = layer_cells(REFERENCE_SHAPE)
    cells_first, cells_rest = cells[0], sum(cells[1:])
    area_stoch = 0.73  # mm^2, includes the LFSR bank
    area_conv = 1.95  # mm^2, 8-bit first layer, no RNG
    lfsr_area = 0.048
    # (cf + cr) A1 + lfsr + P = area_stoch ; (6 cf + cr) A1 + P = area_conv
    a1 = (area_conv - area_stoch + lfsr_area) / (5 * cells_first)
    periphery = area_conv - (6 * cells_first + cells_rest) * a1
    cell_area = _interp_ratio(a1, 6.0)

    return CostModel(
        cell_area_mm2=cell_area,
        cell_energy_pj=cell_energy,
        op_energy_nj=op_energy,
        io_energy_nj=io_energy,
        periphery_area_mm2=periphery,
        rng_energy_nj_per_cycle={RngKind.LFSR8.value: 0.52, "mram_trng": 0.125},
        rng_area_mm2={RngKind.LFSR8.value: 0.048, "mram_trng": 0.002},
    )


def _check_fit(layer_sizes, grid: CellGridConfig):
    sizes = tuple(int(s) for s in layer_sizes)
    for width in sizes:
        if width > 1024:
            raise LayerTooWide(f"layer width {width} exceeds 1024")
    raw_bits = sum(sizes[k] * sizes[k + 1] for k in range(len(sizes) - 1))
    if raw_bits > grid.capacity_bits:
        raise GridCapacityExceeded(
            f"{raw_bits} weight bits exceed grid capacity {grid.capacity_bits}"
        )
    if sum(layer_cells(sizes, grid)) > grid.n_cells:
        raise GridCapacityExceeded(
            f"{sum(layer_cells(sizes, grid))} cells needed, grid has {grid.n_cells}"
        )


@dataclass
class PlacedLayer:
    rows: int
    cols: int
    n_words32: int
    cell_start: int
    n_cells: int
    words32: np.ndarray  # (rows, n_words32) uint32 weight memory image
    word_mask: np.ndarray  # (n_words32,) uint32, masks tail bits of the last word


@dataclass
class Placement:
    model: BnnModel
    grid: CellGridConfig
    layers: list[PlacedLayer] = field(default_factory=list)

    @property
    def total_cells(self) -> int:
        return sum(p.n_cells for p in self.layers)


def _words32(words64: np.ndarray, cols: int) -> np.ndarray:
    """Reinterpret packed 64-bit rows as the cell's 32-bit word stream."""
    n32 = (cols + CELL_WORD_BITS - 1) // CELL_WORD_BITS
    if words64.size == 0:
        return np.zeros((words64.shape[0], n32), dtype=np.uint32)
    as32 = words64.astype("<u8").view("<u4").reshape(words64.shape[0], -1)
    return np.ascontiguousarray(as32[:, :n32]).astype(np.uint32)


def _word_mask(cols: int) -> np.ndarray:
    n32 = (cols + CELL_WORD_BITS - 1) // CELL_WORD_BITS
    mask = np.full(n32, 0xFFFFFFFF, dtype=np.uint32)
    rem = cols % CELL_WORD_BITS
    if rem and n32:
        mask[-1] = (1 << rem) - 1
    return mask


def map_model(model: BnnModel, grid: CellGridConfig | None = None) -> Placement:
    """Assign every layer's weight words to cell memory; validates fit."""
    grid = grid or CellGridConfig()
    _check_fit(model.layer_sizes, grid)
    placement = Placement(model, grid)
    seq = [model.first] + list(model.layers)
    cell_cursor = 0
    for layer in seq:
        ops = layer.rows * ((layer.cols + CELL_WORD_BITS - 1) // CELL_WORD_BITS)
        n_cells = (ops + grid.cell_words - 1) // grid.cell_words if ops else 0
        placed = PlacedLayer(
            rows=layer.rows,
            cols=layer.cols,
            n_words32=(layer.cols + CELL_WORD_BITS - 1) // CELL_WORD_BITS,
            cell_start=cell_cursor,
            n_cells=n_cells,
            words32=_words32(layer.weights.words, layer.cols),
            word_mask=_word_mask(layer.cols),
        )
        placement.layers.append(placed)
        cell_cursor += n_cells
    return placement


@dataclass
class SimReport:
    predicted_class: int | None
    cycles_by_layer: list[int]
    energy_nj: dict[str, float]
    area_mm2: float

    @property
    def cycles_total(self) -> int:
        return sum(self.cycles_by_layer)

    @property
    def energy_total_nj(self) -> float:
        return sum(self.energy_nj.values())

    def to_text(self) -> str:
        lines = [
            f"predicted class : {self.predicted_class}",
            f"cycles          : {self.cycles_total} {self.cycles_by_layer}",
            f"area            : {self.area_mm2:.4f} mm^2",
            "energy breakdown:",
        ]
        for key, val in self.energy_nj.items():
            lines.append(f"  {key:<15}: {val:10.4f} nJ")
        lines.append(f"  {'total':<15}: {self.energy_total_nj:10.4f} nJ")
        return "\n".join(lines)

    def csv_rows(self) -> list[tuple[str, str]]:
        rows = [("predicted_class", str(self.predicted_class))]
        rows.append(("cycles_total", str(self.cycles_total)))
        for i, c in enumerate(self.cycles_by_layer):
            rows.append((f"cycles_layer_{i + 1}", str(c)))
        for key, val in self.energy_nj.items():
            rows.append((f"energy_{key}_nj", repr(val)))
        rows.append(("energy_total_nj", repr(self.energy_total_nj)))
        rows.append(("area_mm2", repr(self.area_mm2)))
        return rows


def _cell_pass_popcounts(placed: PlacedLayer, x_words32: np.ndarray) -> np.ndarray:
    """One full pass of a layer over one input: per-neuron popcounts.

    Per cycle each active cell XNORs one stored 32-bit word against the
    broadcast input word and reduces it to a 5-bit partial count; the
    register/popcount-tree sums those partials per neuron. Summing the
    masked per-word XNOR counts reproduces that datapath exactly.
    """
    if placed.rows == 0 or placed.n_words32 == 0:
        return np.zeros(placed.rows, dtype=np.int64)
    xnor = np.bitwise_not(np.bitwise_xor(placed.words32, x_words32[None, :]))
    partial = np.bitwise_count(np.bitwise_and(xnor, placed.word_mask[None, :]))
    return partial.sum(axis=1).astype(np.int64)


def simulate_inference(
    placement: Placement,
    presentations: list[BitVector],
    cost: CostModel | None = None,
    rng_kind: RngKind = RngKind.LFSR8,
) -> SimReport:
    """Run the placed datapath on pre-sampled presentations.

    Accumulation happens at the first layer (the retained strategy); the
    class decision is bit-exact with model.infer_stochastic at
    accumulation_layer=1 on the same presentations.
    """
    cost = cost or default_cost_model()
    model = placement.model
    t = len(presentations)
    layers = placement.layers
    seq = [model.first] + list(model.layers)

    if not layers or layers[0].cols == 0 or t == 0:
        area = estimate_area(model.layer_sizes, 1, rng_kind, cost, placement.grid) if layers else 0.0
        return SimReport(
            predicted_class=None,
            cycles_by_layer=[0] * len(layers),
            energy_nj={k: 0.0 for k in ("cells", "popcount_trees", "registers", "rng", "control_io")},
            area_mm2=area,
        )

    for p in presentations:
        if p.length != layers[0].cols:
            raise DimensionMismatch(
                f"presentation width {p.length} != first layer {layers[0].cols}"
            )

    cycles = []
    ops_by_layer = []

    # First layer: accumulate popcounts over the T presentations.
    first = layers[0]
    regs = np.zeros(first.rows, dtype=np.int64)
    for p in presentations:
        regs += _cell_pass_popcounts(first, _words32(p.words[None, :], p.length)[0])
    ops_first = first.rows * first.n_words32
    cycles.append(t * (math.ceil(ops_first / first.n_cells) if first.n_cells else 0))
    ops_by_layer.append(t * ops_first)

    if model.depth == 1:
        scores = (2 * regs - t * first.cols) - t * model.first.mu_pm
        predicted = int(np.argmax(scores))
    else:
        bits = ge_scaled_threshold(2 * regs - t * first.cols, t, model.first.mu_pm)
        a_bits = bits
        for k in range(1, model.depth):
            placed = layers[k]
            x32 = _words32(
                BitVector.from_bits(a_bits).words[None, :], placed.cols
            )[0]
            p = _cell_pass_popcounts(placed, x32)
            ops = placed.rows * placed.n_words32
            ops_by_layer.append(ops)
            cycles.append(math.ceil(ops / placed.n_cells) if placed.n_cells else 0)
            if k == model.depth - 1:
                scores = (2 * p - placed.cols) - seq[k].mu
                predicted = int(np.argmax(scores))
            else:
                a_bits = p >= seq[k].theta
    # Energy: per-op constants split into cell vs tree vs register shares;
    # the control/IO term is charged once per inference.
    cell_pj = cost.cell_energy_pj[1]
    op_nj = cost.op_energy_nj[1]
    remainder = op_nj - cell_pj / 1e3
    total_ops = sum(ops_by_layer)
    energy = {
        "cells": total_ops * cell_pj / 1e3,
        "popcount_trees": total_ops * remainder * cost.tree_share_of_remainder,
        "registers": total_ops * remainder * (1 - cost.tree_share_of_remainder),
        "rng": t
        * cost.rng_energy_nj_per_cycle[_rng_key(rng_kind)]
        * (layers[0].cols / cost.rng_bank_pixels),
        "control_io": cost.io_energy_nj,
    }
    area = estimate_area(model.layer_sizes, 1, rng_kind, cost, placement.grid)
    return SimReport(
        predicted_class=predicted,
        cycles_by_layer=cycles,
        energy_nj=energy,
        area_mm2=area,
    )


def _rng_key(rng_kind) -> str:
    if isinstance(rng_kind, RngKind):
        return rng_kind.value
    return str(rng_kind)


def estimate_area(
    layer_sizes,
    first_layer_bits: int = 1,
    rng_kind: RngKind = RngKind.LFSR8,
    cost: CostModel | None = None,
    grid: CellGridConfig | None = None,
) -> float:
    """System area in mm^2 for a model shape.

    first_layer_bits=1 is the stochastic fully-binarized system (RNG bank
    included); first_layer_bits=8 is the conventional system with a
    fixed-point first layer and no RNG.
    """
    if first_layer_bits not in (1, 2, 4, 8):
        raise InvalidConfig(f"first layer bits must be 1/2/4/8, got {first_layer_bits}")
    cost = cost or default_cost_model()
    grid = grid or CellGridConfig()
    _check_fit(layer_sizes, grid)
    cells = layer_cells(layer_sizes, grid)
    if not cells:
        return 0.0
    area = cells[0] * cost.cell_area_mm2[first_layer_bits]
    area += sum(cells[1:]) * cost.cell_area_mm2[1]
    area += cost.periphery_area_mm2
    if first_layer_bits == 1:
        area += cost.rng_area_mm2[_rng_key(rng_kind)]
    return area


def estimate_energy(
    layer_sizes,
    t: int = 1,
    first_layer_bits: int = 1,
    rng_kind: RngKind = RngKind.LFSR8,
    cost: CostModel | None = None,
) -> float:
    """Energy per classified image in nJ; see energy_breakdown for parts."""
    return sum(energy_breakdown(layer_sizes, t, first_layer_bits, rng_kind, cost).values())


def energy_breakdown(
    layer_sizes,
    t: int = 1,
    first_layer_bits: int = 1,
    rng_kind: RngKind = RngKind.LFSR8,
    cost: CostModel | None = None,
) -> dict[str, float]:
    """Per-component energy (nJ): first layer, downstream layers, RNG, IO."""
    cost = cost or default_cost_model()
    sizes = tuple(int(s) for s in layer_sizes)
    ops = layer_word_ops(sizes)
    if not ops:
        return {"first_layer": 0.0, "downstream": 0.0, "rng": 0.0, "control_io": 0.0}
    if first_layer_bits == 1:
        if t < 1:
            raise InvalidConfig("binary first layer needs at least one presentation")
        first = t * ops[0] * cost.op_energy_nj[1]
        rng = t * cost.rng_energy_nj_per_cycle[_rng_key(rng_kind)] * (
            sizes[0] / cost.rng_bank_pixels
        )
    else:
        first = ops[0] * cost.op_energy_nj[first_layer_bits]
        rng = 0.0
    downstream = sum(ops[1:]) * cost.op_energy_nj[1]
    return {
        "first_layer": first,
        "downstream": downstream,
        "rng": rng,
        "control_io": cost.io_energy_nj,
    }


def crossover_presentations(
    layer_sizes, rng_kind: RngKind = RngKind.LFSR8, cost: CostModel | None = None,
    t_max: int = 1024,
) -> int | None:
    """Smallest T at which the stochastic system stops beating the 8-bit one."""
    conv = estimate_energy(layer_sizes, 1, 8, rng_kind, cost)
    for t in range(1, t_max + 1):
        if estimate_energy(layer_sizes, t, 1, rng_kind, cost) >= conv:
            return t
    return None


def compare_nonbinarized(
    layer_sizes=NONBIN_REFERENCE_SHAPE, cost: CostModel | None = None
) -> float:
    """Arithmetic-only energy (nJ) of an 8-bit MLP: MACs x (mult + add) cost."""
    cost = cost or default_cost_model()
    sizes = tuple(int(s) for s in layer_sizes)
    macs = sum(sizes[k] * sizes[k + 1] for k in range(len(sizes) - 1))
    return macs * (cost.multiply8_pj + cost.add8_pj) / 1e3
