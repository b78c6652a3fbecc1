"""Area and energy of the in-memory accelerator, from the calibrated model.

The stochastic fully-binarized system re-uses the same compact 1-bit cell
everywhere, saving 62% area over the 8-bit-first-layer design; its energy
grows linearly in T and stops winning at T = 8 presentations.
"""

from sbnn.archsim import (
    REFERENCE_SHAPE,
    compare_nonbinarized,
    crossover_presentations,
    default_cost_model,
    energy_breakdown,
    estimate_area,
    estimate_energy,
)

cm = default_cost_model()
shape = REFERENCE_SHAPE
print(f"network {'-'.join(map(str, shape))} on the 32x32-cell grid\n")

a_bin = estimate_area(shape, 1)
a_conv = estimate_area(shape, 8)
print(f"area, binary first layer : {a_bin:.3f} mm^2 (incl. LFSR bank)")
print(f"area, 8-bit first layer  : {a_conv:.3f} mm^2")
print(f"area saving              : {100 * (1 - a_bin / a_conv):.1f}%\n")

e_conv = estimate_energy(shape, 1, 8)
print(f"{'T':>4} {'E_stoch (nJ)':>14} {'E_8bit (nJ)':>12} {'factor':>8}   rng share")
for t in (1, 2, 3, 5, 8, 16):
    e_t = estimate_energy(shape, t, 1)
    parts = energy_breakdown(shape, t, 1)
    print(f"{t:>4} {e_t:>14.1f} {e_conv:>12.1f} {e_conv / e_t:>8.2f}   {100 * parts['rng'] / e_t:.2f}%")

print(f"\nbreak-even presentation count: T = {crossover_presentations(shape)}")
print(f"8-bit 784-500-500-10 MLP, arithmetic only: {compare_nonbinarized():.0f} nJ")
print(f"per-cell area 1b..8b: " + ", ".join(f"{b}b={v * 1e6:.0f}um^2" for b, v in cm.cell_area_mm2.items()))
print(f"per-cell energy 1b..8b: " + ", ".join(f"{b}b={v:.2f}pJ" for b, v in cm.cell_energy_pj.items()))
