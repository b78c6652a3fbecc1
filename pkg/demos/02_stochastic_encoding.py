"""Stochastic input presentations: grayscale pixels become Bernoulli bits.

Each pixel value in [0, 1] is the probability that its bit fires in one
presentation. A single presentation is a very rough sketch of the image;
averaging presentations recovers the grayscale values at 1/sqrt(T) rate.
Rendered here as ASCII art on a synthetic image.
"""

import numpy as np

from sbnn import StochasticConfig, make_bit_source, sample_presentations
from sbnn.synth import make_benchmark

SHADES = " .:-=+*#%@"


def show(img, side=28, step=2):
    for row in img.reshape(side, side)[::step]:
        print("".join(SHADES[int(v * (len(SHADES) - 1))] for v in row[::step]))


train, _ = make_benchmark(8, 1, seed=5)
x = train.images[0]

print("grayscale input:")
show(x)

cfg = StochasticConfig(t=64, seed=3)
pres = sample_presentations(x, cfg.t, make_bit_source(cfg, x.size))

print("\nsingle presentation (T=1):")
show(pres[0].to_bits().astype(float))

for t in (8, 64):
    mean = np.mean([p.to_bits() for p in pres[:t]], axis=0)
    err = np.abs(mean - x).mean()
    print(f"\nmean of {t} presentations (mean abs error {err:.3f}):")
    show(mean)
