"""Deterministic per-consumer random substreams derived from one master seed.

Every source of randomness in a run (crop positions, latent draws, parameter
init, oracle corpora) pulls from its own substream keyed by
(master_seed, step, consumer id). Toggling one consumer on or off therefore
never shifts the draws seen by the others, and any step can be replayed in
isolation, which is what makes checkpoint resume bit-exact.
"""

import numpy as np
import torch

# Consumer ids are append-only; renumbering would silently change every
# seeded run produced by earlier versions.
HR_CROPS = 0
LR_CROPS = 1
KERNEL_LATENT = 2
NOISE_LATENT = 3
PARAM_INIT = 4
ORACLE = 5
GALLERY = 6
HR_AUGMENT = 7
LR_AUGMENT = 8
SYNTHESIZE = 9


def substream_seed(master_seed: int, step: int, consumer: int) -> int:
    """Stable 63-bit seed for the (seed, step, consumer) substream."""
    ss = np.random.SeedSequence([int(master_seed), int(step), int(consumer)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


def numpy_stream(master_seed: int, step: int, consumer: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), int(step), int(consumer)])
    )


def torch_generator(master_seed: int, step: int, consumer: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(substream_seed(master_seed, step, consumer))
    return gen
