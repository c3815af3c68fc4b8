# Copyright 2025 Liatrio
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Seed derivation shared by workers, stream generators and experiment trials."""

import random

import numpy as np

SEED_MASK = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Derive an independent 64-bit seed from a tuple of non-negative integers.

    ``derive_seed(run_seed, worker_id)`` and
    ``derive_seed(base_seed, config_index, trial_index)`` are the two forms
    used across the package. Equal inputs always give equal seeds.
    """
    entropy = [int(part) & SEED_MASK for part in parts]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return (int(state[0]) << 32 ^ int(state[1])) & SEED_MASK


def python_rng(*parts: int) -> random.Random:
    """Scalar generator for hot loops (one draw per edge)."""
    return random.Random(derive_seed(*parts))


def numpy_rng(*parts: int) -> np.random.Generator:
    """Vectorized generator for whole-stream operations."""
    return np.random.default_rng(derive_seed(*parts))
