"""Monte Carlo fabrication-imperfection model.

Each ideal unbalanced beamsplitter block is replaced by its realistic
four-factor equivalent: a lossy channel-flip, a noisy symmetric 50:50
beamsplitter, a pair of noisy phase shifters, and a second noisy symmetric
beamsplitter.  Composing the noisy blocks in layout order yields a
sub-unitary transfer matrix, one per Monte Carlo realization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .circuits import SYMMETRIC_BS, UNBALANCED_BS, CircuitLayout, _validate_element
from .errors import ParameterError


@dataclass(frozen=True)
class NoiseModel:
    """Fabrication noise and loss levels.

    ``sigma_t`` jitters the amplitude transmittance of each symmetric 50:50
    beamsplitter as tau = (1 + sigma_t * randn) / sqrt(2); ``sigma_p`` adds
    Gaussian phase errors (radians) to the two internal shifters of every
    block.  ``bs_loss_db`` is the power loss (dB, <= 0) attributed to one
    unbalanced-beamsplitter building block, shared equally by its two
    internal symmetric beamsplitters; the block amplitude scale is the
    single constant ``10**(bs_loss_db / 20)``.
    """

    sigma_t: float = 0.0
    sigma_p: float = 0.0
    bs_loss_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_t < 0 or self.sigma_p < 0:
            raise ParameterError("noise std-devs must be nonnegative")
        if self.bs_loss_db > 0:
            raise ParameterError("bs_loss_db is a loss and must be <= 0")

    @property
    def block_amplitude(self) -> float:
        """Amplitude factor applied by one lossy block (the flip-matrix scale)."""
        return 10.0 ** (self.bs_loss_db / 20.0)


@dataclass(frozen=True)
class RealizationBatch:
    """Stack of realized transfer matrices, shape (n_realizations, K, K)."""

    matrices: np.ndarray

    @property
    def n_realizations(self) -> int:
        return self.matrices.shape[0]

    @property
    def dim(self) -> int:
        return self.matrices.shape[1]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_realizations": int(self.n_realizations),
                "dim": int(self.dim),
                "re": self.matrices.real.tolist(),
                "im": self.matrices.imag.tolist(),
            }
        )


def _rng_for(model: NoiseModel, index: int) -> np.random.Generator:
    """Documented deterministic map (seed, realization index) -> RNG stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((model.seed, index))))


def noisy_block(t: float, model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Realistic 2x2 block for an unbalanced beamsplitter of transmittance t.

    Draws four independent standard normals, in this order: the two
    symmetric-beamsplitter transmittance errors, then the two shifter phase
    errors.  Transmittance amplitudes are clipped to [0, 1] so the block
    stays physical for large noise draws.
    """
    if not 0.0 <= t <= 1.0:
        raise ParameterError(f"power transmittance outside [0, 1]: {t}")
    omega = math.asin(math.sqrt(t))
    draws = rng.standard_normal(4)
    tau1 = min(1.0, max(0.0, (1.0 + model.sigma_t * draws[0]) / math.sqrt(2.0)))
    tau2 = min(1.0, max(0.0, (1.0 + model.sigma_t * draws[1]) / math.sqrt(2.0)))
    ph_a = omega + math.pi + model.sigma_p * draws[2]
    ph_b = -omega + model.sigma_p * draws[3]

    def sym(tau: float) -> np.ndarray:
        c = 1j * math.sqrt(1.0 - tau * tau)
        return np.array([[tau, c], [c, tau]])

    flip = model.block_amplitude * np.array([[0.0, 1.0], [1.0, 0.0]])
    shift = np.array([[np.exp(1j * ph_a), 0.0], [0.0, np.exp(1j * ph_b)]])
    return flip @ sym(tau1) @ shift @ sym(tau2)


def realize_circuit(
    layout: CircuitLayout, model: NoiseModel, index: int = 0
) -> np.ndarray:
    """One noisy realization of a layout; deterministic in (layout, seed, index).

    Unbalanced beamsplitters become noisy blocks; free-standing phase
    shifters and explicit symmetric beamsplitters compose at their ideal
    values (the imperfections of the shifters internal to each block are
    already part of the block model).
    """
    k = layout.dim
    rng = _rng_for(model, index)
    m = np.eye(k, dtype=complex)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    for el in layout.elements:
        _validate_element(el, k)
        if el.kind == UNBALANCED_BS:
            a, b = el.ports[0] - 1, el.ports[1] - 1
            blk = noisy_block(el.t, model, rng)
            ra = m[a].copy()
            m[a] = blk[0, 0] * ra + blk[0, 1] * m[b]
            m[b] = blk[1, 0] * ra + blk[1, 1] * m[b]
        elif el.kind == SYMMETRIC_BS:
            a, b = el.ports[0] - 1, el.ports[1] - 1
            ra = m[a].copy()
            m[a] = inv_sqrt2 * (ra + 1j * m[b])
            m[b] = inv_sqrt2 * (1j * ra + m[b])
        else:
            m[el.ports[0] - 1] *= np.exp(1j * el.phase)
    if layout.output_perm is not None:
        m = m[list(layout.output_perm)]
    return m


def realize_batch(layout: CircuitLayout, model: NoiseModel, n: int) -> RealizationBatch:
    """n independent realizations with per-index RNG substreams.

    Realization i depends only on (layout, model.seed, i), so batches are
    reproducible regardless of evaluation order or batch size.
    """
    if n < 1:
        raise ParameterError("need at least one realization")
    out = np.empty((n, layout.dim, layout.dim), dtype=complex)
    for i in range(n):
        out[i] = realize_circuit(layout, model, index=i)
    return RealizationBatch(matrices=out)
