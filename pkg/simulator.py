"""
Synthetic samples from the known-component mixture.

    Y = ε*              if Z = 0
    Y = α + βX + ε      if Z = 1,   Z ~ Bernoulli(π)

Nine built-in scenarios combine three overlap geometries (WO, MO, SO) with three
error families (n: normal, g: shifted gamma, e: shifted exponential).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd

from distributions import ErrorDistribution, Normal, ShiftedExponential, ShiftedGamma
from errors import ConfigurationError
from model_core import EuclideanParams, KnownComponent, SimulatedDataset

logger = logging.getLogger(__name__)

# geometry -> (alpha, beta, mean of X, sd of X, E(eps^2))
GEOMETRIES: Dict[str, Tuple[float, float, float, float, float]] = {
    "WO": (2.0, 1.0, 2.0, 3.0, 1.0),
    "MO": (2.0, 1.0, 2.0, 3.0, 4.0),
    "SO": (1.0, 0.5, 1.0, 2.0, 4.0),
}

GAMMA_SHAPE = 2.0
GAMMA_RATE = 0.5

SCENARIOS = tuple(f"{geo}{fam}" for geo in GEOMETRIES for fam in "nge")

# draw order of the independent substreams
STREAMS = ("x", "z", "eps", "eps_star")


def error_law(family: str, variance: float) -> ErrorDistribution:
    if family == "n":
        return Normal(float(np.sqrt(variance)))
    if family == "g":
        return ShiftedGamma(GAMMA_SHAPE, GAMMA_RATE, variance)
    if family == "e":
        return ShiftedExponential(variance)
    raise ConfigurationError(f"unknown error family '{family}' (expected n, g or e)")


@dataclass(frozen=True)
class ScenarioConfig:
    params: EuclideanParams
    x_mean: float
    x_sd: float
    eps_law: ErrorDistribution
    n: int
    seed: int
    known: KnownComponent = field(default_factory=KnownComponent)
    name: str = "custom"

    def __post_init__(self):
        self.params.validate()
        if self.n < 1:
            raise ConfigurationError(f"n must be positive, got {self.n}")
        if self.x_sd <= 0:
            raise ConfigurationError(f"sd of X must be positive, got {self.x_sd}")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must fit in 64 bits, got {self.seed}")


def stream_generators(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.Generator(np.random.Philox(child)) for name, child in zip(STREAMS, children)}


def derive_seed(master: int, index: int) -> int:
    """Seed of replicate `index`, derived by counter from the master seed."""
    return int(np.random.SeedSequence(master, spawn_key=(index,)).generate_state(1, np.uint64)[0])


def simulate(cfg: ScenarioConfig) -> SimulatedDataset:
    """
    Draw one sample. Each of x, z, ε and ε* comes from its own stream, n values each,
    so a larger n extends the sample of a smaller one with the same seed.
    """
    rng = stream_generators(cfg.seed)
    x = cfg.x_mean + cfg.x_sd * rng["x"].standard_normal(cfg.n)
    z = (rng["z"].random(cfg.n) < cfg.params.pi).astype(np.int8)
    eps = cfg.eps_law.sample(rng["eps"], cfg.n)
    eps_star = cfg.known.f_star.sample(rng["eps_star"], cfg.n)

    y = np.where(z == 1, cfg.params.alpha + cfg.params.beta * x + eps, eps_star)
    logger.debug(f"[SIM] {cfg.name} n={cfg.n} seed={cfg.seed} unknown-component share={z.mean():.3f}")
    return SimulatedDataset(x=x, y=y, z=z)


def builtin_scenario(name: str, pi0: float, n: int, seed: int) -> ScenarioConfig:
    """
    Args:
        name: one of SCENARIOS, e.g. "WOn" or "SOe".
        pi0: mixing proportion of the unknown component.
        n: sample size.
        seed: master seed.
    """
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario '{name}' (expected one of {', '.join(SCENARIOS)})")
    alpha, beta, x_mean, x_sd, variance = GEOMETRIES[name[:2]]
    return ScenarioConfig(
        params=EuclideanParams(alpha, beta, pi0),
        x_mean=x_mean,
        x_sd=x_sd,
        eps_law=error_law(name[2], variance),
        n=n,
        seed=seed,
        known=KnownComponent(0.0, 0.0, Normal(1.0)),
        name=name,
    )


def write_csv(data: SimulatedDataset, path: Union[str, Path], with_latent: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"x": data.x, "y": data.y})
    if with_latent:
        frame["z"] = data.z
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"[SIM] Wrote {len(frame)} rows to {path}")
    return path
