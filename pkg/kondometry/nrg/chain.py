import math
from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np

from kondometry.config import KondometryConfig
from kondometry.exceptions import InvalidInputError

__all__ = ["NrgConfig", "wilson_chain", "xi"]


@dataclass(frozen=True)
class NrgConfig:
    discretization: float = 3.0
    kept_states: int = 1500
    chain_length: int = 50
    band_halfwidth: float = 1.0
    temperature_prefactor: float = 0.5
    memory_budget: int = 2048

    def __post_init__(self):
        if not 1.0 < self.discretization <= 10.0:
            raise InvalidInputError(
                f"Discretization Lambda must lie in (1, 10], got {self.discretization}."
            )
        if self.kept_states < 100:
            raise InvalidInputError(f"At least 100 kept states required, got {self.kept_states}.")
        if self.chain_length < 10:
            raise InvalidInputError(f"At least 10 Wilson shells required, got {self.chain_length}.")
        if not self.band_halfwidth > 0.0:
            raise InvalidInputError("The band half-width must be positive.")
        if not self.temperature_prefactor > 0.0:
            raise InvalidInputError("The temperature prefactor must be positive.")
        if self.memory_budget <= 0:
            raise InvalidInputError("The memory budget must be positive.")

    @classmethod
    def from_config(cls, cfg: KondometryConfig) -> "NrgConfig":
        return cls(**{k: v for k, v in asdict(cfg.nrg).items()})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @property
    def beta_bar(self) -> float:
        """Ratio of the shell energy scale to the shell temperature."""
        return (1.0 + 1.0 / self.discretization) / (2.0 * self.temperature_prefactor)

    def scale(self, n: int) -> float:
        """Energy unit omega_n of shell n; the rescaled Hamiltonian is H_n / omega_n."""
        lam = self.discretization
        return 0.5 * self.band_halfwidth * (1.0 + 1.0 / lam) * lam ** (-(n - 1) / 2.0)

    def temperature(self, n: int) -> float:
        return self.temperature_prefactor * self.band_halfwidth * self.discretization ** (
            -(n - 1) / 2.0
        )

    def shell_of(self, temperature: float) -> float:
        """Fractional shell index whose temperature equals ``temperature``."""
        ratio = temperature / (self.temperature_prefactor * self.band_halfwidth)
        return 1.0 - 2.0 * math.log(ratio) / math.log(self.discretization)


def xi(n, discretization: float):
    """Hopping correction factor of a flat band, tending to 1 for large n."""
    n = np.asarray(n, dtype=float)
    inv = 1.0 / discretization
    return (1.0 - inv ** (n + 1)) / np.sqrt((1.0 - inv ** (2 * n + 1)) * (1.0 - inv ** (2 * n + 3)))


def wilson_chain(config: NrgConfig) -> np.ndarray:
    """Hoppings t_0 .. t_{N-1}, identical for both channels."""
    lam, d = config.discretization, config.band_halfwidth
    n = np.arange(config.chain_length)
    return 0.5 * d * (1.0 + 1.0 / lam) * lam ** (-n / 2.0) * xi(n, lam)
