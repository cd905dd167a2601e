"""Process-level settings loaded from the environment."""

import os
from dataclasses import dataclass


@dataclass
class SimConfig:
    """Configuration container for the simulator process.

    All values are read from environment variables with sensible defaults.
    ``main.py`` loads a ``.env`` file first, so either source works.
    """

    threads: int  # worker cap for seeds/sweep cells, 0 = auto
    verbose: bool
    output_dir: str  # default output directory for CLI runs

    @classmethod
    def from_env(cls) -> "SimConfig":
        """Load configuration from environment variables."""
        threads_str = os.getenv("ROMER_SIM_THREADS", "0").strip()
        try:
            threads = max(0, int(threads_str))
        except ValueError:
            threads = 0

        return cls(
            threads=threads,
            verbose=os.getenv("VERBOSE", "false").lower() == "true",
            output_dir=os.getenv("ROMER_SIM_OUT", "results").strip() or "results",
        )

    @property
    def worker_count(self) -> int:
        """Resolved worker count (``threads`` or the CPU count when 0)."""
        if self.threads > 0:
            return self.threads
        return os.cpu_count() or 1
