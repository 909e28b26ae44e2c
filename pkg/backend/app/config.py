import logging
import os
from dotenv import load_dotenv

load_dotenv()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class Settings:
    # Logging
    LOG_LEVEL: str = os.getenv("RICHARDSON_LOG_LEVEL", "INFO")

    # Experiment defaults
    SEED: int = int(os.getenv("RICHARDSON_SEED", "12345"))
    TARGET_UPDATES: int = int(os.getenv("RICHARDSON_TARGET_UPDATES", "500"))
    REPETITIONS: int = int(os.getenv("RICHARDSON_REPETITIONS", "100"))
    OUTPUT_DIR: str = os.getenv("RICHARDSON_OUTPUT_DIR", "results")

    # Runtime
    PIN_THREADS: bool = os.getenv("RICHARDSON_PIN_THREADS", "false").lower() == "true"

    # Numerics
    POWER_TOL: float = float(os.getenv("RICHARDSON_POWER_TOL", "1e-10"))
    DIVERGENCE_CAP: float = float(os.getenv("RICHARDSON_DIVERGENCE_CAP", "1e6"))
    RADIUS_SAMPLES: int = int(os.getenv("RICHARDSON_RADIUS_SAMPLES", "1024"))


settings = Settings()


def configure_logging(level: str = None) -> None:
    """Install the single stream handler used by the CLI."""
    level_name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(level=getattr(logging, level_name, logging.INFO), format=LOG_FORMAT, force=True)
