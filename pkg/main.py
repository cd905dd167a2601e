import logging
import sys

from dotenv import load_dotenv

from src.config import SimConfig
from src.harness.cli import cli_main

# Load environment variables
load_dotenv()

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)


def main() -> int:
    config = SimConfig.from_env()
    if config.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
        logger.debug(f"Worker threads: {config.worker_count}")
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
