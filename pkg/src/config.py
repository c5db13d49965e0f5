"""Configuration module to load environment variables."""
import logging
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables from .env file
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)

# Import os after loading .env to ensure variables are available
import os

# Semente fixa e documentada: sem --seed a execução continua determinística
DEFAULT_SEED = 20190712

DOA_SEED = int(os.getenv('DOA_SEED', DEFAULT_SEED))
DOA_JOBS = max(1, int(os.getenv('DOA_JOBS', 1)))
DOA_LOG_LEVEL = os.getenv('DOA_LOG_LEVEL', 'WARNING').upper()

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = DOA_LOG_LEVEL) -> None:
    """Configura o logging da aplicação (chamado uma única vez pela CLI)."""
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING), format=LOG_FORMAT)
