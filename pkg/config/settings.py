import os

from dotenv import load_dotenv

load_dotenv()

# ENVIRONMENT OVERRIDES

STAC_ENDPOINT = os.getenv('PALAEO_STAC_ENDPOINT')
DATA_DIR = os.getenv('PALAEO_DATA_DIR', './data')
LOG_FILE = os.getenv('PALAEO_LOG_FILE')
HTTP_TIMEOUT = float(os.getenv('PALAEO_HTTP_TIMEOUT', '30'))
WORKERS = int(os.getenv('PALAEO_WORKERS', '0')) or (os.cpu_count() or 1)

DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'defaultConfig.json')
