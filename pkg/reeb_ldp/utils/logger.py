import logging
import os
from datetime import datetime

log_dir = os.getenv('REEB_LDP_LOG_DIR', 'logs')

# Create logs directory if it doesn't exist
if not os.path.exists(log_dir):
    os.makedirs(log_dir, exist_ok=True)

# Configure logging
logger = logging.getLogger('reeb_ldp')
logger.setLevel(logging.INFO)

# Console output goes to stderr so CSV/JSON on stdout stays clean
console_handler = logging.StreamHandler()
file_handler = logging.FileHandler(
    os.path.join(log_dir, f'reeb_ldp_{datetime.now().strftime("%Y%m%d")}.log'),
    encoding='utf-8'
)

log_format = logging.Formatter(
    '%(asctime)s [%(levelname)s] %(name)s - %(message)s'
)
console_handler.setFormatter(log_format)
file_handler.setFormatter(log_format)

if not logger.handlers:
    logger.addHandler(console_handler)
    logger.addHandler(file_handler)
logger.propagate = False
