"""
Console and log-file messages.

Timestamps only ever appear here; emitted data files never contain them.
"""

import os
from datetime import datetime
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

LOG_FILE = Path(os.getenv('SPLITIG_LOG_FILE', 'data/logs/splitig.log'))


def log_message(message, level="INFO"):
    """Log message to file and console."""
    timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
    log_entry = f"[{timestamp}] [{level}] {message}\n"

    try:
        LOG_FILE.parent.mkdir(parents=True, exist_ok=True)
        with open(LOG_FILE, 'a') as f:
            f.write(log_entry)
    except OSError:
        # console output still goes through
        pass

    if level == "INFO":
        print(f"[{timestamp}] {message}")
    else:
        print(f"[{timestamp}] {level}: {message}")
