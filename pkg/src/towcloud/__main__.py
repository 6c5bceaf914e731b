"""Run the CLI via ``python -m towcloud``."""

import sys

from .cli import main

sys.exit(main())
