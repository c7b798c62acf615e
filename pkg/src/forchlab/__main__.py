"""``python -m forchlab``."""

import sys

from .cli import main

sys.exit(main())
