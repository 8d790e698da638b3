"""Allow ``python -m inhomdiff``."""
import sys

from .cli import main

sys.exit(main())
