"""Allow ``python -m relaysec``."""
import sys

from .cli import main

sys.exit(main())
