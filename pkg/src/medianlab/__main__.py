"""Allow ``python -m medianlab``."""

import sys

from medianlab.cli import main

sys.exit(main())
