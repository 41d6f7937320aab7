import sys

from mpqr.cli import main

sys.exit(main())
