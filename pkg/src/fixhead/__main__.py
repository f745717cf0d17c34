import sys

from fixhead.cli import main

sys.exit(main())
