import sys

from bgn.cli import main

sys.exit(main())
