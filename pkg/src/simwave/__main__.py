import sys

from simwave.cli import main

sys.exit(main())
