import sys

from clup.cli import main

sys.exit(main())
