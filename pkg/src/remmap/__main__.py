import sys

from remmap.cli import main

sys.exit(main())
