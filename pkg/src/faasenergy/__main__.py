import sys

from faasenergy.cli import main

sys.exit(main())
