import sys

from hyperqma.cli import main

sys.exit(main())
