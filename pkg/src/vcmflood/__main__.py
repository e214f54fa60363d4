import sys

from vcmflood.harness.cli import main

sys.exit(main())
