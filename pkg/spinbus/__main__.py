import sys

from spinbus.cli import main

sys.exit(main())
