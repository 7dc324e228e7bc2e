import sys

from heatblowup.cli import main

sys.exit(main())
