import sys

from uqprop.runner.cli import main

sys.exit(main())
