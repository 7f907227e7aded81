import sys

from pupilemo.cli import main

sys.exit(main())
