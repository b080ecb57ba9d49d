import sys

from analex.cli import main

sys.exit(main())
