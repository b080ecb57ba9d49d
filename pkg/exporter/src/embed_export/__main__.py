import sys

from embed_export.cli import main

sys.exit(main())
