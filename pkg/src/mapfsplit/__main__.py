import sys

from mapfsplit.cli import main

sys.exit(main())
