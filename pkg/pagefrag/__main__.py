import sys

from pagefrag.cli import main

sys.exit(main())
