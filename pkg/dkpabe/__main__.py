import sys

from dkpabe.cli import main

sys.exit(main())
