import sys

from fskmv.cli import main

sys.exit(main())
