import sys

from quasisep.cli import main

sys.exit(main())
