import sys

from dcid.cli import main

sys.exit(main())
