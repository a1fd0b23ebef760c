import sys

from fracocp.cli import main

sys.exit(main())
