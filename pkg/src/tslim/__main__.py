import sys

from tslim import cli

sys.exit(cli.main())
