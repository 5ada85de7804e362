import sys

from adrsig.cli import main

sys.exit(main())
