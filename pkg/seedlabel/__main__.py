import sys

from seedlabel.cli import main

sys.exit(main())
