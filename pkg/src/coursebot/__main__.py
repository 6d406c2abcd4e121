import sys

from coursebot.cli import main

sys.exit(main())
