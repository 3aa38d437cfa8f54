import sys

from skyfair.main import main

sys.exit(main())
