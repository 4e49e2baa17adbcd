import sys

from almlab.main import main

sys.exit(main())
