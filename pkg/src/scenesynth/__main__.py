import sys

from scenesynth.cli import main

sys.exit(main())
