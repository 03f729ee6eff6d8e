import os
import sys

build = os.environ.get("SOFTSHADOW_BUILD_DIR")
if build:
    sys.path.insert(0, os.path.join(build, "python"))
