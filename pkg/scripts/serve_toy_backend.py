#!/usr/bin/env python3
"""Launch a toy transducer server for driving the wire protocol by hand.

Thin wrapper over `python3 -m senssum.serve`; see that module for the
full flag set. Typical uses:

    python3 scripts/serve_toy_backend.py --transport http --role echo \
        --port 8765
    python3 scripts/serve_toy_backend.py --transport stdio \
        --role oracle-tsum
    python3 scripts/serve_toy_backend.py --transport http \
        --role corrupt --sub-rate 0.05 --port 8765 --jitter-ms 20
"""

import sys

from senssum.serve import main

if __name__ == "__main__":
    sys.exit(main())
