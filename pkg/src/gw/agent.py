"""Stand-alone node agent entry point: ``python -m gw.agent --port N``.

The agent is deployment-free: this module plus a port number is the whole
worker-side installation.
"""

from .jobs.agent import main

if __name__ == "__main__":
    main()
