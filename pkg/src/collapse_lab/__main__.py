"""
Entry point for ``python -m collapse_lab``.
"""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
