"""
Runs one subcommand per configuration file, e.g.

    python scripts/main.py train configs/toy.cfg configs/collision.cfg --seed 1
"""

import sys

from thsgr.cli import main


if __name__ == '__main__':
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    command, *rest = sys.argv[1:]
    configs = [a for a in rest if a.endswith('.cfg')]
    flags = [a for a in rest if not a.endswith('.cfg')]
    codes = [main([command, '--config', c, *flags]) for c in configs]
    sys.exit(max(codes, default=0))
