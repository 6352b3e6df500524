#!/usr/bin/env python3
"""
Punto de entrada principal de OSP-TBA.

Uso:
    python main.py sweep --config runs/afm.json --out f.csv
    python main.py validate
    python main.py compare --N 8 --J -1 --temps 0.5,1,2
    python main.py bethe --N 4 --sector 1
    python main.py --help
"""

import sys
from pathlib import Path

# El paquete ``app`` vive en backend/
BACKEND_DIR = Path(__file__).resolve().parent / "backend"
if str(BACKEND_DIR) not in sys.path:
    sys.path.insert(0, str(BACKEND_DIR))


def main() -> int:
    """Función principal."""
    from app.cli import main as cli_main

    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
