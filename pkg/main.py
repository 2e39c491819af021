import sys

from iontrap.cli_app import main

if __name__ == "__main__":
    # Mismo punto de entrada que el script `iontrap` instalado
    sys.exit(main())
