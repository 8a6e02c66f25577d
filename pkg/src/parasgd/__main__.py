import sys

import parasgd.cli as cli


def main():
    sys.exit(cli.main())


# https://setuptools.pypa.io/en/latest/userguide/entry_point.html
if __name__ == "__main__":
    main()
