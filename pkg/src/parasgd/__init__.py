__version__ = "2024.3.1"
__license__ = "GPL-3.0"
__author__ = "parasgd developers"
