"""
File contains a function call that runs the entire project
"""

import logging

from app.frontend.cli import admg


def run_app(argv: list[str] | None = None) -> None:
    """
    Main function which configures logging and runs the command line interface.
    :param argv: arguments, defaults to sys.argv
    :return: Nothing, exits with the command's code
    """
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    admg.main(args=argv, prog_name="admg")
