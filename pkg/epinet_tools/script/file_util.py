import argparse
import os
from typing import Optional


def check_valid_file(parser: argparse.ArgumentParser, path: Optional[str]) -> Optional[str]:
    """Raise a parser error if the given file does not exist. Returns the absolute path."""
    if path is None:
        return None
    if not os.path.isfile(path):
        parser.error(f"{path} is not a valid file.")
    return os.path.abspath(path)


def check_output_directory(parser: argparse.ArgumentParser, directory: str) -> str:
    """Raise a parser error if the output location exists but is not a directory. Returns the absolute path."""
    directory = os.path.abspath(directory)
    if os.path.exists(directory) and not os.path.isdir(directory):
        parser.error(f"{directory} is not a valid directory.")
    return directory
