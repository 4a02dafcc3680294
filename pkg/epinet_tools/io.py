import os
from shutil import rmtree


def make_directory(path: str, clear: bool = False) -> None:
    """Create a directory (and its parents). An existing directory is kept unless clear is set."""
    if os.path.exists(path):
        if not os.path.isdir(path):
            raise NotADirectoryError(f"{path} exists and is not a directory.")
        if not clear:
            return
        rmtree(path)

    os.makedirs(path)
