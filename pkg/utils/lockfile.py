import logging
import os

from models.errors import OutputLocked

logger = logging.getLogger(__name__)

LOCK_NAME = ".palaeolens.lock"


class OutputLock:
    """Exclusive lock on an output directory; a second pipeline on the same directory fails fast."""

    def __init__(self, outputDir: str):
        self._path = os.path.join(outputDir, LOCK_NAME)
        self._held = False

    @property
    def path(self) -> str:
        return self._path

    def acquire(self):
        os.makedirs(os.path.dirname(self._path), exist_ok = True)
        try:
            fd = os.open(self._path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise OutputLocked(f"{self._path} exists: another pipeline holds this output directory")

        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._held = True
        logger.debug(f"Acquired {self._path}")

    def release(self):
        if self._held:
            try:
                os.remove(self._path)
            except FileNotFoundError:
                pass
            self._held = False

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, excType, exc, tb):
        self.release()
        return False
