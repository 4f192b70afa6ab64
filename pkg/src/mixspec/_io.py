"""All-or-nothing file output."""

from __future__ import annotations

import contextlib
import os
import tempfile
from pathlib import Path


@contextlib.contextmanager
def atomic_outputs(paths):
    """Yield temporary paths; rename them onto ``paths`` only if the block succeeds.

    Temporaries live next to their targets so the final ``os.replace`` is a
    same-filesystem rename.  On any exception every temporary is removed and
    no target is touched.
    """
    targets = [Path(p) for p in paths]
    temps = []
    try:
        for t in targets:
            t.parent.mkdir(parents=True, exist_ok=True)
            fd, name = tempfile.mkstemp(prefix=f".{t.name}.", suffix=".tmp", dir=t.parent)
            os.close(fd)
            temps.append(Path(name))
        yield temps
        for tmp, t in zip(temps, targets):
            os.replace(tmp, t)
    finally:
        for tmp in temps:
            with contextlib.suppress(FileNotFoundError):
                tmp.unlink()
