"""Utility functions."""
import os
import io
import csv
import json
import time
import gzip
import pickle
import shutil
import tempfile
from contextlib import contextmanager

import numpy as np


@contextmanager
def atomic_open(path, mode="wb"):
    """Open a temporary sibling of `path` and move it into place on success.

    Nothing is left at `path` if the block raises.
    """
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        os.makedirs(directory)

    fd, tmp = tempfile.mkstemp(prefix=".%s." % os.path.basename(path),
                               dir=directory)
    try:
        with os.fdopen(fd, mode) as f:
            yield f
        os.replace(tmp, path)

    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@contextmanager
def atomic_directory(path):
    """Yield a temporary sibling directory of `path` and swap it into place
    on success.

    An existing `path` is replaced as a whole; if the block raises, `path`
    is left as it was and the temporary directory is removed.
    """
    path = os.path.abspath(os.fspath(path))
    parent = os.path.dirname(path)
    if not os.path.isdir(parent):
        os.makedirs(parent)

    staging = tempfile.mkdtemp(prefix=".%s." % os.path.basename(path),
                               dir=parent)
    try:
        yield staging

    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise

    retired = None
    if os.path.exists(path):
        retired = tempfile.mkdtemp(prefix=".%s.old." % os.path.basename(path),
                                   dir=parent)
        os.rmdir(retired)
        os.rename(path, retired)

    try:
        os.rename(staging, path)
    except BaseException:
        if retired is not None:
            os.rename(retired, path)
        shutil.rmtree(staging, ignore_errors=True)
        raise

    if retired is not None:
        shutil.rmtree(retired, ignore_errors=True)


def atomic_write(path, data):
    """Write `bytes` or `str` to `path` atomically."""
    mode = "wb" if isinstance(data, (bytes, bytearray)) else "w"
    with atomic_open(path, mode) as f:
        f.write(data)


def dumps_json(obj):
    """Deterministic JSON text with sorted keys; numpy values become lists."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) \
        + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    raise TypeError("""Object of type %s is not JSON serializable."""
                    % type(obj).__name__)


def rows_to_csv(header, rows):
    """Render rows as CSV text with a header line and `repr`-exact floats."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating))
                         else v for v in row])
    return buffer.getvalue()


def save(obj, path, filename=None, gz=None):
    """Pickle a pythonic `obj` into a file given by `path`.

    Parameters
    ----------
    obj: any python object
        An object to pickle.

    path: string
        A directory, or a prefix, in which to pickle the object.

    filename: string, optinal
        Specify filename for re-building experiments results. If None - will
        be saved as time.

    gz: integer, or None, optinal
        If None, then does not apply compression while pickling. Otherwise
        must be an integer 0-9 which determines the level of GZip compression:
        the lower the level the less thorough but the more faster the
        compression is.

    Returns
    -------
    filename: string
        The name of the resulting archive.
    """
    if not(gz is None or (isinstance(gz, int) and 0 <= gz <= 9)):
        raise TypeError("""`gz` parameter must be either `None` """
                        """or an integer 0-9.""")

    if filename is None:
        filename_ = "%s-%s.%s" % (path, time.strftime("%Y%m%d_%H%M%S"),
                                  "pic" if gz is None else "gz")
    else:
        filename_ = os.path.join(path, "%s%s" % (
            filename, ".pic" if gz is None else ".gz"))

    payload = pickle.dumps(obj)
    if gz is not None:
        # fixed mtime keeps archives of identical objects identical
        payload = gzip.compress(payload, gz, mtime=0)

    atomic_write(filename_, payload)
    return filename_


def load(filename):
    """Recover an object from the file identified by `filename`.

    Parameters
    ----------
    filename: string
        A `file` in which an object is pickled.

    Returns
    -------
    object: a python object
        The recovered pythonic object.
    """
    open_ = open if not filename.endswith(".gz") else gzip.open

    with open_(filename, "rb") as f:
        obj = pickle.load(f)

    return obj
