"""Provide utils for sphverify."""


import json
import logging
from multiprocessing import Pool, Semaphore

from tqdm.auto import tqdm


class WriteBuffer:
    """Buffer text rows and flush them to an open file every ``linenumber`` rows."""

    def __init__(self, f, linenumber=1200):
        if f.mode != 'w':
            raise RuntimeError(f"{f.name} must be opened with mode 'w', not {f.mode!r}")
        self.f = f
        self.linenumber = linenumber
        self.rows = []

    def append(self, row):
        self.rows.append(row)
        if len(self.rows) >= self.linenumber:
            self.flush()

    def flush(self):
        if self.rows:
            self.f.write(''.join(self.rows))
            self.rows.clear()
            self.f.flush()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.flush()
        self.f.close()


def _throttle(semaphore, tasks):
    for task in tasks:
        semaphore.acquire()
        yield task


def run_mp(nproc, func, l, unordered=True, bar=True, desc=None, total=None):
    """Map ``func`` over ``l`` in ``nproc`` worker processes.

    Results are yielded as they arrive, or in input order when ``unordered``
    is False. ``nproc == 1`` runs in this process.
    """
    progress = dict(desc=desc, total=total, disable=not bar)
    if nproc == 1:
        yield from tqdm(map(func, l), **progress)
        return
    pool = Pool(nproc, maxtasksperchild=1000)
    semaphore = Semaphore(nproc * 150)
    imap = pool.imap_unordered if unordered else pool.imap
    try:
        for item in tqdm(imap(func, _throttle(semaphore, l), 1), **progress):
            yield item
            semaphore.release()
    except BaseException:
        logging.exception("run_mp failed")
        pool.terminate()
        raise
    else:
        pool.close()
    finally:
        pool.join()


class SCOUROPTIONS:
    strip_xml_prolog = True
    remove_titles = True
    remove_descriptions = True
    remove_metadata = True
    remove_descriptive_elements = True
    strip_comments = True
    enable_viewboxing = True
    strip_xml_space_attribute = True
    strip_ids = True
    shorten_ids = True
    newlines = False


class SharedStudyData:
    """Copy keys from a study onto a stage object and hand results back."""

    def __init__(self, study, usedStudyKeys, returnedStudyKeys, extraNoneKeys=None):
        self.study = study
        self.returnedStudyKeys = returnedStudyKeys
        for key in usedStudyKeys:
            setattr(self, key, getattr(self.study, key))
        for key in returnedStudyKeys:
            setattr(self, key, None)
        if extraNoneKeys is not None:
            for key in extraNoneKeys:
                setattr(self, key, None)

    def returnkeys(self):
        for key in self.returnedStudyKeys:
            setattr(self.study, key, getattr(self, key))


def must_be_list(obj):
    if isinstance(obj, list):
        return obj
    if isinstance(obj, tuple):
        return list(obj)
    return [obj]


def parse_value(text):
    """Parse a JSON literal, falling back to the raw string."""
    try:
        return json.loads(text)
    except ValueError:
        return text


def read_keyvalue_file(filename):
    """Read ``key=value`` lines; ``#`` starts a comment."""
    config = {}
    with open(filename) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise ValueError(f"{filename}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split('=', 1))
            config[key] = parse_value(value)
    return config
