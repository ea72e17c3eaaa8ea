"""Plain-text readers and writers used by the command line.

Every reader raises :class:`ValidationError` naming the file and the
1-based line number of the first malformed line.
"""

from __future__ import annotations

import os

import numpy as np

from .exceptions import ValidationError

SIG_DIGITS = 12


def fmt(x):
    """A float with 12 significant digits."""
    return f"{float(x):.{SIG_DIGITS}g}"


def _lines(path):
    """(line number, tokens) for every non-blank, non-comment line."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    out = []
    for i, line in enumerate(raw, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            out.append((i, body.split()))
    return out


def _floats(path, lineno, tokens, expected=None):
    if expected is not None and len(tokens) != expected:
        raise ValidationError(f"{path}:{lineno}: expected {expected} values, found {len(tokens)}")
    try:
        vals = [float(t) for t in tokens]
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: not a number in {' '.join(tokens)!r}") from None
    if not all(np.isfinite(vals)):
        raise ValidationError(f"{path}:{lineno}: non-finite value")
    return vals


def _header(path, lines, count):
    if not lines:
        raise ValidationError(f"{path}: empty file")
    lineno, tokens = lines[0]
    if len(tokens) != count:
        raise ValidationError(f"{path}:{lineno}: header must hold {count} integer(s)")
    try:
        dims = [int(t) for t in tokens]
    except ValueError:
        raise ValidationError(f"{path}:{lineno}: header must hold {count} integer(s)") from None
    if min(dims) < 1:
        raise ValidationError(f"{path}:{lineno}: sizes must be positive")
    return dims


def _table(path, lines, rows, cols):
    body = lines[1:]
    if len(body) != rows:
        where = body[rows][0] if len(body) > rows else (lines[-1][0] + 1)
        raise ValidationError(f"{path}:{where}: expected {rows} data rows, found {len(body)}")
    return np.array([_floats(path, i, t, cols) for i, t in body], dtype=float).reshape(rows, cols)


def read_points(path):
    """Header "d n", then n rows of d decimals. Returns an n x d array."""
    lines = _lines(path)
    d, n = _header(path, lines, 2)
    return _table(path, lines, n, d)


def read_gram(path):
    """Header "n", then n rows of n decimals."""
    lines = _lines(path)
    (n,) = _header(path, lines, 1)
    return _table(path, lines, n, n)


def read_joint(path):
    """Header "n m", then an n x m table."""
    lines = _lines(path)
    n, m = _header(path, lines, 2)
    return _table(path, lines, n, m)


def read_vector(path, n=None):
    """Whitespace-separated decimals, any layout."""
    vals = []
    for i, tokens in _lines(path):
        vals.extend(_floats(path, i, tokens))
    if not vals:
        raise ValidationError(f"{path}: empty file")
    v = np.array(vals)
    if n is not None and v.size != n:
        raise ValidationError(f"{path}: expected {n} values, found {v.size}")
    return v


def read_distribution(path, n=None, tol=1e-6):
    """A probability vector; renormalised after checking the mass is 1 within ``tol``."""
    p = read_vector(path, n)
    if p.min() < 0:
        raise ValidationError(f"{path}: negative probability")
    if abs(p.sum() - 1.0) > tol:
        raise ValidationError(f"{path}: values sum to {p.sum():.12g}, not 1")
    return p / p.sum()


def read_grid(path):
    """A square grid from PGM (P2) or a "d" header plus d rows of d decimals."""
    lines = _lines(path)
    if not lines:
        raise ValidationError(f"{path}: empty file")
    if lines[0][1][0] == "P2":
        return _read_pgm(path, lines)
    (d,) = _header(path, lines, 1)
    grid = _table(path, lines, d, d)
    if grid.min() < 0:
        raise ValidationError(f"{path}: intensities must be non-negative")
    return grid


def _read_pgm(path, lines):
    tokens = []
    for i, toks in lines:
        tokens.extend((i, t) for t in toks)
    if len(tokens) < 4:
        raise ValidationError(f"{path}:{tokens[-1][0]}: truncated PGM header")
    try:
        w, h, maxval = (int(t) for _, t in tokens[1:4])
    except ValueError:
        raise ValidationError(f"{path}:{tokens[1][0]}: bad PGM header") from None
    if w != h or w < 1 or maxval < 1:
        raise ValidationError(f"{path}:{tokens[1][0]}: grid must be square with positive maxval")
    pix = tokens[4:]
    if len(pix) != w * h:
        where = pix[w * h][0] if len(pix) > w * h else lines[-1][0]
        raise ValidationError(f"{path}:{where}: expected {w * h} pixels, found {len(pix)}")
    vals = []
    for i, t in pix:
        try:
            v = int(t)
        except ValueError:
            raise ValidationError(f"{path}:{i}: pixel {t!r} is not an integer") from None
        if not 0 <= v <= maxval:
            raise ValidationError(f"{path}:{i}: pixel {v} outside [0, {maxval}]")
        vals.append(v)
    return np.array(vals, dtype=float).reshape(h, w) / maxval


def read_grids(directory):
    """Every .pgm / .txt grid in ``directory``, in sorted filename order."""
    if not os.path.isdir(directory):
        raise ValidationError(f"{directory}: not a directory")
    names = sorted(f for f in os.listdir(directory) if f.endswith((".pgm", ".txt")))
    if not names:
        raise ValidationError(f"{directory}: no .pgm or .txt grids found")
    return [read_grid(os.path.join(directory, f)) for f in names]


def _write(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"{path}: cannot write ({exc.strerror})") from None


def write_pgm(path, grid, maxval=65535):
    """Scale ``grid`` so its maximum maps to ``maxval`` and write ASCII PGM."""
    grid = np.asarray(grid, dtype=float)
    top = grid.max()
    scaled = np.zeros(grid.shape, dtype=np.int64) if top <= 0 else np.rint(grid / top * maxval).astype(np.int64)
    h, w = grid.shape
    rows = "\n".join(" ".join(str(v) for v in row) for row in scaled)
    _write(path, f"P2\n{w} {h}\n{maxval}\n{rows}\n")


def write_measure(path, atoms, weights):
    """Header "d m", then m rows: d coordinates followed by the weight."""
    atoms = np.atleast_2d(atoms)
    m, d = atoms.shape
    rows = [" ".join(fmt(v) for v in a) + " " + fmt(w) for a, w in zip(atoms, weights)]
    _write(path, f"{d} {m}\n" + "".join(r + "\n" for r in rows))


def emit_trace(path, rows, header=("step", "objective")):
    """CSV with a header line and 12-significant-digit decimals (integers left as is)."""

    def cell(v):
        return str(v) if isinstance(v, (int, np.integer)) else fmt(v)

    lines = [",".join(header)] + [",".join(cell(v) for v in row) for row in rows]
    _write(path, "\n".join(lines) + "\n")
