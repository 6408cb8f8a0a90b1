#!/usr/bin/env python3
"""Strict structural validator for legacy ASCII VTK unstructured-grid files.

Checks the grammar independently of the writer: header lines, section order,
declared counts versus actual token counts, connectivity bounds, cell-type
arities, and that every numeric token parses as a finite float. Exits 0 when
every file passes, 1 with a message on stderr at the first violation.

Usage: vtk_check.py FILE.vtk [FILE.vtk ...]
"""
import math
import re
import sys

# cell type code -> required vertex count (only types a tet/triangle mesh uses,
# plus the other fixed-arity linear cells so foreign files get a fair reading)
CELL_ARITY = {1: 1, 3: 2, 5: 3, 8: 4, 9: 4, 10: 4, 11: 8, 12: 8, 13: 6, 14: 5}


class Fail(Exception):
    pass


class TokenStream:
    def __init__(self, lines):
        self.tokens = []
        self.line_of = []
        for ln, line in enumerate(lines, start=1):
            for tok in line.split():
                self.tokens.append(tok)
                self.line_of.append(ln)
        self.at = 0

    def done(self):
        return self.at >= len(self.tokens)

    def where(self):
        if self.done():
            return "end of file"
        return "line %d" % self.line_of[self.at]

    def peek(self):
        return None if self.done() else self.tokens[self.at]

    def word(self, expect=None):
        if self.done():
            raise Fail("unexpected end of file (wanted %s)" % (expect or "a token"))
        tok = self.tokens[self.at]
        self.at += 1
        if expect is not None and tok != expect:
            raise Fail("%s: expected '%s', found '%s'" % (self.where(), expect, tok))
        return tok

    def integer(self, what, lo=None, hi=None):
        tok = self.word(None)
        try:
            v = int(tok)
        except ValueError:
            raise Fail("%s: %s: '%s' is not an integer" % (self.where(), what, tok))
        if lo is not None and v < lo:
            raise Fail("%s: %s: %d is below %d" % (self.where(), what, v, lo))
        if hi is not None and v >= hi:
            raise Fail("%s: %s: %d is not below %d" % (self.where(), what, v, hi))
        return v

    def number(self, what):
        tok = self.word(None)
        try:
            v = float(tok)
        except ValueError:
            raise Fail("%s: %s: '%s' is not a number" % (self.where(), what, tok))
        if not math.isfinite(v):
            raise Fail("%s: %s: '%s' is not finite" % (self.where(), what, tok))
        return v


def check_attribute_block(ts, n, owner):
    """One POINT_DATA/CELL_DATA attribute: VECTORS or SCALARS+LOOKUP_TABLE."""
    kind = ts.word()
    if kind == "VECTORS":
        ts.word()  # data name
        if ts.word() not in ("float", "double"):
            raise Fail("%s: VECTORS in %s must be float or double" % (ts.where(), owner))
        for k in range(3 * n):
            ts.number("VECTORS component %d" % k)
    elif kind == "SCALARS":
        ts.word()  # data name
        if ts.word() not in ("float", "double", "int"):
            raise Fail("%s: SCALARS in %s has an unsupported type" % (ts.where(), owner))
        ncomp = 1
        nxt = ts.peek()
        if nxt is not None and re.fullmatch(r"[0-9]+", nxt):
            ncomp = ts.integer("SCALARS component count", lo=1, hi=5)
        ts.word("LOOKUP_TABLE")
        ts.word()  # table name
        for k in range(ncomp * n):
            ts.number("SCALARS value %d" % k)
    else:
        raise Fail("%s: expected VECTORS or SCALARS in %s, found '%s'"
                   % (ts.where(), owner, kind))


def check_file(path):
    with open(path, "rb") as f:
        raw = f.read()
    try:
        text = raw.decode("ascii")
    except UnicodeDecodeError as e:
        raise Fail("not pure ASCII at byte %d" % e.start)
    lines = text.split("\n")

    if len(lines) < 5:
        raise Fail("fewer than five lines; not a legacy VTK file")
    if not re.fullmatch(r"# vtk DataFile Version [0-9]+\.[0-9]+", lines[0]):
        raise Fail("line 1: bad version banner: %r" % lines[0])
    if len(lines[1]) > 255:
        raise Fail("line 2: title exceeds 255 characters")
    if lines[2] != "ASCII":
        raise Fail("line 3: expected 'ASCII', found %r" % lines[2])
    if lines[3] != "DATASET UNSTRUCTURED_GRID":
        raise Fail("line 4: expected 'DATASET UNSTRUCTURED_GRID', found %r" % lines[3])

    ts = TokenStream(lines[4:])
    # Re-number diagnostics relative to the whole file.
    ts.line_of = [ln + 4 for ln in ts.line_of]

    ts.word("POINTS")
    n_points = ts.integer("point count", lo=0)
    if ts.word() not in ("float", "double"):
        raise Fail("%s: POINTS type must be float or double" % ts.where())
    for k in range(3 * n_points):
        ts.number("point coordinate %d" % k)

    ts.word("CELLS")
    n_cells = ts.integer("cell count", lo=0)
    declared_size = ts.integer("CELLS token total", lo=0)
    arity = []
    used = 0
    for c in range(n_cells):
        k = ts.integer("cell %d vertex count" % c, lo=1)
        arity.append(k)
        used += 1 + k
        for _ in range(k):
            ts.integer("cell %d vertex index" % c, lo=0, hi=n_points)
    if used != declared_size:
        raise Fail("CELLS declares %d tokens but rows hold %d" % (declared_size, used))

    ts.word("CELL_TYPES")
    if ts.integer("CELL_TYPES count", lo=0) != n_cells:
        raise Fail("CELL_TYPES count disagrees with CELLS")
    for c in range(n_cells):
        code = ts.integer("cell %d type code" % c, lo=1)
        want = CELL_ARITY.get(code)
        if want is None:
            raise Fail("cell %d: unsupported cell type %d" % (c, code))
        if arity[c] != want:
            raise Fail("cell %d: type %d needs %d vertices, row has %d"
                       % (c, code, want, arity[c]))

    seen = set()
    while not ts.done():
        section = ts.word()
        if section not in ("POINT_DATA", "CELL_DATA"):
            raise Fail("%s: unexpected section '%s'" % (ts.where(), section))
        if section in seen:
            raise Fail("%s: duplicate %s section" % (ts.where(), section))
        seen.add(section)
        count = ts.integer("%s count" % section, lo=0)
        expect = n_points if section == "POINT_DATA" else n_cells
        if count != expect:
            raise Fail("%s declares %d entries, grid has %d" % (section, count, expect))
        while not ts.done() and ts.peek() in ("VECTORS", "SCALARS"):
            check_attribute_block(ts, count, section)

    return n_points, n_cells


def main(argv):
    if len(argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 1
    for path in argv[1:]:
        try:
            n_points, n_cells = check_file(path)
        except Fail as e:
            print("%s: %s" % (path, e), file=sys.stderr)
            return 1
        except OSError as e:
            print("%s: %s" % (path, e.strerror), file=sys.stderr)
            return 1
        print("%s: ok (%d points, %d cells)" % (path, n_points, n_cells))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
