#!/usr/bin/env python3
"""Rasterize the first page of a PDF: pdf2png.py IN.pdf OUT.png [--dpi N]."""
import argparse
import sys

try:
    import pymupdf
except ImportError:
    sys.exit("pdf2png: PyMuPDF is not installed (pip install pymupdf)")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("pdf")
    ap.add_argument("png")
    ap.add_argument("--dpi", type=int, default=200)
    args = ap.parse_args()
    with pymupdf.open(args.pdf) as doc:
        if doc.page_count < 1:
            sys.exit("pdf2png: no pages")
        pix = doc[0].get_pixmap(dpi=args.dpi, alpha=False)
        pix.save(args.png)


if __name__ == "__main__":
    main()
