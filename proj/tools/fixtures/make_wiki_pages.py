#!/usr/bin/env python3
"""Writes Wikipedia-style HTML pages with math annotations for the test corpus."""
import argparse
import html
import pathlib
import random

LETTERS = "abcdefghkmnpqrstuvwxyz"
GREEK = [r"\alpha", r"\beta", r"\gamma", r"\delta", r"\lambda", r"\mu", r"\sigma", r"\theta", r"\omega", r"\phi"]
FUNCS = [r"\sin", r"\cos", r"\tan", r"\log", r"\exp", r"\ln"]


def rl(r):
    return r.choice(LETTERS)


def rn(r, lo=2, hi=9):
    return str(r.randint(lo, hi))


TEMPLATES = [
    lambda r: f"{rl(r)}_{{{rn(r)}}} + {rl(r)}_{{{rn(r)}}} = {rl(r)}^{{{rn(r)}}}",
    lambda r: f"({rl(r)} + {rl(r)})^{{{rn(r)}}} = \\sum_{{k=0}}^{{{rn(r)}}} \\binom{{{rn(r)}}}{{k}} {rl(r)}^{{k}}",
    lambda r: f"\\int_{{{rn(r, 0, 3)}}}^{{{rn(r, 4, 9)}}} {rl(r)}^{{{rn(r)}}} \\, d{rl(r)}",
    lambda r: f"\\frac{{{rl(r)} + {rn(r)}}}{{{rl(r)} - {rn(r)}}} = {rl(r)}",
    lambda r: f"{r.choice(FUNCS)}({rl(r)} + {rl(r)}) = {rn(r)} {rl(r)} + {rn(r)}",
    lambda r: f"\\lim_{{{rl(r)} \\to \\infty}} \\left(1 + \\frac{{{rn(r)}}}{{{rl(r)}}}\\right)^{{{rl(r)}}}",
    lambda r: f"{r.choice(GREEK)}_{{{rl(r)}}} = {r.choice(GREEK)} \\cdot {rl(r)}_{{{rn(r)}}} + {rn(r)}",
    lambda r: f"\\sqrt{{{rl(r)}^{{2}} + {rl(r)}^{{2}}}} \\leq {rl(r)} + {rn(r)}",
    lambda r: f"P({rl(r).upper()} \\mid {rl(r).upper()}) = \\frac{{P({rl(r).upper()} \\cap {rl(r).upper()})}}{{P({rl(r).upper()})}}",
    lambda r: f"\\begin{{pmatrix}} {rn(r)} & {rl(r)} \\\\ {rl(r)} & {rn(r)} \\end{{pmatrix}} \\begin{{pmatrix}} {rl(r)} \\\\ {rl(r)} \\end{{pmatrix}}",
    lambda r: f"\\nabla \\cdot \\mathbf{{{rl(r).upper()}}} = \\frac{{\\rho_{{{rn(r)}}}}}{{\\varepsilon_{{0}}}}",
    lambda r: f"{rl(r)}({rl(r)}) = {rn(r)}{rl(r)}^{{3}} - {rn(r)}{rl(r)}^{{2}} + {rn(r)}",
    lambda r: f"\\sum_{{i=1}}^{{{rl(r)}}} {rl(r)}_{{i}} {rl(r)}_{{i}} \\geq {rn(r)}",
    lambda r: f"\\mathbb{{E}}[{rl(r).upper()}^{{{rn(r)}}}] = \\int {rl(r)}^{{{rn(r)}}} f({rl(r)}) \\, d{rl(r)}",
    lambda r: f"\\| {rl(r)} - {rl(r)} \\|_{{{rn(r)}}} < {r.choice(GREEK)} + {rn(r)}",
    lambda r: f"{rl(r)}' = {rn(r)} {rl(r)} ({rn(r)} - {rl(r)}), \\quad {rl(r)}(0) = {rn(r)}",
    lambda r: f"\\frac{{\\partial {rl(r)}}}{{\\partial t}} = {r.choice(GREEK)} \\frac{{\\partial^{{2}} {rl(r)}}}{{\\partial x^{{2}}}}",
    lambda r: f"{rl(r)} \\equiv {rn(r)} \\pmod{{{rn(r, 11, 97)}}}",
    lambda r: f"\\prod_{{j=1}}^{{{rn(r)}}} (1 - {rl(r)}^{{j}}) = {rn(r)} - {rl(r)}",
    lambda r: f"|{rl(r)}| + |{rl(r)}| \\geq |{rl(r)} + {rl(r)}| - {rn(r)}",
]

TRIVIAL = [r"\alpha", "x^2 + 1", r"\mathbb{R}"]


def math_element(latex):
    wrapped = "{\\displaystyle " + latex + "}"
    esc = html.escape(wrapped, quote=True)
    return (
        f'<span class="mwe-math-element"><math xmlns="http://www.w3.org/1998/Math/MathML" alttext="{esc}">'
        f'<semantics><mrow class="MJX-TeXAtom-ORD"><mi>x</mi></mrow>'
        f'<annotation encoding="application/x-tex">{html.escape(wrapped, quote=False)}</annotation>'
        f"</semantics></math></span>"
    )


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--pages", type=int, default=27)
    ap.add_argument("--per-page", type=int, default=20)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    r = random.Random(args.seed)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seen = set()
    for p in range(args.pages):
        formulas = []
        if p == 0:
            formulas.extend(TRIVIAL)
        while len(formulas) < args.per_page:
            f = r.choice(TEMPLATES)(r)
            if f not in seen:
                seen.add(f)
                formulas.append(f)
        body = "\n".join(f"<p>Item {i}: {math_element(f)} holds.</p>" for i, f in enumerate(formulas))
        page = f"<!DOCTYPE html>\n<html><head><title>Page {p}</title></head><body>\n{body}\n</body></html>\n"
        (out / f"page_{p:03d}.html").write_text(page, encoding="utf-8")


if __name__ == "__main__":
    main()
