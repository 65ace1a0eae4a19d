#!/usr/bin/env python3
"""Rebuild the MovieLens 100K native files (u.data, u.user, u.item, u.genre,
u.occupation) from the copy bundled in the RecBole wheel on PyPI.

Use this when files.grouplens.org is unreachable. If you have the official
ml-100k.zip, just unpack it instead; the loader reads those files directly.

    python3 scripts/reconstruct_ml100k.py [--wheel PATH] [--out data/ml-100k]

Differences from the official u.item: release dates carry only the year
(written as 01-Jan-YYYY), titles lack the trailing "(YYYY)", and the video
release date and IMDb URL fields are empty. Ratings, users and genres are
identical and u.data keeps the original row order.
"""
import argparse
import glob
import os
import re
import subprocess
import sys
import tempfile
import zipfile

GENRES = [
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
]
PREFIX = "recbole/dataset_example/ml-100k/ml-100k."


def fetch_wheel(dest):
    subprocess.check_call([
        sys.executable, "-m", "pip", "download", "--no-deps",
        "recbole==1.2.1", "-d", dest,
    ])
    return glob.glob(os.path.join(dest, "recbole-*.whl"))[0]


def rows(zf, ext):
    text = zf.read(PREFIX + ext).decode("latin-1")
    return [line.split("\t") for line in text.splitlines()[1:] if line]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel")
    ap.add_argument("--out", default="data/ml-100k")
    args = ap.parse_args()

    tmp = tempfile.mkdtemp()
    wheel = args.wheel or fetch_wheel(tmp)
    zf = zipfile.ZipFile(wheel)
    os.makedirs(args.out, exist_ok=True)

    def write(name, lines):
        with open(os.path.join(args.out, name), "w", encoding="latin-1", newline="\n") as f:
            for line in lines:
                f.write(line + "\n")

    write("u.data", ["\t".join(r[:4]) for r in rows(zf, "inter")])
    write("u.user", ["|".join(r[:5]) for r in rows(zf, "user")])

    items = []
    for item_id, title, year, classes in rows(zf, "item"):
        if not year.isdigit():
            m = re.search(r"\((\d{4})\)", title)
            year = m.group(1) if m else ""
        date = "01-Jan-%s" % year if year else ""
        present = set(classes.split())
        flags = ["1" if g in present else "0" for g in GENRES]
        items.append("|".join([item_id, title, date, "", ""] + flags))
    write("u.item", items)

    write("u.genre", ["%s|%d" % (g, i) for i, g in enumerate(GENRES)])
    occupations = sorted({r[3] for r in rows(zf, "user")})
    write("u.occupation", occupations)
    print("wrote MovieLens 100K files to", args.out)


if __name__ == "__main__":
    main()
