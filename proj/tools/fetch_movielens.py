#!/usr/bin/env python3
"""Fetch MovieLens 100K and write it as plain TSV files.

The data ships inside the RecBole wheel, so it is taken from there with pip.

Outputs in DEST:
  ratings.tsv  user, item, rating, timestamp
  genres.tsv   item, first listed genre
"""

import argparse
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

INTER = "recbole/dataset_example/ml-100k/ml-100k.inter"
ITEM = "recbole/dataset_example/ml-100k/ml-100k.item"


def find_wheel(cache: pathlib.Path) -> pathlib.Path:
    wheels = sorted(cache.glob("recbole-*.whl"))
    if wheels:
        return wheels[-1]
    subprocess.run(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--quiet", "-d", str(cache), "recbole==1.2.1"],
        check=True,
    )
    wheels = sorted(cache.glob("recbole-*.whl"))
    if not wheels:
        raise SystemExit("pip did not produce a recbole wheel")
    return wheels[-1]


def rows(archive: zipfile.ZipFile, member: str):
    with archive.open(member) as raw:
        lines = io.TextIOWrapper(raw, encoding="utf-8", errors="replace")
        header = next(lines).rstrip("\n").split("\t")
        for line in lines:
            line = line.rstrip("\n")
            if line:
                yield dict(zip(header, line.split("\t")))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--dest", type=pathlib.Path, default=pathlib.Path("data/ml-100k"))
    parser.add_argument("--cache", type=pathlib.Path, default=None, help="directory holding or receiving the wheel")
    args = parser.parse_args()

    ratings = args.dest / "ratings.tsv"
    genres = args.dest / "genres.tsv"
    if ratings.exists() and genres.exists():
        print(f"{args.dest} already populated")
        return 0
    args.dest.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as tmp:
        cache = args.cache or pathlib.Path(tmp)
        cache.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(find_wheel(cache)) as archive:
            with open(ratings.with_suffix(".tmp"), "w", encoding="utf-8") as out:
                count = 0
                for r in rows(archive, INTER):
                    out.write(
                        f"{r['user_id:token']}\t{r['item_id:token']}\t{r['rating:float']}\t{r['timestamp:float']}\n"
                    )
                    count += 1
            with open(genres.with_suffix(".tmp"), "w", encoding="utf-8") as out:
                for r in rows(archive, ITEM):
                    genre = (r.get("class:token_seq") or "").split()
                    out.write(f"{r['item_id:token']}\t{genre[0] if genre else 'unknown'}\n")
    ratings.with_suffix(".tmp").replace(ratings)
    genres.with_suffix(".tmp").replace(genres)
    print(f"wrote {count} ratings to {ratings}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
