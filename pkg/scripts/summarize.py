"""Print the headline numbers of every report found under a results directory."""

import json
import sys
from pathlib import Path


def main(root: str = "results") -> None:
    for path in sorted(Path(root).glob("*/*.json")):
        doc = json.loads(path.read_text())
        res = doc.get("result", doc)
        flat = {k: v for k, v in res.items() if isinstance(v, (int, float, str, bool))}
        print(f"{path.parent.name}/{path.name}")
        for k, v in flat.items():
            print(f"  {k}: {v}")


if __name__ == "__main__":
    main(*sys.argv[1:])
